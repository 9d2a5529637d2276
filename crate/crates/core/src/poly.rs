//! Monic complex polynomials, Horner evaluation and the roots-to-coefficients map.

use std::fmt;
use std::ops::{Deref, Index};

use num_complex::Complex64;
use num_traits::Zero;
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type ComplexScalar = Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("a polynomial needs at least one coefficient")]
    Empty,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("operation needs at least {needed} roots, got {got}")]
    TooFewRoots { needed: usize, got: usize },
    #[error("leading coefficient is zero")]
    ZeroLeading,
    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },
}

pub(crate) fn is_finite(z: ComplexScalar) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn check_finite(values: &[ComplexScalar]) -> Result<(), PolyError> {
    match values.iter().position(|z| !is_finite(*z)) {
        Some(i) => Err(PolyError::NonFinite(i)),
        None => Ok(()),
    }
}

/// `z^N + c_1 z^(N-1) + ... + c_N`. The leading 1 is implicit and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MonicPolynomial {
    coeffs: Vec<ComplexScalar>,
}

impl MonicPolynomial {
    /// Builds from `c_1..c_N` (descending powers after the leading `z^N`).
    pub fn new(coeffs: Vec<ComplexScalar>) -> Result<Self, PolyError> {
        if coeffs.is_empty() {
            return Err(PolyError::Empty);
        }
        check_finite(&coeffs)?;
        Ok(Self { coeffs })
    }

    /// Normalizes `lead z^N + a_1 z^(N-1) + ... + a_N` to monic form.
    pub fn from_non_monic(
        lead: ComplexScalar,
        rest: &[ComplexScalar],
    ) -> Result<Self, PolyError> {
        if !is_finite(lead) {
            return Err(PolyError::NonFinite(0));
        }
        if lead.is_zero() {
            return Err(PolyError::ZeroLeading);
        }
        Self::new(rest.iter().map(|a| a / lead).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `c_1..c_N`.
    pub fn coeffs(&self) -> &[ComplexScalar] {
        &self.coeffs
    }

    /// Horner evaluation: N multiplies and N adds.
    pub fn eval(&self, z: ComplexScalar) -> ComplexScalar {
        self.coeffs
            .iter()
            .fold(ComplexScalar::new(1.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative in one Horner pass.
    pub fn eval_with_derivative(&self, z: ComplexScalar) -> (ComplexScalar, ComplexScalar) {
        let mut p = ComplexScalar::new(1.0, 0.0);
        let mut dp = ComplexScalar::zero();
        for &c in &self.coeffs {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `|P(z)| / (1 + |z|)^N`, the degree- and scale-comparable residual.
    pub fn normalized_residual(&self, z: ComplexScalar) -> f64 {
        normalized(self.eval(z), z, self.degree())
    }

    /// Cauchy bound `1 + max |c_m|`; every root has modulus at most this.
    pub fn cauchy_root_bound(&self) -> f64 {
        1.0 + self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl fmt::Display for MonicPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.degree();
        write!(f, "z^{n}")?;
        for (m, c) in self.coeffs.iter().enumerate() {
            let power = n - m - 1;
            write!(f, " + ({c})")?;
            match power {
                0 => {}
                1 => write!(f, " z")?,
                _ => write!(f, " z^{power}")?,
            }
        }
        Ok(())
    }
}

pub(crate) fn normalized(value: ComplexScalar, z: ComplexScalar, degree: usize) -> f64 {
    value.norm() / (1.0 + z.norm()).powi(degree as i32)
}

/// `Σ_{m=1..N} d_m z^(N-m)` by Horner.
///
/// For `d = c − γ` this equals `P_c(z) − P_γ(z)`: the `z^N` terms cancel.
pub fn eval_tail(d: &[ComplexScalar], z: ComplexScalar) -> ComplexScalar {
    d.iter().fold(ComplexScalar::zero(), |acc, &c| acc * z + c)
}

/// An unordered collection of complex positions, stored in an arbitrary but fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct RootConfiguration {
    positions: Vec<ComplexScalar>,
}

impl RootConfiguration {
    pub fn new(positions: Vec<ComplexScalar>) -> Result<Self, PolyError> {
        if positions.is_empty() {
            return Err(PolyError::Empty);
        }
        check_finite(&positions)?;
        Ok(Self { positions })
    }

    pub(crate) fn from_vec_unchecked(positions: Vec<ComplexScalar>) -> Self {
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn as_slice(&self) -> &[ComplexScalar] {
        &self.positions
    }

    pub fn into_vec(self) -> Vec<ComplexScalar> {
        self.positions
    }

    /// Closest pair `(i, j, |y_i − y_j|)` with `i < j`.
    pub fn closest_pair(&self) -> Result<(usize, usize, f64), PolyError> {
        closest_pair(&self.positions)
    }

    pub fn min_pairwise_distance(&self) -> Result<f64, PolyError> {
        self.closest_pair().map(|(_, _, d)| d)
    }

    /// Sorted by real part, then imaginary part.
    pub fn canonical(&self) -> Self {
        let mut positions = self.positions.clone();
        positions.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Self { positions }
    }

    /// Coefficients of `∏ (z − x_n)`.
    pub fn to_polynomial(&self) -> MonicPolynomial {
        coeffs_from_roots(self)
    }
}

impl Deref for RootConfiguration {
    type Target = [ComplexScalar];
    fn deref(&self) -> &[ComplexScalar] {
        &self.positions
    }
}

impl Index<usize> for RootConfiguration {
    type Output = ComplexScalar;
    fn index(&self, i: usize) -> &ComplexScalar {
        &self.positions[i]
    }
}

pub(crate) fn closest_pair(y: &[ComplexScalar]) -> Result<(usize, usize, f64), PolyError> {
    if y.len() < 2 {
        return Err(PolyError::TooFewRoots {
            needed: 2,
            got: y.len(),
        });
    }
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            let d = (y[i] - y[j]).norm();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    Ok(best)
}

/// `min_{n<l} |y_n − y_l|`.
pub fn min_pairwise_distance(roots: &RootConfiguration) -> Result<f64, PolyError> {
    roots.min_pairwise_distance()
}

/// Vieta map: `c_m = (−1)^m e_m(x)`.
///
/// Expands `∏ (z − x_n)` one factor at a time, which is O(N²). The result is
/// not bitwise permutation invariant; reorderings agree to rounding,
/// i.e. within a small multiple of `N·ε·e_m(|x|)` per coefficient.
pub fn coeffs_from_roots(roots: &RootConfiguration) -> MonicPolynomial {
    let n = roots.len();
    // a[0] is the implicit leading 1
    let mut a = vec![ComplexScalar::zero(); n + 1];
    a[0] = ComplexScalar::new(1.0, 0.0);
    for (k, &x) in roots.iter().enumerate() {
        for m in (1..=k + 1).rev() {
            a[m] = a[m] - x * a[m - 1];
        }
    }
    a.remove(0);
    MonicPolynomial { coeffs: a }
}

/// `1 + max_m |c_m|`.
pub fn cauchy_root_bound(p: &MonicPolynomial) -> f64 {
    p.cauchy_root_bound()
}

pub fn eval(p: &MonicPolynomial, z: ComplexScalar) -> ComplexScalar {
    p.eval(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> ComplexScalar {
        ComplexScalar::new(re, im)
    }

    fn poly(cs: &[(f64, f64)]) -> MonicPolynomial {
        MonicPolynomial::new(cs.iter().map(|&(r, i)| c(r, i)).collect()).unwrap()
    }

    fn roots(cs: &[(f64, f64)]) -> RootConfiguration {
        RootConfiguration::new(cs.iter().map(|&(r, i)| c(r, i)).collect()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let p = poly(&[(-3.0, 0.0), (2.0, 0.0)]);
        assert_eq!(p.eval(c(1.0, 0.0)), c(0.0, 0.0));
        assert_eq!(p.eval(c(0.0, 0.0)), c(2.0, 0.0));
        let cube = poly(&[(0.0, 0.0), (0.0, 0.0), (-1.0, 0.0)]);
        assert_eq!(cube.eval(c(0.0, 1.0)), c(-1.0, -1.0));
    }

    #[test]
    fn derivative_matches_hand_expansion() {
        // p = z^3 - 1, p' = 3z^2
        let p = poly(&[(0.0, 0.0), (0.0, 0.0), (-1.0, 0.0)]);
        let z = c(0.5, -2.0);
        let (v, dv) = p.eval_with_derivative(z);
        assert!((v - (z * z * z - 1.0)).norm() < 1e-14);
        assert!((dv - 3.0 * z * z).norm() < 1e-14);
    }

    #[test]
    fn eval_tail_examples() {
        assert_eq!(eval_tail(&[c(0.0, 0.0), c(-5.0, 0.0)], c(0.0, 2.0)), c(-5.0, 0.0));
        assert_eq!(eval_tail(&[c(0.0, 0.0); 7], c(3.0, -1.5)), c(0.0, 0.0));
        assert_eq!(eval_tail(&[c(1.0, 0.0), c(1.0, 0.0)], c(3.0, 0.0)), c(4.0, 0.0));
    }

    #[test]
    fn vieta_examples() {
        assert_eq!(
            coeffs_from_roots(&roots(&[(1.0, 0.0), (2.0, 0.0)])).coeffs(),
            &[c(-3.0, 0.0), c(2.0, 0.0)]
        );
        assert_eq!(
            coeffs_from_roots(&roots(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)])).coeffs(),
            &[c(-6.0, 0.0), c(11.0, 0.0), c(-6.0, 0.0)]
        );
        let p = coeffs_from_roots(&roots(&[(0.0, 2.0), (0.0, -2.0)]));
        assert_eq!(p.coeffs()[0], c(0.0, 0.0));
        assert_eq!(p.coeffs()[1], c(4.0, 0.0));
    }

    #[test]
    fn single_root_is_degree_one() {
        let p = coeffs_from_roots(&roots(&[(2.5, -1.0)]));
        assert_eq!(p.degree(), 1);
        assert_eq!(-p.coeffs()[0], c(2.5, -1.0));
    }

    #[test]
    fn cauchy_bound_examples() {
        assert_eq!(poly(&[(0.0, 0.0), (-1.0, 0.0)]).cauchy_root_bound(), 2.0);
        assert_eq!(poly(&[(0.0, 0.0); 5]).cauchy_root_bound(), 1.0);
        assert_eq!(
            poly(&[(-6.0, 0.0), (11.0, 0.0), (-6.0, 0.0)]).cauchy_root_bound(),
            12.0
        );
    }

    #[test]
    fn min_distance_examples() {
        assert_eq!(roots(&[(1.0, 0.0), (-1.0, 0.0)]).min_pairwise_distance(), Ok(2.0));
        assert_eq!(
            roots(&[(0.0, 0.0), (3.0, 0.0), (3.0, 4.0)]).min_pairwise_distance(),
            Ok(3.0)
        );
        assert_eq!(roots(&[(1.0, 0.0), (1.0, 0.0)]).min_pairwise_distance(), Ok(0.0));
        assert_eq!(
            roots(&[(1.0, 0.0)]).min_pairwise_distance(),
            Err(PolyError::TooFewRoots { needed: 2, got: 1 })
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(MonicPolynomial::new(vec![]), Err(PolyError::Empty));
        assert_eq!(
            MonicPolynomial::new(vec![c(1.0, 0.0), c(f64::NAN, 0.0)]),
            Err(PolyError::NonFinite(1))
        );
        assert!(RootConfiguration::new(vec![c(f64::INFINITY, 0.0)]).is_err());
        assert!(MonicPolynomial::from_non_monic(c(0.0, 0.0), &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn non_monic_is_normalized() {
        let p = MonicPolynomial::from_non_monic(c(2.0, 0.0), &[c(0.0, 0.0), c(-2.0, 0.0)]).unwrap();
        assert_eq!(p.coeffs(), &[c(0.0, 0.0), c(-1.0, 0.0)]);
    }

    #[test]
    fn canonical_order_sorts_re_then_im() {
        let r = roots(&[(1.0, 0.0), (-1.0, 1.0), (-1.0, -1.0)]).canonical();
        assert_eq!(r.as_slice(), &[c(-1.0, -1.0), c(-1.0, 1.0), c(1.0, 0.0)]);
    }

    fn arb_point(radius: f64) -> impl Strategy<Value = ComplexScalar> {
        (-radius..radius, -radius..radius).prop_map(|(re, im)| c(re, im))
    }

    /// `e_m(|r_1|, …, |r_N|)`: bounds every product summed into `c_m`.
    fn magnitude_scales(r: &[ComplexScalar]) -> Vec<f64> {
        let mut e = vec![1.0];
        for x in r {
            e.push(0.0);
            for m in (1..e.len()).rev() {
                e[m] += x.norm() * e[m - 1];
            }
        }
        e.split_off(1)
    }

    proptest! {
        #[test]
        fn vieta_nearly_permutation_invariant(
            r in prop::collection::vec(arb_point(10.0), 1..=12),
            rotate in 0usize..12,
            reverse in any::<bool>(),
        ) {
            // accumulation order follows the input, so results differ in the last bits
            let mut shuffled = r.clone();
            shuffled.rotate_left(rotate % r.len());
            if reverse {
                shuffled.reverse();
            }
            let a = coeffs_from_roots(&RootConfiguration::new(r.clone()).unwrap());
            let b = coeffs_from_roots(&RootConfiguration::new(shuffled).unwrap());
            for ((x, y), scale) in a.coeffs().iter().zip(b.coeffs()).zip(magnitude_scales(&r)) {
                prop_assert!((x - y).norm() <= 1e-14 * scale, "{} vs {}", x, y);
            }
        }

        #[test]
        fn vieta_roots_evaluate_to_zero(r in prop::collection::vec(arb_point(10.0), 1..=12)) {
            let roots = RootConfiguration::new(r.clone()).unwrap();
            let p = coeffs_from_roots(&roots);
            let big = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for z in &r {
                prop_assert!(p.eval(*z).norm() <= 1e-10 * (1.0 + big).powi(r.len() as i32));
            }
        }

        #[test]
        fn eval_tail_is_a_difference(
            pairs in prop::collection::vec((arb_point(1.0), arb_point(1.0)), 1..=12),
            z in arb_point(2.0),
        ) {
            let (cs, gs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let d: Vec<_> = cs.iter().zip(&gs).map(|(a, b)| a - b).collect();
            let pc = MonicPolynomial::new(cs.clone()).unwrap();
            let pg = MonicPolynomial::new(gs.clone()).unwrap();
            let n = cs.len() as i32;
            let scale = z.norm().powi(n)
                + cs.iter().zip(&gs).enumerate()
                    .map(|(m, (a, b))| (a.norm() + b.norm()) * z.norm().powi(n - 1 - m as i32))
                    .sum::<f64>();
            let diff = eval_tail(&d, z) - (pc.eval(z) - pg.eval(z));
            prop_assert!(diff.norm() <= 1e-13 * scale);
        }
    }
}
