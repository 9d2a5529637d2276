//! Independent root finders for cross-checking the flow solver.

use std::f64::consts::PI;

use num_traits::Zero;
use thiserror::Error;

use crate::poly::{ComplexScalar, MonicPolynomial, RootConfiguration};

/// Angular offset of the Durand–Kerner start circle, in radians.
const START_ANGLE: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("durand-kerner did not converge in {iterations} iterations (last update {last_update:e})")]
    NoConvergence {
        iterations: usize,
        last_update: f64,
        last: RootConfiguration,
    },
}

/// Zeros of `z² + c1 z + c2`, larger-magnitude root first.
///
/// The larger root avoids cancellation by choosing the sign of the square
/// root to align with `c1`; the smaller one is `c2` divided by it.
pub fn quadratic_roots(c1: ComplexScalar, c2: ComplexScalar) -> (ComplexScalar, ComplexScalar) {
    let disc = (c1 * c1 - 4.0 * c2).sqrt();
    let sum = if (c1.conj() * disc).re >= 0.0 {
        c1 + disc
    } else {
        c1 - disc
    };
    let big = -sum / 2.0;
    if big.is_zero() {
        // c1 = 0 and c2 = 0
        return (big, big);
    }
    (big, c2 / big)
}

/// Weierstrass / Durand–Kerner simultaneous iteration.
///
/// Starts from `N` points on the Cauchy-bound circle, offset by a fixed
/// angle so that no start point is real, and sweeps
/// `z_n ← z_n − P(z_n) / ∏_{l≠n} (z_n − z_l)` using already-updated
/// neighbours. Stops once the largest update in a sweep is at most `tol`.
/// Updates bottom out at rounding level: around 1e-13 for a few well
/// separated unit-scale zeros, and up to 1e-11 for twenty of them packed in
/// the unit disc. A `tol` below that floor never converges.
pub fn durand_kerner(
    p: &MonicPolynomial,
    tol: f64,
    max_iters: usize,
) -> Result<RootConfiguration, OracleError> {
    let n = p.degree();
    let radius = p.cauchy_root_bound();
    let mut z: Vec<ComplexScalar> = (0..n)
        .map(|k| ComplexScalar::from_polar(radius, 2.0 * PI * k as f64 / n as f64 + START_ANGLE))
        .collect();
    let mut last_update = f64::INFINITY;
    for _ in 0..max_iters {
        last_update = 0.0;
        for i in 0..n {
            let mut denom = ComplexScalar::new(1.0, 0.0);
            for (l, &zl) in z.iter().enumerate() {
                if l != i {
                    denom *= z[i] - zl;
                }
            }
            let step = if denom.is_zero() {
                // two iterates coincide; nudge one off the other
                ComplexScalar::from_polar(1e-8 * radius, START_ANGLE)
            } else {
                p.eval(z[i]) / denom
            };
            if !step.re.is_finite() || !step.im.is_finite() {
                continue;
            }
            z[i] -= step;
            last_update = last_update.max(step.norm());
        }
        if last_update <= tol {
            return Ok(RootConfiguration::from_vec_unchecked(z));
        }
    }
    Err(OracleError::NoConvergence {
        iterations: max_iters,
        last_update,
        last: RootConfiguration::from_vec_unchecked(z),
    })
}
