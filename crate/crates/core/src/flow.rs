//! The root-flow ODE: as the coefficients move on the straight line
//! `γ(t) = γ(0) + (c − γ(0)) t`, the zeros `y_n(t)` of the moving polynomial obey
//!
//! ```text
//! dy_n/dt = −[∏_{l≠n} (y_n − y_l)]^{-1} · Σ_m (c_m − γ_m(0)) y_n^{N−m}
//! ```
//!
//! The difference `c − γ(0)` is frozen when the problem is built, so the
//! field is autonomous and depends only on the current positions.

use num_traits::Zero;
use thiserror::Error;

use crate::poly::{
    self, coeffs_from_roots, eval_tail, ComplexScalar, MonicPolynomial, PolyError,
    RootConfiguration,
};

/// Relative collision threshold; scaled by `max(1, R)` with `R` the Cauchy bound of the target.
pub const COLLISION_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("initial data collide: y[{i}] and y[{j}] are {distance:e} apart")]
    InitialCollision { i: usize, j: usize, distance: f64 },
    #[error("singular field: y[{i}] and y[{j}] are {distance:e} apart")]
    Singularity { i: usize, j: usize, distance: f64 },
    #[error("trajectory has {0} samples, need at least 3")]
    TooFewSamples(usize),
    #[error("no interior sample has neighbours at spacing {0}")]
    NoCentralDifference(f64),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Target coefficients `c`, start coefficients `γ(0)` and `d = c − γ(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyProblem {
    target: MonicPolynomial,
    start_coeffs: Vec<ComplexScalar>,
    delta: Vec<ComplexScalar>,
    collision_threshold: f64,
}

/// A point `(t, y(t))` on the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub y: RootConfiguration,
}

/// Builds the problem from the target and the initial zeros `y(0)`.
pub fn make_problem(
    target: &MonicPolynomial,
    y0: &RootConfiguration,
) -> Result<HomotopyProblem, FlowError> {
    HomotopyProblem::new(target, y0)
}

impl HomotopyProblem {
    pub fn new(target: &MonicPolynomial, y0: &RootConfiguration) -> Result<Self, FlowError> {
        let n = target.degree();
        if n < 2 {
            return Err(PolyError::TooFewRoots { needed: 2, got: n }.into());
        }
        if y0.len() != n {
            return Err(PolyError::DegreeMismatch {
                expected: n,
                got: y0.len(),
            }
            .into());
        }
        let collision_threshold = COLLISION_RELATIVE * target.cauchy_root_bound().max(1.0);
        let (i, j, distance) = y0.closest_pair()?;
        if distance < collision_threshold {
            return Err(FlowError::InitialCollision { i, j, distance });
        }
        let start_coeffs = coeffs_from_roots(y0).coeffs().to_vec();
        let delta = target
            .coeffs()
            .iter()
            .zip(&start_coeffs)
            .map(|(c, g)| c - g)
            .collect();
        Ok(Self {
            target: target.clone(),
            start_coeffs,
            delta,
            collision_threshold,
        })
    }

    pub fn degree(&self) -> usize {
        self.delta.len()
    }

    pub fn target(&self) -> &MonicPolynomial {
        &self.target
    }

    /// `γ(0)`.
    pub fn start_coeffs(&self) -> &[ComplexScalar] {
        &self.start_coeffs
    }

    /// `c − γ(0)`.
    pub fn delta(&self) -> &[ComplexScalar] {
        &self.delta
    }

    pub fn collision_threshold(&self) -> f64 {
        self.collision_threshold
    }

    /// True when `y(0)` already are the target zeros and the flow is at rest.
    pub fn is_fixed_point(&self) -> bool {
        self.delta.iter().all(|d| d.is_zero())
    }

    /// Writes `dy/dt` at `y` into `out`.
    pub fn vector_field_into(
        &self,
        y: &[ComplexScalar],
        out: &mut [ComplexScalar],
    ) -> Result<(), FlowError> {
        debug_assert_eq!(y.len(), self.degree());
        debug_assert_eq!(out.len(), y.len());
        let mut closest = (0, 0, f64::INFINITY);
        for (n, &yn) in y.iter().enumerate() {
            let mut denom = ComplexScalar::new(1.0, 0.0);
            for (l, &yl) in y.iter().enumerate() {
                if l == n {
                    continue;
                }
                let diff = yn - yl;
                // each pair is visited twice; the first visit has n < l
                if n < l {
                    let d = diff.norm();
                    if d < closest.2 {
                        closest = (n, l, d);
                    }
                }
                denom *= diff;
            }
            let tail = eval_tail(&self.delta, yn);
            out[n] = if tail.is_zero() {
                ComplexScalar::zero()
            } else {
                -tail / denom
            };
        }
        if closest.2 < self.collision_threshold {
            let (i, j, distance) = closest;
            return Err(FlowError::Singularity { i, j, distance });
        }
        // overflow in the quotient is a near-collision the threshold missed
        if out.iter().any(|v| !poly::is_finite(*v)) {
            let (i, j, distance) = closest;
            return Err(FlowError::Singularity { i, j, distance });
        }
        Ok(())
    }

    /// `dy/dt` at `y`. Independent of `t`.
    pub fn vector_field(&self, y: &RootConfiguration) -> Result<Vec<ComplexScalar>, FlowError> {
        if y.len() != self.degree() {
            return Err(PolyError::DegreeMismatch {
                expected: self.degree(),
                got: y.len(),
            }
            .into());
        }
        let mut out = vec![ComplexScalar::zero(); y.len()];
        self.vector_field_into(y, &mut out)?;
        Ok(out)
    }

    /// `γ(t) = γ(0) + d t`. Defined for any real `t`.
    pub fn gamma_at(&self, t: f64) -> Vec<ComplexScalar> {
        if t == 1.0 {
            // land exactly on the target rather than on γ(0) + d
            return self.target.coeffs().to_vec();
        }
        self.start_coeffs
            .iter()
            .zip(&self.delta)
            .map(|(g, d)| g + d * t)
            .collect()
    }

    /// `max_n |p_{γ(t)}(y_n)| / (1 + |y_n|)^N`; zero along the exact flow.
    pub fn homotopy_residual(&self, state: &FlowState) -> f64 {
        let coeffs = self.gamma_at(state.t);
        let n = self.degree();
        state
            .y
            .iter()
            .map(|&z| {
                let value = coeffs
                    .iter()
                    .fold(ComplexScalar::new(1.0, 0.0), |acc, &c| acc * z + c);
                poly::normalized(value, z, n)
            })
            .fold(0.0, f64::max)
    }

    /// Compares central differences of a sampled trajectory with the field.
    ///
    /// Every interior sample whose neighbours sit at spacing `h` (to within
    /// 1e-6 relative) contributes `max_n |Δy_n − f_n| / max_n |f_n|`, where
    /// `Δy` is the central difference over the actual neighbour times. The
    /// maximum over contributing samples is returned.
    pub fn identity_fd_check(&self, trajectory: &[FlowState], h: f64) -> Result<f64, FlowError> {
        if trajectory.len() < 3 {
            return Err(FlowError::TooFewSamples(trajectory.len()));
        }
        let spacing_ok = |a: f64, b: f64| ((b - a) - h).abs() <= 1e-6 * h;
        let mut worst: Option<f64> = None;
        for w in trajectory.windows(3) {
            let (prev, mid, next) = (&w[0], &w[1], &w[2]);
            if !spacing_ok(prev.t, mid.t) || !spacing_ok(mid.t, next.t) {
                continue;
            }
            let field = self.vector_field(&mid.y)?;
            let span = next.t - prev.t;
            let scale = field.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let err = next
                .y
                .iter()
                .zip(prev.y.iter())
                .zip(&field)
                .map(|((a, b), f)| ((a - b) / span - f).norm())
                .fold(0.0, f64::max);
            let rel = if err == 0.0 { 0.0 } else { err / scale };
            worst = Some(worst.map_or(rel, |w: f64| w.max(rel)));
        }
        worst.ok_or(FlowError::NoCentralDifference(h))
    }
}

/// See [`HomotopyProblem::vector_field`].
pub fn vector_field(
    problem: &HomotopyProblem,
    y: &RootConfiguration,
) -> Result<Vec<ComplexScalar>, FlowError> {
    problem.vector_field(y)
}

pub fn gamma_at(problem: &HomotopyProblem, t: f64) -> Vec<ComplexScalar> {
    problem.gamma_at(t)
}

pub fn homotopy_residual(problem: &HomotopyProblem, state: &FlowState) -> f64 {
    problem.homotopy_residual(state)
}

pub fn identity_fd_check(
    problem: &HomotopyProblem,
    trajectory: &[FlowState],
    h: f64,
) -> Result<f64, FlowError> {
    problem.identity_fd_check(trajectory, h)
}
