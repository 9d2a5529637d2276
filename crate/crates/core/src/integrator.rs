//! Adaptive embedded Runge–Kutta integration of complex autonomous systems on `t ∈ [0, 1]`.
//!
//! The stepper is the Dormand–Prince 5(4) pair (J. R. Dormand, P. J. Prince,
//! "A family of embedded Runge-Kutta formulae", J. Comp. Appl. Math. 6, 1980)
//! with first-same-as-last reuse and local extrapolation: the 5th-order
//! solution is propagated and the difference to the 4th-order one is the
//! error estimate. State is complex throughout; the error norm is the
//! componentwise modulus.

use num_traits::Zero;
use thiserror::Error;

use crate::flow::{FlowError, FlowState, HomotopyProblem};
use crate::poly::{self, ComplexScalar, RootConfiguration};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Accepted plus rejected steps.
    pub max_steps: usize,
    pub safety_factor: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            initial_step: 1e-3,
            min_step: 1e-14,
            max_steps: 100_000,
            safety_factor: 0.9,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegrationFailure> {
        let bad = |what: &str| Err(IntegrationFailure::InvalidConfig(what.to_string()));
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("rtol and atol must be positive");
        }
        if !(self.min_step > 0.0 && self.min_step <= self.initial_step && self.initial_step <= 1.0)
        {
            return bad("need 0 < min_step <= initial_step <= 1");
        }
        if !(self.safety_factor > 0.0 && self.safety_factor < 1.0) {
            return bad("safety_factor must lie in (0, 1)");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        Ok(())
    }
}

/// Which accepted states end up in the [`Trajectory`]. The first and last are always kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingPolicy {
    Endpoints,
    EveryStep,
    /// Forces steps to land on `k · spacing` and records exactly those points.
    Grid(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationFailure {
    #[error("collision near t = {t}: y[{i}] and y[{j}] are {distance:e} apart")]
    SingularityEncountered {
        t: f64,
        i: usize,
        j: usize,
        distance: f64,
    },
    #[error("step budget of {steps} exhausted at t = {t}")]
    StepBudgetExhausted { t: f64, steps: usize },
    #[error("step size {step:e} fell below the minimum at t = {t}")]
    StepSizeUnderflow { t: f64, step: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    InvalidInitialState(#[from] FlowError),
}

/// Accepted states, strictly increasing in `t`, from `t = 0` to `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<FlowState>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn first(&self) -> &FlowState {
        &self.samples[0]
    }

    pub fn last(&self) -> &FlowState {
        self.samples.last().expect("trajectory is never empty")
    }
}

/// Two components that came closer than the system tolerates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

/// An autonomous system `dy/dt = f(y)` on `C^N`.
pub trait ComplexOde {
    fn rhs(&self, y: &[ComplexScalar], dy: &mut [ComplexScalar]) -> Result<(), Collision>;

    /// Closest pair of components, for systems where coincidence is singular.
    fn closest_pair(&self, _y: &[ComplexScalar]) -> Option<Collision> {
        None
    }
}

impl ComplexOde for HomotopyProblem {
    fn rhs(&self, y: &[ComplexScalar], dy: &mut [ComplexScalar]) -> Result<(), Collision> {
        self.vector_field_into(y, dy).map_err(|e| match e {
            FlowError::Singularity { i, j, distance } => Collision { i, j, distance },
            other => unreachable!("vector field only fails on collision: {other}"),
        })
    }

    fn closest_pair(&self, y: &[ComplexScalar]) -> Option<Collision> {
        poly::closest_pair(y)
            .ok()
            .map(|(i, j, distance)| Collision { i, j, distance })
    }
}

impl<F> ComplexOde for F
where
    F: Fn(&[ComplexScalar], &mut [ComplexScalar]),
{
    fn rhs(&self, y: &[ComplexScalar], dy: &mut [ComplexScalar]) -> Result<(), Collision> {
        self(y, dy);
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau. The field is autonomous, so the abscissae
// only appear in the consistency test.
#[cfg(test)]
const C2: f64 = 1.0 / 5.0;
#[cfg(test)]
const C3: f64 = 3.0 / 10.0;
#[cfg(test)]
const C4: f64 = 4.0 / 5.0;
#[cfg(test)]
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// 5th-order weights, also the last stage row (FSAL)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const GROW_MAX: f64 = 5.0;
const SHRINK_MIN: f64 = 0.1;

struct Stages {
    k: [Vec<ComplexScalar>; 7],
    tmp: Vec<ComplexScalar>,
    y_new: Vec<ComplexScalar>,
}

impl Stages {
    fn new(n: usize) -> Self {
        let z = || vec![ComplexScalar::zero(); n];
        Self {
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            y_new: z(),
        }
    }
}

enum Attempt {
    Done { err: f64 },
    Collided(Collision),
    NonFinite,
}

/// One trial step from `y` with `k[0] = f(y)` already filled. On success
/// `y_new` and `k[6] = f(y_new)` are set.
fn try_step<S: ComplexOde + ?Sized>(
    sys: &S,
    y: &[ComplexScalar],
    h: f64,
    st: &mut Stages,
    cfg: &IntegratorConfig,
) -> Attempt {
    let n = y.len();
    macro_rules! stage {
        ($dst:expr, $( ($a:expr, $src:expr) ),+ ) => {{
            for i in 0..n {
                let mut acc = ComplexScalar::zero();
                $( acc += st.k[$src][i] * $a; )+
                st.tmp[i] = y[i] + acc * h;
            }
            if let Err(c) = sys.rhs(&st.tmp, &mut st.k[$dst]) {
                return Attempt::Collided(c);
            }
        }};
    }
    stage!(1, (A21, 0));
    stage!(2, (A31, 0), (A32, 1));
    stage!(3, (A41, 0), (A42, 1), (A43, 2));
    stage!(4, (A51, 0), (A52, 1), (A53, 2), (A54, 3));
    stage!(5, (A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4));

    for i in 0..n {
        let k = &st.k;
        let incr = k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6;
        st.y_new[i] = y[i] + incr * h;
    }
    if st.y_new.iter().any(|v| !poly::is_finite(*v)) {
        return Attempt::NonFinite;
    }
    if let Err(c) = sys.rhs(&st.y_new, &mut st.k[6]) {
        return Attempt::Collided(c);
    }

    let mut err: f64 = 0.0;
    for i in 0..n {
        let k = &st.k;
        let e = (k[0][i] * E1
            + k[2][i] * E3
            + k[3][i] * E4
            + k[4][i] * E5
            + k[5][i] * E6
            + k[6][i] * E7)
            * h;
        let scale = cfg.atol + cfg.rtol * y[i].norm().max(st.y_new[i].norm());
        err = err.max(e.norm() / scale);
    }
    if !err.is_finite() {
        return Attempt::NonFinite;
    }
    Attempt::Done { err }
}

/// Integrates `sys` from `y0` at `t = 0` to `t = 1`.
pub fn integrate_system<S: ComplexOde + ?Sized>(
    sys: &S,
    y0: &[ComplexScalar],
    cfg: &IntegratorConfig,
    record: SamplingPolicy,
) -> Result<Trajectory, IntegrationFailure> {
    cfg.validate()?;
    if let SamplingPolicy::Grid(s) = record {
        if !(s > 0.0 && s <= 1.0) {
            return Err(IntegrationFailure::InvalidConfig(
                "grid spacing must lie in (0, 1]".into(),
            ));
        }
    }
    let n = y0.len();
    let state = |t: f64, y: &[ComplexScalar]| FlowState {
        t,
        y: RootConfiguration::from_vec_unchecked(y.to_vec()),
    };

    let mut st = Stages::new(n);
    let mut y = y0.to_vec();
    if let Err(c) = sys.rhs(&y, &mut st.k[0]) {
        return Err(IntegrationFailure::SingularityEncountered {
            t: 0.0,
            i: c.i,
            j: c.j,
            distance: c.distance,
        });
    }

    let mut samples = vec![state(0.0, &y)];
    let mut t = 0.0f64;
    let mut h = cfg.initial_step;
    let mut steps = 0usize;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut grid_index = 0usize;
    let mut prev_sep = sys.closest_pair(&y).map(|c| c.distance);
    let mut sep = prev_sep;
    let mut last_collision: Option<Collision> = None;

    while t < 1.0 {
        if steps >= cfg.max_steps {
            return Err(IntegrationFailure::StepBudgetExhausted { t, steps });
        }
        steps += 1;

        let mut landing = None;
        let mut h_try = h;
        if t + h_try >= 1.0 {
            h_try = 1.0 - t;
            landing = Some(1.0);
        }
        if let SamplingPolicy::Grid(s) = record {
            let g = (grid_index + 1) as f64 * s;
            // a grid point within rounding of 1 is the endpoint itself
            if g < 1.0 - 1e-9 * s && t + h_try >= g {
                h_try = g - t;
                landing = Some(g);
            }
        }

        let factor;
        match try_step(sys, &y, h_try, &mut st, cfg) {
            Attempt::Done { err } if err <= 1.0 => {
                t = landing.unwrap_or(t + h_try);
                std::mem::swap(&mut y, &mut st.y_new);
                st.k.swap(0, 6);
                accepted += 1;
                last_collision = None;
                prev_sep = sep;
                sep = sys.closest_pair(&y).map(|c| c.distance);

                let on_grid = matches!(record, SamplingPolicy::Grid(_)) && landing.is_some();
                if on_grid {
                    grid_index += 1;
                }
                if t >= 1.0 || on_grid || record == SamplingPolicy::EveryStep {
                    samples.push(state(t, &y));
                }

                let grow = if err == 0.0 {
                    GROW_MAX
                } else {
                    (cfg.safety_factor * err.powf(-0.2)).clamp(SHRINK_MIN, GROW_MAX)
                };
                let next = h_try * grow;
                // a step cut short by a landing point says nothing about the controller's step
                h = if landing.is_some() { next.max(h) } else { next };
                continue;
            }
            Attempt::Done { err } => {
                factor = (cfg.safety_factor * err.powf(-0.2)).clamp(SHRINK_MIN, 1.0);
            }
            Attempt::Collided(c) => {
                last_collision = Some(c);
                factor = SHRINK_MIN;
            }
            Attempt::NonFinite => {
                factor = SHRINK_MIN;
            }
        }

        rejected += 1;
        h = h_try * factor;
        if h < cfg.min_step {
            let current = sys.closest_pair(&y);
            let shrinking = match (sep, prev_sep) {
                (Some(now), Some(before)) => now < before,
                _ => false,
            };
            let worst = match (last_collision, current) {
                (Some(a), Some(b)) => Some(if a.distance <= b.distance { a } else { b }),
                (a, b) => a.or(b),
            };
            return match worst {
                Some(c) if shrinking || last_collision.is_some() => {
                    Err(IntegrationFailure::SingularityEncountered {
                        t,
                        i: c.i,
                        j: c.j,
                        distance: c.distance,
                    })
                }
                _ => Err(IntegrationFailure::StepSizeUnderflow { t, step: h }),
            };
        }
    }

    Ok(Trajectory {
        samples,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// Integrates the root flow of `problem` from `y0` to `t = 1`.
pub fn integrate(
    problem: &HomotopyProblem,
    y0: &RootConfiguration,
    cfg: &IntegratorConfig,
    record: SamplingPolicy,
) -> Result<Trajectory, IntegrationFailure> {
    if y0.len() != problem.degree() {
        return Err(FlowError::Poly(poly::PolyError::DegreeMismatch {
            expected: problem.degree(),
            got: y0.len(),
        })
        .into());
    }
    let (i, j, distance) = y0.closest_pair().map_err(FlowError::from)?;
    if distance < problem.collision_threshold() {
        return Err(FlowError::InitialCollision { i, j, distance }.into());
    }
    integrate_system(problem, y0.as_slice(), cfg, record)
}
