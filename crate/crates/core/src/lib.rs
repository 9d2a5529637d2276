//! All zeros of a monic complex polynomial by integrating the root-flow ODE.
//!
//! Pick arbitrary distinct complex starting points `y(0)`, take the
//! polynomial they are the zeros of, and deform its coefficients along a
//! straight line into the target's. The zeros follow an autonomous ODE and
//! arrive at the target's zeros at `t = 1`.

pub mod cli;
pub mod diagnostics;
pub mod flow;
pub mod integrator;
pub mod oracle;
pub mod poly;
pub mod solver;

pub use flow::{make_problem, FlowError, FlowState, HomotopyProblem};
pub use integrator::{integrate, IntegrationFailure, IntegratorConfig, SamplingPolicy, Trajectory};
pub use poly::{coeffs_from_roots, eval_tail, ComplexScalar, MonicPolynomial, PolyError, RootConfiguration};
pub use solver::{solve, SolveError, SolveReport, SolverConfig};
