//! Start to finish: sample initial zeros, build the flow, integrate to `t = 1`,
//! restart on collisions, polish, and compare independent starts.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::flow::{make_problem, FlowError};
use crate::integrator::{integrate, IntegrationFailure, IntegratorConfig, SamplingPolicy, Trajectory};
use crate::poly::{self, ComplexScalar, MonicPolynomial, PolyError, RootConfiguration};

/// Attempts allowed to [`sample_initial_data`] before giving up.
pub const SAMPLE_ATTEMPTS: usize = 1000;
/// Polished zeros closer than this times the Cauchy bound count as a cluster.
pub const CLUSTER_RELATIVE: f64 = 1e-6;
/// Residual tolerance applied to clustered zeros.
pub const CLUSTER_RESIDUAL_TOL: f64 = 1e-5;
/// Below this `|P'(z)|` Newton gives up on a point.
pub const FLAT_DERIVATIVE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub seed: u64,
    pub num_starts: usize,
    pub max_restarts_per_start: usize,
    pub polish: bool,
    pub polish_max_iters: usize,
    /// Newton stops once the normalized residual is at or below this.
    pub polish_tol: f64,
    pub residual_tol: f64,
    pub integrator: IntegratorConfig,
    /// Keep every accepted step of the reported start.
    pub record_trajectory: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_starts: 3,
            max_restarts_per_start: 5,
            polish: true,
            polish_max_iters: 10,
            polish_tol: 1e-13,
            residual_tol: 1e-8,
            integrator: IntegratorConfig::default(),
            record_trajectory: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolveError> {
        if self.num_starts == 0 {
            return Err(SolveError::InvalidConfig("num_starts must be at least 1".into()));
        }
        if self.polish && self.polish_max_iters == 0 {
            return Err(SolveError::InvalidConfig(
                "polish_max_iters must be at least 1".into(),
            ));
        }
        if !(self.residual_tol > 0.0) || !(self.polish_tol > 0.0) {
            return Err(SolveError::InvalidConfig("tolerances must be positive".into()));
        }
        self.integrator
            .validate()
            .map_err(|e| SolveError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveWarning {
    /// Zeros closer than [`CLUSTER_RELATIVE`]` · R`; indices into `roots`.
    NearMultipleRoot {
        indices: Vec<usize>,
        center: ComplexScalar,
        spread: f64,
    },
    RelaxedTolerance { indices: Vec<usize>, tolerance: f64 },
    /// Newton met a vanishing derivative and left the point alone.
    FlatDerivative { index: usize },
    StartFailed { start: usize, failure: IntegrationFailure },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Sorted by real, then imaginary part.
    pub roots: RootConfiguration,
    /// Normalized `|P(x_n)| / (1 + |x_n|)^N`, aligned with `roots`.
    pub residuals: Vec<f64>,
    /// Flow endpoints before Newton, aligned with `roots`.
    pub pre_polish_roots: RootConfiguration,
    pub pre_polish_residuals: Vec<f64>,
    pub restarts_used: usize,
    pub starts_used: usize,
    /// Largest matched distance between the reported start and any other, after polish.
    pub consensus_discrepancy: f64,
    pub pre_polish_consensus_discrepancy: f64,
    pub warnings: Vec<SolveWarning>,
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no start reached t = 1 ({starts} starts, {restarts} restarts); last failure: {last_failure}")]
    NoConvergence {
        starts: usize,
        restarts: usize,
        last_failure: IntegrationFailure,
    },
    #[error("{} zero(s) above the residual tolerance, worst {worst:e}", offending.len())]
    ResidualTooLarge {
        /// `(index into report.roots, root, residual)`
        offending: Vec<(usize, ComplexScalar, f64)>,
        worst: f64,
        report: Box<SolveReport>,
    },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("initial data: {0}")]
    InvalidInitialData(#[from] FlowError),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("cannot match {0} roots against {1}")]
    LengthMismatch(usize, usize),
}

/// `N` complex points with moduli uniform in `[R/2, R]` and uniform angles,
/// redrawn until they are `R/(10N)` apart and none is real.
pub fn sample_initial_data<G: Rng + ?Sized>(
    n: usize,
    radius: f64,
    rng: &mut G,
) -> Result<RootConfiguration, SolveError> {
    if n < 2 {
        return Err(PolyError::TooFewRoots { needed: 2, got: n }.into_solve());
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(SolveError::InvalidConfig(format!(
            "sampling radius must be positive, got {radius}"
        )));
    }
    let separation = radius / (10.0 * n as f64);
    for _ in 0..SAMPLE_ATTEMPTS {
        let points: Vec<ComplexScalar> = (0..n)
            .map(|_| {
                let r = rng.gen_range(0.5 * radius..=radius);
                let theta = rng.gen_range(0.0..2.0 * PI);
                ComplexScalar::from_polar(r, theta)
            })
            .collect();
        if points.iter().any(|z| z.im == 0.0) {
            continue;
        }
        let (_, _, d) = poly::closest_pair(&points).expect("n >= 2");
        if d >= separation {
            return Ok(RootConfiguration::from_vec_unchecked(points));
        }
    }
    Err(SolveError::Internal(format!(
        "no admissible initial data for N = {n} after {SAMPLE_ATTEMPTS} draws"
    )))
}

trait IntoSolve {
    fn into_solve(self) -> SolveError;
}

impl IntoSolve for PolyError {
    fn into_solve(self) -> SolveError {
        SolveError::InvalidInitialData(FlowError::Poly(self))
    }
}

struct Polished {
    root: ComplexScalar,
    flat: bool,
}

fn polish_point(p: &MonicPolynomial, z0: ComplexScalar, max_iters: usize, tol: f64) -> Polished {
    let n = p.degree();
    let mut z = z0;
    for _ in 0..max_iters {
        let (v, dv) = p.eval_with_derivative(z);
        if poly::normalized(v, z, n) <= tol {
            break;
        }
        if dv.norm() < FLAT_DERIVATIVE {
            return Polished { root: z0, flat: true };
        }
        let step = v / dv;
        if !poly::is_finite(step) {
            return Polished { root: z0, flat: true };
        }
        z -= step;
    }
    Polished { root: z, flat: false }
}

/// Newton's iteration on `p` from `z0` until the normalized residual is at most
/// `tol` or `max_iters` steps have been taken. Returns `z0` unchanged if the
/// derivative vanishes.
pub fn newton_polish(p: &MonicPolynomial, z0: ComplexScalar, max_iters: usize, tol: f64) -> ComplexScalar {
    polish_point(p, z0, max_iters, tol).root
}

/// A bijection `pairing[i] = j` between `a[i]` and `b[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootMatching {
    pub pairing: Vec<usize>,
    pub max_distance: f64,
}

/// Pairs two root sets so that the largest paired distance is minimal.
///
/// Greedy closest-pair-first matching is accepted when it is within 10× the
/// lower bound `max_i min_j |a_i − b_j|` (taken both ways); otherwise the
/// exact bottleneck assignment is computed by bisecting over the sorted
/// distances with an augmenting-path feasibility test.
pub fn match_root_sets(a: &[ComplexScalar], b: &[ComplexScalar]) -> Result<RootMatching, MatchError> {
    let n = a.len();
    if n != b.len() {
        return Err(MatchError::LengthMismatch(n, b.len()));
    }
    if n == 0 {
        return Ok(RootMatching {
            pairing: vec![],
            max_distance: 0.0,
        });
    }
    let dist: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).collect())
        .collect();

    let lower_rows = dist
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let lower_cols = (0..n)
        .map(|j| (0..n).map(|i| dist[i][j]).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let lower = lower_rows.max(lower_cols);

    let mut edges: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (dist[i][j], i, j))
        .collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut pairing = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut greedy_max: f64 = 0.0;
    for &(d, i, j) in &edges {
        if pairing[i] == usize::MAX && !taken[j] {
            pairing[i] = j;
            taken[j] = true;
            greedy_max = greedy_max.max(d);
        }
    }
    debug_assert!(taken.iter().all(|&t| t));

    if greedy_max <= 10.0 * lower {
        return Ok(RootMatching {
            pairing,
            max_distance: greedy_max,
        });
    }

    let pairing = bottleneck_assignment(&dist, lower);
    let max_distance = pairing
        .iter()
        .enumerate()
        .map(|(i, &j)| dist[i][j])
        .fold(0.0, f64::max);
    Ok(RootMatching {
        pairing,
        max_distance,
    })
}

/// Pairing minimizing the largest distance: the smallest threshold
/// (at or above `lower`) that still admits a perfect matching.
fn bottleneck_assignment(dist: &[Vec<f64>], lower: f64) -> Vec<usize> {
    let mut thresholds: Vec<f64> = dist.iter().flatten().copied().filter(|&d| d >= lower).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let (mut lo, mut hi) = (0usize, thresholds.len() - 1);
    let mut best = perfect_matching(dist, thresholds[hi]).expect("complete graph has a matching");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match perfect_matching(dist, thresholds[mid]) {
            Some(m) => {
                best = m;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    best
}

/// Kuhn's augmenting paths on edges with `dist <= limit`.
fn perfect_matching(dist: &[Vec<f64>], limit: f64) -> Option<Vec<usize>> {
    fn augment(
        i: usize,
        dist: &[Vec<f64>],
        limit: f64,
        seen: &mut [bool],
        owner: &mut [usize],
    ) -> bool {
        for j in 0..dist.len() {
            if dist[i][j] <= limit && !seen[j] {
                seen[j] = true;
                if owner[j] == usize::MAX || augment(owner[j], dist, limit, seen, owner) {
                    owner[j] = i;
                    return true;
                }
            }
        }
        false
    }
    let n = dist.len();
    let mut owner = vec![usize::MAX; n];
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, dist, limit, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut pairing = vec![0; n];
    for (j, &i) in owner.iter().enumerate() {
        pairing[i] = j;
    }
    Some(pairing)
}

struct StartResult {
    endpoint: RootConfiguration,
    restarts: usize,
    trajectory: Option<Trajectory>,
}

enum StartOutcome {
    Reached(StartResult),
    Failed {
        restarts: usize,
        failure: IntegrationFailure,
    },
}

fn run_start(
    target: &MonicPolynomial,
    cfg: &SolverConfig,
    start: usize,
    seeded: Option<&RootConfiguration>,
    record: bool,
) -> Result<StartOutcome, SolveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(start as u64));
    let radius = target.cauchy_root_bound();
    let policy = if record {
        SamplingPolicy::EveryStep
    } else {
        SamplingPolicy::Endpoints
    };
    let mut last_failure = None;
    for attempt in 0..=cfg.max_restarts_per_start {
        let y0 = match (attempt, seeded) {
            (0, Some(y)) => y.clone(),
            _ => sample_initial_data(target.degree(), radius, &mut rng)?,
        };
        let outcome = make_problem(target, &y0)
            .map_err(IntegrationFailure::from)
            .and_then(|problem| integrate(&problem, &y0, &cfg.integrator, policy));
        match outcome {
            Ok(traj) => {
                return Ok(StartOutcome::Reached(StartResult {
                    endpoint: traj.last().y.clone(),
                    restarts: attempt,
                    trajectory: record.then_some(traj),
                }))
            }
            Err(IntegrationFailure::InvalidConfig(msg)) => return Err(SolveError::InvalidConfig(msg)),
            Err(f) => last_failure = Some(f),
        }
    }
    Ok(StartOutcome::Failed {
        restarts: cfg.max_restarts_per_start,
        failure: last_failure.expect("at least one attempt"),
    })
}

/// All zeros of `target`.
pub fn solve(target: &MonicPolynomial, cfg: &SolverConfig) -> Result<SolveReport, SolveError> {
    solve_inner(target, cfg, None)
}

/// Like [`solve`], but the first attempt of the first start flows from `y0`.
pub fn solve_from(
    target: &MonicPolynomial,
    y0: &RootConfiguration,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    if y0.len() != target.degree() {
        return Err(PolyError::DegreeMismatch {
            expected: target.degree(),
            got: y0.len(),
        }
        .into_solve());
    }
    solve_inner(target, cfg, Some(y0))
}

fn solve_inner(
    target: &MonicPolynomial,
    cfg: &SolverConfig,
    seeded: Option<&RootConfiguration>,
) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    let n = target.degree();
    if n == 1 {
        return Ok(linear_report(target));
    }

    let outcomes: Vec<Result<StartOutcome, SolveError>> = if cfg.num_starts == 1 {
        vec![run_start(target, cfg, 0, seeded, cfg.record_trajectory)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.num_starts)
                .map(|s| {
                    let seed_y = if s == 0 { seeded } else { None };
                    let record = cfg.record_trajectory && s == 0;
                    scope.spawn(move || run_start(target, cfg, s, seed_y, record))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(SolveError::Internal("start panicked".into())))
                })
                .collect()
        })
    };

    let mut warnings = Vec::new();
    let mut reached = Vec::new();
    let mut restarts = 0;
    let mut last_failure = None;
    for (start, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            StartOutcome::Reached(r) => {
                restarts += r.restarts;
                reached.push(r);
            }
            StartOutcome::Failed { restarts: k, failure } => {
                restarts += k;
                warnings.push(SolveWarning::StartFailed {
                    start,
                    failure: failure.clone(),
                });
                last_failure = Some(failure);
            }
        }
    }
    if reached.is_empty() {
        return Err(SolveError::NoConvergence {
            starts: cfg.num_starts,
            restarts,
            last_failure: last_failure.expect("every start failed"),
        });
    }

    let polished: Vec<(Vec<ComplexScalar>, Vec<usize>)> = reached
        .iter()
        .map(|r| {
            let mut flat = Vec::new();
            let roots = r
                .endpoint
                .iter()
                .enumerate()
                .map(|(i, &z)| {
                    if !cfg.polish {
                        return z;
                    }
                    let p = polish_point(target, z, cfg.polish_max_iters, cfg.polish_tol);
                    if p.flat {
                        flat.push(i);
                    }
                    p.root
                })
                .collect();
            (roots, flat)
        })
        .collect();

    let mut consensus: f64 = 0.0;
    let mut pre_consensus: f64 = 0.0;
    for k in 1..reached.len() {
        let m = match_root_sets(&polished[0].0, &polished[k].0).expect("equal degrees");
        consensus = consensus.max(m.max_distance);
        let m = match_root_sets(&reached[0].endpoint, &reached[k].endpoint).expect("equal degrees");
        pre_consensus = pre_consensus.max(m.max_distance);
    }

    // canonical order, carrying the endpoint each root was polished from
    let first = &reached[0];
    let mut order: Vec<usize> = (0..n).collect();
    let roots0 = &polished[0].0;
    order.sort_by(|&i, &j| {
        roots0[i]
            .re
            .total_cmp(&roots0[j].re)
            .then(roots0[i].im.total_cmp(&roots0[j].im))
    });
    let roots: Vec<ComplexScalar> = order.iter().map(|&i| roots0[i]).collect();
    let endpoints: Vec<ComplexScalar> = order.iter().map(|&i| first.endpoint[i]).collect();
    for &i in &polished[0].1 {
        let index = order.iter().position(|&k| k == i).expect("permutation");
        warnings.push(SolveWarning::FlatDerivative { index });
    }

    let residuals: Vec<f64> = roots.iter().map(|&z| target.normalized_residual(z)).collect();
    let pre_polish_residuals: Vec<f64> =
        endpoints.iter().map(|&z| target.normalized_residual(z)).collect();

    let mut tolerance = vec![cfg.residual_tol; n];
    let radius = target.cauchy_root_bound();
    for cluster in clusters(&roots, CLUSTER_RELATIVE * radius) {
        let center = cluster.iter().map(|&i| roots[i]).sum::<ComplexScalar>() / cluster.len() as f64;
        let spread = cluster
            .iter()
            .map(|&i| (roots[i] - center).norm())
            .fold(0.0, f64::max);
        let relaxed = cfg.residual_tol.max(CLUSTER_RESIDUAL_TOL);
        for &i in &cluster {
            tolerance[i] = relaxed;
        }
        warnings.push(SolveWarning::NearMultipleRoot {
            indices: cluster.clone(),
            center,
            spread,
        });
        warnings.push(SolveWarning::RelaxedTolerance {
            indices: cluster,
            tolerance: relaxed,
        });
    }

    let report = SolveReport {
        roots: RootConfiguration::from_vec_unchecked(roots),
        residuals,
        pre_polish_roots: RootConfiguration::from_vec_unchecked(endpoints),
        pre_polish_residuals,
        restarts_used: restarts,
        starts_used: reached.len(),
        consensus_discrepancy: consensus,
        pre_polish_consensus_discrepancy: pre_consensus,
        warnings,
        trajectory: reached.into_iter().next().and_then(|r| r.trajectory),
    };

    let offending: Vec<(usize, ComplexScalar, f64)> = report
        .residuals
        .iter()
        .enumerate()
        .filter(|(i, &r)| !(r <= tolerance[*i]))
        .map(|(i, &r)| (i, report.roots[i], r))
        .collect();
    if !offending.is_empty() {
        let worst = offending.iter().map(|o| o.2).fold(0.0, f64::max);
        return Err(SolveError::ResidualTooLarge {
            offending,
            worst,
            report: Box::new(report),
        });
    }
    Ok(report)
}

fn linear_report(target: &MonicPolynomial) -> SolveReport {
    let root = -target.coeffs()[0];
    let residual = target.normalized_residual(root);
    let roots = RootConfiguration::from_vec_unchecked(vec![root]);
    SolveReport {
        roots: roots.clone(),
        residuals: vec![residual],
        pre_polish_roots: roots,
        pre_polish_residuals: vec![residual],
        restarts_used: 0,
        starts_used: 0,
        consensus_discrepancy: 0.0,
        pre_polish_consensus_discrepancy: 0.0,
        warnings: vec![],
        trajectory: None,
    }
}

/// Connected components (size ≥ 2) of the "closer than `radius`" graph.
fn clusters(roots: &[ComplexScalar], radius: f64) -> Vec<Vec<usize>> {
    let n = roots.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (roots[i] - roots[j]).norm() < radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    groups.into_iter().filter(|g| g.len() > 1).collect()
}
