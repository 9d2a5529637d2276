//! Seeded test polynomials and the invariant suite behind `polyflow check`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flow::{make_problem, FlowState};
use crate::integrator::{integrate, IntegratorConfig, SamplingPolicy};
use crate::oracle::durand_kerner;
use crate::poly::{coeffs_from_roots, ComplexScalar, MonicPolynomial, RootConfiguration};
use crate::solver::{match_root_sets, sample_initial_data, solve, SolverConfig};

/// Uniform point in the closed unit disc.
pub fn unit_disc_point<G: Rng + ?Sized>(rng: &mut G) -> ComplexScalar {
    let r: f64 = rng.gen::<f64>().sqrt();
    ComplexScalar::from_polar(r, rng.gen_range(0.0..2.0 * PI))
}

/// Monic polynomial with `c_1..c_N` uniform in the unit disc.
pub fn unit_disc_polynomial<G: Rng + ?Sized>(n: usize, rng: &mut G) -> MonicPolynomial {
    MonicPolynomial::new((0..n).map(|_| unit_disc_point(rng)).collect()).expect("finite, nonempty")
}

/// Random generator for instance `index` of degree `degree` under `seed`.
pub fn instance_rng(seed: u64, degree: usize, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add((degree as u64) << 32)
            .wrapping_add(index as u64),
    )
}

/// `count` random unit-disc polynomials of the given degree.
pub fn corpus(degree: usize, count: usize, seed: u64) -> Vec<MonicPolynomial> {
    (0..count)
        .map(|i| unit_disc_polynomial(degree, &mut instance_rng(seed, degree, i)))
        .collect()
}

/// `max_m |c'_m − c_m| / max(1, max_m |c_m|)` where `c'` is rebuilt from `roots`.
pub fn vieta_relative_error(target: &MonicPolynomial, roots: &RootConfiguration) -> f64 {
    let rebuilt = coeffs_from_roots(roots);
    let scale = target.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
    rebuilt
        .coeffs()
        .iter()
        .zip(target.coeffs())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub instances: usize,
    pub worst: f64,
    pub threshold: f64,
    pub failures: usize,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.worst <= self.threshold
    }
}

fn row(name: &'static str, threshold: f64, values: &[Option<f64>]) -> CheckRow {
    let failures = values.iter().filter(|v| v.is_none()).count();
    let worst = values.iter().flatten().copied().fold(0.0, f64::max);
    CheckRow {
        name,
        instances: values.len(),
        worst,
        threshold,
        failures,
    }
}

/// Seeding the flow with the exact zeros leaves them bitwise unchanged.
/// Reports the largest `|y(1) − y(0)|`; `None` marks a non-bitwise outcome.
pub fn fixed_point_values(seed: u64, per_degree: usize) -> Vec<Option<f64>> {
    let mut out = Vec::new();
    for n in 2..=12 {
        for i in 0..per_degree {
            let mut rng = instance_rng(seed, n, i);
            let roots = RootConfiguration::new((0..n).map(|_| unit_disc_point(&mut rng)).collect())
                .expect("finite");
            let target = coeffs_from_roots(&roots);
            let value = make_problem(&target, &roots).ok().and_then(|problem| {
                let field = problem.vector_field(&roots).ok()?;
                if field.iter().any(|v| v.re.to_bits() != 0 || v.im.to_bits() != 0) {
                    return None;
                }
                let traj = integrate(&problem, &roots, &IntegratorConfig::default(), SamplingPolicy::Endpoints)
                    .ok()?;
                let end = &traj.last().y;
                let bitwise = end.iter().zip(roots.iter()).all(|(a, b)| {
                    a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
                });
                bitwise.then_some(0.0)
            });
            out.push(value);
        }
    }
    out
}

fn flow_from_sample(
    target: &MonicPolynomial,
    rng: &mut ChaCha8Rng,
    cfg: &IntegratorConfig,
    policy: SamplingPolicy,
) -> Option<(crate::flow::HomotopyProblem, Vec<FlowState>)> {
    // a handful of redraws mirrors the solver's restart policy
    for _ in 0..6 {
        let y0 = sample_initial_data(target.degree(), target.cauchy_root_bound(), rng).ok()?;
        let Ok(problem) = make_problem(target, &y0) else { continue };
        if let Ok(traj) = integrate(&problem, &y0, cfg, policy) {
            return Some((problem, traj.samples));
        }
    }
    None
}

/// Largest homotopy residual over every accepted step, per instance, `N ≤ 12`.
pub fn conservation_values(seed: u64, per_degree: usize, rtol: f64) -> Vec<Option<f64>> {
    let cfg = IntegratorConfig {
        rtol,
        ..Default::default()
    };
    let mut out = Vec::new();
    for n in 2..=12 {
        for (i, target) in corpus(n, per_degree, seed).iter().enumerate() {
            let mut rng = instance_rng(seed ^ 0xC0FFEE, n, i);
            out.push(
                flow_from_sample(target, &mut rng, &cfg, SamplingPolicy::EveryStep).map(|(p, samples)| {
                    samples.iter().map(|s| p.homotopy_residual(s)).fold(0.0, f64::max)
                }),
            );
        }
    }
    out
}

/// Central differences at spacing `h` against the field, per instance, `N ≤ 8`.
pub fn identity_values(seed: u64, per_degree: usize, h: f64) -> Vec<Option<f64>> {
    let cfg = IntegratorConfig {
        rtol: 1e-12,
        atol: 1e-14,
        ..Default::default()
    };
    let mut out = Vec::new();
    for n in 2..=8 {
        for (i, target) in corpus(n, per_degree, seed).iter().enumerate() {
            let mut rng = instance_rng(seed ^ 0xFD, n, i);
            out.push(
                flow_from_sample(target, &mut rng, &cfg, SamplingPolicy::Grid(h))
                    .and_then(|(p, samples)| p.identity_fd_check(&samples, h).ok()),
            );
        }
    }
    out
}

/// Per-instance Vieta error of the solver output and its distance to Durand–Kerner.
pub fn solve_values(seed: u64, per_degree: usize, max_degree: usize) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let cfg = SolverConfig {
        seed,
        ..Default::default()
    };
    let mut vieta = Vec::new();
    let mut oracle = Vec::new();
    for n in 2..=max_degree {
        for target in corpus(n, per_degree, seed) {
            match solve(&target, &cfg) {
                Ok(report) => {
                    vieta.push(Some(vieta_relative_error(&target, &report.roots)));
                    oracle.push(durand_kerner(&target, 1e-10, 10_000).ok().map(|dk| {
                        match_root_sets(&report.roots, &dk)
                            .expect("equal degrees")
                            .max_distance
                    }));
                }
                Err(_) => {
                    vieta.push(None);
                    oracle.push(None);
                }
            }
        }
    }
    (vieta, oracle)
}

/// The full suite printed by `polyflow check`.
pub fn run_checks(seed: u64, per_degree: usize) -> Vec<CheckRow> {
    let (vieta, oracle) = solve_values(seed, per_degree, 20);
    vec![
        row("fixed point (bitwise)", 0.0, &fixed_point_values(seed, per_degree)),
        row("homotopy residual", 1e-6, &conservation_values(seed, per_degree, 1e-10)),
        row("identity (central differences)", 1e-5, &identity_values(seed, per_degree, 1e-4)),
        row("vieta round trip", 1e-6, &vieta),
        row("oracle agreement", 1e-8, &oracle),
    ]
}
