//! One line per acceptance criterion. Exits non-zero if any criterion fails.
//!
//! Run with `cargo test --release --test acceptance`.

use std::thread;
use std::time::Instant;

use polyflow::diagnostics::{conservation_values, corpus, identity_values, instance_rng, unit_disc_point, vieta_relative_error};
use polyflow::oracle::durand_kerner;
use polyflow::solver::{match_root_sets, sample_initial_data, solve_from};
use polyflow::{
    coeffs_from_roots, integrate, make_problem, solve, IntegratorConfig, MonicPolynomial, RootConfiguration,
    SamplingPolicy, SolverConfig,
};

const CORPUS_SEED: u64 = 0;
const PER_DEGREE: usize = 100;
const DEGREES: std::ops::RangeInclusive<usize> = 2..=20;

struct Outcome {
    clean: bool,
    solved: bool,
    restarts: usize,
    pre: f64,
    post: f64,
    vieta: f64,
    oracle: Option<f64>,
    consensus: f64,
}

fn solve_instance(p: &MonicPolynomial) -> Outcome {
    let cfg = SolverConfig {
        seed: CORPUS_SEED,
        ..Default::default()
    };
    match solve(p, &cfg) {
        Ok(r) => {
            let pre = r.pre_polish_residuals.iter().copied().fold(0.0, f64::max);
            let post = r.residuals.iter().copied().fold(0.0, f64::max);
            let oracle = durand_kerner(p, 1e-10, 10_000)
                .ok()
                .map(|dk| match_root_sets(&r.roots, &dk).expect("equal degrees").max_distance);
            Outcome {
                clean: r.restarts_used == 0 && pre <= 1e-8 && post <= 1e-12,
                solved: true,
                restarts: r.restarts_used,
                pre,
                post,
                vieta: vieta_relative_error(p, &r.roots),
                oracle,
                consensus: r.consensus_discrepancy,
            }
        }
        Err(_) => Outcome {
            clean: false,
            solved: false,
            restarts: usize::MAX,
            pre: f64::INFINITY,
            post: f64::INFINITY,
            vieta: f64::INFINITY,
            oracle: None,
            consensus: f64::INFINITY,
        },
    }
}

fn solve_corpus() -> Vec<Outcome> {
    thread::scope(|s| {
        let handles: Vec<_> = DEGREES
            .map(|n| s.spawn(move || corpus(n, PER_DEGREE, CORPUS_SEED).iter().map(solve_instance).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn report(id: usize, passed: bool, name: &str, detail: String) -> bool {
    println!("[{}] {id}. {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn max(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

fn end_to_end(outcomes: &[Outcome]) -> bool {
    let total = outcomes.len();
    let clean = outcomes.iter().filter(|o| o.clean).count();
    let rest_ok = outcomes
        .iter()
        .filter(|o| !o.clean)
        .all(|o| o.solved && o.restarts <= 5 && o.post <= 1e-8);
    let fraction = clean as f64 / total as f64;
    report(
        1,
        fraction >= 0.99 && rest_ok,
        "end to end",
        format!(
            "{clean}/{total} ({:.2}%) with pre-polish <= 1e-8 and post-polish <= 1e-12, need >= 99%; \
             remainder solved within 5 restarts: {rest_ok}; worst pre {:.1e}, worst post {:.1e}",
            100.0 * fraction,
            max(outcomes.iter().map(|o| o.pre)),
            max(outcomes.iter().map(|o| o.post)),
        ),
    )
}

fn oracle_agreement(outcomes: &[Outcome]) -> bool {
    let both: Vec<f64> = outcomes.iter().filter_map(|o| o.oracle).collect();
    let worst = max(both.iter().copied());
    report(
        2,
        worst <= 1e-8,
        "oracle agreement",
        format!("max matched distance {worst:.2e} over {} instances, need <= 1e-8", both.len()),
    )
}

fn fixed_point() -> bool {
    let cfg = SolverConfig {
        num_starts: 1,
        ..Default::default()
    };
    let mut bitwise = 0;
    let mut worst_polish = 0f64;
    for k in 0..50 {
        let n = 2 + k % 11;
        let mut rng = instance_rng(CORPUS_SEED, n, k);
        let seeds = RootConfiguration::new((0..n).map(|_| unit_disc_point(&mut rng)).collect()).expect("finite");
        let target = coeffs_from_roots(&seeds);
        let Ok(problem) = make_problem(&target, &seeds) else { continue };
        let field_zero = problem
            .vector_field(&seeds)
            .map(|f| f.iter().all(|v| v.re.to_bits() == 0 && v.im.to_bits() == 0))
            .unwrap_or(false);
        let Ok(r) = solve_from(&target, &seeds, &cfg) else { continue };
        let canonical = seeds.canonical();
        let same = r.pre_polish_roots.iter().zip(canonical.iter()).all(|(a, b)| {
            a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
        });
        if field_zero && same && r.restarts_used == 0 {
            bitwise += 1;
        }
        worst_polish = worst_polish.max(max(r.roots.iter().zip(canonical.iter()).map(|(a, b)| (a - b).norm())));
    }
    report(
        3,
        bitwise == 50 && worst_polish <= 1e-14,
        "fixed point",
        format!("{bitwise}/50 bitwise through the flow; largest move after polish {worst_polish:.1e}, need <= 1e-14"),
    )
}

fn conservation() -> bool {
    let values = conservation_values(CORPUS_SEED, PER_DEGREE, 1e-10);
    let failures = values.iter().filter(|v| v.is_none()).count();
    let worst = max(values.iter().flatten().copied());
    report(
        4,
        failures == 0 && worst <= 1e-6,
        "homotopy conservation",
        format!("worst residual {worst:.2e} over {} trajectories ({failures} not integrated), need <= 1e-6", values.len()),
    )
}

fn identity() -> bool {
    let values = identity_values(CORPUS_SEED, PER_DEGREE, 1e-4);
    let failures = values.iter().filter(|v| v.is_none()).count();
    let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let over = sorted.iter().filter(|&&v| v > 1e-5).count();
    let worst = sorted.last().copied().unwrap_or(0.0);
    report(
        5,
        failures == 0 && over == 0,
        "central-difference identity",
        format!(
            "{over}/{} above 1e-5 at h = 1e-4 ({failures} not integrated); median {:.1e}, worst {worst:.1e}",
            values.len(),
            sorted.get(sorted.len() / 2).copied().unwrap_or(0.0),
        ),
    )
}

fn vieta(outcomes: &[Outcome]) -> bool {
    let worst = max(outcomes.iter().map(|o| o.vieta));
    report(
        6,
        worst <= 1e-6,
        "vieta round trip",
        format!("worst relative coefficient error {worst:.2e}, need <= 1e-6"),
    )
}

fn consensus(outcomes: &[Outcome]) -> bool {
    let ok = outcomes.iter().filter(|o| o.consensus <= 1e-6).count();
    let fraction = ok as f64 / outcomes.len() as f64;
    report(
        7,
        fraction >= 0.99,
        "multi-start consensus",
        format!(
            "{ok}/{} ({:.2}%) within 1e-6 with 3 starts, need >= 99%; worst {:.1e}",
            outcomes.len(),
            100.0 * fraction,
            max(outcomes.iter().map(|o| o.consensus)),
        ),
    )
}

fn determinism() -> bool {
    let run = || {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = polyflow::cli::run_with(
            ["polyflow", "solve", "--coeffs", "0.3-0.2i,-1,0.5i,0.25", "--seed", "7"],
            &mut out,
            &mut err,
        );
        (code, out)
    };
    let (a, b) = (run(), run());
    report(
        8,
        a.0 == 0 && a == b && !a.1.is_empty(),
        "determinism",
        format!("exit codes {} and {}, {} bytes, identical: {}", a.0, b.0, a.1.len(), a.1 == b.1),
    )
}

fn integrator_order() -> bool {
    let target = corpus(4, 1, CORPUS_SEED).remove(0);
    let mut rng = instance_rng(CORPUS_SEED, 4, 0);
    let y0 = sample_initial_data(4, target.cauchy_root_bound(), &mut rng).expect("sampler");
    let problem = make_problem(&target, &y0).expect("generic start");
    let defaults = IntegratorConfig::default();
    let endpoint = |shrink: f64| {
        let cfg = IntegratorConfig {
            rtol: defaults.rtol / shrink,
            atol: defaults.atol / shrink,
            ..defaults
        };
        integrate(&problem, &y0, &cfg, SamplingPolicy::Endpoints)
            .expect("generic start integrates")
            .last()
            .y
            .clone()
    };
    let reference = endpoint(1e4);
    let error = |shrink: f64| max(endpoint(shrink).iter().zip(reference.iter()).map(|(a, b)| (a - b).norm()));
    let coarse = error(1.0);
    let fine = error(32.0);
    let ratio = coarse / fine;
    report(
        9,
        ratio >= 16.0,
        "integrator order",
        format!("endpoint error {coarse:.2e} -> {fine:.2e} when default tolerances shrink 32x, ratio {ratio:.1}, need >= 16"),
    )
}

fn main() {
    let start = Instant::now();
    let outcomes = solve_corpus();
    let results = [
        end_to_end(&outcomes),
        oracle_agreement(&outcomes),
        fixed_point(),
        conservation(),
        identity(),
        vieta(&outcomes),
        consensus(&outcomes),
        determinism(),
        integrator_order(),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed in {:.1?}", results.len(), start.elapsed());
    if passed != results.len() {
        std::process::exit(1);
    }
}
