//! Acceptance suite. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use nhmdp::analysis::checks::{
    check_apriori, check_contraction, check_dominance, check_hoeffding, check_residuals, check_risk_span,
    check_uniqueness, gamma_gaps, oracle_gap, CheckRow, Status, CONTINUITY_GAMMAS,
};
use nhmdp::analysis::{shift_params, stability_trace};
use nhmdp::coefficients::{dobrushin_delta, ratio_bound, remainder_r, reward_span, TAIL_TOL};
use nhmdp::fixtures::{self, random_model, RandomModelConfig};
use nhmdp::model::{Model, Stage};
use nhmdp::solver::{solve_average, solve_risk, SolveOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_models, test_models};

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: impl Into<String>) -> Outcome {
    Outcome { passed, summary: summary.into() }
}

/// Folds check rows into one outcome. Skips are allowed only where the
/// criterion restricts itself to models meeting a precondition.
fn fold_rows(rows: &[(String, CheckRow)], allow_skip: bool) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    let mut skipped = 0;
    for (model, row) in rows {
        match row.status {
            Status::Pass => worst = worst.max(row.worst_excess),
            Status::Skip if allow_skip => skipped += 1,
            _ => failures.push(format!("{model}/{}: {} ({:e})", row.property, row.detail, row.worst_excess)),
        }
    }
    let mut summary = format!("{} checks, worst excess over bound {worst:e}", rows.len() - skipped);
    if skipped > 0 {
        summary.push_str(&format!(", {skipped} skipped (precondition unmet)"));
    }
    if !failures.is_empty() {
        summary.push_str(&format!("; failures: {}", failures.join("; ")));
    }
    outcome(failures.is_empty(), summary)
}

fn within(limit: Duration, started: Instant, mut o: Outcome) -> Outcome {
    let took = started.elapsed();
    o.summary.push_str(&format!(" [{:.2}s, limit {}s]", took.as_secs_f64(), limit.as_secs()));
    if took > limit {
        o.passed = false;
        o.summary.push_str(" runtime exceeded");
    }
    o
}

const RISK: [f64; 2] = [-0.5, 0.5];

fn contraction_suite() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<_> = random_models(20, 1)
        .iter()
        .enumerate()
        .map(|(i, m)| (format!("random{i}"), check_contraction(m, 200, &mut rng)))
        .collect();
    within(Duration::from_secs(10), started, fold_rows(&rows, false))
}

fn risk_span_bound() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let models = random_models(20, 1);
    let finite = models.iter().filter(|m| (0..m.num_slots()).all(|n| ratio_bound(m, n).is_finite())).count();
    let rows: Vec<_> = models
        .iter()
        .enumerate()
        .map(|(i, m)| (format!("random{i}"), check_risk_span(m, &[-5.0, -1.0, -0.1, 0.1, 1.0, 5.0], 200, &mut rng)))
        .collect();
    let mut o = fold_rows(&rows, false);
    o.summary = format!("{finite}/20 models with finite K_n; {}", o.summary);
    within(Duration::from_secs(10), started, o)
}

fn bellman_residuals(models: &[(String, Model)]) -> Outcome {
    let opts = SolveOptions::default();
    let mut rows = Vec::new();
    for (name, m) in models {
        rows.push((name.clone(), check_residuals(m, None, &opts)));
        for g in [-0.5, 0.5, 1.0] {
            rows.push((name.clone(), check_residuals(m, Some(g), &opts)));
        }
    }
    fold_rows(&rows, true)
}

fn uniqueness(models: &[(String, Model)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows = Vec::new();
    for (name, m) in models {
        rows.push((name.clone(), check_uniqueness(m, None, 3, &mut rng)));
        for g in RISK {
            rows.push((name.clone(), check_uniqueness(m, Some(g), 3, &mut rng)));
        }
    }
    fold_rows(&rows, true)
}

fn oracle_agreement(models: &[(String, Model)]) -> Outcome {
    let started = Instant::now();
    let opts = SolveOptions::default();
    let horizon = 10_000;
    let mut worst_ratio = 0.0f64;
    let mut literal_ratio = 0.0f64;
    let mut failures = Vec::new();
    let mut count = 0;
    for (name, m) in models {
        for gamma in std::iter::once(None).chain(RISK.iter().map(|&g| Some(g))) {
            match oracle_gap(m, gamma, horizon, &opts) {
                Ok(g) => {
                    count += 1;
                    let ratio = if g.bound > 0.0 { g.cesaro_gap / g.bound } else if g.cesaro_gap > 1e-12 { f64::INFINITY } else { 0.0 };
                    worst_ratio = worst_ratio.max(ratio);
                    literal_ratio = literal_ratio.max(if g.bound > 0.0 { g.gain_gap / g.bound } else { 0.0 });
                    if g.cesaro_gap > g.bound + 1e-12 {
                        failures.push(format!("{name} {gamma:?}: {:e} > {:e}", g.cesaro_gap, g.bound));
                    }
                    if g.gain_gap > g.bound + 1e-12 {
                        failures.push(format!("{name} {gamma:?}: against the long-run gain {:e} > {:e}", g.gain_gap, g.bound));
                    }
                }
                Err(e) if gamma.is_some() && e.is_assumption_failure() => {}
                Err(e) => failures.push(format!("{name} {gamma:?}: {e}")),
            }
        }
    }
    let summary = format!(
        "{count} solves at N = {horizon}, worst gap/bound against the long-run gain {literal_ratio:.3}, against the mean of the first N stage gains {worst_ratio:.3}{}",
        if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) }
    );
    within(Duration::from_secs(30), started, outcome(failures.is_empty(), summary))
}

fn dominance(models: &[(String, Model)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rows = Vec::new();
    for (name, m) in models {
        rows.push((name.clone(), check_dominance(m, None, 50, &mut rng)));
        for g in RISK {
            rows.push((name.clone(), check_dominance(m, Some(g), 50, &mut rng)));
        }
    }
    fold_rows(&rows, true)
}

fn constant_model(stage: Stage, prefix: usize, period: usize, s: usize, a: usize) -> Model {
    let labels = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    Model::finite(labels("x", s), labels("u", a), "x0", vec![stage.clone(); prefix], vec![stage; period]).unwrap()
}

fn closed_forms() -> Outcome {
    let opts = SolveOptions::default();
    let m = fixtures::iid2();
    let avg = solve_average(&m, &opts).map(|s| s.long_run_gain).unwrap_or(f64::NAN);
    let risk = solve_risk(&m, 1.0, &opts).map(|s| s.long_run_gain).unwrap_or(f64::NAN);
    let exact_risk = ((1.0 + 1f64.exp()) / 2.0).ln();
    let (e_avg, e_risk) = ((avg - 0.5).abs(), (risk - exact_risk).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = RandomModelConfig { max_prefix: 0, max_period: 1, ..Default::default() };
    let mut worst_r = 0.0f64;
    for i in 0..20 {
        let base = random_model(&mut rng, &cfg);
        let (s, a) = (base.num_states(), base.num_actions());
        let stage = base.period()[0].clone();
        let m = constant_model(stage, i % 2, 1 + i % 3, s, a);
        let (c, d) = (reward_span(&m, 0), dobrushin_delta(&m, 0));
        let expect = c / (1.0 - d);
        for n in 0..m.num_slots() {
            let got = remainder_r(&m, n, TAIL_TOL).unwrap_or(f64::NAN);
            worst_r = worst_r.max((got - expect).abs());
        }
    }
    let passed = e_avg <= 1e-9 && e_risk <= 1e-9 && worst_r <= 1e-10;
    outcome(
        passed,
        format!("iid lambda error {e_avg:e}, lambda^r(1) error {e_risk:e} (tol 1e-9); constant-data R_n error {worst_r:e} (tol 1e-10)"),
    )
}

fn hoeffding(models: &[(String, Model)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<_> = models.iter().map(|(n, m)| (n.clone(), check_hoeffding(m, 100, &mut rng))).collect();
    fold_rows(&rows, false)
}

fn gamma_continuity(models: &[(String, Model)]) -> Outcome {
    let started = Instant::now();
    let opts = SolveOptions::default();
    let mut failures = Vec::new();
    let (mut count, mut worst_margin) = (0, 0.0f64);
    for (name, m) in models {
        match gamma_gaps(m, &CONTINUITY_GAMMAS, &opts) {
            Ok((gaps, _)) => {
                count += 1;
                let spans: f64 = (m.prefix_len()..m.num_slots()).map(|s| reward_span(m, s)).sum();
                let limit = 1e-2 * spans * spans / 8.0;
                if !(gaps[1] <= gaps[0] && gaps[2] <= gaps[1]) {
                    failures.push(format!("{name}: not monotone {gaps:?}"));
                }
                if gaps[2] > limit {
                    failures.push(format!("{name}: {:e} > {limit:e}", gaps[2]));
                }
                if limit > 0.0 {
                    worst_margin = worst_margin.max(gaps[2] / limit);
                }
            }
            Err(e) if e.is_assumption_failure() => {}
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    let summary = format!(
        "{count} models, largest gap(1e-3)/limit {worst_margin:.4}{}",
        if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) }
    );
    within(Duration::from_secs(20), started, outcome(failures.is_empty(), summary))
}

fn apriori(models: &[(String, Model)]) -> Outcome {
    let mut rows = Vec::new();
    for (name, m) in models {
        rows.push((name.clone(), check_apriori(m, None)));
        for g in RISK {
            rows.push((name.clone(), check_apriori(m, Some(g))));
        }
    }
    fold_rows(&rows, true)
}

fn stability() -> Outcome {
    let started = Instant::now();
    let model = fixtures::interior_interval(101);
    let opts = SolveOptions::with_tol(1e-13);
    let gamma = 1.0;
    let mut ms: Vec<usize> = (4..=32).collect();
    ms.extend([40, 64, 100, 128, 256, 512, 1000, 1024, 2048, 4096, 5000, 8192, 10_000]);

    let run = || -> nhmdp::Result<(bool, f64, f64)> {
        let limit = solve_risk(&model, gamma, &opts)?.solution.policy;
        let seq = ms.iter().map(|&m| Ok((m, shift_params(&limit, 1.0 / m as f64)?))).collect::<nhmdp::Result<Vec<_>>>()?;
        let trace = stability_trace(&model, &seq, &limit, Some(gamma), &opts)?;
        let last = trace.entries.last().expect("non-empty").deviation;

        // Informational: the average-reward optimum of the same model sits at
        // an endpoint, where the deviation is first order in 1/m.
        let avg_limit = solve_average(&model, &opts)?.policy;
        let avg_seq =
            ms.iter().map(|&m| Ok((m, shift_params(&avg_limit, 1.0 / m as f64)?))).collect::<nhmdp::Result<Vec<_>>>()?;
        let avg = stability_trace(&model, &avg_seq, &avg_limit, None, &opts)?;
        Ok((trace.non_increasing_from(4, 0.0), last, avg.entries.last().expect("non-empty").deviation))
    };
    let o = match run() {
        Ok((monotone, last, avg_last)) => outcome(
            monotone && last < 1e-6,
            format!(
                "risk-sensitive (gamma = 1) around the interior optimum: non-increasing for m >= 4: {monotone}, \
                 deviation at m = 1e4 {last:e} (limit 1e-6); average-reward analogue at an endpoint optimum {avg_last:e}"
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    };
    within(Duration::from_secs(60), started, o)
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    // `cargo test` passes harness flags; only a name filter is honoured.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let models = test_models();
    let criteria: Vec<Criterion> = vec![
        ("1 contraction", Box::new(contraction_suite)),
        ("2 risk span bound", Box::new(risk_span_bound)),
        ("3 bellman residuals", Box::new(|| bellman_residuals(&models))),
        ("4 uniqueness", Box::new(|| uniqueness(&models))),
        ("5 oracle gain agreement", Box::new(|| oracle_agreement(&models))),
        ("6 dominance", Box::new(|| dominance(&models))),
        ("7 closed forms", Box::new(closed_forms)),
        ("8 hoeffding", Box::new(|| hoeffding(&models))),
        ("9 gamma continuity", Box::new(|| gamma_continuity(&models))),
        ("10 a priori bound", Box::new(|| apriori(&models))),
        ("11 stability", Box::new(stability)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!("[{}] criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.summary);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
