use std::process::ExitCode;

use csawg::baselines::{GradientDescent, HeavyBall, HypergradientDescent, Idbd1, Optimizer, Polyak};
use csawg::harness::{run_all, run_experiment, empirical_rate, error_at_budget, ExperimentConfig, OptimizerSpec, ProblemSpec};
use csawg::planner::PlannerConfig;
use csawg::presets::{preset, PRESET_NAMES, ZERO_ERROR};
use csawg::problems::{log_spaced_spectrum, random_spd, QuadraticProblem, RosenbrockProblem};
use csawg::report::csv_string;
use csawg::theory::{verify_theorems, CheckStatus, RateReport, TheoremCheck};
use csawg::{finite_diff_grad, EvalBudget, Objective, ParamVector, Problem, Result, Trace, TraceStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_917;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

type Runs = Vec<(ExperimentConfig, Trace)>;

fn run_preset(name: &str) -> Runs {
    run_all(preset(name).expect("preset").configs).expect("preset runs")
}

fn trace<'a>(runs: &'a Runs, label: &str) -> &'a Trace {
    &runs.iter().find(|(c, _)| c.label == label).unwrap_or_else(|| panic!("no run `{label}`")).1
}

fn first_at_zero(t: &Trace) -> Option<(u64, u64)> {
    t.records.iter().find(|r| r.error <= ZERO_ERROR).map(|r| (r.iteration, r.grad_evals))
}

fn max_alpha(t: &Trace, i: usize) -> f64 {
    t.alphas().map(|a| a[i]).fold(f64::NEG_INFINITY, f64::max)
}

fn theorem_checks(reports: &[RateReport], check: TheoremCheck) -> (usize, usize, usize) {
    let mut tally = (0, 0, 0);
    for r in reports.iter().filter(|r| r.check == check) {
        match r.status {
            CheckStatus::Pass => tally.0 += 1,
            CheckStatus::Fail => tally.1 += 1,
            CheckStatus::SingularDirection => tally.2 += 1,
        }
    }
    tally
}

fn criterion_1_2(reports: &[RateReport]) -> Vec<Outcome> {
    let (p1, f1, s1) = theorem_checks(reports, TheoremCheck::DiagonalOneStep);
    let (pr, fr, _) = theorem_checks(reports, TheoremCheck::ScalarRate);
    let (pg, fg, _) = theorem_checks(reports, TheoremCheck::ScalarGrid);
    vec![
        outcome(
            1,
            "optimal diagonal step converges in one iteration",
            f1 == 0 && p1 > 0,
            format!("{p1} pass, {f1} fail, {s1} singular (excluded)"),
        ),
        outcome(
            2,
            "optimal scalar step within Kantorovich bound and beats grid",
            fr == 0 && fg == 0 && pr == 1000 && pg == 1000,
            format!("rate {pr}/{} pass, grid {pg}/{} pass", pr + fr, pg + fg),
        ),
    ]
}

fn criterion_3() -> Outcome {
    let reports = verify_theorems(100, 10, SEED ^ 3).expect("theorem checks");
    let (p, f, s) = theorem_checks(&reports, TheoremCheck::IdealStep);
    let worst = reports
        .iter()
        .filter(|r| r.check == TheoremCheck::IdealStep && r.status == CheckStatus::Pass)
        .map(|r| r.rho)
        .fold(0.0, f64::max);
    outcome(
        3,
        "ideal component step lands on the optimum",
        f == 0 && p + s == 100 && p > 0,
        format!("{p} pass, {f} fail, {s} singular; worst distance {worst:.2e}"),
    )
}

fn criterion_4(convex: &Runs) -> Outcome {
    let k2 = first_at_zero(trace(convex, "Csawg K2"));
    let gd = trace(convex, "GD 0.00099");
    let rate = empirical_rate(gd, 500, 5000).unwrap_or(f64::NAN);
    let expected = (1.0 - 0.00099_f64).powi(2);
    let gd_2000 = gd.record_at_iteration(2000).map_or(f64::NAN, |r| r.error);
    let nest_2000 = trace(convex, "Nesterov").record_at_iteration(2000).map_or(f64::NAN, |r| r.error);
    let pass = k2.is_some_and(|(it, _)| it <= 500)
        && (rate - expected).abs() <= 1e-4
        && gd_2000 >= 1e3 * nest_2000;
    outcome(
        4,
        "convex quadratic experiment",
        pass,
        format!(
            "planner K=2 reaches 1e-12 at iteration {:?} (limit 500); GD rate {rate:.6} vs {expected:.6}; \
             GD {gd_2000:.3e} vs Nesterov {nest_2000:.3e} at iteration 2000",
            k2.map(|p| p.0)
        ),
    )
}

fn criterion_5(convex: &Runs) -> Outcome {
    let peaks: Vec<f64> = [2, 10, 100].iter().map(|k| max_alpha(trace(convex, &format!("Csawg K{k}")), 1)).collect();
    let k1000 = max_alpha(trace(convex, "Csawg K1000"), 1);
    outcome(
        5,
        "step-size of the flat direction peaks at one",
        peaks.iter().all(|p| (p - 1.0).abs() <= 1e-6),
        format!("peaks for K=2/10/100: {peaks:?}; K=1000 reaches {k1000:.4} (about 0.97 expected)"),
    )
}

fn criterion_6(rosen: &Runs) -> Outcome {
    let gd = error_at_budget(trace(rosen, "GD 0.001"), 10_000).expect("GD reaches budget");
    let mut ratios = Vec::new();
    for k in [2, 5, 10] {
        let t = trace(rosen, &format!("Csawg K{k} 0.001"));
        let ratio = match (t.status, error_at_budget(t, 10_000)) {
            (TraceStatus::Diverged, _) | (_, Err(_)) => f64::NAN,
            (_, Ok(e)) => gd / e,
        };
        ratios.push(ratio);
    }
    outcome(
        6,
        "Rosenbrock speedup over GD at 1e4 gradient evaluations",
        ratios.iter().all(|&r| r >= 50.0),
        format!(
            "K=2/5/10 ratios {:.3e}/{:.3e}/{:.3e} (expected about 400/320/133, threshold 50)",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

fn criterion_7(p5: &Runs) -> Outcome {
    let mut pass = PlannerConfig::repeated(0.001, 2, 5, 10).evals_per_event() == 55;
    let mut parts = Vec::new();
    for k in [2, 10] {
        let (cfg, t) = p5.iter().find(|(c, _)| c.label == format!("Csawg-p5 K{k}")).expect("run");
        let reached = first_at_zero(t);
        let events = t.alphas().count() as u64;
        let iterations = t.records.last().map_or(0, |r| r.iteration);
        let per_event = (t.total_grad_evals - iterations) / events.max(1);
        pass &= reached.is_some_and(|(_, evals)| evals <= 1000)
            && per_event == 55
            && t.total_grad_evals == cfg.optimizer.predicted_grad_evals(iterations, events);
        parts.push(format!(
            "K={k}: zero error at {:?} gradient evaluations, {per_event} per event",
            reached.map(|r| r.1)
        ));
    }
    outcome(
        7,
        "repeated planning reaches zero error within 1000 evaluations",
        pass,
        format!("{} (expected about 458/465)", parts.join("; ")),
    )
}

fn criterion_8(rosen: &Runs) -> Outcome {
    let t = trace(rosen, "Csawg K2 0.001");
    let negatives = t.alphas().filter(|a| a[1] < 0.0).count();
    let min = t.alphas().map(|a| a[1]).fold(f64::INFINITY, f64::min);
    outcome(
        8,
        "negative step-sizes appear on Rosenbrock with K=2",
        negatives > 0,
        format!("{negatives} of {} events with alpha(2) < 0, minimum {min:.4e}", t.alphas().count()),
    )
}

fn fd_agreement(obj: &mut Objective, points: &[ParamVector]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for w in points {
        let g = obj.grad(w)?;
        let fd = finite_diff_grad(obj, w, csawg::objective::DEFAULT_FD_STEP)?;
        worst = worst.max(g.sub(&fd)?.norm() / g.norm().max(1.0));
    }
    Ok(worst)
}

fn random_points(rng: &mut ChaCha8Rng, d: usize, n: usize, scale: f64) -> Vec<ParamVector> {
    (0..n)
        .map(|_| ParamVector::new((0..d).map(|_| rng.random_range(-scale..scale)).collect()).unwrap())
        .collect()
}

fn random_quadratic(rng: &mut ChaCha8Rng, d: usize, cond: f64) -> QuadraticProblem {
    let eigs = log_spaced_spectrum(rng, d, cond);
    let w_star = random_points(rng, d, 1, 1.0).remove(0);
    QuadraticProblem::new(random_spd(rng, &eigs), w_star).unwrap()
}

fn criterion_9(all_runs: &[(&str, Runs)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let mut failures = Vec::new();

    let mut fd_worst: f64 = 0.0;
    let problems: Vec<(Box<dyn Problem>, usize, f64)> = vec![
        (Box::new(QuadraticProblem::ill_conditioned_2d()), 2, 3.0),
        (Box::new(random_quadratic(&mut rng, 6, 1e3)), 6, 3.0),
        (Box::new(RosenbrockProblem), 2, 2.0),
    ];
    for (p, d, scale) in problems {
        let pts = random_points(&mut rng, d, 100, scale);
        fd_worst = fd_worst.max(fd_agreement(&mut Objective::from_boxed(p), &pts).unwrap());
    }
    if fd_worst > 1e-6 {
        failures.push(format!("finite differences off by {fd_worst:.2e}"));
    }

    let mut polyak_ok = true;
    for _ in 0..20 {
        let q = random_quadratic(&mut rng, 5, 1e4);
        let (lo, hi) = (0.5 / q.l(), 0.5 / q.mu());
        let w0 = random_points(&mut rng, 5, 1, 3.0).remove(0);
        let mut opt = Polyak::new(w0, 0.0).unwrap();
        let mut obj = Objective::new(q);
        for _ in 0..50 {
            if opt.step(&mut obj).is_err() {
                break;
            }
            let a = opt.last_alpha();
            polyak_ok &= a >= lo * (1.0 - 1e-9) && a <= hi * (1.0 + 1e-9);
        }
    }
    if !polyak_ok {
        failures.push("Polyak step outside [1/(2L), 1/(2mu)]".into());
    }

    let q = random_quadratic(&mut rng, 4, 4.0);
    let oracle = q.clone();
    let mut obj = Objective::new(q);
    let mut hd = HypergradientDescent::new(random_points(&mut rng, 4, 1, 2.0).remove(0), 0.01, 1e-4).unwrap();
    let mut prev: Option<ParamVector> = None;
    let mut sign_ok = true;
    for _ in 0..100 {
        let g = oracle.eval_grad(hd.position()).unwrap().1;
        let before = hd.alpha();
        hd.step(&mut obj).unwrap();
        let dot = prev.as_ref().map_or(0.0, |p| g.dot(p).unwrap());
        sign_ok &= (hd.alpha() > before) == (dot > 0.0);
        prev = Some(g);
    }
    if !sign_ok {
        failures.push("HD sign property".into());
    }

    let start = random_points(&mut rng, 4, 1, 2.0).remove(0);
    let mut a = HypergradientDescent::new(start.clone(), 0.01, 1e-6).unwrap();
    let mut b = Idbd1::new(start.clone(), 0.01, 1e-6, 0.0).unwrap();
    let (mut oa, mut ob) = (Objective::new(oracle.clone()), Objective::new(oracle.clone()));
    let mut same = true;
    for _ in 0..1000 {
        a.step(&mut oa).unwrap();
        b.step(&mut ob).unwrap();
        same &= a.position() == b.position() && a.alpha().to_bits() == b.alpha().to_bits();
    }
    if !same {
        failures.push("IDBD-1 with lambda=0 differs from HD".into());
    }

    let mut gd = GradientDescent::new(start.clone(), 0.01).unwrap();
    let mut hb = HeavyBall::new(start, 0.01, 0.0).unwrap();
    let (mut og, mut oh) = (Objective::new(oracle.clone()), Objective::new(oracle));
    let mut same = true;
    for _ in 0..1000 {
        gd.step(&mut og).unwrap();
        hb.step(&mut oh).unwrap();
        same &= gd.position() == hb.position();
    }
    if !same {
        failures.push("heavy ball with p=0 differs from GD".into());
    }

    let alpha_const = constant_gradient_alpha(3, 0.125);
    if alpha_const != Some(3.0 * 0.125) {
        failures.push(format!("constant-gradient alpha {alpha_const:?}, expected {}", 3.0 * 0.125));
    }

    let mut runs_checked = 0;
    for (_, runs) in all_runs {
        for (cfg, t) in runs {
            if t.status == TraceStatus::Diverged {
                continue;
            }
            runs_checked += 1;
            let iterations = t.records.last().map_or(0, |r| r.iteration);
            let events = t.alphas().count() as u64;
            let events = if cfg.optimizer_name() == "csawg" { events } else { 0 };
            if t.total_grad_evals != cfg.optimizer.predicted_grad_evals(iterations, events) {
                failures.push(format!("accounting off for `{}`", cfg.label));
            }
        }
    }

    let cfgs = preset("rosenbrock-p5-fig8").unwrap().configs;
    let mut lms = ExperimentConfig::new(
        "lms",
        ProblemSpec::Lms {
            w_star: vec![1.0, -2.0, 0.5],
            noise_std: 0.1,
            start: None,
        },
        OptimizerSpec::Gd { gamma: 0.05 },
        EvalBudget::iterations(300),
    )
    .recording(true, false);
    lms.seed = 7;
    let mut csv_same = true;
    for cfg in cfgs.iter().chain(std::iter::once(&lms)) {
        let cfg = cfg.clone().recording(true, true);
        let first = csv_string(&run_experiment(&cfg).unwrap());
        let second = csv_string(&run_experiment(&cfg).unwrap());
        csv_same &= first == second;
    }
    if !csv_same {
        failures.push("CSV output differs between repeated runs".into());
    }

    outcome(
        9,
        "property suite",
        failures.is_empty(),
        if failures.is_empty() {
            format!("all properties hold; FD worst {fd_worst:.2e}; accounting exact on {runs_checked} runs")
        } else {
            failures.join("; ")
        },
    )
}

/// Planner on `f(w) = w` (gradient 1 everywhere) with horizon `k`.
fn constant_gradient_alpha(k: usize, gamma: f64) -> Option<f64> {
    struct Slope;
    impl Problem for Slope {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, w: &ParamVector) -> Result<f64> {
            Ok(w[0])
        }
        fn eval_grad(&mut self, w: &ParamVector) -> Result<(f64, ParamVector)> {
            Ok((w[0], ParamVector::filled(1, 1.0)?))
        }
    }
    let mut obj = Objective::new(Slope);
    let mut c = csawg::planner::Csawg::new(ParamVector::filled(1, 0.0).ok()?, PlannerConfig::single(gamma, k)).ok()?;
    for _ in 0..2 * k {
        c.step(&mut obj).ok()?;
    }
    c.last_stats().map(|s| s.alpha[0])
}

fn criterion_10(rosen: &Runs, adam: &Runs) -> Outcome {
    let best_at = |runs: &Runs, prefix: &str, budget: u64| -> (f64, String) {
        runs.iter()
            .filter(|(c, t)| c.label.starts_with(prefix) && t.status != TraceStatus::Diverged)
            .map(|(c, t)| (error_at_budget(t, budget).unwrap_or(f64::INFINITY), c.label.clone()))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("runs")
    };
    let (gd, gd_label) = best_at(rosen, "GD ", 5000);
    let (hb, hb_label) = best_at(adam, "HB ", 5000);
    let (hb_final, hb_final_label) = best_at(adam, "HB ", 20_000);
    let (adam_final, adam_label) = best_at(adam, "Adam ", 20_000);
    outcome(
        10,
        "momentum beats GD; Adam ends above heavy ball",
        hb < gd && adam_final > hb_final,
        format!(
            "at 5000: {hb_label} {hb:.3e} vs {gd_label} {gd:.3e}; at 20000: {adam_label} {adam_final:.3e} \
             vs {hb_final_label} {hb_final:.3e}"
        ),
    )
}

fn main() -> ExitCode {
    let theorem_reports = verify_theorems(1000, 10, SEED).expect("theorem checks");
    let runs: Vec<(&str, Runs)> = PRESET_NAMES.iter().map(|&n| (n, run_preset(n))).collect();
    let by_name = |n: &str| &runs.iter().find(|(name, _)| *name == n).unwrap().1;
    let (convex, rosen) = (by_name("convex-fig4"), by_name("rosenbrock-fig6"));
    let (p5, adam) = (by_name("rosenbrock-p5-fig8"), by_name("rosenbrock-adam-fig10"));

    let mut outcomes = criterion_1_2(&theorem_reports);
    outcomes.push(criterion_3());
    outcomes.push(criterion_4(convex));
    outcomes.push(criterion_5(convex));
    outcomes.push(criterion_6(rosen));
    outcomes.push(criterion_7(p5));
    outcomes.push(criterion_8(rosen));
    outcomes.push(criterion_9(&runs));
    outcomes.push(criterion_10(rosen, adam));

    let mut failed = 0;
    for o in &outcomes {
        println!("{} criterion {:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
