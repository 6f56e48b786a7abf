//! Closed-form step-sizes for `f(w) = ½ wᵀQw` and randomized checks of the
//! rate results they imply.
//!
//! * the optimal scalar step `wᵀQ²w / wᵀQ³w` reduces `f` by at least the
//!   Kantorovich factor `1 − 4μL/(μ+L)²`;
//! * the diagonal step `α(i) = w(i)/(Qw)(i)` reaches the minimizer in one step;
//! * per component, `(w(i) − w*(i))/g(i)` minimizes the post-update distance
//!   to the optimum.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{log_spaced_spectrum, mat_vec, random_spd, QuadraticProblem};
use crate::vector::{hadamard, ParamVector};

/// Slack allowed on a rate bound.
pub const RATE_TOL: f64 = 1e-12;
/// One-step convergence threshold for the diagonal optimum.
pub const ONE_STEP_TOL: f64 = 1e-10;
/// Points in each brute-force step-size grid.
pub const GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum StepSize {
    Scalar(f64),
    Diagonal(ParamVector),
}

fn quad_form(q: &DMatrix<f64>, w: &ParamVector) -> Result<f64> {
    Ok(0.5 * w.dot(&mat_vec(q, w)?)?)
}

/// `wᵀQ²w / wᵀQ³w`, the exact line-search step along `−Qw`.
pub fn optimal_scalar_step(q: &DMatrix<f64>, w: &ParamVector) -> Result<f64> {
    if w.is_zero() {
        return Err(Error::Undefined("optimal scalar step at w = 0".into()));
    }
    let qw = mat_vec(q, w)?;
    let num = qw.norm_sq();
    let den = qw.dot(&mat_vec(q, &qw)?)?;
    if den <= 0.0 {
        return Err(Error::Undefined("wᵀQ³w is not positive".into()));
    }
    Ok(num / den)
}

/// `α(i) = w(i)/(Qw)(i)`.
pub fn optimal_diag_step(q: &DMatrix<f64>, w: &ParamVector) -> Result<ParamVector> {
    let qw = mat_vec(q, w)?;
    if let Some(index) = qw.iter().position(|&v| v == 0.0) {
        return Err(Error::SingularDirection { index });
    }
    w.zip_map(&qw, |a, b| a / b)
}

/// `f(w − α·Qw)/f(w)` for `f = ½ wᵀQw`.
pub fn reduction_ratio(q: &DMatrix<f64>, w: &ParamVector, alpha: &StepSize) -> Result<f64> {
    let f0 = quad_form(q, w)?;
    if f0 == 0.0 {
        return Err(Error::Undefined("reduction ratio at f(w) = 0".into()));
    }
    let qw = mat_vec(q, w)?;
    let next = match alpha {
        StepSize::Scalar(a) => w.sub(&qw.scale(*a)?)?,
        StepSize::Diagonal(a) => w.sub(&hadamard(a, &qw)?)?,
    };
    Ok(quad_form(q, &next)? / f0)
}

/// `1 − 4μL/(μ+L)²`.
pub fn kantorovich_bound(mu: f64, l: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite() && l.is_finite()) {
        return Err(Error::invalid("mu", "must be positive and finite"));
    }
    if mu > l {
        return Err(Error::invalid("mu", "must not exceed L"));
    }
    Ok(1.0 - 4.0 * mu * l / ((mu + l) * (mu + l)))
}

/// `(w(i) − w*(i))/g(i)`; zero where `g(i) = 0`.
pub fn ideal_component_step(
    w: &ParamVector,
    w_star: &ParamVector,
    g: &ParamVector,
) -> Result<ParamVector> {
    w.sub(w_star)?
        .zip_map(g, |d, gi| if gi == 0.0 { 0.0 } else { d / gi })
}

/// Sample form of the ideal diagonal step from `(w_k, g_k)` pairs:
/// `α(i) = Σ g(i)(w(i) − w*(i)) / Σ g(i)²`.
pub fn ideal_step_from_samples(
    samples: &[(ParamVector, ParamVector)],
    w_star: &ParamVector,
) -> Result<ParamVector> {
    let d = w_star.dim();
    let mut num = ParamVector::zeros(d);
    let mut den = ParamVector::zeros(d);
    for (w, g) in samples {
        num = num.add(&hadamard(g, &w.sub(w_star)?)?)?;
        den = den.add(&hadamard(g, g)?)?;
    }
    num.zip_map(&den, |n, s| if s == 0.0 { 0.0 } else { n / s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremCheck {
    /// Optimal scalar step versus the Kantorovich bound.
    ScalarRate,
    /// Optimal scalar step versus a brute-force step-size grid.
    ScalarGrid,
    /// Ideal component step lands on the optimum and matches a grid search.
    IdealStep,
    /// Optimal diagonal step converges in one iteration.
    DiagonalOneStep,
}

impl TheoremCheck {
    pub const ALL: [TheoremCheck; 4] = [
        TheoremCheck::ScalarRate,
        TheoremCheck::ScalarGrid,
        TheoremCheck::IdealStep,
        TheoremCheck::DiagonalOneStep,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremCheck::ScalarRate => "scalar_rate",
            TheoremCheck::ScalarGrid => "scalar_grid",
            TheoremCheck::IdealStep => "ideal_step",
            TheoremCheck::DiagonalOneStep => "diagonal_one_step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Some `(Qw)(i)` is zero, so the diagonal formula is undefined.
    SingularDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub q: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub check: TheoremCheck,
    pub trial: usize,
    pub dim: usize,
    pub condition: f64,
    /// Measured quantity (a ratio or a distance, depending on the check).
    pub rho: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub status: CheckStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl RateReport {
    fn new(check: TheoremCheck, trial: usize, instance: &Instance, rho: f64, bound: f64) -> Self {
        let satisfied = rho <= bound;
        RateReport {
            check,
            trial,
            dim: instance.w.dim(),
            condition: instance.condition,
            rho,
            bound,
            satisfied,
            status: if satisfied { CheckStatus::Pass } else { CheckStatus::Fail },
            witness: (!satisfied).then(|| instance.witness()),
        }
    }

    fn skipped(check: TheoremCheck, trial: usize, instance: &Instance) -> Self {
        RateReport {
            check,
            trial,
            dim: instance.w.dim(),
            condition: instance.condition,
            rho: f64::NAN,
            bound: f64::NAN,
            satisfied: true,
            status: CheckStatus::SingularDirection,
            witness: None,
        }
    }
}

/// A random SPD quadratic with a random start point.
#[derive(Debug, Clone)]
pub struct Instance {
    pub q: DMatrix<f64>,
    pub w: ParamVector,
    pub mu: f64,
    pub l: f64,
    pub condition: f64,
}

impl Instance {
    pub fn random(rng: &mut impl Rng, d_max: usize, max_condition: f64) -> Result<Self> {
        let d = rng.random_range(1..=d_max.max(1));
        let condition = if d == 1 {
            1.0
        } else {
            (rng.random::<f64>() * max_condition.ln()).exp()
        };
        let spectrum = log_spaced_spectrum(rng, d, condition);
        let q = random_spd(rng, &spectrum);
        let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        Self::from_parts(q, ParamVector::new(w)?)
    }

    pub fn from_parts(q: DMatrix<f64>, w: ParamVector) -> Result<Self> {
        let p = QuadraticProblem::new(q.clone(), ParamVector::zeros(w.dim()))?;
        Ok(Instance {
            condition: p.l() / p.mu(),
            mu: p.mu(),
            l: p.l(),
            q,
            w,
        })
    }

    fn witness(&self) -> Witness {
        Witness {
            q: self.q.row_iter().map(|r| r.iter().copied().collect()).collect(),
            w: self.w.as_slice().to_vec(),
        }
    }
}

fn check_scalar_rate(trial: usize, inst: &Instance) -> Result<RateReport> {
    let a = optimal_scalar_step(&inst.q, &inst.w)?;
    let rho = reduction_ratio(&inst.q, &inst.w, &StepSize::Scalar(a))?;
    let bound = kantorovich_bound(inst.mu, inst.l)? + RATE_TOL;
    Ok(RateReport::new(TheoremCheck::ScalarRate, trial, inst, rho, bound))
}

/// The closed-form step must do at least as well as the best of a uniform
/// grid on `[0, 2/L]`, up to rounding.
fn check_scalar_grid(trial: usize, inst: &Instance) -> Result<RateReport> {
    let a = optimal_scalar_step(&inst.q, &inst.w)?;
    let rho = reduction_ratio(&inst.q, &inst.w, &StepSize::Scalar(a))?;
    let top = 2.0 / inst.l;
    let mut best = f64::INFINITY;
    for i in 0..GRID_POINTS {
        let step = top * i as f64 / (GRID_POINTS - 1) as f64;
        best = best.min(reduction_ratio(&inst.q, &inst.w, &StepSize::Scalar(step))?);
    }
    let bound = best * (1.0 + 1e-9) + RATE_TOL;
    Ok(RateReport::new(TheoremCheck::ScalarGrid, trial, inst, rho, bound))
}

/// Translates the instance to an optimum `w* ≠ 0`, takes one ideal component
/// step and measures the remaining distance. Components are also checked
/// against a grid search over the per-component post-update error.
fn check_ideal_step(trial: usize, inst: &Instance, rng: &mut impl Rng) -> Result<RateReport> {
    let d = inst.w.dim();
    let w_star = ParamVector::new((0..d).map(|_| StandardNormal.sample(rng)).collect())?;
    let w = inst.w.add(&w_star)?;
    let g = mat_vec(&inst.q, &inst.w)?;
    if g.iter().any(|&v| v == 0.0) {
        return Ok(RateReport::skipped(TheoremCheck::IdealStep, trial, inst));
    }
    let alpha = ideal_component_step(&w, &w_star, &g)?;
    let landed = w.sub(&hadamard(&alpha, &g)?)?;
    let scale = inst.w.norm().max(1.0);
    let dist = landed.sub(&w_star)?.norm() / scale;

    let mut grid_ok = true;
    for i in 0..d {
        let span = 2.0 * alpha[i].abs().max(1e-300);
        let spacing = 2.0 * span / (GRID_POINTS - 1) as f64;
        let post = |a: f64| (w[i] - a * g[i] - w_star[i]).powi(2);
        let (mut best_a, mut best_e) = (f64::NAN, f64::INFINITY);
        for k in 0..GRID_POINTS {
            let a = -span + spacing * k as f64;
            let e = post(a);
            if e < best_e {
                best_e = e;
                best_a = a;
            }
        }
        if (best_a - alpha[i]).abs() > spacing || post(alpha[i]) > best_e * (1.0 + 1e-9) + 1e-24 {
            grid_ok = false;
        }
    }
    let rho = if grid_ok { dist } else { f64::INFINITY };
    Ok(RateReport::new(TheoremCheck::IdealStep, trial, inst, rho, ONE_STEP_TOL))
}

fn check_diagonal_one_step(trial: usize, inst: &Instance) -> Result<RateReport> {
    match optimal_diag_step(&inst.q, &inst.w) {
        Ok(alpha) => {
            let rho = reduction_ratio(&inst.q, &inst.w, &StepSize::Diagonal(alpha))?;
            Ok(RateReport::new(TheoremCheck::DiagonalOneStep, trial, inst, rho, ONE_STEP_TOL))
        }
        Err(Error::SingularDirection { .. }) => {
            Ok(RateReport::skipped(TheoremCheck::DiagonalOneStep, trial, inst))
        }
        Err(e) => Err(e),
    }
}

/// All checks on one instance.
pub fn check_instance(trial: usize, inst: &Instance, rng: &mut impl Rng) -> Result<Vec<RateReport>> {
    Ok(vec![
        check_scalar_rate(trial, inst)?,
        check_scalar_grid(trial, inst)?,
        check_ideal_step(trial, inst, rng)?,
        check_diagonal_one_step(trial, inst)?,
    ])
}

pub const DEFAULT_MAX_CONDITION: f64 = 1e6;

/// Runs every check on `trials` random instances with dimension up to
/// `d_max` and condition number up to 1e6. Failures are reported, not raised.
pub fn verify_theorems(trials: usize, d_max: usize, seed: u64) -> Result<Vec<RateReport>> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if d_max == 0 || d_max > 64 {
        return Err(Error::invalid("d_max", "must be in 1..=64"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials * TheoremCheck::ALL.len());
    for trial in 0..trials {
        let inst = Instance::random(&mut rng, d_max, DEFAULT_MAX_CONDITION)?;
        out.extend(check_instance(trial, &inst, &mut rng)?);
    }
    Ok(out)
}

/// Per-check tally of a report list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: TheoremCheck,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Largest `rho − bound` seen; negative means every trial had slack.
    pub worst_margin: f64,
}

pub fn summarize(reports: &[RateReport]) -> Vec<CheckSummary> {
    TheoremCheck::ALL
        .iter()
        .map(|&check| {
            let mut s = CheckSummary {
                check,
                passed: 0,
                failed: 0,
                skipped: 0,
                worst_margin: f64::NEG_INFINITY,
            };
            for r in reports.iter().filter(|r| r.check == check) {
                match r.status {
                    CheckStatus::Pass => s.passed += 1,
                    CheckStatus::Fail => s.failed += 1,
                    CheckStatus::SingularDirection => s.skipped += 1,
                }
                if r.status != CheckStatus::SingularDirection {
                    s.worst_margin = s.worst_margin.max(r.rho - r.bound);
                }
            }
            s
        })
        .collect()
}
