//! Experiment configuration, orchestration and trace metrics.
//!
//! A config is a JSON document with top-level keys `problem`, `optimizer`,
//! `budget`, `seed` and `output` (plus an optional `label`). Problems and
//! optimizers are tagged by `name`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::{
    Adam, GradientDescent, HeavyBall, HypergradientDescent, Idbd, Idbd1, L4Direction, LossGrad,
    Nesterov, NesterovMode, Optimizer, Polyak, RmsProp, DEFAULT_ADAM_EPS, DEFAULT_L4_EPS,
    DEFAULT_L4_MOMENTUM, DEFAULT_LOSSGRAD_FACTOR, DEFAULT_RMSPROP_EPS, L4,
};
use crate::error::{Error, Result};
use crate::objective::{EvalBudget, Objective};
use crate::planner::{Csawg, Pairing, PlannerConfig};
use crate::problems::{LmsStream, QuadraticProblem, RosenbrockProblem};
use crate::trace::{drive, RecordOptions, Trace, TraceStatus};
use crate::vector::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        q: Vec<Vec<f64>>,
        w_star: Vec<f64>,
        start: Vec<f64>,
    },
    Rosenbrock {
        #[serde(default = "rosenbrock_start")]
        start: Vec<f64>,
    },
    Lms {
        w_star: Vec<f64>,
        #[serde(default)]
        noise_std: f64,
        #[serde(default)]
        start: Option<Vec<f64>>,
    },
}

fn rosenbrock_start() -> Vec<f64> {
    vec![-1.0, 0.0]
}

impl ProblemSpec {
    /// `Q = diag(1000, 1)`, `w* = (1, 1)`, start `(−1, 2)`.
    pub fn convex_2d() -> Self {
        ProblemSpec::Quadratic {
            q: vec![vec![1000.0, 0.0], vec![0.0, 1.0]],
            w_star: vec![1.0, 1.0],
            start: vec![-1.0, 2.0],
        }
    }

    pub fn rosenbrock() -> Self {
        ProblemSpec::Rosenbrock {
            start: rosenbrock_start(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::Rosenbrock { .. } => "rosenbrock",
            ProblemSpec::Lms { .. } => "lms",
        }
    }

    fn quadratic(&self) -> Result<Option<QuadraticProblem>> {
        match self {
            ProblemSpec::Quadratic { q, w_star, .. } => {
                let d = w_star.len();
                if q.len() != d || q.iter().any(|row| row.len() != d) {
                    return Err(Error::Config(format!("quadratic `q` must be {d}x{d}")));
                }
                let m = DMatrix::from_fn(d, d, |i, j| q[i][j]);
                Ok(Some(QuadraticProblem::new(m, ParamVector::new(w_star.clone())?)?))
            }
            _ => Ok(None),
        }
    }

    /// Builds the objective and the start point.
    pub fn build(&self, seed: u64) -> Result<(Objective, ParamVector)> {
        match self {
            ProblemSpec::Quadratic { start, .. } => {
                let p = self.quadratic()?.expect("quadratic spec");
                let w0 = ParamVector::new(start.clone())?;
                if w0.dim() != p.w_star().dim() {
                    return Err(Error::DimensionMismatch {
                        expected: p.w_star().dim(),
                        got: w0.dim(),
                    });
                }
                Ok((Objective::new(p), w0))
            }
            ProblemSpec::Rosenbrock { start } => {
                let w0 = ParamVector::new(start.clone())?;
                if w0.dim() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        got: w0.dim(),
                    });
                }
                Ok((Objective::new(RosenbrockProblem), w0))
            }
            ProblemSpec::Lms {
                w_star,
                noise_std,
                start,
            } => {
                let w_star = ParamVector::new(w_star.clone())?;
                let w0 = match start {
                    Some(s) => ParamVector::new(s.clone())?,
                    None => ParamVector::zeros(w_star.dim()),
                };
                let stream = LmsStream::new(w_star, *noise_std, seed)?;
                Ok((Objective::new(stream), w0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NesterovModeSpec {
    Convex,
    #[default]
    StronglyConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L4DirectionSpec {
    #[default]
    Gradient,
    Momentum,
}

fn default_rmsprop_eps() -> f64 {
    DEFAULT_RMSPROP_EPS
}
fn default_adam_eps() -> f64 {
    DEFAULT_ADAM_EPS
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_l4_eps() -> f64 {
    DEFAULT_L4_EPS
}
fn default_l4_p() -> f64 {
    DEFAULT_L4_MOMENTUM
}
fn default_lossgrad_rho() -> f64 {
    DEFAULT_LOSSGRAD_FACTOR
}
fn default_p() -> usize {
    1
}

/// Optimizer and its hyper-parameters, tagged by canonical name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    Gd {
        gamma: f64,
    },
    HeavyBall {
        gamma: f64,
        p: f64,
    },
    /// `mu`/`l` default to the extreme eigenvalues of a quadratic problem.
    Nesterov {
        #[serde(default)]
        mode: NesterovModeSpec,
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        l: Option<f64>,
    },
    Polyak {
        #[serde(default)]
        f_star: f64,
    },
    L4 {
        #[serde(default)]
        f_star: f64,
        #[serde(default = "default_l4_eps")]
        eps: f64,
        #[serde(default)]
        direction: L4DirectionSpec,
        #[serde(default = "default_l4_p")]
        p: f64,
    },
    Lossgrad {
        alpha: f64,
        #[serde(default = "default_lossgrad_rho")]
        rho: f64,
    },
    Rmsprop {
        alpha: f64,
        beta: f64,
        #[serde(default = "default_rmsprop_eps")]
        eps: f64,
    },
    Adam {
        alpha: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_adam_eps")]
        eps: f64,
    },
    Hd {
        alpha: f64,
        eta: f64,
    },
    Idbd {
        beta0: f64,
        eta: f64,
    },
    Idbd1 {
        alpha: f64,
        eta: f64,
        lambda: f64,
    },
    Csawg {
        gamma: f64,
        k: usize,
        #[serde(default = "default_p")]
        p: usize,
        #[serde(default)]
        m: usize,
        #[serde(default)]
        pairing: Pairing,
    },
}

pub const OPTIMIZER_NAMES: [&str; 12] = [
    "gd",
    "heavy_ball",
    "nesterov",
    "polyak",
    "l4",
    "lossgrad",
    "rmsprop",
    "adam",
    "hd",
    "idbd",
    "idbd1",
    "csawg",
];

impl OptimizerSpec {
    pub fn csawg(cfg: PlannerConfig) -> Self {
        OptimizerSpec::Csawg {
            gamma: cfg.gamma,
            k: cfg.k,
            p: cfg.p,
            m: cfg.m,
            pairing: cfg.pairing,
        }
    }

    pub fn build(&self, w0: ParamVector, problem: &ProblemSpec) -> Result<Box<dyn Optimizer>> {
        Ok(match *self {
            OptimizerSpec::Gd { gamma } => Box::new(GradientDescent::new(w0, gamma)?),
            OptimizerSpec::HeavyBall { gamma, p } => Box::new(HeavyBall::new(w0, gamma, p)?),
            OptimizerSpec::Nesterov { mode, mu, l } => {
                let quad = problem.quadratic()?;
                let mu = mu.or(quad.as_ref().map(|q| q.mu()));
                let l = l.or(quad.as_ref().map(|q| q.l()));
                let (mode, mu) = match mode {
                    NesterovModeSpec::Convex => (NesterovMode::Convex, mu.unwrap_or(0.0)),
                    NesterovModeSpec::StronglyConvex => (
                        NesterovMode::StronglyConvex,
                        mu.ok_or_else(|| Error::Config("nesterov needs `mu`".into()))?,
                    ),
                };
                let l = l.ok_or_else(|| Error::Config("nesterov needs `l`".into()))?;
                Box::new(Nesterov::new(w0, mode, mu, l)?)
            }
            OptimizerSpec::Polyak { f_star } => Box::new(Polyak::new(w0, f_star)?),
            OptimizerSpec::L4 {
                f_star,
                eps,
                direction,
                p,
            } => {
                let direction = match direction {
                    L4DirectionSpec::Gradient => L4Direction::Gradient,
                    L4DirectionSpec::Momentum => L4Direction::Momentum,
                };
                Box::new(L4::new(w0, f_star, eps, direction)?.with_momentum(p)?)
            }
            OptimizerSpec::Lossgrad { alpha, rho } => Box::new(LossGrad::new(w0, alpha, rho)?),
            OptimizerSpec::Rmsprop { alpha, beta, eps } => {
                Box::new(RmsProp::new(w0, alpha, beta, eps)?)
            }
            OptimizerSpec::Adam {
                alpha,
                beta1,
                beta2,
                eps,
            } => Box::new(Adam::new(w0, alpha, beta1, beta2, eps)?),
            OptimizerSpec::Hd { alpha, eta } => Box::new(HypergradientDescent::new(w0, alpha, eta)?),
            OptimizerSpec::Idbd { beta0, eta } => Box::new(Idbd::new(w0, beta0, eta)?),
            OptimizerSpec::Idbd1 { alpha, eta, lambda } => {
                Box::new(Idbd1::new(w0, alpha, eta, lambda)?)
            }
            OptimizerSpec::Csawg {
                gamma,
                k,
                p,
                m,
                pairing,
            } => Box::new(Csawg::new(
                w0,
                PlannerConfig::repeated(gamma, k, p, m).with_pairing(pairing),
            )?),
        })
    }

    /// Gradient evaluations a run must spend for `iterations` main-loop steps
    /// and `planning_events` planning events.
    pub fn predicted_grad_evals(&self, iterations: u64, planning_events: u64) -> u64 {
        match *self {
            OptimizerSpec::Csawg { p, m, .. } => {
                iterations + planning_events * (p as u64) * (1 + m as u64)
            }
            _ => iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub label: String,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    pub budget: EvalBudget,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: RecordOptions,
}

impl ExperimentConfig {
    pub fn new(label: impl Into<String>, problem: ProblemSpec, optimizer: OptimizerSpec, budget: EvalBudget) -> Self {
        ExperimentConfig {
            label: label.into(),
            problem,
            optimizer,
            budget,
            seed: 0,
            output: RecordOptions::default(),
        }
    }

    pub fn recording(mut self, record_w: bool, record_alpha: bool) -> Self {
        self.output = RecordOptions {
            record_w,
            record_alpha,
        };
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` overrides, where `key` is a dotted path into the
    /// JSON form (e.g. `optimizer.gamma`) and `value` is parsed as JSON,
    /// falling back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value, true)?;
        }
        serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Writes `value` at dotted `path`. With `create`, a missing final key is
/// added (unknown keys are then rejected when the document is re-read).
fn set_path(doc: &mut Value, path: &str, value: Value, create: bool) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    if !create && !map.contains_key(*part) {
                        return Err(Error::Config(format!("unknown parameter `{path}`")));
                    }
                    map.insert((*part).to_string(), value);
                    return Ok(());
                }
                map.get_mut(*part)
                    .ok_or_else(|| Error::Config(format!("unknown parameter `{path}`")))?
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("bad index `{part}` in `{path}`")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index out of range in `{path}`")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("`{path}` does not name a parameter"))),
        };
    }
    Err(Error::Config("empty parameter path".into()))
}

/// Runs one experiment. Divergence is recorded in the trace status.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Trace> {
    let (mut obj, w0) = cfg.problem.build(cfg.seed)?;
    if w0.dim() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: w0.dim(),
        });
    }
    let mut opt = cfg.optimizer.build(w0, &cfg.problem)?;
    let mut trace = drive(opt.as_mut(), &mut obj, &cfg.budget, cfg.output)?;
    trace.label = if cfg.label.is_empty() {
        opt.name().to_string()
    } else {
        cfg.label.clone()
    };
    Ok(trace)
}

/// Ratio `error_a / error_b` at equal gradient-evaluation spend. Each error is
/// read from the last record with at most `grad_evals` evaluations.
pub fn speedup_at_budget(a: &Trace, b: &Trace, grad_evals: u64) -> Result<f64> {
    Ok(error_at_budget(a, grad_evals)? / error_at_budget(b, grad_evals)?)
}

pub fn error_at_budget(t: &Trace, grad_evals: u64) -> Result<f64> {
    let reaches = t.total_grad_evals >= grad_evals || t.status == TraceStatus::Converged;
    if !reaches {
        return Err(Error::Undefined(format!(
            "trace `{}` stops at {} gradient evaluations, before {grad_evals}",
            t.label, t.total_grad_evals
        )));
    }
    t.record_at_grad_evals(grad_evals)
        .map(|r| r.error)
        .ok_or_else(|| Error::Undefined(format!("trace `{}` has no record within budget", t.label)))
}

/// Geometric mean of successive error ratios between iterations `start` and
/// `end`: `(e_end / e_start)^(1/(end − start))`.
pub fn empirical_rate(t: &Trace, start: u64, end: u64) -> Result<f64> {
    if end <= start {
        return Err(Error::invalid("window", "end must be after start"));
    }
    let first = t
        .record_at_iteration(start)
        .ok_or_else(|| Error::invalid("window", format!("iteration {start} not in trace")))?;
    let last = t
        .record_at_iteration(end)
        .ok_or_else(|| Error::invalid("window", format!("iteration {end} not in trace")))?;
    let lo = t.records.partition_point(|r| r.iteration < start);
    let hi = t.records.partition_point(|r| r.iteration <= end);
    if t.records[lo..hi].iter().any(|r| r.error <= 0.0) {
        return Err(Error::Undefined("zero error inside rate window".into()));
    }
    Ok((last.error / first.error).powf(1.0 / (end - start) as f64))
}

/// Parameter grid: dotted config path to candidate values.
pub type Grid = BTreeMap<String, Vec<Value>>;

/// Expands the Cartesian product of `grid` over `base`, in key order with the
/// last key varying fastest. Labels get the chosen values appended.
pub fn expand_grid(grid: &Grid, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if let Some((k, _)) = grid.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::Config(format!("sweep values for `{k}` are empty")));
    }
    let base_doc = serde_json::to_value(base).expect("config serializes");
    let keys: Vec<&String> = grid.keys().collect();
    let mut idx = vec![0usize; keys.len()];
    let mut out = Vec::new();
    loop {
        let mut doc = base_doc.clone();
        let mut tags = Vec::with_capacity(keys.len());
        for (key, &i) in keys.iter().zip(&idx) {
            let v = grid[*key][i].clone();
            tags.push(format!("{}={}", key.rsplit('.').next().unwrap_or(key), v));
            set_path(&mut doc, key, v, false)?;
        }
        let mut cfg: ExperimentConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        let prefix = if base.label.is_empty() {
            cfg.optimizer_name().to_string()
        } else {
            base.label.clone()
        };
        cfg.label = format!("{prefix} {}", tags.join(" "));
        out.push(cfg);

        let mut pos = keys.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < grid[keys[pos]].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

impl ExperimentConfig {
    pub fn optimizer_name(&self) -> &'static str {
        match self.optimizer {
            OptimizerSpec::Gd { .. } => "gd",
            OptimizerSpec::HeavyBall { .. } => "heavy_ball",
            OptimizerSpec::Nesterov { .. } => "nesterov",
            OptimizerSpec::Polyak { .. } => "polyak",
            OptimizerSpec::L4 { .. } => "l4",
            OptimizerSpec::Lossgrad { .. } => "lossgrad",
            OptimizerSpec::Rmsprop { .. } => "rmsprop",
            OptimizerSpec::Adam { .. } => "adam",
            OptimizerSpec::Hd { .. } => "hd",
            OptimizerSpec::Idbd { .. } => "idbd",
            OptimizerSpec::Idbd1 { .. } => "idbd1",
            OptimizerSpec::Csawg { .. } => "csawg",
        }
    }
}

/// Runs every grid point. Runs execute in parallel; results come back in
/// grid order.
pub fn sweep(grid: &Grid, base: &ExperimentConfig) -> Result<Vec<(ExperimentConfig, Trace)>> {
    run_all(expand_grid(grid, base)?)
}

/// Runs independent configs in parallel, preserving input order.
pub fn run_all(configs: Vec<ExperimentConfig>) -> Result<Vec<(ExperimentConfig, Trace)>> {
    configs
        .into_par_iter()
        .map(|cfg| run_experiment(&cfg).map(|t| (cfg, t)))
        .collect()
}

/// The run with the lowest final error; diverged runs rank last.
pub fn best_by_final_error(runs: &[(ExperimentConfig, Trace)]) -> Option<&(ExperimentConfig, Trace)> {
    runs.iter().min_by(|a, b| rank_key(&a.1).total_cmp(&rank_key(&b.1)))
}

fn rank_key(t: &Trace) -> f64 {
    match (t.status, t.final_error()) {
        (TraceStatus::Diverged, _) | (_, None) => f64::INFINITY,
        (_, Some(e)) => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gd_convex(gamma: f64, iters: u64) -> ExperimentConfig {
        ExperimentConfig::new(
            "gd",
            ProblemSpec::convex_2d(),
            OptimizerSpec::Gd { gamma },
            EvalBudget::iterations(iters),
        )
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{
            "problem": {"name": "quadratic", "q": [[1000, 0], [0, 1]], "w_star": [1, 1], "start": [-1, 2]},
            "optimizer": {"name": "csawg", "gamma": 0.0009, "k": 2},
            "budget": {"max_iterations": 500, "error_floor": 1e-12},
            "seed": 7,
            "output": {"record_alpha": true}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.optimizer, OptimizerSpec::csawg(PlannerConfig::single(0.0009, 2)));
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn config_rejects_unknown_names_and_keys() {
        let bad_opt = r#"{"problem":{"name":"rosenbrock"},"optimizer":{"name":"sgdx"},"budget":{"max_iterations":1}}"#;
        assert!(ExperimentConfig::from_json(bad_opt).is_err());
        let bad_key = r#"{"problem":{"name":"rosenbrock"},"optimizer":{"name":"gd","gamma":0.1,"gama":1},"budget":{"max_iterations":1}}"#;
        assert!(ExperimentConfig::from_json(bad_key).is_err());
        let bad_problem = r#"{"problem":{"name":"himmelblau"},"optimizer":{"name":"gd","gamma":0.1},"budget":{"max_iterations":1}}"#;
        assert!(ExperimentConfig::from_json(bad_problem).is_err());
    }

    #[test]
    fn every_optimizer_name_parses() {
        for name in OPTIMIZER_NAMES {
            let params = match name {
                "gd" => r#""gamma":0.001"#,
                "heavy_ball" => r#""gamma":0.001,"p":0.5"#,
                "nesterov" | "polyak" | "l4" => "",
                "lossgrad" => r#""alpha":0.001"#,
                "hd" => r#""alpha":0.001,"eta":0.0001"#,
                "rmsprop" => r#""alpha":0.001,"beta":0.9"#,
                "adam" => r#""alpha":0.001"#,
                "idbd" => r#""beta0":-3,"eta":0.01"#,
                "idbd1" => r#""alpha":0.001,"eta":0.0001,"lambda":0.5"#,
                "csawg" => r#""gamma":0.001,"k":2"#,
                _ => unreachable!(),
            };
            let sep = if params.is_empty() { "" } else { "," };
            let text = format!(
                r#"{{"problem":{{"name":"quadratic","q":[[2,0],[0,1]],"w_star":[0,0],"start":[1,1]}},"optimizer":{{"name":"{name}"{sep}{params}}},"budget":{{"max_iterations":3}}}}"#
            );
            let cfg = ExperimentConfig::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.optimizer_name(), name);
            if name != "idbd" {
                let t = run_experiment(&cfg).unwrap();
                assert_eq!(t.records.len(), 3, "{name}");
            }
        }
    }

    #[test]
    fn overrides_apply_dotted_paths() {
        let cfg = gd_convex(0.001, 10);
        let out = cfg
            .with_overrides(&["optimizer.gamma=0.0005", "budget.max_iterations=3", "problem.start.1=5"])
            .unwrap();
        assert_eq!(out.optimizer, OptimizerSpec::Gd { gamma: 0.0005 });
        assert_eq!(out.budget.max_iterations, 3);
        assert!(matches!(&out.problem, ProblemSpec::Quadratic { start, .. } if start == &vec![-1.0, 5.0]));
        assert!(cfg.with_overrides(&["optimizer.gamm=1"]).is_err());
        assert!(cfg.with_overrides(&["nokey"]).is_err());
    }

    #[test]
    fn gd_error_strictly_decreases() {
        let t = run_experiment(&gd_convex(0.00099, 10)).unwrap();
        assert_eq!(t.records.len(), 10);
        // closed form: e_k(i) = (1 − γ q_i)^k e_0(i)
        for (k, r) in t.records.iter().enumerate() {
            let k = (k + 1) as i32;
            let e1 = (1.0 - 0.00099 * 1000.0f64).powi(k) * -2.0;
            let e2 = (1.0 - 0.00099f64).powi(k) * 1.0;
            let f = 0.5 * (1000.0 * e1 * e1 + e2 * e2);
            assert!((r.error - f).abs() <= 1e-12 * f.max(1e-300));
        }
        assert!(t.records.windows(2).all(|w| w[1].error < w[0].error));
    }

    #[test]
    fn zero_iteration_budget_gives_empty_trace() {
        let t = run_experiment(&gd_convex(0.001, 0)).unwrap();
        assert!(t.records.is_empty());
        assert_eq!(t.status, TraceStatus::BudgetExhausted);
    }

    #[test]
    fn divergence_is_recorded_not_thrown() {
        let t = run_experiment(&gd_convex(0.01, 1000)).unwrap();
        assert_eq!(t.status, TraceStatus::Diverged);
        assert!(t.records.iter().all(|r| r.error <= crate::trace::DIVERGENCE_CAP));
    }

    fn synthetic(label: &str, errors: &[f64]) -> Trace {
        Trace {
            label: label.into(),
            dim: 1,
            options: RecordOptions::default(),
            records: errors
                .iter()
                .enumerate()
                .map(|(i, &e)| crate::trace::TraceRecord {
                    iteration: i as u64 + 1,
                    grad_evals: 2 * (i as u64 + 1),
                    error: e,
                    w: None,
                    alpha: None,
                })
                .collect(),
            status: TraceStatus::BudgetExhausted,
            total_grad_evals: 2 * errors.len() as u64,
            total_func_evals: 0,
        }
    }

    #[test]
    fn speedup_examples() {
        let a = synthetic("a", &[1.0, 0.5, 0.1, 0.1]);
        let b = synthetic("b", &[1.0, 0.5, 1e-3, 1e-3]);
        assert_eq!(speedup_at_budget(&a, &a, 6).unwrap(), 1.0);
        assert!((speedup_at_budget(&a, &b, 6).unwrap() - 100.0).abs() < 1e-9);
        // 7 evals falls back to the record at 6
        assert!((speedup_at_budget(&a, &b, 7).unwrap() - 100.0).abs() < 1e-9);
        assert!(speedup_at_budget(&a, &b, 9).is_err());
    }

    #[test]
    fn rate_examples() {
        let geo: Vec<f64> = (1..=50).map(|k| 0.9f64.powi(k)).collect();
        let t = synthetic("geo", &geo);
        assert!((empirical_rate(&t, 5, 40).unwrap() - 0.9).abs() < 1e-12);
        let flat = synthetic("flat", &[0.3; 10]);
        assert_eq!(empirical_rate(&flat, 1, 10).unwrap(), 1.0);
        assert!(empirical_rate(&flat, 5, 50).is_err());
        assert!(empirical_rate(&flat, 5, 5).is_err());
        let zero = synthetic("z", &[1.0, 0.0, 1.0]);
        assert!(empirical_rate(&zero, 1, 3).is_err());

        // GD on a 1D quadratic: f-error contracts by (1 − γq)² per step
        let (gamma, q) = (0.1, 3.0);
        let cfg = ExperimentConfig::new(
            "gd1d",
            ProblemSpec::Quadratic {
                q: vec![vec![q]],
                w_star: vec![0.0],
                start: vec![1.0],
            },
            OptimizerSpec::Gd { gamma },
            EvalBudget::iterations(60),
        );
        let t = run_experiment(&cfg).unwrap();
        let rate = empirical_rate(&t, 10, 60).unwrap();
        assert!((rate - (1.0 - gamma * q).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn grid_expansion() {
        let base = ExperimentConfig::new(
            "",
            ProblemSpec::rosenbrock(),
            OptimizerSpec::Adam {
                alpha: 0.01,
                beta1: 0.9,
                beta2: 0.999,
                eps: DEFAULT_ADAM_EPS,
            },
            EvalBudget::iterations(5),
        );
        let mut grid = Grid::new();
        grid.insert("optimizer.alpha".into(), vec![0.005.into(), 0.01.into()]);
        grid.insert("optimizer.beta1".into(), vec![0.9.into(), 0.99.into(), 0.999.into()]);
        grid.insert("optimizer.beta2".into(), vec![0.99.into(), 0.999.into(), 0.9999.into()]);
        let cfgs = expand_grid(&grid, &base).unwrap();
        assert_eq!(cfgs.len(), 18);
        assert_eq!(cfgs[0].label, "adam alpha=0.005 beta1=0.9 beta2=0.99");
        assert!(matches!(cfgs[17].optimizer, OptimizerSpec::Adam { alpha, beta1, beta2, .. }
            if alpha == 0.01 && beta1 == 0.999 && beta2 == 0.9999));

        let mut empty = Grid::new();
        assert!(expand_grid(&empty, &base).is_err());
        empty.insert("optimizer.alpha".into(), vec![]);
        assert!(expand_grid(&empty, &base).is_err());
        let mut bad = Grid::new();
        bad.insert("optimizer.gamma".into(), vec![0.1.into()]);
        assert!(expand_grid(&bad, &base).is_err());
    }

    #[test]
    fn nesterov_requires_curvature_off_quadratics() {
        let cfg = ExperimentConfig::new(
            "n",
            ProblemSpec::rosenbrock(),
            OptimizerSpec::Nesterov {
                mode: NesterovModeSpec::StronglyConvex,
                mu: None,
                l: None,
            },
            EvalBudget::iterations(5),
        );
        assert!(run_experiment(&cfg).is_err());
    }
}
