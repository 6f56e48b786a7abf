//! Run traces and the loop that produces them.

use serde::{Deserialize, Serialize};

use crate::baselines::Optimizer;
use crate::error::{Error, Result};
use crate::objective::{EvalBudget, Objective};
use crate::vector::ParamVector;

/// Error above which a run is declared diverged.
pub const DIVERGENCE_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Converged,
    BudgetExhausted,
    Diverged,
}

impl std::fmt::Display for TraceStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TraceStatus::Converged => "converged",
            TraceStatus::BudgetExhausted => "budget_exhausted",
            TraceStatus::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: u64,
    pub grad_evals: u64,
    /// `f(w) − f(w*)`
    pub error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<ParamVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ParamVector>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordOptions {
    #[serde(default)]
    pub record_w: bool,
    #[serde(default)]
    pub record_alpha: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub label: String,
    pub dim: usize,
    pub options: RecordOptions,
    pub records: Vec<TraceRecord>,
    pub status: TraceStatus,
    pub total_grad_evals: u64,
    pub total_func_evals: u64,
}

impl Trace {
    pub fn final_error(&self) -> Option<f64> {
        self.records.last().map(|r| r.error)
    }

    pub fn record_at_iteration(&self, iteration: u64) -> Option<&TraceRecord> {
        self.records
            .binary_search_by_key(&iteration, |r| r.iteration)
            .ok()
            .map(|i| &self.records[i])
    }

    /// Last record whose gradient-evaluation count does not exceed `grad_evals`.
    pub fn record_at_grad_evals(&self, grad_evals: u64) -> Option<&TraceRecord> {
        let n = self.records.partition_point(|r| r.grad_evals <= grad_evals);
        n.checked_sub(1).map(|i| &self.records[i])
    }

    /// Step-sizes recorded over the run, in order.
    pub fn alphas(&self) -> impl Iterator<Item = &ParamVector> {
        self.records.iter().filter_map(|r| r.alpha.as_ref())
    }
}

/// Steps `opt` until the budget trips. Non-finite values and errors above
/// [`DIVERGENCE_CAP`] end the run with [`TraceStatus::Diverged`]; the
/// offending iterate is not recorded.
pub fn drive(
    opt: &mut dyn Optimizer,
    obj: &mut Objective,
    budget: &EvalBudget,
    options: RecordOptions,
) -> Result<Trace> {
    budget.validate()?;
    let mut records = Vec::new();
    let mut status = TraceStatus::BudgetExhausted;
    for iteration in 1..=budget.max_iterations {
        if budget.max_grad_evals.is_some_and(|cap| obj.grad_evals() >= cap) {
            break;
        }
        let report = match opt.step(obj) {
            Ok(r) => r,
            Err(Error::NonFinite { .. }) => {
                status = TraceStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let error = match obj.error(opt.position()) {
            Ok(e) if e <= DIVERGENCE_CAP => e,
            Ok(_) | Err(Error::NonFinite { .. }) => {
                status = TraceStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        records.push(TraceRecord {
            iteration,
            grad_evals: obj.grad_evals(),
            error,
            w: options.record_w.then(|| opt.position().clone()),
            alpha: if options.record_alpha { report.alpha } else { None },
        });
        if budget.error_floor.is_some_and(|floor| error <= floor) {
            status = TraceStatus::Converged;
            break;
        }
    }
    Ok(Trace {
        label: opt.name().to_string(),
        dim: obj.dim(),
        options,
        records,
        status,
        total_grad_evals: obj.grad_evals(),
        total_func_evals: obj.func_evals(),
    })
}
