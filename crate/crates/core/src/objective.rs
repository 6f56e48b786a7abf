//! The objective contract: loss and gradient with evaluation accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// A differentiable loss. `eval_grad` may be stochastic (it takes `&mut self`);
/// `value` is the deterministic loss used for measurement.
pub trait Problem: Send {
    fn dim(&self) -> usize;

    fn value(&self, w: &ParamVector) -> Result<f64>;

    fn eval_grad(&mut self, w: &ParamVector) -> Result<(f64, ParamVector)>;

    fn optimum_value(&self) -> Option<f64> {
        None
    }

    fn optimum_point(&self) -> Option<ParamVector> {
        None
    }

    /// Next `(x, y*)` regression sample, for problems that are sample streams.
    fn next_sample(&mut self) -> Option<(ParamVector, f64)> {
        None
    }
}

/// Wraps a [`Problem`] and counts every gradient and function evaluation an
/// optimizer requests. Counters only ever increase.
pub struct Objective {
    problem: Box<dyn Problem>,
    grad_evals: u64,
    func_evals: u64,
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim())
            .field("grad_evals", &self.grad_evals)
            .field("func_evals", &self.func_evals)
            .finish()
    }
}

impl Objective {
    pub fn new(problem: impl Problem + 'static) -> Self {
        Self::from_boxed(Box::new(problem))
    }

    pub fn from_boxed(problem: Box<dyn Problem>) -> Self {
        Objective {
            problem,
            grad_evals: 0,
            func_evals: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    pub fn func_evals(&self) -> u64 {
        self.func_evals
    }

    pub fn optimum_value(&self) -> Option<f64> {
        self.problem.optimum_value()
    }

    pub fn optimum_point(&self) -> Option<ParamVector> {
        self.problem.optimum_point()
    }

    /// Loss and gradient at `w`; one gradient evaluation.
    pub fn value_and_grad(&mut self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        self.check_dim(w)?;
        self.grad_evals += 1;
        let (f, g) = self.problem.eval_grad(w)?;
        if !f.is_finite() {
            return Err(Error::non_finite("objective value"));
        }
        Ok((f, g))
    }

    /// Gradient at `w`; one gradient evaluation.
    pub fn grad(&mut self, w: &ParamVector) -> Result<ParamVector> {
        self.value_and_grad(w).map(|(_, g)| g)
    }

    /// Loss at `w`; one function evaluation.
    pub fn eval(&mut self, w: &ParamVector) -> Result<f64> {
        self.check_dim(w)?;
        self.func_evals += 1;
        self.value_unmetered(w)
    }

    /// One regression sample from a stream problem. Counts as a gradient
    /// evaluation, since the sample is what a stochastic gradient consumes.
    pub fn sample(&mut self) -> Result<(ParamVector, f64)> {
        let s = self
            .problem
            .next_sample()
            .ok_or_else(|| Error::Undefined("problem does not provide regression samples".into()))?;
        self.grad_evals += 1;
        Ok(s)
    }

    /// Loss at `w` without touching the counters. For measurement only.
    pub fn value_unmetered(&self, w: &ParamVector) -> Result<f64> {
        let f = self.problem.value(w)?;
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::non_finite("objective value"))
        }
    }

    /// `f(w) - f(w*)`, or `f(w)` when the optimum value is unknown. Unmetered.
    pub fn error(&self, w: &ParamVector) -> Result<f64> {
        let f = self.value_unmetered(w)?;
        Ok(f - self.optimum_value().unwrap_or(0.0))
    }

    fn check_dim(&self, w: &ParamVector) -> Result<()> {
        if w.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.dim(),
            })
        }
    }
}

pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Central-difference gradient with probes scaled by `max(1, |w(i)|)`.
/// Uses unmetered evaluations, so the objective's counters are unchanged.
pub fn finite_diff_grad(obj: &Objective, w: &ParamVector, h: f64) -> Result<ParamVector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "must be positive and finite"));
    }
    let mut out = Vec::with_capacity(w.dim());
    let mut probe = w.as_slice().to_vec();
    for i in 0..w.dim() {
        let step = h * w[i].abs().max(1.0);
        probe[i] = w[i] + step;
        let plus = obj.value_unmetered(&ParamVector::new(probe.clone())?)?;
        probe[i] = w[i] - step;
        let minus = obj.value_unmetered(&ParamVector::new(probe.clone())?)?;
        probe[i] = w[i];
        out.push((plus - minus) / (2.0 * step));
    }
    ParamVector::new(out)
}

/// Stopping rule for a run. Stops at whichever condition trips first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalBudget {
    pub max_iterations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_grad_evals: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_floor: Option<f64>,
}

impl EvalBudget {
    pub fn iterations(max_iterations: u64) -> Self {
        EvalBudget {
            max_iterations,
            max_grad_evals: None,
            error_floor: None,
        }
    }

    pub fn with_grad_evals(mut self, n: u64) -> Self {
        self.max_grad_evals = Some(n);
        self
    }

    pub fn with_error_floor(mut self, floor: f64) -> Self {
        self.error_floor = Some(floor);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.error_floor.is_some_and(|f| !(f >= 0.0 && f.is_finite())) {
            return Err(Error::invalid("error_floor", "must be finite and non-negative"));
        }
        if self.max_grad_evals == Some(0) {
            return Err(Error::invalid("max_grad_evals", "must be positive when set"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct HalfSquare;

    impl Problem for HalfSquare {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, w: &ParamVector) -> Result<f64> {
            Ok(0.5 * w[0] * w[0])
        }
        fn eval_grad(&mut self, w: &ParamVector) -> Result<(f64, ParamVector)> {
            Ok((self.value(w)?, w.clone()))
        }
    }

    struct Constant;

    impl Problem for Constant {
        fn dim(&self) -> usize {
            3
        }
        fn value(&self, _: &ParamVector) -> Result<f64> {
            Ok(4.2)
        }
        fn eval_grad(&mut self, _: &ParamVector) -> Result<(f64, ParamVector)> {
            Ok((4.2, ParamVector::zeros(3)))
        }
    }

    #[test]
    fn fd_half_square() {
        let obj = Objective::new(HalfSquare);
        let w = ParamVector::new(vec![3.0]).unwrap();
        let g = finite_diff_grad(&obj, &w, 1e-5).unwrap();
        assert!(((g[0] - 3.0) / 3.0).abs() <= 1e-9, "{}", g[0]);
        assert_eq!(obj.grad_evals(), 0);
    }

    #[test]
    fn fd_constant_is_zero() {
        let obj = Objective::new(Constant);
        let w = ParamVector::new(vec![1.0, -7.0, 1e3]).unwrap();
        assert!(finite_diff_grad(&obj, &w, DEFAULT_FD_STEP).unwrap().is_zero());
        assert!(finite_diff_grad(&obj, &w, 0.0).is_err());
    }

    #[test]
    fn counters_increment_per_call() {
        let mut obj = Objective::new(HalfSquare);
        let w = ParamVector::new(vec![2.0]).unwrap();
        for n in 1..=5 {
            obj.grad(&w).unwrap();
            assert_eq!(obj.grad_evals(), n);
        }
        obj.eval(&w).unwrap();
        assert_eq!(obj.func_evals(), 1);
        obj.error(&w).unwrap();
        assert_eq!((obj.grad_evals(), obj.func_evals()), (5, 1));
        assert!(obj.sample().is_err());
        assert!(obj.grad(&ParamVector::zeros(2)).is_err());
    }
}
