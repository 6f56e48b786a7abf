//! Step-size planning.
//!
//! Gradient descent runs with a small scalar step `γ` while its update pairs
//! are collected into two buffers of `K` records each. By default a pair is
//! the iterate a step arrived at together with the gradient that produced the
//! step; [`Pairing::BeforeStep`] stores the iterate the gradient was evaluated
//! at instead. The two differ by one descent step and behave differently on
//! curved losses: the first is noticeably more stable at short horizons. Once both
//! are full, record `s` of the first buffer and record `s` of the second are
//! exactly `K` descent steps apart, and the diagonal step-size
//!
//! ```text
//! α(i) = Σ_s g_s(i) (w_s(i) − w_{s+K}(i)) / Σ_s g_s(i)²
//! ```
//!
//! is the least-squares fit of "where the iterate will be `K` steps from now"
//! as a diagonal rescaling of the current gradient. The iterate is then
//! projected with `w ← w − α ⊙ g`, optionally `P` times, each projection
//! followed by `M` ordinary descent steps that pull an overshooting projection
//! back onto the descent path. Components whose recorded gradients are all
//! zero get `α(i) = 0`: no projection until there is evidence for one.

use serde::{Deserialize, Serialize};

use crate::baselines::{Optimizer, StepReport};
use crate::error::{Error, Result};
use crate::objective::{EvalBudget, Objective};
use crate::trace::{drive, RecordOptions, Trace};
use crate::vector::{axpy, hadamard, ParamVector};

/// An iterate and a gradient, related as chosen by [`Pairing`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperiencePair {
    pub w: ParamVector,
    pub g: ParamVector,
}

impl ExperiencePair {
    pub fn new(w: ParamVector, g: ParamVector) -> Result<Self> {
        w.same_dim(&g)?;
        Ok(ExperiencePair { w, g })
    }
}

/// Two buffers of capacity `K`. The first fills, then the second; when the
/// second is full, planning fires and the second becomes the first.
#[derive(Debug, Clone)]
pub struct ExperienceBuffer {
    capacity: usize,
    b1: Vec<ExperiencePair>,
    b2: Vec<ExperiencePair>,
}

impl ExperienceBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        Ok(ExperienceBuffer {
            capacity,
            b1: Vec::with_capacity(capacity),
            b2: Vec::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn first(&self) -> &[ExperiencePair] {
        &self.b1
    }

    pub fn second(&self) -> &[ExperiencePair] {
        &self.b2
    }

    pub fn is_ready(&self) -> bool {
        self.b1.len() == self.capacity && self.b2.len() == self.capacity
    }

    /// Appends a pair and returns whether planning is now due.
    pub fn record(&mut self, pair: ExperiencePair) -> Result<bool> {
        if self.is_ready() {
            return Err(Error::Undefined(
                "buffer is full; rotate after planning before recording".into(),
            ));
        }
        if let Some(existing) = self.b1.first() {
            existing.w.same_dim(&pair.w)?;
        }
        if self.b1.len() < self.capacity {
            self.b1.push(pair);
        } else {
            self.b2.push(pair);
        }
        Ok(self.is_ready())
    }

    /// `B₁ ← B₂`, then empty `B₂`.
    pub fn rotate(&mut self) {
        self.b1 = std::mem::take(&mut self.b2);
        self.b2.reserve(self.capacity);
    }
}

/// The sums behind a planned step-size and the step-size itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningStatistics {
    /// `Σ g_s ⊙ (w_s − w_{s+K})`
    pub sum1: ParamVector,
    /// `Σ g_s ⊙ g_s`
    pub sum2: ParamVector,
    pub alpha: ParamVector,
}

/// Fits the diagonal step-size from a full buffer pair.
pub fn compute_alpha(buf: &ExperienceBuffer) -> Result<PlanningStatistics> {
    if !buf.is_ready() {
        return Err(Error::Undefined(format!(
            "planning needs {} records in each buffer, have {} and {}",
            buf.capacity,
            buf.b1.len(),
            buf.b2.len()
        )));
    }
    let d = buf.b1[0].w.dim();
    let mut sum1 = ParamVector::zeros(d);
    let mut sum2 = ParamVector::zeros(d);
    for (early, late) in buf.b1.iter().zip(&buf.b2) {
        let moved = early.w.sub(&late.w)?;
        sum1 = sum1.add(&hadamard(&early.g, &moved)?)?;
        sum2 = sum2.add(&hadamard(&early.g, &early.g)?)?;
    }
    let alpha = sum1.zip_map(&sum2, |s1, s2| if s2 == 0.0 { 0.0 } else { s1 / s2 })?;
    Ok(PlanningStatistics { sum1, sum2, alpha })
}

/// `w(i) − α(i) g(i)`.
pub fn apply_projection(
    w: &ParamVector,
    g: &ParamVector,
    stats: &PlanningStatistics,
) -> Result<ParamVector> {
    w.same_dim(g)?;
    w.sub(&hadamard(&stats.alpha, g)?)
}

/// Which iterate a recorded gradient is paired with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `(w_{k+1}, g_k)` where `w_{k+1} = w_k − γ g_k`.
    #[default]
    AfterStep,
    /// `(w_k, g_k)` with `g_k = f'(w_k)`.
    BeforeStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    /// Step-size of the underlying gradient descent.
    pub gamma: f64,
    /// Buffer size, which is also the planning horizon.
    pub k: usize,
    /// Projections per planning event.
    #[serde(default = "one")]
    pub p: usize,
    /// Descent steps after each projection.
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub pairing: Pairing,
}

fn one() -> usize {
    1
}

impl PlannerConfig {
    /// Single projection per event, no bringing-back steps.
    pub fn single(gamma: f64, k: usize) -> Self {
        PlannerConfig {
            gamma,
            k,
            p: 1,
            m: 0,
            pairing: Pairing::AfterStep,
        }
    }

    pub fn repeated(gamma: f64, k: usize, p: usize, m: usize) -> Self {
        PlannerConfig {
            gamma,
            k,
            p,
            m,
            pairing: Pairing::AfterStep,
        }
    }

    pub fn with_pairing(mut self, pairing: Pairing) -> Self {
        self.pairing = pairing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", "must be finite"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        if self.p == 0 {
            return Err(Error::invalid("p", "must be at least 1"));
        }
        Ok(())
    }

    /// Gradient evaluations spent by one planning event.
    pub fn evals_per_event(&self) -> u64 {
        (self.p as u64) * (1 + self.m as u64)
    }
}

/// The planner as a stepper: one call is one main-loop iteration, which
/// includes a planning event whenever the buffers fill.
#[derive(Debug, Clone)]
pub struct Csawg {
    w: ParamVector,
    cfg: PlannerConfig,
    buffer: ExperienceBuffer,
    iterations: u64,
    events: u64,
    last_stats: Option<PlanningStatistics>,
}

impl Csawg {
    pub fn new(w0: ParamVector, cfg: PlannerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Csawg {
            w: w0,
            buffer: ExperienceBuffer::new(cfg.k)?,
            cfg,
            iterations: 0,
            events: 0,
            last_stats: None,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    /// Number of planning events so far.
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn last_stats(&self) -> Option<&PlanningStatistics> {
        self.last_stats.as_ref()
    }

    pub fn buffer(&self) -> &ExperienceBuffer {
        &self.buffer
    }

    fn plan(&mut self, obj: &mut Objective) -> Result<PlanningStatistics> {
        let stats = compute_alpha(&self.buffer)?;
        for _ in 0..self.cfg.p {
            let g = obj.grad(&self.w)?;
            self.w = apply_projection(&self.w, &g, &stats)?;
            for _ in 0..self.cfg.m {
                let g = obj.grad(&self.w)?;
                self.w = axpy(-self.cfg.gamma, &g, &self.w)?;
            }
        }
        self.buffer.rotate();
        self.events += 1;
        Ok(stats)
    }
}

impl Optimizer for Csawg {
    fn name(&self) -> &'static str {
        "csawg"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.iterations
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let g = obj.grad(&self.w)?;
        let next = axpy(-self.cfg.gamma, &g, &self.w)?;
        let w = match self.cfg.pairing {
            Pairing::AfterStep => next.clone(),
            Pairing::BeforeStep => self.w.clone(),
        };
        self.w = next;
        let due = self.buffer.record(ExperiencePair { w, g })?;
        self.iterations += 1;
        if !due {
            return Ok(StepReport::default());
        }
        let stats = self.plan(obj)?;
        let alpha = stats.alpha.clone();
        self.last_stats = Some(stats);
        Ok(StepReport { alpha: Some(alpha) })
    }
}

/// Runs the planner from `w0` until the budget trips.
pub fn csawg_run(
    obj: &mut Objective,
    w0: ParamVector,
    cfg: PlannerConfig,
    budget: &EvalBudget,
    record: RecordOptions,
) -> Result<Trace> {
    let mut opt = Csawg::new(w0, cfg)?;
    drive(&mut opt, obj, budget, record)
}
