//! Baseline step-size methods as stateful one-step updaters.
//!
//! Every stepper spends exactly one gradient evaluation per step. LossGrad
//! additionally spends one function evaluation on its trial point.

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::vector::{axpy, ParamVector};

/// What a single step exposes besides the new iterate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Step-size in effect for this step, broadcast to a vector for scalar
    /// methods. `None` when the method has no step-size worth recording.
    pub alpha: Option<ParamVector>,
}

pub trait Optimizer: Send {
    fn name(&self) -> &'static str;

    /// Current iterate.
    fn position(&self) -> &ParamVector;

    /// Number of completed steps.
    fn steps(&self) -> u64;

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport>;
}

pub const DEFAULT_ADAM_EPS: f64 = 1e-8;
pub const DEFAULT_RMSPROP_EPS: f64 = 1e-8;
pub const DEFAULT_L4_EPS: f64 = 1e-12;
pub const DEFAULT_LOSSGRAD_FACTOR: f64 = 1.1;
pub const DEFAULT_L4_MOMENTUM: f64 = 0.9;

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be finite"))
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(name, "must lie in [0, 1)"))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be positive and finite"))
    }
}

fn broadcast(dim: usize, a: f64) -> Option<ParamVector> {
    ParamVector::filled(dim, a).ok()
}

/// `w ← w − γ f'(w)`.
#[derive(Debug, Clone)]
pub struct GradientDescent {
    w: ParamVector,
    gamma: f64,
    k: u64,
}

impl GradientDescent {
    pub fn new(w0: ParamVector, gamma: f64) -> Result<Self> {
        finite("gamma", gamma)?;
        Ok(GradientDescent { w: w0, gamma, k: 0 })
    }
}

impl Optimizer for GradientDescent {
    fn name(&self) -> &'static str {
        "gd"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let g = obj.grad(&self.w)?;
        self.w = axpy(-self.gamma, &g, &self.w)?;
        self.k += 1;
        Ok(StepReport::default())
    }
}

/// Polyak's heavy ball: `w ← w − γ f'(w) + p Δ`, with `Δ` the last weight change.
#[derive(Debug, Clone)]
pub struct HeavyBall {
    w: ParamVector,
    delta: ParamVector,
    gamma: f64,
    momentum: f64,
    k: u64,
}

impl HeavyBall {
    pub fn new(w0: ParamVector, gamma: f64, momentum: f64) -> Result<Self> {
        finite("gamma", gamma)?;
        unit_interval("p", momentum)?;
        let delta = ParamVector::zeros(w0.dim());
        Ok(HeavyBall {
            w: w0,
            delta,
            gamma,
            momentum,
            k: 0,
        })
    }

    pub fn delta(&self) -> &ParamVector {
        &self.delta
    }
}

impl Optimizer for HeavyBall {
    fn name(&self) -> &'static str {
        "heavy_ball"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let g = obj.grad(&self.w)?;
        let next = axpy(self.momentum, &self.delta, &axpy(-self.gamma, &g, &self.w)?)?;
        self.delta = next.sub(&self.w)?;
        self.w = next;
        self.k += 1;
        Ok(StepReport::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NesterovMode {
    Convex,
    StronglyConvex,
}

/// Nesterov's accelerated gradient with step `1/L`:
/// `w' = x − f'(x)/L`, `x' = w' + c (w' − w)`.
///
/// The extrapolation coefficient is `(√L − √μ)/(√L + √μ)` in strongly convex
/// mode and `(t − 1)/t'` with `t' = (1 + √(1 + 4t²))/2`, `t₀ = 1` otherwise.
#[derive(Debug, Clone)]
pub struct Nesterov {
    w: ParamVector,
    x: ParamVector,
    mode: NesterovMode,
    mu: f64,
    l: f64,
    t: f64,
    k: u64,
}

impl Nesterov {
    pub fn new(w0: ParamVector, mode: NesterovMode, mu: f64, l: f64) -> Result<Self> {
        positive("L", l)?;
        if mode == NesterovMode::StronglyConvex {
            positive("mu", mu)?;
            if mu > l {
                return Err(Error::invalid("mu", "must not exceed L"));
            }
        }
        Ok(Nesterov {
            x: w0.clone(),
            w: w0,
            mode,
            mu,
            l,
            t: 1.0,
            k: 0,
        })
    }

    /// Current convex-mode schedule value `t_k`.
    pub fn t(&self) -> f64 {
        self.t
    }

    fn coefficient(&mut self) -> f64 {
        match self.mode {
            NesterovMode::StronglyConvex => {
                let (sl, sm) = (self.l.sqrt(), self.mu.sqrt());
                (sl - sm) / (sl + sm)
            }
            NesterovMode::Convex => {
                let t_next = (1.0 + (1.0 + 4.0 * self.t * self.t).sqrt()) / 2.0;
                let c = (self.t - 1.0) / t_next;
                self.t = t_next;
                c
            }
        }
    }
}

impl Optimizer for Nesterov {
    fn name(&self) -> &'static str {
        "nesterov"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let g = obj.grad(&self.x)?;
        let w_next = axpy(-1.0 / self.l, &g, &self.x)?;
        let c = self.coefficient();
        self.x = axpy(c, &w_next.sub(&self.w)?, &w_next)?;
        self.w = w_next;
        self.k += 1;
        Ok(StepReport::default())
    }
}

/// Polyak step-size `α = (f(w) − f*)/‖g‖²` with known optimal value.
#[derive(Debug, Clone)]
pub struct Polyak {
    w: ParamVector,
    f_star: f64,
    last_alpha: f64,
    k: u64,
}

impl Polyak {
    pub fn new(w0: ParamVector, f_star: f64) -> Result<Self> {
        finite("f_star", f_star)?;
        Ok(Polyak {
            w: w0,
            f_star,
            last_alpha: 0.0,
            k: 0,
        })
    }

    pub fn last_alpha(&self) -> f64 {
        self.last_alpha
    }
}

impl Optimizer for Polyak {
    fn name(&self) -> &'static str {
        "polyak"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let (f, g) = obj.value_and_grad(&self.w)?;
        let gap = f - self.f_star;
        if gap < 0.0 {
            return Err(Error::invalid("f_star", format!("exceeds f(w) by {:e}", -gap)));
        }
        let gg = g.norm_sq();
        self.k += 1;
        if gg == 0.0 {
            if gap > 0.0 {
                return Err(Error::StationaryAnomaly { gap });
            }
            self.last_alpha = 0.0;
        } else {
            self.last_alpha = gap / gg;
            self.w = axpy(-self.last_alpha, &g, &self.w)?;
        }
        Ok(StepReport {
            alpha: broadcast(self.w.dim(), self.last_alpha),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L4Direction {
    Gradient,
    Momentum,
}

/// L4 with a known optimal value: `α = (f(w) − f*)/(f'(w)ᵀv + ε)`, `w ← w − α v`.
///
/// In momentum mode `v ← p v + g` (the heavy-ball accumulation of gradients).
#[derive(Debug, Clone)]
pub struct L4 {
    w: ParamVector,
    v: ParamVector,
    f_star: f64,
    eps: f64,
    direction: L4Direction,
    momentum: f64,
    last_alpha: f64,
    k: u64,
}

impl L4 {
    pub fn new(w0: ParamVector, f_star: f64, eps: f64, direction: L4Direction) -> Result<Self> {
        finite("f_star", f_star)?;
        positive("eps", eps)?;
        Ok(L4 {
            v: ParamVector::zeros(w0.dim()),
            w: w0,
            f_star,
            eps,
            direction,
            momentum: DEFAULT_L4_MOMENTUM,
            last_alpha: 0.0,
            k: 0,
        })
    }

    pub fn with_momentum(mut self, p: f64) -> Result<Self> {
        unit_interval("p", p)?;
        self.momentum = p;
        Ok(self)
    }

    pub fn last_alpha(&self) -> f64 {
        self.last_alpha
    }

    /// One update along an explicit direction `v`.
    pub fn step_along(&mut self, obj: &mut Objective, v: &ParamVector) -> Result<f64> {
        let (f, g) = obj.value_and_grad(&self.w)?;
        let alpha = (f - self.f_star) / (g.dot(v)? + self.eps);
        if !alpha.is_finite() {
            return Err(Error::non_finite("L4 step-size"));
        }
        self.w = axpy(-alpha, v, &self.w)?;
        self.last_alpha = alpha;
        self.k += 1;
        Ok(alpha)
    }
}

impl Optimizer for L4 {
    fn name(&self) -> &'static str {
        "l4"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let (f, g) = obj.value_and_grad(&self.w)?;
        self.v = match self.direction {
            L4Direction::Gradient => g.clone(),
            L4Direction::Momentum => axpy(self.momentum, &self.v, &g)?,
        };
        let alpha = (f - self.f_star) / (g.dot(&self.v)? + self.eps);
        if !alpha.is_finite() {
            return Err(Error::non_finite("L4 step-size"));
        }
        self.w = axpy(-alpha, &self.v, &self.w)?;
        self.last_alpha = alpha;
        self.k += 1;
        Ok(StepReport {
            alpha: broadcast(self.w.dim(), alpha),
        })
    }
}

/// LossGrad: compares the trial loss at `w − αg` against its linearization and
/// grows `α` by `ρ` when `r = e/(α‖g‖²) < ½`, otherwise shrinks it by `ρ`.
#[derive(Debug, Clone)]
pub struct LossGrad {
    w: ParamVector,
    alpha: f64,
    factor: f64,
    last_ratio: Option<f64>,
    k: u64,
}

impl LossGrad {
    pub fn new(w0: ParamVector, alpha0: f64, factor: f64) -> Result<Self> {
        positive("alpha", alpha0)?;
        if !(factor > 1.0 && factor.is_finite()) {
            return Err(Error::invalid("rho", "must be greater than 1"));
        }
        Ok(LossGrad {
            w: w0,
            alpha: alpha0,
            factor,
            last_ratio: None,
            k: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `r_h` from the most recent step with a nonzero gradient.
    pub fn last_ratio(&self) -> Option<f64> {
        self.last_ratio
    }
}

/// Linearization error ratio `r = e/(α‖g‖²)` where
/// `e = f(w − αg) − (f(w) − α‖g‖²)`.
pub fn lossgrad_ratio(f: f64, f_trial: f64, alpha: f64, grad_norm_sq: f64) -> f64 {
    let linear_drop = alpha * grad_norm_sq;
    (f_trial - (f - linear_drop)) / linear_drop
}

impl Optimizer for LossGrad {
    fn name(&self) -> &'static str {
        "lossgrad"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let (f, g) = obj.value_and_grad(&self.w)?;
        self.k += 1;
        let gg = g.norm_sq();
        if gg > 0.0 {
            let trial = axpy(-self.alpha, &g, &self.w)?;
            let f_trial = obj.eval(&trial)?;
            let r = lossgrad_ratio(f, f_trial, self.alpha, gg);
            self.alpha = if r < 0.5 {
                self.alpha * self.factor
            } else {
                self.alpha / self.factor
            };
            self.last_ratio = Some(r);
            self.w = axpy(-self.alpha, &g, &self.w)?;
        }
        Ok(StepReport {
            alpha: broadcast(self.w.dim(), self.alpha),
        })
    }
}

/// RMSprop: `v ← βv + (1−β) g⊙g`, `w ← w − α g/√(v + ε)`.
#[derive(Debug, Clone)]
pub struct RmsProp {
    w: ParamVector,
    v: ParamVector,
    alpha: f64,
    beta: f64,
    eps: f64,
    k: u64,
}

impl RmsProp {
    pub fn new(w0: ParamVector, alpha: f64, beta: f64, eps: f64) -> Result<Self> {
        finite("alpha", alpha)?;
        unit_interval("beta", beta)?;
        positive("eps", eps)?;
        Ok(RmsProp {
            v: ParamVector::zeros(w0.dim()),
            w: w0,
            alpha,
            beta,
            eps,
            k: 0,
        })
    }

    pub fn second_moment(&self) -> &ParamVector {
        &self.v
    }
}

impl Optimizer for RmsProp {
    fn name(&self) -> &'static str {
        "rmsprop"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let g = obj.grad(&self.w)?;
        let (beta, eps, alpha) = (self.beta, self.eps, self.alpha);
        self.v = self.v.zip_map(&g, |v, gi| beta * v + (1.0 - beta) * gi * gi)?;
        let update = g.zip_map(&self.v, |gi, v| alpha * gi / (v + eps).sqrt())?;
        self.w = self.w.sub(&update)?;
        self.k += 1;
        Ok(StepReport::default())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    w: ParamVector,
    m: ParamVector,
    v: ParamVector,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    k: u64,
}

impl Adam {
    pub fn new(w0: ParamVector, alpha: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        finite("alpha", alpha)?;
        unit_interval("beta1", beta1)?;
        unit_interval("beta2", beta2)?;
        positive("eps", eps)?;
        Ok(Adam {
            m: ParamVector::zeros(w0.dim()),
            v: ParamVector::zeros(w0.dim()),
            w: w0,
            alpha,
            beta1,
            beta2,
            eps,
            k: 0,
        })
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let g = obj.grad(&self.w)?;
        self.k += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        self.m = self.m.zip_map(&g, |m, gi| b1 * m + (1.0 - b1) * gi)?;
        self.v = self.v.zip_map(&g, |v, gi| b2 * v + (1.0 - b2) * gi * gi)?;
        let exp = i32::try_from(self.k).unwrap_or(i32::MAX);
        let c1 = 1.0 - b1.powi(exp);
        let c2 = 1.0 - b2.powi(exp);
        let (alpha, eps) = (self.alpha, self.eps);
        let update = self
            .m
            .zip_map(&self.v, |m, v| alpha * (m / c1) / ((v / c2).sqrt() + eps))?;
        self.w = self.w.sub(&update)?;
        Ok(StepReport::default())
    }
}

/// Hypergradient descent: `α ← α + η gₖᵀgₖ₋₁`, then `w ← w − α gₖ`.
#[derive(Debug, Clone)]
pub struct HypergradientDescent {
    w: ParamVector,
    prev_grad: ParamVector,
    alpha: f64,
    eta: f64,
    k: u64,
}

impl HypergradientDescent {
    pub fn new(w0: ParamVector, alpha0: f64, eta: f64) -> Result<Self> {
        finite("alpha", alpha0)?;
        finite("eta", eta)?;
        Ok(HypergradientDescent {
            prev_grad: ParamVector::zeros(w0.dim()),
            w: w0,
            alpha: alpha0,
            eta,
            k: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Optimizer for HypergradientDescent {
    fn name(&self) -> &'static str {
        "hd"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let g = obj.grad(&self.w)?;
        self.alpha += self.eta * g.dot(&self.prev_grad)?;
        if !self.alpha.is_finite() {
            return Err(Error::non_finite("HD step-size"));
        }
        self.w = axpy(-self.alpha, &g, &self.w)?;
        self.prev_grad = g;
        self.k += 1;
        Ok(StepReport {
            alpha: broadcast(self.w.dim(), self.alpha),
        })
    }
}

/// IDBD-1: a scalar step-size adapted against a gradient trace,
/// `α ← α + η gᵀh`, `w ← w − α g`, `h ← λh + g`. With `λ = 0` this is
/// exactly hypergradient descent.
#[derive(Debug, Clone)]
pub struct Idbd1 {
    w: ParamVector,
    trace: ParamVector,
    alpha: f64,
    eta: f64,
    lambda: f64,
    k: u64,
}

impl Idbd1 {
    pub fn new(w0: ParamVector, alpha0: f64, eta: f64, lambda: f64) -> Result<Self> {
        finite("alpha", alpha0)?;
        finite("eta", eta)?;
        unit_interval("lambda", lambda)?;
        Ok(Idbd1 {
            trace: ParamVector::zeros(w0.dim()),
            w: w0,
            alpha: alpha0,
            eta,
            lambda,
            k: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn trace(&self) -> &ParamVector {
        &self.trace
    }
}

impl Optimizer for Idbd1 {
    fn name(&self) -> &'static str {
        "idbd1"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let g = obj.grad(&self.w)?;
        self.alpha += self.eta * g.dot(&self.trace)?;
        if !self.alpha.is_finite() {
            return Err(Error::non_finite("IDBD-1 step-size"));
        }
        self.w = axpy(-self.alpha, &g, &self.w)?;
        self.trace = axpy(self.lambda, &self.trace, &g)?;
        self.k += 1;
        Ok(StepReport {
            alpha: broadcast(self.w.dim(), self.alpha),
        })
    }
}

/// IDBD for online linear regression with per-component log step-sizes `β`
/// and the relu-gated trace `h`.
#[derive(Debug, Clone)]
pub struct Idbd {
    w: ParamVector,
    log_alpha: ParamVector,
    trace: ParamVector,
    eta: f64,
    k: u64,
}

impl Idbd {
    pub fn new(w0: ParamVector, log_alpha0: f64, eta: f64) -> Result<Self> {
        finite("beta0", log_alpha0)?;
        finite("eta", eta)?;
        Ok(Idbd {
            log_alpha: ParamVector::filled(w0.dim(), log_alpha0)?,
            trace: ParamVector::zeros(w0.dim()),
            w: w0,
            eta,
            k: 0,
        })
    }

    pub fn alphas(&self) -> Result<ParamVector> {
        self.log_alpha.map(f64::exp)
    }

    pub fn log_alphas(&self) -> &ParamVector {
        &self.log_alpha
    }

    pub fn trace(&self) -> &ParamVector {
        &self.trace
    }

    /// One update on the sample `(x, y*)`.
    pub fn step_sample(&mut self, x: &ParamVector, y_star: f64) -> Result<ParamVector> {
        self.w.same_dim(x)?;
        let delta = y_star - self.w.dot(x)?;
        let d = self.w.dim();
        let mut beta = Vec::with_capacity(d);
        let mut alpha = Vec::with_capacity(d);
        let mut w = Vec::with_capacity(d);
        let mut h = Vec::with_capacity(d);
        for i in 0..d {
            let xi = x[i];
            let b = self.log_alpha[i] + self.eta * delta * xi * self.trace[i];
            let a = b.exp();
            beta.push(b);
            alpha.push(a);
            w.push(self.w[i] + a * delta * xi);
            h.push(self.trace[i] * (1.0 - a * xi * xi).max(0.0) + a * delta * xi);
        }
        let alpha = ParamVector::new(alpha)?;
        self.log_alpha = ParamVector::new(beta)?;
        self.w = ParamVector::new(w)?;
        self.trace = ParamVector::new(h)?;
        self.k += 1;
        Ok(alpha)
    }
}

impl Optimizer for Idbd {
    fn name(&self) -> &'static str {
        "idbd"
    }

    fn position(&self) -> &ParamVector {
        &self.w
    }

    fn steps(&self) -> u64 {
        self.k
    }

    fn step(&mut self, obj: &mut Objective) -> Result<StepReport> {
        let (x, y) = obj.sample()?;
        let alpha = self.step_sample(&x, y)?;
        Ok(StepReport { alpha: Some(alpha) })
    }
}
