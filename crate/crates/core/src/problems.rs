//! Test problems: ill-conditioned quadratics, the Rosenbrock valley and a
//! synthetic least-mean-squares regression stream.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::objective::Problem;
use crate::vector::ParamVector;

const SYMMETRY_TOL: f64 = 1e-12;

/// `f(w) = ½ (w − w*)ᵀ Q (w − w*)` with `Q` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    q: DMatrix<f64>,
    w_star: ParamVector,
    mu: f64,
    l: f64,
}

impl QuadraticProblem {
    pub fn new(q: DMatrix<f64>, w_star: ParamVector) -> Result<Self> {
        let d = w_star.dim();
        if q.nrows() != d || q.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: q.nrows().max(q.ncols()),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("Q"));
        }
        for i in 0..d {
            for j in 0..i {
                if (q[(i, j)] - q[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid("Q", format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        let eig = q.clone().symmetric_eigen().eigenvalues;
        let mu = eig.min();
        let l = eig.max();
        if mu <= 0.0 {
            return Err(Error::invalid("Q", format!("not positive definite (min eigenvalue {mu:e})")));
        }
        Ok(QuadraticProblem { q, w_star, mu, l })
    }

    pub fn diagonal(diag: &[f64], w_star: ParamVector) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)), w_star)
    }

    /// `Q = diag(1000, 1)`, `w* = (1, 1)`.
    pub fn ill_conditioned_2d() -> Self {
        Self::diagonal(&[1000.0, 1.0], ParamVector::new(vec![1.0, 1.0]).unwrap()).unwrap()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn w_star(&self) -> &ParamVector {
        &self.w_star
    }

    /// Smallest eigenvalue of `Q`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Largest eigenvalue of `Q`.
    pub fn l(&self) -> f64 {
        self.l
    }

    /// `(½ rᵀQr, Qr)` with `r = w − w*`.
    pub fn eval_grad(&self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        let r = w.sub(&self.w_star)?;
        let qr = mat_vec(&self.q, &r)?;
        let f = 0.5 * r.dot(&qr)?;
        Ok((f, qr))
    }
}

impl Problem for QuadraticProblem {
    fn dim(&self) -> usize {
        self.w_star.dim()
    }

    fn value(&self, w: &ParamVector) -> Result<f64> {
        QuadraticProblem::eval_grad(self, w).map(|(f, _)| f)
    }

    fn eval_grad(&mut self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        QuadraticProblem::eval_grad(self, w)
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn optimum_point(&self) -> Option<ParamVector> {
        Some(self.w_star.clone())
    }
}

pub(crate) fn mat_vec(q: &DMatrix<f64>, w: &ParamVector) -> Result<ParamVector> {
    if q.ncols() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.ncols(),
            got: w.dim(),
        });
    }
    let out = q * DVector::from_column_slice(w.as_slice());
    ParamVector::new(out.iter().copied().collect())
}

/// `f(w) = (w₁ − 1)² + 100 (w₂ − w₁²)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RosenbrockProblem;

impl RosenbrockProblem {
    pub fn eval_grad(w: &ParamVector) -> Result<(f64, ParamVector)> {
        if w.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: w.dim(),
            });
        }
        let (x, y) = (w[0], w[1]);
        let valley = y - x * x;
        let f = (x - 1.0).powi(2) + 100.0 * valley * valley;
        let g = ParamVector::new(vec![2.0 * (x - 1.0) - 400.0 * x * valley, 200.0 * valley])?;
        if !f.is_finite() {
            return Err(Error::non_finite("Rosenbrock value"));
        }
        Ok((f, g))
    }
}

impl Problem for RosenbrockProblem {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, w: &ParamVector) -> Result<f64> {
        Self::eval_grad(w).map(|(f, _)| f)
    }

    fn eval_grad(&mut self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        Self::eval_grad(w)
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn optimum_point(&self) -> Option<ParamVector> {
        Some(ParamVector::new(vec![1.0, 1.0]).unwrap())
    }
}

/// Online linear regression: `x` uniform per component on its range,
/// `y* = w*ᵀx + noise`. Deterministic given the seed.
#[derive(Debug, Clone)]
pub struct LmsStream {
    w_star: ParamVector,
    ranges: Vec<(f64, f64)>,
    noise_std: f64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl LmsStream {
    /// Inputs uniform on `[-1, 1]` per component.
    pub fn new(w_star: ParamVector, noise_std: f64, seed: u64) -> Result<Self> {
        let ranges = vec![(-1.0, 1.0); w_star.dim()];
        Self::with_ranges(w_star, ranges, noise_std, seed)
    }

    pub fn with_ranges(
        w_star: ParamVector,
        ranges: Vec<(f64, f64)>,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self> {
        if ranges.len() != w_star.dim() {
            return Err(Error::DimensionMismatch {
                expected: w_star.dim(),
                got: ranges.len(),
            });
        }
        if ranges.iter().any(|&(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite())) {
            return Err(Error::invalid("input range", "need finite lo < hi"));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::invalid("noise_std", "must be finite and non-negative"));
        }
        Ok(LmsStream {
            w_star,
            ranges,
            noise_std,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn w_star(&self) -> &ParamVector {
        &self.w_star
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws the next `(x, y*)`.
    pub fn next_pair(&mut self) -> (ParamVector, f64) {
        let x: Vec<f64> = self
            .ranges
            .iter()
            .map(|&(lo, hi)| self.rng.random_range(lo..hi))
            .collect();
        let x = ParamVector::new(x).expect("bounded inputs are finite");
        let noise = if self.noise_std > 0.0 {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            n * self.noise_std
        } else {
            0.0
        };
        let y = x.dot(&self.w_star).expect("same dimension") + noise;
        (x, y)
    }

    /// Expected excess squared loss `½ (w − w*)ᵀ E[xxᵀ] (w − w*)`.
    pub fn excess_loss(&self, w: &ParamVector) -> Result<f64> {
        let r = w.sub(&self.w_star)?;
        let means: Vec<f64> = self.ranges.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        let mean_term: f64 = r.iter().zip(&means).map(|(a, m)| a * m).sum();
        let var_term: f64 = r
            .iter()
            .zip(&self.ranges)
            .map(|(a, &(lo, hi))| a * a * (hi - lo).powi(2) / 12.0)
            .sum();
        Ok(0.5 * (mean_term * mean_term + var_term))
    }
}

impl Problem for LmsStream {
    fn dim(&self) -> usize {
        self.w_star.dim()
    }

    fn value(&self, w: &ParamVector) -> Result<f64> {
        self.excess_loss(w)
    }

    /// Stochastic gradient of `½ (y* − wᵀx)²` on a fresh sample.
    fn eval_grad(&mut self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        let f = self.excess_loss(w)?;
        let (x, y) = self.next_pair();
        let delta = y - w.dot(&x)?;
        Ok((f, x.scale(-delta)?))
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn optimum_point(&self) -> Option<ParamVector> {
        Some(self.w_star.clone())
    }

    fn next_sample(&mut self) -> Option<(ParamVector, f64)> {
        Some(self.next_pair())
    }
}

/// Eigenvalues log-uniformly spread between 1 and `max_condition`, endpoints
/// included, so the condition number is exactly `max_condition` for `d ≥ 2`.
pub fn log_spaced_spectrum(rng: &mut impl Rng, d: usize, max_condition: f64) -> Vec<f64> {
    let top = max_condition.ln();
    (0..d)
        .map(|i| match i {
            0 => 1.0,
            1 => max_condition,
            _ => (rng.random::<f64>() * top).exp(),
        })
        .collect()
}

/// `Q = Vᵀ diag(eigenvalues) V` with `V` orthogonal from the QR factorization
/// of a Gaussian matrix.
pub fn random_spd(rng: &mut impl Rng, eigenvalues: &[f64]) -> DMatrix<f64> {
    let d = eigenvalues.len();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let g = DMatrix::from_fn(d, d, |_, _| normal.sample(rng));
    let v = g.qr().q();
    let dm = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
    let q = v.transpose() * dm * &v;
    // symmetrize away rounding
    (&q + q.transpose()) * 0.5
}
