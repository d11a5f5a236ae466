//! Standard RLS and l0-regularized RLS recursions.
//!
//! Both filters share the gain and inverse-correlation update
//!
//! ```text
//! ε(n) = d(n) − wᵀ(n−1) x(n)
//! k(n) = P(n−1) x(n) / (λ + xᵀ(n) P(n−1) x(n))
//! P(n) = λ⁻¹ [P(n−1) − k(n) xᵀ(n) P(n−1)]
//! ```
//!
//! and differ only in the weight update. The l0 variant adds the
//! zero-point attraction term `β P(n) g(w(n−1))` with `β = γ(1−λ)`:
//!
//! ```text
//! w(n) = w(n−1) + k(n) ε(n) + β P(n) g(w(n−1))
//! ```

use serde::Serialize;

use crate::error::{ensure_finite, invalid, Error, Result};

/// Tunables of the recursion. `β` is always derived from `γ` and `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterParams {
    num_taps: usize,
    lambda: f64,
    gamma: f64,
    alpha: f64,
    init_scale: f64,
}

impl FilterParams {
    pub fn new(num_taps: usize, lambda: f64, gamma: f64, alpha: f64, init_scale: f64) -> Result<Self> {
        if num_taps == 0 {
            return Err(invalid("num_taps must be at least 1"));
        }
        for (name, v) in [("lambda", lambda), ("gamma", gamma), ("alpha", alpha), ("init_scale", init_scale)] {
            ensure_finite(name, v)?;
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        if gamma < 0.0 {
            return Err(invalid(format!("gamma must be nonnegative, got {gamma}")));
        }
        if alpha <= 0.0 {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        if init_scale <= 0.0 {
            return Err(invalid(format!("init_scale must be positive, got {init_scale}")));
        }
        Ok(Self {
            num_taps,
            lambda,
            gamma,
            alpha,
            init_scale,
        })
    }

    /// Same as [`FilterParams::new`] with `init_scale = 100 / σx²`.
    pub fn with_default_init(num_taps: usize, lambda: f64, gamma: f64, alpha: f64, sigma_x2: f64) -> Result<Self> {
        if !(sigma_x2 > 0.0 && sigma_x2.is_finite()) {
            return Err(invalid(format!("sigma_x2 must be positive, got {sigma_x2}")));
        }
        Self::new(num_taps, lambda, gamma, alpha, default_init_scale(sigma_x2))
    }

    pub fn num_taps(&self) -> usize {
        self.num_taps
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn init_scale(&self) -> f64 {
        self.init_scale
    }

    /// `β = γ(1−λ)`.
    pub fn beta(&self) -> f64 {
        self.gamma * (1.0 - self.lambda)
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.num_taps, self.lambda, gamma, self.alpha, self.init_scale)
    }
}

pub fn default_init_scale(sigma_x2: f64) -> f64 {
    100.0 / sigma_x2
}

/// Live filter: weights, inverse correlation matrix (row-major) and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    weights: Vec<f64>,
    inv_corr: Vec<f64>,
    iter: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub a_priori_error: f64,
    pub output: f64,
    pub gain: Vec<f64>,
}

impl FilterState {
    /// Builds a state from explicit parts. `inv_corr` is row-major `N×N`.
    pub fn from_parts(weights: Vec<f64>, inv_corr: Vec<f64>, iter: u64) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(invalid("state must have at least one tap"));
        }
        if inv_corr.len() != n * n {
            return Err(invalid(format!(
                "inv_corr has {} entries, expected {}",
                inv_corr.len(),
                n * n
            )));
        }
        Ok(Self { weights, inv_corr, iter })
    }

    pub fn num_taps(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major `P(n)`.
    pub fn inv_corr(&self) -> &[f64] {
        &self.inv_corr
    }

    pub fn inv_corr_at(&self, row: usize, col: usize) -> f64 {
        self.inv_corr[row * self.num_taps() + col]
    }

    pub fn iter(&self) -> u64 {
        self.iter
    }

    /// One plain RLS update in place.
    pub fn rls_update(&mut self, x: &[f64], d: f64, params: &FilterParams) -> Result<StepOutput> {
        self.update(x, d, params, 0.0)
    }

    /// One l0-RLS update in place.
    pub fn l0_rls_update(&mut self, x: &[f64], d: f64, params: &FilterParams) -> Result<StepOutput> {
        self.update(x, d, params, params.beta())
    }

    fn update(&mut self, x: &[f64], d: f64, params: &FilterParams, beta: f64) -> Result<StepOutput> {
        let n = self.num_taps();
        if x.len() != n {
            return Err(invalid(format!("regressor has length {}, expected {n}", x.len())));
        }
        if params.num_taps() != n {
            return Err(invalid(format!(
                "params are for {} taps, state has {n}",
                params.num_taps()
            )));
        }
        let lambda = params.lambda();

        let output = dot(&self.weights, x);
        let a_priori_error = d - output;

        // P(n−1) x(n)
        let px: Vec<f64> = self.inv_corr.chunks_exact(n).map(|row| dot(row, x)).collect();
        let denominator = lambda + dot(x, &px);
        // also catches NaN
        if denominator.is_nan() || denominator <= 0.0 {
            return Err(Error::Breakdown {
                iteration: self.iter,
                denominator,
            });
        }
        let gain: Vec<f64> = px.iter().map(|v| v / denominator).collect();

        // xᵀP(n−1) = (P(n−1)x)ᵀ by symmetry
        let inv_lambda = 1.0 / lambda;
        for (row, &k_i) in self.inv_corr.chunks_exact_mut(n).zip(&gain) {
            for (p, &px_j) in row.iter_mut().zip(&px) {
                *p = inv_lambda * (*p - k_i * px_j);
            }
        }
        symmetrize(&mut self.inv_corr, n);

        let attraction = if beta != 0.0 {
            let g = g_vector_unchecked(&self.weights, params.alpha());
            Some(
                self.inv_corr
                    .chunks_exact(n)
                    .map(|row| beta * dot(row, &g))
                    .collect::<Vec<f64>>(),
            )
        } else {
            None
        };

        for (w, k) in self.weights.iter_mut().zip(&gain) {
            *w += k * a_priori_error;
        }
        if let Some(a) = attraction {
            for (w, a) in self.weights.iter_mut().zip(a) {
                *w += a;
            }
        }
        self.iter += 1;

        Ok(StepOutput {
            a_priori_error,
            output,
            gain,
        })
    }
}

/// `w = 0`, `P = init_scale · I`, `n = 0`.
pub fn init_state(params: &FilterParams) -> FilterState {
    let n = params.num_taps();
    let mut inv_corr = vec![0.0; n * n];
    for i in 0..n {
        inv_corr[i * n + i] = params.init_scale();
    }
    FilterState {
        weights: vec![0.0; n],
        inv_corr,
        iter: 0,
    }
}

pub fn rls_step(state: &FilterState, x: &[f64], d: f64, params: &FilterParams) -> Result<(FilterState, StepOutput)> {
    let mut next = state.clone();
    let out = next.rls_update(x, d, params)?;
    Ok((next, out))
}

pub fn l0_rls_step(state: &FilterState, x: &[f64], d: f64, params: &FilterParams) -> Result<(FilterState, StepOutput)> {
    let mut next = state.clone();
    let out = next.l0_rls_update(x, d, params)?;
    Ok((next, out))
}

/// Zero-point attraction function `g(t)`:
/// `α²t − α·sgn(t)` for `|t| ≤ 1/α`, zero elsewhere, with `sgn(0) = 0`.
pub fn g_scalar(t: f64, alpha: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    check_alpha(alpha)?;
    Ok(attraction(t, alpha))
}

pub fn g_vector(w: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    w.iter().map(|&t| g_scalar(t, alpha)).collect()
}

/// `Σ (1 − exp(−α|wᵢ|))`, a smooth surrogate for the count of nonzero entries.
pub fn l0_norm_approx(w: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mut acc = 0.0;
    for &v in w {
        ensure_finite("weight", v)?;
        acc += -(-alpha * v.abs()).exp_m1();
    }
    Ok(acc)
}

/// Regularized cost `Σ_{m≤n} λ^{n−m} e²(m) + γ·l0_norm_approx(w)`. Diagnostic only.
pub fn l0_rls_cost(errors: &[f64], w: &[f64], params: &FilterParams, n: usize) -> Result<f64> {
    if errors.len() != n + 1 {
        return Err(invalid(format!(
            "error history has {} entries, expected n + 1 = {}",
            errors.len(),
            n + 1
        )));
    }
    let lambda = params.lambda();
    let weighted = errors.iter().fold(0.0, |acc, e| lambda * acc + e * e);
    Ok(weighted + params.gamma() * l0_norm_approx(w, params.alpha())?)
}

#[inline]
pub(crate) fn attraction(t: f64, alpha: f64) -> f64 {
    if t.abs() <= 1.0 / alpha {
        let sgn = if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            0.0
        };
        alpha * alpha * t - alpha * sgn
    } else {
        0.0
    }
}

fn g_vector_unchecked(w: &[f64], alpha: f64) -> Vec<f64> {
    w.iter().map(|&t| attraction(t, alpha)).collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    ensure_finite("alpha", alpha)?;
    if alpha <= 0.0 {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn symmetrize(m: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = avg;
            m[j * n + i] = avg;
        }
    }
}
