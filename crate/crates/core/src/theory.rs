//! Closed-form steady-state predictions for the l0-RLS filter under white input.
//!
//! Quantities, with `a = β(1−λ)α²/σx²`:
//!
//! * per-tap mean deviation limits for large, small and zero taps;
//! * `λ′ = √(λ² + 2λa + a²)`, which is exactly `λ + a`;
//! * `D_L`, `D_S`, `D_0` and their sum, the steady-state mean square deviation.
//!
//! `1 − λ′²` is never formed by subtraction. Since `λ′ = λ + a`,
//! `1 − λ′ = (1−λ)(1 − βα²/σx²)` and `1 − λ′² = (1 − λ′)(1 + λ′)`, which keeps
//! full relative precision as `λ → 1`. The same factorization shows that
//! `λ′ < 1` holds exactly when `βα² < σx²`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::filter::{attraction, FilterParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    pub sigma_x2: f64,
    pub sigma_v2: f64,
}

impl SignalModel {
    pub fn new(sigma_x2: f64, sigma_v2: f64) -> Result<Self> {
        ensure_finite("sigma_x2", sigma_x2)?;
        ensure_finite("sigma_v2", sigma_v2)?;
        if sigma_x2 <= 0.0 {
            return Err(invalid(format!("sigma_x2 must be positive, got {sigma_x2}")));
        }
        if sigma_v2 < 0.0 {
            return Err(invalid(format!("sigma_v2 must be nonnegative, got {sigma_v2}")));
        }
        Ok(Self { sigma_x2, sigma_v2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TapClass {
    Zero,
    Small,
    Large,
}

impl TapClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TapClass::Zero => "zero",
            TapClass::Small => "small",
            TapClass::Large => "large",
        }
    }
}

/// Partition of tap indices into exactly-zero, small (`0 < |w| < 1/α`) and
/// large (`|w| ≥ 1/α`) true taps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapPartition {
    pub zero: Vec<usize>,
    pub small: Vec<usize>,
    pub large: Vec<usize>,
}

impl TapPartition {
    pub fn len(&self) -> usize {
        self.zero.len() + self.small.len() + self.large.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_of(&self, k: usize) -> Option<TapClass> {
        if self.large.contains(&k) {
            Some(TapClass::Large)
        } else if self.small.contains(&k) {
            Some(TapClass::Small)
        } else if self.zero.contains(&k) {
            Some(TapClass::Zero)
        } else {
            None
        }
    }

    pub fn indices(&self, class: TapClass) -> &[usize] {
        match class {
            TapClass::Zero => &self.zero,
            TapClass::Small => &self.small,
            TapClass::Large => &self.large,
        }
    }
}

pub fn classify_taps(w0: &[f64], alpha: f64) -> Result<TapPartition> {
    ensure_finite("alpha", alpha)?;
    if alpha <= 0.0 {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let threshold = 1.0 / alpha;
    let mut p = TapPartition {
        zero: Vec::new(),
        small: Vec::new(),
        large: Vec::new(),
    };
    for (k, &w) in w0.iter().enumerate() {
        ensure_finite("w0 entry", w)?;
        if w == 0.0 {
            p.zero.push(k);
        } else if w.abs() < threshold {
            p.small.push(k);
        } else {
            p.large.push(k);
        }
    }
    Ok(p)
}

/// Gaussian moments of `g` used for the zero-tap analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceMoments {
    /// `E[w·g(w)]`
    pub cross_moment: f64,
    /// `E[g²(w)]`
    pub square_moment: f64,
}

/// Closed-form `E[w g(w)]` and `E[g²(w)]` for zero-mean Gaussian `w` with
/// second moment `m₂`, treating `g(w) = α²w − α·sgn(w)` on the whole line
/// (the `|w| > 1/α` truncation is ignored).
pub fn price_moments(second_moment: f64, alpha: f64) -> Result<PriceMoments> {
    ensure_finite("second_moment", second_moment)?;
    ensure_finite("alpha", alpha)?;
    if second_moment < 0.0 {
        return Err(invalid(format!("second moment must be nonnegative, got {second_moment}")));
    }
    if alpha <= 0.0 {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let c = (2.0 / PI).sqrt();
    let s = second_moment.sqrt();
    let a2 = alpha * alpha;
    let cross_moment = a2 * second_moment - c * alpha * s;
    // α²(α²m₂ + 1 − 2c·α√m₂) = α²[(α√m₂ − c)² + 1 − c²], nonnegative by construction
    let t = alpha * s - c;
    let square_moment = a2 * (t * t + (1.0 - c * c));
    Ok(PriceMoments {
        cross_moment,
        square_moment,
    })
}

/// `a = β(1−λ)α²/σx²`
fn attraction_gain(params: &FilterParams, model: &SignalModel) -> f64 {
    params.beta() * (1.0 - params.lambda()) * params.alpha().powi(2) / model.sigma_x2
}

pub fn lambda_prime(params: &FilterParams, model: &SignalModel) -> f64 {
    params.lambda() + attraction_gain(params, model)
}

/// `1 − λ′²` without cancellation; may be nonpositive for unstable parameters.
pub fn one_minus_lambda_prime_sq(params: &FilterParams, model: &SignalModel) -> f64 {
    let lambda = params.lambda();
    let ratio = params.beta() * params.alpha().powi(2) / model.sigma_x2;
    let one_minus = (1.0 - lambda) * (1.0 - ratio);
    one_minus * (1.0 + lambda_prime(params, model))
}

pub fn is_stable(params: &FilterParams, model: &SignalModel) -> bool {
    params.beta() * params.alpha().powi(2) < model.sigma_x2
}

fn check_stable(params: &FilterParams, model: &SignalModel) -> Result<()> {
    if is_stable(params, model) {
        Ok(())
    } else {
        Err(Error::Instability {
            beta_alpha2: params.beta() * params.alpha().powi(2),
            sigma_x2: model.sigma_x2,
            lambda_prime: lambda_prime(params, model),
        })
    }
}

fn check_partition(w0: &[f64], partition: &TapPartition) -> Result<()> {
    if partition.len() != w0.len() {
        return Err(invalid(format!(
            "partition covers {} taps, w0 has {}",
            partition.len(),
            w0.len()
        )));
    }
    Ok(())
}

/// Bound `αβ/(σx² − βα²)` on the magnitude of zero-tap mean deviations.
pub fn zero_tap_mean_bound(params: &FilterParams, model: &SignalModel) -> Result<f64> {
    check_stable(params, model)?;
    let (alpha, beta) = (params.alpha(), params.beta());
    Ok(alpha * beta / (model.sigma_x2 - beta * alpha * alpha))
}

/// Per-tap limit of `E[w_k(n) − w₀,k]`.
///
/// `sgn_estimate[k]` stands in for the limit of `E[sgn(w_k(n))]` and is only
/// read for zero taps.
pub fn mean_deviation_limit(
    w0: &[f64],
    partition: &TapPartition,
    params: &FilterParams,
    model: &SignalModel,
    sgn_estimate: &[f64],
) -> Result<Vec<f64>> {
    check_partition(w0, partition)?;
    if sgn_estimate.len() != w0.len() {
        return Err(invalid(format!(
            "sgn_estimate has {} entries, expected {}",
            sgn_estimate.len(),
            w0.len()
        )));
    }
    if let Some(s) = sgn_estimate.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
        return Err(invalid(format!("sgn_estimate entries must lie in [-1, 1], got {s}")));
    }
    check_stable(params, model)?;
    let (alpha, beta) = (params.alpha(), params.beta());
    let denom = model.sigma_x2 - beta * alpha * alpha;
    let mut out = vec![0.0; w0.len()];
    for &k in &partition.zero {
        // + 0.0 turns a -0.0 from a zero sign estimate into 0.0
        out[k] = -alpha * beta / denom * sgn_estimate[k] + 0.0;
    }
    for &k in &partition.small {
        out[k] = beta / denom * attraction(w0[k], alpha);
    }
    Ok(out)
}

/// `D_L = |Z_L|(1−λ)σv² / ((1+λ)σx²)`
pub fn msd_large(partition: &TapPartition, params: &FilterParams, model: &SignalModel) -> f64 {
    let lambda = params.lambda();
    partition.large.len() as f64 * per_tap_rls_msd(lambda, model)
}

/// Classical RLS steady-state deviation power of one tap.
pub fn per_tap_rls_msd(lambda: f64, model: &SignalModel) -> f64 {
    (1.0 - lambda) * model.sigma_v2 / ((1.0 + lambda) * model.sigma_x2)
}

pub fn g_s(w0: &[f64], partition: &TapPartition, alpha: f64) -> f64 {
    partition
        .small
        .iter()
        .map(|&k| attraction(w0[k], alpha).powi(2))
        .sum()
}

pub fn beta_prime(params: &FilterParams, model: &SignalModel) -> Result<f64> {
    check_stable(params, model)?;
    let (lambda, alpha, beta) = (params.lambda(), params.alpha(), params.beta());
    let sx2 = model.sigma_x2;
    let sx4 = sx2 * sx2;
    let gap = sx2 - beta * alpha * alpha;
    let b2 = beta * beta;
    let oml = 1.0 - lambda;
    Ok(2.0 * b2 * lambda * oml / (sx2 * gap)
        + b2 * oml * oml / sx4
        + 2.0 * b2 * beta * oml * oml * alpha * alpha / (sx4 * gap))
}

/// `D_S = |Z_S|(1−λ)²σv²/((1−λ′²)σx²) + β′G_s/(1−λ′²)`
pub fn msd_small(w0: &[f64], partition: &TapPartition, params: &FilterParams, model: &SignalModel) -> Result<f64> {
    check_partition(w0, partition)?;
    let bp = beta_prime(params, model)?;
    let denom = one_minus_lambda_prime_sq(params, model);
    let oml = 1.0 - params.lambda();
    let count = partition.small.len() as f64;
    Ok(count * oml * oml * model.sigma_v2 / (denom * model.sigma_x2)
        + bp * g_s(w0, partition, params.alpha()) / denom)
}

/// Zero-tap steady state: coefficients of `ω² + b_ω ω + c_ω = 0`, its
/// nonnegative root, and `D_0 = |Z₀| ω²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroTapMsd {
    pub b_omega: f64,
    pub c_omega: f64,
    pub omega: f64,
    pub d_zero: f64,
}

pub fn msd_zero(partition: &TapPartition, params: &FilterParams, model: &SignalModel) -> Result<ZeroTapMsd> {
    check_stable(params, model)?;
    let (lambda, alpha, beta) = (params.lambda(), params.alpha(), params.beta());
    let sx2 = model.sigma_x2;
    let denom = one_minus_lambda_prime_sq(params, model);
    let oml = 1.0 - lambda;

    let b_omega = 4.0 * alpha * beta * oml / ((2.0 * PI).sqrt() * denom * sx2)
        * (lambda + alpha * alpha * beta * oml / sx2);
    let c_omega = -(oml * oml / denom) * (alpha * alpha * beta * beta / (sx2 * sx2) + model.sigma_v2 / sx2);

    // (−b + √(b² − 4c))/2 rewritten as −2c/(b + √(b² − 4c)) to avoid cancellation when b² ≫ |c|
    let disc = (b_omega * b_omega - 4.0 * c_omega).sqrt();
    let omega = if c_omega == 0.0 {
        0.0
    } else {
        -2.0 * c_omega / (b_omega + disc)
    };
    Ok(ZeroTapMsd {
        b_omega,
        c_omega,
        omega,
        d_zero: partition.zero.len() as f64 * omega * omega,
    })
}

/// Quantities that only exist when `λ′ < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyPrediction {
    pub mean_dev: Vec<f64>,
    pub zero_tap_mean_bound: f64,
    pub beta_prime: f64,
    pub b_omega: f64,
    pub c_omega: f64,
    pub omega: f64,
    pub d_small: f64,
    pub d_zero: f64,
    pub d_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    pub n_taps: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub sigma_x2: f64,
    pub sigma_v2: f64,
    pub partition: TapPartition,
    pub stable: bool,
    pub lambda_prime: f64,
    pub g_s: f64,
    pub d_large: f64,
    #[serde(flatten)]
    pub steady: Option<SteadyPrediction>,
}

impl TheoryPrediction {
    pub fn steady(&self) -> Result<&SteadyPrediction> {
        self.steady.as_ref().ok_or(Error::Instability {
            beta_alpha2: self.beta * self.alpha * self.alpha,
            sigma_x2: self.sigma_x2,
            lambda_prime: self.lambda_prime,
        })
    }

    pub fn d_total(&self) -> Option<f64> {
        self.steady.as_ref().map(|s| s.d_total)
    }
}

/// Full prediction; fails with [`Error::Instability`] when `λ′ ≥ 1`.
pub fn msd_total(w0: &[f64], params: &FilterParams, model: &SignalModel) -> Result<TheoryPrediction> {
    let pred = predict(w0, params, model)?;
    pred.steady()?;
    Ok(pred)
}

/// Full prediction that reports instability through `stable = false` instead
/// of failing. Errors only on invalid input.
pub fn predict(w0: &[f64], params: &FilterParams, model: &SignalModel) -> Result<TheoryPrediction> {
    if w0.len() != params.num_taps() {
        return Err(invalid(format!(
            "w0 has {} taps, params expect {}",
            w0.len(),
            params.num_taps()
        )));
    }
    let partition = classify_taps(w0, params.alpha())?;
    let stable = is_stable(params, model);
    let steady = if stable {
        let mean_dev = mean_deviation_limit(w0, &partition, params, model, &vec![0.0; w0.len()])?;
        let d_small = msd_small(w0, &partition, params, model)?;
        let zero = msd_zero(&partition, params, model)?;
        let d_large = msd_large(&partition, params, model);
        Some(SteadyPrediction {
            mean_dev,
            zero_tap_mean_bound: zero_tap_mean_bound(params, model)?,
            beta_prime: beta_prime(params, model)?,
            b_omega: zero.b_omega,
            c_omega: zero.c_omega,
            omega: zero.omega,
            d_small,
            d_zero: zero.d_zero,
            d_total: d_large + d_small + zero.d_zero,
        })
    } else {
        None
    };
    Ok(TheoryPrediction {
        n_taps: w0.len(),
        lambda: params.lambda(),
        gamma: params.gamma(),
        beta: params.beta(),
        alpha: params.alpha(),
        sigma_x2: model.sigma_x2,
        sigma_v2: model.sigma_v2,
        g_s: g_s(w0, &partition, params.alpha()),
        d_large: msd_large(&partition, params, model),
        partition,
        stable,
        lambda_prime: lambda_prime(params, model),
        steady,
    })
}
