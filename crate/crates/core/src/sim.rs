//! Seeded system-identification experiments and ensemble statistics.
//!
//! Randomness contract:
//!
//! * Every stream is a `ChaCha8Rng`. Seeds are mixed with SplitMix64.
//! * The true system is drawn from `splitmix64(seed ^ SYSTEM_SALT)`.
//! * Run `r` uses `splitmix64(seed + (r + 1)·0x9E3779B97F4A7C15)`. Its input
//!   samples come from ChaCha stream 0 and its noise from stream 1.
//! * Uniforms are `(next_u64() >> 11)·2⁻⁵³`. Gaussians use the Box–Muller
//!   transform on `u₁ = 1 − U`, `u₂ = U`, emitting the cosine variate first
//!   and then the cached sine variate.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::filter::{init_state, FilterParams};
use crate::theory::{classify_taps, mean_deviation_limit, SignalModel, TapClass, TapPartition, TheoryPrediction};

const SYSTEM_SALT: u64 = 0x5953_5445_4D5F_5730;
const RUN_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
/// Runs are simulated in fixed-size batches and folded in run order, so the
/// result does not depend on the thread count.
const RUN_BATCH: usize = 16;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_seed(seed: u64, run_index: usize) -> u64 {
    splitmix64(seed.wrapping_add((run_index as u64).wrapping_add(1).wrapping_mul(RUN_STRIDE)))
}

pub fn system_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ SYSTEM_SALT))
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variates from a ChaCha stream via Box–Muller.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = 1.0 - uniform(&mut self.rng);
        let u2 = uniform(&mut self.rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Independent input and noise streams for one run.
#[derive(Debug, Clone)]
pub struct SignalRng {
    input: GaussianStream,
    noise: GaussianStream,
}

impl SignalRng {
    pub fn new(seed: u64) -> Self {
        Self {
            input: GaussianStream::new(seed, 0),
            noise: GaussianStream::new(seed, 1),
        }
    }

    pub fn for_run(seed: u64, run_index: usize) -> Self {
        Self::new(run_seed(seed, run_index))
    }
}

/// Scalar input `x(n)` and desired response `d(n) = xᵀ(n)w₀ + v(n)`, where
/// `x(n) = [x(n), …, x(n−N+1)]` is zero-padded before time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Signals {
    pub input: Vec<f64>,
    pub desired: Vec<f64>,
}

impl Signals {
    /// Fills `out` with the length-`out.len()` regressor at time `n`.
    pub fn regressor_into(&self, n: usize, out: &mut [f64]) {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = if j <= n { self.input[n - j] } else { 0.0 };
        }
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }
}

pub fn gen_signals(model: &SignalModel, w0: &[f64], iterations: usize, rng: &mut SignalRng) -> Signals {
    let sx = model.sigma_x2.sqrt();
    let sv = model.sigma_v2.sqrt();
    let input: Vec<f64> = (0..iterations).map(|_| sx * rng.input.next_standard()).collect();
    let mut desired = Vec::with_capacity(iterations);
    for n in 0..iterations {
        let clean: f64 = w0
            .iter()
            .enumerate()
            .take(n + 1)
            .map(|(j, w)| w * input[n - j])
            .sum();
        desired.push(clean + sv * rng.noise.next_standard());
    }
    Signals { input, desired }
}

/// How the true impulse response is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Explicit {
        w0: Vec<f64>,
    },
    Generated {
        large: usize,
        small: usize,
        zero: usize,
        #[serde(default)]
        ranges: TapRanges,
    },
}

/// Magnitude ranges `[lo, hi]` for generated taps. Small taps must fit in `(0, 1/α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapRanges {
    pub large: [f64; 2],
    pub small: [f64; 2],
}

impl Default for TapRanges {
    fn default() -> Self {
        Self {
            large: [0.1, 1.0],
            small: [0.0, 0.02],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueSystem {
    pub w0: Vec<f64>,
    pub partition: TapPartition,
    pub spec: SystemSpec,
}

impl TrueSystem {
    pub fn num_taps(&self) -> usize {
        self.w0.len()
    }
}

/// Draws (or adopts) a true system. Tap positions are a uniform random
/// permutation, magnitudes are uniform within the class range and signs are
/// ±1 with equal probability.
pub fn gen_system(spec: &SystemSpec, alpha: f64, rng: &mut ChaCha8Rng) -> Result<TrueSystem> {
    let w0 = match spec {
        SystemSpec::Explicit { w0 } => w0.clone(),
        SystemSpec::Generated {
            large,
            small,
            zero,
            ranges,
        } => {
            let n = large + small + zero;
            if n == 0 {
                return Err(invalid("system must have at least one tap"));
            }
            let threshold = 1.0 / alpha;
            let [slo, shi] = ranges.small;
            if *small > 0 && !(slo >= 0.0 && slo < shi && shi <= threshold) {
                return Err(invalid(format!(
                    "small-tap range [{slo}, {shi}] must lie within (0, 1/alpha = {threshold})"
                )));
            }
            let [llo, lhi] = ranges.large;
            if *large > 0 && !(llo >= threshold && llo <= lhi && lhi.is_finite()) {
                return Err(invalid(format!(
                    "large-tap range [{llo}, {lhi}] must lie within [1/alpha = {threshold}, inf)"
                )));
            }

            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                order.swap(i, j);
            }
            let mut w0 = vec![0.0; n];
            for (slot, &k) in order.iter().enumerate() {
                let (lo, hi) = if slot < *large {
                    (llo, lhi)
                } else if slot < large + small {
                    (slo, shi)
                } else {
                    continue;
                };
                let mut mag = lo + (hi - lo) * uniform(rng);
                // open interval (0, 1/α) for small taps
                while slot >= *large && (mag <= 0.0 || mag >= threshold) {
                    mag = lo + (hi - lo) * uniform(rng);
                }
                let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
                w0[k] = sign * mag;
            }
            w0
        }
    };
    let partition = classify_taps(&w0, alpha)?;
    Ok(TrueSystem {
        w0,
        partition,
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rls,
    L0rls,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub params: FilterParams,
    pub model: SignalModel,
    pub system: TrueSystem,
    pub iterations: usize,
    pub runs: usize,
    pub steady_window: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        if self.runs == 0 {
            return Err(invalid("runs must be at least 1"));
        }
        if !(self.steady_window > 0.0 && self.steady_window <= 1.0) {
            return Err(invalid(format!(
                "steady_window must lie in (0, 1], got {}",
                self.steady_window
            )));
        }
        if self.system.num_taps() != self.params.num_taps() {
            return Err(invalid(format!(
                "system has {} taps, filter has {}",
                self.system.num_taps(),
                self.params.num_taps()
            )));
        }
        if self.system.partition != classify_taps(&self.system.w0, self.params.alpha())? {
            return Err(invalid("system partition is inconsistent with alpha"));
        }
        Ok(())
    }

    /// `(start, len)` of the steady-state window: the last `⌈steady_window·T⌉` iterations.
    pub fn window(&self) -> (usize, usize) {
        let len = ((self.steady_window * self.iterations as f64).ceil() as usize).clamp(1, self.iterations);
        (self.iterations - len, len)
    }

    pub fn with_algorithm(&self, algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..self.clone()
        }
    }
}

/// Weight trajectory of a single run, stored time-major (`T×N`).
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrajectory {
    pub num_taps: usize,
    pub weights: Vec<f64>,
}

impl RunTrajectory {
    pub fn len(&self) -> usize {
        self.weights.len() / self.num_taps
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights_at(&self, n: usize) -> &[f64] {
        &self.weights[n * self.num_taps..(n + 1) * self.num_taps]
    }

    /// `ŵ(n) = w(n) − w₀`
    pub fn deviation_at(&self, n: usize, w0: &[f64]) -> Vec<f64> {
        self.weights_at(n).iter().zip(w0).map(|(w, t)| w - t).collect()
    }

    pub fn msd_at(&self, n: usize, w0: &[f64]) -> f64 {
        self.weights_at(n)
            .iter()
            .zip(w0)
            .map(|(w, t)| (w - t) * (w - t))
            .sum()
    }
}

/// Runs the configured algorithm over explicit signals.
pub fn run_with_signals(config: &ExperimentConfig, signals: &Signals) -> Result<RunTrajectory> {
    let params = &config.params;
    let n_taps = params.num_taps();
    let mut state = init_state(params);
    let mut x = vec![0.0; n_taps];
    let mut weights = Vec::with_capacity(signals.len() * n_taps);
    for n in 0..signals.len() {
        signals.regressor_into(n, &mut x);
        let d = signals.desired[n];
        match config.algorithm {
            Algorithm::Rls => state.rls_update(&x, d, params)?,
            Algorithm::L0rls => state.l0_rls_update(&x, d, params)?,
        };
        weights.extend_from_slice(state.weights());
    }
    Ok(RunTrajectory {
        num_taps: n_taps,
        weights,
    })
}

pub fn run_single(config: &ExperimentConfig, run_index: usize) -> Result<RunTrajectory> {
    config.validate()?;
    run_unchecked(config, run_index)
}

fn run_unchecked(config: &ExperimentConfig, run_index: usize) -> Result<RunTrajectory> {
    let mut rng = SignalRng::for_run(config.seed, run_index);
    let signals = gen_signals(&config.model, &config.system.w0, config.iterations, &mut rng);
    run_with_signals(config, &signals).map_err(|e| Error::Run {
        run_index,
        source: Box::new(e),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMsd {
    pub large: f64,
    pub small: f64,
    pub zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub iterations: usize,
    pub runs: usize,
    pub window_start: usize,
    pub window_len: usize,
    pub partition: TapPartition,
    pub w0: Vec<f64>,
    /// Ensemble average of `‖ŵ(n)‖²`, length `T`.
    pub msd_curve: Vec<f64>,
    /// `E[ŵ_k(n)]`, indexed `[k][n]`.
    pub per_tap_mean: Vec<Vec<f64>>,
    /// `E[ŵ_k²(n)]`, indexed `[k][n]`.
    pub per_tap_power: Vec<Vec<f64>>,
    /// Window-and-ensemble average of `sgn(w_k(n))`.
    pub sign_mean: Vec<f64>,
    /// Window average of `per_tap_mean`.
    pub steady_tap_mean: Vec<f64>,
    /// Window average of `per_tap_power`.
    pub steady_tap_power: Vec<f64>,
    /// Run-to-run standard deviation of each tap's window-mean deviation, over `√M`.
    pub tap_mean_stderr: Vec<f64>,
    pub steady_msd: f64,
    pub steady_msd_by_class: ClassMsd,
    /// Run-to-run standard deviation of the window-mean MSD, over `√M`.
    pub standard_error: f64,
}

/// Accumulates per-run contributions in run-index order.
struct Accumulator {
    n_taps: usize,
    iterations: usize,
    window_start: usize,
    msd_sum: Vec<f64>,
    mean_sum: Vec<f64>,
    power_sum: Vec<f64>,
    sign_sum: Vec<f64>,
    run_msd: Vec<f64>,
    run_tap_mean: Vec<Vec<f64>>,
}

impl Accumulator {
    fn new(n_taps: usize, iterations: usize, window_start: usize) -> Self {
        Self {
            n_taps,
            iterations,
            window_start,
            msd_sum: vec![0.0; iterations],
            mean_sum: vec![0.0; iterations * n_taps],
            power_sum: vec![0.0; iterations * n_taps],
            sign_sum: vec![0.0; n_taps],
            run_msd: Vec::new(),
            run_tap_mean: Vec::new(),
        }
    }

    fn add(&mut self, run: &RunTrajectory, w0: &[f64]) {
        let n_taps = self.n_taps;
        let window_len = (self.iterations - self.window_start) as f64;
        let mut run_window_msd = 0.0;
        let mut run_window_mean = vec![0.0; n_taps];
        for n in 0..self.iterations {
            let w = run.weights_at(n);
            let mut msd = 0.0;
            for k in 0..n_taps {
                let dev = w[k] - w0[k];
                let p = dev * dev;
                msd += p;
                self.mean_sum[n * n_taps + k] += dev;
                self.power_sum[n * n_taps + k] += p;
                if n >= self.window_start {
                    run_window_mean[k] += dev;
                    self.sign_sum[k] += sgn(w[k]);
                }
            }
            self.msd_sum[n] += msd;
            if n >= self.window_start {
                run_window_msd += msd;
            }
        }
        self.run_msd.push(run_window_msd / window_len);
        for v in &mut run_window_mean {
            *v /= window_len;
        }
        self.run_tap_mean.push(run_window_mean);
    }

    fn finish(self, config: &ExperimentConfig) -> EnsembleStats {
        let m = self.run_msd.len() as f64;
        let (t, n_taps) = (self.iterations, self.n_taps);
        let window_len = t - self.window_start;
        let wl = window_len as f64;

        let msd_curve: Vec<f64> = self.msd_sum.iter().map(|v| v / m).collect();
        let per_tap_mean: Vec<Vec<f64>> = (0..n_taps)
            .map(|k| (0..t).map(|n| self.mean_sum[n * n_taps + k] / m).collect())
            .collect();
        let per_tap_power: Vec<Vec<f64>> = (0..n_taps)
            .map(|k| (0..t).map(|n| self.power_sum[n * n_taps + k] / m).collect())
            .collect();
        let window_avg = |series: &Vec<f64>| series[self.window_start..].iter().sum::<f64>() / wl;
        let steady_tap_mean: Vec<f64> = per_tap_mean.iter().map(window_avg).collect();
        let steady_tap_power: Vec<f64> = per_tap_power.iter().map(window_avg).collect();
        let steady_msd = window_avg(&msd_curve);

        let partition = config.system.partition.clone();
        let class_sum = |idx: &[usize]| idx.iter().map(|&k| steady_tap_power[k]).sum::<f64>();
        let steady_msd_by_class = ClassMsd {
            large: class_sum(&partition.large),
            small: class_sum(&partition.small),
            zero: class_sum(&partition.zero),
        };

        let standard_error = stderr(self.run_msd.iter().copied());
        let tap_mean_stderr = (0..n_taps)
            .map(|k| stderr(self.run_tap_mean.iter().map(|r| r[k])))
            .collect();

        EnsembleStats {
            iterations: t,
            runs: self.run_msd.len(),
            window_start: self.window_start,
            window_len,
            partition,
            w0: config.system.w0.clone(),
            msd_curve,
            per_tap_mean,
            per_tap_power,
            sign_mean: self.sign_sum.iter().map(|s| s / (m * wl)).collect(),
            steady_tap_mean,
            steady_tap_power,
            tap_mean_stderr,
            steady_msd,
            steady_msd_by_class,
            standard_error,
        }
    }
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sample standard deviation over `√M`; zero for a single sample.
fn stderr(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().count();
    if m < 2 {
        return 0.0;
    }
    let mf = m as f64;
    let mean = values.clone().sum::<f64>() / mf;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (mf - 1.0);
    (var / mf).sqrt()
}

/// Monte Carlo ensemble over `config.runs` independent runs, using the
/// ambient rayon pool when the `parallel` feature is enabled.
pub fn run_ensemble(config: &ExperimentConfig) -> Result<EnsembleStats> {
    config.validate()?;
    let (window_start, _) = config.window();
    let mut acc = Accumulator::new(config.params.num_taps(), config.iterations, window_start);
    let indices: Vec<usize> = (0..config.runs).collect();
    for batch in indices.chunks(RUN_BATCH) {
        for run in simulate_batch(config, batch)? {
            acc.add(&run, &config.system.w0);
        }
    }
    Ok(acc.finish(config))
}

/// Like [`run_ensemble`], on a dedicated pool of `threads` workers.
#[cfg(feature = "parallel")]
pub fn run_ensemble_with_threads(config: &ExperimentConfig, threads: usize) -> Result<EnsembleStats> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_ensemble(config))
}

#[cfg(feature = "parallel")]
fn simulate_batch(config: &ExperimentConfig, batch: &[usize]) -> Result<Vec<RunTrajectory>> {
    use rayon::prelude::*;
    batch.par_iter().map(|&r| run_unchecked(config, r)).collect()
}

#[cfg(not(feature = "parallel"))]
fn simulate_batch(config: &ExperimentConfig, batch: &[usize]) -> Result<Vec<RunTrajectory>> {
    batch.iter().map(|&r| run_unchecked(config, r)).collect()
}

/// Steady-window mean of `w_l0(n) − w_rls(n)` per tap, with both filters
/// driven by identical signals in every run.
///
/// Standard RLS is unbiased in steady state, so this estimates the l0-RLS
/// mean deviation `E[ŵ_k]` with far lower variance than the raw ensemble
/// mean (the shared noise cancels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedBias {
    pub runs: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

pub fn paired_bias(config: &ExperimentConfig) -> Result<PairedBias> {
    config.validate()?;
    let l0 = config.with_algorithm(Algorithm::L0rls);
    let rls = config.with_algorithm(Algorithm::Rls);
    let n_taps = config.params.num_taps();
    let (start, len) = config.window();
    let per_run = |r: usize| -> Result<Vec<f64>> {
        let mut rng = SignalRng::for_run(config.seed, r);
        let signals = gen_signals(&config.model, &config.system.w0, config.iterations, &mut rng);
        let wrap = |e| Error::Run {
            run_index: r,
            source: Box::new(e),
        };
        let a = run_with_signals(&l0, &signals).map_err(wrap)?;
        let b = run_with_signals(&rls, &signals).map_err(wrap)?;
        let mut acc = vec![0.0; n_taps];
        for n in start..config.iterations {
            for ((slot, wa), wb) in acc.iter_mut().zip(a.weights_at(n)).zip(b.weights_at(n)) {
                *slot += wa - wb;
            }
        }
        Ok(acc.into_iter().map(|v| v / len as f64).collect())
    };

    let indices: Vec<usize> = (0..config.runs).collect();
    let mut diffs: Vec<Vec<f64>> = Vec::with_capacity(config.runs);
    for batch in indices.chunks(RUN_BATCH) {
        #[cfg(feature = "parallel")]
        let out: Result<Vec<Vec<f64>>> = {
            use rayon::prelude::*;
            batch.par_iter().map(|&r| per_run(r)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let out: Result<Vec<Vec<f64>>> = batch.iter().map(|&r| per_run(r)).collect();
        diffs.extend(out?);
    }
    let m = config.runs as f64;
    Ok(PairedBias {
        runs: config.runs,
        mean: (0..n_taps).map(|k| diffs.iter().map(|d| d[k]).sum::<f64>() / m).collect(),
        stderr: (0..n_taps).map(|k| stderr(diffs.iter().map(|d| d[k]))).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative tolerance on `D_total`.
    pub msd_rel: f64,
    /// Relative tolerance on `D_L`.
    pub large_rel: f64,
    /// Relative tolerance on `D_S` and `D_0` (reported, not gating).
    pub class_rel: f64,
    /// Relative slack on per-tap steady means, added to the standard-error band.
    pub mean_rel: f64,
    /// Width of the standard-error band on per-tap steady means.
    pub mean_se: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            msd_rel: 0.10,
            large_rel: 0.15,
            class_rel: 0.25,
            mean_rel: 0.25,
            mean_se: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub theory: f64,
    pub empirical: f64,
    pub abs_err: f64,
    /// `abs_err / |theory|`; absent when the theory value is zero and the error is not.
    pub rel_err: Option<f64>,
    /// Largest absolute error that passes.
    pub allowed_abs: f64,
    pub pass: bool,
    /// Whether the row counts toward the overall verdict.
    pub gating: bool,
}

impl ComparisonRow {
    fn new(name: impl Into<String>, theory: f64, empirical: f64, allowed_abs: f64, gating: bool) -> Self {
        let abs_err = (empirical - theory).abs();
        let rel_err = if theory != 0.0 {
            Some(abs_err / theory.abs())
        } else if abs_err == 0.0 {
            Some(0.0)
        } else {
            None
        };
        Self {
            name: name.into(),
            theory,
            empirical,
            abs_err,
            rel_err,
            allowed_abs,
            pass: abs_err <= allowed_abs,
            gating,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub stable: bool,
    pub tolerances: Tolerances,
    pub rows: Vec<ComparisonRow>,
    pub all_pass: bool,
}

impl ComparisonReport {
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn failing(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(|r| r.gating && !r.pass)
    }
}

/// Compares ensemble statistics against a prediction.
///
/// Zero-tap mean predictions are recomputed with the measured `sign_mean`
/// standing in for the limit of `E[sgn(w_k(n))]`.
pub fn compare(
    stats: &EnsembleStats,
    prediction: &TheoryPrediction,
    params: &FilterParams,
    model: &SignalModel,
    tol: &Tolerances,
) -> Result<ComparisonReport> {
    let n = prediction.n_taps;
    if stats.w0.len() != n || stats.steady_tap_mean.len() != n || params.num_taps() != n {
        return Err(invalid(format!(
            "dimension mismatch: stats have {} taps, prediction {n}, params {}",
            stats.w0.len(),
            params.num_taps()
        )));
    }
    if stats.partition != prediction.partition {
        return Err(invalid("stats and prediction use different tap partitions"));
    }
    let Some(steady) = prediction.steady.as_ref() else {
        return Ok(ComparisonReport {
            stable: false,
            tolerances: *tol,
            rows: Vec::new(),
            all_pass: false,
        });
    };

    let mut rows = vec![
        ComparisonRow::new("D_total", steady.d_total, stats.steady_msd, tol.msd_rel * steady.d_total, true),
        ComparisonRow::new(
            "D_L",
            prediction.d_large,
            stats.steady_msd_by_class.large,
            tol.large_rel * prediction.d_large,
            true,
        ),
        ComparisonRow::new(
            "D_S",
            steady.d_small,
            stats.steady_msd_by_class.small,
            tol.class_rel * steady.d_small,
            false,
        ),
        ComparisonRow::new(
            "D_0",
            steady.d_zero,
            stats.steady_msd_by_class.zero,
            tol.class_rel * steady.d_zero,
            false,
        ),
    ];

    let sgn_estimate: Vec<f64> = stats.sign_mean.iter().map(|s| s.clamp(-1.0, 1.0)).collect();
    let mean_dev = mean_deviation_limit(&stats.w0, &stats.partition, params, model, &sgn_estimate)?;
    for (k, &theory) in mean_dev.iter().enumerate() {
        let class = stats.partition.class_of(k).unwrap_or(TapClass::Large);
        let allowed = tol.mean_se * stats.tap_mean_stderr[k] + tol.mean_rel * theory.abs();
        rows.push(ComparisonRow::new(
            format!("mean[{k}] ({})", class.as_str()),
            theory,
            stats.steady_tap_mean[k],
            allowed,
            true,
        ));
    }

    let all_pass = rows.iter().filter(|r| r.gating).all(|r| r.pass);
    Ok(ComparisonReport {
        stable: true,
        tolerances: *tol,
        rows,
        all_pass,
    })
}
