//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p l0rls --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use l0rls::report::{cmd_simulate, ConfigFile, Options, CURVE_FILE, ENSEMBLE_FILE, TAPS_FILE};
use l0rls::sim::{paired_bias, run_ensemble, run_single, Algorithm, ExperimentConfig, GaussianStream, SignalRng};
use l0rls::theory::{classify_taps, is_stable, msd_zero};
use l0rls::{gen_signals, g_scalar, init_state, predict, price_moments, rls_step, FilterParams, SignalModel};
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(name: &str) -> ExperimentConfig {
    ConfigFile::load(&config_path(name)).unwrap().build().unwrap()
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// 1. With γ = 0 the two recursions produce identical trajectories.
fn rls_reduction() -> Outcome {
    let mut cfg = config("headline.json");
    cfg.params = cfg.params.with_gamma(0.0).unwrap();
    cfg.iterations = 10_000;
    let a = run_single(&cfg.with_algorithm(Algorithm::L0rls), 0).unwrap();
    let b = run_single(&cfg.with_algorithm(Algorithm::Rls), 0).unwrap();
    check(a == b, format!("N=16, T=10^4, {} weight samples compared exactly", a.weights.len()))
}

/// 2. Classical RLS steady-state MSD.
fn classical_msd() -> Outcome {
    let cfg = config("classical_rls.json");
    let stats = run_ensemble(&cfg).unwrap();
    let theory = 16.0 * (1.0 - 0.99) * 0.01 / ((1.0 + 0.99) * 1.0);
    let r = rel(stats.steady_msd, theory);
    check(
        r <= 0.10,
        format!("empirical {:.5e} vs {theory:.5e}: rel err {:.2}% (tol 10%)", stats.steady_msd, 100.0 * r),
    )
}

/// 3. Steady-state MSD and its per-class split in the sparse headline experiment.
fn headline_msd() -> Outcome {
    let cfg = config("headline.json");
    let stats = run_ensemble(&cfg).unwrap();
    let pred = predict(&cfg.system.w0, &cfg.params, &cfg.model).unwrap();
    let s = pred.steady().unwrap();
    let c = &stats.steady_msd_by_class;
    let rows = [
        ("D_total", stats.steady_msd, s.d_total, 0.10),
        ("D_L", c.large, pred.d_large, 0.15),
        ("D_S", c.small, s.d_small, 0.25),
        ("D_0", c.zero, s.d_zero, 0.25),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, emp, th, tol) in rows {
        let r = rel(emp, th);
        ok &= r <= tol;
        parts.push(format!("{name} {emp:.4e}/{th:.4e} ({:.2}% <= {:.0}%)", 100.0 * r, 100.0 * tol));
    }
    check(ok, parts.join(", "))
}

/// 4. Mean-deviation limits per tap class.
fn mean_deviation() -> Outcome {
    let cfg = config("headline.json");
    let stats = run_ensemble(&cfg).unwrap();
    let pred = predict(&cfg.system.w0, &cfg.params, &cfg.model).unwrap();
    let steady = pred.steady().unwrap();
    let part = &cfg.system.partition;
    let mut ok = true;
    let mut parts = Vec::new();

    // (a) large taps unbiased
    let worst_large = part
        .large
        .iter()
        .map(|&k| stats.steady_tap_mean[k].abs() / stats.tap_mean_stderr[k])
        .fold(0.0, f64::max);
    ok &= worst_large <= 4.0;
    parts.push(format!("(a) max |mean|/SE over large taps {worst_large:.2} <= 4"));

    // (b) small-tap bias sign, estimated against RLS on identical signals
    let paired = paired_bias(&cfg).unwrap();
    for &k in &part.small {
        let expected = g_scalar(cfg.system.w0[k], cfg.params.alpha()).unwrap().signum();
        let (m, se) = (paired.mean[k], paired.stderr[k]);
        let tap_ok = m.signum() == expected && m.abs() > 4.0 * se;
        ok &= tap_ok;
        parts.push(format!(
            "(b) tap {k}: bias {m:+.3e} (SE {se:.1e}, theory {:+.3e}) sign {}",
            steady.mean_dev[k],
            if tap_ok { "matches" } else { "MISMATCH" }
        ));
    }

    // (c) zero taps inside the bound
    let bound = steady.zero_tap_mean_bound;
    let worst_zero = part
        .zero
        .iter()
        .map(|&k| stats.steady_tap_mean[k].abs() - (bound + 4.0 * stats.tap_mean_stderr[k]))
        .fold(f64::NEG_INFINITY, f64::max);
    ok &= worst_zero <= 0.0;
    parts.push(format!("(c) max |mean| − (bound {bound:.3e} + 4 SE) = {worst_zero:.3e} <= 0"));
    check(ok, parts.join("; "))
}

/// 5. Gaussian moment identities against Monte Carlo.
fn price_moment_oracle() -> Outcome {
    let alpha = 50.0;
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, frac) in [0.1, 0.2].into_iter().enumerate() {
        let sigma = frac / alpha;
        let mut gauss = GaussianStream::new(500 + i as u64, 0);
        let samples = 10_000_000;
        let (mut cross, mut square) = (0.0, 0.0);
        for _ in 0..samples {
            let w = sigma * gauss.next_standard();
            let g = g_scalar(w, alpha).unwrap();
            cross += w * g;
            square += g * g;
        }
        cross /= samples as f64;
        square /= samples as f64;
        let pm = price_moments(sigma * sigma, alpha).unwrap();
        let (rc, rs) = (rel(pm.cross_moment, cross), rel(pm.square_moment, square));
        ok &= rc <= 5e-3 && rs <= 5e-3;
        parts.push(format!(
            "sigma={frac}/alpha: cross {:.3}%, square {:.3}%",
            100.0 * rc,
            100.0 * rs
        ));
    }
    check(ok, format!("{} (tol 0.5%)", parts.join(", ")))
}

/// 6. The zero-tap quadratic has one nonnegative root, returned to full precision.
fn quadratic_root_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut u = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let log_uniform = |u: f64, lo: f64, hi: f64| (lo.ln() + u * (hi.ln() - lo.ln())).exp();
    let part = classify_taps(&[0.0; 4], 1.0).unwrap();
    let (mut points, mut worst_residual, mut failures) = (0, 0.0f64, 0);
    while points < 1000 {
        let lambda = 0.9 + 0.0999 * u();
        let gamma = log_uniform(u(), 1e-6, 1e-1);
        let alpha = 10.0 + 90.0 * u();
        let sigma_x2 = log_uniform(u(), 0.1, 10.0);
        let sigma_v2 = log_uniform(u(), 1e-6, 1.0);
        let params = FilterParams::new(4, lambda, gamma, alpha, 100.0).unwrap();
        let model = SignalModel::new(sigma_x2, sigma_v2).unwrap();
        if !is_stable(&params, &model) {
            continue;
        }
        points += 1;
        let z = msd_zero(&part, &params, &model).unwrap();
        let residual = (z.omega * z.omega + z.b_omega * z.omega + z.c_omega).abs();
        worst_residual = worst_residual.max(residual);
        if !(z.omega >= 0.0 && residual <= 1e-12 && z.b_omega > 0.0 && z.c_omega < 0.0) {
            failures += 1;
        }
    }
    check(
        failures == 0,
        format!("{points} stable points, {failures} violations, worst residual {worst_residual:.2e} (tol 1e-12)"),
    )
}

/// 7. The recursive P(n) equals the inverse of the weighted autocorrelation.
fn inversion_lemma() -> Outcome {
    let (n_taps, lambda, init) = (8, 0.98, 100.0);
    let params = FilterParams::new(n_taps, lambda, 0.0, 50.0, init).unwrap();
    let model = SignalModel::new(1.0, 0.01).unwrap();
    let w0 = [0.6, 0.0, -0.2, 0.0, 0.0, 0.05, 0.0, 0.0];
    let s = gen_signals(&model, &w0, 500, &mut SignalRng::new(7));
    let mut state = init_state(&params);
    let mut phi = DMatrix::<f64>::identity(n_taps, n_taps) / init;
    let mut x = vec![0.0; n_taps];
    let mut worst: f64 = 0.0;
    for n in 0..s.len() {
        s.regressor_into(n, &mut x);
        let xv = DVector::from_column_slice(&x);
        phi = phi * lambda + &xv * xv.transpose();
        state = rls_step(&state, &x, s.desired[n], &params).unwrap().0;
        if n >= 80 {
            let p = DMatrix::from_row_slice(n_taps, n_taps, state.inv_corr());
            let direct = phi.clone().try_inverse().unwrap();
            worst = worst.max((&p - &direct).norm() / direct.norm());
        }
    }
    check(worst <= 1e-6, format!("N=8, lambda=0.98, T=500: worst relative error {worst:.2e} for n >= 80 (tol 1e-6)"))
}

/// 8. Zero-point attraction lowers the steady-state MSD of a sparse system.
fn sparsity_benefit() -> Outcome {
    let cfg = config("headline.json");
    let l0 = run_ensemble(&cfg.with_algorithm(Algorithm::L0rls)).unwrap();
    let rls = run_ensemble(&cfg.with_algorithm(Algorithm::Rls)).unwrap();
    check(
        l0.steady_msd < rls.steady_msd,
        format!("l0-RLS {:.5e} < RLS {:.5e}", l0.steady_msd, rls.steady_msd),
    )
}

/// 9. Simulation outputs are byte-identical across repeats and thread counts.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs = [("a", 1), ("b", 1), ("c", 8)];
    for (name, threads) in runs {
        let mut opts = Options::new(config_path("headline.json"), dir.path().join(name));
        opts.threads = Some(threads);
        let outcome = cmd_simulate(&opts);
        if outcome.exit_code() != 0 {
            return Err(format!("simulate exited {}", outcome.exit_code()));
        }
    }
    let mut identical = true;
    for file in [CURVE_FILE, TAPS_FILE, ENSEMBLE_FILE] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        for other in ["b", "c"] {
            identical &= a == std::fs::read(dir.path().join(other).join(file)).unwrap();
        }
    }
    check(identical, "headline config: repeat and --threads 1 vs 8 outputs byte-identical".to_string())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 RLS reduction", rls_reduction),
        ("2 classical MSD", classical_msd),
        ("3 headline MSD", headline_msd),
        ("4 mean deviation", mean_deviation),
        ("5 Price moments", price_moment_oracle),
        ("6 quadratic root", quadratic_root_contract),
        ("7 inversion lemma", inversion_lemma),
        ("8 sparsity benefit", sparsity_benefit),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let start = Instant::now();
        let outcome = criterion();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name:<20} [{secs:6.2}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name:<20} [{secs:6.2}s] {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
