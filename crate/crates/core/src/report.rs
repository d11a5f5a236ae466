//! Configuration files, result files and the `predict` / `simulate` /
//! `verify` commands.
//!
//! Exit codes: 0 pass, 1 configuration or I/O error, 2 instability,
//! 3 numerical breakdown, 4 verification failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::filter::{default_init_scale, FilterParams};
use crate::sim::{
    compare, gen_system, run_ensemble_with_threads, system_rng, Algorithm, ComparisonReport, EnsembleStats,
    ExperimentConfig, SystemSpec, Tolerances,
};
use crate::theory::{predict, SignalModel, TheoryPrediction};

pub const PREDICTION_FILE: &str = "prediction.json";
pub const CURVE_FILE: &str = "learning_curve.csv";
pub const TAPS_FILE: &str = "taps.csv";
pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Instability(Error),
    #[error("simulation breakdown: {0}")]
    Breakdown(Error),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Instability(_) => 2,
            CliError::Breakdown(_) => 3,
            CliError::VerificationFailed(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(msg) => CliError::Config(msg),
            e @ Error::Instability { .. } => CliError::Instability(e),
            e @ (Error::Breakdown { .. } | Error::Run { .. }) => CliError::Breakdown(e),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// On-disk experiment description. One file fully determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_taps: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub sigma_x2: f64,
    pub sigma_v2: f64,
    pub iterations: usize,
    pub runs: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    #[serde(default = "default_window")]
    pub steady_window: f64,
    /// Initial `P = init_scale · I`; defaults to `100 / sigma_x2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
    pub system: SystemSpec,
}

fn default_window() -> f64 {
    0.2
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        Self::parse(&text, is_toml).map_err(|msg| CliError::Config(format!("{}: {msg}", path.display())))
    }

    pub fn parse(text: &str, is_toml: bool) -> Result<Self, String> {
        if is_toml {
            toml::from_str(text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(text).map_err(|e| e.to_string())
        }
    }

    pub fn build(&self) -> Result<ExperimentConfig, CliError> {
        let field = |name: &str, e: Error| CliError::Config(format!("field `{name}`: {e}"));
        let model = SignalModel::new(self.sigma_x2, self.sigma_v2).map_err(|e| field("sigma_x2/sigma_v2", e))?;
        let init = self.init_scale.unwrap_or_else(|| default_init_scale(self.sigma_x2));
        let params = FilterParams::new(self.n_taps, self.lambda, self.gamma, self.alpha, init)
            .map_err(|e| field("n_taps/lambda/gamma/alpha/init_scale", e))?;
        let system = gen_system(&self.system, self.alpha, &mut system_rng(self.seed)).map_err(|e| field("system", e))?;
        if system.num_taps() != self.n_taps {
            return Err(CliError::Config(format!(
                "field `system`: describes {} taps but n_taps = {}",
                system.num_taps(),
                self.n_taps
            )));
        }
        let config = ExperimentConfig {
            params,
            model,
            system,
            iterations: self.iterations,
            runs: self.runs,
            steady_window: self.steady_window,
            seed: self.seed,
            algorithm: self.algorithm,
        };
        config.validate().map_err(|e| field("iterations/runs/steady_window", e))?;
        Ok(config)
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Percent.
    pub tol_msd: f64,
    /// Percent.
    pub tol_mean: f64,
    pub seed: Option<u64>,
    /// Replaces `sigma_v2` in the theory side only (negative control).
    pub predict_sigma_v2: Option<f64>,
}

impl Options {
    pub fn new(config: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            config: config.into(),
            out: out.into(),
            threads: None,
            tol_msd: 10.0,
            tol_mean: 25.0,
            seed: None,
            predict_sigma_v2: None,
        }
    }

    fn threads(&self) -> usize {
        self.threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    fn tolerances(&self) -> Result<Tolerances, CliError> {
        for (name, v) in [("--tol-msd", self.tol_msd), ("--tol-mean", self.tol_mean)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!("{name} must be a nonnegative percentage, got {v}")));
            }
        }
        Ok(Tolerances {
            msd_rel: self.tol_msd / 100.0,
            mean_rel: self.tol_mean / 100.0,
            ..Tolerances::default()
        })
    }

    fn load(&self) -> Result<(ConfigFile, ExperimentConfig), CliError> {
        let mut file = ConfigFile::load(&self.config)?;
        if let Some(seed) = self.seed {
            file.seed = seed;
        }
        let config = file.build()?;
        Ok((file, config))
    }
}

/// Reproduction record written next to every command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_path: String,
    pub config: ConfigFile,
    pub seed: u64,
    pub threads: Option<usize>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<String>,
    pub exit_code: i32,
    pub summary: String,
}

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

struct Writer {
    out: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out).map_err(io_err(out))?;
        Ok(Self {
            out: out.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, &text)
    }

    fn manifest(
        mut self,
        command: &str,
        opts: &Options,
        file: &ConfigFile,
        started: f64,
        result: &Result<String, CliError>,
    ) -> Result<Vec<String>, CliError> {
        self.files.push(MANIFEST_FILE.to_string());
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: opts.config.display().to_string(),
            config: file.clone(),
            seed: file.seed,
            threads: opts.threads,
            started_unix: started,
            finished_unix: now_unix(),
            files: self.files.clone(),
            exit_code: result.as_ref().map_or_else(|e| e.exit_code(), |_| 0),
            summary: match result {
                Ok(s) => s.clone(),
                Err(e) => e.to_string(),
            },
        };
        let path = self.out.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(self.files)
    }
}

/// 17 significant digits, `.` decimal separator.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn learning_curve_csv(stats: &EnsembleStats) -> String {
    let mut s = String::from("iter,msd\n");
    for (n, v) in stats.msd_curve.iter().enumerate() {
        let _ = writeln!(s, "{n},{}", fmt_num(*v));
    }
    s
}

pub fn taps_csv(stats: &EnsembleStats) -> String {
    let mut s = String::from("tap,class,w0,mean_dev_emp,power_emp\n");
    for k in 0..stats.w0.len() {
        let class = stats.partition.class_of(k).map_or("unknown", |c| c.as_str());
        let _ = writeln!(
            s,
            "{k},{class},{},{},{}",
            fmt_num(stats.w0[k]),
            fmt_num(stats.steady_tap_mean[k]),
            fmt_num(stats.steady_tap_power[k])
        );
    }
    s
}

pub fn report_table(report: &ComparisonReport) -> String {
    let mut s = String::new();
    if !report.stable {
        s.push_str("prediction unstable (lambda' >= 1); no comparisons\n");
        return s;
    }
    let _ = writeln!(
        s,
        "{:<18} {:>24} {:>24} {:>24} {:>24} {:>24} {:>5} {:>6}",
        "quantity", "theory", "empirical", "abs_err", "rel_err", "allowed_abs", "pass", "gating"
    );
    for r in &report.rows {
        let rel = r.rel_err.map_or_else(|| "-".to_string(), |v| format!("{v:e}"));
        let _ = writeln!(
            s,
            "{:<18} {:>24} {:>24} {:>24} {:>24} {:>24} {:>5} {:>6}",
            r.name,
            format!("{:e}", r.theory),
            format!("{:e}", r.empirical),
            format!("{:e}", r.abs_err),
            rel,
            format!("{:e}", r.allowed_abs),
            if r.pass { "yes" } else { "NO" },
            if r.gating { "yes" } else { "no" }
        );
    }
    let _ = writeln!(s, "overall: {}", if report.all_pass { "PASS" } else { "FAIL" });
    s
}

fn prediction_for(config: &ExperimentConfig, opts: &Options) -> Result<(TheoryPrediction, SignalModel), CliError> {
    let model = match opts.predict_sigma_v2 {
        Some(v) => SignalModel::new(config.model.sigma_x2, v)
            .map_err(|e| CliError::Config(format!("--predict-sigma-v2: {e}")))?,
        None => config.model,
    };
    Ok((predict(&config.system.w0, &config.params, &model)?, model))
}

fn instability(pred: &TheoryPrediction) -> CliError {
    CliError::Instability(Error::Instability {
        beta_alpha2: pred.beta * pred.alpha * pred.alpha,
        sigma_x2: pred.sigma_x2,
        lambda_prime: pred.lambda_prime,
    })
}

fn simulate_into(w: &mut Writer, config: &ExperimentConfig, opts: &Options) -> Result<EnsembleStats, CliError> {
    let stats = run_ensemble_with_threads(config, opts.threads())?;
    w.write(CURVE_FILE, &learning_curve_csv(&stats))?;
    w.write(TAPS_FILE, &taps_csv(&stats))?;
    let text = serde_json::to_string(&stats).expect("serializable") + "\n";
    w.write(ENSEMBLE_FILE, &text)?;
    Ok(stats)
}

/// Outcome of a command: files written (relative to `out`) and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<String>,
    pub result: Result<String, CliError>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.result.as_ref().map_or_else(|e| e.exit_code(), |_| 0)
    }
}

fn finish(
    command: &str,
    opts: &Options,
    loaded: Result<(ConfigFile, ExperimentConfig), CliError>,
    body: impl FnOnce(&mut Writer, &ExperimentConfig) -> Result<String, CliError>,
) -> Outcome {
    let started = now_unix();
    let (file, config) = match loaded {
        Ok(v) => v,
        Err(e) => {
            return Outcome {
                files: Vec::new(),
                result: Err(e),
            }
        }
    };
    let mut writer = match Writer::new(&opts.out) {
        Ok(w) => w,
        Err(e) => {
            return Outcome {
                files: Vec::new(),
                result: Err(e),
            }
        }
    };
    let result = body(&mut writer, &config);
    match writer.manifest(command, opts, &file, started, &result) {
        Ok(files) => Outcome { files, result },
        Err(e) => Outcome {
            files: Vec::new(),
            result: Err(e),
        },
    }
}

/// Writes `prediction.json`; exit 2 (file still written) when unstable.
pub fn cmd_predict(opts: &Options) -> Outcome {
    finish("predict", opts, opts.load(), |w, config| {
        let (pred, _) = prediction_for(config, opts)?;
        w.json(PREDICTION_FILE, &pred)?;
        match pred.d_total() {
            Some(d) => Ok(format!("D_total = {d:e}")),
            None => Err(instability(&pred)),
        }
    })
}

/// Writes the learning curve, per-tap summary and ensemble statistics.
pub fn cmd_simulate(opts: &Options) -> Outcome {
    finish("simulate", opts, opts.load(), |w, config| {
        let stats = simulate_into(w, config, opts)?;
        Ok(format!(
            "steady_msd = {:e} (standard error {:e})",
            stats.steady_msd, stats.standard_error
        ))
    })
}

/// Predict, simulate and compare; exit 0 only if every gating row passes.
pub fn cmd_verify(opts: &Options) -> Outcome {
    let tolerances = opts.tolerances();
    let loaded = tolerances.as_ref().map_err(|e| CliError::Config(e.to_string())).and_then(|_| opts.load());
    finish("verify", opts, loaded, |w, config| {
        let tol = tolerances?;
        let (pred, model) = prediction_for(config, opts)?;
        w.json(PREDICTION_FILE, &pred)?;
        if !pred.stable {
            let report = ComparisonReport {
                stable: false,
                tolerances: tol,
                rows: Vec::new(),
                all_pass: false,
            };
            w.json(REPORT_JSON_FILE, &report)?;
            w.write(REPORT_TEXT_FILE, &report_table(&report))?;
            return Err(instability(&pred));
        }
        let stats = simulate_into(w, config, opts)?;
        let report = compare(&stats, &pred, &config.params, &model, &tol)?;
        let table = report_table(&report);
        print!("{table}");
        w.json(REPORT_JSON_FILE, &report)?;
        w.write(REPORT_TEXT_FILE, &table)?;
        if report.all_pass {
            Ok("all checks passed".to_string())
        } else {
            let failing: Vec<&str> = report.failing().map(|r| r.name.as_str()).collect();
            Err(CliError::VerificationFailed(failing.join(", ")))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADLINE: &str = r#"{
        "n_taps": 16, "lambda": 0.995, "gamma": 1e-4, "alpha": 50.0,
        "sigma_x2": 1.0, "sigma_v2": 1e-3, "iterations": 100, "runs": 2,
        "seed": 7, "algorithm": "l0rls",
        "system": {"large": 4, "small": 2, "zero": 10,
                   "ranges": {"large": [0.1, 1.0], "small": [0.0, 0.02]}}
    }"#;

    #[test]
    fn parses_json_and_defaults() {
        let f = ConfigFile::parse(HEADLINE, false).unwrap();
        assert_eq!(f.steady_window, 0.2);
        assert_eq!(f.init_scale, None);
        let cfg = f.build().unwrap();
        assert_eq!(cfg.params.init_scale(), 100.0);
        assert_eq!(cfg.system.partition.zero.len(), 10);
    }

    #[test]
    fn parses_toml() {
        let text = r#"
n_taps = 3
lambda = 0.99
gamma = 0.0
alpha = 50.0
sigma_x2 = 1.0
sigma_v2 = 0.01
iterations = 10
runs = 1
seed = 1
algorithm = "rls"

[system]
w0 = [0.5, 0.0, 0.01]
"#;
        let f = ConfigFile::parse(text, true).unwrap();
        let cfg = f.build().unwrap();
        assert_eq!(cfg.system.w0, vec![0.5, 0.0, 0.01]);
        assert_eq!(cfg.algorithm, Algorithm::Rls);
    }

    #[test]
    fn diagnostics_name_the_problem() {
        let err = ConfigFile::parse("{\n \"n_taps\": 4,\n \"lambda\": \"x\"\n}", false).unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        let err = ConfigFile::parse(&HEADLINE.replace("\"gamma\"", "\"gama\""), false).unwrap_err();
        assert!(err.contains("gama"), "{err}");

        let bad = ConfigFile::parse(&HEADLINE.replace("0.995", "1.5"), false).unwrap();
        match bad.build() {
            Err(CliError::Config(msg)) => assert!(msg.contains("lambda"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = ConfigFile::parse(&HEADLINE.replace("\"n_taps\": 16", "\"n_taps\": 15"), false).unwrap();
        assert!(matches!(bad.build(), Err(CliError::Config(_))));
    }

    #[test]
    fn csv_uses_seventeen_significant_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(8.0402e-4).parse::<f64>().unwrap(), 8.0402e-4);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 1);
        assert_eq!(CliError::from(Error::Breakdown { iteration: 1, denominator: -1.0 }).exit_code(), 3);
        assert_eq!(
            CliError::from(Error::Instability {
                beta_alpha2: 2.0,
                sigma_x2: 1.0,
                lambda_prime: 1.1
            })
            .exit_code(),
            2
        );
        assert_eq!(CliError::VerificationFailed(String::new()).exit_code(), 4);
    }
}
