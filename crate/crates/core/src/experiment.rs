//! Experiment configuration and the subcommands behind the `onefifth` binary.
//!
//! A configuration is a flat `key = value` file plus `key=value` overrides.
//! Every command computes all of its artifacts in memory first; nothing is
//! written unless the whole command succeeded, and then a single writer
//! emits the files and a `manifest.json` with their SHA-256 digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::chain::{default_burn_in, run_chain_with, ChainOptions};
use crate::drift::{drift_scan, linear_increase_condition};
use crate::error::{Error, Result};
use crate::es::{run_trajectory_with, AlgoParams, RunOptions};
use crate::estimators::{
    clt_check, clt_check_iid, estimate_bundle, geometric_approach_curve_from_starts, BundleSetup,
    CltSetup,
};
use crate::numfmt::{fmt17, parse_list, parse_real};
use crate::objective::{
    builtin_catalog, check_euler, check_homogeneity, check_positivity, estimate_sphere_bounds,
    CheckReport, ObjectiveFunction, SphereBounds,
};
use crate::rng::{random_on_sphere, stream_rng, AUX_STREAM_BASE};

pub const RNG_RULE: &str = "ChaCha8Rng::seed_from_u64(seed); replicate i draws its noise from stream i \
and its random initial point from stream 2^40 + i; calibration chains, stationary pre-runs, scan \
directions, drift cells and CLT jitter use streams 2*2^40, 3*2^40 + i, 4*2^40, 5*2^40 + i and 6*2^40";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum X0Spec {
    /// `x* + r·u` with `u` uniform on the unit sphere.
    RandomSphere(f64),
    Explicit(Vec<f64>),
}

impl X0Spec {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().strip_prefix("random_sphere:") {
            Some(r) => parse_real(r)
                .filter(|r| *r > 0.0 && r.is_finite())
                .map(X0Spec::RandomSphere),
            None => parse_list(s).map(X0Spec::Explicit),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub function: String,
    pub n: usize,
    pub gamma: f64,
    pub q: f64,
    pub x0: X0Spec,
    pub sigma0: f64,
    pub steps: u64,
    pub replicates: usize,
    pub burn_in: Option<usize>,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub stride: usize,
    pub chain_steps: usize,
    pub radii: Vec<f64>,
    pub samples: usize,
    pub calibration_steps: usize,
    pub warm_up: usize,
    pub iid: bool,
    pub iid_ps: Option<f64>,
    pub trials: usize,
    pub euler_points: usize,
    pub bounds_samples: usize,
    pub full_state: bool,
    pub allow_divergent: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            function: "sphere".into(),
            n: 20,
            gamma: (1.0f64 / 3.0).exp(),
            q: 4.0,
            x0: X0Spec::RandomSphere(1.0),
            sigma0: 1.0,
            steps: 20_000,
            replicates: 1,
            burn_in: None,
            seed: 1,
            outputs: vec!["trajectory".into()],
            stride: 1,
            chain_steps: 1_000_000,
            radii: vec![1e-3, 1e-1, 1e1, 1e3],
            samples: 10_000,
            calibration_steps: 1_000_000,
            warm_up: CltSetup::DEFAULT_WARM_UP,
            iid: false,
            iid_ps: None,
            trials: 10_000,
            euler_points: 1000,
            bounds_samples: 100_000,
            full_state: false,
            allow_divergent: false,
        }
    }
}

pub const KNOWN_OUTPUTS: [&str; 3] = ["trajectory", "chain", "curve"];

/// One `key = value` entry and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub location: String,
}

/// Parses a config file body. Blank lines and lines starting with `#` are
/// skipped; a key may appear only once.
pub fn parse_config_text(text: &str, origin: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let location = format!("{origin}:{}", i + 1);
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                location,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim().to_string();
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(Error::config(
                location,
                format!("duplicate key `{key}` (first set at {})", prev.location),
            ));
        }
        entries.push(Entry {
            key,
            value: value.trim().to_string(),
            location,
        });
    }
    Ok(entries)
}

/// Parses a command-line `key=value` override.
pub fn parse_override(arg: &str) -> Result<Entry> {
    let location = format!("override `{arg}`");
    let Some((key, value)) = arg.split_once('=') else {
        return Err(Error::config(location, "expected key=value"));
    };
    Ok(Entry {
        key: key.trim().to_string(),
        value: value.trim().to_string(),
        location,
    })
}

fn bad(e: &Entry, what: &str) -> Error {
    Error::config(
        &e.location,
        format!("`{}`: expected {what}, got `{}`", e.key, e.value),
    )
}

fn real(e: &Entry) -> Result<f64> {
    parse_real(&e.value).ok_or_else(|| bad(e, "a real number"))
}

fn count(e: &Entry) -> Result<u64> {
    if let Ok(v) = e.value.parse::<u64>() {
        return Ok(v);
    }
    // 1e6 style counts
    match parse_real(&e.value) {
        Some(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(bad(e, "a non-negative integer")),
    }
}

fn flag(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(e, "true or false")),
    }
}

impl ExperimentConfig {
    /// Applies entries in order over the defaults, later entries winning,
    /// then validates the result.
    pub fn from_entries(entries: &[Entry]) -> Result<Self> {
        let mut c = Self::default();
        let mut located: BTreeMap<&str, &Entry> = BTreeMap::new();
        for e in entries {
            match e.key.as_str() {
                "function" => c.function = e.value.clone(),
                "n" => c.n = count(e)? as usize,
                "gamma" => c.gamma = real(e)?,
                "q" => c.q = real(e)?,
                "x0" => {
                    c.x0 = X0Spec::parse(&e.value)
                        .ok_or_else(|| bad(e, "random_sphere:r or a list"))?
                }
                "sigma0" => c.sigma0 = real(e)?,
                "steps" => c.steps = count(e)?,
                "replicates" => c.replicates = count(e)? as usize,
                "burn_in" => c.burn_in = Some(count(e)? as usize),
                "seed" => c.seed = count(e)?,
                "outputs" => {
                    c.outputs = e
                        .value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    if let Some(o) = c
                        .outputs
                        .iter()
                        .find(|o| !KNOWN_OUTPUTS.contains(&o.as_str()))
                    {
                        return Err(Error::config(
                            &e.location,
                            format!("unknown output `{o}`, known: {}", KNOWN_OUTPUTS.join(", ")),
                        ));
                    }
                }
                "stride" => c.stride = count(e)? as usize,
                "chain_steps" => c.chain_steps = count(e)? as usize,
                "radii" => {
                    if e.value.trim().is_empty() {
                        return Err(Error::config(&e.location, "empty radii list"));
                    }
                    c.radii = parse_list(&e.value)
                        .ok_or_else(|| bad(e, "a comma-separated list of radii"))?;
                }
                "samples" => c.samples = count(e)? as usize,
                "calibration_steps" => c.calibration_steps = count(e)? as usize,
                "warm_up" => c.warm_up = count(e)? as usize,
                "iid" => c.iid = flag(e)?,
                "iid_ps" => c.iid_ps = Some(real(e)?),
                "trials" => c.trials = count(e)? as usize,
                "euler_points" => c.euler_points = count(e)? as usize,
                "bounds_samples" => c.bounds_samples = count(e)? as usize,
                "full_state" => c.full_state = flag(e)?,
                "allow_divergent" => c.allow_divergent = flag(e)?,
                _ => {
                    return Err(Error::config(
                        &e.location,
                        format!("unknown key `{}`", e.key),
                    ))
                }
            }
            located.insert(e.key.as_str(), e);
        }
        let at = |key: &str| {
            located
                .get(key)
                .map_or_else(|| format!("default {key}"), |e| e.location.clone())
        };

        if c.n == 0 {
            return Err(Error::config(at("n"), "dimension must be at least 1"));
        }
        if c.function != "catalog" {
            ObjectiveFunction::from_key(&c.function, c.n)
                .map_err(|e| relocate(e, &at("function")))?;
        }
        AlgoParams::with_divergent(c.n, c.gamma, c.q, c.allow_divergent).map_err(|e| {
            let key = if c.gamma > 1.0 || c.allow_divergent {
                "q"
            } else {
                "gamma"
            };
            let hint = if key == "gamma" {
                "; pass --allow-divergent to study γ ≤ 1"
            } else {
                ""
            };
            Error::config(at(key), format!("{e}{hint}"))
        })?;
        if !(c.sigma0 > 0.0) || !c.sigma0.is_finite() {
            return Err(Error::config(
                at("sigma0"),
                "sigma0 must be positive and finite",
            ));
        }
        if let X0Spec::Explicit(v) = &c.x0 {
            if v.len() != c.n {
                return Err(Error::config(
                    at("x0"),
                    format!("x0 has {} entries, n = {}", v.len(), c.n),
                ));
            }
        }
        if c.stride == 0 {
            return Err(Error::config(at("stride"), "stride must be at least 1"));
        }
        if let Some(r) = c.radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::config(
                at("radii"),
                format!("radius {r} is not positive and finite"),
            ));
        }
        if let Some(p) = c.iid_ps {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(at("iid_ps"), "iid_ps must lie in [0, 1]"));
            }
        }
        Ok(c)
    }

    pub fn params(&self) -> Result<AlgoParams> {
        AlgoParams::with_divergent(self.n, self.gamma, self.q, self.allow_divergent)
    }

    pub fn objective(&self) -> Result<ObjectiveFunction> {
        ObjectiveFunction::from_key(&self.function, self.n)
    }

    /// Initial point of replicate `i`.
    pub fn initial_point(&self, f: &ObjectiveFunction, i: usize) -> Vec<f64> {
        match &self.x0 {
            X0Spec::Explicit(v) => v.clone(),
            X0Spec::RandomSphere(r) => {
                let mut rng = stream_rng(self.seed, AUX_STREAM_BASE + i as u64);
                let u = random_on_sphere(&mut rng, self.n, *r);
                u.iter().zip(f.optimum()).map(|(a, b)| a + b).collect()
            }
        }
    }
}

fn relocate(e: Error, location: &str) -> Error {
    match e {
        Error::Config { message, .. } => Error::config(location, message),
        other => Error::config(location, other.to_string()),
    }
}

/// Files produced by a command, in emission order.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

impl Artifacts {
    fn push(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn push_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.push(name, bytes);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Run,
    Estimate,
    Drift,
    Clt,
    ValidateFn,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Estimate => "estimate",
            Command::Drift => "drift",
            Command::Clt => "clt",
            Command::ValidateFn => "validate-fn",
        }
    }
}

pub fn execute(command: &Command, config: &ExperimentConfig) -> Result<Artifacts> {
    match command {
        Command::Run => cmd_run(config),
        Command::Estimate => cmd_estimate(config),
        Command::Drift => cmd_drift(config),
        Command::Clt => cmd_clt(config),
        Command::ValidateFn => cmd_validate_fn(config),
    }
}

fn require_function(config: &ExperimentConfig) -> Result<ObjectiveFunction> {
    if config.function == "catalog" {
        return Err(Error::config(
            "function",
            "`catalog` is only valid for validate-fn",
        ));
    }
    config.objective()
}

pub fn cmd_run(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params()?;
    let f = require_function(config)?;
    let mut out = Artifacts::default();
    let wants = |name: &str| config.outputs.iter().any(|o| o == name);

    let starts: Vec<Vec<f64>> = (0..config.replicates)
        .map(|i| config.initial_point(&f, i))
        .collect();
    let results = starts
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let options = RunOptions {
                stream: i as u64,
                stride: config.stride,
            };
            let traj = run_trajectory_with(
                &params,
                &f,
                x0,
                config.sigma0,
                config.steps,
                config.seed,
                options,
            )
            .map_err(|e| e.in_replicate(i as u64))?;
            let mut files = Vec::new();
            if wants("trajectory") {
                let mut csv = Vec::new();
                traj.write_run_csv(&mut csv)?;
                files.push((format!("trajectory_{i:04}.csv"), csv));
            }
            if config.full_state {
                let mut json = serde_json::to_vec_pretty(&traj)?;
                json.push(b'\n');
                files.push((format!("state_{i:04}.json"), json));
            }
            if wants("chain") {
                let steps = config.steps as usize;
                let burn_in = config.burn_in.unwrap_or_else(|| default_burn_in(steps));
                let z0: Vec<f64> = f.centered(x0).iter().map(|v| v / config.sigma0).collect();
                let options = ChainOptions {
                    stream: i as u64,
                    keep_states: false,
                };
                let rec =
                    run_chain_with(&params, f.core(), &z0, steps, config.seed, burn_in, options)
                        .map_err(|e| e.in_replicate(i as u64))?;
                let mut csv = Vec::new();
                rec.write_csv(&mut csv)?;
                files.push((format!("chain_{i:04}.csv"), csv));
            }
            let last = traj.records.last().expect("initial record");
            let line = format!(
                "replicate {i}: {:?} after t={}, log10 distance {:.4}, log10 sigma {:.4}",
                traj.status,
                last.t,
                traj.ln_distance_series().last().expect("initial record").1
                    / std::f64::consts::LN_10,
                last.log_sigma / std::f64::consts::LN_10
            );
            Ok((files, line))
        })
        .collect::<Result<Vec<_>>>()?;
    for (files, line) in results {
        out.files.extend(files);
        out.summary.push(line);
    }

    if wants("curve") && !starts.is_empty() {
        let z0s: Vec<Vec<f64>> = starts
            .iter()
            .map(|x| f.centered(x).iter().map(|v| v / config.sigma0).collect())
            .collect();
        let curve = geometric_approach_curve_from_starts(
            &params,
            f.core(),
            &z0s,
            config.steps as usize,
            config.seed,
        )?;
        let mut csv = String::from("t,mean_ln_sigma_ratio,stderr\n");
        for p in &curve {
            csv.push_str(&format!(
                "{},{},{}\n",
                p.t,
                fmt17(p.mean),
                fmt17(p.std_error)
            ));
        }
        out.push("approach_curve.csv", csv.into_bytes());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleChecks {
    /// `|cr_timeavg − cr_from_ps|`, zero up to rounding.
    pub identity_residual: f64,
    pub identity_holds: bool,
    /// `|cr_f_ratio − cr_timeavg|` in combined standard errors.
    pub f_ratio_z: Option<f64>,
    pub f_ratio_consistent: Option<bool>,
    /// `|slope_x − slope_sigma| / |slope_sigma|`.
    pub slopes_relative_difference: Option<f64>,
    pub slopes_agree: Option<bool>,
    /// `(1/(q+1) − ps)` in standard errors.
    pub ps_margin: f64,
    pub ps_below_target: bool,
    pub linear_increase_condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct BundleFile<'a> {
    function: String,
    params: AlgoParams,
    x0: Vec<f64>,
    sigma0: f64,
    trajectory_steps: u64,
    chain_steps: usize,
    chain_burn_in: usize,
    #[serde(flatten)]
    report: &'a crate::estimators::BundleReport,
    checks: BundleChecks,
}

pub fn cmd_estimate(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params()?;
    let f = require_function(config)?;
    let x0 = config.initial_point(&f, 0);
    let setup = BundleSetup {
        trajectory_steps: config.steps,
        chain_steps: config.chain_steps,
        chain_burn_in: config.burn_in,
        seed: config.seed,
    };
    let report = estimate_bundle(&params, &f, &x0, config.sigma0, &setup)?;
    let b = &report.bundle;
    let identity_residual = (b.cr_timeavg.value - b.cr_from_ps).abs();
    let f_ratio_z = b.cr_f_ratio.as_ref().map(|e| e.z_score(&b.cr_timeavg));
    let slopes_relative_difference = match (&b.slope_x, &b.slope_sigma) {
        (Some(x), Some(s)) => Some((x.value - s.value).abs() / s.value.abs()),
        _ => None,
    };
    let ps_margin = (params.target_success() - b.ps.value) / b.ps.std_error;
    let checks = BundleChecks {
        identity_residual,
        identity_holds: identity_residual <= 1e-14,
        f_ratio_z,
        f_ratio_consistent: f_ratio_z.map(|z| z <= 3.0),
        slopes_relative_difference,
        slopes_agree: slopes_relative_difference.map(|d| d <= 0.1),
        ps_margin,
        ps_below_target: ps_margin > 3.0,
        linear_increase_condition: linear_increase_condition(
            params.gamma,
            params.q,
            f.core().degree(),
        ),
    };
    let mut out = Artifacts::default();
    out.summary.push(format!(
        "ps {:.6} ± {:.2e}, cr_timeavg {:.6e} ± {:.2e}, cr_from_ps {:.6e}",
        b.ps.value, b.ps.std_error, b.cr_timeavg.value, b.cr_timeavg.std_error, b.cr_from_ps
    ));
    out.summary
        .extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    let file = BundleFile {
        function: f.key(),
        params,
        x0,
        sigma0: config.sigma0,
        trajectory_steps: config.steps,
        chain_steps: config.chain_steps,
        chain_burn_in: config
            .burn_in
            .unwrap_or_else(|| default_burn_in(config.chain_steps)),
        report: &report,
        checks,
    };
    out.push_json("bundle.json", &file)?;
    Ok(out)
}

pub fn cmd_drift(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params()?;
    let f = require_function(config)?;
    if config.radii.is_empty() {
        return Err(Error::config("radii", "empty radii list"));
    }
    let scan = drift_scan(
        &params,
        f.core(),
        &config.radii,
        None,
        config.samples,
        config.seed,
    )?;
    let mut out = Artifacts::default();
    let mut csv = Vec::new();
    scan.write_csv(&mut csv)?;
    out.push("drift_scan.csv", csv);
    out.summary.push(format!(
        "drift_holds_empirically: {} (limits: {:.5} at infinity, {:.5} at zero)",
        scan.drift_holds_empirically, scan.limit_infinity, scan.limit_zero
    ));
    out.push_json("drift_summary.json", &scan)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CltFile<'a> {
    function: String,
    params: AlgoParams,
    mode: &'static str,
    z0: Option<Vec<f64>>,
    iid_ps: Option<f64>,
    warm_up: usize,
    calibration_steps: usize,
    #[serde(flatten)]
    report: &'a crate::estimators::CltReport,
}

pub fn cmd_clt(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params()?;
    let f = require_function(config)?;
    let setup = CltSetup {
        steps: config.steps as usize,
        replicates: config.replicates,
        calibration_steps: config.calibration_steps,
        warm_up: config.warm_up,
        seed: config.seed,
    };
    let (report, z0, ps) = if config.iid {
        let ps = config.iid_ps.unwrap_or_else(|| params.target_success());
        (clt_check_iid(&params, ps, &setup)?, None, Some(ps))
    } else {
        let x0 = config.initial_point(&f, 0);
        let z0: Vec<f64> = f.centered(&x0).iter().map(|v| v / config.sigma0).collect();
        (clt_check(&params, f.core(), &z0, &setup)?, Some(z0), None)
    };
    let mut out = Artifacts::default();
    out.summary.push(format!(
        "KS p-value {:.4} (raw {:.4}), gamma_g^2 {:.4e} ± {:.1e}, CR {:.6e}",
        report.ks.p_value,
        report.ks_raw.p_value,
        report.gamma_g_sq.value,
        report.gamma_g_sq.std_error,
        report.cr.value
    ));
    let file = CltFile {
        function: f.key(),
        params,
        mode: if config.iid { "iid" } else { "chain" },
        z0,
        iid_ps: ps,
        warm_up: if config.iid { 0 } else { config.warm_up },
        calibration_steps: if config.iid {
            0
        } else {
            config.calibration_steps
        },
        report: &report,
    };
    out.push_json("clt_report.json", &file)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionValidation {
    pub function: String,
    pub alpha: f64,
    pub satisfies_assumptions: bool,
    pub checks: Vec<CheckReport>,
    pub sphere_bounds: SphereBounds,
    pub passed: bool,
}

/// Homogeneity (rtol 1e-8), Euler (1e-6) and positivity checks plus
/// sphere-bound estimates, for one function or the whole catalog.
pub fn validate_functions(config: &ExperimentConfig) -> Result<Vec<FunctionValidation>> {
    let functions = if config.function == "catalog" {
        builtin_catalog(config.n)?
            .into_iter()
            .filter(|f| f.transform() == crate::objective::MonotoneTransform::Identity)
            .collect()
    } else {
        vec![config.objective()?]
    };
    Ok(functions
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let core = f.core();
            let mut rng = stream_rng(config.seed, k as u64);
            let mut checks = vec![check_homogeneity(core, config.trials, 1e-8, &mut rng)];
            if core.satisfies_assumptions() {
                checks.push(check_euler(core, config.euler_points, 1e-6, &mut rng));
                checks.push(check_positivity(core, config.trials, &mut rng));
            }
            let sphere_bounds = estimate_sphere_bounds(core, config.bounds_samples, &mut rng);
            FunctionValidation {
                function: f.key(),
                alpha: core.degree(),
                satisfies_assumptions: core.satisfies_assumptions(),
                passed: checks.iter().all(|c| c.passed),
                checks,
                sphere_bounds,
            }
        })
        .collect())
}

pub fn cmd_validate_fn(config: &ExperimentConfig) -> Result<Artifacts> {
    let results = validate_functions(config)?;
    let mut out = Artifacts::default();
    for r in &results {
        let verdicts: Vec<String> = r
            .checks
            .iter()
            .map(|c| format!("{} {}", c.check, if c.passed { "ok" } else { "FAILED" }))
            .collect();
        out.summary.push(format!(
            "{}: {}; sphere bounds [{:.4}, {:.4}]",
            r.function,
            verdicts.join(", "),
            r.sphere_bounds.lower,
            r.sphere_bounds.upper
        ));
    }
    #[derive(Serialize)]
    struct ValidateFile<'a> {
        all_passed: bool,
        functions: &'a [FunctionValidation],
    }
    out.push_json(
        "validate.json",
        &ValidateFile {
            all_passed: results.iter().all(|r| r.passed),
            functions: &results,
        },
    )?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Substream {
    pub replicate: usize,
    pub noise_stream: u64,
    pub x0_stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: ExperimentConfig,
    pub rng: &'static str,
    pub substreams: Vec<Substream>,
    pub files: Vec<ManifestFile>,
}

pub fn manifest(
    command: &Command,
    config: &ExperimentConfig,
    artifacts: &Artifacts,
) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.name().into(),
        config: config.clone(),
        rng: RNG_RULE,
        substreams: (0..config.replicates)
            .map(|i| Substream {
                replicate: i,
                noise_stream: i as u64,
                x0_stream: AUX_STREAM_BASE + i as u64,
            })
            .collect(),
        files: artifacts
            .files
            .iter()
            .map(|(name, bytes)| ManifestFile {
                name: name.clone(),
                sha256: hex::encode(Sha256::digest(bytes)),
                bytes: bytes.len(),
            })
            .collect(),
    }
}

/// Writes all artifacts and `manifest.json` into `dir`, creating it if
/// needed. Returns the written paths.
pub fn write_outputs(
    dir: &Path,
    command: &Command,
    config: &ExperimentConfig,
    artifacts: &Artifacts,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in &artifacts.files {
        fs::write(dir.join(name), bytes)?;
        written.push(name.clone());
    }
    let mut m = serde_json::to_vec_pretty(&manifest(command, config, artifacts))?;
    m.push(b'\n');
    fs::write(dir.join("manifest.json"), m)?;
    written.push("manifest.json".into());
    Ok(written)
}
