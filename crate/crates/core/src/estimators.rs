//! Estimates of the success probability and the convergence rate from chain
//! and trajectory output, the CLT check and the geometric-approach curve.
//!
//! Standard errors of time averages use batch means (see
//! [`crate::stats::batch_means`]); operations only report estimates and
//! errors, tolerances are left to the caller.

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{default_burn_in, run_chain_with, walk, ChainOptions, ChainRecord};
use crate::error::{check_dim, Error, Result};
use crate::es::{run_trajectory_with, AlgoParams, RunOptions, Trajectory};
use crate::objective::{HomogeneousCore, ObjectiveFunction};
use crate::rng::{stream_rng, CALIBRATION_STREAM, JITTER_STREAM, PRE_RUN_BASE};
use crate::stats::{
    batch_means, compensated_sum, ks_test_standard_normal, least_squares, mean,
    overlapping_batch_means, variance, KsResult,
};

/// Minimum number of post-burn-in points for [`fit_log_slope`].
pub const MIN_SLOPE_POINTS: usize = 100;
/// Minimum number of replicates for [`clt_check`].
pub const MIN_CLT_REPLICATES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateCI {
    pub value: f64,
    #[serde(rename = "stderr")]
    pub std_error: f64,
    pub count: usize,
    pub method: String,
}

impl EstimateCI {
    fn batch(values: &[f64], method: &str) -> Result<Self> {
        let bm = batch_means(values)?;
        Ok(Self {
            value: bm.mean,
            std_error: bm.std_error,
            count: values.len(),
            method: method.to_string(),
        })
    }

    fn negated(mut self) -> Self {
        self.value = -self.value;
        self
    }

    /// `|a − b| / sqrt(se_a² + se_b²)`; infinite when both errors vanish and
    /// the values differ.
    pub fn z_score(&self, other: &EstimateCI) -> f64 {
        let diff = (self.value - other.value).abs();
        let se = self.std_error.hypot(other.std_error);
        if diff == 0.0 {
            0.0
        } else {
            diff / se
        }
    }
}

fn nonempty(chain: &ChainRecord) -> Result<()> {
    if chain.is_empty() {
        return Err(Error::InsufficientData(
            "chain has no post-burn-in records".into(),
        ));
    }
    Ok(())
}

/// Fraction of successful transitions.
pub fn estimate_ps(chain: &ChainRecord) -> Result<EstimateCI> {
    nonempty(chain)?;
    EstimateCI::batch(&chain.success_indicators(), "batch_means")
}

/// `CR = −ln γ ((q+1)/q · PS − 1/q)`.
pub fn cr_from_ps(ps: f64, gamma: f64, q: f64) -> f64 {
    0.0 - gamma.ln() * ((q + 1.0) / q * ps - 1.0 / q)
}

/// `−` time average of `ln η*`.
pub fn estimate_cr_timeavg(chain: &ChainRecord) -> Result<EstimateCI> {
    nonempty(chain)?;
    Ok(EstimateCI::batch(&chain.ln_eta, "batch_means")?.negated())
}

/// `−(1/α)` times the time average of `ln f(Z_t + U_t·1{success}) / f(Z_t)`.
pub fn estimate_cr_f_ratio(chain: &ChainRecord, alpha: f64) -> Result<EstimateCI> {
    nonempty(chain)?;
    check_ratios(&chain.ln_f_ratio)?;
    let scaled: Vec<f64> = chain.ln_f_ratio.iter().map(|r| -r / alpha).collect();
    EstimateCI::batch(&scaled, "batch_means")
}

/// The f-ratio rate of a handful of log-ratios, without a standard error.
pub fn cr_f_ratio_value(ln_ratios: &[f64], alpha: f64) -> Result<f64> {
    if ln_ratios.is_empty() {
        return Err(Error::InsufficientData("no log f-ratios".into()));
    }
    check_ratios(ln_ratios)?;
    Ok(-mean(ln_ratios) / alpha)
}

fn check_ratios(ln_ratios: &[f64]) -> Result<()> {
    match ln_ratios.iter().position(|r| !r.is_finite()) {
        Some(i) => Err(Error::Domain(format!(
            "log f-ratio at record {i} is {}; the function must be positive away from its optimum",
            ln_ratios[i]
        ))),
        None => Ok(()),
    }
}

/// OLS slope of `value` against `t` over the points with `t ≥ burn_in`.
/// The standard error ignores autocorrelation.
pub fn fit_log_slope(series: &[(f64, f64)], burn_in: f64) -> Result<EstimateCI> {
    let kept: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= burn_in)
        .collect();
    if kept.len() < MIN_SLOPE_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points after burn-in, need at least {MIN_SLOPE_POINTS}",
            kept.len()
        )));
    }
    if let Some((t, v)) = kept.iter().find(|(t, v)| !t.is_finite() || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite point ({t}, {v}) in series"
        )));
    }
    let fit = least_squares(&kept)?;
    Ok(EstimateCI {
        value: fit.slope,
        std_error: fit.slope_std_error,
        count: fit.count,
        method: "ols".into(),
    })
}

/// Slopes of `ln ‖X_t − x*‖` and `ln σ_t` for a trajectory, burn-in given in
/// iterations.
pub fn trajectory_slopes(traj: &Trajectory, burn_in: u64) -> Result<(EstimateCI, EstimateCI)> {
    let b = burn_in as f64;
    Ok((
        fit_log_slope(&traj.ln_distance_series(), b)?,
        fit_log_slope(&traj.ln_sigma_series(), b)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrBundle {
    pub ps: EstimateCI,
    pub cr_from_ps: f64,
    pub cr_timeavg: EstimateCI,
    /// `None` when the log f-ratios are undefined (f not positive).
    pub cr_f_ratio: Option<EstimateCI>,
    /// `None` when the trajectory cannot be followed to the end.
    pub slope_x: Option<EstimateCI>,
    pub slope_sigma: Option<EstimateCI>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleReport {
    pub bundle: CrBundle,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleSetup {
    pub trajectory_steps: u64,
    pub chain_steps: usize,
    pub chain_burn_in: Option<usize>,
    pub seed: u64,
}

/// All six estimates for one configuration. The trajectory runs on stream 0
/// from `(x0, σ0)`; the chain starts at `(x0 − x*)/σ0` and runs on the
/// calibration stream.
pub fn estimate_bundle(
    params: &AlgoParams,
    f: &ObjectiveFunction,
    x0: &[f64],
    sigma0: f64,
    setup: &BundleSetup,
) -> Result<BundleReport> {
    let mut warnings = Vec::new();
    if !f.core().satisfies_assumptions() {
        warnings.push(format!(
            "{} is outside the class covered by the convergence theory (linear functions are excluded)",
            f.key()
        ));
    }
    let z0: Vec<f64> = f.centered(x0).iter().map(|v| v / sigma0).collect();
    let burn_in = setup
        .chain_burn_in
        .unwrap_or_else(|| default_burn_in(setup.chain_steps));
    let options = ChainOptions {
        stream: CALIBRATION_STREAM,
        keep_states: false,
    };
    let chain = run_chain_with(
        params,
        f.core(),
        &z0,
        setup.chain_steps,
        setup.seed,
        burn_in,
        options,
    )?;
    let ps = estimate_ps(&chain)?;
    let cr_timeavg = estimate_cr_timeavg(&chain)?;
    let cr_f_ratio = match estimate_cr_f_ratio(&chain, chain.alpha) {
        Ok(e) => Some(e),
        Err(Error::Domain(msg)) => {
            warnings.push(format!("cr_f_ratio unavailable: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };

    let traj = run_trajectory_with(
        params,
        f,
        x0,
        sigma0,
        setup.trajectory_steps,
        setup.seed,
        RunOptions::default(),
    );
    let (slope_x, slope_sigma) = match traj {
        Ok(traj) => {
            let (sx, ss) = trajectory_slopes(&traj, setup.trajectory_steps / 10)?;
            (Some(sx), Some(ss))
        }
        Err(e @ Error::Evaluation { .. }) => {
            warnings.push(format!("trajectory slopes unavailable: {e}"));
            (None, None)
        }
        Err(e) => return Err(e),
    };

    Ok(BundleReport {
        bundle: CrBundle {
            cr_from_ps: cr_from_ps(ps.value, params.gamma, params.q),
            ps,
            cr_timeavg,
            cr_f_ratio,
            slope_x,
            slope_sigma,
        },
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltSetup {
    /// Horizon `t` of each replicate.
    pub steps: usize,
    pub replicates: usize,
    pub calibration_steps: usize,
    /// Transitions each replicate makes from `z0` before its horizon starts.
    pub warm_up: usize,
    pub seed: u64,
}

impl CltSetup {
    pub const DEFAULT_WARM_UP: usize = 1000;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub gamma_g_sq: EstimateCI,
    pub cr: EstimateCI,
    /// KS test after the continuity correction.
    pub ks: KsResult,
    /// KS test on the lattice-valued statistics as they are.
    pub ks_raw: KsResult,
    /// Spacing of the lattice the statistics live on.
    pub lattice_spacing: f64,
    pub steps: usize,
    pub replicates: usize,
    /// `|CR|·t ≥ 50·γ_g/√t`.
    pub horizon_ok: bool,
    /// Normalized statistics `(√t/γ_g)((1/t) ln σ_t/σ_0 + CR)`.
    pub statistics: Vec<f64>,
}

/// Checks that `(√t/γ_g)((1/t) ln σ_t/σ_0 + CR)` is standard normal across
/// replicates started at `z0`, each after `warm_up` discarded transitions
/// (from a far-from-stationary `z0` the transient in `ln σ_t/σ_0` is of the
/// same order as `γ_g √t`). CR and `γ_g²` come from one long calibration
/// chain on an independent stream; `γ_g²` is the batch-means asymptotic
/// variance of `ln η*`, its standard error the spread over ten sub-runs.
pub fn clt_check(
    params: &AlgoParams,
    core: &HomogeneousCore,
    z0: &[f64],
    setup: &CltSetup,
) -> Result<CltReport> {
    check_dim(params.n, z0.len())?;
    check_replicates(setup.replicates)?;
    let options = ChainOptions {
        stream: CALIBRATION_STREAM,
        keep_states: false,
    };
    let burn_in = default_burn_in(setup.calibration_steps);
    let calib = run_chain_with(
        params,
        core,
        z0,
        setup.calibration_steps,
        setup.seed,
        burn_in,
        options,
    )?;
    let cr = estimate_cr_timeavg(&calib)?;
    let gamma_g_sq = asymptotic_variance_estimate(&calib.ln_eta)?;
    if !(gamma_g_sq.value > 0.0) {
        return Err(Error::Calibration(format!(
            "asymptotic variance estimate {} is not positive",
            gamma_g_sq.value
        )));
    }

    let t = setup.steps;
    let sums = (0..setup.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(setup.seed, r as u64);
            let mut z = z0.to_vec();
            let mut successes = 0usize;
            walk(params, core, &mut z, setup.warm_up, &mut rng, |_, _| {})
                .map_err(|e| e.in_replicate(r as u64))?;
            walk(params, core, &mut z, t, &mut rng, |_, s| {
                successes += usize::from(s)
            })
            .map_err(|e| e.in_replicate(r as u64))?;
            Ok(log_sigma_change(params, successes, t))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(normalize_clt(params, sums, t, cr, gamma_g_sq, setup.seed))
}

/// [`clt_check`] on i.i.d. increments: each step succeeds independently
/// with probability `ps`, and the exact mean and variance replace the
/// calibration.
pub fn clt_check_iid(params: &AlgoParams, ps: f64, setup: &CltSetup) -> Result<CltReport> {
    use rand::Rng;
    check_replicates(setup.replicates)?;
    if !(0.0..=1.0).contains(&ps) {
        return Err(Error::InvalidParameter(format!(
            "success probability {ps} not in [0, 1]"
        )));
    }
    let jump = params.ln_increase() - params.ln_decrease();
    let cr = EstimateCI {
        value: cr_from_ps(ps, params.gamma, params.q),
        std_error: 0.0,
        count: 0,
        method: "exact".into(),
    };
    let gamma_g_sq = EstimateCI {
        value: jump * jump * ps * (1.0 - ps),
        std_error: 0.0,
        count: 0,
        method: "exact".into(),
    };
    if !(gamma_g_sq.value > 0.0) {
        return Err(Error::Calibration("degenerate i.i.d. increments".into()));
    }
    let t = setup.steps;
    let sums: Vec<f64> = (0..setup.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(setup.seed, r as u64);
            let successes = (0..t).filter(|_| rng.random::<f64>() < ps).count();
            log_sigma_change(params, successes, t)
        })
        .collect();
    Ok(normalize_clt(params, sums, t, cr, gamma_g_sq, setup.seed))
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < MIN_CLT_REPLICATES {
        return Err(Error::InsufficientData(format!(
            "{replicates} replicates, need at least {MIN_CLT_REPLICATES}"
        )));
    }
    Ok(())
}

fn log_sigma_change(params: &AlgoParams, successes: usize, t: usize) -> f64 {
    successes as f64 * params.ln_increase() + (t - successes) as f64 * params.ln_decrease()
}

// `ln σ_t/σ_0` is fixed by the success count, so the statistics sit on a
// lattice of spacing `(ln γ)(1 + 1/q)/(γ_g √t)`. Against a continuous law the
// KS distance of a lattice sample is bounded below by about half the largest
// lattice mass, so the corrected test spreads each value uniformly over its
// lattice cell before comparing.
fn normalize_clt(
    params: &AlgoParams,
    sums: Vec<f64>,
    t: usize,
    cr: EstimateCI,
    gamma_g_sq: EstimateCI,
    seed: u64,
) -> CltReport {
    use rand::Rng;
    let tf = t as f64;
    let gamma_g = gamma_g_sq.value.sqrt();
    let statistics: Vec<f64> = sums
        .iter()
        .map(|s| tf.sqrt() / gamma_g * (s / tf + cr.value))
        .collect();
    let spacing = (params.ln_increase() - params.ln_decrease()) / (gamma_g * tf.sqrt());
    let mut rng = stream_rng(seed, JITTER_STREAM);
    let smoothed: Vec<f64> = statistics
        .iter()
        .map(|s| s + spacing * (rng.random::<f64>() - 0.5))
        .collect();
    let ks = ks_test_standard_normal(&smoothed).expect("replicate count checked");
    let ks_raw = ks_test_standard_normal(&statistics).expect("replicate count checked");
    CltReport {
        horizon_ok: cr.value.abs() * tf >= 50.0 * gamma_g / tf.sqrt(),
        steps: t,
        replicates: statistics.len(),
        gamma_g_sq,
        cr,
        ks,
        ks_raw,
        lattice_spacing: spacing,
        statistics,
    }
}

/// Overlapping batch-means asymptotic variance with windows of `N^(2/3)`,
/// and a standard error from the spread of the same estimate over ten equal
/// sub-runs.
///
/// For `ln η*` the batch estimate behaves like `γ_g² + C/b` with `C` (the
/// variance of `ln ‖Z‖` increments) about a thousand times `γ_g²`; windows of
/// `sqrt(N)` overestimate `γ_g²` by a factor near two at `N = 10⁶`.
pub fn asymptotic_variance_estimate(values: &[f64]) -> Result<EstimateCI> {
    let window = |n: usize| ((n as f64).powf(2.0 / 3.0).floor() as usize).max(1);
    let whole = overlapping_batch_means(values, window(values.len()))?;
    let part = values.len() / 10;
    let parts = values
        .chunks_exact(part.max(1))
        .take(10)
        .map(|c| overlapping_batch_means(c, window(c.len())))
        .collect::<Result<Vec<f64>>>()?;
    Ok(EstimateCI {
        value: whole,
        std_error: (variance(&parts) / parts.len() as f64).sqrt(),
        count: values.len(),
        method: "overlapping_batch_means".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    /// Cross-replicate mean of `ln σ_{t+1}/σ_t`.
    pub mean: f64,
    pub std_error: f64,
}

/// Mean one-step log step-size change at `t = 0..horizon`, over
/// `replicates` runs from `(x0, σ0)`. Runs use the normalized chain from
/// `(x0 − x*)/σ0`, which yields the same success sequence as the trajectory.
pub fn geometric_approach_curve(
    params: &AlgoParams,
    f: &ObjectiveFunction,
    x0: &[f64],
    sigma0: f64,
    horizon: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    check_dim(f.dim(), x0.len())?;
    let z0: Vec<f64> = f.centered(x0).iter().map(|v| v / sigma0).collect();
    let starts = vec![z0; replicates];
    geometric_approach_curve_from_starts(params, f.core(), &starts, horizon, seed)
}

/// As [`geometric_approach_curve`] with one chain start per replicate.
pub fn geometric_approach_curve_from_starts(
    params: &AlgoParams,
    core: &HomogeneousCore,
    starts: &[Vec<f64>],
    horizon: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if starts.is_empty() {
        return Err(Error::InsufficientData("no replicates".into()));
    }
    let counts = starts
        .par_iter()
        .enumerate()
        .map(|(r, z0)| {
            check_dim(params.n, z0.len())?;
            let mut rng = stream_rng(seed, r as u64);
            let mut z = z0.clone();
            let mut hits = vec![0u32; horizon];
            walk(params, core, &mut z, horizon, &mut rng, |t, s| {
                hits[t] += u32::from(s)
            })
            .map_err(|e| e.in_replicate(r as u64))?;
            Ok::<_, Error>(hits)
        })
        .try_reduce(
            || vec![0u32; horizon],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let r = starts.len() as f64;
    let jump = params.ln_increase() - params.ln_decrease();
    Ok(counts
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            let p = c as f64 / r;
            CurvePoint {
                t,
                mean: params.ln_decrease() + jump * p,
                std_error: jump * (p * (1.0 - p) / r).sqrt(),
            }
        })
        .collect())
}

/// Independent approximately stationary chain states: start `i` is the end
/// point of a `pre_steps` run from `e₁` on stream `PRE_RUN_BASE + i`.
pub fn stationary_starts(
    params: &AlgoParams,
    core: &HomogeneousCore,
    count: usize,
    pre_steps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut e1 = vec![0.0; params.n];
    if let Some(first) = e1.first_mut() {
        *first = 1.0;
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, PRE_RUN_BASE + i as u64);
            let mut z = e1.clone();
            walk(params, core, &mut z, pre_steps, &mut rng, |_, _| {})
                .map_err(|e| e.in_replicate(i as u64))?;
            Ok(z)
        })
        .collect()
}

/// Exact time average of `ln η*` from a success count; used to cross-check
/// the identity between the two routes to CR.
pub fn mean_ln_eta(params: &AlgoParams, success: &[bool]) -> f64 {
    compensated_sum(success.iter().map(|&s| params.ln_eta(s))) / success.len() as f64
}
