//! The normalized chain `Z_t = X_t/σ_t`, simulated directly:
//!
//! ```text
//! Z_{t+1} = (Z_t + U_t)/γ        if f(Z_t + U_t) ≤ f(Z_t)
//! Z_{t+1} = Z_t · γ^(1/q)        otherwise
//! ```
//!
//! The chain depends on the objective only through the level sets of the
//! homogeneous core, so it always evaluates the core with the identity
//! transform.

use std::io::Write;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::es::{step_from_value, AlgoParams, AlgoState};
use crate::linalg::{ln_norm2, norm2};
use crate::numfmt::fmt17;
use crate::objective::{HomogeneousCore, ObjectiveFunction};
use crate::rng::{fill_normal, stream_rng, StreamRng};

/// A point of `ℝⁿ ∖ {0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedState {
    z: Vec<f64>,
}

impl NormalizedState {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.iter().all(|v| *v == 0.0) {
            return Err(Error::Domain("normalized state must be non-zero".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("normalized state must be finite".into()));
        }
        Ok(Self { z })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Transition {
    pub success: bool,
    /// `ln f(z + U·1{success}) − ln f(z)`; 0 on failure.
    pub ln_f_ratio: f64,
}

/// One transition of the normalized chain.
pub fn z_step(
    params: &AlgoParams,
    z: &NormalizedState,
    core: &HomogeneousCore,
    noise: &[f64],
) -> Result<(NormalizedState, bool)> {
    check_dim(params.n, z.z.len())?;
    check_dim(core.dim(), z.z.len())?;
    let mut next = z.z.clone();
    let tr = transition(params, &mut next, core, noise, false, 0)?;
    Ok((NormalizedState { z: next }, tr.success))
}

/// Advances `z` in place.
pub(crate) fn transition(
    params: &AlgoParams,
    z: &mut [f64],
    core: &HomogeneousCore,
    noise: &[f64],
    with_ratio: bool,
    t: u64,
) -> Result<Transition> {
    check_dim(z.len(), noise.len())?;
    let candidate: Vec<f64> = z.iter().zip(noise).map(|(a, b)| a + b).collect();
    let fz = core.value(z);
    let fc = core.value(&candidate);
    for (value, at) in [(fz, &z.to_vec()), (fc, &candidate)] {
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::Evaluation {
                t,
                value,
                x: at.clone(),
            });
        }
    }
    let success = fc <= fz;
    let ln_f_ratio = if success && with_ratio {
        core.ln_value(&candidate) - core.ln_value(z)
    } else {
        0.0
    };
    if success {
        for (zi, ci) in z.iter_mut().zip(&candidate) {
            *zi = ci / params.gamma;
        }
        if z.iter().all(|v| *v == 0.0) {
            return Err(Error::DegenerateChain { t });
        }
    } else {
        let grow = params.gamma.powf(1.0 / params.q);
        z.iter_mut().for_each(|zi| *zi *= grow);
    }
    Ok(Transition {
        success,
        ln_f_ratio,
    })
}

/// Advances `z` by `steps` transitions with noise from `rng`, handing each
/// success flag to `visit`.
pub(crate) fn walk(
    params: &AlgoParams,
    core: &HomogeneousCore,
    z: &mut [f64],
    steps: usize,
    rng: &mut StreamRng,
    mut visit: impl FnMut(usize, bool),
) -> Result<()> {
    let mut noise = vec![0.0; z.len()];
    for t in 0..steps {
        fill_normal(rng, &mut noise);
        let tr = transition(params, z, core, &noise, false, t as u64)?;
        visit(t, tr.success);
    }
    Ok(())
}

/// Post-burn-in transitions of a chain run, stored column-wise. Entry `k`
/// describes the transition out of `Z_t` with `t = burn_in + k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRecord {
    pub params: AlgoParams,
    /// Degree of the core, needed for the f-ratio route to the rate.
    pub alpha: f64,
    pub seed: u64,
    pub stream: u64,
    pub burn_in: usize,
    pub success: Vec<bool>,
    pub ln_eta: Vec<f64>,
    pub ln_f_ratio: Vec<f64>,
    /// `ln ‖Z_t‖` before the transition.
    pub ln_norm_z: Vec<f64>,
    /// Full `Z_t` vectors, only when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<f64>>>,
    /// State after the last transition.
    pub last: Vec<f64>,
}

impl ChainRecord {
    /// A record built from a given success sequence, for exercising the
    /// estimators. `ln_f_ratio` defaults to zero.
    pub fn synthetic(
        params: AlgoParams,
        alpha: f64,
        success: Vec<bool>,
        ln_f_ratio: Option<Vec<f64>>,
    ) -> Self {
        let n = success.len();
        Self {
            params,
            alpha,
            seed: 0,
            stream: 0,
            burn_in: 0,
            ln_eta: success.iter().map(|&s| params.ln_eta(s)).collect(),
            ln_f_ratio: ln_f_ratio.unwrap_or_else(|| vec![0.0; n]),
            ln_norm_z: vec![0.0; n],
            success,
            states: None,
            last: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.success.len()
    }

    pub fn is_empty(&self) -> bool {
        self.success.is_empty()
    }

    pub fn success_indicators(&self) -> Vec<f64> {
        self.success
            .iter()
            .map(|&s| if s { 1.0 } else { 0.0 })
            .collect()
    }

    /// CSV with header `t,log10_norm_z,success,ln_eta`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,log10_norm_z,success,ln_eta")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.burn_in + k,
                fmt17(self.ln_norm_z[k] / std::f64::consts::LN_10),
                u8::from(self.success[k]),
                fmt17(self.ln_eta[k])
            )?;
        }
        Ok(())
    }
}

/// Burn-in used when none is given: 10% of the run, at least 1000
/// transitions, unless that would leave nothing to record.
pub fn default_burn_in(steps: usize) -> usize {
    let b = (steps / 10).max(1000);
    if b < steps {
        b
    } else {
        steps / 10
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChainOptions {
    pub stream: u64,
    pub keep_states: bool,
}

/// Simulates `steps` transitions from `z0` and records those after `burn_in`.
pub fn run_chain(
    params: &AlgoParams,
    core: &HomogeneousCore,
    z0: &[f64],
    steps: usize,
    seed: u64,
    burn_in: usize,
) -> Result<ChainRecord> {
    run_chain_with(
        params,
        core,
        z0,
        steps,
        seed,
        burn_in,
        ChainOptions::default(),
    )
}

pub fn run_chain_with(
    params: &AlgoParams,
    core: &HomogeneousCore,
    z0: &[f64],
    steps: usize,
    seed: u64,
    burn_in: usize,
    options: ChainOptions,
) -> Result<ChainRecord> {
    check_dim(params.n, z0.len())?;
    check_dim(core.dim(), z0.len())?;
    let mut z = NormalizedState::new(z0.to_vec())?.into_vec();
    if burn_in >= steps {
        return Err(Error::InvalidParameter(format!(
            "burn-in {burn_in} must be smaller than the number of steps {steps}"
        )));
    }
    let kept = steps - burn_in;
    let mut record = ChainRecord {
        params: *params,
        alpha: core.degree(),
        seed,
        stream: options.stream,
        burn_in,
        success: Vec::with_capacity(kept),
        ln_eta: Vec::with_capacity(kept),
        ln_f_ratio: Vec::with_capacity(kept),
        ln_norm_z: Vec::with_capacity(kept),
        states: options.keep_states.then(|| Vec::with_capacity(kept)),
        last: vec![],
    };
    let mut rng = stream_rng(seed, options.stream);
    let mut noise = vec![0.0; params.n];
    for t in 0..steps {
        fill_normal(&mut rng, &mut noise);
        let recording = t >= burn_in;
        let ln_norm = if recording { ln_norm2(&z) } else { 0.0 };
        if let (true, Some(states)) = (recording, record.states.as_mut()) {
            states.push(z.clone());
        }
        let tr = transition(params, &mut z, core, &noise, recording, t as u64)?;
        if recording {
            record.success.push(tr.success);
            record.ln_eta.push(params.ln_eta(tr.success));
            record.ln_f_ratio.push(tr.ln_f_ratio);
            record.ln_norm_z.push(ln_norm);
        }
    }
    record.last = z;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub steps: usize,
    /// `max_t ‖(X_t − x*)/σ_t − Z_t‖ / ‖Z_t‖`.
    pub max_deviation: f64,
    /// Deviation after the first transition.
    pub first_step_deviation: f64,
    pub accept_sequences_equal: bool,
}

/// Runs the `(X, σ)` algorithm and the normalized chain from
/// `z0 = (x0 − x*)/σ0` on the same noise stream and compares them.
pub fn consistency_check(
    params: &AlgoParams,
    f: &ObjectiveFunction,
    x0: &[f64],
    sigma0: f64,
    steps: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    let z0: Vec<f64> = f.centered(x0).iter().map(|v| v / sigma0).collect();
    consistency_check_from(params, f, x0, sigma0, &z0, steps, seed)
}

/// As [`consistency_check`] with an explicit chain start, which need not
/// match `x0/σ0`.
pub fn consistency_check_from(
    params: &AlgoParams,
    f: &ObjectiveFunction,
    x0: &[f64],
    sigma0: f64,
    z0: &[f64],
    steps: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    check_dim(params.n, x0.len())?;
    check_dim(f.dim(), x0.len())?;
    check_dim(params.n, z0.len())?;
    let mut state = AlgoState::new(x0.to_vec(), sigma0)?;
    let mut z = NormalizedState::new(z0.to_vec())?.into_vec();
    let mut fx = f.value(&state.x);
    let mut rng = stream_rng(seed, 0);
    let mut noise = vec![0.0; params.n];
    let mut report = ConsistencyReport {
        steps: 0,
        max_deviation: 0.0,
        first_step_deviation: 0.0,
        accept_sequences_equal: true,
    };
    for t in 0..steps {
        fill_normal(&mut rng, &mut noise);
        let (next, outcome) = step_from_value(params, &state, fx, f, &noise)?;
        let tr = transition(params, &mut z, f.core(), &noise, false, t as u64)?;
        state = next;
        if outcome.accepted {
            fx = f.value(&state.x);
        }
        report.accept_sequences_equal &= outcome.accepted == tr.success;
        let sigma = state.sigma();
        let ratio: Vec<f64> = f.centered(&state.x).iter().map(|v| v / sigma).collect();
        let diff: Vec<f64> = ratio.iter().zip(&z).map(|(a, b)| a - b).collect();
        let dev = norm2(&diff) / norm2(&z);
        if t == 0 {
            report.first_step_deviation = dev;
        }
        report.max_deviation = report.max_deviation.max(dev);
        report.steps = t + 1;
        if f.core_value(&state.x) == 0.0 {
            break;
        }
    }
    Ok(report)
}
