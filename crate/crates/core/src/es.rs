//! The (1+1)-ES with generalized one-fifth success rule, written as a
//! comparison-based step-size adaptive randomized search: candidates come
//! from a solution function, are ranked by an ordering function, and the
//! state update sees only the permuted sampling vectors.
//!
//! The step-size is stored as `ln σ`, so the two possible updates are exact
//! additions of `ln γ` and `−(ln γ)/q`.

use std::io::Write;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::ln_norm2;
use crate::numfmt::fmt17;
use crate::objective::ObjectiveFunction;
use crate::rng::{fill_normal, stream_rng};

/// Dimension, increase factor `γ` and decrease exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgoParams {
    pub n: usize,
    pub gamma: f64,
    pub q: f64,
}

impl AlgoParams {
    /// Requires `γ > 1`, `q > 0`, `n ≥ 1`.
    pub fn new(n: usize, gamma: f64, q: f64) -> Result<Self> {
        Self::with_divergent(n, gamma, q, false)
    }

    /// As [`AlgoParams::new`]; with `allow_divergent` only `γ > 0` is
    /// required, for studying regimes where the theory does not apply.
    pub fn with_divergent(n: usize, gamma: f64, q: f64, allow_divergent: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "q must be positive, got {q}"
            )));
        }
        if !gamma.is_finite() || !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !allow_divergent && !(gamma > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be > 1, got {gamma}"
            )));
        }
        Ok(Self { n, gamma, q })
    }

    /// `γ = exp(1/3)`, `q = 4`.
    pub fn classic(n: usize) -> Self {
        Self {
            n,
            gamma: (1.0f64 / 3.0).exp(),
            q: 4.0,
        }
    }

    /// `ln γ`, the log step-size change on success.
    pub fn ln_increase(&self) -> f64 {
        self.gamma.ln()
    }

    /// `−(ln γ)/q`, the log step-size change on failure.
    pub fn ln_decrease(&self) -> f64 {
        -self.gamma.ln() / self.q
    }

    pub fn ln_eta(&self, success: bool) -> f64 {
        if success {
            self.ln_increase()
        } else {
            self.ln_decrease()
        }
    }

    /// `1/(q+1)`, the success probability at which the step-size is stationary.
    pub fn target_success(&self) -> f64 {
        1.0 / (self.q + 1.0)
    }
}

/// Mean vector and log step-size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgoState {
    pub x: Vec<f64>,
    pub log_sigma: f64,
}

impl AlgoState {
    pub fn new(x: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            x,
            log_sigma: sigma.ln(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub candidate: Vec<f64>,
    /// Step-size multiplier, `γ` or `γ^(−1/q)`.
    pub eta: f64,
    pub ln_eta: f64,
}

/// Solution function: `x + σu`.
pub fn sol(state: &AlgoState, u: &[f64]) -> Result<Vec<f64>> {
    check_dim(state.x.len(), u.len())?;
    let sigma = state.sigma();
    Ok(state.x.iter().zip(u).map(|(x, u)| x + sigma * u).collect())
}

/// Ordering function: the (0-based) permutation `S` with
/// `values[S[0]] ≤ values[S[1]] ≤ …`, ties kept in index order.
pub fn ord(values: &[f64]) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("ord of an empty sequence".into()));
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::NanInput(i));
    }
    let mut perm: Vec<usize> = (0..values.len()).collect();
    perm.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("NaN filtered"));
    Ok(perm)
}

/// Star operator: `(items[S[0]], items[S[1]], …)`.
pub fn star<T: Clone>(perm: &[usize], items: &[T]) -> Vec<T> {
    perm.iter().map(|&i| items[i].clone()).collect()
}

/// One iteration. The sampled vector `noise` and the Dirac-at-zero second
/// vector produce the candidates `x + σ·noise` and `x`; the candidate is
/// accepted when it ranks first, i.e. when `h(candidate) ≤ h(x)`.
pub fn step(
    params: &AlgoParams,
    state: &AlgoState,
    f: &ObjectiveFunction,
    noise: &[f64],
) -> Result<(AlgoState, StepOutcome)> {
    check_dim(params.n, state.x.len())?;
    check_dim(f.dim(), state.x.len())?;
    let fx = f.value(&state.x);
    step_from_value(params, state, fx, f, noise)
}

/// [`step`] with `h(x)` already known.
pub(crate) fn step_from_value(
    params: &AlgoParams,
    state: &AlgoState,
    fx: f64,
    f: &ObjectiveFunction,
    noise: &[f64],
) -> Result<(AlgoState, StepOutcome)> {
    let candidate = sol(state, noise)?;
    let fc = f.value(&candidate);
    for (value, at) in [(fc, &candidate), (fx, &state.x)] {
        if !value.is_finite() {
            return Err(Error::Evaluation {
                t: 0,
                value,
                x: at.clone(),
            });
        }
    }
    let perm = ord(&[fc, fx])?;
    // sampled vector first after ranking ⇔ success
    let ranked = star(&perm, &[Some(noise), None]);
    let accepted = ranked[0].is_some();

    let ln_eta = params.ln_eta(accepted);
    let eta = if accepted {
        params.gamma
    } else {
        params.gamma.powf(-1.0 / params.q)
    };
    let next = AlgoState {
        x: if accepted {
            candidate.clone()
        } else {
            state.x.clone()
        },
        log_sigma: state.log_sigma + ln_eta,
    };
    Ok((
        next,
        StepOutcome {
            accepted,
            candidate,
            eta,
            ln_eta,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub x: Vec<f64>,
    pub log_sigma: f64,
    pub f_value: f64,
    /// `None` for the initial record.
    pub accepted: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// `f(X_t − x*)` evaluated to exactly 0 in floating point.
    OptimumReached {
        t: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub params: AlgoParams,
    pub fn_key: String,
    pub optimum: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub stride: usize,
    pub status: RunStatus,
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn accept_sequence(&self) -> Vec<bool> {
        self.records.iter().filter_map(|r| r.accepted).collect()
    }

    /// `(t, ln ‖X_t − x*‖)` for every record.
    pub fn ln_distance_series(&self) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .map(|r| {
                let d: Vec<f64> = r.x.iter().zip(&self.optimum).map(|(a, b)| a - b).collect();
                (r.t as f64, ln_norm2(&d))
            })
            .collect()
    }

    /// `(t, ln σ_t)` for every record.
    pub fn ln_sigma_series(&self) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .map(|r| (r.t as f64, r.log_sigma))
            .collect()
    }

    /// CSV with header `t,f,log10_norm_x,log10_sigma,accepted`. The
    /// `accepted` field is empty for the initial record.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.write_columns(w, false)
    }

    /// As [`Trajectory::write_csv`] with `log10_norm_z = log10(‖X_t − x*‖/σ_t)`
    /// before `accepted`.
    pub fn write_run_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.write_columns(w, true)
    }

    fn write_columns<W: Write>(&self, mut w: W, with_z: bool) -> std::io::Result<()> {
        let ln10 = std::f64::consts::LN_10;
        if with_z {
            writeln!(w, "t,f,log10_norm_x,log10_sigma,log10_norm_z,accepted")?;
        } else {
            writeln!(w, "t,f,log10_norm_x,log10_sigma,accepted")?;
        }
        for (r, (_, ln_d)) in self.records.iter().zip(self.ln_distance_series()) {
            write!(
                w,
                "{},{},{},{},",
                r.t,
                fmt17(r.f_value),
                fmt17(ln_d / ln10),
                fmt17(r.log_sigma / ln10)
            )?;
            if with_z {
                write!(w, "{},", fmt17((ln_d - r.log_sigma) / ln10))?;
            }
            writeln!(w, "{}", accepted_field(r.accepted))?;
        }
        Ok(())
    }
}

pub(crate) fn accepted_field(a: Option<bool>) -> &'static str {
    match a {
        None => "",
        Some(true) => "1",
        Some(false) => "0",
    }
}

/// Stream id and recording stride for [`run_trajectory_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub stream: u64,
    /// Record every `stride`-th iteration; the last iteration is always kept.
    pub stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            stream: 0,
            stride: 1,
        }
    }
}

/// Runs `steps` iterations from `(x0, σ0)` with noise from stream 0 of `seed`.
pub fn run_trajectory(
    params: &AlgoParams,
    f: &ObjectiveFunction,
    x0: &[f64],
    sigma0: f64,
    steps: u64,
    seed: u64,
) -> Result<Trajectory> {
    run_trajectory_with(params, f, x0, sigma0, steps, seed, RunOptions::default())
}

pub fn run_trajectory_with(
    params: &AlgoParams,
    f: &ObjectiveFunction,
    x0: &[f64],
    sigma0: f64,
    steps: u64,
    seed: u64,
    options: RunOptions,
) -> Result<Trajectory> {
    check_dim(params.n, x0.len())?;
    check_dim(f.dim(), x0.len())?;
    if options.stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    if f.centered(x0).iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidParameter(
            "x0 must differ from the optimum".into(),
        ));
    }
    let mut state = AlgoState::new(x0.to_vec(), sigma0)?;
    let mut rng = stream_rng(seed, options.stream);
    let mut noise = vec![0.0; params.n];
    let mut fx = f.value(&state.x);
    if !fx.is_finite() {
        return Err(Error::Evaluation {
            t: 0,
            value: fx,
            x: state.x,
        });
    }

    let mut records = vec![TrajectoryRecord {
        t: 0,
        x: state.x.clone(),
        log_sigma: state.log_sigma,
        f_value: fx,
        accepted: None,
    }];
    let mut status = RunStatus::Completed;
    let start = if f.core_value(&state.x) == 0.0 {
        status = RunStatus::OptimumReached { t: 0 };
        steps + 1
    } else {
        1
    };
    for t in start..=steps {
        fill_normal(&mut rng, &mut noise);
        let (next, outcome) =
            step_from_value(params, &state, fx, f, &noise).map_err(|e| match e {
                Error::Evaluation { value, x, .. } => Error::Evaluation { t, value, x },
                other => other,
            })?;
        state = next;
        let hit_optimum = outcome.accepted && f.core_value(&state.x) == 0.0;
        if outcome.accepted {
            fx = f.value(&state.x);
        }
        if hit_optimum {
            status = RunStatus::OptimumReached { t };
        }
        if t % options.stride as u64 == 0 || t == steps || hit_optimum {
            records.push(TrajectoryRecord {
                t,
                x: state.x.clone(),
                log_sigma: state.log_sigma,
                f_value: fx,
                accepted: Some(outcome.accepted),
            });
        }
        if hit_optimum {
            break;
        }
    }

    Ok(Trajectory {
        params: *params,
        fn_key: f.key(),
        optimum: f.optimum(),
        seed,
        stream: options.stream,
        stride: options.stride,
        status,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{HomogeneousCore, MonotoneTransform};

    fn sphere(n: usize) -> ObjectiveFunction {
        ObjectiveFunction::new(HomogeneousCore::sphere(n).unwrap())
    }

    #[test]
    fn params_validation() {
        assert!(AlgoParams::new(2, 1.0, 4.0).is_err());
        assert!(AlgoParams::new(2, 0.9, 4.0).is_err());
        assert!(AlgoParams::with_divergent(2, 0.9, 4.0, true).is_ok());
        assert!(AlgoParams::new(2, 2.0, 0.0).is_err());
        assert!(AlgoParams::new(0, 2.0, 1.0).is_err());
        assert!(AlgoParams::with_divergent(2, 0.0, 1.0, true).is_err());
    }

    #[test]
    fn sol_examples() {
        let s = AlgoState::new(vec![1.0, 0.0], 2.0).unwrap();
        assert_eq!(sol(&s, &[0.0, 1.0]).unwrap(), vec![1.0, 2.0]);
        let s = AlgoState::new(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(sol(&s, &[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
        let s = AlgoState::new(vec![1.0, 1.0], 0.5).unwrap();
        assert_eq!(sol(&s, &[2.0, -2.0]).unwrap(), vec![2.0, 0.0]);
        assert!(sol(&s, &[1.0]).is_err());
    }

    #[test]
    fn ord_examples() {
        // 1-based (2,1), (1,2), (2,4,1,3)
        assert_eq!(ord(&[3.0, 1.0]).unwrap(), vec![1, 0]);
        assert_eq!(ord(&[1.0, 1.0]).unwrap(), vec![0, 1]);
        assert_eq!(ord(&[5.0, 2.0, 9.0, 2.0]).unwrap(), vec![1, 3, 0, 2]);
        assert!(matches!(ord(&[1.0, f64::NAN]), Err(Error::NanInput(1))));
        assert!(ord(&[]).is_err());
    }

    #[test]
    fn star_permutes() {
        assert_eq!(star(&[2, 0, 1], &['a', 'b', 'c']), vec!['c', 'a', 'b']);
    }

    #[test]
    fn forced_acceptance_at_optimum() {
        let p = AlgoParams::new(2, 2.0, 4.0).unwrap();
        let s = AlgoState::new(vec![1.0, 0.0], 1.0).unwrap();
        let (next, out) = step(&p, &s, &sphere(2), &[-1.0, 0.0]).unwrap();
        assert!(out.accepted);
        assert_eq!(next.x, vec![0.0, 0.0]);
        assert_eq!(out.eta, 2.0);
        assert_eq!(next.log_sigma, s.log_sigma + 2f64.ln());
    }

    #[test]
    fn forced_rejection() {
        let p = AlgoParams::new(2, 2.0, 4.0).unwrap();
        let s = AlgoState::new(vec![1.0, 0.0], 1.0).unwrap();
        let (next, out) = step(&p, &s, &sphere(2), &[10.0, 0.0]).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.candidate, vec![11.0, 0.0]);
        assert_eq!(next.x, s.x);
        assert_eq!(out.eta, 2f64.powf(-0.25));
        assert_eq!(next.log_sigma, -(2f64.ln()) / 4.0);
    }

    #[test]
    fn tie_is_accepted() {
        let p = AlgoParams::classic(3);
        let s = AlgoState::new(vec![0.5, -1.0, 2.0], 0.3).unwrap();
        let f = ObjectiveFunction::from_key("quad:diag:1,10,100:g=log1p", 3).unwrap();
        let (next, out) = step(&p, &s, &f, &[0.0; 3]).unwrap();
        assert!(out.accepted);
        assert_eq!(out.eta, p.gamma);
        assert_eq!(next.log_sigma, s.log_sigma + p.ln_increase());
    }

    #[test]
    fn non_finite_value_is_reported_with_time() {
        let p = AlgoParams::classic(1);
        let f = ObjectiveFunction::from_key("normpow:p=2:alpha=400", 1).unwrap();
        let err = run_trajectory(&p, &f, &[1e3], 1e3, 10, 1).unwrap_err();
        assert!(matches!(err, Error::Evaluation { t: 0, .. }), "{err}");
        let f = ObjectiveFunction::from_key("normpow:p=2:alpha=100", 1).unwrap();
        let err = run_trajectory(&p, &f, &[1.0], 1e4, 10, 1).unwrap_err();
        assert!(matches!(err, Error::Evaluation { t: 1, .. }), "{err}");
    }

    #[test]
    fn zero_steps_keeps_initial_record() {
        let tr =
            run_trajectory(&AlgoParams::classic(2), &sphere(2), &[1.0, 1.0], 1.0, 0, 3).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.records[0].accepted, None);
        assert_eq!(tr.records[0].f_value, 2.0);
    }

    #[test]
    fn rejects_start_at_optimum() {
        let f = ObjectiveFunction::from_key("sphere:xopt=1,1", 2).unwrap();
        assert!(run_trajectory(&AlgoParams::classic(2), &f, &[1.0, 1.0], 1.0, 5, 0).is_err());
        assert!(run_trajectory(&AlgoParams::classic(2), &f, &[1.0, 2.0], 0.0, 5, 0).is_err());
    }

    #[test]
    fn stride_thins_but_keeps_last() {
        let tr = run_trajectory_with(
            &AlgoParams::classic(2),
            &sphere(2),
            &[1.0, 1.0],
            1.0,
            25,
            3,
            RunOptions {
                stream: 0,
                stride: 10,
            },
        )
        .unwrap();
        let ts: Vec<u64> = tr.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 10, 20, 25]);
    }

    #[test]
    fn elitism_and_two_valued_ratio() {
        let p = AlgoParams::classic(5);
        let f = sphere(5).with_transform(MonotoneTransform::Sqrt);
        let tr = run_trajectory(&p, &f, &[1.0; 5], 0.1, 2000, 8).unwrap();
        for w in tr.records.windows(2) {
            assert!(w[1].f_value <= w[0].f_value);
            let d = w[1].log_sigma - w[0].log_sigma;
            let expected = if w[1].accepted.unwrap() {
                p.ln_increase()
            } else {
                p.ln_decrease()
            };
            assert_eq!(w[0].log_sigma + expected, w[1].log_sigma);
            assert!(d == w[1].log_sigma - w[0].log_sigma);
        }
    }

    #[test]
    fn optimum_hit_stops_run() {
        // ‖x‖² underflows to 0 once |x| drops below ~1e-162
        let p = AlgoParams::classic(1);
        let tr = run_trajectory(&p, &sphere(1), &[1e-160], 1e-160, 100_000, 2).unwrap();
        let RunStatus::OptimumReached { t } = tr.status else {
            panic!(
                "expected the floating-point floor to be hit: {:?}",
                tr.status
            );
        };
        assert!(t < 100_000);
        assert_eq!(tr.records.last().unwrap().t, t);
        assert_eq!(tr.records.last().unwrap().f_value, 0.0);

        let tr = run_trajectory(&p, &sphere(1), &[1e-170], 1.0, 10, 2).unwrap();
        assert_eq!(tr.status, RunStatus::OptimumReached { t: 0 });
        assert_eq!(tr.records.len(), 1);
    }

    #[test]
    fn csv_schema() {
        let tr =
            run_trajectory(&AlgoParams::classic(2), &sphere(2), &[3.0, 4.0], 1.0, 2, 3).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,f,log10_norm_x,log10_sigma,accepted"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0");
        assert_eq!(first[1].parse::<f64>().unwrap(), 25.0);
        assert!((first[2].parse::<f64>().unwrap() - 5f64.log10()).abs() < 1e-15);
        assert_eq!(first[4], "");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn run_csv_has_normalized_column() {
        let tr =
            run_trajectory(&AlgoParams::classic(2), &sphere(2), &[3.0, 4.0], 0.5, 2, 3).unwrap();
        let mut buf = Vec::new();
        tr.write_run_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,f,log10_norm_x,log10_sigma,log10_norm_z,accepted"
        );
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .take(5)
            .map(|v| v.parse().unwrap())
            .collect();
        assert!((first[4] - 10f64.log10()).abs() < 1e-15);
        assert!((first[4] - (first[2] - first[3])).abs() < 1e-15);
    }
}
