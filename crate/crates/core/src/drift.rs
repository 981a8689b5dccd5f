//! One-step drift of the normalized chain for `V(z) = f(z)` when `f(z) ≥ 1`
//! and `1/f(z)` otherwise, i.e. `ln V = |ln f|`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::transition;
use crate::error::{check_dim, Error, Result};
use crate::es::AlgoParams;
use crate::estimators::EstimateCI;
use crate::linalg::norm2;
use crate::numfmt::fmt17;
use crate::objective::HomogeneousCore;
use crate::rng::{fill_normal, random_on_sphere, stream_rng, DIRECTION_STREAM, DRIFT_BASE};
use crate::stats::{mean, variance};

/// Smallest Monte Carlo sample accepted by [`drift_ratio_mc`].
pub const MIN_DRIFT_SAMPLES: usize = 1000;
/// Radii inside `(INNER_EDGE, OUTER_EDGE)` form the middle band of a scan.
pub const INNER_EDGE: f64 = 1e-2;
pub const OUTER_EDGE: f64 = 1e2;

pub fn v_function(core: &HomogeneousCore, z: &[f64]) -> Result<f64> {
    Ok(ln_v(core, z)?.exp())
}

/// `ln V(z) = |ln f(z)|`, finite for magnitudes where `f` itself would
/// overflow.
pub fn ln_v(core: &HomogeneousCore, z: &[f64]) -> Result<f64> {
    check_dim(core.dim(), z.len())?;
    if z.iter().all(|v| *v == 0.0) {
        return Err(Error::Domain("V is not defined at z = 0".into()));
    }
    let lf = core.ln_value(z);
    if lf.is_nan() {
        return Err(Error::Domain(format!(
            "ln f(z) is undefined for {}",
            core.key()
        )));
    }
    Ok(lf.abs())
}

/// `½(γ^(−α) + γ^(α/q))`, the limit of `PV/V` as `‖z‖ → ∞`; below 1 iff the
/// step size increases on linear functions.
pub fn linear_increase_condition(gamma: f64, q: f64, alpha: f64) -> f64 {
    0.5 * (gamma.powf(-alpha) + gamma.powf(alpha / q))
}

/// `γ^(−α/q)`, the limit of `PV/V` as `z → 0`.
pub fn limit_at_zero(gamma: f64, q: f64, alpha: f64) -> f64 {
    gamma.powf(-alpha / q)
}

/// Mean of `V(Z₁)/V(z)` over one transition per noise vector in `draws`.
pub fn drift_ratio_from_draws(
    params: &AlgoParams,
    core: &HomogeneousCore,
    z: &[f64],
    draws: &[Vec<f64>],
) -> Result<f64> {
    let ratios = draws
        .iter()
        .map(|u| one_ratio(params, core, z, u))
        .collect::<Result<Vec<f64>>>()?;
    if ratios.is_empty() {
        return Err(Error::InsufficientData("no draws".into()));
    }
    Ok(mean(&ratios))
}

fn one_ratio(params: &AlgoParams, core: &HomogeneousCore, z: &[f64], u: &[f64]) -> Result<f64> {
    let lv = ln_v(core, z)?;
    let mut next = z.to_vec();
    transition(params, &mut next, core, u, false, 0)?;
    Ok((ln_v(core, &next)? - lv).exp())
}

/// Monte Carlo estimate of `PV(z)/V(z)` from `samples` independent draws on
/// stream `stream`; the standard error is the i.i.d. one.
pub fn drift_ratio_mc(
    params: &AlgoParams,
    core: &HomogeneousCore,
    z: &[f64],
    samples: usize,
    seed: u64,
    stream: u64,
) -> Result<EstimateCI> {
    check_dim(params.n, z.len())?;
    if samples < MIN_DRIFT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{samples} drift samples, need at least {MIN_DRIFT_SAMPLES}"
        )));
    }
    let mut rng = stream_rng(seed, stream);
    let mut u = vec![0.0; z.len()];
    let mut ratios = Vec::with_capacity(samples);
    for _ in 0..samples {
        fill_normal(&mut rng, &mut u);
        ratios.push(one_ratio(params, core, z, &u)?);
    }
    Ok(EstimateCI {
        value: mean(&ratios),
        std_error: (variance(&ratios) / samples as f64).sqrt(),
        count: samples,
        method: "iid".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftCell {
    pub radius: f64,
    pub direction_id: usize,
    pub ratio: EstimateCI,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftScan {
    pub params: AlgoParams,
    pub function: String,
    pub alpha: f64,
    pub samples: usize,
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub cells: Vec<DriftCell>,
    pub limit_infinity: f64,
    pub limit_zero: f64,
    /// Every cell with radius `≤ 10⁻²` or `≥ 10²` has ratio below 1 by more
    /// than three standard errors (false when there are no such cells).
    pub drift_holds_empirically: bool,
}

impl DriftScan {
    /// CSV with header `radius,direction_id,ratio,stderr`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "radius,direction_id,ratio,stderr")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{}",
                fmt17(c.radius),
                c.direction_id,
                fmt17(c.ratio.value),
                fmt17(c.ratio.std_error)
            )?;
        }
        Ok(())
    }

    pub fn outer_cells(&self) -> impl Iterator<Item = &DriftCell> {
        self.cells
            .iter()
            .filter(|c| c.radius <= INNER_EDGE || c.radius >= OUTER_EDGE)
    }
}

/// Default scan directions: `e₁` followed by `extra` uniform random unit
/// vectors.
pub fn default_directions(n: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let mut rng = stream_rng(seed, DIRECTION_STREAM);
    std::iter::once(e1)
        .chain((0..extra).map(|_| random_on_sphere(&mut rng, n, 1.0)))
        .collect()
}

/// Estimates `PV/V` at `r·d` for every radius `r` and direction `d`
/// (normalized first; `None` means [`default_directions`] with three random
/// ones). Cell `i` (radius-major) uses stream `DRIFT_BASE + i`.
pub fn drift_scan(
    params: &AlgoParams,
    core: &HomogeneousCore,
    radii: &[f64],
    directions: Option<Vec<Vec<f64>>>,
    samples: usize,
    seed: u64,
) -> Result<DriftScan> {
    check_dim(params.n, core.dim())?;
    if radii.is_empty() {
        return Err(Error::InvalidParameter("no radii given".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "radius {r} is not positive and finite"
        )));
    }
    let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().copied().fold(0.0, f64::max);
    if hi / lo < 1e4 {
        return Err(Error::InvalidParameter(format!(
            "radii span [{lo}, {hi}], need at least four decades"
        )));
    }
    let directions = directions.unwrap_or_else(|| default_directions(params.n, 3, seed));
    let directions = directions
        .into_iter()
        .map(|d| {
            check_dim(params.n, d.len())?;
            let norm = norm2(&d);
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidParameter(
                    "scan direction must be non-zero".into(),
                ));
            }
            Ok(d.iter().map(|v| v / norm).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    if directions.is_empty() {
        return Err(Error::InvalidParameter("no scan directions".into()));
    }

    let grid: Vec<(f64, usize)> = radii
        .iter()
        .flat_map(|&r| (0..directions.len()).map(move |d| (r, d)))
        .collect();
    let cells = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(radius, direction_id))| {
            let z: Vec<f64> = directions[direction_id]
                .iter()
                .map(|v| v * radius)
                .collect();
            let ratio = drift_ratio_mc(params, core, &z, samples, seed, DRIFT_BASE + i as u64)?;
            Ok(DriftCell {
                radius,
                direction_id,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let alpha = core.degree();
    let mut scan = DriftScan {
        params: *params,
        function: core.key(),
        alpha,
        samples,
        radii: radii.to_vec(),
        directions,
        cells,
        limit_infinity: linear_increase_condition(params.gamma, params.q, alpha),
        limit_zero: limit_at_zero(params.gamma, params.q, alpha),
        drift_holds_empirically: false,
    };
    let holds = {
        let mut outer = scan.outer_cells().peekable();
        outer.peek().is_some() && outer.all(|c| c.ratio.value + 3.0 * c.ratio.std_error < 1.0)
    };
    scan.drift_holds_empirically = holds;
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(n: usize) -> HomogeneousCore {
        HomogeneousCore::sphere(n).unwrap()
    }

    #[test]
    fn v_branches() {
        let s = sphere(2);
        assert!((v_function(&s, &[2.0, 0.0]).unwrap() - 4.0).abs() < 1e-14);
        assert!((v_function(&s, &[0.5, 0.0]).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(v_function(&s, &[1.0, 0.0]).unwrap(), 1.0);
        assert!(v_function(&s, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn v_in_log_domain_at_extremes() {
        let s = HomogeneousCore::norm_power(3, crate::objective::PNorm::Two, 3.0).unwrap();
        let lv = ln_v(&s, &[1e150, 0.0, 0.0]).unwrap();
        assert!((lv - 450.0 * 10f64.ln()).abs() < 1e-9);
        let lv = ln_v(&s, &[1e-150, 0.0, 0.0]).unwrap();
        assert!((lv - 450.0 * 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn condition_values() {
        assert_eq!(linear_increase_condition(1.0, 4.0, 2.0), 1.0);
        let g = (1.0f64 / 3.0).exp();
        assert!((linear_increase_condition(g, 4.0, 2.0) - 0.84739).abs() < 1e-5);
        assert!((linear_increase_condition(4.0, 0.5, 2.0) - 128.03125).abs() < 1e-12);
        assert!((limit_at_zero(g, 4.0, 2.0) - 0.84648).abs() < 1e-5);
    }

    #[test]
    fn forced_rejection_single_draw() {
        let p = AlgoParams::classic(2);
        let s = sphere(2);
        let z = [2.0, 0.0];
        let r = drift_ratio_from_draws(&p, &s, &z, &[vec![10.0, 0.0]]).unwrap();
        let grown: Vec<f64> = z.iter().map(|v| v * p.gamma.powf(0.25)).collect();
        let expected = v_function(&s, &grown).unwrap() / v_function(&s, &z).unwrap();
        assert!((r - expected).abs() < 1e-14);
    }

    #[test]
    fn too_few_samples() {
        let p = AlgoParams::classic(2);
        assert!(matches!(
            drift_ratio_mc(&p, &sphere(2), &[1.0, 0.0], 999, 1, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn scan_validation() {
        let p = AlgoParams::classic(3);
        let s = sphere(3);
        assert!(drift_scan(&p, &s, &[], None, 1000, 1).is_err());
        assert!(drift_scan(&p, &s, &[0.1, 10.0], None, 1000, 1).is_err());
        assert!(drift_scan(&p, &s, &[-1.0, 1e4], None, 1000, 1).is_err());
    }

    #[test]
    fn scan_layout_and_csv() {
        let p = AlgoParams::classic(3);
        let scan = drift_scan(&p, &sphere(3), &[1e-3, 1.0, 1e3], None, 1000, 2).unwrap();
        assert_eq!(scan.directions.len(), 4);
        assert_eq!(scan.cells.len(), 12);
        assert_eq!(scan.outer_cells().count(), 8);
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "radius,direction_id,ratio,stderr"
        );
        assert_eq!(text.lines().count(), 13);
    }

    #[test]
    fn scan_is_deterministic() {
        let p = AlgoParams::classic(3);
        let a = drift_scan(&p, &sphere(3), &[1e-2, 1e2], None, 1000, 5).unwrap();
        let b = drift_scan(&p, &sphere(3), &[1e-2, 1e2], None, 1000, 5).unwrap();
        assert_eq!(a, b);
    }
}
