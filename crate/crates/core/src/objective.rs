//! Objective functions of the form `h = g ∘ f`, where `f` is positively
//! homogeneous with a unique minimum at the optimum and `g` is strictly
//! increasing, plus validators for the structural properties the
//! convergence theory relies on.
//!
//! Catalog entries are addressable by string key; see [`ObjectiveFunction::from_key`].

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, dot, ln_norm2, norm2};
use crate::numfmt::{parse_list, parse_real};
use crate::rng::{fill_normal, random_on_sphere};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PNorm {
    One,
    Two,
    Inf,
}

impl PNorm {
    fn norm(self, x: &[f64]) -> f64 {
        match self {
            PNorm::One => x.iter().map(|v| v.abs()).sum(),
            PNorm::Two => norm2(x),
            PNorm::Inf => x.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        }
    }

    fn ln_norm(self, x: &[f64]) -> f64 {
        match self {
            PNorm::Two => ln_norm2(x),
            _ => {
                let scale = PNorm::Inf.norm(x);
                if scale == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let y: Vec<f64> = x.iter().map(|v| v / scale).collect();
                scale.ln() + self.norm(&y).ln()
            }
        }
    }

    fn label(self) -> &'static str {
        match self {
            PNorm::One => "1",
            PNorm::Two => "2",
            PNorm::Inf => "inf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CoreKind {
    Sphere,
    NormPower {
        p: PNorm,
        alpha: f64,
    },
    /// `½ xᵀHx`, `h` row-major.
    Quadratic {
        h: Vec<f64>,
        diagonal: bool,
    },
    /// `‖x‖^α (1 + β (x̂·d)³)` with `x̂ = x/‖x‖` and unit `d`.
    Modulated {
        alpha: f64,
        beta: f64,
        direction: Vec<f64>,
    },
    /// `a·x`. Homogeneous of degree 1 but not positive; only used to probe
    /// the chain outside the convergence class.
    Linear {
        a: Vec<f64>,
    },
}

/// A positively homogeneous function `f: ℝⁿ → ℝ` with its degree.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousCore {
    kind: CoreKind,
    dim: usize,
}

impl HomogeneousCore {
    /// `‖x‖²`, degree 2.
    pub fn sphere(n: usize) -> Result<Self> {
        check_positive_dim(n)?;
        Ok(Self {
            kind: CoreKind::Sphere,
            dim: n,
        })
    }

    /// `‖x‖_p^α` for `p ∈ {1, 2, ∞}`.
    pub fn norm_power(n: usize, p: PNorm, alpha: f64) -> Result<Self> {
        check_positive_dim(n)?;
        check_degree(alpha)?;
        Ok(Self {
            kind: CoreKind::NormPower { p, alpha },
            dim: n,
        })
    }

    /// `½ xᵀHx` for a symmetric positive definite `h` (row-major, `n × n`).
    pub fn quadratic(n: usize, h: Vec<f64>) -> Result<Self> {
        check_positive_dim(n)?;
        check_dim(n * n, h.len())?;
        for i in 0..n {
            for j in 0..i {
                if h[i * n + j] != h[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "H is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if h.iter().any(|v| !v.is_finite()) || cholesky(&h, n).is_none() {
            return Err(Error::InvalidParameter("H is not positive definite".into()));
        }
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || h[i * n + j] == 0.0));
        Ok(Self {
            kind: CoreKind::Quadratic { h, diagonal },
            dim: n,
        })
    }

    pub fn quadratic_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut h = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            h[i * n + i] = *d;
        }
        Self::quadratic(n, h)
    }

    /// Diagonal quadratic with eigenvalues log-spaced on `[1, condition]`.
    pub fn ellipsoid(n: usize, condition: f64) -> Result<Self> {
        check_positive_dim(n)?;
        if !(condition >= 1.0) || !condition.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "condition number must be finite and >= 1, got {condition}"
            )));
        }
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                if n == 1 {
                    1.0
                } else {
                    condition.powf(i as f64 / (n - 1) as f64)
                }
            })
            .collect();
        Self::quadratic_diag(&diag)
    }

    /// Angularly modulated core `‖x‖^α (1 + β (x̂·d)³)`. Sublevel sets stop
    /// being convex once `β` passes roughly 0.5 (α = 1), 0.82 (α = 2) or
    /// 0.92 (α = 3). `direction` is normalized; `|β| < 1` keeps
    /// the function positive away from 0.
    pub fn modulated(n: usize, alpha: f64, beta: f64, direction: Option<Vec<f64>>) -> Result<Self> {
        check_positive_dim(n)?;
        check_degree(alpha)?;
        if !(beta.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "modulation |beta| must be < 1, got {beta}"
            )));
        }
        let direction = match direction {
            Some(d) => {
                check_dim(n, d.len())?;
                let norm = norm2(&d);
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(Error::InvalidParameter("direction must be non-zero".into()));
                }
                d.iter().map(|v| v / norm).collect()
            }
            None => {
                let mut e1 = vec![0.0; n];
                e1[0] = 1.0;
                e1
            }
        };
        Ok(Self {
            kind: CoreKind::Modulated {
                alpha,
                beta,
                direction,
            },
            dim: n,
        })
    }

    /// `a·x`; defaults to `x₁`.
    pub fn linear(n: usize, a: Option<Vec<f64>>) -> Result<Self> {
        check_positive_dim(n)?;
        let a = match a {
            Some(a) => {
                check_dim(n, a.len())?;
                if a.iter().all(|v| *v == 0.0) {
                    return Err(Error::InvalidParameter(
                        "linear gradient must be non-zero".into(),
                    ));
                }
                a
            }
            None => {
                let mut e1 = vec![0.0; n];
                e1[0] = 1.0;
                e1
            }
        };
        Ok(Self {
            kind: CoreKind::Linear { a },
            dim: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Homogeneity degree α.
    pub fn degree(&self) -> f64 {
        match &self.kind {
            CoreKind::Sphere | CoreKind::Quadratic { .. } => 2.0,
            CoreKind::NormPower { alpha, .. } | CoreKind::Modulated { alpha, .. } => *alpha,
            CoreKind::Linear { .. } => 1.0,
        }
    }

    /// False for cores outside the class covered by the convergence theory
    /// (currently only the linear core).
    pub fn satisfies_assumptions(&self) -> bool {
        !matches!(self.kind, CoreKind::Linear { .. })
    }

    /// `f(x)`. The caller guarantees `x.len() == dim`.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            CoreKind::Sphere => x.iter().map(|v| v * v).sum(),
            CoreKind::NormPower { p, alpha } => {
                if *p == PNorm::Two && *alpha == 2.0 {
                    x.iter().map(|v| v * v).sum()
                } else {
                    p.norm(x).powf(*alpha)
                }
            }
            CoreKind::Quadratic { h, diagonal } => 0.5 * quad_form(h, *diagonal, x),
            CoreKind::Modulated {
                alpha,
                beta,
                direction,
            } => {
                let r = norm2(x);
                if r == 0.0 {
                    return 0.0;
                }
                let c = dot(x, direction) / r;
                r.powf(*alpha) * (1.0 + beta * c * c * c)
            }
            CoreKind::Linear { a } => dot(a, x),
        }
    }

    /// `ln f(x)` evaluated without forming `f(x)` where possible, so extreme
    /// magnitudes of `x` do not overflow.
    pub fn ln_value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            CoreKind::Sphere => 2.0 * ln_norm2(x),
            CoreKind::NormPower { p, alpha } => alpha * p.ln_norm(x),
            CoreKind::Quadratic { h, diagonal } => {
                let scale = PNorm::Inf.norm(x);
                if scale == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let y: Vec<f64> = x.iter().map(|v| v / scale).collect();
                2.0 * scale.ln() + (0.5 * quad_form(h, *diagonal, &y)).ln()
            }
            CoreKind::Modulated {
                alpha,
                beta,
                direction,
            } => {
                let lr = ln_norm2(x);
                if lr == f64::NEG_INFINITY {
                    return lr;
                }
                let c = dot(x, direction) / norm2(x);
                alpha * lr + (beta * c * c * c).ln_1p()
            }
            CoreKind::Linear { a } => dot(a, x).ln(),
        }
    }

    /// Analytic gradient, when the core is differentiable in closed form.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            CoreKind::Sphere => Some(x.iter().map(|v| 2.0 * v).collect()),
            CoreKind::NormPower {
                p: PNorm::Two,
                alpha,
            } => {
                let r = norm2(x);
                let s = alpha * r.powf(alpha - 2.0);
                Some(x.iter().map(|v| s * v).collect())
            }
            // the 1- and ∞-norms are differentiable off a null set; there the
            // one-sided choice below is used
            CoreKind::NormPower {
                p: PNorm::One,
                alpha,
            } => {
                let r = PNorm::One.norm(x);
                let s = alpha * r.powf(alpha - 1.0);
                Some(
                    x.iter()
                        .map(|v| if *v == 0.0 { 0.0 } else { s * v.signum() })
                        .collect(),
                )
            }
            CoreKind::NormPower {
                p: PNorm::Inf,
                alpha,
            } => {
                let (k, r) = x.iter().enumerate().fold((0, 0.0_f64), |(k, m), (i, v)| {
                    if v.abs() > m {
                        (i, v.abs())
                    } else {
                        (k, m)
                    }
                });
                let mut g = vec![0.0; x.len()];
                if r > 0.0 {
                    g[k] = alpha * r.powf(alpha - 1.0) * x[k].signum();
                }
                Some(g)
            }
            CoreKind::Quadratic { h, .. } => {
                let n = self.dim;
                Some((0..n).map(|i| dot(&h[i * n..(i + 1) * n], x)).collect())
            }
            CoreKind::Modulated {
                alpha,
                beta,
                direction,
            } => {
                let r = norm2(x);
                let s = dot(x, direction);
                let radial = alpha * r.powf(alpha - 2.0)
                    + beta * (alpha - 3.0) * r.powf(alpha - 5.0) * s * s * s;
                let along = 3.0 * beta * r.powf(alpha - 3.0) * s * s;
                Some(
                    x.iter()
                        .zip(direction)
                        .map(|(xi, di)| radial * xi + along * di)
                        .collect(),
                )
            }
            CoreKind::Linear { a } => Some(a.clone()),
        }
    }

    /// Central finite-difference gradient with step `1e-5·max(‖x‖, 1)`.
    pub fn finite_difference_gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = 1e-5 * norm2(x).max(1.0);
        let mut probe = x.to_vec();
        (0..self.dim)
            .map(|i| {
                probe[i] = x[i] + h;
                let up = self.value(&probe);
                probe[i] = x[i] - h;
                let down = self.value(&probe);
                probe[i] = x[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Analytic gradient if available, finite differences otherwise.
    pub fn gradient_or_fd(&self, x: &[f64]) -> Vec<f64> {
        self.gradient(x)
            .unwrap_or_else(|| self.finite_difference_gradient(x))
    }

    /// Canonical catalog key of the core.
    pub fn key(&self) -> String {
        match &self.kind {
            CoreKind::Sphere => "sphere".into(),
            CoreKind::NormPower { p, alpha } => format!("normpow:p={}:alpha={alpha}", p.label()),
            CoreKind::Quadratic { h, diagonal } => {
                let n = self.dim;
                if *diagonal {
                    let d: Vec<String> = (0..n).map(|i| h[i * n + i].to_string()).collect();
                    format!("quad:diag:{}", d.join(","))
                } else {
                    let rows: Vec<String> = h
                        .chunks(n)
                        .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
                        .collect();
                    format!("quad:full:{}", rows.join(";"))
                }
            }
            CoreKind::Modulated {
                alpha,
                beta,
                direction,
            } => {
                let mut key = format!("modulated:beta={beta}:alpha={alpha}");
                if direction[0] != 1.0 {
                    let d: Vec<String> = direction.iter().map(f64::to_string).collect();
                    key.push_str(&format!(":dir={}", d.join(",")));
                }
                key
            }
            CoreKind::Linear { a } => {
                if a[0] == 1.0 && a[1..].iter().all(|v| *v == 0.0) {
                    "linear".into()
                } else {
                    let d: Vec<String> = a.iter().map(f64::to_string).collect();
                    format!("linear:a={}", d.join(","))
                }
            }
        }
    }
}

fn quad_form(h: &[f64], diagonal: bool, x: &[f64]) -> f64 {
    let n = x.len();
    if diagonal {
        x.iter()
            .enumerate()
            .map(|(i, v)| h[i * n + i] * v * v)
            .sum()
    } else {
        (0..n).map(|i| x[i] * dot(&h[i * n..(i + 1) * n], x)).sum()
    }
}

fn check_positive_dim(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("dimension must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn check_degree(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "degree must be positive, got {alpha}"
        )))
    }
}

/// Strictly increasing map applied on top of the homogeneous core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonotoneTransform {
    Identity,
    Sqrt,
    /// `u ↦ ln(1 + u)`
    Log1p,
    /// `u ↦ u + 1{u > c}`, discontinuous at `c`.
    Step {
        threshold: f64,
    },
}

impl MonotoneTransform {
    pub const DEFAULT_STEP_THRESHOLD: f64 = 1.0;

    pub fn apply(&self, u: f64) -> f64 {
        match *self {
            MonotoneTransform::Identity => u,
            MonotoneTransform::Sqrt => u.sqrt(),
            MonotoneTransform::Log1p => u.ln_1p(),
            MonotoneTransform::Step { threshold } => {
                if u > threshold {
                    u + 1.0
                } else {
                    u
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            MonotoneTransform::Identity => "id".into(),
            MonotoneTransform::Sqrt => "sqrt".into(),
            MonotoneTransform::Log1p => "log1p".into(),
            MonotoneTransform::Step { threshold } => {
                if *threshold == Self::DEFAULT_STEP_THRESHOLD {
                    "step".into()
                } else {
                    format!("step@{threshold}")
                }
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "id" | "identity" => Some(Self::Identity),
            "sqrt" => Some(Self::Sqrt),
            "log1p" => Some(Self::Log1p),
            "step" => Some(Self::Step {
                threshold: Self::DEFAULT_STEP_THRESHOLD,
            }),
            _ => {
                let c = parse_real(s.strip_prefix("step@")?)?;
                Some(Self::Step { threshold: c })
            }
        }
    }

    pub fn all_defaults() -> [Self; 4] {
        [
            Self::Identity,
            Self::Sqrt,
            Self::Log1p,
            Self::Step {
                threshold: Self::DEFAULT_STEP_THRESHOLD,
            },
        ]
    }
}

/// `h(x) = g(f(x − x*))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveFunction {
    core: HomogeneousCore,
    transform: MonotoneTransform,
    optimum: Option<Vec<f64>>,
}

impl ObjectiveFunction {
    pub fn new(core: HomogeneousCore) -> Self {
        Self {
            core,
            transform: MonotoneTransform::Identity,
            optimum: None,
        }
    }

    pub fn with_transform(mut self, transform: MonotoneTransform) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_optimum(mut self, optimum: Vec<f64>) -> Result<Self> {
        check_dim(self.core.dim, optimum.len())?;
        self.optimum = if optimum.iter().all(|v| *v == 0.0) {
            None
        } else {
            Some(optimum)
        };
        Ok(self)
    }

    /// Parses a catalog key for dimension `n`.
    ///
    /// ```text
    /// key       := core (":g=" transform)? (":xopt=" list)?
    /// core      := "sphere"
    ///            | "normpow:p=" ("1" | "2" | "inf") (":alpha=" real)?
    ///            | "quad:diag:" list          (length must equal n)
    ///            | "quad:ell:" real           (eigenvalues log-spaced in [1, real])
    ///            | "quad:full:" list (";" list)*
    ///            | "modulated:beta=" real (":alpha=" real)? (":dir=" list)?
    ///            | "linear" (":a=" list)?
    /// transform := "id" | "sqrt" | "log1p" | "step" ("@" real)?
    /// ```
    ///
    /// `real` accepts `exp(..)`, `sqrt(..)` and ratios, `list` is comma
    /// separated. Missing `alpha` defaults to 2.
    pub fn from_key(key: &str, n: usize) -> Result<Self> {
        let bad = |msg: String| Error::config(format!("function key '{key}'"), msg);
        let mut tokens = key.split(':').peekable();
        let head = tokens.next().unwrap_or_default();

        let mut params: Vec<(&str, &str)> = Vec::new();
        let mut quad_spec: Option<(&str, &str)> = None;
        if head == "quad" {
            let kind = tokens
                .next()
                .ok_or_else(|| bad("missing quad kind".into()))?;
            let data = tokens
                .next()
                .ok_or_else(|| bad("missing quad data".into()))?;
            quad_spec = Some((kind, data));
        }
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| bad(format!("expected name=value, got '{tok}'")))?;
            params.push((k, v));
        }

        let mut transform = MonotoneTransform::Identity;
        let mut optimum = None;
        let mut p_norm = None;
        let mut alpha = 2.0;
        let mut beta = None;
        let mut vector = None;
        for (k, v) in params {
            match k {
                "g" => {
                    transform = MonotoneTransform::parse(v)
                        .ok_or_else(|| bad(format!("unknown transform '{v}'")))?
                }
                "xopt" => {
                    optimum = Some(parse_list(v).ok_or_else(|| bad(format!("bad list '{v}'")))?)
                }
                "p" if head == "normpow" => {
                    p_norm = Some(match v {
                        "1" => PNorm::One,
                        "2" => PNorm::Two,
                        "inf" => PNorm::Inf,
                        _ => return Err(bad(format!("p must be 1, 2 or inf, got '{v}'"))),
                    })
                }
                "alpha" if head == "normpow" || head == "modulated" => {
                    alpha = parse_real(v).ok_or_else(|| bad(format!("bad alpha '{v}'")))?
                }
                "beta" if head == "modulated" => {
                    beta = Some(parse_real(v).ok_or_else(|| bad(format!("bad beta '{v}'")))?)
                }
                "dir" if head == "modulated" => {
                    vector = Some(parse_list(v).ok_or_else(|| bad(format!("bad list '{v}'")))?)
                }
                "a" if head == "linear" => {
                    vector = Some(parse_list(v).ok_or_else(|| bad(format!("bad list '{v}'")))?)
                }
                _ => return Err(bad(format!("unexpected parameter '{k}'"))),
            }
        }

        let core = match head {
            "sphere" => HomogeneousCore::sphere(n),
            "normpow" => {
                let p = p_norm.ok_or_else(|| bad("normpow needs p=".into()))?;
                HomogeneousCore::norm_power(n, p, alpha)
            }
            "quad" => {
                let (kind, data) = quad_spec.expect("parsed above");
                match kind {
                    "diag" => {
                        let d =
                            parse_list(data).ok_or_else(|| bad(format!("bad list '{data}'")))?;
                        if d.len() != n {
                            return Err(bad(format!("diag has {} entries, n = {n}", d.len())));
                        }
                        HomogeneousCore::quadratic_diag(&d)
                    }
                    "ell" => {
                        let c =
                            parse_real(data).ok_or_else(|| bad(format!("bad real '{data}'")))?;
                        HomogeneousCore::ellipsoid(n, c)
                    }
                    "full" => {
                        let mut h = Vec::new();
                        for row in data.split(';') {
                            let r =
                                parse_list(row).ok_or_else(|| bad(format!("bad row '{row}'")))?;
                            if r.len() != n {
                                return Err(bad(format!("row has {} entries, n = {n}", r.len())));
                            }
                            h.extend(r);
                        }
                        HomogeneousCore::quadratic(n, h)
                    }
                    _ => return Err(bad(format!("unknown quad kind '{kind}'"))),
                }
            }
            "modulated" => {
                let b = beta.ok_or_else(|| bad("modulated needs beta=".into()))?;
                HomogeneousCore::modulated(n, alpha, b, vector)
            }
            "linear" => HomogeneousCore::linear(n, vector),
            _ => return Err(bad(format!("unknown function '{head}'"))),
        }
        .map_err(|e| bad(e.to_string()))?;

        let f = ObjectiveFunction::new(core).with_transform(transform);
        match optimum {
            Some(o) => f.with_optimum(o).map_err(|e| bad(e.to_string())),
            None => Ok(f),
        }
    }

    pub fn key(&self) -> String {
        let mut key = self.core.key();
        if self.transform != MonotoneTransform::Identity {
            key.push_str(&format!(":g={}", self.transform.label()));
        }
        if let Some(o) = &self.optimum {
            let s: Vec<String> = o.iter().map(f64::to_string).collect();
            key.push_str(&format!(":xopt={}", s.join(",")));
        }
        key
    }

    pub fn core(&self) -> &HomogeneousCore {
        &self.core
    }

    pub fn transform(&self) -> MonotoneTransform {
        self.transform
    }

    pub fn dim(&self) -> usize {
        self.core.dim
    }

    /// The optimum `x*` (zero vector by default).
    pub fn optimum(&self) -> Vec<f64> {
        self.optimum
            .clone()
            .unwrap_or_else(|| vec![0.0; self.core.dim])
    }

    /// `x − x*`.
    pub fn centered(&self, x: &[f64]) -> Vec<f64> {
        match &self.optimum {
            Some(o) => x.iter().zip(o).map(|(a, b)| a - b).collect(),
            None => x.to_vec(),
        }
    }

    /// `g(f(x − x*))`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.core.dim, x.len())?;
        Ok(self.value(x))
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let f = match &self.optimum {
            Some(_) => self.core.value(&self.centered(x)),
            None => self.core.value(x),
        };
        self.transform.apply(f)
    }

    /// `f(x − x*)`, the untransformed core value.
    pub(crate) fn core_value(&self, x: &[f64]) -> f64 {
        match &self.optimum {
            Some(_) => self.core.value(&self.centered(x)),
            None => self.core.value(x),
        }
    }
}

impl fmt::Display for ObjectiveFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Default catalog for dimension `n`: every core combined with every
/// default transform. Quadratics use `diag(1, 10, 1, 10, …)` and an
/// ellipsoid of condition 100; the modulated cores use `α = 2` with
/// `β = 0.5` (quasi-convex) and `β = 0.9` (sublevel sets not convex).
pub fn builtin_catalog(n: usize) -> Result<Vec<ObjectiveFunction>> {
    let diag: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 1.0 } else { 10.0 })
        .collect();
    let cores = vec![
        HomogeneousCore::sphere(n)?,
        HomogeneousCore::norm_power(n, PNorm::One, 2.0)?,
        HomogeneousCore::norm_power(n, PNorm::Two, 3.0)?,
        HomogeneousCore::norm_power(n, PNorm::Inf, 2.0)?,
        HomogeneousCore::quadratic_diag(&diag)?,
        HomogeneousCore::ellipsoid(n, 100.0)?,
        HomogeneousCore::modulated(n, 2.0, 0.5, None)?,
        HomogeneousCore::modulated(n, 2.0, 0.9, None)?,
    ];
    Ok(cores
        .into_iter()
        .flat_map(|c| {
            MonotoneTransform::all_defaults()
                .into_iter()
                .map(move |g| ObjectiveFunction::new(c.clone()).with_transform(g))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub trials: usize,
    pub failures: usize,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(check: &str, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            trials: 0,
            failures: 0,
            worst_residual: 0.0,
            tolerance,
            passed: true,
        }
    }

    fn record(&mut self, residual: f64) {
        self.trials += 1;
        if residual > self.worst_residual || residual.is_nan() {
            self.worst_residual = residual;
        }
        if !(residual <= self.tolerance) {
            self.failures += 1;
            self.passed = false;
        }
    }
}

/// Samples `(x, ρ)` with standard normal `x` and log-uniform `ρ ∈ [1e-3, 1e3]`
/// and checks `|f(ρx) − ρ^α f(x)| ≤ rtol·ρ^α f(x)`.
pub fn check_homogeneity<R: Rng + ?Sized>(
    core: &HomogeneousCore,
    trials: usize,
    rtol: f64,
    rng: &mut R,
) -> CheckReport {
    let mut report = CheckReport::new("homogeneity", rtol);
    let alpha = core.degree();
    let mut x = vec![0.0; core.dim()];
    for _ in 0..trials.max(1) {
        fill_normal(rng, &mut x);
        let rho = 10f64.powf(rng.random_range(-3.0..=3.0));
        let scaled: Vec<f64> = x.iter().map(|v| rho * v).collect();
        let expected = rho.powf(alpha) * core.value(&x);
        let residual = (core.value(&scaled) - expected).abs() / expected.abs();
        report.record(residual);
    }
    report
}

/// `|x·∇f(x) − α f(x)| / max(f(x), 1)`, using the analytic gradient when
/// available and central finite differences otherwise.
pub fn euler_residual(core: &HomogeneousCore, x: &[f64]) -> Result<f64> {
    check_dim(core.dim(), x.len())?;
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::Domain("Euler relation undefined at x = 0".into()));
    }
    let grad = core.gradient_or_fd(x);
    Ok(euler_from_gradient(core, x, &grad))
}

/// Same as [`euler_residual`] but always with the finite-difference gradient.
pub fn euler_residual_fd(core: &HomogeneousCore, x: &[f64]) -> Result<f64> {
    check_dim(core.dim(), x.len())?;
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::Domain("Euler relation undefined at x = 0".into()));
    }
    let grad = core.finite_difference_gradient(x);
    Ok(euler_from_gradient(core, x, &grad))
}

fn euler_from_gradient(core: &HomogeneousCore, x: &[f64], grad: &[f64]) -> f64 {
    let f = core.value(x);
    (dot(x, grad) - core.degree() * f).abs() / f.abs().max(1.0)
}

/// Euler residual at `points` standard normal points.
pub fn check_euler<R: Rng + ?Sized>(
    core: &HomogeneousCore,
    points: usize,
    tol: f64,
    rng: &mut R,
) -> CheckReport {
    let mut report = CheckReport::new("euler", tol);
    let mut x = vec![0.0; core.dim()];
    for _ in 0..points.max(1) {
        fill_normal(rng, &mut x);
        report.record(euler_residual(core, &x).unwrap_or(f64::NAN));
    }
    report
}

/// Checks `f(x) > 0` on random non-zero points and `f(0) = 0`.
pub fn check_positivity<R: Rng + ?Sized>(
    core: &HomogeneousCore,
    trials: usize,
    rng: &mut R,
) -> CheckReport {
    let mut report = CheckReport::new("positivity", 0.0);
    report.record(core.value(&vec![0.0; core.dim()]).abs());
    let mut x = vec![0.0; core.dim()];
    for _ in 0..trials.max(1) {
        fill_normal(rng, &mut x);
        report.record(if core.value(&x) > 0.0 { 0.0 } else { 1.0 });
    }
    report
}

/// Sampling estimate of the extremes of `f` on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereBounds {
    /// Estimate of `min f` on `‖x‖ = 1`.
    pub lower: f64,
    /// Estimate of `max f` on `‖x‖ = 1`.
    pub upper: f64,
    pub samples: usize,
}

/// Min and max of `f` over `samples` uniform points on the unit sphere. This
/// is a sampling estimate: the true minimum may be lower, the true maximum
/// higher.
pub fn estimate_sphere_bounds<R: Rng + ?Sized>(
    core: &HomogeneousCore,
    samples: usize,
    rng: &mut R,
) -> SphereBounds {
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for _ in 0..samples.max(1) {
        let u = random_on_sphere(rng, core.dim(), 1.0);
        let v = core.value(&u);
        lower = lower.min(v);
        upper = upper.max(v);
    }
    SphereBounds {
        lower,
        upper,
        samples: samples.max(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn evaluate_examples() {
        let s = ObjectiveFunction::new(HomogeneousCore::sphere(2).unwrap());
        assert_eq!(s.evaluate(&[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(s.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(
            s.clone()
                .with_transform(MonotoneTransform::Sqrt)
                .evaluate(&[3.0, 4.0])
                .unwrap(),
            5.0
        );
        assert!(matches!(
            s.evaluate(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn quadratic_examples() {
        let q = HomogeneousCore::quadratic_diag(&[1.0, 1.0]).unwrap();
        assert_eq!(q.value(&[1.0, 1.0]), 1.0);
        let q = HomogeneousCore::quadratic_diag(&[1.0, 10.0]).unwrap();
        assert_eq!(q.value(&[0.0, 1.0]), 5.0);
        assert_eq!(q.value(&[2.0, 2.0]), 22.0);
        assert_eq!(4.0 * q.value(&[1.0, 1.0]), 22.0);
    }

    #[test]
    fn full_quadratic_matches_diag_form() {
        let full = HomogeneousCore::quadratic(2, vec![2.0, 1.0, 1.0, 3.0]).unwrap();
        // ½ (2·1 + 2·1·2 + 3·4) = 9
        assert_eq!(full.value(&[1.0, 2.0]), 9.0);
    }

    #[test]
    fn construction_errors() {
        assert!(HomogeneousCore::quadratic(2, vec![1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(HomogeneousCore::quadratic(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(HomogeneousCore::quadratic_diag(&[1.0, -1.0]).is_err());
        assert!(HomogeneousCore::modulated(3, 2.0, 1.0, None).is_err());
        assert!(HomogeneousCore::modulated(3, 2.0, -1.5, None).is_err());
        assert!(HomogeneousCore::norm_power(3, PNorm::One, 0.0).is_err());
        assert!(HomogeneousCore::sphere(0).is_err());
    }

    #[test]
    fn modulated_beta_zero_is_norm_power() {
        let m = HomogeneousCore::modulated(3, 2.5, 0.0, None).unwrap();
        let x = [0.3, -1.2, 2.0];
        let expected = norm2(&x).powf(2.5);
        assert!((m.value(&x) - expected).abs() <= 1e-15 * expected);
    }

    /// Largest `f(midpoint)` over chords of the level set `{f = 1}` in the
    /// plane; a value above 1 means the sublevel set is not convex.
    fn worst_chord_midpoint(core: &HomogeneousCore) -> f64 {
        let boundary: Vec<[f64; 2]> = (0..720)
            .map(|i| {
                let th = i as f64 * std::f64::consts::PI / 360.0;
                let u = [th.cos(), th.sin()];
                let r = core.value(&u).powf(-1.0 / core.degree());
                [r * u[0], r * u[1]]
            })
            .collect();
        let mut worst = 0.0_f64;
        for a in &boundary {
            for b in &boundary {
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                worst = worst.max(core.value(&mid));
            }
        }
        worst
    }

    #[test]
    fn modulation_strength_controls_quasi_convexity() {
        let strong = HomogeneousCore::modulated(2, 2.0, 0.9, None).unwrap();
        assert!(worst_chord_midpoint(&strong) > 1.0 + 1e-6);
        let mild = HomogeneousCore::modulated(2, 2.0, 0.5, None).unwrap();
        assert!(worst_chord_midpoint(&mild) <= 1.0 + 1e-9);
    }

    #[test]
    fn homogeneity_examples() {
        let mut rng = stream_rng(1, 0);
        let r = check_homogeneity(&HomogeneousCore::sphere(5).unwrap(), 100, 1e-12, &mut rng);
        assert!(r.passed && r.worst_residual < 1e-14, "{r:?}");
        let m = HomogeneousCore::modulated(4, 2.0, 0.5, None).unwrap();
        let r = check_homogeneity(&m, 1000, 1e-10, &mut rng);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn euler_examples() {
        let s = HomogeneousCore::sphere(2).unwrap();
        assert_eq!(euler_residual(&s, &[3.0, 4.0]).unwrap(), 0.0);
        let q = HomogeneousCore::quadratic_diag(&[1.0, 10.0]).unwrap();
        assert_eq!(euler_residual(&q, &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            euler_residual(&s, &[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn modulated_fd_euler_and_gradient_agree() {
        let m = HomogeneousCore::modulated(5, 2.0, 0.5, None).unwrap();
        let mut rng = stream_rng(2, 0);
        let mut x = vec![0.0; 5];
        for _ in 0..200 {
            fill_normal(&mut rng, &mut x);
            assert!(euler_residual_fd(&m, &x).unwrap() <= 1e-6);
            let a = m.gradient(&x).unwrap();
            let fd = m.finite_difference_gradient(&x);
            for (u, v) in a.iter().zip(&fd) {
                assert!((u - v).abs() <= 1e-6 * (1.0 + u.abs()), "{a:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn ln_value_matches_log_of_value() {
        let mut rng = stream_rng(9, 0);
        for f in builtin_catalog(4).unwrap().iter().step_by(4) {
            let mut x = vec![0.0; 4];
            fill_normal(&mut rng, &mut x);
            let a = f.core().ln_value(&x);
            let b = f.core().value(&x).ln();
            assert!((a - b).abs() < 1e-12, "{}: {a} vs {b}", f.key());
        }
        let s = HomogeneousCore::sphere(3).unwrap();
        assert!((s.ln_value(&[1e200, 0.0, 0.0]) - 400.0 * 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn sphere_bounds_examples() {
        let mut rng = stream_rng(4, 0);
        let b = estimate_sphere_bounds(&HomogeneousCore::sphere(3).unwrap(), 100, &mut rng);
        assert!((b.lower - 1.0).abs() < 1e-15 && (b.upper - 1.0).abs() < 1e-15);
        let m = HomogeneousCore::modulated(2, 2.0, 0.5, None).unwrap();
        let b = estimate_sphere_bounds(&m, 100_000, &mut rng);
        assert!(
            (b.lower - 0.5).abs() < 1e-3 && (b.upper - 1.5).abs() < 1e-3,
            "{b:?}"
        );
    }

    #[test]
    fn transforms_are_increasing() {
        let mut rng = stream_rng(5, 0);
        let mut pts: Vec<f64> = (0..1000)
            .map(|_| 10f64.powf(rng.random_range(-8.0..4.0)))
            .collect();
        pts.push(1.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        for g in MonotoneTransform::all_defaults() {
            for w in pts.windows(2) {
                assert!(g.apply(w[0]) < g.apply(w[1]), "{} at {:?}", g.label(), w);
            }
        }
    }

    #[test]
    fn key_round_trip() {
        for key in [
            "sphere",
            "sphere:g=sqrt",
            "normpow:p=1:alpha=2",
            "normpow:p=inf:alpha=3:g=log1p",
            "quad:diag:1,10",
            "quad:full:2,1;1,3",
            "modulated:beta=0.5:alpha=2",
            "linear",
            "sphere:g=step@2.5",
            "sphere:xopt=1,-1",
        ] {
            let f = ObjectiveFunction::from_key(key, 2).unwrap();
            assert_eq!(f.key(), key);
            assert_eq!(ObjectiveFunction::from_key(&f.key(), 2).unwrap(), f);
        }
        let e = ObjectiveFunction::from_key("quad:ell:exp(2)", 3).unwrap();
        assert!((e.core().value(&[0.0, 0.0, 1.0]) - 0.5 * 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn bad_keys() {
        for key in [
            "",
            "cube",
            "normpow:alpha=2",
            "normpow:p=3",
            "quad:diag:1,2,3",
            "quad:diag:1,-2",
            "modulated:alpha=2",
            "modulated:beta=1",
            "sphere:g=cube",
            "sphere:alpha=3",
            "sphere:xopt=1",
        ] {
            assert!(
                matches!(
                    ObjectiveFunction::from_key(key, 2),
                    Err(Error::Config { .. })
                ),
                "{key}"
            );
        }
    }

    #[test]
    fn translated_evaluation() {
        let f = ObjectiveFunction::from_key("sphere:xopt=1,2", 2).unwrap();
        assert_eq!(f.evaluate(&[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(f.evaluate(&[4.0, 6.0]).unwrap(), 25.0);
    }

    #[test]
    fn nonsmooth_norm_gradients_match_differences() {
        let mut rng = crate::rng::stream_rng(5, 0);
        for p in [PNorm::One, PNorm::Inf] {
            let c = HomogeneousCore::norm_power(6, p, 2.0).unwrap();
            for _ in 0..200 {
                let mut x = vec![0.0; 6];
                fill_normal(&mut rng, &mut x);
                // keep away from the kinks, where differences straddle them
                if x.iter().any(|v| v.abs() < 1e-3) {
                    continue;
                }
                let g = c.gradient(&x).unwrap();
                let fd = c.finite_difference_gradient(&x);
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{p:?} {a} {b}");
                }
            }
        }
        // ℓ1 example by hand: f = (|1| + |-2|)² = 9, ∇f = 2·3·(1, -1)
        let c = HomogeneousCore::norm_power(2, PNorm::One, 2.0).unwrap();
        assert_eq!(c.gradient(&[1.0, -2.0]).unwrap(), vec![6.0, -6.0]);
    }
}
