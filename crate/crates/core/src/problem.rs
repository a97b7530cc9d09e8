//! Problem definition: convex flux, monotone initial-data family indexed by
//! the random variable `z`, truncated spatial domain and far-field states.
//!
//! Initial data are supplied analytically together with their first three
//! `x`-derivatives. The hodograph engine works with `x` as a function of `u`,
//! and every derivative it needs is assembled from these by the chain rule.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::roots;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("non-finite value from `{closure}` at x = {x}, z = {z}")]
    NonFinite { closure: &'static str, x: f64, z: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("characteristic speed {0} is outside the range of F' on [-1, 1]")]
    SpeedOutOfRange(f64),
}

/// Convex flux `F` with derivatives through third order.
///
/// `inverse_speed` is the inverse `G` of `F'`. The provided implementation
/// solves `F'(u) = w` on `[-1, 1]` by safeguarded Newton iteration.
pub trait Flux: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;
    fn flux(&self, u: f64) -> f64;
    fn speed(&self, u: f64) -> f64;
    fn d2(&self, u: f64) -> f64;
    fn d3(&self, u: f64) -> f64;

    /// Fourth derivative; defaults to a central difference of [`Flux::d3`].
    fn d4(&self, u: f64) -> f64 {
        let h = 1e-4;
        (self.d3(u + h) - self.d3(u - h)) / (2.0 * h)
    }

    /// Rankine–Hugoniot speed of a jump from `left` to `right`.
    fn shock_speed(&self, left: f64, right: f64) -> f64 {
        let jump = left - right;
        if jump.abs() < 1e-9 {
            // second-order midpoint rule; the quotient below loses every digit here
            let mid = 0.5 * (left + right);
            return self.speed(mid) + self.d3(mid) * jump * jump / 24.0;
        }
        (self.flux(left) - self.flux(right)) / jump
    }

    fn inverse_speed(&self, w: f64) -> Result<f64, ProblemError> {
        let (lo, hi) = (self.speed(-1.0), self.speed(1.0));
        if !(lo..=hi).contains(&w) {
            return Err(ProblemError::SpeedOutOfRange(w));
        }
        roots::newton_bisect(|u| (self.speed(u) - w, self.d2(u)), -1.0, 1.0, 1e-12)
            .ok_or(ProblemError::SpeedOutOfRange(w))
    }
}

/// `F(u) = u²/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Burgers;

impl Flux for Burgers {
    fn name(&self) -> &str {
        "burgers"
    }
    fn flux(&self, u: f64) -> f64 {
        0.5 * u * u
    }
    fn speed(&self, u: f64) -> f64 {
        u
    }
    fn d2(&self, _u: f64) -> f64 {
        1.0
    }
    fn d3(&self, _u: f64) -> f64 {
        0.0
    }
    fn d4(&self, _u: f64) -> f64 {
        0.0
    }
    fn shock_speed(&self, left: f64, right: f64) -> f64 {
        0.5 * (left + right)
    }
    fn inverse_speed(&self, w: f64) -> Result<f64, ProblemError> {
        Ok(w)
    }
}

/// `F(u) = u²/2 + κu³/6`, strictly convex on `[-1, 1]` for `|κ| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicFlux {
    pub kappa: f64,
}

impl CubicFlux {
    pub fn new(kappa: f64) -> Result<Self, ProblemError> {
        if !(kappa.abs() < 1.0) {
            return Err(ProblemError::Config(format!(
                "cubic flux needs |kappa| < 1 for convexity on [-1, 1], got {kappa}"
            )));
        }
        Ok(Self { kappa })
    }
}

impl Flux for CubicFlux {
    fn name(&self) -> &str {
        "cubic"
    }
    fn flux(&self, u: f64) -> f64 {
        0.5 * u * u + self.kappa * u * u * u / 6.0
    }
    fn speed(&self, u: f64) -> f64 {
        u + 0.5 * self.kappa * u * u
    }
    fn d2(&self, u: f64) -> f64 {
        1.0 + self.kappa * u
    }
    fn d3(&self, _u: f64) -> f64 {
        self.kappa
    }
    fn d4(&self, _u: f64) -> f64 {
        0.0
    }
}

/// A family of initial profiles `u0(x, z)`, decreasing in `x`, with one
/// inflection point.
///
/// The `z`-derivatives are only needed for sensitivity runs; the defaults
/// difference the value and slope in `z`.
pub trait InitialData: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, x: f64, z: f64) -> f64;
    fn dx(&self, x: f64, z: f64) -> f64;
    fn dxx(&self, x: f64, z: f64) -> f64;
    fn dxxx(&self, x: f64, z: f64) -> f64;

    fn dz(&self, x: f64, z: f64) -> f64 {
        let h = 1e-5;
        (self.value(x, z + h) - self.value(x, z - h)) / (2.0 * h)
    }

    fn dxz(&self, x: f64, z: f64) -> f64 {
        let h = 1e-5;
        (self.dx(x, z + h) - self.dx(x, z - h)) / (2.0 * h)
    }
}

/// `sech²(y)` without the cancellation of `1 - tanh²(y)` in the tails.
fn sech2(y: f64) -> f64 {
    let c = y.cosh();
    1.0 / (c * c)
}

/// Logistic front `u0(x) = (1 - e^{x-c}) / (1 + e^{x-c}) = -tanh((x - c)/2)`,
/// independent of `z`. With `center = 0` this is the base profile, whose
/// shock emerges at `t* = 2` from `(u*, x*) = (0, 0)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogisticFront {
    pub center: f64,
}

impl InitialData for LogisticFront {
    fn name(&self) -> &str {
        "logistic"
    }
    fn value(&self, x: f64, _z: f64) -> f64 {
        -(0.5 * (x - self.center)).tanh()
    }
    fn dx(&self, x: f64, _z: f64) -> f64 {
        -0.5 * sech2(0.5 * (x - self.center))
    }
    fn dxx(&self, x: f64, z: f64) -> f64 {
        self.value(x, z) * self.dx(x, z)
    }
    fn dxxx(&self, x: f64, z: f64) -> f64 {
        let (v, d) = (self.value(x, z), self.dx(x, z));
        d * d + v * v * d
    }
    fn dz(&self, _x: f64, _z: f64) -> f64 {
        0.0
    }
    fn dxz(&self, _x: f64, _z: f64) -> f64 {
        0.0
    }
}

/// Skewed logistic family
///
/// `u0(x, z) = v - amplitude·(v + pivot)(1 - v²)·z`, `v = -tanh((x - drift·z³)/2)`.
///
/// The defaults (`0.2`, `0.5`, `3`) are the benchmark family used by the
/// `burgers-paper5` preset. `u0` stays decreasing whenever
/// `amplitude·|z| < 1/3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewedLogistic {
    pub amplitude: f64,
    pub pivot: f64,
    pub drift: f64,
}

impl Default for SkewedLogistic {
    fn default() -> Self {
        Self { amplitude: 0.2, pivot: 0.5, drift: 3.0 }
    }
}

/// Values and x-derivatives of the inner logistic `v`.
struct Inner {
    v: f64,
    v1: f64,
    v2: f64,
    v3: f64,
}

impl SkewedLogistic {
    fn inner(&self, x: f64, z: f64) -> Inner {
        let y = 0.5 * (x - self.drift * z * z * z);
        let v = -y.tanh();
        let v1 = -0.5 * sech2(y);
        let v2 = v * v1;
        let v3 = v1 * v1 + v * v2;
        Inner { v, v1, v2, v3 }
    }

    /// Outer map `g(v)` and its first three derivatives in `v`.
    fn outer(&self, v: f64, z: f64) -> [f64; 4] {
        let s = self.amplitude * z;
        let p = self.pivot;
        let g = v - s * (v + p) * (1.0 - v * v);
        let g1 = 1.0 - s * (1.0 - 2.0 * p * v - 3.0 * v * v);
        let g2 = s * (2.0 * p + 6.0 * v);
        let g3 = 6.0 * s;
        [g, g1, g2, g3]
    }
}

impl InitialData for SkewedLogistic {
    fn name(&self) -> &str {
        "skewed-logistic"
    }
    fn value(&self, x: f64, z: f64) -> f64 {
        self.outer(self.inner(x, z).v, z)[0]
    }
    fn dx(&self, x: f64, z: f64) -> f64 {
        let i = self.inner(x, z);
        self.outer(i.v, z)[1] * i.v1
    }
    fn dxx(&self, x: f64, z: f64) -> f64 {
        let i = self.inner(x, z);
        let g = self.outer(i.v, z);
        g[2] * i.v1 * i.v1 + g[1] * i.v2
    }
    fn dxxx(&self, x: f64, z: f64) -> f64 {
        let i = self.inner(x, z);
        let g = self.outer(i.v, z);
        g[3] * i.v1.powi(3) + 3.0 * g[2] * i.v1 * i.v2 + g[1] * i.v3
    }
    fn dz(&self, x: f64, z: f64) -> f64 {
        let i = self.inner(x, z);
        let g = self.outer(i.v, z);
        let dv_dz = -3.0 * self.drift * z * z * i.v1;
        -self.amplitude * (i.v + self.pivot) * (1.0 - i.v * i.v) + g[1] * dv_dz
    }
    fn dxz(&self, x: f64, z: f64) -> f64 {
        let i = self.inner(x, z);
        let g = self.outer(i.v, z);
        let shift_rate = -3.0 * self.drift * z * z;
        // explicit z-dependence of g'(v)
        let dg1_dz = -self.amplitude * (1.0 - 2.0 * self.pivot * i.v - 3.0 * i.v * i.v);
        (dg1_dz + g[2] * i.v1 * shift_rate) * i.v1 + g[1] * i.v2 * shift_rate
    }
}

type Profile = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Initial data assembled from user closures.
#[derive(Clone)]
pub struct FnInitialData {
    pub label: String,
    pub value: Arc<Profile>,
    pub dx: Arc<Profile>,
    pub dxx: Arc<Profile>,
    pub dxxx: Arc<Profile>,
}

impl fmt::Debug for FnInitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnInitialData").field("label", &self.label).finish_non_exhaustive()
    }
}

impl InitialData for FnInitialData {
    fn name(&self) -> &str {
        &self.label
    }
    fn value(&self, x: f64, z: f64) -> f64 {
        (self.value)(x, z)
    }
    fn dx(&self, x: f64, z: f64) -> f64 {
        (self.dx)(x, z)
    }
    fn dxx(&self, x: f64, z: f64) -> f64 {
        (self.dxx)(x, z)
    }
    fn dxxx(&self, x: f64, z: f64) -> f64 {
        (self.dxxx)(x, z)
    }
}

/// The full deterministic-plus-random problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub flux: Arc<dyn Flux>,
    pub init: Arc<dyn InitialData>,
    /// Half-width `R` of the truncated domain `[-R, R]`.
    pub half_width: f64,
    pub z_range: (f64, f64),
    pub label: String,
}

impl ProblemSpec {
    pub fn new(
        flux: Arc<dyn Flux>,
        init: Arc<dyn InitialData>,
        half_width: f64,
        z_range: (f64, f64),
        label: impl Into<String>,
    ) -> Result<Self, ProblemError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(ProblemError::Config(format!("half-width must be positive, got {half_width}")));
        }
        if !(z_range.0 < z_range.1) {
            return Err(ProblemError::Config(format!("degenerate z range {z_range:?}")));
        }
        Ok(Self { flux, init, half_width, z_range, label: label.into() })
    }

    /// Burgers flux with the skewed logistic family on `[-15, 15]`.
    pub fn paper5() -> Self {
        Self::new(Arc::new(Burgers), Arc::new(SkewedLogistic::default()), 15.0, (-1.0, 1.0), "burgers-paper5")
            .expect("preset is valid")
    }

    /// Burgers flux with the `z`-independent base profile `-tanh(x/2)`.
    pub fn base() -> Self {
        Self::new(Arc::new(Burgers), Arc::new(LogisticFront::default()), 15.0, (-1.0, 1.0), "burgers-base")
            .expect("preset is valid")
    }
}

/// Samples `u(t, x_k)` on the uniform grid `x_k = x0 + k·dx`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridField {
    pub t: f64,
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.dx
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.x(k))
    }

    /// Whether two fields live on the same grid.
    pub fn same_grid(&self, other: &GridField) -> bool {
        self.values.len() == other.values.len()
            && (self.x0 - other.x0).abs() <= 1e-12 * (1.0 + self.x0.abs())
            && (self.dx - other.dx).abs() <= 1e-14 * self.dx
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Minimum grid size accepted by the solver (the WENO stencil width plus one).
pub const MIN_GRID_POINTS: usize = 7;

/// Initial field at `t = 0` on `nx` points spanning `[-R, R]`.
pub fn sample_initial(spec: &ProblemSpec, z: f64, nx: usize) -> Result<GridField, ProblemError> {
    if nx < MIN_GRID_POINTS {
        return Err(ProblemError::Config(format!("nx = {nx} is below the stencil width {MIN_GRID_POINTS}")));
    }
    let x0 = -spec.half_width;
    let dx = 2.0 * spec.half_width / (nx - 1) as f64;
    let values = (0..nx)
        .map(|k| {
            let x = x0 + k as f64 * dx;
            let u = spec.init.value(x, z);
            if u.is_finite() {
                Ok(u)
            } else {
                Err(ProblemError::NonFinite { closure: "u0", x, z })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridField { t: 0.0, x0, dx, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Assumption {
    /// `u0' < 0` everywhere on the truncated domain.
    Monotone,
    /// `u0''` changes sign exactly once.
    UniqueInflection,
    /// `u0''' > 0` at the inflection point.
    PositiveThirdDerivative,
    /// `u0(-R) ≈ 1` and `u0(R) ≈ -1`.
    BoundaryStates,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    /// Sample points where the check failed (truncated to the first 32).
    pub offending_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub z: f64,
    pub checks: Vec<AssumptionCheck>,
    /// Location of the inflection point when exactly one was found.
    pub inflection: Option<f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, which: Assumption) -> &AssumptionCheck {
        self.checks.iter().find(|c| c.assumption == which).expect("every assumption is checked")
    }

    /// All checks except the far-field states; these are what the shock
    /// analysis depends on.
    pub fn structure_ok(&self) -> bool {
        self.checks.iter().filter(|c| c.assumption != Assumption::BoundaryStates).all(|c| c.passed)
    }
}

/// Far-field tolerance for the boundary-state check.
pub const BOUNDARY_STATE_TOL: f64 = 1e-6;

const MAX_OFFENDERS: usize = 32;

/// Sample-based check of the structural assumptions on `u0(·, z)`.
pub fn validate_problem(spec: &ProblemSpec, z: f64, n_check: usize) -> Result<ValidationReport, ProblemError> {
    if n_check < 3 {
        return Err(ProblemError::Config(format!("n_check = {n_check} must be at least 3")));
    }
    let init = spec.init.as_ref();
    let r = spec.half_width;
    let h = 2.0 * r / (n_check - 1) as f64;
    let eval = |closure: &'static str, f: &dyn Fn(f64, f64) -> f64, x: f64| {
        let v = f(x, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ProblemError::NonFinite { closure, x, z })
        }
    };

    let xs: Vec<f64> = (0..n_check).map(|k| -r + k as f64 * h).collect();
    let mut slopes = Vec::with_capacity(n_check);
    let mut curvatures = Vec::with_capacity(n_check);
    for &x in &xs {
        slopes.push(eval("du0", &|x, z| init.dx(x, z), x)?);
        curvatures.push(eval("d2u0", &|x, z| init.dxx(x, z), x)?);
    }

    let offenders: Vec<f64> =
        xs.iter().zip(&slopes).filter(|(_, &s)| !(s < 0.0)).map(|(&x, _)| x).take(MAX_OFFENDERS).collect();
    let monotone =
        AssumptionCheck { assumption: Assumption::Monotone, passed: offenders.is_empty(), offending_x: offenders };

    // sign changes of u0'', ignoring exact zeros
    let mut changes = Vec::new();
    let mut last: Option<(f64, bool)> = None;
    for (&x, &c) in xs.iter().zip(&curvatures) {
        if c == 0.0 {
            continue;
        }
        let positive = c > 0.0;
        if let Some((x_prev, p_prev)) = last {
            if p_prev != positive {
                changes.push((x_prev, x));
            }
        }
        last = Some((x, positive));
    }
    let inflection = if changes.len() == 1 {
        let (lo, hi) = changes[0];
        roots::bisect(|x| init.dxx(x, z), lo, hi, 1e-13)
    } else {
        None
    };
    let unique = AssumptionCheck {
        assumption: Assumption::UniqueInflection,
        passed: changes.len() == 1,
        offending_x: changes.iter().map(|&(a, b)| 0.5 * (a + b)).take(MAX_OFFENDERS).collect(),
    };

    let third = match inflection {
        Some(xi) => {
            let d3 = eval("d3u0", &|x, z| init.dxxx(x, z), xi)?;
            AssumptionCheck {
                assumption: Assumption::PositiveThirdDerivative,
                passed: d3 > 0.0,
                offending_x: if d3 > 0.0 { vec![] } else { vec![xi] },
            }
        }
        None => AssumptionCheck { assumption: Assumption::PositiveThirdDerivative, passed: false, offending_x: vec![] },
    };

    let left = eval("u0", &|x, z| init.value(x, z), -r)?;
    let right = eval("u0", &|x, z| init.value(x, z), r)?;
    let mut bad_ends = Vec::new();
    if (left - 1.0).abs() > BOUNDARY_STATE_TOL {
        bad_ends.push(-r);
    }
    if (right + 1.0).abs() > BOUNDARY_STATE_TOL {
        bad_ends.push(r);
    }
    let boundary =
        AssumptionCheck { assumption: Assumption::BoundaryStates, passed: bad_ends.is_empty(), offending_x: bad_ends };

    Ok(ValidationReport { z, checks: vec![monotone, unique, third, boundary], inflection })
}
