//! Hodograph-plane shock engine.
//!
//! While the solution is monotone it can be written as `x(t, u) = x_i(u) +
//! F'(u) t`. A shock is a flat stretch `[u2, u1]` of that graph; its ends obey
//! the singular ODE system
//!
//! ```text
//! du1/dt = (F'(u1) - s) / (f(u1) - F''(u1) t)
//! du2/dt = (F'(u2) - s) / (f(u2) - F''(u2) t)
//! dxc/dt = s = (F(u1) - F(u2)) / (u1 - u2)
//! ```
//!
//! with `f = -x_i'`. The system is started just after the emergence time from
//! its square-root asymptotics and integrated with [`crate::ode`].

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ode::{self, Inadmissible, OdeError, Tolerances};
use crate::problem::{Flux, InitialData};
use crate::roots::newton_bisect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HodographError {
    #[error("u = {0} lies outside (-1, 1)")]
    Domain(f64),
    #[error("could not invert the initial data at u = {0}")]
    Inversion(f64),
    #[error("structural assumption violated: {0}")]
    Assumption(String),
    #[error("shock boundary reached the singular curve near t = {t}")]
    Singular { t: f64 },
    #[error("track does not cover t = {t} (covers [{start}, {end}])")]
    NotCovered { t: f64, start: f64, end: f64 },
    #[error("characteristic root not bracketed at x = {x}, t = {t}")]
    Unbracketed { x: f64, t: f64 },
    #[error("z-sensitivities are not available for this profile")]
    NoSensitivity,
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// `x_i` and `f = -x_i'` with two more u-derivatives, at one value of `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub x: f64,
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

/// Partial z-derivatives of `x_i` and `f` at fixed `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZJet {
    pub dz_x: f64,
    pub dz_f: f64,
}

/// Initial data seen on the hodograph plane, `u -> x_i(u)`.
pub trait InverseProfile: fmt::Debug + Send + Sync {
    fn jet(&self, u: f64) -> Result<Jet, HodographError>;

    fn z_jet(&self, _u: f64) -> Result<ZJet, HodographError> {
        Err(HodographError::NoSensitivity)
    }

    fn x_of_u(&self, u: f64) -> Result<f64, HodographError> {
        Ok(self.jet(u)?.x)
    }

    fn f(&self, u: f64) -> Result<f64, HodographError> {
        Ok(self.jet(u)?.f)
    }
}

/// Numerical inverse of an [`InitialData`] member at fixed `z`.
#[derive(Debug, Clone)]
pub struct InvertedData {
    pub init: Arc<dyn InitialData>,
    pub z: f64,
}

pub fn invert_initial(init: Arc<dyn InitialData>, z: f64) -> InvertedData {
    InvertedData { init, z }
}

const INVERSION_REACH: f64 = 1e3;

impl InvertedData {
    /// Solve `u0(x, z) = u` for `x`.
    pub fn locate(&self, u: f64) -> Result<f64, HodographError> {
        if !(u > -1.0 && u < 1.0) {
            return Err(HodographError::Domain(u));
        }
        let g = |x: f64| self.init.value(x, self.z) - u;
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut width = 2.0;
        while g(lo) < 0.0 {
            lo -= width;
            width *= 2.0;
            if lo < -INVERSION_REACH {
                return Err(HodographError::Inversion(u));
            }
        }
        width = 2.0;
        while g(hi) > 0.0 {
            hi += width;
            width *= 2.0;
            if hi > INVERSION_REACH {
                return Err(HodographError::Inversion(u));
            }
        }
        newton_bisect(|x| (g(x), self.init.dx(x, self.z)), lo, hi, 1e-14).ok_or(HodographError::Inversion(u))
    }
}

impl InverseProfile for InvertedData {
    fn jet(&self, u: f64) -> Result<Jet, HodographError> {
        let x = self.locate(u)?;
        let z = self.z;
        let p = self.init.dx(x, z);
        let p2 = self.init.dxx(x, z);
        let p3 = self.init.dxxx(x, z);
        if !(p < 0.0) {
            return Err(HodographError::Assumption(format!("u0 not decreasing at x = {x}")));
        }
        Ok(Jet { x, f: -1.0 / p, df: p2 / p.powi(3), d2f: p3 / p.powi(4) - 3.0 * p2 * p2 / p.powi(5) })
    }

    fn z_jet(&self, u: f64) -> Result<ZJet, HodographError> {
        let x = self.locate(u)?;
        let z = self.z;
        let p = self.init.dx(x, z);
        let uz = self.init.dz(x, z);
        let uxz = self.init.dxz(x, z);
        let uxx = self.init.dxx(x, z);
        Ok(ZJet { dz_x: -uz / p, dz_f: (uxz - uxx * uz / p) / (p * p) })
    }
}

/// Synthetic profile with polynomial `f(u) = Σ c_k (u - u*)^k`.
///
/// `dz_coeffs` give the z-derivative of each coefficient; `x_i` is the
/// antiderivative of `-f` through `(u*, x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialProfile {
    pub coeffs: Vec<f64>,
    pub dz_coeffs: Vec<f64>,
    pub u_star: f64,
    pub x_star: f64,
}

impl PolynomialProfile {
    /// `f(u) = a u^2 + b` centred at the origin.
    pub fn quadratic(a: f64, b: f64) -> Self {
        Self { coeffs: vec![b, 0.0, a], dz_coeffs: vec![0.0; 3], u_star: 0.0, x_star: 0.0 }
    }

    pub fn with_dz(mut self, dz_coeffs: Vec<f64>) -> Self {
        self.dz_coeffs = dz_coeffs;
        self
    }

    fn poly(c: &[f64], v: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ck| acc * v + ck)
    }

    fn antiderivative(c: &[f64], v: f64) -> f64 {
        c.iter().enumerate().rev().fold(0.0, |acc, (k, &ck)| acc * v + ck / (k + 1) as f64) * v
    }
}

impl InverseProfile for PolynomialProfile {
    fn jet(&self, u: f64) -> Result<Jet, HodographError> {
        if !(u > -1.0 && u < 1.0) {
            return Err(HodographError::Domain(u));
        }
        let v = u - self.u_star;
        let d1: Vec<f64> = self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect();
        let d2: Vec<f64> = d1.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect();
        Ok(Jet {
            x: self.x_star - Self::antiderivative(&self.coeffs, v),
            f: Self::poly(&self.coeffs, v),
            df: Self::poly(&d1, v),
            d2f: Self::poly(&d2, v),
        })
    }

    fn z_jet(&self, u: f64) -> Result<ZJet, HodographError> {
        if !(u > -1.0 && u < 1.0) {
            return Err(HodographError::Domain(u));
        }
        let v = u - self.u_star;
        Ok(ZJet { dz_x: -Self::antiderivative(&self.dz_coeffs, v), dz_f: Self::poly(&self.dz_coeffs, v) })
    }
}

/// Where and when the first shock appears.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalData {
    pub u_star: f64,
    pub x_star: f64,
    pub t_star: f64,
    /// Half the second u-derivative of the time-shifted `f` at `u*`.
    pub a: f64,
    /// Small-time constant: `u1 - u* ≈ sqrt(c (t - t*))`.
    pub c: f64,
    /// Characteristic speed `F'(u*)`.
    pub speed: f64,
    /// Where the shock appears: `x* + F'(u*) t*`.
    pub x_emerge: f64,
}

const SCAN_POINTS: usize = 801;
const SCAN_EDGE: f64 = 0.999;

/// Minimise `q(u) = f(u) / F''(u)`; the minimum is the emergence time.
pub fn critical_point(inv: &dyn InverseProfile, flux: &dyn Flux) -> Result<CriticalData, HodographError> {
    let q = |u: f64| -> Result<f64, HodographError> { Ok(inv.f(u)? / flux.d2(u)) };
    let us: Vec<f64> =
        (0..SCAN_POINTS).map(|k| -SCAN_EDGE + 2.0 * SCAN_EDGE * k as f64 / (SCAN_POINTS - 1) as f64).collect();
    let mut best = (0, f64::INFINITY);
    for (k, &u) in us.iter().enumerate() {
        let v = q(u)?;
        if v < best.1 {
            best = (k, v);
        }
    }
    let k = best.0;
    if k == 0 || k == SCAN_POINTS - 1 {
        return Err(HodographError::Assumption(format!("minimum of f/F'' at the edge u = {}", us[k])));
    }

    // stationarity of q: f' F'' - f F''' = 0
    let numerator = |u: f64| -> (f64, f64) {
        match inv.jet(u) {
            Ok(j) => (j.df * flux.d2(u) - j.f * flux.d3(u), j.d2f * flux.d2(u) - j.f * flux.d4(u)),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let u_star = newton_bisect(numerator, us[k - 1], us[k + 1], 1e-15)
        .ok_or_else(|| HodographError::Assumption("f/F'' has no interior stationary point".into()))?;
    let j = inv.jet(u_star)?;
    let t_star = j.f / flux.d2(u_star);
    let a = 0.5 * (j.d2f - t_star * flux.d4(u_star));
    if !(a > 0.0) {
        return Err(HodographError::Assumption(format!("degenerate minimum, a = {a}")));
    }
    Ok(CriticalData {
        u_star,
        x_star: j.x,
        t_star,
        a,
        c: 3.0 * flux.d2(u_star) / a,
        speed: flux.speed(u_star),
        x_emerge: j.x + flux.speed(u_star) * t_star,
    })
}

/// Default bootstrap offset after `t*`.
pub fn default_eps_boot(critical: &CriticalData) -> f64 {
    (1e-6 * critical.t_star.max(1.0)).max(1e-10)
}

/// Leading-order state `(u1, u2, xc)` at `t* + eps`.
///
/// The centre starts from the emergence location and carries its
/// first-order drift `F'(u*) eps`.
pub fn asymptotic_start(critical: &CriticalData, eps: f64) -> (f64, f64, f64) {
    let r = (critical.c * eps).sqrt();
    (critical.u_star + r, critical.u_star - r, critical.x_emerge + critical.speed * eps)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackOptions {
    pub tol: Tolerances,
    /// Bootstrap offset; defaults to [`default_eps_boot`].
    pub eps_boot: Option<f64>,
    /// Lab times the integrator lands on exactly.
    pub checkpoints: Vec<f64>,
}

/// Boundary values and centre of the shock at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShockState {
    pub t: f64,
    pub u1: f64,
    pub u2: f64,
    pub xc: f64,
}

/// Dense shock history from emergence onwards.
///
/// Samples are stored against the elapsed time `s = t - t*`; lookups between
/// samples use cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockTrack {
    pub critical: CriticalData,
    pub eps_boot: f64,
    pub elapsed: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub xc: Vec<f64>,
    rates: Vec<[f64; 3]>,
}

struct Forcing<'a> {
    inv: &'a dyn InverseProfile,
    flux: &'a dyn Flux,
    t_star: f64,
}

/// Right-hand side pieces at one state.
struct Local {
    rh: f64,
    g: [f64; 2],
    denom: [f64; 2],
    jets: [Jet; 2],
}

impl Forcing<'_> {
    fn local(&self, s: f64, u1: f64, u2: f64) -> Result<Local, Inadmissible> {
        if !(u1 > u2) {
            return Err(Inadmissible);
        }
        let j1 = self.inv.jet(u1).map_err(|_| Inadmissible)?;
        let j2 = self.inv.jet(u2).map_err(|_| Inadmissible)?;
        let t = self.t_star + s;
        let d1 = j1.f - self.flux.d2(u1) * t;
        let d2 = j2.f - self.flux.d2(u2) * t;
        if !(d1 > 0.0 && d2 > 0.0) {
            return Err(Inadmissible);
        }
        let rh = self.flux.shock_speed(u1, u2);
        Ok(Local {
            rh,
            g: [(self.flux.speed(u1) - rh) / d1, (self.flux.speed(u2) - rh) / d2],
            denom: [d1, d2],
            jets: [j1, j2],
        })
    }
}

/// Integrate the shock from `t* + eps_boot` to `t_end`.
pub fn track_shock(
    inv: &dyn InverseProfile,
    flux: &dyn Flux,
    critical: &CriticalData,
    t_end: f64,
    opts: &TrackOptions,
) -> Result<ShockTrack, HodographError> {
    let eps = opts.eps_boot.unwrap_or_else(|| default_eps_boot(critical));
    let s_end = t_end - critical.t_star;
    if !(s_end > eps) {
        return Err(HodographError::NotCovered { t: t_end, start: critical.t_star + eps, end: t_end });
    }
    let (u1, u2, xc) = asymptotic_start(critical, eps);
    let forcing = Forcing { inv, flux, t_star: critical.t_star };
    let stops: Vec<f64> = opts.checkpoints.iter().map(|t| t - critical.t_star).collect();
    let tol = Tolerances { h_init: 0.1 * eps, ..opts.tol };

    let mut track = ShockTrack {
        critical: *critical,
        eps_boot: eps,
        elapsed: Vec::new(),
        u1: Vec::new(),
        u2: Vec::new(),
        xc: Vec::new(),
        rates: Vec::new(),
    };
    ode::integrate(
        |s, y, dy| {
            let l = forcing.local(s, y[0], y[1])?;
            dy[0] = l.g[0];
            dy[1] = l.g[1];
            dy[2] = l.rh;
            Ok(())
        },
        eps,
        &[u1, u2, xc],
        s_end,
        &stops,
        &tol,
        |s, y, dy| {
            track.elapsed.push(s);
            track.u1.push(y[0]);
            track.u2.push(y[1]);
            track.xc.push(y[2]);
            track.rates.push([dy[0], dy[1], dy[2]]);
        },
    )
    .map_err(|e| match e {
        OdeError::StepUnderflow { t, .. } | OdeError::BadStart(t) => {
            HodographError::Singular { t: t + critical.t_star }
        }
        other => other.into(),
    })?;
    Ok(track)
}

fn hermite(s0: f64, s1: f64, y0: f64, y1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let h = s1 - s0;
    let th = (s - s0) / h;
    let h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
    let h10 = th * (1.0 - th) * (1.0 - th);
    let h01 = th * th * (3.0 - 2.0 * th);
    let h11 = th * th * (th - 1.0);
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

impl ShockTrack {
    pub fn len(&self) -> usize {
        self.elapsed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elapsed.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.critical.t_star + self.elapsed.last().copied().unwrap_or(self.eps_boot)
    }

    /// Lab times of the stored samples.
    pub fn times(&self) -> Vec<f64> {
        self.elapsed.iter().map(|s| self.critical.t_star + s).collect()
    }

    pub fn sample(&self, k: usize) -> ShockState {
        ShockState { t: self.critical.t_star + self.elapsed[k], u1: self.u1[k], u2: self.u2[k], xc: self.xc[k] }
    }

    /// State at elapsed time `s` since emergence.
    pub fn state_after(&self, s: f64) -> Result<ShockState, HodographError> {
        let cr = &self.critical;
        let s_last = self.elapsed.last().copied().unwrap_or(self.eps_boot);
        if !(s > 0.0) || s > s_last {
            return Err(HodographError::NotCovered { t: cr.t_star + s, start: cr.t_star, end: cr.t_star + s_last });
        }
        if s < self.eps_boot {
            let (u1, u2, xc) = asymptotic_start(cr, s);
            return Ok(ShockState { t: cr.t_star + s, u1, u2, xc });
        }
        let k = self.elapsed.partition_point(|&e| e <= s).clamp(1, self.len() - 1);
        let (s0, s1) = (self.elapsed[k - 1], self.elapsed[k]);
        if s == s0 {
            return Ok(ShockState { t: cr.t_star + s, ..self.sample(k - 1) });
        }
        let interp =
            |ys: &[f64], i: usize| hermite(s0, s1, ys[k - 1], ys[k], self.rates[k - 1][i], self.rates[k][i], s);
        Ok(ShockState { t: cr.t_star + s, u1: interp(&self.u1, 0), u2: interp(&self.u2, 1), xc: interp(&self.xc, 2) })
    }

    /// State at lab time `t`.
    pub fn state_at(&self, t: f64) -> Result<ShockState, HodographError> {
        self.state_after(t - self.critical.t_star)
    }
}

/// Exact entropy solution at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactValue {
    Smooth(f64),
    /// `x` sits exactly on the shock; left and right states.
    Shock {
        left: f64,
        right: f64,
    },
}

impl ExactValue {
    /// Point value; the mean of the two states on the shock itself.
    pub fn value(self) -> f64 {
        match self {
            Self::Smooth(u) => u,
            Self::Shock { left, right } => 0.5 * (left + right),
        }
    }
}

/// Closest approach to `±1` used when bracketing characteristic feet.
const EDGE: f64 = 1e-14;

/// Entropy solution at `(t, x)` by characteristics.
///
/// Solves `x = x_i(u) + F'(u) t`; after emergence the flat stretch
/// `(u2, u1)` from `track` is excluded.
pub fn exact_solution_at(
    inv: &dyn InverseProfile,
    flux: &dyn Flux,
    track: Option<&ShockTrack>,
    t: f64,
    x: f64,
) -> Result<ExactValue, HodographError> {
    let phi = |u: f64| -> (f64, f64) {
        match inv.jet(u) {
            Ok(j) => (j.x + flux.speed(u) * t - x, -j.f + flux.d2(u) * t),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let (mut lo, mut hi) = (-1.0 + EDGE, 1.0 - EDGE);
    let shocked = track.map(|tr| t > tr.critical.t_star).unwrap_or(false);
    if shocked {
        let tr = track.expect("checked above");
        let st = tr.state_at(t)?;
        if x == st.xc {
            return Ok(ExactValue::Shock { left: st.u1, right: st.u2 });
        }
        // the interpolated boundary may sit a rounding error off the characteristic
        if x < st.xc {
            if phi(st.u1).0 <= 0.0 {
                return Ok(ExactValue::Smooth(st.u1));
            }
            lo = st.u1;
        } else {
            if phi(st.u2).0 >= 0.0 {
                return Ok(ExactValue::Smooth(st.u2));
            }
            hi = st.u2;
        }
    }
    newton_bisect(phi, lo, hi, 1e-14).map(ExactValue::Smooth).ok_or(HodographError::Unbracketed { x, t })
}

/// Exact solution sampled at every `x` in `xs`.
pub fn exact_profile(
    inv: &dyn InverseProfile,
    flux: &dyn Flux,
    track: Option<&ShockTrack>,
    t: f64,
    xs: impl IntoIterator<Item = f64>,
) -> Result<Vec<f64>, HodographError> {
    xs.into_iter().map(|x| exact_solution_at(inv, flux, track, t, x).map(ExactValue::value)).collect()
}

/// z-derivatives of the critical data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalSensitivity {
    pub dz_u_star: f64,
    pub dz_t_star: f64,
    pub dz_x_star: f64,
    pub dz_x_emerge: f64,
}

/// Differentiate the critical point in `z` by the implicit function theorem.
pub fn critical_sensitivity(
    inv: &dyn InverseProfile,
    flux: &dyn Flux,
    critical: &CriticalData,
) -> Result<CriticalSensitivity, HodographError> {
    let u = critical.u_star;
    let zj = inv.z_jet(u)?;
    let h = 1e-5;
    let dzf_u = (inv.z_jet(u + h)?.dz_f - inv.z_jet(u - h)?.dz_f) / (2.0 * h);
    let f2 = flux.d2(u);
    let q_uz = (dzf_u * f2 - zj.dz_f * flux.d3(u)) / (f2 * f2);
    let q_uu = 2.0 * critical.a / f2;
    let dz_u_star = -q_uz / q_uu;
    let f_star = inv.f(u)?;
    let dz_t_star = zj.dz_f / f2;
    let dz_x_star = zj.dz_x - f_star * dz_u_star;
    Ok(CriticalSensitivity {
        dz_u_star,
        dz_t_star,
        dz_x_star,
        dz_x_emerge: dz_x_star + f2 * dz_u_star * critical.t_star + critical.speed * dz_t_star,
    })
}

/// z-derivatives of the shock quantities at fixed elapsed time `s = t - t*`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTrack {
    pub critical: CriticalData,
    pub dz_critical: CriticalSensitivity,
    pub elapsed: Vec<f64>,
    pub dz_u1: Vec<f64>,
    pub dz_u2: Vec<f64>,
    pub dz_xc: Vec<f64>,
}

impl SensitivityTrack {
    /// `∂z xc` with the drift of the frame moving at `F'(u*)` removed.
    pub fn comoving_dz_xc(&self, flux: &dyn Flux) -> Vec<f64> {
        let drift = flux.d2(self.critical.u_star) * self.dz_critical.dz_u_star;
        self.elapsed.iter().zip(&self.dz_xc).map(|(s, w)| w - s * drift).collect()
    }
}

/// Integrate the variational system of the shock ODE alongside the shock.
///
/// Derivatives are taken at fixed elapsed time since emergence. `opts`
/// controls the bootstrap and the checkpoints exactly as for
/// [`track_shock`].
pub fn shock_sensitivity(
    inv: &dyn InverseProfile,
    flux: &dyn Flux,
    track: &ShockTrack,
    t_end: f64,
    opts: &TrackOptions,
) -> Result<SensitivityTrack, HodographError> {
    let cr = track.critical;
    let dcr = critical_sensitivity(inv, flux, &cr)?;
    if t_end > track.t_end() {
        return Err(HodographError::NotCovered { t: t_end, start: cr.t_star, end: track.t_end() });
    }
    let eps = opts.eps_boot.unwrap_or(track.eps_boot);
    let s_end = t_end - cr.t_star;
    if !(s_end > eps) {
        return Err(HodographError::NotCovered { t: t_end, start: cr.t_star + eps, end: t_end });
    }
    let (u1, u2, xc) = asymptotic_start(&cr, eps);
    let w0 = dcr.dz_u_star;
    let wx0 = dcr.dz_x_emerge + flux.d2(cr.u_star) * dcr.dz_u_star * eps;
    let forcing = Forcing { inv, flux, t_star: cr.t_star };
    let stops: Vec<f64> = opts.checkpoints.iter().map(|t| t - cr.t_star).collect();
    let tol = Tolerances { h_init: 0.1 * eps, ..opts.tol };

    let mut out = SensitivityTrack {
        critical: cr,
        dz_critical: dcr,
        elapsed: Vec::new(),
        dz_u1: Vec::new(),
        dz_u2: Vec::new(),
        dz_xc: Vec::new(),
    };
    ode::integrate(
        |s, y, dy| {
            let (u1, u2) = (y[0], y[1]);
            let l = forcing.local(s, u1, u2)?;
            let t = cr.t_star + s;
            let gap = u1 - u2;
            let rh_1 = (flux.speed(u1) - l.rh) / gap;
            let rh_2 = (l.rh - flux.speed(u2)) / gap;
            let zj1 = inv.z_jet(u1).map_err(|_| Inadmissible)?;
            let zj2 = inv.z_jet(u2).map_err(|_| Inadmissible)?;

            // G_i = N_i / D_i with N_i = F'(u_i) - s, D_i = f(u_i) - F''(u_i) t
            let dn = [[flux.d2(u1) - rh_1, -rh_2], [-rh_1, flux.d2(u2) - rh_2]];
            let us = [u1, u2];
            let zjs = [zj1, zj2];
            let w = [y[3], y[4]];
            for i in 0..2 {
                let u = us[i];
                let dd_du = l.jets[i].df - flux.d3(u) * t;
                let dd_dz = zjs[i].dz_f - flux.d2(u) * dcr.dz_t_star;
                let mut rate = -l.g[i] * dd_dz / l.denom[i];
                for j in 0..2 {
                    let dd = if i == j { dd_du } else { 0.0 };
                    rate += (dn[i][j] - l.g[i] * dd) / l.denom[i] * w[j];
                }
                dy[3 + i] = rate;
            }
            dy[0] = l.g[0];
            dy[1] = l.g[1];
            dy[2] = l.rh;
            dy[5] = rh_1 * w[0] + rh_2 * w[1];
            Ok(())
        },
        eps,
        &[u1, u2, xc, w0, w0, wx0],
        s_end,
        &stops,
        &tol,
        |s, y, _| {
            out.elapsed.push(s);
            out.dz_u1.push(y[3]);
            out.dz_u2.push(y[4]);
            out.dz_xc.push(y[5]);
        },
    )
    .map_err(|e| match e {
        OdeError::StepUnderflow { t, .. } | OdeError::BadStart(t) => HodographError::Singular { t: t + cr.t_star },
        other => other.into(),
    })?;
    Ok(out)
}
