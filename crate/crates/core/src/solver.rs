//! Finite-difference WENO5 solver with global Lax–Friedrichs flux splitting
//! and third-order SSP Runge–Kutta time stepping.
//!
//! The domain is padded with three ghost cells per side holding the fixed
//! far-field states. Snapshot times are hit exactly by truncating the step
//! that would overshoot them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Flux, GridField, MIN_GRID_POINTS};

/// Regularization of the WENO-JS smoothness indicators.
pub const WENO_EPS: f64 = 1e-6;

const GHOSTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("time step {dt} exceeds the CFL limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("solution diverged (non-finite value) at step {step}, t = {t}")]
    Divergence { step: usize, t: f64 },
    #[error("target time {target} precedes the field time {t}")]
    Backwards { target: f64, t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub cfl: f64,
    /// Ghost state on the left (`x < -R`).
    pub left_state: f64,
    /// Ghost state on the right (`x > R`).
    pub right_state: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { cfl: 0.4, left_state: 1.0, right_state: -1.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SolverError::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        Ok(())
    }
}

/// Fifth-order WENO-JS reconstruction at the right interface of the centre
/// cell, `v[2]`, from the cell averages `v[0..5]`.
pub fn weno5_reconstruct(v: [f64; 5]) -> f64 {
    let [a, b, c, d, e] = v;
    let q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0;
    let q1 = (-b + 5.0 * c + 2.0 * d) / 6.0;
    let q2 = (2.0 * c + 5.0 * d - e) / 6.0;

    let b0 = 13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2);
    let b1 = 13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2);
    let b2 = 13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2);

    let w0 = 0.1 / (WENO_EPS + b0).powi(2);
    let w1 = 0.6 / (WENO_EPS + b1).powi(2);
    let w2 = 0.3 / (WENO_EPS + b2).powi(2);
    (w0 * q0 + w1 * q1 + w2 * q2) / (w0 + w1 + w2)
}

/// WENO5 + SSP-RK3 solver for one flux and boundary pair.
#[derive(Debug, Clone)]
pub struct WenoSolver {
    flux: Arc<dyn Flux>,
    config: SolverConfig,
}

impl WenoSolver {
    pub fn new(flux: Arc<dyn Flux>, config: SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        Ok(Self { flux, config })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn padded(&self, values: &[f64]) -> Vec<f64> {
        let mut p = Vec::with_capacity(values.len() + 2 * GHOSTS);
        p.extend(std::iter::repeat_n(self.config.left_state, GHOSTS));
        p.extend_from_slice(values);
        p.extend(std::iter::repeat_n(self.config.right_state, GHOSTS));
        p
    }

    /// Largest characteristic speed over the field and the ghost states.
    pub fn max_speed(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .chain([self.config.left_state, self.config.right_state].iter())
            .map(|&u| self.flux.speed(u).abs())
            .fold(0.0, f64::max)
    }

    /// Numerical fluxes `ĥ_{k+1/2}` for `k = -1..n-1` (length `n + 1`).
    pub fn interface_fluxes(&self, values: &[f64]) -> Vec<f64> {
        let alpha = self.max_speed(values);
        let p = self.padded(values);
        let plus: Vec<f64> = p.iter().map(|&u| 0.5 * (self.flux.flux(u) + alpha * u)).collect();
        let minus: Vec<f64> = p.iter().map(|&u| 0.5 * (self.flux.flux(u) - alpha * u)).collect();

        // interface between padded cells j and j+1, j = GHOSTS-1 ..= GHOSTS+n-1
        let n = values.len();
        (GHOSTS - 1..GHOSTS + n)
            .map(|j| {
                let left = weno5_reconstruct([plus[j - 2], plus[j - 1], plus[j], plus[j + 1], plus[j + 2]]);
                let right = weno5_reconstruct([minus[j + 3], minus[j + 2], minus[j + 1], minus[j], minus[j - 1]]);
                left + right
            })
            .collect()
    }

    /// Conservative semi-discrete right-hand side `-(ĥ_{k+1/2} - ĥ_{k-1/2}) / dx`.
    pub fn spatial_rhs(&self, values: &[f64], dx: f64) -> Vec<f64> {
        let h = self.interface_fluxes(values);
        h.windows(2).map(|w| -(w[1] - w[0]) / dx).collect()
    }

    /// Largest stable step for the current field.
    pub fn stable_dt(&self, field: &GridField) -> f64 {
        let alpha = self.max_speed(&field.values);
        if alpha == 0.0 {
            f64::INFINITY
        } else {
            self.config.cfl * field.dx / alpha
        }
    }

    /// One SSP-RK3 step of size `dt`.
    pub fn ssp_rk3_step(&self, field: &GridField, dt: f64) -> Result<GridField, SolverError> {
        if field.len() < MIN_GRID_POINTS {
            return Err(SolverError::Config(format!("field has {} points, need {MIN_GRID_POINTS}", field.len())));
        }
        let limit = self.stable_dt(field);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(SolverError::Cfl { dt, limit });
        }
        let mut values = field.values.clone();
        let dx = field.dx;
        ssp_rk3(&mut values, dt, |u, out| out.copy_from_slice(&self.spatial_rhs(u, dx)));
        Ok(GridField { t: field.t + dt, x0: field.x0, dx, values })
    }

    /// Advance to `t_end`, returning the final field and a copy of the field
    /// at every requested snapshot time in `(field.t, t_end]`.
    ///
    /// Snapshot times outside that interval are ignored; `t_end` itself is
    /// always the last step boundary.
    pub fn advance_to(
        &self,
        field: &GridField,
        t_end: f64,
        snapshot_times: &[f64],
    ) -> Result<(GridField, Vec<GridField>), SolverError> {
        if t_end < field.t {
            return Err(SolverError::Backwards { target: t_end, t: field.t });
        }
        if snapshot_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SolverError::Config("snapshot times must be strictly increasing".into()));
        }
        let mut stops: Vec<f64> = snapshot_times.iter().copied().filter(|&s| s > field.t && s < t_end).collect();
        stops.push(t_end);
        let wants_end = snapshot_times.contains(&t_end);

        let mut current = field.clone();
        let mut snaps = Vec::new();
        let mut step = 0usize;
        for (i, &stop) in stops.iter().enumerate() {
            while current.t < stop {
                let dt_max = self.stable_dt(&current);
                let remaining = stop - current.t;
                let (dt, lands) = if dt_max >= remaining { (remaining, true) } else { (dt_max, false) };
                current = self.ssp_rk3_step(&current, dt)?;
                if lands {
                    current.t = stop;
                }
                step += 1;
                if current.values.iter().any(|v| !v.is_finite()) {
                    return Err(SolverError::Divergence { step, t: current.t });
                }
            }
            let is_end = i + 1 == stops.len();
            if !is_end || wants_end {
                snaps.push(current.clone());
            }
        }
        Ok((current, snaps))
    }
}

/// Shu–Osher SSP-RK3 update of `u` in place for the autonomous system `u' = L(u)`.
pub fn ssp_rk3<L>(u: &mut [f64], dt: f64, mut rhs: L)
where
    L: FnMut(&[f64], &mut [f64]),
{
    let n = u.len();
    let mut l = vec![0.0; n];

    rhs(u, &mut l);
    let u1: Vec<f64> = u.iter().zip(&l).map(|(&a, &b)| a + dt * b).collect();

    rhs(&u1, &mut l);
    let u2: Vec<f64> = u.iter().zip(&u1).zip(&l).map(|((&a, &b), &c)| 0.75 * a + 0.25 * (b + dt * c)).collect();

    rhs(&u2, &mut l);
    for ((a, &b), &c) in u.iter_mut().zip(&u2).zip(&l) {
        *a = (*a + 2.0 * (b + dt * c)) / 3.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{sample_initial, Burgers, ProblemSpec};
    use approx::assert_relative_eq;

    fn solver() -> WenoSolver {
        WenoSolver::new(Arc::new(Burgers), SolverConfig::default()).unwrap()
    }

    fn tanh_field(nx: usize, r: f64) -> GridField {
        let dx = 2.0 * r / (nx - 1) as f64;
        let values = (0..nx).map(|k| -(0.5 * (-r + k as f64 * dx)).tanh()).collect();
        GridField { t: 0.0, x0: -r, dx, values }
    }

    #[test]
    fn reconstruction_is_consistent() {
        assert_eq!(weno5_reconstruct([0.3; 5]), 0.3);
    }

    #[test]
    fn reconstruction_is_exact_for_quadratics() {
        // cell averages of x² over unit cells centred at -2..=2; interface at 1/2
        let avg = |j: f64| j * j + 1.0 / 12.0;
        let v = weno5_reconstruct([avg(-2.0), avg(-1.0), avg(0.0), avg(1.0), avg(2.0)]);
        assert!((v - 0.25).abs() < 1e-15, "{v}");
    }

    #[test]
    fn reconstruction_stays_in_hull_at_a_step() {
        let v = weno5_reconstruct([1.0, 1.0, 1.0, 0.0, 0.0]);
        assert!((0.0..=1.0).contains(&v), "{v}");
        // the discontinuous sub-stencils keep an O(eps^2) weight
        let v = weno5_reconstruct([1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!((-1e-10..=1.0).contains(&v), "{v}");
    }

    #[test]
    fn constant_field_is_steady() {
        let s =
            WenoSolver::new(Arc::new(Burgers), SolverConfig { cfl: 0.4, left_state: 0.3, right_state: 0.3 }).unwrap();
        let rhs = s.spatial_rhs(&[0.3; 20], 0.1);
        assert!(rhs.iter().all(|&r| r == 0.0));
        let f = GridField { t: 1.0, x0: 0.0, dx: 0.1, values: vec![0.3; 20] };
        let next = s.ssp_rk3_step(&f, 0.05).unwrap();
        assert_eq!(next.values, f.values);
        assert_eq!(next.t, 1.05);
    }

    #[test]
    fn rhs_telescopes_to_boundary_fluxes() {
        let s = solver();
        let f = tanh_field(101, 5.0);
        let h = s.interface_fluxes(&f.values);
        let total: f64 = s.spatial_rhs(&f.values, f.dx).iter().map(|r| r * f.dx).sum();
        assert_relative_eq!(total, h[0] - h[h.len() - 1], epsilon = 1e-13);
    }

    fn rhs_error(nx: usize) -> f64 {
        let s = solver();
        let f = tanh_field(nx, 15.0);
        let rhs = s.spatial_rhs(&f.values, f.dx);
        f.xs()
            .zip(&rhs)
            .filter(|(x, _)| x.abs() <= 10.0)
            .map(|(x, r)| {
                let u = -(0.5 * x).tanh();
                let ux = -0.5 * (1.0 - u * u);
                (r + u * ux).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn rhs_converges_at_fifth_order_on_smooth_data() {
        // dx = 0.1, 0.05, 0.025
        let errs: Vec<f64> = [301, 601, 1201].iter().map(|&n| rhs_error(n)).collect();
        let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        assert!(orders.iter().all(|&p| p >= 4.5), "errors {errs:?}, orders {orders:?}");
    }

    #[test]
    fn rk3_local_error_is_fourth_order() {
        let lambda = -1.3;
        let local = |dt: f64| {
            let mut u = [1.0];
            ssp_rk3(&mut u, dt, |v, out| out[0] = lambda * v[0]);
            (u[0] - (lambda * dt).exp()).abs()
        };
        let (e1, e2) = (local(0.1), local(0.05));
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.1, "{order}");
    }

    #[test]
    fn step_conserves_mass_up_to_boundary_flux() {
        let s = solver();
        let f = tanh_field(201, 3.0);
        let dt = 0.5 * s.stable_dt(&f);
        // boundary fluxes at the three stages of the Shu–Osher scheme
        let h0 = s.interface_fluxes(&f.values);
        let mut u1 = f.values.clone();
        let r0 = s.spatial_rhs(&f.values, f.dx);
        u1.iter_mut().zip(&r0).for_each(|(u, r)| *u += dt * r);
        let h1 = s.interface_fluxes(&u1);
        let r1 = s.spatial_rhs(&u1, f.dx);
        let u2: Vec<f64> =
            f.values.iter().zip(&u1).zip(&r1).map(|((a, b), c)| 0.75 * a + 0.25 * (b + dt * c)).collect();
        let h2 = s.interface_fluxes(&u2);
        let net = |h: &[f64]| h[0] - h[h.len() - 1];
        let boundary = dt * (net(&h0) + net(&h1) + 4.0 * net(&h2)) / 6.0;

        let next = s.ssp_rk3_step(&f, dt).unwrap();
        let mass = |v: &[f64]| v.iter().sum::<f64>() * f.dx;
        let mismatch = mass(&next.values) - mass(&f.values) - boundary;
        assert!(mismatch.abs() <= 1e-12, "{mismatch}");
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let s = solver();
        let f = tanh_field(101, 5.0);
        let limit = s.stable_dt(&f);
        assert!(matches!(s.ssp_rk3_step(&f, 1.5 * limit), Err(SolverError::Cfl { .. })));
        assert!(matches!(s.ssp_rk3_step(&f, 0.0), Err(SolverError::Cfl { .. })));
    }

    #[test]
    fn advance_hits_snapshots_exactly() {
        let s = solver();
        let f = sample_initial(&ProblemSpec::base(), 0.0, 301).unwrap();
        let (end, snaps) = s.advance_to(&f, 0.5, &[0.1, 0.25, 0.5]).unwrap();
        assert_eq!(end.t, 0.5);
        let times: Vec<f64> = snaps.iter().map(|g| g.t).collect();
        assert_eq!(times, vec![0.1, 0.25, 0.5]);
        assert_eq!(snaps[2], end);

        let (same, none) = s.advance_to(&f, 0.0, &[]).unwrap();
        assert_eq!(same, f);
        assert!(none.is_empty());
        assert!(matches!(s.advance_to(&end, 0.1, &[]), Err(SolverError::Backwards { .. })));
    }

    #[test]
    fn divergence_is_reported() {
        let s = solver();
        let mut f = tanh_field(51, 3.0);
        f.values[20] = f64::NAN;
        match s.advance_to(&f, 1.0, &[]) {
            Err(SolverError::Divergence { step, .. }) => assert_eq!(step, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
