//! Stochastic collocation in `z` on first-kind Chebyshev points.
//!
//! Three reconstructions of `u(t, ·, z0)` from per-node solutions:
//! plain pointwise interpolation, interpolation after aligning the shocks
//! in `x` ([`method1_interpolate`]), and after aligning both the shocks and
//! the emergence clocks ([`method2_interpolate`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::DetectionConfig;
use crate::problem::GridField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollocateError {
    #[error("ensemble is empty")]
    Empty,
    #[error("node {node} (z = {z}) does not share the ensemble grid")]
    GridMismatch { node: usize, z: f64 },
    #[error("node {node} (z = {z}) holds t = {found}, expected {expected}")]
    WrongTime { node: usize, z: f64, found: f64, expected: f64 },
    #[error("node {node} (z = {z}) has no shock at t = {t} (t* = {t_star})")]
    NoShock { node: usize, z: f64, t: f64, t_star: f64 },
    #[error("{0} samples for {1} nodes")]
    Length(usize, usize),
}

/// First-kind Chebyshev points `z_j = cos((2j - 1) π / (2n))`, `j = 1..n`.
///
/// Written as a sine so that the points are exactly antisymmetric.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (1..=n).map(|j| ((n as f64 + 1.0 - 2.0 * j as f64) * PI / (2.0 * n as f64)).sin()).collect()
}

/// Barycentric weights matching [`chebyshev_nodes`].
pub fn barycentric_weights(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|j| {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * ((2.0 * j as f64 - 1.0) * PI / (2.0 * n as f64)).sin()
        })
        .collect()
}

/// Lagrange basis values `l_j(z0)` in barycentric form.
pub fn lagrange_basis(nodes: &[f64], weights: &[f64], z0: f64) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&z| z == z0) {
        let mut e = vec![0.0; nodes.len()];
        e[j] = 1.0;
        return e;
    }
    let terms: Vec<f64> = nodes.iter().zip(weights).map(|(z, w)| w / (z0 - z)).collect();
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / total).collect()
}

/// Value at `z0` of the polynomial through `(nodes[j], samples[j])`.
pub fn barycentric_eval(nodes: &[f64], weights: &[f64], samples: &[f64], z0: f64) -> f64 {
    if let Some(j) = nodes.iter().position(|&z| z == z0) {
        return samples[j];
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((z, w), s) in nodes.iter().zip(weights).zip(samples) {
        let t = w / (z0 - z);
        num += t * s;
        den += t;
    }
    num / den
}

/// Chebyshev coefficients `c_0..c_{n-1}` of the interpolant through samples
/// taken on [`chebyshev_nodes`]`(n)`.
pub fn chebyshev_coeffs(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    (0..n)
        .map(|k| {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(j, f)| f * (k as f64 * (2.0 * j as f64 + 1.0) * PI / (2.0 * n as f64)).cos())
                .sum();
            let c = 2.0 * s / n as f64;
            if k == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

/// Least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit { slope, intercept: my - slope * mx, r2, points: xs.len() }
}

/// Slope of `log y` against `log x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// Geometric decay of `|c_k|`, fitted up to the last coefficient above
/// `floor`. Coefficients under the floor inside that range (e.g. from parity)
/// are skipped.
pub fn decay_fit(coeffs: &[f64], floor: f64) -> Option<LineFit> {
    let last = coeffs.iter().rposition(|c| c.abs() > floor)?;
    let (ks, logs): (Vec<f64>, Vec<f64>) = coeffs[..=last]
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > floor)
        .map(|(k, c)| (k as f64, c.abs().ln()))
        .unzip();
    (ks.len() >= 3).then(|| fit_line(&ks, &logs))
}

/// Level of the coefficient plateau left by sampling noise: ten times the
/// median magnitude over the upper half of the sequence.
pub fn estimate_noise_floor(coeffs: &[f64]) -> f64 {
    let mut tail: Vec<f64> = coeffs[coeffs.len() / 2..].iter().map(|c| c.abs()).collect();
    if tail.is_empty() {
        return 0.0;
    }
    tail.sort_by(f64::total_cmp);
    10.0 * tail[tail.len() / 2]
}

/// Where the shock quantities of an ensemble come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantitySource {
    Hodograph,
    Detected,
}

/// Solution at one collocation node, with its shock data.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSnapshot {
    pub z: f64,
    pub field: GridField,
    /// Shock centre in `field` (ignored for direct interpolation).
    pub xc: f64,
    pub t_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationEnsemble {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub members: Vec<NodeSnapshot>,
    pub source: QuantitySource,
}

impl CollocationEnsemble {
    /// Bundle per-node snapshots, which must sit on [`chebyshev_nodes`] in order.
    pub fn new(members: Vec<NodeSnapshot>, source: QuantitySource) -> Result<Self, CollocateError> {
        let first = members.first().ok_or(CollocateError::Empty)?;
        for (node, m) in members.iter().enumerate() {
            if !m.field.same_grid(&first.field) {
                return Err(CollocateError::GridMismatch { node, z: m.z });
            }
        }
        let n = members.len();
        Ok(Self { nodes: chebyshev_nodes(n), weights: barycentric_weights(n), members, source })
    }

    fn basis(&self, z0: f64) -> Vec<f64> {
        lagrange_basis(&self.nodes, &self.weights, z0)
    }

    fn grid(&self) -> &GridField {
        &self.members[0].field
    }

    fn check_time(&self, expected: impl Fn(&NodeSnapshot) -> f64) -> Result<(), CollocateError> {
        for (node, m) in self.members.iter().enumerate() {
            let want = expected(m);
            if (m.field.t - want).abs() > 1e-9 * want.abs().max(1.0) {
                return Err(CollocateError::WrongTime { node, z: m.z, found: m.field.t, expected: want });
            }
        }
        Ok(())
    }

    /// `t*_N(z0)`, the interpolated emergence time.
    pub fn t_star_at(&self, z0: f64) -> f64 {
        let ts: Vec<f64> = self.members.iter().map(|m| m.t_star).collect();
        barycentric_eval(&self.nodes, &self.weights, &ts, z0)
    }

    /// `xc_N(z0)`, the interpolated shock centre.
    pub fn xc_at(&self, z0: f64) -> f64 {
        let xs: Vec<f64> = self.members.iter().map(|m| m.xc).collect();
        barycentric_eval(&self.nodes, &self.weights, &xs, z0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Xshift,
    Xtshift,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Direct, Method::Xshift, Method::Xtshift];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Direct => "direct",
            Self::Xshift => "xshift",
            Self::Xtshift => "xtshift",
        }
    }
}

/// Reconstructed solution at `z0`, in the physical frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    pub method: Method,
    pub z0: f64,
    pub field: GridField,
    /// Back-shift applied in `x` (shifted methods).
    pub shift: Option<f64>,
}

/// Pointwise-in-`x` interpolation of the node fields.
pub fn direct_interpolate(ens: &CollocationEnsemble, z0: f64) -> Result<Interpolant, CollocateError> {
    let t = ens.grid().t;
    ens.check_time(|_| t)?;
    let l = ens.basis(z0);
    let values = combine(ens.members.iter().map(|m| m.field.values.as_slice()), &l);
    Ok(Interpolant { method: Method::Direct, z0, field: GridField { values, ..ens.grid().clone() }, shift: None })
}

fn combine<'a>(rows: impl Iterator<Item = &'a [f64]>, l: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for (row, lj) in rows.zip(l) {
        if out.is_empty() {
            out = vec![0.0; row.len()];
        }
        for (o, v) in out.iter_mut().zip(row) {
            *o += lj * v;
        }
    }
    out
}

/// Grid index nearest `x = 0`; shocks are aligned onto it.
fn anchor(grid: &GridField) -> usize {
    ((-grid.x0 / grid.dx).round().max(0.0) as usize).min(grid.len() - 1)
}

/// Shift each node by whole cells so its shock sits on the anchor, combine
/// with `l`, and shift back by the interpolated offset.
///
/// The aligned profiles live on an index range widened by the largest shift,
/// so that no data is lost at the grid edges.
fn aligned_combination(ens: &CollocationEnsemble, l: &[f64]) -> (Vec<f64>, f64) {
    let grid = ens.grid();
    let n = grid.len() as i64;
    let k_ref = anchor(grid) as i64;
    let x_ref = grid.x(k_ref as usize);
    let shifts: Vec<i64> = ens.members.iter().map(|m| ((m.xc - x_ref) / grid.dx).round() as i64).collect();
    let pad = shifts.iter().map(|s| s.abs()).max().unwrap_or(0) + 4;
    let width = (n + 2 * pad) as usize;
    let mut aligned = vec![0.0; width];
    for ((m, &s), lj) in ens.members.iter().zip(&shifts).zip(l) {
        for (i, a) in aligned.iter_mut().enumerate() {
            let k = i as i64 - pad + s;
            *a += lj * m.field.values[k.clamp(0, n - 1) as usize];
        }
    }
    let cells: f64 = shifts.iter().zip(l).map(|(&s, lj)| s as f64 * lj).sum();
    let values = (0..n).map(|k| sample_one_sided(&aligned, (k + pad) as f64 - cells, (k_ref + pad) as usize)).collect();
    (values, cells * grid.dx)
}

/// Cubic Lagrange value at fractional index `p` whose stencil never spans
/// the shock cell `k_shock`.
fn sample_one_sided(v: &[f64], p: f64, k_shock: usize) -> f64 {
    let n = v.len();
    if p <= 0.0 {
        return v[0];
    }
    if p >= (n - 1) as f64 {
        return v[n - 1];
    }
    let nearest = p.round();
    if (p - nearest).abs() < 1e-9 {
        return v[nearest as usize];
    }
    let b = p.floor() as i64;
    let ks = k_shock as i64;
    let mut start = b - 1;
    if p < ks as f64 && start + 3 > ks - 1 {
        start = ks - 4;
    } else if p > ks as f64 && start < ks + 1 {
        start = ks + 1;
    }
    let start = start.clamp(0, n as i64 - 4) as usize;
    let mut acc = 0.0;
    for i in 0..4 {
        let xi = (start + i) as f64;
        let mut w = 1.0;
        for j in 0..4 {
            if j != i {
                let xj = (start + j) as f64;
                w *= (p - xj) / (xi - xj);
            }
        }
        acc += w * v[start + i];
    }
    acc
}

/// Method 1: align shocks in `x`, interpolate in `z`, shift back.
///
/// Every node must already carry a shock at the ensemble time.
pub fn method1_interpolate(ens: &CollocationEnsemble, z0: f64) -> Result<Interpolant, CollocateError> {
    let t = ens.grid().t;
    for (node, m) in ens.members.iter().enumerate() {
        if !(t > m.t_star) {
            return Err(CollocateError::NoShock { node, z: m.z, t, t_star: m.t_star });
        }
    }
    method1_interpolate_relaxed(ens, z0)
}

/// Method 1 without the shock precondition. Nodes whose shock has not yet
/// formed are aligned at whatever `xc` they carry, normally the steepest
/// point of the still-smooth profile.
pub fn method1_interpolate_relaxed(ens: &CollocationEnsemble, z0: f64) -> Result<Interpolant, CollocateError> {
    let t = ens.grid().t;
    ens.check_time(|_| t)?;
    let l = ens.basis(z0);
    let (values, shift) = aligned_combination(ens, &l);
    Ok(Interpolant {
        method: Method::Xshift,
        z0,
        field: GridField { values, ..ens.grid().clone() },
        shift: Some(shift),
    })
}

/// Method 2: node `j` is observed at `t*_j + t_offset`; align shocks there,
/// interpolate, and return the result at `t*_N(z0) + t_offset`.
pub fn method2_interpolate(ens: &CollocationEnsemble, z0: f64, t_offset: f64) -> Result<Interpolant, CollocateError> {
    ens.check_time(|m| m.t_star + t_offset)?;
    let l = ens.basis(z0);
    let (values, shift) = aligned_combination(ens, &l);
    let t = ens.t_star_at(z0) + t_offset;
    Ok(Interpolant {
        method: Method::Xtshift,
        z0,
        field: GridField { t, values, ..ens.grid().clone() },
        shift: Some(shift),
    })
}

/// Errors split by distance from the reference shock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorMetrics {
    pub max_away: f64,
    pub max_near: f64,
    pub l1: f64,
}

/// `true` where `x_k` lies within `exclusion` cells of `xc_ref`.
pub fn exclusion_mask(grid: &GridField, xc_ref: f64, cfg: &DetectionConfig) -> Vec<bool> {
    let half = cfg.exclusion as f64 * grid.dx * (1.0 + 1e-12);
    grid.xs().map(|x| (x - xc_ref).abs() <= half).collect()
}

pub fn error_metrics(interp: &[f64], reference: &GridField, xc_ref: f64, cfg: &DetectionConfig) -> ErrorMetrics {
    let mask = exclusion_mask(reference, xc_ref, cfg);
    let mut m = ErrorMetrics { max_away: 0.0, max_near: 0.0, l1: 0.0 };
    for ((a, b), near) in interp.iter().zip(&reference.values).zip(mask) {
        let e = (a - b).abs();
        m.l1 += e * reference.dx;
        if near {
            m.max_near = m.max_near.max(e);
        } else {
            m.max_away = m.max_away.max(e);
        }
    }
    m
}

/// Largest error over `x` in `[lo, hi]`.
pub fn max_error_on(interp: &[f64], reference: &GridField, lo: f64, hi: f64) -> f64 {
    reference
        .xs()
        .zip(interp.iter().zip(&reference.values))
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0, f64::max)
}

/// An interpolant scored against a reference solve at the same `z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationReport {
    pub z0: f64,
    pub method: Method,
    pub t: f64,
    pub x0: f64,
    pub dx: f64,
    pub interp: Vec<f64>,
    pub reference: Vec<f64>,
    pub in_window: Vec<bool>,
    pub exclusion: usize,
    pub xc_ref: f64,
    pub metrics: ErrorMetrics,
}

impl InterpolationReport {
    pub fn new(interp: &Interpolant, reference: &GridField, xc_ref: f64, cfg: &DetectionConfig) -> Self {
        Self {
            z0: interp.z0,
            method: interp.method,
            t: interp.field.t,
            x0: reference.x0,
            dx: reference.dx,
            interp: interp.field.values.clone(),
            reference: reference.values.clone(),
            in_window: exclusion_mask(reference, xc_ref, cfg),
            exclusion: cfg.exclusion,
            xc_ref,
            metrics: error_metrics(&interp.field.values, reference, xc_ref, cfg),
        }
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.dx
    }

    /// Largest error over `x` in `[lo, hi]`.
    pub fn max_error_on(&self, lo: f64, hi: f64) -> f64 {
        (0..self.interp.len())
            .filter(|&k| (lo..=hi).contains(&self.x(k)))
            .map(|k| (self.interp[k] - self.reference[k]).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn nodes_follow_the_cosine_formula() {
        let z = chebyshev_nodes(10);
        assert_relative_eq!(z[0], (PI / 20.0).cos(), epsilon = 1e-15);
        assert_relative_eq!(z[0], 0.987688, epsilon = 1e-6);
        assert_relative_eq!(z[9], -0.987688, epsilon = 1e-6);
        for n in 1..40 {
            let z = chebyshev_nodes(n);
            assert!(z.iter().sum::<f64>().abs() < 1e-14, "n = {n}");
            assert!((0..n).all(|j| z[j] == -z[n - 1 - j]));
            for (j, zj) in z.iter().enumerate() {
                assert_relative_eq!(*zj, ((2 * j + 1) as f64 * PI / (2 * n) as f64).cos(), epsilon = 1e-15);
            }
        }
        assert_eq!(chebyshev_nodes(1), vec![0.0]);
    }

    fn naive_lagrange(nodes: &[f64], samples: &[f64], z0: f64) -> f64 {
        let mut acc = 0.0;
        for (j, zj) in nodes.iter().enumerate() {
            let mut l = 1.0;
            for (i, zi) in nodes.iter().enumerate() {
                if i != j {
                    l *= (z0 - zi) / (zj - zi);
                }
            }
            acc += l * samples[j];
        }
        acc
    }

    #[test]
    fn barycentric_examples() {
        let z = chebyshev_nodes(3);
        let w = barycentric_weights(3);
        let sq: Vec<f64> = z.iter().map(|z| z * z).collect();
        assert_relative_eq!(barycentric_eval(&z, &w, &sq, 0.5), 0.25, epsilon = 1e-15);
        assert_eq!(barycentric_eval(&z, &w, &[2.5; 3], 0.77), 2.5);
        let z = chebyshev_nodes(10);
        let w = barycentric_weights(10);
        let runge: Vec<f64> = z.iter().map(|z| 1.0 / (1.0 + 25.0 * z * z)).collect();
        assert!((barycentric_eval(&z, &w, &runge, 0.234) - naive_lagrange(&z, &runge, 0.234)).abs() < 1e-12);
        assert_eq!(barycentric_eval(&z, &w, &runge, z[3]), runge[3]);
    }

    #[test]
    fn coefficients_of_t2_and_constants() {
        for n in 3..12 {
            let z = chebyshev_nodes(n);
            let c = chebyshev_coeffs(&z.iter().map(|z| 2.0 * z * z - 1.0).collect::<Vec<_>>());
            for (k, ck) in c.iter().enumerate() {
                let want = if k == 2 { 1.0 } else { 0.0 };
                assert!((ck - want).abs() <= 1e-14, "n={n} k={k} c={ck}");
            }
            let c = chebyshev_coeffs(&vec![0.7; n]);
            assert!((c[0] - 0.7).abs() < 1e-15);
            assert!(c[1..].iter().all(|ck| ck.abs() < 1e-15));
        }
    }

    #[test]
    fn line_fits() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        let f = loglog_fit(&xs, &ys);
        assert_relative_eq!(f.slope, 1.5, epsilon = 1e-12);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);
        let c: Vec<f64> = (0..20).map(|k| if k % 2 == 0 { 0.5f64.powi(k) } else { 0.0 }).collect();
        let d = decay_fit(&c, 1e-12).unwrap();
        assert_relative_eq!(d.slope, 0.5f64.ln(), epsilon = 1e-12);
        assert_eq!(d.points, 10);
    }

    #[test]
    fn noise_floor_sits_above_the_plateau() {
        let c: Vec<f64> =
            (0..40).map(|k| if k < 12 { 10f64.powi(-k) } else { 1e-15 * (1.0 + 0.1 * (k % 3) as f64) }).collect();
        let floor = estimate_noise_floor(&c);
        assert!(floor > 1.2e-15 && floor < 1e-11, "{floor}");
        let d = decay_fit(&c, floor).unwrap();
        assert_eq!(d.points, 12);
        assert_relative_eq!(d.slope, -(10f64.ln()), epsilon = 1e-12);
        assert_eq!(estimate_noise_floor(&[]), 0.0);
    }

    fn grid_field(t: f64, values: Vec<f64>) -> GridField {
        GridField { t, x0: -5.0, dx: 0.05, values }
    }

    fn front(shift: f64) -> Vec<f64> {
        (0..201).map(|k| -((-5.0 + k as f64 * 0.05 - shift) * 3.0).tanh()).collect()
    }

    fn ensemble(n: usize, xc: impl Fn(f64) -> f64, prof: impl Fn(f64) -> Vec<f64>) -> CollocationEnsemble {
        let members = chebyshev_nodes(n)
            .into_iter()
            .map(|z| NodeSnapshot { z, field: grid_field(1.0, prof(z)), xc: xc(z), t_star: 0.5 })
            .collect();
        CollocationEnsemble::new(members, QuantitySource::Hodograph).unwrap()
    }

    #[test]
    fn z_independent_problem_is_exact() {
        let ens = ensemble(6, |_| 0.3, |_| front(0.3));
        let reference = grid_field(1.0, front(0.3));
        for method in Method::ALL {
            let interp = match method {
                Method::Direct => direct_interpolate(&ens, 0.234).unwrap(),
                Method::Xshift => method1_interpolate(&ens, 0.234).unwrap(),
                Method::Xtshift => method2_interpolate(&ens, 0.234, 0.5).unwrap(),
            };
            let err = interp.field.values.iter().zip(&reference.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-13, "{method:?}: {err}");
        }
    }

    #[test]
    fn method1_equals_direct_for_equal_centres() {
        let ens = ensemble(7, |_| -0.4, |z| front(-0.4 + 0.01 * z));
        let a = direct_interpolate(&ens, -0.61).unwrap();
        let b = method1_interpolate(&ens, -0.61).unwrap();
        for (x, y) in a.field.values.iter().zip(&b.field.values) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn translating_jump_is_recovered_by_shifting() {
        // a sharp jump whose position moves with z defeats direct interpolation
        let step = |s: f64| -> Vec<f64> {
            (0..201)
                .map(|k| {
                    let x = -5.0 + k as f64 * 0.05;
                    if x < s {
                        0.6 - 0.1 * x
                    } else {
                        -0.5 - 0.1 * x
                    }
                })
                .collect()
        };
        let pos = |z: f64| 0.05 * (20.0 * z).round();
        let ens = ensemble(8, pos, |z| step(pos(z)));
        let z0 = 0.3;
        let reference = grid_field(1.0, step(pos(z0)));
        let cfg = DetectionConfig::default();
        let direct = InterpolationReport::new(&direct_interpolate(&ens, z0).unwrap(), &reference, pos(z0), &cfg);
        let shifted = InterpolationReport::new(&method1_interpolate(&ens, z0).unwrap(), &reference, pos(z0), &cfg);
        assert!(direct.metrics.max_away > 0.1);
        // the interpolated shift is off the grid, so linear pieces are cut at a sub-cell offset
        assert!(shifted.metrics.max_away < 0.1 * 0.05 * 8.0, "{:?}", shifted.metrics);
    }

    #[test]
    fn method1_rejects_unshocked_nodes() {
        let mut ens = ensemble(4, |_| 0.0, |_| front(0.0));
        ens.members[2].t_star = 1.5;
        assert!(matches!(method1_interpolate(&ens, 0.1), Err(CollocateError::NoShock { node: 2, .. })));
    }

    #[test]
    fn method2_checks_the_clock() {
        let ens = ensemble(4, |_| 0.0, |_| front(0.0));
        assert!(matches!(method2_interpolate(&ens, 0.1, 0.2), Err(CollocateError::WrongTime { .. })));
    }

    #[test]
    fn metrics_split_by_window() {
        let reference = grid_field(1.0, vec![0.0; 201]);
        let cfg = DetectionConfig::default();
        assert_eq!(
            error_metrics(&reference.values, &reference, 0.0, &cfg),
            ErrorMetrics { max_away: 0.0, max_near: 0.0, l1: 0.0 }
        );
        let mut bumped = reference.values.clone();
        bumped[100] = 1.0;
        let m = error_metrics(&bumped, &reference, reference.x(100), &cfg);
        assert_eq!((m.max_away, m.max_near), (0.0, 1.0));
    }

    #[test]
    fn single_node_reproduces_its_sample() {
        let ens = ensemble(1, |_| 0.2, |_| front(0.2));
        for z0 in [-0.7, 0.0, 0.9] {
            assert_eq!(direct_interpolate(&ens, z0).unwrap().field.values, ens.members[0].field.values);
            let m1 = method1_interpolate(&ens, z0).unwrap();
            assert!(m1.field.values.iter().zip(&ens.members[0].field.values).all(|(a, b)| (a - b).abs() < 1e-14));
        }
    }

    proptest! {
        #[test]
        fn polynomials_are_reproduced(coeffs in prop::collection::vec(-2.0f64..2.0, 1..12), z0 in -1.0f64..1.0) {
            let n = coeffs.len();
            let p = |z: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c);
            let nodes = chebyshev_nodes(n);
            let samples: Vec<f64> = nodes.iter().map(|&z| p(z)).collect();
            let got = barycentric_eval(&nodes, &barycentric_weights(n), &samples, z0);
            prop_assert!((got - p(z0)).abs() < 1e-12);
        }

        #[test]
        fn basis_is_a_partition_of_unity(n in 1usize..30, z0 in -1.0f64..1.0) {
            let l = lagrange_basis(&chebyshev_nodes(n), &barycentric_weights(n), z0);
            prop_assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
