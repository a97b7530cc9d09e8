//! Shock quantities read off gridded solutions by centred differences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::GridField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("invalid detection config: {0}")]
    Config(String),
    #[error("field has {0} points; detection needs at least 3")]
    TooShort(usize),
    #[error("no snapshots given")]
    Empty,
    #[error("snapshot {0} does not share the grid of snapshot 0")]
    GridMismatch(usize),
    #[error("offset {offset} around index {index} leaves the grid of {len} points")]
    OutOfRange { index: usize, offset: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    /// The slope threshold is `kappa / dx`.
    pub kappa: f64,
    /// Grid points between the shock and the cells read as `u1`, `u2`.
    pub offset: usize,
    /// Half-width, in grid points, of the window treated as "near the shock".
    pub exclusion: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { kappa: 0.25, offset: 2, exclusion: 5 }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(DetectError::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.offset < 1 {
            return Err(DetectError::Config("offset must be at least 1".into()));
        }
        if self.exclusion < self.offset {
            return Err(DetectError::Config(format!(
                "exclusion ({}) must not be smaller than offset ({})",
                self.exclusion, self.offset
            )));
        }
        Ok(())
    }
}

/// Index and size of the largest `|u[k+1] - u[k-1]|`; first index on ties.
pub fn max_two_cell_jump(field: &GridField) -> Result<(usize, f64), DetectError> {
    let v = &field.values;
    if v.len() < 3 {
        return Err(DetectError::TooShort(v.len()));
    }
    let mut best = (1, f64::NEG_INFINITY);
    for k in 1..v.len() - 1 {
        let jump = (v[k + 1] - v[k - 1]).abs();
        if jump > best.1 {
            best = (k, jump);
        }
    }
    Ok(best)
}

/// Steepest point of the field: `(k*, x0 + k* dx)`.
pub fn detect_xc(field: &GridField) -> Result<(usize, f64), DetectError> {
    let (k, _) = max_two_cell_jump(field)?;
    Ok((k, field.x(k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Emergence {
    Detected { t: f64, snapshot: usize },
    NoShockYet,
}

impl Emergence {
    pub fn time(self) -> Option<f64> {
        match self {
            Self::Detected { t, .. } => Some(t),
            Self::NoShockYet => None,
        }
    }
}

/// First snapshot whose steepest centred slope exceeds `kappa / dx`.
pub fn detect_tstar(snapshots: &[GridField], cfg: &DetectionConfig) -> Result<Emergence, DetectError> {
    cfg.validate()?;
    let first = snapshots.first().ok_or(DetectError::Empty)?;
    if let Some(i) = snapshots.iter().position(|s| !s.same_grid(first)) {
        return Err(DetectError::GridMismatch(i));
    }
    for (i, snap) in snapshots.iter().enumerate() {
        let (_, jump) = max_two_cell_jump(snap)?;
        if jump / (2.0 * snap.dx) > cfg.kappa / snap.dx {
            return Ok(Emergence::Detected { t: snap.t, snapshot: i });
        }
    }
    Ok(Emergence::NoShockYet)
}

/// `(u1, u2)` read `offset` cells either side of `k_star`.
pub fn extract_u12(field: &GridField, k_star: usize, cfg: &DetectionConfig) -> Result<(f64, f64), DetectError> {
    let out = DetectError::OutOfRange { index: k_star, offset: cfg.offset, len: field.len() };
    if k_star < cfg.offset || k_star + cfg.offset >= field.len() {
        return Err(out);
    }
    Ok((field.values[k_star - cfg.offset], field.values[k_star + cfg.offset]))
}

/// Everything detection can say about the shock in one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectedShock {
    pub t: f64,
    pub index: usize,
    pub xc: f64,
    pub u1: f64,
    pub u2: f64,
}

pub fn detect_shock(field: &GridField, cfg: &DetectionConfig) -> Result<DetectedShock, DetectError> {
    let (index, xc) = detect_xc(field)?;
    let (u1, u2) = extract_u12(field, index, cfg)?;
    Ok(DetectedShock { t: field.t, index, xc, u1, u2 })
}
