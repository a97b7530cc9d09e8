use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toml::Table;

use super::ExperimentError;
use crate::collocate::{Method, QuantitySource};
use crate::detect::DetectionConfig;
use crate::problem::{
    Burgers, CubicFlux, Flux, InitialData, LogisticFront, ProblemSpec, SkewedLogistic, MIN_GRID_POINTS,
};

const PAPER5: &str = r#"
[problem]
label = "burgers-paper5"

[problem.initial]
kind = "skewed-logistic"
amplitude = 0.2
pivot = 0.5
drift = 3.0

[problem.flux]
kind = "burgers"

[grid]
half_width = 15.0
nx = 1500

[time]
t_end = 2.2

[collocation]
n_nodes = 10
z0 = [0.234]
"#;

const PAPER5_REGULARITY: &str = r#"
preset = "burgers-paper5"

[problem]
label = "burgers-paper5-regularity"

[time]
t_end = 4.0

[collocation]
n_nodes = 50
"#;

/// Names accepted by `preset = "..."`.
pub const PRESETS: [&str; 2] = ["burgers-paper5", "burgers-paper5-regularity"];

fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "burgers-paper5" => Some(PAPER5),
        "burgers-paper5-regularity" => Some(PAPER5_REGULARITY),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset the configuration was layered on, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub collocation: CollocationConfig,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub regularity: RegularityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_label")]
    pub label: String,
    pub initial: InitialConfig,
    #[serde(default)]
    pub flux: FluxConfig,
    #[serde(default = "default_z_range")]
    pub z_range: [f64; 2],
}

fn default_label() -> String {
    "custom".into()
}

fn default_z_range() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    SkewedLogistic {
        amplitude: f64,
        pivot: f64,
        drift: f64,
    },
    LogisticFront {
        #[serde(default)]
        center: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FluxConfig {
    #[default]
    Burgers,
    Cubic {
        kappa: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width `R` of `[-R, R]`.
    pub half_width: f64,
    pub nx: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_cfl() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    /// Extra output times for `solve`.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Snapshot spacing used to detect the emergence time.
    #[serde(default = "default_dt_sample")]
    pub dt_sample: f64,
}

fn default_dt_sample() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollocationConfig {
    pub n_nodes: usize,
    pub z0: Vec<f64>,
    pub methods: Vec<Method>,
    pub source: QuantitySource,
    /// Half-width of the window `[-a, a]` on which `max_err_core` is taken.
    pub core_half_width: f64,
}

impl Default for CollocationConfig {
    fn default() -> Self {
        Self {
            n_nodes: 10,
            z0: vec![0.0],
            methods: Method::ALL.to_vec(),
            source: QuantitySource::Detected,
            core_half_width: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularityConfig {
    /// Spacing of the time slices in the surface output.
    pub dt_surface: f64,
    /// Slices for the coefficient-decay table; empty means `t_end` only.
    pub decay_times: Vec<f64>,
    /// Coefficients at or below this magnitude are left out of the decay
    /// fit; estimated from the coefficient tail when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_floor: Option<f64>,
    /// Also run PDE solves and emit the detected surface.
    pub detected: bool,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self { dt_surface: 0.05, decay_times: Vec::new(), noise_floor: None, detected: true }
    }
}

impl RegularityConfig {
    pub fn decay_slices(&self, t_end: f64) -> Vec<f64> {
        if self.decay_times.is_empty() {
            vec![t_end]
        } else {
            self.decay_times.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    /// Significant digits written for floating-point values.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), precision: 17 }
    }
}

/// Parse a TOML experiment description.
///
/// A top-level `preset = "name"` loads that preset first; every key in
/// `text` then overrides it, table by table.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    parse_config_with_preset(text, None)
}

/// As [`parse_config`], with `preset` taking precedence over any preset
/// named in the text.
pub fn parse_config_with_preset(text: &str, preset: Option<&str>) -> Result<ExperimentConfig, ExperimentError> {
    let mut user: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        ExperimentError::Config {
            path: line.map(|l| format!("line {l}")).unwrap_or_else(|| "document".into()),
            message: e.message().to_string(),
        }
    })?;
    if let Some(name) = preset {
        user.insert("preset".into(), toml::Value::String(name.into()));
    }
    let merged = resolve_presets(user, 0)?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(merged).map_err(|e| ExperimentError::Config {
        path: e.path().to_string(),
        message: e.inner().message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_presets(mut table: Table, depth: usize) -> Result<Table, ExperimentError> {
    let Some(value) = table.get("preset") else {
        return Ok(table);
    };
    let name = value.as_str().ok_or_else(|| ExperimentError::config("preset", "expected a string"))?.to_string();
    if depth > PRESETS.len() {
        return Err(ExperimentError::config("preset", "presets refer to each other in a cycle"));
    }
    let text = preset_text(&name).ok_or_else(|| {
        ExperimentError::config("preset", format!("unknown preset `{name}`; known: {}", PRESETS.join(", ")))
    })?;
    let mut base: Table = text.parse().expect("built-in presets are valid TOML");
    let inner = base.remove("preset");
    let mut base = match inner {
        Some(v) => {
            let mut t = Table::new();
            t.insert("preset".into(), v);
            let mut resolved = resolve_presets(t, depth + 1)?;
            merge(&mut resolved, base);
            resolved
        }
        None => base,
    };
    table.insert("preset".into(), toml::Value::String(name));
    merge(&mut base, table);
    Ok(base)
}

/// Deep merge: nested tables combine, anything else is replaced.
fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let check =
            |ok: bool, path: &str, msg: String| if ok { Ok(()) } else { Err(ExperimentError::config(path, msg)) };
        let [zlo, zhi] = self.problem.z_range;
        check(
            zlo < zhi && zlo.is_finite() && zhi.is_finite(),
            "problem.z_range",
            format!("need lo < hi, got {zlo}, {zhi}"),
        )?;
        match self.problem.initial {
            InitialConfig::SkewedLogistic { amplitude, drift, pivot } => {
                check(
                    amplitude.is_finite() && drift.is_finite() && pivot.is_finite(),
                    "problem.initial",
                    "parameters must be finite".into(),
                )?;
            }
            InitialConfig::LogisticFront { center } => {
                check(center.is_finite(), "problem.initial.center", "must be finite".into())?
            }
        }
        if let FluxConfig::Cubic { kappa } = self.problem.flux {
            check(kappa.abs() < 1.0, "problem.flux.kappa", format!("need |kappa| < 1, got {kappa}"))?;
        }

        let g = &self.grid;
        check(
            g.half_width > 0.0 && g.half_width.is_finite(),
            "grid.half_width",
            format!("must be positive, got {}", g.half_width),
        )?;
        check(
            g.nx >= MIN_GRID_POINTS,
            "grid.nx",
            format!("{} is below the stencil width; need at least {MIN_GRID_POINTS}", g.nx),
        )?;
        check(g.cfl > 0.0 && g.cfl <= 1.0, "grid.cfl", format!("must lie in (0, 1], got {}", g.cfl))?;

        let t = &self.time;
        check(t.t_end > 0.0 && t.t_end.is_finite(), "time.t_end", format!("must be positive, got {}", t.t_end))?;
        check(
            t.dt_sample > 0.0 && t.dt_sample.is_finite(),
            "time.dt_sample",
            format!("must be positive, got {}", t.dt_sample),
        )?;
        check(
            t.snapshot_times.windows(2).all(|w| w[0] < w[1])
                && t.snapshot_times.iter().all(|&s| s > 0.0 && s <= t.t_end),
            "time.snapshot_times",
            format!("must be strictly increasing within (0, {}]", t.t_end),
        )?;

        let c = &self.collocation;
        check(c.n_nodes >= 1, "collocation.n_nodes", "need at least one node".into())?;
        check(!c.z0.is_empty(), "collocation.z0", "need at least one query point".into())?;
        check(
            c.z0.iter().all(|z| (zlo..=zhi).contains(z)),
            "collocation.z0",
            format!("query points must lie in [{zlo}, {zhi}]"),
        )?;
        check(!c.methods.is_empty(), "collocation.methods", "need at least one method".into())?;
        check(c.core_half_width > 0.0, "collocation.core_half_width", "must be positive".into())?;

        self.detection.validate().map_err(|e| ExperimentError::config("detection", e.to_string()))?;

        let r = &self.regularity;
        check(r.dt_surface > 0.0 && r.dt_surface.is_finite(), "regularity.dt_surface", "must be positive".into())?;
        check(
            r.decay_times.iter().all(|&s| s > 0.0 && s <= t.t_end),
            "regularity.decay_times",
            format!("must lie in (0, {}]", t.t_end),
        )?;
        check(r.noise_floor.is_none_or(|f| f >= 0.0), "regularity.noise_floor", "must be non-negative".into())?;

        check(
            (1..=17).contains(&self.output.precision),
            "output.precision",
            format!("must be between 1 and 17, got {}", self.output.precision),
        )?;
        Ok(())
    }

    pub fn flux(&self) -> Arc<dyn Flux> {
        match self.problem.flux {
            FluxConfig::Burgers => Arc::new(Burgers),
            FluxConfig::Cubic { kappa } => Arc::new(CubicFlux::new(kappa).expect("validated")),
        }
    }

    pub fn initial(&self) -> Arc<dyn InitialData> {
        match self.problem.initial {
            InitialConfig::SkewedLogistic { amplitude, pivot, drift } => {
                Arc::new(SkewedLogistic { amplitude, pivot, drift })
            }
            InitialConfig::LogisticFront { center } => Arc::new(LogisticFront { center }),
        }
    }

    pub fn spec(&self) -> ProblemSpec {
        let [lo, hi] = self.problem.z_range;
        ProblemSpec::new(self.flux(), self.initial(), self.grid.half_width, (lo, hi), self.problem.label.clone())
            .expect("validated")
    }

    /// Collocation nodes in `z`, mapped from `[-1, 1]` onto `z_range`.
    pub fn nodes(&self) -> Vec<f64> {
        crate::collocate::chebyshev_nodes(self.collocation.n_nodes).into_iter().map(|s| self.z_of(s)).collect()
    }

    pub fn z_of(&self, s: f64) -> f64 {
        let [lo, hi] = self.problem.z_range;
        0.5 * (lo + hi) + 0.5 * (hi - lo) * s
    }

    /// Inverse of [`Self::z_of`].
    pub fn s_of(&self, z: f64) -> f64 {
        let [lo, hi] = self.problem.z_range;
        (z - 0.5 * (lo + hi)) / (0.5 * (hi - lo))
    }

    /// The resolved configuration as TOML, without the output directory so
    /// that runs written to different places stay byte-identical.
    pub fn provenance_toml(&self) -> String {
        let mut value = toml::Table::try_from(self).expect("config serializes");
        if let Some(toml::Value::Table(out)) = value.get_mut("output") {
            out.remove("dir");
        }
        toml::to_string(&value).expect("table serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_preset_values() {
        let cfg = parse_config("preset = \"burgers-paper5\"").unwrap();
        assert_eq!(cfg.grid.half_width, 15.0);
        assert_eq!(cfg.grid.nx, 1500);
        assert_eq!(cfg.collocation.n_nodes, 10);
        assert_eq!(cfg.time.t_end, 2.2);
        assert_eq!(cfg.collocation.z0, vec![0.234]);
        assert_eq!(cfg.output.precision, 17);
    }

    #[test]
    fn regularity_preset_layers_on_reference_preset() {
        let cfg = parse_config("preset = \"burgers-paper5-regularity\"").unwrap();
        assert_eq!(cfg.collocation.n_nodes, 50);
        assert_eq!(cfg.time.t_end, 4.0);
        assert_eq!(cfg.grid.nx, 1500);
        assert_eq!(cfg.preset.as_deref(), Some("burgers-paper5-regularity"));
    }

    #[test]
    fn user_keys_override_the_preset() {
        let cfg =
            parse_config("preset = \"burgers-paper5\"\n[grid]\nnx = 375\n[collocation]\nz0 = [0.1, -0.3]").unwrap();
        assert_eq!(cfg.grid.nx, 375);
        assert_eq!(cfg.grid.half_width, 15.0);
        assert_eq!(cfg.collocation.z0, vec![0.1, -0.3]);
        assert_eq!(cfg.collocation.n_nodes, 10);
    }

    #[test]
    fn flag_preset_wins() {
        let cfg = parse_config_with_preset("preset = \"burgers-paper5\"", Some("burgers-paper5-regularity")).unwrap();
        assert_eq!(cfg.collocation.n_nodes, 50);
    }

    #[test]
    fn empty_text_is_rejected() {
        let err = parse_config("").unwrap_err();
        assert!(matches!(err, ExperimentError::Config { .. }), "{err}");
    }

    #[test]
    fn small_grid_is_a_range_error() {
        let err = parse_config("preset = \"burgers-paper5\"\n[grid]\nnx = 3").unwrap_err();
        match err {
            ExperimentError::Config { path, .. } => assert_eq!(path, "grid.nx"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = parse_config("preset = \"burgers-paper5\"\n[grid]\nnx = 100\nspacing = 2").unwrap_err();
        let ExperimentError::Config { path, message } = err else { panic!() };
        assert_eq!(path, "grid.spacing");
        assert!(message.contains("spacing"), "{message}");

        let err = parse_config("preset = \"burgers-paper5\"\n[detection]\nkapa = 0.3").unwrap_err();
        let ExperimentError::Config { path, message } = err else { panic!() };
        assert_eq!(path, "detection.kapa");
        assert!(message.contains("kapa"), "{message}");
    }

    #[test]
    fn missing_required_key_names_its_path() {
        let err = parse_config("[problem.initial]\nkind = \"logistic-front\"\n[grid]\nnx = 100\n[time]\nt_end = 1.0")
            .unwrap_err();
        let ExperimentError::Config { path, message } = err else { panic!() };
        assert_eq!(path, "grid");
        assert!(message.contains("half_width"), "{message}");
    }

    #[test]
    fn unknown_preset() {
        assert!(parse_config("preset = \"nope\"").is_err());
    }

    #[test]
    fn provenance_round_trips_without_directory() {
        let mut cfg = parse_config("preset = \"burgers-paper5\"").unwrap();
        let a = cfg.provenance_toml();
        cfg.output.dir = "elsewhere".into();
        assert_eq!(a, cfg.provenance_toml());
        assert!(!a.contains("elsewhere"));
        let back = parse_config(&a).unwrap();
        assert_eq!(back.grid, cfg.grid);
        assert_eq!(back.problem, cfg.problem);
    }

    #[test]
    fn node_mapping() {
        let mut cfg = parse_config("preset = \"burgers-paper5\"").unwrap();
        cfg.problem.z_range = [0.0, 2.0];
        for s in [-1.0, -0.3, 0.0, 0.8] {
            assert!((cfg.s_of(cfg.z_of(s)) - s).abs() < 1e-15);
        }
        assert_eq!(cfg.z_of(0.0), 1.0);
    }
}
