use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::ExperimentError;
use crate::collocate::{
    chebyshev_coeffs, decay_fit, direct_interpolate, estimate_noise_floor, method1_interpolate_relaxed,
    method2_interpolate, CollocationEnsemble, InterpolationReport, LineFit, Method, NodeSnapshot, QuantitySource,
};
use crate::detect::{detect_shock, detect_tstar, detect_xc, max_two_cell_jump, DetectedShock, Emergence};
use crate::hodograph::{
    critical_point, invert_initial, track_shock, CriticalData, ShockState, ShockTrack, TrackOptions,
};
use crate::problem::{sample_initial, validate_problem, GridField, ProblemSpec, ValidationReport};
use crate::solver::{SolverConfig, WenoSolver};

/// Sample count used for the structural checks before a run.
pub const VALIDATION_POINTS: usize = 4001;

/// Wall-clock seconds per stage, in execution order.
pub type Timings = Vec<(String, f64)>;

fn stage<E: std::fmt::Display>(name: &str, z: f64) -> impl Fn(E) -> ExperimentError + '_ {
    move |e| ExperimentError::Stage { stage: name.to_string(), message: format!("z = {z}: {e}") }
}

/// Worker pool with `workers` threads (`0` means one per core).
pub fn pool(workers: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExperimentError::Stage { stage: "pool".into(), message: e.to_string() })
}

/// Map `f` over `items` on `pool`; results come back in input order.
fn ordered<T: Sync, R: Send>(
    pool: &rayon::ThreadPool,
    items: &[T],
    f: impl Fn(&T) -> Result<R, ExperimentError> + Sync + Send,
) -> Result<Vec<R>, ExperimentError> {
    pool.install(|| items.par_iter().map(f).collect())
}

fn timed<R>(
    timings: &mut Timings,
    name: &str,
    f: impl FnOnce() -> Result<R, ExperimentError>,
) -> Result<R, ExperimentError> {
    let start = Instant::now();
    let r = f()?;
    timings.push((name.to_string(), start.elapsed().as_secs_f64()));
    Ok(r)
}

/// Sorted, de-duplicated union of time lists.
fn merge_times(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// `dt, 2 dt, ...` up to and including `t_end` (within rounding).
pub fn sample_times(dt: f64, t_end: f64) -> Vec<f64> {
    let n = (t_end / dt + 1e-9).floor() as usize;
    (1..=n).map(|k| k as f64 * dt).collect()
}

/// WENO solve at `z` returning a snapshot at every time in `times`
/// (sorted, positive), in order.
pub fn solve_at(
    cfg: &ExperimentConfig,
    spec: &ProblemSpec,
    z: f64,
    times: &[f64],
) -> Result<Vec<GridField>, ExperimentError> {
    let init = sample_initial(spec, z, cfg.grid.nx).map_err(stage("sample", z))?;
    let n = init.len();
    let solver_cfg = SolverConfig { cfl: cfg.grid.cfl, left_state: init.values[0], right_state: init.values[n - 1] };
    let solver = WenoSolver::new(spec.flux.clone(), solver_cfg).map_err(stage("solve", z))?;
    let t_end = times.last().copied().unwrap_or(0.0);
    let (_, snaps) = solver.advance_to(&init, t_end, times).map_err(stage("solve", z))?;
    Ok(snaps)
}

fn require_structure(spec: &ProblemSpec, z: f64) -> Result<(), ExperimentError> {
    let report = validate_problem(spec, z, VALIDATION_POINTS).map_err(stage("validate", z))?;
    if report.structure_ok() {
        Ok(())
    } else {
        let failed: Vec<String> =
            report.checks.iter().filter(|c| !c.passed).map(|c| format!("{:?}", c.assumption)).collect();
        Err(ExperimentError::Stage {
            stage: "validate".into(),
            message: format!("z = {z}: failed {}", failed.join(", ")),
        })
    }
}

fn critical_at(spec: &ProblemSpec, z: f64) -> Result<CriticalData, ExperimentError> {
    let inv = invert_initial(spec.init.clone(), z);
    critical_point(&inv, spec.flux.as_ref()).map_err(stage("critical", z))
}

/// Hodograph track at `z` to `t_end`, landing on `checkpoints`; `None` if
/// the shock has not formed by `t_end`.
pub fn track_at(
    spec: &ProblemSpec,
    z: f64,
    critical: &CriticalData,
    t_end: f64,
    checkpoints: &[f64],
) -> Result<Option<ShockTrack>, ExperimentError> {
    let inv = invert_initial(spec.init.clone(), z);
    let opts = TrackOptions {
        checkpoints: checkpoints.iter().copied().filter(|&t| t > critical.t_star).collect(),
        ..Default::default()
    };
    let eps = opts.eps_boot.unwrap_or_else(|| crate::hodograph::default_eps_boot(critical));
    if t_end <= critical.t_star + eps {
        return Ok(None);
    }
    track_shock(&inv, spec.flux.as_ref(), critical, t_end, &opts).map(Some).map_err(stage("track", z))
}

fn state_or_null(track: Option<&ShockTrack>, t: f64, z: f64) -> Result<Option<ShockState>, ExperimentError> {
    match track {
        Some(tr) if t > tr.critical.t_star => tr.state_at(t).map(Some).map_err(stage("track", z)),
        _ => Ok(None),
    }
}

// ---------------------------------------------------------------- validate

pub fn run_validate(
    cfg: &ExperimentConfig,
    zs: &[f64],
    workers: usize,
) -> Result<(Vec<ValidationReport>, Timings), ExperimentError> {
    let spec = cfg.spec();
    let pool = pool(workers)?;
    let mut timings = Timings::new();
    let reports = timed(&mut timings, "validate", || {
        ordered(&pool, zs, |&z| validate_problem(&spec, z, VALIDATION_POINTS).map_err(stage("validate", z)))
    })?;
    Ok((reports, timings))
}

// ---------------------------------------------------------------- solve / track / detect

pub struct SolveOutcome {
    pub z: f64,
    pub snapshots: Vec<GridField>,
    pub timings: Timings,
}

/// Snapshots at `time.snapshot_times` and `t_end`.
pub fn run_solve(cfg: &ExperimentConfig, z: f64) -> Result<SolveOutcome, ExperimentError> {
    let spec = cfg.spec();
    let mut timings = Timings::new();
    let times = merge_times(&[&cfg.time.snapshot_times, &[cfg.time.t_end]]);
    let snapshots = timed(&mut timings, "solve", || solve_at(cfg, &spec, z, &times))?;
    Ok(SolveOutcome { z, snapshots, timings })
}

pub struct TrackOutcome {
    pub z: f64,
    pub critical: CriticalData,
    pub track: Option<ShockTrack>,
    pub timings: Timings,
}

pub fn run_track(cfg: &ExperimentConfig, z: f64) -> Result<TrackOutcome, ExperimentError> {
    let spec = cfg.spec();
    let mut timings = Timings::new();
    let (critical, track) = timed(&mut timings, "track", || {
        require_structure(&spec, z)?;
        let critical = critical_at(&spec, z)?;
        let track = track_at(&spec, z, &critical, cfg.time.t_end, &cfg.time.snapshot_times)?;
        Ok((critical, track))
    })?;
    Ok(TrackOutcome { z, critical, track, timings })
}

/// One detection sample: the steepest jump and, once a shock is
/// present, its location and boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSample {
    pub t: f64,
    pub max_jump: f64,
    pub shock: Option<DetectedShock>,
}

pub struct DetectOutcome {
    pub z: f64,
    pub emergence: Emergence,
    pub samples: Vec<DetectionSample>,
    pub timings: Timings,
}

fn detection_series(
    cfg: &ExperimentConfig,
    snaps: &[GridField],
    z: f64,
) -> Result<(Emergence, Vec<DetectionSample>), ExperimentError> {
    let emergence = detect_tstar(snaps, &cfg.detection).map_err(stage("detect", z))?;
    let t_star = emergence.time().unwrap_or(f64::INFINITY);
    let samples = snaps
        .iter()
        .map(|s| {
            let (_, max_jump) = max_two_cell_jump(s).map_err(stage("detect", z))?;
            let shock =
                if s.t >= t_star { Some(detect_shock(s, &cfg.detection).map_err(stage("detect", z))?) } else { None };
            Ok(DetectionSample { t: s.t, max_jump, shock })
        })
        .collect::<Result<_, ExperimentError>>()?;
    Ok((emergence, samples))
}

/// Snapshots every `dt_sample` up to `t_end`, scanned for the shock.
pub fn run_detect(cfg: &ExperimentConfig, z: f64) -> Result<DetectOutcome, ExperimentError> {
    let spec = cfg.spec();
    let mut timings = Timings::new();
    let times = sample_times(cfg.time.dt_sample, cfg.time.t_end);
    let snaps = timed(&mut timings, "solve", || solve_at(cfg, &spec, z, &times))?;
    let (emergence, samples) = timed(&mut timings, "detect", || detection_series(cfg, &snaps, z))?;
    Ok(DetectOutcome { z, emergence, samples, timings })
}

// ---------------------------------------------------------------- compare

/// Emergence data of one collocation node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub z: f64,
    pub t_star_hodograph: f64,
    pub t_star_detected: Option<f64>,
    /// Shock centre (steepest point before emergence) at `t_end` from the
    /// configured source.
    pub xc_end: f64,
}

/// Results for one query point `z0`.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub z0: f64,
    pub xc_ref: f64,
    /// Clock offset used by the `(x, t)`-shifted method.
    pub t_offset: Option<f64>,
    pub reports: Vec<InterpolationReport>,
    /// `max |error|` on `[-a, a]`, `a = collocation.core_half_width`, per report.
    pub core_errors: Vec<f64>,
}

pub struct CompareOutcome {
    pub nodes: Vec<NodeRecord>,
    pub queries: Vec<QueryOutcome>,
    pub timings: Timings,
}

struct NodeSolve {
    record: NodeRecord,
    /// Field and shock centre at each requested time.
    at: Vec<(GridField, f64)>,
}

/// Shock centre, or before emergence the steepest point of the smooth
/// profile (which the shock later grows from).
fn shock_centre(
    source: QuantitySource,
    field: &GridField,
    track: Option<&ShockTrack>,
    critical: &CriticalData,
    z: f64,
) -> Result<f64, ExperimentError> {
    match source {
        QuantitySource::Detected => Ok(detect_xc(field).map_err(stage("detect", z))?.1),
        QuantitySource::Hodograph => Ok(match state_or_null(track, field.t, z)? {
            Some(s) => s.xc,
            None => critical.x_emerge + critical.speed * (field.t - critical.t_star),
        }),
    }
}

/// Runs the collocation comparison: per-node solves, the three
/// reconstructions at each `z0`, and reference solves at each `z0`.
pub fn run_compare(cfg: &ExperimentConfig, workers: usize) -> Result<CompareOutcome, ExperimentError> {
    let spec = cfg.spec();
    let pool = pool(workers)?;
    let col = &cfg.collocation;
    let source = col.source;
    let t_end = cfg.time.t_end;
    let nodes = cfg.nodes();
    let mut timings = Timings::new();

    let criticals = timed(&mut timings, "critical", || {
        ordered(&pool, &nodes, |&z| {
            require_structure(&spec, z)?;
            critical_at(&spec, z)
        })
    })?;
    let t_stars: Vec<f64> = criticals.iter().map(|c| c.t_star).collect();
    let ens_nodes = crate::collocate::chebyshev_nodes(nodes.len());
    let ens_weights = crate::collocate::barycentric_weights(nodes.len());

    let wants = |m: Method| col.methods.contains(&m);
    let offsets: Vec<Option<f64>> = col
        .z0
        .iter()
        .map(|&z0| {
            wants(Method::Xtshift)
                .then(|| t_end - crate::collocate::barycentric_eval(&ens_nodes, &ens_weights, &t_stars, cfg.s_of(z0)))
        })
        .collect();
    for (&z0, off) in col.z0.iter().zip(&offsets) {
        if let Some(o) = off {
            if !(*o > 0.0) {
                return Err(ExperimentError::Stage {
                    stage: "xtshift".into(),
                    message: format!("z0 = {z0}: t_end precedes the interpolated emergence time (offset {o})"),
                });
            }
        }
    }

    let sampling =
        if source == QuantitySource::Detected { sample_times(cfg.time.dt_sample, t_end) } else { Vec::new() };
    let tasks: Vec<(usize, f64)> = nodes.iter().copied().enumerate().collect();
    let solves = timed(&mut timings, "node-solves", || {
        ordered(&pool, &tasks, |&(j, z)| {
            let cr = criticals[j];
            // requested times: t_end, then each query's shifted clock
            let mut requested = vec![t_end];
            requested.extend(offsets.iter().flatten().map(|o| cr.t_star + o));
            let times = merge_times(&[&requested, &sampling]);
            let snaps = solve_at(cfg, &spec, z, &times)?;
            let track_end = times.last().copied().unwrap_or(t_end);
            let track = track_at(&spec, z, &cr, track_end, &requested)?;
            let find = |t: f64| snaps.iter().find(|s| s.t == t).expect("requested time was solved for");
            let mut at = Vec::with_capacity(requested.len());
            for &t in &requested {
                let field = find(t).clone();
                let xc = shock_centre(source, &field, track.as_ref(), &cr, z)?;
                at.push((field, xc));
            }
            let t_star_detected = if sampling.is_empty() {
                None
            } else {
                let sampled: Vec<GridField> = sampling.iter().map(|&t| find(t).clone()).collect();
                detect_tstar(&sampled, &cfg.detection).map_err(stage("detect", z))?.time()
            };
            let record = NodeRecord { z, t_star_hodograph: cr.t_star, t_star_detected, xc_end: at[0].1 };
            Ok(NodeSolve { record, at })
        })
    })?;

    let references = timed(&mut timings, "reference-solves", || {
        ordered(&pool, &col.z0, |&z0| {
            let field = solve_at(cfg, &spec, z0, &[t_end])?.pop().expect("one snapshot");
            let cr = critical_at(&spec, z0)?;
            let track = track_at(&spec, z0, &cr, t_end, &[])?;
            let xc = shock_centre(source, &field, track.as_ref(), &cr, z0)?;
            Ok((field, xc))
        })
    })?;

    let m1_t_star = |j: usize| match source {
        QuantitySource::Detected => solves[j].record.t_star_detected.unwrap_or(f64::INFINITY),
        QuantitySource::Hodograph => t_stars[j],
    };
    let queries = timed(&mut timings, "interpolate", || {
        let mut out = Vec::with_capacity(col.z0.len());
        for (q, &z0) in col.z0.iter().enumerate() {
            let s0 = cfg.s_of(z0);
            let (reference, xc_ref) = &references[q];
            let ensemble_at = |slot: usize, t_star: &dyn Fn(usize) -> f64| {
                let members = solves
                    .iter()
                    .enumerate()
                    .map(|(j, n)| NodeSnapshot {
                        z: n.record.z,
                        field: n.at[slot].0.clone(),
                        xc: n.at[slot].1,
                        t_star: t_star(j),
                    })
                    .collect();
                CollocationEnsemble::new(members, source).map_err(stage("interpolate", z0))
            };
            let mut reports = Vec::new();
            for &method in &col.methods {
                let interp = match method {
                    Method::Direct => direct_interpolate(&ensemble_at(0, &m1_t_star)?, s0),
                    Method::Xshift => method1_interpolate_relaxed(&ensemble_at(0, &m1_t_star)?, s0),
                    Method::Xtshift => {
                        // slot of this query's shifted clock among the requested times
                        let slot = 1 + offsets[..q].iter().flatten().count();
                        let offset = offsets[q].expect("offset computed for xtshift");
                        method2_interpolate(&ensemble_at(slot, &|j| t_stars[j])?, s0, offset)
                    }
                }
                .map_err(|e| ExperimentError::Stage {
                    stage: method.tag().into(),
                    message: format!("z0 = {z0}: {e}"),
                })?;
                let mut report = InterpolationReport::new(&interp, reference, *xc_ref, &cfg.detection);
                report.z0 = z0;
                reports.push(report);
            }
            let a = col.core_half_width;
            let core_errors = reports.iter().map(|r| r.max_error_on(-a, a)).collect();
            out.push(QueryOutcome { z0, xc_ref: *xc_ref, t_offset: offsets[q], reports, core_errors });
        }
        Ok(out)
    })?;

    Ok(CompareOutcome { nodes: solves.into_iter().map(|n| n.record).collect(), queries, timings })
}

// ---------------------------------------------------------------- regularity

/// Shock quantities of one node at each surface time; `None` before the
/// shock exists.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSurface {
    pub z: f64,
    pub t_star: Option<f64>,
    pub states: Vec<Option<ShockState>>,
}

/// Chebyshev coefficients of one quantity across the nodes at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayEntry {
    pub source: QuantitySource,
    pub quantity: &'static str,
    pub t: f64,
    pub coeffs: Vec<f64>,
    /// Noise floor used for the fit.
    pub floor: f64,
    pub fit: Option<LineFit>,
}

pub struct RegularityOutcome {
    pub times: Vec<f64>,
    pub hodograph: Vec<NodeSurface>,
    pub detected: Option<Vec<NodeSurface>>,
    pub decay: Vec<DecayEntry>,
    /// Decay slices skipped because some node had no shock yet.
    pub skipped: Vec<(QuantitySource, f64)>,
    pub timings: Timings,
}

pub fn surface_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let t_end = cfg.time.t_end;
    let mut ts: Vec<f64> = vec![0.0];
    ts.extend(sample_times(cfg.regularity.dt_surface, t_end));
    let decay = cfg.regularity.decay_slices(t_end);
    merge_times(&[&ts, &[t_end], &decay])
}

fn decay_entries(
    cfg: &ExperimentConfig,
    source: QuantitySource,
    times: &[f64],
    surfaces: &[NodeSurface],
    skipped: &mut Vec<(QuantitySource, f64)>,
) -> Vec<DecayEntry> {
    let mut out = Vec::new();
    for t in cfg.regularity.decay_slices(cfg.time.t_end) {
        let i = times.iter().position(|&s| s == t).expect("decay slices are surface times");
        let states: Option<Vec<ShockState>> = surfaces.iter().map(|n| n.states[i]).collect();
        let Some(states) = states else {
            skipped.push((source, t));
            continue;
        };
        let quantities: [(&'static str, fn(&ShockState) -> f64); 3] =
            [("u1", |s| s.u1), ("u2", |s| s.u2), ("xc", |s| s.xc)];
        for (quantity, get) in quantities {
            let samples: Vec<f64> = states.iter().map(get).collect();
            let coeffs = chebyshev_coeffs(&samples);
            let floor = cfg.regularity.noise_floor.unwrap_or_else(|| estimate_noise_floor(&coeffs));
            let fit = decay_fit(&coeffs, floor);
            out.push(DecayEntry { source, quantity, t, coeffs, floor, fit });
        }
    }
    out
}

/// Per-node shock surfaces over `t` and the Chebyshev decay of the shock
/// quantities in `z`.
pub fn run_regularity(cfg: &ExperimentConfig, workers: usize) -> Result<RegularityOutcome, ExperimentError> {
    let spec = cfg.spec();
    let pool = pool(workers)?;
    let nodes = cfg.nodes();
    let times = surface_times(cfg);
    let t_end = cfg.time.t_end;
    let mut timings = Timings::new();

    let hodograph = timed(&mut timings, "hodograph", || {
        ordered(&pool, &nodes, |&z| {
            require_structure(&spec, z)?;
            let cr = critical_at(&spec, z)?;
            let track = track_at(&spec, z, &cr, t_end, &times)?;
            let states = times.iter().map(|&t| state_or_null(track.as_ref(), t, z)).collect::<Result<_, _>>()?;
            Ok(NodeSurface { z, t_star: Some(cr.t_star), states })
        })
    })?;

    let detected = if cfg.regularity.detected {
        let sampling = sample_times(cfg.time.dt_sample, t_end);
        let solve_times = merge_times(&[&times[1..], &sampling]);
        Some(timed(&mut timings, "detected", || {
            ordered(&pool, &nodes, |&z| {
                let snaps = solve_at(cfg, &spec, z, &solve_times)?;
                let find = |t: f64| snaps.iter().find(|s| s.t == t);
                let sampled: Vec<GridField> = sampling.iter().filter_map(|&t| find(t).cloned()).collect();
                let t_star = detect_tstar(&sampled, &cfg.detection).map_err(stage("detect", z))?.time();
                let states = times
                    .iter()
                    .map(|&t| match (t_star, find(t)) {
                        (Some(ts), Some(field)) if t >= ts => {
                            let d = detect_shock(field, &cfg.detection).map_err(stage("detect", z))?;
                            Ok(Some(ShockState { t, u1: d.u1, u2: d.u2, xc: d.xc }))
                        }
                        _ => Ok(None),
                    })
                    .collect::<Result<_, ExperimentError>>()?;
                Ok(NodeSurface { z, t_star, states })
            })
        })?)
    } else {
        None
    };

    let mut skipped = Vec::new();
    let mut decay = decay_entries(cfg, QuantitySource::Hodograph, &times, &hodograph, &mut skipped);
    if let Some(d) = &detected {
        decay.extend(decay_entries(cfg, QuantitySource::Detected, &times, d, &mut skipped));
    }
    Ok(RegularityOutcome { times, hodograph, detected, decay, skipped, timings })
}
