use super::runner::{CompareOutcome, DetectOutcome, NodeSurface, RegularityOutcome, SolveOutcome, TrackOutcome};
use super::table::{format_float, Cell, CsvTable};
use super::{Artifact, ExperimentConfig};
use crate::collocate::{Method, QuantitySource};
use crate::problem::ValidationReport;

fn table(cfg: &ExperimentConfig, command: &str, columns: &[&str]) -> CsvTable {
    let mut t = CsvTable::new(columns);
    t.note(format!("shockuq {} {command}", env!("CARGO_PKG_VERSION")));
    t.note("resolved configuration:");
    t.note(cfg.provenance_toml());
    t
}

fn artifact(name: impl Into<String>, table: CsvTable) -> Artifact {
    Artifact { name: name.into(), table }
}

fn source_tag(s: QuantitySource) -> &'static str {
    match s {
        QuantitySource::Hodograph => "hodograph",
        QuantitySource::Detected => "detected",
    }
}

pub fn validate_tables(cfg: &ExperimentConfig, reports: &[ValidationReport]) -> Vec<Artifact> {
    let mut t =
        table(cfg, "validate", &["z", "assumption", "passed", "n_offending", "first_offending_x", "inflection"]);
    for r in reports {
        for c in &r.checks {
            t.push(vec![
                r.z.into(),
                format!("{:?}", c.assumption).into(),
                c.passed.into(),
                c.offending_x.len().into(),
                c.offending_x.first().copied().into(),
                r.inflection.into(),
            ]);
        }
    }
    vec![artifact("validate.csv", t)]
}

pub fn solve_tables(cfg: &ExperimentConfig, out: &SolveOutcome) -> Vec<Artifact> {
    let mut t = table(cfg, "solve", &["t", "x", "u"]);
    t.note(format!("z = {}", out.z));
    for snap in &out.snapshots {
        for (x, u) in snap.xs().zip(&snap.values) {
            t.push(vec![snap.t.into(), x.into(), (*u).into()]);
        }
    }
    vec![artifact("solution.csv", t)]
}

pub fn track_tables(cfg: &ExperimentConfig, out: &TrackOutcome) -> Vec<Artifact> {
    let mut t = table(cfg, "track", &["t", "u1", "u2", "xc"]);
    let c = &out.critical;
    let p = cfg.output.precision;
    t.note(format!("z = {}", out.z));
    t.note(format!(
        "critical: t_star = {}, u_star = {}, x_star = {}, x_emerge = {}",
        format_float(c.t_star, p),
        format_float(c.u_star, p),
        format_float(c.x_star, p),
        format_float(c.x_emerge, p)
    ));
    match &out.track {
        Some(tr) => {
            for k in 0..tr.len() {
                let s = tr.sample(k);
                t.push(vec![s.t.into(), s.u1.into(), s.u2.into(), s.xc.into()]);
            }
        }
        None => {
            t.note("no shock before t_end");
        }
    }
    vec![artifact("track.csv", t)]
}

pub fn detect_tables(cfg: &ExperimentConfig, out: &DetectOutcome) -> Vec<Artifact> {
    let mut t = table(cfg, "detect", &["t", "max_jump", "shock", "xc", "u1", "u2"]);
    t.note(format!("z = {}", out.z));
    match out.emergence.time() {
        Some(ts) => t.note(format!("t_star_detected = {}", format_float(ts, cfg.output.precision))),
        None => t.note("no shock detected before t_end"),
    };
    for s in &out.samples {
        let d = s.shock.as_ref();
        t.push(vec![
            s.t.into(),
            s.max_jump.into(),
            d.is_some().into(),
            d.map(|d| d.xc).into(),
            d.map(|d| d.u1).into(),
            d.map(|d| d.u2).into(),
        ]);
    }
    vec![artifact("detect.csv", t)]
}

pub fn compare_tables(cfg: &ExperimentConfig, out: &CompareOutcome) -> Vec<Artifact> {
    let p = cfg.output.precision;
    let many = out.queries.len() > 1;
    let mut arts = Vec::new();
    let mut summary =
        table(cfg, "compare", &["z0", "method", "max_err_away", "max_err_near", "l1_err", "max_err_core"]);
    summary.note(format!(
        "max_err_core is taken over |x| <= {}; runtimes are in manifest.json",
        cfg.collocation.core_half_width
    ));
    for (q, query) in out.queries.iter().enumerate() {
        for (report, core) in query.reports.iter().zip(&query.core_errors) {
            let mut t = table(cfg, "compare", &["x", "u_ref", "u_interp", "abs_error", "in_exclusion_window"]);
            t.note(format!("method = {}", report.method.tag()));
            t.note(format!("z0 = {}", query.z0));
            t.note(format!("t = {}", format_float(report.t, p)));
            t.note(format!("xc_ref = {}", format_float(query.xc_ref, p)));
            t.note(format!("exclusion = {} cells", report.exclusion));
            if report.method == Method::Xshift {
                let early: Vec<String> = out
                    .nodes
                    .iter()
                    .filter(|n| n.t_star_detected.unwrap_or(n.t_star_hodograph) >= report.t)
                    .map(|n| format!("{}", n.z))
                    .collect();
                if !early.is_empty() {
                    t.note(format!(
                        "nodes without a shock at t, aligned at their steepest point: {}",
                        early.join(", ")
                    ));
                }
            }
            if report.method == Method::Xtshift {
                if let Some(o) = query.t_offset {
                    t.note(format!(
                        "t_offset = {}; node j is sampled at t_star_j + t_offset and the result holds at t_star_N(z0) + t_offset",
                        format_float(o, p)
                    ));
                }
            }
            for k in 0..report.interp.len() {
                let (a, b) = (report.interp[k], report.reference[k]);
                t.push(vec![report.x(k).into(), b.into(), a.into(), (a - b).abs().into(), report.in_window[k].into()]);
            }
            let name = if many {
                format!("compare_{}_z{q}.csv", report.method.tag())
            } else {
                format!("compare_{}.csv", report.method.tag())
            };
            arts.push(artifact(name, t));
            let m = report.metrics;
            summary.push(vec![
                query.z0.into(),
                report.method.tag().into(),
                m.max_away.into(),
                m.max_near.into(),
                m.l1.into(),
                (*core).into(),
            ]);
        }
    }
    arts.push(artifact("compare_summary.csv", summary));

    let mut nodes = table(cfg, "compare", &["z", "t_star_hodograph", "t_star_detected", "xc_end"]);
    nodes
        .note(format!("xc source = {}; before emergence xc is the steepest point", source_tag(cfg.collocation.source)));
    for n in &out.nodes {
        nodes.push(vec![n.z.into(), n.t_star_hodograph.into(), n.t_star_detected.into(), n.xc_end.into()]);
    }
    arts.push(artifact("compare_nodes.csv", nodes));
    arts
}

fn surface_table(cfg: &ExperimentConfig, source: QuantitySource, times: &[f64], nodes: &[NodeSurface]) -> CsvTable {
    let mut t = table(cfg, "regularity", &["t", "z", "u1", "u2", "xc"]);
    t.note(format!("source = {}; empty fields mean no shock yet", source_tag(source)));
    for (i, &time) in times.iter().enumerate() {
        for n in nodes {
            let s = n.states[i];
            t.push(vec![
                time.into(),
                n.z.into(),
                s.map(|s| s.u1).into(),
                s.map(|s| s.u2).into(),
                s.map(|s| s.xc).into(),
            ]);
        }
    }
    t
}

pub fn regularity_tables(cfg: &ExperimentConfig, out: &RegularityOutcome) -> Vec<Artifact> {
    let mut arts = vec![artifact(
        "regularity_hodograph.csv",
        surface_table(cfg, QuantitySource::Hodograph, &out.times, &out.hodograph),
    )];
    if let Some(d) = &out.detected {
        arts.push(artifact("regularity_detected.csv", surface_table(cfg, QuantitySource::Detected, &out.times, d)));
    }

    let mut nodes = table(cfg, "regularity", &["z", "t_star_hodograph", "t_star_detected"]);
    for (j, h) in out.hodograph.iter().enumerate() {
        let det = out.detected.as_ref().and_then(|d| d[j].t_star);
        nodes.push(vec![h.z.into(), h.t_star.into(), det.into()]);
    }
    arts.push(artifact("regularity_nodes.csv", nodes));

    let mut coeffs = table(cfg, "regularity", &["source", "quantity", "t", "k", "coefficient"]);
    let mut fits = table(
        cfg,
        "regularity",
        &["source", "quantity", "t", "noise_floor", "slope", "intercept", "r2", "points", "last_abs_coefficient"],
    );
    fits.note("geometric fit of log|c_k| against k over coefficients above the noise floor");
    for (source, t) in &out.skipped {
        let line = format!("skipped {} slice t = {t}: some nodes have no shock yet", source_tag(*source));
        coeffs.note(&line);
        fits.note(&line);
    }
    for e in &out.decay {
        for (k, c) in e.coeffs.iter().enumerate() {
            coeffs.push(vec![source_tag(e.source).into(), e.quantity.into(), e.t.into(), k.into(), (*c).into()]);
        }
        let last = e.coeffs.last().map(|c| c.abs());
        let row = match e.fit {
            Some(f) => vec![
                source_tag(e.source).into(),
                e.quantity.into(),
                e.t.into(),
                e.floor.into(),
                f.slope.into(),
                f.intercept.into(),
                f.r2.into(),
                f.points.into(),
                last.into(),
            ],
            None => vec![
                source_tag(e.source).into(),
                e.quantity.into(),
                e.t.into(),
                e.floor.into(),
                Cell::Null,
                Cell::Null,
                Cell::Null,
                Cell::Int(0),
                last.into(),
            ],
        };
        fits.push(row);
    }
    arts.push(artifact("regularity_decay.csv", coeffs));
    arts.push(artifact("regularity_decay_fit.csv", fits));
    arts
}
