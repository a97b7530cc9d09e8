use shockuq::collocate::Method;
use shockuq::experiment::{self as exp, ExperimentConfig, ExperimentError};
use shockuq::problem::GridField;

const SMALL: &str = r#"
preset = "burgers-paper5"

[grid]
nx = 400

[collocation]
n_nodes = 4
"#;

fn config(text: &str) -> ExperimentConfig {
    exp::parse_config(text).unwrap()
}

fn report(q: &exp::QueryOutcome, m: Method) -> &shockuq::collocate::InterpolationReport {
    q.reports.iter().find(|r| r.method == m).unwrap()
}

#[test]
fn preset_comparison_meets_the_reference_thresholds() {
    let cfg = exp::parse_config_with_preset("", Some("burgers-paper5")).unwrap();
    let out = exp::run_compare(&cfg, 0).unwrap();
    let q = &out.queries[0];
    assert_eq!(q.z0, 0.234);
    assert!(report(q, Method::Xshift).metrics.max_away < 1e-3);
    assert!(report(q, Method::Xtshift).metrics.max_away < 1e-3);
    assert!(report(q, Method::Direct).metrics.max_away > 1e-2);
    assert_eq!(out.nodes.len(), 10);
}

#[test]
fn single_node_methods_return_the_node_solution() {
    // only t_end is solved, so the node run matches a plain solve bit for bit
    let cfg = config(
        &SMALL.replace("n_nodes = 4", "n_nodes = 1\nmethods = [\"direct\", \"xshift\"]\nsource = \"hodograph\""),
    );
    let out = exp::run_compare(&cfg, 1).unwrap();
    assert_eq!(out.nodes.len(), 1);
    assert!(out.nodes[0].z.abs() < 1e-15);
    let node: GridField = exp::solve_at(&cfg, &cfg.spec(), out.nodes[0].z, &[2.2]).unwrap().pop().unwrap();

    let q = &out.queries[0];
    assert_eq!(report(q, Method::Direct).interp, node.values);

    // the shifted method returns a whole-cell translate of the node field
    let interp = &report(q, Method::Xshift).interp;
    let n = interp.len();
    let translate = (-60i64..=60)
        .find(|&m| (100..n - 100).all(|k| (interp[k] - node.values[(k as i64 - m) as usize]).abs() < 1e-14));
    assert!(translate.is_some(), "xshift result is not a translate of the node");
}

#[test]
fn z_independent_problem_is_reproduced_exactly() {
    let cfg = config(
        r#"
[problem.initial]
kind = "logistic-front"
center = 0.0

[grid]
half_width = 15.0
nx = 300

[time]
t_end = 2.5

[collocation]
n_nodes = 3
z0 = [0.3]
source = "hodograph"
"#,
    );
    let out = exp::run_compare(&cfg, 2).unwrap();
    for r in &out.queries[0].reports {
        assert!(r.metrics.max_away < 1e-13 && r.metrics.max_near < 1e-13, "{:?}", r.method);
    }
}

#[test]
fn symmetric_base_problem_keeps_the_centre_at_zero() {
    let cfg = config(
        r#"
[problem.initial]
kind = "logistic-front"
center = 0.0

[grid]
half_width = 15.0
nx = 300

[time]
t_end = 3.0

[collocation]
n_nodes = 1

[regularity]
detected = false
"#,
    );
    let out = exp::run_regularity(&cfg, 1).unwrap();
    let node = &out.hodograph[0];
    assert_eq!(node.z, 0.0);
    let mut shocked = 0;
    for (t, s) in out.times.iter().zip(&node.states) {
        match s {
            Some(s) => {
                assert!(*t > 2.0);
                assert!(s.xc.abs() < 1e-12, "t = {t}: xc = {}", s.xc);
                shocked += 1;
            }
            None => assert!(*t <= 2.0),
        }
    }
    assert!(shocked > 0);

    let tables = exp::regularity_tables(&cfg, &out);
    let surface = String::from_utf8(tables[0].table.to_bytes(17).unwrap()).unwrap();
    assert!(surface.lines().any(|l| l.starts_with("1.0") && l.ends_with(",,,")), "pre-shock rows hold empty fields");
}

#[test]
fn u1_coefficients_decay_at_the_final_time() {
    let cfg = config(
        r#"
preset = "burgers-paper5-regularity"

[collocation]
n_nodes = 16

[regularity]
detected = false
"#,
    );
    let out = exp::run_regularity(&cfg, 0).unwrap();
    let u1 = out.decay.iter().find(|e| e.quantity == "u1" && e.t == 4.0).unwrap();
    assert!(u1.fit.unwrap().slope < 0.0);
}

#[test]
fn compare_output_does_not_depend_on_worker_count() {
    let cfg = config(SMALL);
    let bytes = |workers| -> Vec<Vec<u8>> {
        let out = exp::run_compare(&cfg, workers).unwrap();
        exp::compare_tables(&cfg, &out).iter().map(|a| a.table.to_bytes(17).unwrap()).collect()
    };
    assert_eq!(bytes(1), bytes(3));
}

#[test]
fn every_table_starts_with_the_resolved_configuration() {
    let cfg = config(SMALL);
    let out = exp::run_compare(&cfg, 0).unwrap();
    let provenance = cfg.provenance_toml();
    for a in exp::compare_tables(&cfg, &out) {
        let text = String::from_utf8(a.table.to_bytes(17).unwrap()).unwrap();
        assert!(text.starts_with("# shockuq "), "{}", a.name);
        assert!(text.contains("# nx = 400"), "{}", a.name);
        assert!(text.contains("# n_nodes = 4"), "{}", a.name);
        let block: String =
            provenance.lines().map(|l| if l.is_empty() { "#\n".to_string() } else { format!("# {l}\n") }).collect();
        assert!(text.contains(&block), "{}", a.name);
    }
    let back = exp::parse_config(&provenance).unwrap();
    assert_eq!(back.grid, cfg.grid);
    assert_eq!(back.collocation, cfg.collocation);
}

#[test]
fn write_run_emits_csvs_and_a_manifest() {
    let cfg = config(SMALL);
    let out = exp::run_compare(&cfg, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written =
        exp::write_run(dir.path(), "compare", &cfg, &exp::compare_tables(&cfg, &out), &out.timings, 2).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for want in [
        "compare_direct.csv",
        "compare_xshift.csv",
        "compare_xtshift.csv",
        "compare_summary.csv",
        "compare_nodes.csv",
        "manifest.json",
    ] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "compare");
    assert_eq!(manifest["workers"], 2);
    assert_eq!(manifest["config"]["grid"]["nx"], 400);
}

#[test]
fn late_query_point_is_a_stage_error() {
    // t*(0.6) exceeds t_end, so the (x, t)-shifted clock offset is negative
    let cfg = config(&SMALL.replace("n_nodes = 4", "n_nodes = 4\nz0 = [0.6]"));
    match exp::run_compare(&cfg, 1) {
        Err(ExperimentError::Stage { stage, .. }) => assert!(!stage.is_empty()),
        Err(other) => panic!("unexpected error {other}"),
        Ok(_) => panic!("expected an error"),
    }
}

#[test]
fn small_grid_is_rejected_with_its_key() {
    match exp::parse_config(
        "[problem.initial]\nkind = \"logistic-front\"\n[grid]\nhalf_width = 15.0\nnx = 3\n[time]\nt_end = 1.0\n",
    ) {
        Err(ExperimentError::Config { path, .. }) => assert_eq!(path, "grid.nx"),
        other => panic!("{other:?}"),
    }
}
