use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use shockuq::experiment::{self as exp, Artifact, ExperimentConfig, Timings};

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(
    name = "shockuq",
    version,
    about = "Shock tracking and shifted collocation for scalar conservation laws with random data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Built-in preset; overrides any preset named in the config file.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Worker threads for per-node solves (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Random-variable value for single-sample commands
    /// (default: the first `collocation.z0`).
    #[arg(long, global = true, allow_negative_numbers = true)]
    z: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the structural assumptions on the initial data.
    Validate,
    /// Run the WENO solver at one `z`.
    Solve,
    /// Track the shock at one `z` with the hodograph engine.
    Track,
    /// Detect emergence and shock quantities from WENO snapshots at one `z`.
    Detect,
    /// Compare direct, x-shifted and (x,t)-shifted collocation.
    Compare,
    /// Shock surfaces over (t, z) and their Chebyshev decay.
    Regularity,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Validate => "validate",
            Self::Solve => "solve",
            Self::Track => "track",
            Self::Detect => "detect",
            Self::Compare => "compare",
            Self::Regularity => "regularity",
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None if cli.preset.is_some() => String::new(),
        None => bail!("either --config or --preset is required (presets: {})", exp::PRESETS.join(", ")),
    };
    let mut cfg = exp::parse_config_with_preset(&text, cli.preset.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(z) = cli.z {
        let [lo, hi] = cfg.problem.z_range;
        if !(lo..=hi).contains(&z) {
            bail!("--z {z} lies outside problem.z_range [{lo}, {hi}]");
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let requested = cli.workers.unwrap_or(0);
    let workers = if requested == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { requested };
    let z = cli.z.unwrap_or(cfg.collocation.z0[0]);

    let (artifacts, timings): (Vec<Artifact>, Timings) = match cli.command {
        Command::Validate => {
            let zs = match cli.z {
                Some(z) => vec![z],
                None => {
                    let mut zs = cfg.nodes();
                    zs.extend(&cfg.collocation.z0);
                    zs
                }
            };
            let (reports, timings) = exp::run_validate(&cfg, &zs, workers)?;
            for r in &reports {
                let failed: Vec<String> =
                    r.checks.iter().filter(|c| !c.passed).map(|c| format!("{:?}", c.assumption)).collect();
                if failed.is_empty() {
                    say!("z = {:+.6}: all checks pass", r.z);
                } else {
                    say!("z = {:+.6}: FAILED {}", r.z, failed.join(", "));
                }
            }
            (exp::validate_tables(&cfg, &reports), timings)
        }
        Command::Solve => {
            let out = exp::run_solve(&cfg, z)?;
            say!("solved z = {z} to t = {}", cfg.time.t_end);
            (exp::solve_tables(&cfg, &out), out.timings)
        }
        Command::Track => {
            let out = exp::run_track(&cfg, z)?;
            say!(
                "z = {z}: t* = {:.12}, u* = {:.12}, x* = {:.12}",
                out.critical.t_star,
                out.critical.u_star,
                out.critical.x_star
            );
            if let Some(tr) = &out.track {
                let s = tr.sample(tr.len() - 1);
                say!("t = {}: u1 = {:.12}, u2 = {:.12}, xc = {:.12}", s.t, s.u1, s.u2, s.xc);
            }
            (exp::track_tables(&cfg, &out), out.timings)
        }
        Command::Detect => {
            let out = exp::run_detect(&cfg, z)?;
            match out.emergence.time() {
                Some(t) => say!("z = {z}: shock detected at t = {t}"),
                None => say!("z = {z}: no shock detected up to t = {}", cfg.time.t_end),
            }
            (exp::detect_tables(&cfg, &out), out.timings)
        }
        Command::Compare => {
            let out = exp::run_compare(&cfg, workers)?;
            say!("{:>10} {:>8} {:>12} {:>12} {:>12} {:>12}", "z0", "method", "max_away", "max_near", "l1", "max_core");
            for q in &out.queries {
                for (r, core) in q.reports.iter().zip(&q.core_errors) {
                    let m = r.metrics;
                    say!(
                        "{:>10.6} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                        q.z0,
                        r.method.tag(),
                        m.max_away,
                        m.max_near,
                        m.l1,
                        core
                    );
                }
            }
            (exp::compare_tables(&cfg, &out), out.timings)
        }
        Command::Regularity => {
            let out = exp::run_regularity(&cfg, workers)?;
            for e in out.decay.iter().filter(|e| e.fit.is_some()) {
                let f = e.fit.expect("filtered");
                say!(
                    "{:?} {} t = {}: slope {:.4}, r2 {:.4}, |c_last| {:.3e}",
                    e.source,
                    e.quantity,
                    e.t,
                    f.slope,
                    f.r2,
                    e.coeffs.last().map_or(0.0, |c| c.abs())
                );
            }
            (exp::regularity_tables(&cfg, &out), out.timings)
        }
    };

    let dir = PathBuf::from(&cfg.output.dir);
    let written = exp::write_run(&dir, cli.command.name(), &cfg, &artifacts, &timings, workers)?;
    for path in written {
        say!("wrote {}", path.display());
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
