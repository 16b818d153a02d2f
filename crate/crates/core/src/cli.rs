//! Command-line front end.

use crate::config::{RunConfig, RunMode};
use crate::error::Result;
use crate::experiment::{compare, in_pool, jump_replica, md_replica, ou_replica, validate_suite};
use crate::ou::{params_from_body, OuVariant};
use crate::record::TrajectoryRecord;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "rigid-gas", version, about = "Convex rigid body in a two-dimensional hard-sphere gas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Event-driven molecular dynamics of the body and N atoms.
    SimulateMd,
    /// Linear Boltzmann jump process for the body alone.
    SimulateBoltzmann,
    /// Ornstein-Uhlenbeck limit.
    SimulateOu,
    /// All three levels at matched parameters, with a comparison report.
    Compare,
    /// Shape constants and a boundary table.
    GeometryReport,
    /// Invariant suite; exits nonzero if any check fails.
    Validate {
        /// Smaller sample sizes.
        #[arg(long)]
        fast: bool,
    },
}

#[derive(Debug, Args)]
struct Flags {
    /// JSON configuration file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long = "N", global = true)]
    n_atoms: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long = "T", global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    sample_dt: Option<f64>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    #[arg(long, global = true)]
    window: Option<f64>,
    #[arg(long, global = true)]
    inertia: Option<f64>,
    /// Stop runs at the first pathological collision.
    #[arg(long, global = true)]
    killed: bool,
    /// Use the OU coefficients exactly as printed instead of the
    /// generator-consistent ones.
    #[arg(long, global = true)]
    printed_ou: bool,
    /// Disk body of the given radius.
    #[arg(long, global = true, conflicts_with = "ellipse")]
    disk: Option<f64>,
    /// Ellipse body with semi-axes A,B.
    #[arg(long, global = true, value_delimiter = ',', value_name = "A,B")]
    ellipse: Option<Vec<f64>>,
}

impl Flags {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("seed", self.seed.map(Value::from));
        put("out", self.out.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())));
        put("workers", self.workers.map(Value::from));
        put("N", self.n_atoms.map(Value::from));
        put("alpha", self.alpha.map(Value::from));
        put("beta", self.beta.map(Value::from));
        put("eta", self.eta.map(Value::from));
        put("T", self.t_end.map(Value::from));
        put("sample_dt", self.sample_dt.map(Value::from));
        put("replicas", self.replicas.map(Value::from));
        put("window", self.window.map(Value::from));
        put("inertia", self.inertia.map(Value::from));
        put("mode", self.killed.then(|| json!(RunMode::Killed)));
        put("ou_variant", self.printed_ou.then(|| json!(OuVariant::Printed)));
        put("body", self.disk.map(|r| json!({"kind": "disk", "radius": r})));
        put(
            "body",
            self.ellipse.as_ref().map(|e| match e[..] {
                [a, b] => json!({"kind": "ellipse", "a": a, "b": b}),
                // Left for config validation to reject.
                _ => json!({"kind": "ellipse", "axes": e}),
            }),
        );
        m
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::SimulateMd => "simulate-md",
        Command::SimulateBoltzmann => "simulate-boltzmann",
        Command::SimulateOu => "simulate-ou",
        Command::Compare => "compare",
        Command::GeometryReport => "geometry-report",
        Command::Validate { .. } => "validate",
    }
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, v)?;
    Ok(())
}

fn write_trajectories(dir: &Path, records: &[&TrajectoryRecord], seed: u64) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        let f = BufWriter::new(File::create(dir.join(format!("trajectory_{i:04}.csv")))?);
        r.write_csv(f, seed)?;
    }
    Ok(())
}

/// Returns whether every check passed.
fn dispatch(cli: &Cli) -> Result<bool> {
    let mut overrides = cli.flags.overrides();
    overrides.insert("command".into(), Value::from(command_name(&cli.command)));
    let cfg = RunConfig::load(cli.flags.config.as_deref(), overrides)?;
    fs::create_dir_all(&cfg.out)?;
    let start = Instant::now();
    let p = cfg.sim_params()?;
    let mut manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seed": cfg.seed,
    });
    let mut passed = true;
    match &cli.command {
        Command::SimulateMd => {
            let runs = in_pool(cfg.workers, cfg.replicas, |r| md_replica(&p, &cfg, r))?;
            let recs: Vec<_> = runs.iter().map(|r| &r.record).collect();
            write_trajectories(&cfg.out, &recs, cfg.seed)?;
            manifest["replicas"] = runs
                .iter()
                .map(|r| json!({"stats": r.stats, "killed": r.record.killed_at, "t_end": r.record.t_end}))
                .collect();
        }
        Command::SimulateBoltzmann => {
            let runs = in_pool(cfg.workers, cfg.replicas, |r| jump_replica(&p, &cfg, r))?;
            let recs: Vec<_> = runs.iter().map(|r| &r.record).collect();
            write_trajectories(&cfg.out, &recs, cfg.seed)?;
            manifest["replicas"] = runs
                .iter()
                .map(|r| json!({"stats": r.stats, "killed": r.record.killed_at, "t_end": r.record.t_end}))
                .collect();
        }
        Command::SimulateOu => {
            let ou = params_from_body(&p.consts, p.beta, cfg.ou_variant)?;
            let runs = in_pool(cfg.workers, cfg.replicas, |r| ou_replica(&p, &ou, &cfg, r))?;
            let recs: Vec<_> = runs.iter().collect();
            write_trajectories(&cfg.out, &recs, cfg.seed)?;
            manifest["ou"] = json!(ou);
        }
        Command::Compare => {
            let report = compare(&cfg)?;
            write_json(&cfg.out.join("report.json"), &report)?;
            fs::write(cfg.out.join("report.txt"), report.to_text())?;
            print!("{}", report.to_text());
            manifest["passed"] = json!(report.passed());
        }
        Command::GeometryReport => {
            write_json(&cfg.out.join("report.json"), &p.consts)?;
            let mut w = csv::Writer::from_path(cfg.out.join("boundary.csv"))?;
            w.write_record(["phi", "r1", "r2", "n1", "n2", "kappa"])?;
            let m = 720;
            for k in 0..m {
                let phi = k as f64 * std::f64::consts::TAU / m as f64;
                let b = p.body.boundary(phi);
                w.write_record([phi, b.r.x, b.r.y, b.n.x, b.n.y, b.kappa].map(|x| format!("{x:.17e}")))?;
            }
            w.flush()?;
            println!("{}", serde_json::to_string_pretty(&p.consts)?);
        }
        Command::Validate { fast } => {
            let report = validate_suite(*fast, cfg.seed)?;
            write_json(&cfg.out.join("report.json"), &report)?;
            fs::write(cfg.out.join("report.txt"), report.to_text())?;
            print!("{}", report.to_text());
            passed = report.passed();
            manifest["passed"] = json!(passed);
        }
    }
    manifest["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    write_json(&cfg.out.join("manifest.json"), &manifest)?;
    Ok(passed)
}
