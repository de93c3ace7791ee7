#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

mod commands;
mod config;
mod report;

use report::{Output, Provenance, RunReport};

/// Default output directory when neither `--out` nor `output_dir` is given.
const OUT_ENV: &str = "HOROLAB_OUT";

const FILES_HELP: &str = "\
Output files (all CSV files start with a header line):
  report.json            schema 1: config echo, checks, provenance, file manifest
  curvature.csv          sample,curvature
  geodesics.csv          run,y,x0..,speed_drift,momentum_drift
  rho.csv                pair,dist,rho,gap
  face_volume.csv        face,closed,mesh,rel_err,mesh_refined,rel_err_refined
  volume_ratio.csv       t,ratio,limit
  convexity.csv          direction,multiple,a,coefficient,min
  growth_approx.csv      r,volume,log_r,log_volume
  growth_horosphere.csv  r,volume,log_r,log_volume
  growth_euclidean.csv   r,volume,log_r,log_volume
  sandwich_spot.csv      vertex,busemann,lo,hi,inside
  projection.csv         y_p,r,vertices,ratio,calibrated,jacobian_deviation,drift,height_span
  controlled_volume.csv  same columns as projection.csv
  qi_pairs.csv           dist_h,dist_approx
  qi_audit.json          a, b, violations, pairs, window
  mesh_*.txt             with export_mesh = true

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error.
The output directory defaults to $HOROLAB_OUT, then ./horolab-out.";

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Subcommand {
    CurvatureScan,
    GeodesicAudit,
    RhoAudit,
    FaceVolume,
    ConvexityScan,
    GrowthApprox,
    GrowthHorosphere,
    Sandwich,
    ProjectionDecay,
    ControlledVolume,
    QiAudit,
    FullSuite,
}

impl Subcommand {
    fn name(self) -> &'static str {
        match self {
            Self::CurvatureScan => "curvature-scan",
            Self::GeodesicAudit => "geodesic-audit",
            Self::RhoAudit => "rho-audit",
            Self::FaceVolume => "face-volume",
            Self::ConvexityScan => "convexity-scan",
            Self::GrowthApprox => "growth-approx",
            Self::GrowthHorosphere => "growth-horosphere",
            Self::Sandwich => "sandwich",
            Self::ProjectionDecay => "projection-decay",
            Self::ControlledVolume => "controlled-volume",
            Self::QiAudit => "qi-audit",
            Self::FullSuite => "full-suite",
        }
    }
}

/// Experiments on horospheres of real diagonal Heintze groups.
#[derive(Debug, Parser)]
#[command(name = "horolab", version, after_help = FILES_HELP)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (parallel builds only).
    #[arg(long)]
    threads: Option<usize>,
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("horolab: {msg}");
    ExitCode::from(2)
}

fn threads(requested: Option<usize>) -> Result<usize, String> {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = requested {
            if n == 0 {
                return Err("--threads must be positive".into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| e.to_string())?;
        }
        Ok(rayon::current_num_threads())
    }
    #[cfg(not(feature = "parallel"))]
    {
        if requested.is_some_and(|n| n != 1) {
            eprintln!("horolab: built without the parallel feature; running single-threaded");
        }
        Ok(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let mut cfg = match config::load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    for n in &cfg.notices {
        eprintln!("horolab: {n}");
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let threads = match threads(cli.threads) {
        Ok(n) => n,
        Err(e) => return usage_error(e),
    };
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("horolab-out"));
    let mut out = match Output::create(&dir) {
        Ok(o) => o,
        Err(e) => return usage_error(format!("cannot create {}: {e}", dir.display())),
    };
    let name = cli.subcommand.name();
    let start = Instant::now();
    let checks = match commands::run(name, &cfg, &mut out) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("horolab: writing output failed: {e}");
            return ExitCode::from(1);
        }
    };
    let passed = checks.iter().all(|c| c.pass);
    for c in &checks {
        eprintln!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    let mut files = out.files.clone();
    files.push("report.json".into());
    let report = RunReport {
        schema: 1,
        command: name,
        passed,
        config: &cfg,
        checks,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: start.elapsed().as_secs_f64(),
            parallel: horolab::par::is_parallel(),
            threads,
        },
        files,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Err(e) = out.write("report.json", json.as_bytes()) {
        eprintln!("horolab: writing report failed: {e}");
        return ExitCode::from(1);
    }
    eprintln!("report: {}", out.dir().join("report.json").display());
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
