use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use resmin::adapt::{run_study, AdaptRecord, LevelView, StudyError};
use resmin::config::{ConfigError, RunConfig};
use resmin::io::{write_convergence_csv, write_solver_log, write_vtk, VtkFields};
use resmin::linalg::{write_matrix_market, write_matrix_market_vector};
use resmin::problem::catalog_entries;
use serde::Serialize;
use thiserror::Error;

use crate::RunArgs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("RESMIN_THREADS: {0}")]
    Threads(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Study(#[from] StudyError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Threads(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn list_problems() -> String {
    let entries = catalog_entries();
    let width = entries.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    entries.iter().map(|(name, desc)| format!("{name:<width$}  {desc}\n")).collect()
}

pub fn init_threads() -> Result<(), CliError> {
    let threads = match std::env::var("RESMIN_THREADS") {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Threads(format!("expected a positive integer, got `{v}`"))
        })?,
        Err(_) => 1,
    };
    resmin::configure_threads(threads).map_err(CliError::Threads)
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_file(&args.config)?;
    if let Some(l) = args.levels {
        cfg.levels = l;
    }
    if let Some(p) = args.degree {
        cfg.degree = p;
    }
    if let Some(t) = args.theta {
        cfg.theta = t;
    }
    if let Some(m) = args.mode {
        cfg.mode = m.into();
    }
    if let Some(s) = args.solver {
        cfg.solver.kind = s.into();
    }
    if args.vtk {
        cfg.vtk = true;
    }
    if let Some(o) = &args.output {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    problem: &'a str,
    threads: String,
    config: &'a RunConfig,
    status: &'a str,
    error: Option<String>,
    seconds: f64,
    records: &'a [AdaptRecord],
}

/// Writes per-level files requested by the configuration.
fn level_outputs(cfg: &RunConfig, dir: &Path, vtk_name: &str, v: &LevelView<'_>) -> Result<(), CliError> {
    if cfg.vtk {
        let path = dir.join(vtk_name);
        let fields = VtkFields {
            u: &v.solution.u,
            cg: v.cg,
            eps: &v.solution.eps,
            dg: v.dg,
            indicators: &v.report.indicators,
        };
        let title = format!("resmin level {} ({} elements)", v.level, v.mesh.num_elements());
        let mut w = create(&path)?;
        write_vtk(v.mesh, Some(&fields), &title, &mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    }
    if cfg.dump_matrices {
        let mdir = dir.join("matrices");
        fs::create_dir_all(&mdir).map_err(io_err(&mdir))?;
        let s = v.system;
        for (name, m) in [("G", &s.g), ("B", &s.b), ("Bfull", &s.b_full)] {
            let path = mdir.join(format!("level_{:03}_{name}.mtx", v.level));
            let mut w = create(&path)?;
            write_matrix_market(m, &mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
        }
        let path = mdir.join(format!("level_{:03}_L.mtx", v.level));
        let mut w = create(&path)?;
        write_matrix_market_vector(&s.load, &mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    }
    Ok(())
}

fn write_metadata(path: &Path, meta: &Metadata<'_>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn threads_label() -> String {
    std::env::var("RESMIN_THREADS").unwrap_or_else(|_| "1".into())
}

pub fn study(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let problem = cfg.problem()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let start = Instant::now();
    let mut output_error = None;
    let result = run_study(&problem, &cfg.study_options(), |v| {
        eprintln!(
            "level {:>3}: {:>8} elements {:>9} dofs  estimator {:.4e}",
            v.level, v.record.elements, v.record.dofs_total, v.record.estimator
        );
        level_outputs(&cfg, &dir, &format!("level_{:03}.vtk", v.level), v).map_err(|e| {
            let msg = e.to_string();
            output_error = Some(e);
            msg.into()
        })
    });
    let (records, failure) = match result {
        Ok(r) => (r, None),
        Err(e) => (e.records.clone(), Some(e)),
    };

    let csv = dir.join("convergence.csv");
    let mut w = create(&csv)?;
    write_convergence_csv(&records, &mut w).and_then(|_| w.flush()).map_err(io_err(&csv))?;
    let log = dir.join("solver_log.csv");
    let mut w = create(&log)?;
    write_solver_log(&records, &mut w).and_then(|_| w.flush()).map_err(io_err(&log))?;
    write_metadata(
        &dir.join("run.json"),
        &Metadata {
            tool: "resmin",
            version: env!("CARGO_PKG_VERSION"),
            command: "study",
            problem: &problem.name,
            threads: threads_label(),
            config: &cfg,
            status: if failure.is_some() { "failed" } else { "ok" },
            error: failure.as_ref().map(|e| e.to_string()),
            seconds: start.elapsed().as_secs_f64(),
            records: &records,
        },
    )?;
    match (output_error, failure) {
        (Some(e), _) => Err(e),
        (None, Some(e)) => Err(e.into()),
        (None, None) => {
            println!("{} levels written to {}", records.len(), csv.display());
            Ok(())
        }
    }
}

pub fn solve(args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args)?;
    cfg.levels = 1;
    // A single solve always writes its fields.
    cfg.vtk = true;
    let problem = cfg.problem()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let start = Instant::now();
    let mut range = (0.0, 0.0);
    let mut output_error = None;
    let result = run_study(&problem, &cfg.study_options(), |v| {
        range = v.solution.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        level_outputs(&cfg, &dir, "solution.vtk", v).map_err(|e| {
            let msg = e.to_string();
            output_error = Some(e);
            msg.into()
        })
    });
    let (records, failure) = match result {
        Ok(r) => (r, None),
        Err(e) => (e.records.clone(), Some(e)),
    };
    write_metadata(
        &dir.join("run.json"),
        &Metadata {
            tool: "resmin",
            version: env!("CARGO_PKG_VERSION"),
            command: "solve",
            problem: &problem.name,
            threads: threads_label(),
            config: &cfg,
            status: if failure.is_some() { "failed" } else { "ok" },
            error: failure.as_ref().map(|e| e.to_string()),
            seconds: start.elapsed().as_secs_f64(),
            records: &records,
        },
    )?;
    if let Some(e) = output_error {
        return Err(e);
    }
    if let Some(e) = failure {
        return Err(e.into());
    }
    let r = &records[0];
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
    println!(
        "problem={} elements={} dofs_trial={} dofs_test={} dofs_total={} estimator={:.6e} err_L2={} err_Vh={} err_Vh_beta={} u_min={:.6e} u_max={:.6e}",
        problem.name,
        r.elements,
        r.dofs_trial,
        r.dofs_test,
        r.dofs_total,
        r.estimator,
        opt(r.err_l2),
        opt(r.err_vh),
        opt(r.err_vh_beta),
        range.0,
        range.1
    );
    Ok(())
}
