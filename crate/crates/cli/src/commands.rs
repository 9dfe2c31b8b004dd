//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use spdg::cases::{self, CaseKind, CaseSpec, ConvergenceRow};
use spdg::io;
use spdg::nssolver::{Solver, SolverState, StepDiagnostics};
use spdg::{SpdgOperators, Staggering};

use crate::config::{RunConfig, Study, TestField};

/// Errors split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or usage: exit 2.
    #[error("{0}")]
    Usage(String),
    /// Solver or I/O failure: exit 1.
    #[error(transparent)]
    Failure(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Failure(e.into())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
        .map_err(CliError::Failure)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(CliError::Failure)
}

/// Result of `validate-divcurl`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivcurlReport {
    pub sp: f64,
    pub tilde: f64,
    pub passed: bool,
    pub csv: PathBuf,
}

pub fn validate_divcurl(cfg: &RunConfig) -> Result<DivcurlReport, CliError> {
    let case = match cfg.field {
        TestField::Trig => CaseSpec::new(CaseKind::Trig),
        TestField::Random => CaseSpec::new(cfg.case),
    };
    let counts = cfg.cells.unwrap_or([8; 3]);
    let grid = case.grid(counts).map_err(usage)?;
    let ops = SpdgOperators::new(grid, cfg.degree).map_err(usage)?;
    let (name, v) = match cfg.field {
        TestField::Trig => ("trig", ops.l2_project(Staggering::Primal, 3, |x| cases::trig_field(x).0)),
        TestField::Random => ("random", ops.random_field(Staggering::Primal, 3, cfg.seed)),
    };
    let (sp, tilde) = ops.divcurl_residual(&v).map_err(failure)?;
    create_dir(&cfg.out_dir)?;
    let csv = cfg.out_dir.join("divcurl.csv");
    let mut w = create(&csv)?;
    (|| -> std::io::Result<()> {
        writeln!(w, "degree,nx,ny,nz,field,seed,sp_linf,tilde_linf")?;
        writeln!(
            w,
            "{},{},{},{},{name},{},{sp:e},{tilde:e}",
            cfg.degree, counts[0], counts[1], counts[2], cfg.seed
        )?;
        w.flush()
    })()
    .with_context(|| format!("writing {}", csv.display()))?;
    Ok(DivcurlReport {
        sp,
        tilde,
        passed: sp <= cfg.threshold,
        csv,
    })
}

/// Output of `convergence`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub csv: PathBuf,
}

fn solver_counts(cfg: &RunConfig, n_h: usize) -> [usize; 3] {
    let spec = CaseSpec::new(cfg.case);
    let slab = spec.upper[2] - spec.lower[2] < spec.upper[0] - spec.lower[0];
    if slab {
        [n_h, n_h, cfg.cells.map_or(4, |c| c[2])]
    } else {
        [n_h; 3]
    }
}

pub fn convergence(cfg: &RunConfig) -> Result<ConvergenceReport, CliError> {
    if cfg.grids.is_empty() {
        return Err(usage("convergence needs a non-empty 'grids' list"));
    }
    let (stem, rows) = match cfg.study {
        Study::Operator => (
            format!("trig_{}_conv.csv", cfg.degree),
            cases::convergence_study(&cfg.grids, |n| cases::operator_level(cfg.degree, n)),
        ),
        Study::Delta => {
            let p = cfg.physics.delta_power.unwrap_or(cfg.degree as u32 + 1);
            (
                format!("abc-delta{p}_{}_conv.csv", cfg.degree),
                cases::convergence_study(&cfg.grids, |n| cases::delta_level(cfg.degree, n, p)),
            )
        }
        Study::Solver => {
            let spec = CaseSpec::new(cfg.case);
            if !spec.has_exact_evolution() {
                return Err(usage(format!(
                    "case '{}' has no closed-form solution; use abc or tgv",
                    spec.name
                )));
            }
            (
                format!("{}_{}_conv.csv", spec.name, cfg.degree),
                cases::convergence_study(&cfg.grids, |n| {
                    cases::solver_level(&spec, cfg.degree, solver_counts(cfg, n), cfg.scheme, &cfg.physics, cfg.metric)
                }),
            )
        }
    };
    let rows = rows.map_err(failure)?;
    create_dir(&cfg.out_dir)?;
    let csv = cfg.out_dir.join(stem);
    io::write_convergence(create(&csv)?, &rows).map_err(failure)?;
    Ok(ConvergenceReport { rows, csv })
}

/// Writes VTK cell means and raw DoF dumps of a state under `tag`.
pub fn write_snapshot(dir: &Path, tag: &str, ops: &SpdgOperators, s: &SolverState) -> Result<(), CliError> {
    let title = format!("{tag} t={:e} step={}", s.t, s.step);
    io::write_vtk(
        create(&dir.join(format!("{tag}_primal.vtk")))?,
        ops,
        &title,
        &[("omega", &s.omega.field), ("psi", &s.psi.field)],
    )
    .map_err(failure)?;
    io::write_vtk(create(&dir.join(format!("{tag}_dual.vtk")))?, ops, &title, &[("u", &s.u)]).map_err(failure)?;
    for (name, f) in [("omega", &s.omega.field), ("psi", &s.psi.field), ("u", &s.u)] {
        io::write_raw(create(&dir.join(format!("{tag}_{name}.raw")))?, ops, f).map_err(failure)?;
    }
    Ok(())
}

/// Output of `run`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub steps: usize,
    pub t: f64,
    pub max_involution: f64,
    pub snapshots: Vec<String>,
    pub diagnostics: PathBuf,
}

pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let spec = CaseSpec::new(cfg.case);
    let grid = spec.grid(cfg.counts()).map_err(usage)?;
    let ops = SpdgOperators::new(grid, cfg.degree).map_err(usage)?;
    let nu = cfg.physics.nu;
    let mut solver = Solver::init_well_prepared(ops, cfg.physics.clone(), cfg.scheme, |x| spec.velocity(x, 0.0, nu))
        .map_err(failure)?;
    let dir = &cfg.out_dir;
    create_dir(dir)?;
    let diag_path = dir.join("diagnostics.csv");
    let mut diag = create(&diag_path)?;
    let initial = StepDiagnostics {
        step: 0,
        time: 0.0,
        dt: 0.0,
        involutions: solver.involutions().map_err(failure)?,
        gmres_visc_iters: 0,
        gmres_stream_iters: 0,
    };
    let mut max_involution = initial.involutions.max();
    writeln!(diag, "{}", io::DIAGNOSTICS_HEADER).map_err(failure)?;
    writeln!(diag, "{}", io::diagnostics_row(&initial)).map_err(failure)?;
    let mut snapshots = vec!["snap_0000".to_string()];
    write_snapshot(dir, &snapshots[0], solver.ops(), &solver.state)?;

    let mut pending: Result<(), CliError> = Ok(());
    let outcome = solver.run(&cfg.snapshot_times, |s, d, hit| {
        max_involution = max_involution.max(d.involutions.max());
        if let Err(e) = writeln!(diag, "{}", io::diagnostics_row(d)) {
            pending = Err(failure(e));
            return Err(spdg::SpdgError::Io(std::io::Error::other("diagnostics write failed")));
        }
        if hit {
            let tag = format!("snap_{:04}", snapshots.len());
            if let Err(e) = write_snapshot(dir, &tag, s.ops(), &s.state) {
                pending = Err(e);
                return Err(spdg::SpdgError::Io(std::io::Error::other("snapshot write failed")));
            }
            snapshots.push(tag);
        }
        Ok(())
    });
    diag.flush().map_err(failure)?;
    pending?;
    match outcome {
        Ok(_) => Ok(RunReport {
            steps: solver.state.step,
            t: solver.state.t,
            max_involution,
            snapshots,
            diagnostics: diag_path,
        }),
        Err(f) => {
            write_snapshot(dir, "failed", solver.ops(), &f.state)?;
            Err(CliError::Failure(anyhow::Error::new(f).context("solver failed; last good state written as 'failed_*'")))
        }
    }
}
