//! Batch front end: argument definitions and the five subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::energy::energy;
use crate::error::Error;
use crate::flow::{fit_decay, run_flow, DecayOptions, FlowProblem, FlowState, StopReason};
use crate::graphgeom::{check_admissible, pullback_geometry};
use crate::io::{surface_mesh, write_json, write_obj, write_vtk, Checkpoint, LedgerWriter};
use crate::spectra::analyze;
use crate::verify::run_suites;

#[derive(Debug, Parser)]
#[command(name = "helfrich", version, about = "Constrained bending-energy flows on graphs over spheres and tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML config file; built-in defaults apply to missing keys.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set grid.n_u=48`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (overrides `output.dir` and the environment).
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the identity and finite-difference self-checks.
    Verify(Common),
    /// Print the energy, area and volume of the initial surface.
    Energy(Common),
    /// Integrate the constrained flow, writing a ledger, checkpoints and meshes.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint instead of the configured initial surface.
        #[arg(long, value_name = "CHECKPOINT")]
        resume: Option<PathBuf>,
    },
    /// Assemble the constrained Hessian and report its spectrum.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Analyze a checkpointed surface instead of the initial one.
        #[arg(long, value_name = "CHECKPOINT")]
        checkpoint: Option<PathBuf>,
    },
    /// Fit decay laws to a flow ledger.
    FitDecay {
        #[command(flatten)]
        common: Common,
        /// Ledger CSV (default: `ledger.csv` in the output directory).
        #[arg(long, value_name = "PATH")]
        ledger: Option<PathBuf>,
        /// Known limit energy (default: `decay.f_inf` or estimated).
        #[arg(long)]
        f_inf: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Energy(_) => "energy",
            Command::Flow { .. } => "flow",
            Command::Spectrum { .. } => "spectrum",
            Command::FitDecay { .. } => "fit-decay",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Verify(c) | Command::Energy(c) => c,
            Command::Flow { common, .. } | Command::Spectrum { common, .. } | Command::FitDecay { common, .. } => {
                common
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Domain(#[from] Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> CliResult {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io("writing to stdout", e).into())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult {
    let common = cli.command.common();
    let cfg = Config::load(common.config.as_deref(), &common.overrides)?;
    let dir = cfg.output_dir(common.output_dir.as_deref());
    match &cli.command {
        Command::Verify(_) => verify(&cfg, out),
        Command::Energy(_) => energy_cmd(&cfg, out),
        Command::Flow { resume, .. } => flow(&cfg, &dir, resume.as_deref(), out),
        Command::Spectrum { checkpoint, .. } => spectrum(&cfg, &dir, checkpoint.as_deref(), out),
        Command::FitDecay { ledger, f_inf, .. } => {
            let path = ledger.clone().unwrap_or_else(|| dir.join("ledger.csv"));
            decay(&dir, &path, f_inf.or(cfg.decay.f_inf), out)
        }
    }
}

fn verify(cfg: &Config, out: &mut dyn Write) -> CliResult {
    let grid = cfg.verify_grid()?;
    let results = run_suites(&grid, &cfg.physics()?, cfg.perturbation.seed)?;
    say(out, format!("verification on {:?} grid {}x{}", grid.surface().kind(), grid.n_u(), grid.n_v()))?;
    for r in &results {
        say(out, format!("{:<4} {:<48} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail))?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    say(out, format!("{} of {} checks passed", results.len() - failed, results.len()))?;
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} verification checks failed")));
    }
    Ok(())
}

fn energy_cmd(cfg: &Config, out: &mut dyn Write) -> CliResult {
    let grid = cfg.grid()?;
    let h = cfg.initial_height(&grid);
    check_admissible(&grid, &h)?;
    let geom = pullback_geometry(&grid, &h)?;
    say(out, format!("F = {:.12}", energy(&geom, &cfg.physics()?)))?;
    say(out, format!("component 0: A = {:.12}, V = {:.12}", geom.area(), geom.volume()))
}

fn flow(cfg: &Config, dir: &Path, resume: Option<&Path>, out: &mut dyn Write) -> CliResult {
    let grids = vec![cfg.grid()?];
    let (start, targets) = match resume {
        Some(p) => {
            let ck = Checkpoint::<f64>::read(p)?;
            ck.check_grids(&grids)?;
            (ck.state, ck.targets)
        }
        None => {
            let h = cfg.initial_height(&grids[0]);
            check_admissible(&grids[0], &h)?;
            let target = cfg.target(&grids[0], &h)?;
            (FlowState::new(vec![h], cfg.flow.dt0), vec![target])
        }
    };
    let mut problem = FlowProblem::new(&grids, targets.clone(), cfg.physics()?, cfg.mobility()?)?;
    problem.proxy_length = cfg.flow.proxy_length;
    let mut ledger = LedgerWriter::create(&dir.join("ledger.csv"), grids.len())?;
    let shapes: Vec<(usize, usize)> = grids.iter().map(|g| (g.n_u(), g.n_v())).collect();
    let checkpoint = |state: &FlowState<f64>| Checkpoint {
        state: state.clone(),
        shapes: shapes.clone(),
        targets: targets.clone(),
    };
    let (ck_every, snap_every) = (cfg.flow.checkpoint_every, cfg.flow.snapshot_every);
    let write_meshes = |stem: &Path, state: &FlowState<f64>| -> crate::Result<()> {
        for (k, (g, h)) in grids.iter().zip(&state.heights).enumerate() {
            let mesh = surface_mesh(g, h)?;
            let name = |ext: &str| PathBuf::from(format!("{}_{k}.{ext}", stem.display()));
            write_obj(&name("obj"), &mesh)?;
            if cfg.output.vtk {
                write_vtk(&name("vtk"), &mesh)?;
            }
        }
        Ok(())
    };
    let run = run_flow(&problem, start, &cfg.flow_options(), |rec, state| {
        ledger.push(rec)?;
        if rec.step > 0 && ck_every > 0 && rec.step % ck_every == 0 {
            checkpoint(state).write(&dir.join(format!("checkpoints/step_{:08}.ckpt", rec.step)))?;
        }
        if rec.step > 0 && snap_every > 0 && rec.step % snap_every == 0 {
            write_meshes(&dir.join(format!("snapshots/step_{:08}", rec.step)), state)?;
        }
        Ok(())
    })?;
    checkpoint(&run.state).write(&dir.join("final.ckpt"))?;
    write_meshes(&dir.join("final"), &run.state)?;
    let last = run.trajectory.records.last().expect("at least one record");
    say(out, format!("stop: {:?} after {} steps at t = {:.6}", run.stop, run.state.step, run.state.t))?;
    say(
        out,
        format!(
            "F = {:.12}, |P grad F| = {:.3e}, records = {}",
            last.diagnostics.energy,
            last.diagnostics.grad_projected,
            run.trajectory.records.len()
        ),
    )?;
    say(out, format!("outputs in {}", dir.display()))?;
    match (run.stop, run.error) {
        (StopReason::Failure, Some(e)) => Err(e.into()),
        _ => Ok(()),
    }
}

fn spectrum(cfg: &Config, dir: &Path, checkpoint: Option<&Path>, out: &mut dyn Write) -> CliResult {
    let grid = cfg.grid()?;
    let h = match checkpoint {
        Some(p) => {
            let ck = Checkpoint::<f64>::read(p)?;
            ck.check_grids(std::slice::from_ref(&grid))?;
            ck.state.heights.into_iter().next().expect("one component")
        }
        None => cfg.initial_height(&grid),
    };
    check_admissible(&grid, &h)?;
    let geom = pullback_geometry(&grid, &h)?;
    let report = analyze(&geom, &cfg.physics()?, cfg.basis(), cfg.spectrum.tol, 1e-6)?;
    write_json(&dir.join("spectrum.json"), &report)?;
    say(out, format!("basis size {}, near-kernel dimension {}", report.basis_size, report.near_kernel_dim))?;
    say(out, format!("principal angles {:?}", report.principal_angles))?;
    if let Some(s) = report.smallest_transverse {
        say(out, format!("smallest transverse eigenvalue {s:.9e}"))?;
    }
    for w in &report.warnings {
        say(out, format!("warning: {w}"))?;
    }
    say(out, format!("report written to {}", dir.join("spectrum.json").display()))
}

fn decay(dir: &Path, ledger: &Path, f_inf: Option<f64>, out: &mut dyn Write) -> CliResult {
    let series = crate::io::read_ledger(ledger)?;
    let fit = fit_decay(&series, &DecayOptions { f_inf, ..DecayOptions::default() })?;
    write_json(&dir.join("decay.json"), &fit)?;
    say(out, format!("theta = {:.6}, type = {:?}, c0 = {:.6}", fit.theta, fit.kind, fit.c0))?;
    say(out, format!("report written to {}", dir.join("decay.json").display()))
}
