//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error,
//! 3 calibration failure, 4 degenerate (Pauli-forbidden) state, 5 sweep with
//! no valid rows.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{BarrierSetting, ConfigFile};
use crate::error::{Error, Result};
use crate::experiment::{self, resolve_barrier, run_with_barrier, simulate, write_csv, Summary};
use crate::occupancy::{
    be_probability, enumerate_mb_oracle, fd_probability, mb_probability, occupancy_vectors, ExactProb,
    DEFAULT_ENUMERATION_BUDGET,
};
use crate::propagator::{expected_packet_transmission, simulated_transmission, BarrierPotential};
use crate::report::sci;
use crate::twoparticle::make_pair;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CALIBRATION: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;
pub const EXIT_ALL_INVALID: i32 = 5;

/// Largest joint-density lattice side written by `density --which joint`.
pub const JOINT_DUMP_SIDE: usize = 256;

#[derive(Debug, Parser)]
#[command(name = "genstat", version, about = "Two-particle occupancy statistics of tunneling wavepackets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Log progress to stderr.
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print exact occupancy probabilities for N particles in M states.
    Occupancy {
        #[arg(short = 'n', long)]
        particles: u64,
        #[arg(short = 'm', long)]
        states: u64,
        #[arg(long, value_enum, default_value_t = Statistics::All)]
        statistics: Statistics,
        /// Cross-check Maxwell-Boltzmann against brute-force enumeration.
        #[arg(long)]
        oracle: bool,
    },
    /// Calibrate the barrier (or measure a fixed one) and print a JSON report.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario; writes run.csv and run.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a parameter sweep; writes sweep.csv and sweep.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Dump a wavefunction or the joint density at measurement time.
    Density {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Statistics {
    Mb,
    Be,
    Fd,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    #[value(name = "single_a")]
    SingleA,
    #[value(name = "single_b")]
    SingleB,
    Joint,
}

impl Which {
    fn file_name(self) -> &'static str {
        match self {
            Which::SingleA => "density_single_a.csv",
            Which::SingleB => "density_single_b.csv",
            Which::Joint => "density_joint.csv",
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Parse(_)
        | Error::InvalidStateCount(_)
        | Error::BudgetExceeded { .. }
        | Error::InvalidPairParameter(_)
        | Error::Stability { .. } => EXIT_USAGE,
        Error::Calibration { .. } => EXIT_CALIBRATION,
        Error::PauliDegenerate { .. } => EXIT_DEGENERATE,
        _ => EXIT_RUNTIME,
    }
}

/// Runs a parsed command line, writing tables and reports to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Occupancy {
            particles,
            states,
            statistics,
            oracle,
        } => cmd_occupancy(*particles, *states, *statistics, *oracle, stdout).map(|_| EXIT_OK),
        Command::Calibrate { config, out } => cmd_calibrate(config, out.as_deref(), stdout)
            .map(|_| EXIT_OK)
            .map_err(|e| match exit_code(&e) {
                EXIT_USAGE => e,
                _ => Error::Calibration {
                    reason: e.to_string(),
                    record: Vec::new(),
                },
            }),
        Command::Run { config, out } => cmd_run(config, out, stdout).map(|_| EXIT_OK),
        Command::Sweep { config, out, parallel } => cmd_sweep(config, out, *parallel, stdout),
        Command::Density { config, which, out } => cmd_density(config, *which, out).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("genstat: {e}");
            exit_code(&e)
        }
    }
}

/// One row per occupancy vector: exact fraction and decimal for each
/// requested statistics.
pub fn cmd_occupancy(
    particles: u64,
    states: u64,
    statistics: Statistics,
    oracle: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let vectors = occupancy_vectors(particles, states)?;
    let reference = if oracle {
        Some(enumerate_mb_oracle(particles, states, DEFAULT_ENUMERATION_BUDGET)?)
    } else {
        None
    };
    let be = be_probability(particles, states)?;
    let columns: &[Statistics] = match statistics {
        Statistics::All => &[Statistics::Mb, Statistics::Be, Statistics::Fd],
        Statistics::Mb => &[Statistics::Mb],
        Statistics::Be => &[Statistics::Be],
        Statistics::Fd => &[Statistics::Fd],
    };
    let mut header = vec!["occupancy".to_string()];
    for c in columns {
        let name = match c {
            Statistics::Mb => "mb",
            Statistics::Be => "be",
            Statistics::Fd => "fd",
            Statistics::All => unreachable!(),
        };
        header.push(format!("{name}_exact"));
        header.push(format!("{name}_decimal"));
    }
    writeln!(out, "{}", header.join("\t"))?;
    for v in &vectors {
        let mut cells = vec![v.to_string()];
        for c in columns {
            let p: ExactProb = match c {
                Statistics::Mb => mb_probability(v),
                Statistics::Be => be.clone(),
                Statistics::Fd => fd_probability(v),
                Statistics::All => unreachable!(),
            };
            cells.push(p.to_string());
            cells.push(sci(p.to_f64()));
        }
        writeln!(out, "{}", cells.join("\t"))?;
    }
    if let Some(reference) = reference {
        let mismatches: Vec<String> = vectors
            .iter()
            .filter(|v| reference.get(v) != Some(&mb_probability(v)))
            .map(|v| v.to_string())
            .collect();
        if mismatches.is_empty() {
            writeln!(out, "oracle: agree ({} vectors)", vectors.len())?;
        } else {
            writeln!(out, "oracle: DISAGREE on {}", mismatches.join(" "))?;
            return Err(Error::Consistency(f64::NAN));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CalibrationReport {
    barrier: BarrierPotential,
    transmission: f64,
    calibrated: bool,
    target: Option<f64>,
    tolerance: Option<f64>,
    expected_packet_transmission: f64,
    record: Vec<(f64, f64)>,
}

pub fn cmd_calibrate(config: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let scenario = ConfigFile::load(config)?.scenario()?;
    let report = match scenario.barrier_setting()? {
        BarrierSetting::Fixed(barrier) => {
            let t = simulated_transmission(
                &scenario.grid()?,
                &scenario.packet_a(),
                &barrier,
                &scenario.evolution,
                &scenario.measurement.criterion(),
            )?;
            CalibrationReport {
                barrier,
                transmission: t,
                calibrated: false,
                target: None,
                tolerance: None,
                expected_packet_transmission: expected_packet_transmission(&scenario.packet_a(), &barrier),
                record: vec![(barrier.height, t)],
            }
        }
        BarrierSetting::Calibrate(goal) => {
            let resolved = resolve_barrier(&scenario)?;
            let cal = resolved.calibration.expect("calibration requested");
            CalibrationReport {
                barrier: cal.barrier,
                transmission: cal.transmission,
                calibrated: true,
                target: Some(goal.target),
                tolerance: Some(goal.tolerance),
                expected_packet_transmission: expected_packet_transmission(&scenario.packet_a(), &cal.barrier),
                record: cal.record,
            }
        }
    };
    let json = serde_json::to_string_pretty(&report)?;
    writeln!(stdout, "{json}")?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("calibration.json"), format!("{json}\n"))?;
    }
    Ok(())
}

fn write_outputs(dir: &Path, stem: &str, summary: &Summary) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?);
    write_csv(&summary.rows, &mut csv)?;
    csv.flush()?;
    let json = serde_json::to_string_pretty(summary)?;
    fs::write(dir.join(format!("{stem}.json")), format!("{json}\n"))?;
    Ok(())
}

pub fn cmd_run(config: &Path, out: &Path, stdout: &mut dyn Write) -> Result<()> {
    let scenario = ConfigFile::load(config)?.scenario()?;
    let row = experiment::run_scenario(&scenario)?;
    let summary = Summary::new(
        ConfigFile::from(&scenario),
        vec![row],
        scenario.measurement.label_tolerance,
    );
    write_outputs(out, "run", &summary)?;
    write_csv(&summary.rows, stdout)?;
    Ok(())
}

pub fn cmd_sweep(config: &Path, out: &Path, parallel: Option<usize>, stdout: &mut dyn Write) -> Result<i32> {
    let sweep = ConfigFile::load(config)?.sweep()?;
    let rows = experiment::sweep(&sweep, parallel)?;
    let any_valid = rows.iter().any(|r| r.valid);
    let summary = Summary::new(
        ConfigFile::from(&sweep),
        rows,
        sweep.base.measurement.label_tolerance,
    );
    write_outputs(out, "sweep", &summary)?;
    write_csv(&summary.rows, stdout)?;
    Ok(if any_valid { EXIT_OK } else { EXIT_ALL_INVALID })
}

pub fn cmd_density(config: &Path, which: Which, out: &Path) -> Result<()> {
    let scenario = ConfigFile::load(config)?.scenario()?;
    let resolved = resolve_barrier(&scenario)?;
    let sim = simulate(&scenario, &resolved.barrier)?;
    fs::create_dir_all(out)?;
    let mut w = BufWriter::new(File::create(out.join(which.file_name()))?);
    match which {
        Which::SingleA => sim.psi_a.write_csv(&mut w)?,
        Which::SingleB => sim.psi_b.write_csv(&mut w)?,
        Which::Joint => {
            make_pair(sim.psi_a, sim.psi_b, scenario.exchange)?.write_joint_density_csv(JOINT_DUMP_SIDE, &mut w)?
        }
    }
    w.flush()?;
    Ok(())
}

/// Convenience for callers that only need the row (e.g. the acceptance suite).
pub fn run_config_file(file: &ConfigFile) -> Result<experiment::ResultRow> {
    let scenario = file.scenario()?;
    let resolved = resolve_barrier(&scenario)?;
    run_with_barrier(&scenario, &resolved, scenario.partner.separation)
}
