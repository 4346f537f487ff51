//! End-to-end scenarios: calibrate the barrier, launch packets A and B,
//! evolve both until they have cleared the barrier, and measure the joint
//! statistics of the symmetrized pair. Sweeps repeat this over one knob.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BarrierSetting, ConfigFile, ScenarioConfig, SweepConfig, SweepParameter};
use crate::error::{Error, Result};
use crate::grid::{inner_product, make_gaussian, Wavefunction};
use crate::occupancy::{
    be_probability, classify_pair, fd_probability, mb_probability, occupancy_vectors, ExactProb,
    StatisticsLabel,
};
use crate::propagator::{
    calibrate_barrier, evolve_until_measurable, BarrierPotential, Calibration, MeasurementCriterion,
    Propagator,
};
use crate::report::sci;
use crate::twoparticle::{joint_probabilities, make_pair, Exchange, JointStats, SymmetrizedPair, PAULI_GUARD};

/// Column order of the result CSV.
pub const CSV_HEADER: &str =
    "param,p20,p02,p11,a,s_abs,i_plus_abs,i_minus_abs,t_a,t_b,label,norm_drift,leakage,t_meas,valid";

/// The barrier a scenario runs with, and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedBarrier {
    pub barrier: BarrierPotential,
    pub calibration: Option<Calibration>,
}

pub fn resolve_barrier(config: &ScenarioConfig) -> Result<ResolvedBarrier> {
    match config.barrier_setting()? {
        BarrierSetting::Fixed(barrier) => Ok(ResolvedBarrier {
            barrier,
            calibration: None,
        }),
        BarrierSetting::Calibrate(goal) => {
            let cal = calibrate_barrier(
                &config.grid()?,
                &config.packet_a(),
                &goal,
                &config.evolution,
                &config.measurement.criterion(),
            )?;
            log::info!(
                "calibrated V0 = {:.6} (T = {:.6}, {} runs)",
                cal.barrier.height,
                cal.transmission,
                cal.record.len()
            );
            Ok(ResolvedBarrier {
                barrier: cal.barrier,
                calibration: Some(cal),
            })
        }
    }
}

/// Joint statistics, refusing states that have not finished scattering.
pub fn measure(
    pair: &SymmetrizedPair,
    barrier: &BarrierPotential,
    criterion: &MeasurementCriterion,
) -> Result<JointStats> {
    for (name, psi) in [("A", pair.psi_a()), ("B", pair.psi_b())] {
        criterion
            .check(psi, barrier)
            .map_err(|why| Error::PrematureMeasurement(format!("packet {name}: {why}")))?;
    }
    joint_probabilities(pair, barrier.center)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaterSample {
    pub time: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Largest |norm² − 1| of the two packets at measurement time.
    pub norm_drift: f64,
    /// Largest edge amplitude seen by either packet up to measurement.
    pub leakage: f64,
    pub t_meas: f64,
    pub barrier_height: f64,
    /// Simulated transmission achieved by calibration, when calibrated.
    pub calibrated_transmission: Option<f64>,
    /// `a` re-measured at later times.
    pub later: Vec<LaterSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub param: f64,
    pub stats: Option<JointStats>,
    pub label: Option<StatisticsLabel>,
    pub diagnostics: Option<Diagnostics>,
    pub valid: bool,
    /// Why the row is invalid, if it is.
    pub problem: Option<String>,
}

impl ResultRow {
    fn failed(param: f64, err: &Error) -> Self {
        ResultRow {
            param,
            stats: None,
            label: None,
            diagnostics: None,
            valid: false,
            problem: Some(format!("{}: {err}", err.kind())),
        }
    }

    pub fn write_csv_line<W: Write>(&self, mut out: W) -> Result<()> {
        let nan = f64::NAN;
        let s = self.stats;
        let get = |f: fn(&JointStats) -> f64| s.as_ref().map_or(nan, f);
        let d = self.diagnostics.as_ref();
        let label = match (&self.label, &self.problem) {
            (Some(l), _) => l.as_str().to_string(),
            (None, Some(p)) => p.split(':').next().unwrap_or("error").to_string(),
            (None, None) => "none".to_string(),
        };
        let fields = [
            sci(self.param),
            sci(get(|s| s.p20)),
            sci(get(|s| s.p02)),
            sci(get(|s| s.p11)),
            sci(get(|s| s.a)),
            sci(get(|s| s.s_abs)),
            sci(get(|s| s.i_plus.norm())),
            sci(get(|s| s.i_minus.norm())),
            sci(get(|s| s.t_a)),
            sci(get(|s| s.t_b)),
            label,
            sci(d.map_or(nan, |d| d.norm_drift)),
            sci(d.map_or(nan, |d| d.leakage)),
            sci(d.map_or(nan, |d| d.t_meas)),
            self.valid.to_string(),
        ];
        writeln!(out, "{}", fields.join(","))?;
        Ok(())
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        row.write_csv_line(&mut out)?;
    }
    Ok(())
}

/// Evolved packets at measurement time, with the run diagnostics.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub psi_a: Wavefunction,
    pub psi_b: Wavefunction,
    pub barrier: BarrierPotential,
    pub norm_drift: f64,
    pub leakage: f64,
}

/// Initial packets A and B. |s| is conserved by the evolution, so a
/// degenerate fermion pair is refused here, before any propagation.
pub fn launch(config: &ScenarioConfig) -> Result<(Wavefunction, Wavefunction)> {
    let grid = config.grid()?;
    let a = make_gaussian(&grid, &config.packet_a())?;
    let b = make_gaussian(&grid, &config.packet_b())?;
    if config.exchange == Exchange::Fermion {
        let s2 = inner_product(&a, &b)?.norm_sqr();
        if 1.0 - s2 <= PAULI_GUARD {
            return Err(Error::PauliDegenerate { overlap_sqr: s2 });
        }
    }
    Ok((a, b))
}

/// Launches both packets and evolves them until the measurement criterion
/// holds for each.
pub fn simulate(config: &ScenarioConfig, barrier: &BarrierPotential) -> Result<Simulated> {
    let (a, b) = launch(config)?;
    let criterion = config.measurement.criterion();
    let mut evolved = evolve_until_measurable(&[a, b], barrier, &config.evolution, &criterion)?;
    let eb = evolved.pop().expect("two packets");
    let ea = evolved.pop().expect("two packets");
    Ok(Simulated {
        norm_drift: ea.norm_drift.max(eb.norm_drift),
        leakage: ea.max_edge_amplitude.max(eb.max_edge_amplitude),
        psi_a: ea.psi,
        psi_b: eb.psi,
        barrier: *barrier,
    })
}

/// Runs one scenario with an already resolved barrier.
pub fn run_with_barrier(config: &ScenarioConfig, resolved: &ResolvedBarrier, param: f64) -> Result<ResultRow> {
    config.validate()?;
    let sim = simulate(config, &resolved.barrier)?;
    let criterion = config.measurement.criterion();
    let t_meas = sim.psi_a.time();
    let pair = make_pair(sim.psi_a, sim.psi_b, config.exchange)?;
    let stats = measure(&pair, &resolved.barrier, &criterion)?;

    let m = &config.measurement;
    let mut later = Vec::with_capacity(m.stability_checks);
    let mut leakage = sim.leakage;
    let mut norm_drift = sim.norm_drift;
    if m.stability_checks > 0 {
        let steps = (m.stability_interval / config.evolution.dt).round().max(1.0) as usize;
        let mut prop = Propagator::new(&config.grid()?, &resolved.barrier, config.evolution.dt)?;
        let (mut a, mut b) = (pair.psi_a().clone(), pair.psi_b().clone());
        for _ in 0..m.stability_checks {
            let (na, ea) = prop.advance(a, steps)?;
            let (nb, eb) = prop.advance(b, steps)?;
            leakage = leakage.max(ea).max(eb);
            norm_drift = norm_drift
                .max((na.norm_sqr() - 1.0).abs())
                .max((nb.norm_sqr() - 1.0).abs());
            let p = make_pair(na.clone(), nb.clone(), config.exchange)?;
            later.push(LaterSample {
                time: na.time(),
                a: joint_probabilities(&p, resolved.barrier.center)?.a,
            });
            a = na;
            b = nb;
        }
    }

    let calibrated_transmission = resolved.calibration.as_ref().map(|c| c.transmission);
    let mut problems = Vec::new();
    if norm_drift > m.norm_drift {
        problems.push(format!("norm drift {norm_drift:e}"));
    }
    if leakage > m.edge_amplitude {
        problems.push(format!("edge leakage {leakage:e}"));
    }
    let slack = 1e-9;
    if [stats.p20, stats.p02, stats.p11]
        .iter()
        .any(|p| !(*p >= -slack && *p <= 1.0 + slack))
    {
        problems.push("probability outside [0, 1]".to_string());
    }
    if let (Some(cal), BarrierSetting::Calibrate(goal)) = (&resolved.calibration, config.barrier_setting()?) {
        if (cal.transmission - goal.target).abs() > goal.tolerance {
            problems.push(format!("calibration missed: T = {}", cal.transmission));
        }
    }

    Ok(ResultRow {
        param,
        label: Some(classify_pair(stats.a, m.label_tolerance)),
        stats: Some(stats),
        diagnostics: Some(Diagnostics {
            norm_drift,
            leakage,
            t_meas,
            barrier_height: resolved.barrier.height,
            calibrated_transmission,
            later,
        }),
        valid: problems.is_empty(),
        problem: (!problems.is_empty()).then(|| format!("diagnostics: {}", problems.join("; "))),
    })
}

/// Calibrates (or takes) the barrier, then runs the scenario. The `param`
/// column holds the partner separation.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ResultRow> {
    config.validate()?;
    launch(config)?;
    let resolved = resolve_barrier(config)?;
    run_with_barrier(config, &resolved, config.parameter_value(SweepParameter::SeparationD))
}

/// One row per sweep value, in input order. Failures become invalid rows.
///
/// When the swept knob leaves packet A alone the barrier is calibrated once
/// and shared; otherwise each row calibrates for its own packet.
/// `threads = None` uses the global rayon pool.
pub fn sweep(config: &SweepConfig, threads: Option<usize>) -> Result<Vec<ResultRow>> {
    match config.parameter {
        SweepParameter::SeparationD | SweepParameter::WavenumberDk => {
            sweep_rows(config, Some(&resolve_barrier(&config.base)), threads)
        }
        SweepParameter::PhaseK0d => sweep_rows(config, None, threads),
    }
}

/// [`sweep`] with a barrier resolved beforehand, for sweeps whose knob does
/// not touch packet A.
pub fn sweep_with_barrier(
    config: &SweepConfig,
    resolved: &ResolvedBarrier,
    threads: Option<usize>,
) -> Result<Vec<ResultRow>> {
    if config.parameter == SweepParameter::PhaseK0d {
        return Err(Error::config("a phase_k0d sweep changes packet A and needs a barrier per row"));
    }
    sweep_rows(config, Some(&Ok(resolved.clone())), threads)
}

fn sweep_rows(
    config: &SweepConfig,
    shared: Option<&Result<ResolvedBarrier>>,
    threads: Option<usize>,
) -> Result<Vec<ResultRow>> {
    let run_row = |&value: &f64| -> ResultRow {
        let scenario = match config.base.with_parameter(config.parameter, value) {
            Ok(s) => s,
            Err(e) => return ResultRow::failed(value, &e),
        };
        let resolved = match shared {
            Some(Ok(r)) => Ok(r.clone()),
            Some(Err(e)) => Err(Error::Calibration {
                reason: e.to_string(),
                record: Vec::new(),
            }),
            None => resolve_barrier(&scenario),
        };
        match resolved.and_then(|r| run_with_barrier(&scenario, &r, value)) {
            Ok(row) => row,
            Err(e) => {
                log::warn!("sweep value {value}: {e}");
                ResultRow::failed(value, &e)
            }
        }
    };
    let rows = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(|| config.values.par_iter().map(run_row).collect()),
        None => config.values.par_iter().map(run_row).collect(),
    };
    Ok(rows)
}

/// JSON summary written next to every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub version: &'static str,
    pub config: ConfigFile,
    pub rows: Vec<ResultRow>,
    pub comparisons: Vec<Option<CountingReport>>,
}

impl Summary {
    pub fn new(config: ConfigFile, rows: Vec<ResultRow>, label_tolerance: f64) -> Self {
        let comparisons = rows
            .iter()
            .map(|r| compare_with_counting(r, label_tolerance))
            .collect();
        Summary {
            version: crate::VERSION,
            config,
            rows,
            comparisons,
        }
    }
}

/// Reference point for `N = M = 2`, in `{2,0}, {0,2}, {1,1}` order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferencePoint {
    pub name: &'static str,
    pub p20: ExactProb,
    pub p02: ExactProb,
    pub p11: ExactProb,
    /// Largest componentwise distance from the measured row.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingReport {
    pub a: f64,
    pub label: StatisticsLabel,
    pub references: Vec<ReferencePoint>,
}

impl CountingReport {
    pub fn distance_to(&self, name: &str) -> Option<f64> {
        self.references.iter().find(|r| r.name == name).map(|r| r.distance)
    }
}

/// Places a measured row next to the exact MB, BE and FD counting results.
/// `None` for rows without statistics.
pub fn compare_with_counting(row: &ResultRow, tol: f64) -> Option<CountingReport> {
    let stats = row.stats?;
    let vectors = occupancy_vectors(2, 2).expect("two states");
    let be = be_probability(2, 2).expect("two states");
    let tables: [(&'static str, Vec<ExactProb>); 3] = [
        ("MB", vectors.iter().map(mb_probability).collect()),
        ("BE", vec![be.clone(), be.clone(), be]),
        ("FD", vectors.iter().map(fd_probability).collect()),
    ];
    let measured = [stats.p20, stats.p02, stats.p11];
    let references = tables
        .into_iter()
        .map(|(name, p)| {
            let distance = p
                .iter()
                .zip(measured)
                .map(|(r, m)| (r.to_f64() - m).abs())
                .fold(0.0, f64::max);
            let [p20, p02, p11]: [ExactProb; 3] = p.try_into().expect("three vectors");
            ReferencePoint {
                name,
                p20,
                p02,
                p11,
                distance,
            }
        })
        .collect();
    Some(CountingReport {
        a: stats.a,
        label: classify_pair(stats.a, tol),
        references,
    })
}
