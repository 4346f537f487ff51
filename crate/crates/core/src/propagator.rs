//! Split-operator propagation through a rectangular barrier, the plane-wave
//! and packet transmission oracles, and barrier calibration.

use std::f64::consts::PI;
use std::sync::Arc;

use num::complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_gaussian, probability_on_side, Grid1D, Side, Wavefunction, WavepacketSpec};

/// Samples per box end watched for boundary contamination.
pub const EDGE_BAND: usize = 8;

/// Edge amplitude that aborts an evolution.
pub const CONTAMINATION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierPotential {
    pub height: f64,
    pub width: f64,
    pub center: f64,
}

impl BarrierPotential {
    pub fn new(height: f64, width: f64, center: f64) -> Result<Self> {
        if !(height.is_finite() && height >= 0.0) {
            return Err(Error::config(format!(
                "barrier height must be finite and non-negative, got {height}"
            )));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::config(format!(
                "barrier width must be positive, got {width}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::config("barrier center must be finite"));
        }
        Ok(Self {
            height,
            width,
            center,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (
            self.center - self.width / 2.0,
            self.center + self.width / 2.0,
        )
    }

    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        let (lo, hi) = self.support();
        let l = grid.half_width();
        if !(lo > -l && hi < l) {
            return Err(Error::config(format!(
                "barrier support [{lo}, {hi}] not inside (-{l}, {l})"
            )));
        }
        if !(grid.dx() <= self.width / 8.0) {
            return Err(Error::config(format!(
                "grid spacing {} too coarse for barrier width {} (need dx <= w/8)",
                grid.dx(),
                self.width
            )));
        }
        Ok(())
    }

    /// Potential at each sample; the support is half-open, `[lo, hi)`.
    pub fn sample(&self, grid: &Grid1D) -> Vec<f64> {
        let (lo, hi) = self.support();
        // Samples that land on an edge up to rounding count as on the edge.
        let eps = 1e-9 * grid.dx();
        grid.positions()
            .map(|x| {
                if x >= lo - eps && x < hi - eps {
                    self.height
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    pub dt: f64,
    pub steps: usize,
}

impl PropagationParams {
    pub fn total_time(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

/// Largest admissible time step: the kinetic phase at the Nyquist wavenumber
/// must stay below π.
pub fn max_time_step(grid: &Grid1D) -> f64 {
    2.0 * PI / (grid.k_max() * grid.k_max())
}

fn check_time_step(grid: &Grid1D, dt: f64) -> Result<()> {
    let bound = max_time_step(grid);
    if !(dt > 0.0 && dt < bound) {
        return Err(Error::Stability { dt, bound });
    }
    Ok(())
}

/// Strang-split propagator: `e^{-iV dt/2} e^{-iT dt} e^{-iV dt/2}`, the
/// kinetic factor applied in Fourier space.
pub struct Propagator {
    grid: Grid1D,
    dt: f64,
    potential_phase: Vec<Complex64>,
    kinetic_phase: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: &Grid1D, barrier: &BarrierPotential, dt: f64) -> Result<Self> {
        barrier.validate(grid)?;
        check_time_step(grid, dt)?;
        let potential_phase = barrier
            .sample(grid)
            .into_iter()
            .map(|v| Complex64::from_polar(1.0, -v * dt / 2.0))
            .collect();
        // The inverse FFT is unnormalized; 1/G is a power of two so folding it
        // in here is exact.
        let scale = 1.0 / grid.points() as f64;
        let kinetic_phase = (0..grid.points())
            .map(|j| {
                let k = grid.wavenumber(j);
                Complex64::from_polar(scale, -k * k * dt / 2.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points());
        let inverse = planner.plan_fft_inverse(grid.points());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            grid: *grid,
            dt,
            potential_phase,
            kinetic_phase,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn apply(&mut self, amps: &mut [Complex64]) {
        for (a, p) in amps.iter_mut().zip(&self.potential_phase) {
            *a *= p;
        }
        self.forward.process_with_scratch(amps, &mut self.scratch);
        for (a, p) in amps.iter_mut().zip(&self.kinetic_phase) {
            *a *= p;
        }
        self.inverse.process_with_scratch(amps, &mut self.scratch);
        for (a, p) in amps.iter_mut().zip(&self.potential_phase) {
            *a *= p;
        }
    }

    /// Advances `psi` by `steps` time steps, returning the largest edge
    /// amplitude seen along the way.
    pub fn advance(&mut self, psi: Wavefunction, steps: usize) -> Result<(Wavefunction, f64)> {
        if *psi.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let (grid, mut amps, t0) = psi.into_parts();
        let mut edge = edge_of(&amps);
        for n in 1..=steps {
            self.apply(&mut amps);
            let current = edge_of(&amps);
            if current > CONTAMINATION_LIMIT {
                return Err(Error::BoundaryContamination {
                    amplitude: current,
                    time: t0 + n as f64 * self.dt,
                });
            }
            edge = edge.max(current);
        }
        let t = t0 + steps as f64 * self.dt;
        Ok((Wavefunction::new(grid, amps, t)?, edge))
    }
}

fn edge_of(amps: &[Complex64]) -> f64 {
    let n = amps.len();
    let band = EDGE_BAND.min(n / 2).max(1);
    amps[..band]
        .iter()
        .chain(&amps[n - band..])
        .map(|a| a.norm_sqr())
        .fold(0.0, f64::max)
        .sqrt()
}

/// One split-operator step.
pub fn step(psi: &Wavefunction, barrier: &BarrierPotential, dt: f64) -> Result<Wavefunction> {
    let mut prop = Propagator::new(psi.grid(), barrier, dt)?;
    let mut amps = psi.amplitudes().to_vec();
    prop.apply(&mut amps);
    Wavefunction::new(*psi.grid(), amps, psi.time() + dt)
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub psi: Wavefunction,
    /// Largest |ψ| seen in the edge bands during the run.
    pub max_edge_amplitude: f64,
    /// |norm² − 1| of the final state.
    pub norm_drift: f64,
}

pub fn evolve(
    psi: &Wavefunction,
    barrier: &BarrierPotential,
    params: &PropagationParams,
) -> Result<Evolution> {
    let mut prop = Propagator::new(psi.grid(), barrier, params.dt)?;
    let (out, edge) = prop.advance(psi.clone(), params.steps)?;
    Ok(Evolution {
        norm_drift: (out.norm_sqr() - 1.0).abs(),
        psi: out,
        max_edge_amplitude: edge,
    })
}

/// When a scattered state counts as measurable: nothing left inside the
/// barrier, and every lobe well clear of the barrier center and moving away
/// from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementCriterion {
    /// Maximum |ψ| allowed inside the barrier support.
    pub barrier_amplitude: f64,
    /// Required lobe distance from the barrier center, in lobe standard
    /// deviations.
    pub lobe_separation: f64,
    /// Lobes lighter than this are ignored.
    pub min_lobe_mass: f64,
}

impl Default for MeasurementCriterion {
    fn default() -> Self {
        Self {
            barrier_amplitude: 1e-6,
            lobe_separation: 5.0,
            min_lobe_mass: 1e-6,
        }
    }
}

impl MeasurementCriterion {
    pub fn validate(&self) -> Result<()> {
        let ok = self.barrier_amplitude.is_finite()
            && self.barrier_amplitude > 0.0
            && self.lobe_separation.is_finite()
            && self.lobe_separation >= 0.0
            && self.min_lobe_mass.is_finite()
            && self.min_lobe_mass >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid measurement criterion {self:?}")))
        }
    }

    /// `Ok(())` when `psi` is measurable, otherwise the first unmet condition.
    pub fn check(&self, psi: &Wavefunction, barrier: &BarrierPotential) -> std::result::Result<(), String> {
        let (lo, hi) = barrier.support();
        let inside = psi.max_amplitude_in(lo, hi);
        if inside > self.barrier_amplitude {
            return Err(format!("amplitude {inside:e} inside the barrier"));
        }
        for side in [Side::Negative, Side::Positive] {
            let lobe = psi.lobe(side, barrier.center);
            if !(lobe.mass > self.min_lobe_mass) {
                continue;
            }
            let offset = lobe.mean - barrier.center;
            if offset.abs() < self.lobe_separation * lobe.std {
                return Err(format!(
                    "{side:?} lobe at {:.3} within {} sigma of the barrier",
                    lobe.mean, self.lobe_separation
                ));
            }
            if offset * lobe.wavenumber <= 0.0 {
                return Err(format!("{side:?} lobe still approaching the barrier"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    pub dt: f64,
    pub max_steps: usize,
    pub check_every: usize,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            max_steps: 40_000,
            check_every: 100,
        }
    }
}

impl SimulationSettings {
    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        check_time_step(grid, self.dt)?;
        if self.check_every == 0 || self.max_steps == 0 {
            return Err(Error::config("max_steps and check_every must be positive"));
        }
        Ok(())
    }
}

/// Evolves every state under the same barrier until all of them satisfy the
/// measurement criterion at a common time.
pub fn evolve_until_measurable(
    states: &[Wavefunction],
    barrier: &BarrierPotential,
    settings: &SimulationSettings,
    criterion: &MeasurementCriterion,
) -> Result<Vec<Evolution>> {
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    settings.validate(first.grid())?;
    let mut prop = Propagator::new(first.grid(), barrier, settings.dt)?;
    let mut current: Vec<Wavefunction> = states.to_vec();
    let mut edges = vec![0.0f64; states.len()];
    let mut taken = 0;
    loop {
        if current.iter().all(|psi| criterion.check(psi, barrier).is_ok()) {
            break;
        }
        if taken >= settings.max_steps {
            return Err(Error::MeasurementNotReached {
                steps: taken,
                time: current[0].time(),
            });
        }
        let chunk = settings.check_every.min(settings.max_steps - taken);
        for (psi, edge) in current.iter_mut().zip(edges.iter_mut()) {
            let (next, e) = prop.advance(psi.clone(), chunk)?;
            *psi = next;
            *edge = edge.max(e);
        }
        taken += chunk;
    }
    Ok(current
        .into_iter()
        .zip(edges)
        .map(|(psi, edge)| Evolution {
            norm_drift: (psi.norm_sqr() - 1.0).abs(),
            max_edge_amplitude: edge.max(psi.edge_amplitude(EDGE_BAND)),
            psi,
        })
        .collect())
}

/// Rectangular-barrier plane-wave transmission at wavenumber `k`.
pub fn analytic_plane_transmission(k: f64, barrier: &BarrierPotential) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::config(format!("wavenumber must be positive, got {k}")));
    }
    let v0 = barrier.height;
    if v0 == 0.0 {
        return Ok(1.0);
    }
    let energy = k * k / 2.0;
    let w = barrier.width;
    // sinh²(κw)/(V0−E) = 2w² (sinh(κw)/κw)², and the oscillating branch
    // likewise with sin; both tend to 2w² at E = V0.
    let shape = {
        let gap = 2.0 * (v0 - energy);
        let arg = gap.abs().sqrt() * w;
        let ratio = if arg < 1e-6 {
            1.0 + arg * arg / 6.0 * gap.signum()
        } else if gap > 0.0 {
            arg.sinh() / arg
        } else {
            arg.sin() / arg
        };
        ratio * ratio
    };
    Ok(1.0 / (1.0 + v0 * v0 * w * w * shape / (2.0 * energy)))
}

/// Plane-wave transmission averaged over the packet's momentum distribution.
pub fn expected_packet_transmission(spec: &WavepacketSpec, barrier: &BarrierPotential) -> f64 {
    const INTERVALS: usize = 8192;
    let k0 = spec.wavenumber.abs();
    let sigma_k = 1.0 / (2.0 * spec.width);
    let lo = (k0 - 12.0 * sigma_k).max(0.0);
    let hi = k0 + 12.0 * sigma_k;
    let h = (hi - lo) / INTERVALS as f64;
    let density = |k: f64| {
        (-(k - k0).powi(2) / (2.0 * sigma_k * sigma_k)).exp() / ((2.0 * PI).sqrt() * sigma_k)
    };
    let integrand = |k: f64| {
        if k <= 0.0 {
            0.0
        } else {
            density(k) * analytic_plane_transmission(k, barrier).unwrap_or(0.0)
        }
    };
    // Composite Simpson.
    let mut sum = integrand(lo) + integrand(hi);
    for i in 1..INTERVALS {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * integrand(lo + i as f64 * h);
    }
    sum * h / 3.0
}

/// Transmission measured from a full simulated run.
pub fn simulated_transmission(
    grid: &Grid1D,
    spec: &WavepacketSpec,
    barrier: &BarrierPotential,
    settings: &SimulationSettings,
    criterion: &MeasurementCriterion,
) -> Result<f64> {
    let psi = make_gaussian(grid, spec)?;
    let evolved = evolve_until_measurable(&[psi], barrier, settings, criterion)?;
    let psi = &evolved[0].psi;
    // Transmission is measured on the far side from the launch point.
    let side = if spec.center < barrier.center {
        Side::Positive
    } else {
        Side::Negative
    };
    probability_on_side(psi, side, barrier.center)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub barrier: BarrierPotential,
    pub transmission: f64,
    /// Every `(V0, T)` evaluated, in order.
    pub record: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    pub width: f64,
    pub center: f64,
    pub target: f64,
    pub tolerance: f64,
}

impl CalibrationTarget {
    pub fn new(width: f64, center: f64) -> Self {
        Self {
            width,
            center,
            target: 0.5,
            tolerance: 0.005,
        }
    }
}

/// Bisects the barrier height until the simulated transmission of `spec`
/// is within `tolerance` of `target`.
pub fn calibrate_barrier(
    grid: &Grid1D,
    spec: &WavepacketSpec,
    goal: &CalibrationTarget,
    settings: &SimulationSettings,
    criterion: &MeasurementCriterion,
) -> Result<Calibration> {
    const MAX_EXPANSIONS: usize = 12;
    const MAX_BISECTIONS: usize = 60;

    if !(goal.target > 0.0 && goal.target <= 1.0) {
        return Err(Error::config(format!(
            "calibration target must lie in (0, 1], got {}",
            goal.target
        )));
    }
    if !(goal.tolerance > 0.0) {
        return Err(Error::config("calibration tolerance must be positive"));
    }
    let mut record = Vec::new();
    let mut measure = |height: f64| -> Result<(BarrierPotential, f64)> {
        let barrier = BarrierPotential::new(height, goal.width, goal.center)?;
        let t = simulated_transmission(grid, spec, &barrier, settings, criterion)?;
        log::debug!("calibration V0 = {height:.6} -> T = {t:.6}");
        record.push((height, t));
        Ok((barrier, t))
    };
    let done = |t: f64| (t - goal.target).abs() <= goal.tolerance;

    let (mut lo, t_lo) = (0.0, measure(0.0)?);
    if done(t_lo.1) {
        return Ok(Calibration {
            barrier: t_lo.0,
            transmission: t_lo.1,
            record,
        });
    }
    if t_lo.1 < goal.target {
        return Err(Error::Calibration {
            reason: format!("transmission without a barrier is already below {}", goal.target),
            record,
        });
    }

    let mut hi = (spec.wavenumber * spec.wavenumber / 2.0).max(1.0);
    let mut expansions = 0;
    loop {
        let (barrier, t) = measure(hi)?;
        if done(t) {
            return Ok(Calibration {
                barrier,
                transmission: t,
                record,
            });
        }
        if t < goal.target {
            break;
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::Calibration {
                reason: format!("no barrier height up to {hi} brings T below {}", goal.target),
                record,
            });
        }
        lo = hi;
        hi *= 2.0;
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let (barrier, t) = measure(mid)?;
        if done(t) {
            return Ok(Calibration {
                barrier,
                transmission: t,
                record,
            });
        }
        if t > goal.target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration {
        reason: format!("bisection did not converge within {MAX_BISECTIONS} iterations"),
        record,
    })
}
