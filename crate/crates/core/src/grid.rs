//! Uniform periodic 1D grid and sampled wavefunctions.
//!
//! Units are natural (ħ = m = 1). Integrals are plain Riemann sums over the
//! samples, which for a periodic band-limited function is the spectrally
//! exact quadrature.

use std::f64::consts::PI;
use std::io::Write;

use num::complex::Complex64;
use num::Zero;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::sci;

/// Largest grid accepted; keeps allocations bounded for untrusted configs.
pub const MAX_POINTS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    half_width: f64,
    points: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::config(format!(
                "grid half width must be positive and finite, got {half_width}"
            )));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::config(format!(
                "grid points must be a power of two >= 2, got {points}"
            )));
        }
        if points > MAX_POINTS {
            return Err(Error::config(format!(
                "grid points {points} exceeds limit {MAX_POINTS}"
            )));
        }
        Ok(Self {
            half_width,
            points,
            dx: 2.0 * half_width / points as f64,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|j| self.x(j))
    }

    /// Wavenumber of FFT bin `j` (standard ordering, negative frequencies in
    /// the upper half).
    pub fn wavenumber(&self, j: usize) -> f64 {
        let dk = 2.0 * PI / (self.points as f64 * self.dx);
        if j < self.points / 2 {
            j as f64 * dk
        } else {
            (j as f64 - self.points as f64) * dk
        }
    }

    /// Nyquist wavenumber π/dx.
    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    /// Index of the first sample with `x >= boundary`.
    pub fn split_index(&self, boundary: f64) -> usize {
        let guess = ((boundary + self.half_width) / self.dx).ceil();
        let mut idx = guess.clamp(0.0, self.points as f64) as usize;
        while idx > 0 && self.x(idx - 1) >= boundary {
            idx -= 1;
        }
        while idx < self.points && self.x(idx) < boundary {
            idx += 1;
        }
        idx
    }

    fn check_boundary(&self, boundary: f64) -> Result<()> {
        if boundary > -self.half_width && boundary < self.half_width {
            Ok(())
        } else {
            Err(Error::config(format!(
                "boundary {boundary} outside (-{L}, {L})",
                L = self.half_width
            )))
        }
    }
}

/// Which half-line an integral runs over. The sample sitting exactly on the
/// boundary belongs to the positive side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Negative,
    Positive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: Grid1D,
    amplitudes: Vec<Complex64>,
    time: f64,
}

/// Mass, mean position and spread of the part of a wavefunction on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lobe {
    pub mass: f64,
    pub mean: f64,
    pub std: f64,
    /// Mean wavenumber of the restricted part.
    pub wavenumber: f64,
}

impl Wavefunction {
    pub fn new(grid: Grid1D, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.points() {
            return Err(Error::config(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.points()
            )));
        }
        Ok(Self {
            grid,
            amplitudes,
            time,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn into_parts(self) -> (Grid1D, Vec<Complex64>, f64) {
        (self.grid, self.amplitudes, self.time)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn normalized(mut self) -> Self {
        let scale = self.norm_sqr().sqrt().recip();
        self.amplitudes.iter_mut().for_each(|a| *a *= scale);
        self
    }

    /// Scalar multiple, e.g. a global phase.
    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
        self
    }

    /// Unnormalized forward DFT of the samples.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.amplitudes.clone();
        FftPlanner::new()
            .plan_fft_forward(buf.len())
            .process(&mut buf);
        buf
    }

    /// `norm_sqr` evaluated from the spectral representation (Parseval).
    pub fn spectral_norm_sqr(&self) -> f64 {
        let g = self.grid.points as f64;
        self.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx / g
    }

    pub fn position_mean(&self) -> f64 {
        let (m0, m1) = self
            .amplitudes
            .iter()
            .zip(self.grid.positions())
            .fold((0.0, 0.0), |(m0, m1), (a, x)| {
                let p = a.norm_sqr();
                (m0 + p, m1 + p * x)
            });
        m1 / m0
    }

    pub fn position_std(&self) -> f64 {
        let mean = self.position_mean();
        let (m0, m2) = self
            .amplitudes
            .iter()
            .zip(self.grid.positions())
            .fold((0.0, 0.0), |(m0, m2), (a, x)| {
                let p = a.norm_sqr();
                (m0 + p, m2 + p * (x - mean) * (x - mean))
            });
        (m2 / m0).sqrt()
    }

    /// Spectral first moment `Σ k |ψ̂(k)|² / Σ |ψ̂(k)|²`.
    pub fn momentum_mean(&self) -> f64 {
        let spec = self.spectrum();
        let (m0, m1) = spec.iter().enumerate().fold((0.0, 0.0), |(m0, m1), (j, c)| {
            let p = c.norm_sqr();
            (m0 + p, m1 + p * self.grid.wavenumber(j))
        });
        m1 / m0
    }

    /// Spectral derivative dψ/dx.
    pub fn derivative(&self) -> Vec<Complex64> {
        let g = self.grid.points;
        let mut planner = FftPlanner::new();
        let mut buf = self.spectrum();
        for (j, c) in buf.iter_mut().enumerate() {
            *c *= Complex64::new(0.0, self.grid.wavenumber(j)) / g as f64;
        }
        planner.plan_fft_inverse(g).process(&mut buf);
        buf
    }

    fn side_range(&self, side: Side, boundary: f64) -> std::ops::Range<usize> {
        let split = self.grid.split_index(boundary);
        match side {
            Side::Negative => 0..split,
            Side::Positive => split..self.grid.points,
        }
    }

    /// Moments of the part of ψ on one side of `boundary`.
    pub fn lobe(&self, side: Side, boundary: f64) -> Lobe {
        let range = self.side_range(side, boundary);
        let deriv = self.derivative();
        let (mut m0, mut m1, mut m2, mut current) = (0.0, 0.0, 0.0, 0.0);
        for j in range.clone() {
            let p = self.amplitudes[j].norm_sqr();
            let x = self.grid.x(j);
            m0 += p;
            m1 += p * x;
            m2 += p * x * x;
            current += (self.amplitudes[j].conj() * deriv[j]).im;
        }
        if m0 == 0.0 {
            return Lobe {
                mass: 0.0,
                mean: f64::NAN,
                std: f64::NAN,
                wavenumber: f64::NAN,
            };
        }
        let mean = m1 / m0;
        Lobe {
            mass: m0 * self.grid.dx,
            mean,
            std: (m2 / m0 - mean * mean).max(0.0).sqrt(),
            wavenumber: current / m0,
        }
    }

    /// Largest |ψ| over samples with `lo <= x <= hi`.
    pub fn max_amplitude_in(&self, lo: f64, hi: f64) -> f64 {
        self.grid
            .positions()
            .zip(&self.amplitudes)
            .filter(|(x, _)| *x >= lo && *x <= hi)
            .map(|(_, a)| a.norm())
            .fold(0.0, f64::max)
    }

    /// Largest |ψ| over the outermost `band` samples on each end of the box.
    pub fn edge_amplitude(&self, band: usize) -> f64 {
        let band = band.min(self.amplitudes.len() / 2).max(1);
        let n = self.amplitudes.len();
        self.amplitudes[..band]
            .iter()
            .chain(&self.amplitudes[n - band..])
            .map(|a| a.norm())
            .fold(0.0, f64::max)
    }

    /// CSV dump with columns `x,re,im,abs2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,re,im,abs2")?;
        for (x, a) in self.grid.positions().zip(&self.amplitudes) {
            writeln!(
                out,
                "{},{},{},{}",
                sci(x),
                sci(a.re),
                sci(a.im),
                sci(a.norm_sqr())
            )?;
        }
        Ok(())
    }
}

/// Initial Gaussian packet: center, mean wavenumber and position-density
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavepacketSpec {
    pub center: f64,
    pub wavenumber: f64,
    pub width: f64,
}

impl WavepacketSpec {
    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::config(format!(
                "packet width must be positive, got {}",
                self.width
            )));
        }
        if !self.center.is_finite() || !self.wavenumber.is_finite() {
            return Err(Error::config("packet center and wavenumber must be finite"));
        }
        let reach = self.center.abs() + 6.0 * self.width;
        if !(reach < grid.half_width()) {
            return Err(Error::config(format!(
                "packet support |x0| + 6 sigma = {reach} does not fit half width {}",
                grid.half_width()
            )));
        }
        let top = self.wavenumber.abs() + 3.0 / self.width;
        if !(top < grid.k_max()) {
            return Err(Error::config(format!(
                "packet spectrum |k0| + 3/sigma = {top} exceeds Nyquist margin pi/dx = {}",
                grid.k_max()
            )));
        }
        Ok(())
    }
}

/// `(2πσ²)^(−1/4) exp(−(x−x0)²/4σ²) exp(i k0 x)`, renormalized on the grid.
pub fn make_gaussian(grid: &Grid1D, spec: &WavepacketSpec) -> Result<Wavefunction> {
    spec.validate(grid)?;
    let sigma2 = spec.width * spec.width;
    let prefactor = (2.0 * PI * sigma2).powf(-0.25);
    let amplitudes = grid
        .positions()
        .map(|x| {
            let envelope = prefactor * (-(x - spec.center).powi(2) / (4.0 * sigma2)).exp();
            Complex64::from_polar(envelope, spec.wavenumber * x)
        })
        .collect();
    Ok(Wavefunction::new(*grid, amplitudes, 0.0)?.normalized())
}

/// Normalized superposition `Σ c_i g_i` of Gaussian packets.
pub fn superpose(grid: &Grid1D, terms: &[(Complex64, WavepacketSpec)]) -> Result<Wavefunction> {
    let mut amplitudes = vec![Complex64::zero(); grid.points()];
    for (coef, spec) in terms {
        let packet = make_gaussian(grid, spec)?;
        for (a, p) in amplitudes.iter_mut().zip(packet.amplitudes()) {
            *a += coef * p;
        }
    }
    let psi = Wavefunction::new(*grid, amplitudes, 0.0)?;
    if !(psi.norm_sqr() > 0.0) {
        return Err(Error::config("superposition vanishes"));
    }
    Ok(psi.normalized())
}

fn check_compatible(psi: &Wavefunction, phi: &Wavefunction) -> Result<()> {
    if psi.grid != phi.grid || psi.time != phi.time {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn overlap_sum(psi: &Wavefunction, phi: &Wavefunction, range: std::ops::Range<usize>) -> Complex64 {
    psi.amplitudes[range.clone()]
        .iter()
        .zip(&phi.amplitudes[range])
        .fold(Complex64::zero(), |acc, (a, b)| acc + a.conj() * b)
        * psi.grid.dx
}

/// `⟨ψ|φ⟩ = Σ conj(ψ_j) φ_j dx`.
pub fn inner_product(psi: &Wavefunction, phi: &Wavefunction) -> Result<Complex64> {
    check_compatible(psi, phi)?;
    Ok(overlap_sum(psi, phi, 0..psi.grid.points))
}

/// `∫ conj(ψ) φ dx` restricted to one side of `boundary`.
pub fn half_line_overlap(
    psi: &Wavefunction,
    phi: &Wavefunction,
    side: Side,
    boundary: f64,
) -> Result<Complex64> {
    check_compatible(psi, phi)?;
    psi.grid.check_boundary(boundary)?;
    Ok(overlap_sum(psi, phi, psi.side_range(side, boundary)))
}

/// `∫ |ψ|² dx` restricted to one side of `boundary`.
pub fn probability_on_side(psi: &Wavefunction, side: Side, boundary: f64) -> Result<f64> {
    psi.grid.check_boundary(boundary)?;
    Ok(psi.amplitudes[psi.side_range(side, boundary)]
        .iter()
        .map(|a| a.norm_sqr())
        .sum::<f64>()
        * psi.grid.dx)
}
