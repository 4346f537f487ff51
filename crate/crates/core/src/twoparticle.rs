//! Exchange-symmetrized two-particle states built from single-particle
//! packets, and the probabilities of finding both, neither or one of the
//! particles beyond a boundary.
//!
//! For `Ψ = N[ψ_A(x1)ψ_B(x2) + σ ψ_B(x1)ψ_A(x2)]` the quadrant integrals of
//! `|Ψ|²` factor into one-dimensional ones:
//!
//! ```text
//! ∫_{S1}∫_{S2} |Ψ|² = N² [P_A(S1)P_B(S2) + P_B(S1)P_A(S2) + 2σ Re(I_{S1} conj(I_{S2}))]
//! ```
//!
//! with `P_X(S) = ∫_S |ψ_X|²` and `I_S = ∫_S conj(ψ_A) ψ_B`. The
//! normalization is exact, `N = [2(1 + σ|s|²)]^{-1/2}` with `s = ⟨ψ_A|ψ_B⟩`.

use std::io::Write;

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{half_line_overlap, inner_product, probability_on_side, Side, Wavefunction};
use crate::report::sci;

/// Fermion pairs with `1 − |s|²` at or below this are rejected.
pub const PAULI_GUARD: f64 = 1e-9;

/// Largest grid the O(G²) quadrant oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 4096;

/// Tolerance on `p20 + p02 + p11 = 1`.
pub const SUM_RULE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exchange {
    Boson,
    Fermion,
}

impl Exchange {
    pub fn sign(self) -> f64 {
        match self {
            Exchange::Boson => 1.0,
            Exchange::Fermion => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymmetrizedPair {
    psi_a: Wavefunction,
    psi_b: Wavefunction,
    exchange: Exchange,
    overlap: Complex64,
    norm_const: f64,
}

pub fn make_pair(psi_a: Wavefunction, psi_b: Wavefunction, exchange: Exchange) -> Result<SymmetrizedPair> {
    let overlap = inner_product(&psi_a, &psi_b)?;
    let s2 = overlap.norm_sqr();
    let product = psi_a.norm_sqr() * psi_b.norm_sqr();
    if exchange == Exchange::Fermion && product - s2 <= PAULI_GUARD {
        return Err(Error::PauliDegenerate { overlap_sqr: s2 });
    }
    // For normalized packets this is 1/√(2(1 + σ|s|²)).
    let norm_const = (2.0 * (product + exchange.sign() * s2)).sqrt().recip();
    Ok(SymmetrizedPair {
        psi_a,
        psi_b,
        exchange,
        overlap,
        norm_const,
    })
}

impl SymmetrizedPair {
    pub fn psi_a(&self) -> &Wavefunction {
        &self.psi_a
    }

    pub fn psi_b(&self) -> &Wavefunction {
        &self.psi_b
    }

    pub fn exchange(&self) -> Exchange {
        self.exchange
    }

    /// Global overlap `s = ⟨ψ_A|ψ_B⟩`.
    pub fn overlap(&self) -> Complex64 {
        self.overlap
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// `|Ψ(x1, x2)|²` at grid samples `i1`, `i2`.
    pub fn joint_density(&self, i1: usize, i2: usize) -> f64 {
        let a = self.psi_a.amplitudes();
        let b = self.psi_b.amplitudes();
        let direct = a[i1].norm_sqr() * b[i2].norm_sqr() + b[i1].norm_sqr() * a[i2].norm_sqr();
        let cross = 2.0 * (a[i1].conj() * b[i1] * (a[i2].conj() * b[i2]).conj()).re;
        self.norm_const * self.norm_const * (direct + self.exchange.sign() * cross)
    }

    /// Joint density on a subsampled `n × n` lattice (`n <= max_side`), as CSV
    /// with columns `x1,x2,density`. Both axes use the same samples.
    pub fn write_joint_density_csv<W: Write>(&self, max_side: usize, mut out: W) -> Result<()> {
        let grid = self.psi_a.grid();
        let g = grid.points();
        let stride = g.div_ceil(max_side.max(1));
        writeln!(out, "x1,x2,density")?;
        for i1 in (0..g).step_by(stride) {
            for i2 in (0..g).step_by(stride) {
                writeln!(
                    out,
                    "{},{},{}",
                    sci(grid.x(i1)),
                    sci(grid.x(i2)),
                    sci(self.joint_density(i1, i2))
                )?;
            }
        }
        Ok(())
    }
}

/// Joint occupancy probabilities and the overlap diagnostics behind them.
/// "Transmitted" means beyond the boundary (x ≥ boundary).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointStats {
    /// Both reflected.
    pub p20: f64,
    /// Both transmitted.
    pub p02: f64,
    pub p11: f64,
    pub a: f64,
    pub s_abs: f64,
    pub i_plus: Complex64,
    pub i_minus: Complex64,
    pub t_a: f64,
    pub t_b: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub sum_check: f64,
}

impl JointStats {
    fn assemble(pair: &SymmetrizedPair, p20: f64, p02: f64, p11: f64, sides: &Sides) -> Self {
        JointStats {
            p20,
            p02,
            p11,
            a: (p20 + p02) / 2.0,
            s_abs: pair.overlap.norm(),
            i_plus: sides.i_plus,
            i_minus: sides.i_minus,
            t_a: sides.t_a,
            t_b: sides.t_b,
            r_a: sides.r_a,
            r_b: sides.r_b,
            sum_check: p20 + p02 + p11,
        }
    }
}

struct Sides {
    t_a: f64,
    t_b: f64,
    r_a: f64,
    r_b: f64,
    i_plus: Complex64,
    i_minus: Complex64,
}

fn sides(pair: &SymmetrizedPair, boundary: f64) -> Result<Sides> {
    let (a, b) = (&pair.psi_a, &pair.psi_b);
    Ok(Sides {
        t_a: probability_on_side(a, Side::Positive, boundary)?,
        t_b: probability_on_side(b, Side::Positive, boundary)?,
        r_a: probability_on_side(a, Side::Negative, boundary)?,
        r_b: probability_on_side(b, Side::Negative, boundary)?,
        i_plus: half_line_overlap(a, b, Side::Positive, boundary)?,
        i_minus: half_line_overlap(a, b, Side::Negative, boundary)?,
    })
}

fn check_sum(stats: JointStats) -> Result<JointStats> {
    if (stats.sum_check - 1.0).abs() > SUM_RULE_TOLERANCE || !stats.sum_check.is_finite() {
        return Err(Error::Consistency(stats.sum_check));
    }
    Ok(stats)
}

/// Quadrant probabilities from the factorized one-dimensional integrals.
///
/// This does not check whether the packets have finished scattering; see
/// `experiment::measure` for the guarded version.
pub fn joint_probabilities(pair: &SymmetrizedPair, boundary: f64) -> Result<JointStats> {
    let sd = sides(pair, boundary)?;
    let n2 = pair.norm_const * pair.norm_const;
    let sign = pair.exchange.sign();
    let p02 = n2 * (2.0 * sd.t_a * sd.t_b + sign * 2.0 * sd.i_plus.norm_sqr());
    let p20 = n2 * (2.0 * sd.r_a * sd.r_b + sign * 2.0 * sd.i_minus.norm_sqr());
    let p11 = n2
        * (2.0 * sd.t_a * sd.r_b
            + 2.0 * sd.r_a * sd.t_b
            + sign * 4.0 * (sd.i_plus * sd.i_minus.conj()).re);
    check_sum(JointStats::assemble(pair, p20, p02, p11, &sd))
}

/// Direct double sum of the joint density over each quadrant. O(G²); an
/// independent check on [`joint_probabilities`].
pub fn quadrant_quadrature_oracle(pair: &SymmetrizedPair, boundary: f64) -> Result<JointStats> {
    let grid = *pair.psi_a.grid();
    let g = grid.points();
    if g > ORACLE_MAX_POINTS {
        return Err(Error::GridTooLarge {
            points: g,
            limit: ORACLE_MAX_POINTS,
        });
    }
    let sd = sides(pair, boundary)?;
    let split = grid.split_index(boundary);
    let quadrant = |r1: std::ops::Range<usize>, r2: std::ops::Range<usize>| -> f64 {
        let mut total = 0.0;
        for i1 in r1 {
            let mut row = 0.0;
            for i2 in r2.clone() {
                row += pair.joint_density(i1, i2);
            }
            total += row;
        }
        total * grid.dx() * grid.dx()
    };
    let p20 = quadrant(0..split, 0..split);
    let p02 = quadrant(split..g, split..g);
    let p11 = quadrant(0..split, split..g) + quadrant(split..g, 0..split);
    check_sum(JointStats::assemble(pair, p20, p02, p11, &sd))
}
