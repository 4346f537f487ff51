//! Exact occupancy probabilities for N particles distributed over M states.
//!
//! Maxwell-Boltzmann counts distinct particle-to-state assignments,
//! Bose-Einstein counts each occupancy vector once, and Fermi-Dirac adds the
//! exclusion constraint on top of the Bose-Einstein count. Everything here is
//! exact rational arithmetic; floats appear only through [`ExactProb::to_f64`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num::bigint::BigUint;
use num::rational::BigRational;
use num::{BigInt, One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the number of assignments the enumeration oracle visits.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// Occupation numbers `n_1..n_M`. State order matters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupancyVector {
    counts: Vec<u64>,
}

impl OccupancyVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidStateCount(0));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of states M.
    pub fn states(&self) -> u64 {
        self.counts.len() as u64
    }

    /// Number of particles N.
    pub fn particles(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// The occupancy multiset, counts sorted in descending order.
    pub fn canonical(&self) -> Vec<u64> {
        let mut sorted = self.counts.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        sorted
    }
}

impl fmt::Display for OccupancyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, n) in self.counts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{n}")?;
        }
        f.write_str("}")
    }
}

/// An exact probability, kept as a reduced fraction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactProb(BigRational);

impl ExactProb {
    pub fn new(numerator: BigUint, denominator: BigUint) -> Self {
        // BigRational::new reduces and panics on a zero denominator; callers
        // only ever pass counts with a positive total.
        ExactProb(BigRational::new(
            BigInt::from(numerator),
            BigInt::from(denominator),
        ))
    }

    pub fn zero() -> Self {
        ExactProb(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactProb(BigRational::one())
    }

    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn numerator(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for ExactProb {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl std::ops::Add for ExactProb {
    type Output = ExactProb;

    fn add(self, rhs: Self) -> Self {
        ExactProb(self.0 + rhs.0)
    }
}

impl std::ops::Mul<u64> for ExactProb {
    type Output = ExactProb;

    fn mul(self, rhs: u64) -> Self {
        ExactProb(self.0 * BigRational::from_integer(BigInt::from(rhs)))
    }
}

impl std::iter::Sum for ExactProb {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ExactProb::zero(), |acc, p| acc + p)
    }
}

fn factorial(n: u64) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, k| acc * k)
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    // Multiplicative form keeps every intermediate an integer.
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// `N! / (M^N · Π n_i!)`.
pub fn mb_probability(occ: &OccupancyVector) -> ExactProb {
    let n = occ.particles();
    let m = BigUint::from(occ.states());
    let denominator = occ
        .counts
        .iter()
        .fold(num::pow(m, n as usize), |acc, &c| acc * factorial(c));
    ExactProb::new(factorial(n), denominator)
}

/// `N!(M−1)!/(N+M−1)!`, the same for every occupancy vector.
pub fn be_probability(particles: u64, states: u64) -> Result<ExactProb> {
    if states == 0 {
        return Err(Error::InvalidStateCount(states));
    }
    Ok(ExactProb::new(
        BigUint::one(),
        binomial(particles + states - 1, particles),
    ))
}

/// Zero when any state is doubly occupied, otherwise `1/C(M, N)`.
pub fn fd_probability(occ: &OccupancyVector) -> ExactProb {
    if occ.counts.iter().any(|&c| c > 1) {
        return ExactProb::zero();
    }
    ExactProb::new(BigUint::one(), binomial(occ.states(), occ.particles()))
}

pub const MAX_LISTED_VECTORS: u64 = 1_000_000;

/// All occupancy vectors of `particles` over `states`, in reporting order:
/// grouped by multiset (most concentrated first), then by descending counts.
/// For N = M = 2 this yields `{2,0}, {0,2}, {1,1}`.
/// Fails with [`Error::BudgetExceeded`] above [`MAX_LISTED_VECTORS`].
pub fn occupancy_vectors(particles: u64, states: u64) -> Result<Vec<OccupancyVector>> {
    if states == 0 {
        return Err(Error::InvalidStateCount(states));
    }
    let count = binomial(particles + states - 1, states - 1);
    if count > BigUint::from(MAX_LISTED_VECTORS) {
        return Err(Error::BudgetExceeded {
            assignments: count.to_string(),
            budget: MAX_LISTED_VECTORS,
        });
    }
    let mut out = Vec::new();
    let mut current = vec![0u64; states as usize];
    compositions(particles, 0, &mut current, &mut out);
    out.sort_by(|a, b| {
        b.canonical()
            .cmp(&a.canonical())
            .then_with(|| b.counts.cmp(&a.counts))
    });
    Ok(out)
}

fn compositions(remaining: u64, slot: usize, current: &mut Vec<u64>, out: &mut Vec<OccupancyVector>) {
    if slot + 1 == current.len() {
        current[slot] = remaining;
        out.push(OccupancyVector {
            counts: current.clone(),
        });
        return;
    }
    for n in 0..=remaining {
        current[slot] = n;
        compositions(remaining - n, slot + 1, current, out);
    }
}

/// Brute-force Maxwell-Boltzmann: visit all `M^N` assignments of labelled
/// particles to states and tally the resulting occupancy vectors.
pub fn enumerate_mb_oracle(
    particles: u64,
    states: u64,
    budget: u64,
) -> Result<BTreeMap<OccupancyVector, ExactProb>> {
    if states == 0 {
        return Err(Error::InvalidStateCount(states));
    }
    let total = num::pow(BigUint::from(states), particles as usize);
    let visits = match total.to_u64() {
        Some(v) if v <= budget => v,
        _ => {
            return Err(Error::BudgetExceeded {
                assignments: total.to_string(),
                budget,
            })
        }
    };

    let n = particles as usize;
    let mut assignment = vec![0u64; n];
    let mut counts = vec![0u64; states as usize];
    counts[0] = particles;
    let mut tally: HashMap<Vec<u64>, u64> = HashMap::new();
    for _ in 0..visits {
        *tally.entry(counts.clone()).or_insert(0) += 1;
        // Odometer increment over particle labels.
        for digit in assignment.iter_mut() {
            counts[*digit as usize] -= 1;
            *digit += 1;
            if *digit == states {
                *digit = 0;
                counts[0] += 1;
            } else {
                counts[*digit as usize] += 1;
                break;
            }
        }
    }

    Ok(tally
        .into_iter()
        .map(|(counts, hits)| {
            (
                OccupancyVector { counts },
                ExactProb::new(BigUint::from(hits), total.clone()),
            )
        })
        .collect())
}

/// Symmetric two-state family: `p{2,0} = p{0,2} = a`, `p{1,1} = 1 − 2a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairFamily {
    pub a: f64,
    pub p20: f64,
    pub p02: f64,
    pub p11: f64,
}

pub fn pair_family(a: f64) -> Result<PairFamily> {
    if !(0.0..=0.5).contains(&a) {
        return Err(Error::InvalidPairParameter(a));
    }
    Ok(PairFamily {
        a,
        p20: a,
        p02: a,
        p11: 1.0 - 2.0 * a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StatisticsLabel {
    #[serde(rename = "FD")]
    FermiDirac,
    #[serde(rename = "intermediate-fermi")]
    IntermediateFermi,
    #[serde(rename = "MB")]
    MaxwellBoltzmann,
    #[serde(rename = "intermediate-bose")]
    IntermediateBose,
    #[serde(rename = "BE")]
    BoseEinstein,
    #[serde(rename = "super-bunched")]
    SuperBunched,
}

impl StatisticsLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            StatisticsLabel::FermiDirac => "FD",
            StatisticsLabel::IntermediateFermi => "intermediate-fermi",
            StatisticsLabel::MaxwellBoltzmann => "MB",
            StatisticsLabel::IntermediateBose => "intermediate-bose",
            StatisticsLabel::BoseEinstein => "BE",
            StatisticsLabel::SuperBunched => "super-bunched",
        }
    }
}

impl fmt::Display for StatisticsLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Places `a` relative to the FD (0), MB (1/4) and BE (1/3) anchors.
/// Values above the BE anchor are reported as super-bunched, not clamped.
pub fn classify_pair(a: f64, tol: f64) -> StatisticsLabel {
    const MB: f64 = 0.25;
    const BE: f64 = 1.0 / 3.0;
    if a.abs() <= tol {
        StatisticsLabel::FermiDirac
    } else if (a - MB).abs() <= tol {
        StatisticsLabel::MaxwellBoltzmann
    } else if (a - BE).abs() <= tol {
        StatisticsLabel::BoseEinstein
    } else if a < MB {
        StatisticsLabel::IntermediateFermi
    } else if a < BE {
        StatisticsLabel::IntermediateBose
    } else {
        StatisticsLabel::SuperBunched
    }
}
