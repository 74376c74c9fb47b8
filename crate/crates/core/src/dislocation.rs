//! Dislocation measures.
//!
//! A dislocation measure `nu` gives the rate at which a block of unit mass
//! splits into a given mass partition. Three capabilities are exposed:
//! the total event rate, sampling from `nu / total_rate` (finite measures
//! only), and integration of functionals `h` against `nu`.
//!
//! Two concrete families are provided:
//!
//! * [`DiscreteDislocation`]: finitely many atoms `(rate_k, s_k)`; every
//!   integral is an exact finite sum.
//! * [`BinaryDensity`]: binary splits `(a, r (1 - a))` for `a` in `[1/2, 1)`
//!   with density `g(a) = c (1 - a)^(-gamma)`. It has infinite activity when
//!   `gamma >= 1`, so it must be [truncated](Dislocation::truncate) before
//!   it can be simulated. Integrals use adaptive quadrature in the variable
//!   `y = 1 - a`.

use rand::Rng;
use thiserror::Error;

use crate::masspart::{MassPartition, PartitionError};
use crate::quadrature::{self, QuadratureError, DEFAULT_MAX_PANELS, DEFAULT_REL_TOL};
use crate::rng::StreamRng;

/// Lower index used for measures with finitely many atoms.
pub const DISCRETE_LOWER_INDEX: f64 = -1.0 + 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DislocationError {
    #[error("integral against the dislocation measure diverges: {0}")]
    NonIntegrable(#[from] QuadratureError),
    #[error("invalid atom {index}: {source}")]
    InvalidAtom {
        index: usize,
        #[source]
        source: PartitionError,
    },
    #[error("atom {0} is the trivial partition (1, 0, ...), which must carry no mass")]
    TrivialAtom(usize),
    #[error("atom {index} has rate {rate}; rates must be positive and finite")]
    InvalidRate { index: usize, rate: f64 },
    #[error("a discrete measure needs at least one atom")]
    NoAtoms,
    #[error("invalid density parameter: {0}")]
    InvalidDensity(String),
    #[error("truncation level {0} must lie in (0, 1/2)")]
    InvalidEpsilon(f64),
    #[error("measure has infinite activity; truncate it before simulating")]
    InfiniteActivity,
}

/// Functional on mass partitions, evaluated on the non-increasing terms.
pub type Functional<'a> = dyn Fn(&[f64]) -> f64 + 'a;

pub trait DislocationMeasure: Send + Sync + std::fmt::Debug {
    /// `nu(S)`; may be infinite.
    fn total_rate(&self) -> f64;

    /// `int h(s) nu(ds)`.
    fn integrate(&self, h: &Functional<'_>) -> Result<f64, DislocationError>;

    /// Infimum of the `p` for which the Laplace exponent integral is finite.
    fn lower_index(&self) -> f64;

    /// Largest number of positive terms in any partition charged by `nu`.
    fn max_terms(&self) -> usize;

    /// Atoms, when the measure is a finite sum of point masses.
    fn atoms(&self) -> Option<&[Atom]> {
        None
    }

    /// `int (1 - sum s_i) nu(ds) < 1e-14`.
    fn is_conservative(&self) -> bool {
        self.integrate(&|s| 1.0 - s.iter().sum::<f64>())
            .map(|dust| dust.abs() < 1e-14)
            .unwrap_or(false)
    }
}

/// Measures with finite total rate, which can be sampled.
pub trait FiniteDislocation: DislocationMeasure {
    /// Writes the terms of a partition distributed as `nu / total_rate`.
    fn sample_terms(&self, rng: &mut StreamRng, out: &mut Vec<f64>);

    fn sample(&self, rng: &mut StreamRng) -> MassPartition {
        let mut terms = Vec::new();
        self.sample_terms(rng, &mut terms);
        MassPartition::normalize(&terms).expect("measures only emit valid partitions")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub rate: f64,
    pub partition: MassPartition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDislocation {
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
    lower_index: f64,
}

impl DiscreteDislocation {
    pub fn new(atoms: Vec<(f64, MassPartition)>) -> Result<Self, DislocationError> {
        if atoms.is_empty() {
            return Err(DislocationError::NoAtoms);
        }
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(atoms.len());
        for (index, (rate, partition)) in atoms.into_iter().enumerate() {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(DislocationError::InvalidRate { index, rate });
            }
            if partition.is_trivial() {
                return Err(DislocationError::TrivialAtom(index));
            }
            acc += rate;
            cumulative.push(acc);
            out.push(Atom { rate, partition });
        }
        Ok(Self {
            atoms: out,
            cumulative,
            lower_index: DISCRETE_LOWER_INDEX,
        })
    }

    /// Builds a measure from `(rate, raw terms)` pairs.
    pub fn from_raw(atoms: &[(f64, Vec<f64>)]) -> Result<Self, DislocationError> {
        let parsed = atoms
            .iter()
            .enumerate()
            .map(|(index, (rate, raw))| {
                MassPartition::normalize(raw)
                    .map(|s| (*rate, s))
                    .map_err(|source| DislocationError::InvalidAtom { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(parsed)
    }

    pub fn with_lower_index(mut self, lower_index: f64) -> Self {
        self.lower_index = lower_index;
        self
    }

    /// Every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, DislocationError> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| (a.rate * factor, a.partition.clone()))
            .collect();
        Ok(Self::new(atoms)?.with_lower_index(self.lower_index))
    }
}

impl DislocationMeasure for DiscreteDislocation {
    fn total_rate(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    fn integrate(&self, h: &Functional<'_>) -> Result<f64, DislocationError> {
        Ok(self
            .atoms
            .iter()
            .map(|a| a.rate * h(a.partition.terms()))
            .sum())
    }

    fn lower_index(&self) -> f64 {
        self.lower_index
    }

    fn max_terms(&self) -> usize {
        self.atoms.iter().map(|a| a.partition.len()).max().unwrap_or(0)
    }

    fn atoms(&self) -> Option<&[Atom]> {
        Some(&self.atoms)
    }
}

impl FiniteDislocation for DiscreteDislocation {
    fn sample_terms(&self, rng: &mut StreamRng, out: &mut Vec<f64>) {
        out.clear();
        let k = if self.atoms.len() == 1 {
            0
        } else {
            let target = rng.random::<f64>() * self.total_rate();
            self.cumulative
                .partition_point(|&c| c <= target)
                .min(self.atoms.len() - 1)
        };
        out.extend_from_slice(self.atoms[k].partition.terms());
    }
}

/// Binary splits `(1 - y, retain * y)` with `y = 1 - a` in `(0, 1/2]` and
/// density `intensity * y^(-gamma)` in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDensity {
    pub intensity: f64,
    pub gamma: f64,
    pub retain: f64,
    lower_index: f64,
}

impl BinaryDensity {
    pub fn new(intensity: f64, gamma: f64, retain: f64) -> Result<Self, DislocationError> {
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(DislocationError::InvalidDensity(format!(
                "intensity must be positive, got {intensity}"
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(DislocationError::InvalidDensity(format!(
                "gamma must be nonnegative, got {gamma}"
            )));
        }
        if !(retain > 0.0 && retain <= 1.0) {
            return Err(DislocationError::InvalidDensity(format!(
                "retain must lie in (0, 1], got {retain}"
            )));
        }
        Ok(Self {
            intensity,
            gamma,
            retain,
            lower_index: (gamma - 2.0).max(-1.0),
        })
    }

    /// `g = 1` on `[1/2, 1)` with conservative splits `(a, 1 - a)`.
    pub fn uniform() -> Self {
        Self::new(1.0, 0.0, 1.0).expect("valid parameters")
    }

    pub fn with_lower_index(mut self, lower_index: f64) -> Self {
        self.lower_index = lower_index;
        self
    }

    fn density(&self, y: f64) -> f64 {
        if self.gamma == 0.0 {
            self.intensity
        } else {
            self.intensity * y.powf(-self.gamma)
        }
    }

    /// `int_lo^hi density(y) dy` in closed form.
    fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let g = self.gamma;
        let c = self.intensity;
        if (g - 1.0).abs() < 1e-15 {
            c * (hi / lo).ln()
        } else {
            c * (hi.powf(1.0 - g) - lo.powf(1.0 - g)) / (1.0 - g)
        }
    }

    fn integrate_over(&self, h: &Functional<'_>, lo: f64) -> Result<f64, DislocationError> {
        let integrand = |y: f64| {
            let terms = [1.0 - y, self.retain * y];
            self.density(y) * h(&terms)
        };
        let est = quadrature::integrate(integrand, lo, 0.5, DEFAULT_REL_TOL, DEFAULT_MAX_PANELS)?;
        Ok(est.value)
    }

    pub fn truncate(&self, epsilon: f64) -> Result<BinaryDensityDislocation, DislocationError> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(DislocationError::InvalidEpsilon(epsilon));
        }
        if self.gamma >= 2.0 {
            // int y * y^-gamma dy diverges at 0; quadrature would only see a large number
            return Err(DislocationError::NonIntegrable(QuadratureError::NoConvergence {
                panels: 0,
                estimate: f64::INFINITY,
                error: f64::INFINITY,
            }));
        }
        let gap = self.integrate(&|s: &[f64]| 1.0 - s[0])?;
        Ok(BinaryDensityDislocation {
            family: self.clone(),
            epsilon,
            total_rate: self.mass_between(epsilon, 0.5),
            discarded_rate_bound: gap / epsilon,
        })
    }
}

impl DislocationMeasure for BinaryDensity {
    fn total_rate(&self) -> f64 {
        if self.gamma >= 1.0 {
            f64::INFINITY
        } else {
            self.mass_between(0.0, 0.5)
        }
    }

    fn integrate(&self, h: &Functional<'_>) -> Result<f64, DislocationError> {
        self.integrate_over(h, 0.0)
    }

    fn lower_index(&self) -> f64 {
        self.lower_index
    }

    fn max_terms(&self) -> usize {
        2
    }
}

/// A [`BinaryDensity`] restricted to dislocations with `1 - s_1 >= epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDensityDislocation {
    family: BinaryDensity,
    epsilon: f64,
    total_rate: f64,
    discarded_rate_bound: f64,
}

impl BinaryDensityDislocation {
    pub fn family(&self) -> &BinaryDensity {
        &self.family
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Upper bound `epsilon^-1 int (1 - s_1) nu(ds)` on the rate of the
    /// dislocations removed by truncation.
    pub fn discarded_rate_bound(&self) -> f64 {
        self.discarded_rate_bound
    }

    /// Inverse of the normalized distribution function of `y` on `[epsilon, 1/2]`.
    fn quantile(&self, u: f64) -> f64 {
        let g = self.family.gamma;
        let (lo, hi) = (self.epsilon, 0.5);
        if (g - 1.0).abs() < 1e-15 {
            lo * (hi / lo).powf(u)
        } else {
            let e = 1.0 - g;
            let (a, b) = (lo.powf(e), hi.powf(e));
            (a + u * (b - a)).powf(1.0 / e)
        }
    }
}

impl DislocationMeasure for BinaryDensityDislocation {
    fn total_rate(&self) -> f64 {
        self.total_rate
    }

    fn integrate(&self, h: &Functional<'_>) -> Result<f64, DislocationError> {
        self.family.integrate_over(h, self.epsilon)
    }

    fn lower_index(&self) -> f64 {
        self.family.lower_index
    }

    fn max_terms(&self) -> usize {
        2
    }
}

impl FiniteDislocation for BinaryDensityDislocation {
    fn sample_terms(&self, rng: &mut StreamRng, out: &mut Vec<f64>) {
        let y = self
            .quantile(rng.random::<f64>())
            .clamp(self.epsilon, 0.5);
        out.clear();
        out.push(1.0 - y);
        out.push(self.family.retain * y);
    }
}

/// A dislocation measure chosen at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum Dislocation {
    Discrete(DiscreteDislocation),
    Density(BinaryDensity),
    Truncated(BinaryDensityDislocation),
}

/// A finite-rate measure together with what truncation removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub measure: Dislocation,
    pub discarded_rate_bound: f64,
}

impl Dislocation {
    fn inner(&self) -> &dyn DislocationMeasure {
        match self {
            Self::Discrete(m) => m,
            Self::Density(m) => m,
            Self::Truncated(m) => m,
        }
    }

    /// Restricts to `{1 - s_1 >= epsilon}`. Measures that already have
    /// finite rate and atoms pass through unchanged.
    pub fn truncate(&self, epsilon: f64) -> Result<Truncation, DislocationError> {
        match self {
            Self::Discrete(_) => Ok(Truncation {
                measure: self.clone(),
                discarded_rate_bound: 0.0,
            }),
            Self::Density(family) => {
                let t = family.truncate(epsilon)?;
                Ok(Truncation {
                    discarded_rate_bound: t.discarded_rate_bound,
                    measure: Self::Truncated(t),
                })
            }
            Self::Truncated(t) => {
                let t = t.family.truncate(epsilon.max(t.epsilon))?;
                Ok(Truncation {
                    discarded_rate_bound: t.discarded_rate_bound,
                    measure: Self::Truncated(t),
                })
            }
        }
    }

    pub fn finite(&self) -> Result<&dyn FiniteDislocation, DislocationError> {
        match self {
            Self::Discrete(m) => Ok(m),
            Self::Truncated(m) => Ok(m),
            Self::Density(_) => Err(DislocationError::InfiniteActivity),
        }
    }
}

impl DislocationMeasure for Dislocation {
    fn total_rate(&self) -> f64 {
        self.inner().total_rate()
    }
    fn integrate(&self, h: &Functional<'_>) -> Result<f64, DislocationError> {
        self.inner().integrate(h)
    }
    fn lower_index(&self) -> f64 {
        self.inner().lower_index()
    }
    fn max_terms(&self) -> usize {
        self.inner().max_terms()
    }
    fn atoms(&self) -> Option<&[Atom]> {
        self.inner().atoms()
    }
}

/// Measures with closed-form exponents, used throughout the tests and the guide.
pub mod catalog {
    use super::*;

    /// One conservative binary split `(a, 1 - a)` at unit rate.
    pub fn binary(a: f64) -> DiscreteDislocation {
        DiscreteDislocation::from_raw(&[(1.0, vec![a, 1.0 - a])]).expect("valid binary atom")
    }

    /// Splits into `(1/2, 1/4)` at unit rate, losing a quarter of the mass.
    pub fn half_quarter() -> DiscreteDislocation {
        DiscreteDislocation::from_raw(&[(1.0, vec![0.5, 0.25])]).expect("valid atom")
    }

    /// The three discrete reference measures: `(1/2,1/2)`, `(0.7,0.3)`, `(1/2,1/4)`.
    pub fn discrete_reference() -> Vec<(&'static str, DiscreteDislocation)> {
        vec![
            ("binary-half", binary(0.5)),
            ("binary-0.7", binary(0.7)),
            ("half-quarter", half_quarter()),
        ]
    }

    pub fn uniform_binary() -> BinaryDensity {
        BinaryDensity::uniform()
    }
}
