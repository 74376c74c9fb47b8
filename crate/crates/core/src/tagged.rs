//! The tagged fragment.
//!
//! Follow the block containing a uniformly tagged point: `xi_t = -log` of
//! its mass is a subordinator with Laplace exponent `Phi`, killed at rate
//! `Phi(0)` when dislocations lose mass. Weighting paths by `exp(-p xi_t)`
//! turns its jump measure into
//!
//! ```text
//! m_p(dx) = exp(-x (1 + p)) sum_i nu(-log s_i in dx)
//! ```
//!
//! with killing rate `Phi(p)`; conditioned on survival (equivalently, under
//! the normalized change of measure) its exponent is `Phi(lambda + p) - Phi(p)`.
//!
//! At `p = p*` the killing vanishes and the renewal theorem identifies the
//! limit law of `exp(-overshoot)` as the measure `rho` on `[0, 1]` with
//!
//! ```text
//! <rho, f> = Phi'(p*)^-1 int_0^1 f(u) ( int sum_n 1{u > s_n} s_n^(1+p*) nu(ds) ) du/u
//!          = Phi'(p*)^-1 int sum_n s_n^(1+p*) F(s_n) nu(ds),   F(x) = int_x^1 f(u) du/u.
//! ```
//!
//! The second form is what [`LimitMeasure`] evaluates: an exact finite sum
//! for discrete measures, a single quadrature for densities.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dislocation::{
    BinaryDensityDislocation, Dislocation, DislocationError, DislocationMeasure, FiniteDislocation,
};
use crate::exponent::{self, ExponentError};
use crate::rng::{self, StreamRng};
use crate::stats::{self, MeanEstimate};
use crate::testfn::TestFunction;

/// Ratios of jump sizes within this distance of a rational with small
/// denominator are treated as commensurable.
pub const LATTICE_TOL: f64 = 1e-9;
/// Largest denominator tried by the lattice test.
pub const LATTICE_MAX_DENOMINATOR: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaggedError {
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Dislocation(#[from] DislocationError),
    #[error("the tagged fragment was killed before passing level {level}")]
    KilledBeforePassage { level: f64 },
    #[error("jump law is lattice with span {span}; the renewal limit does not apply")]
    LatticeDetected { span: f64 },
    #[error("killing rate Phi(p) = {0} is nonzero; first passage is not almost sure")]
    NonZeroKilling(f64),
    #[error("killing rate Phi(p) = {0} is negative; tilt must be at least the Malthusian parameter")]
    NegativeKilling(f64),
    #[error("level must be nonnegative, got {0}")]
    InvalidLevel(f64),
    #[error("jump law has zero mass")]
    NoJumps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    /// `-log s`.
    pub size: f64,
    /// `s`.
    pub factor: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
enum JumpKind {
    Atoms { jumps: Vec<Jump>, cumulative: Vec<f64> },
    Density { measure: BinaryDensityDislocation, bound: f64 },
}

/// The jump measure of the tagged fragment tilted by `exp(-p xi)`.
#[derive(Debug, Clone)]
pub struct TiltedJumpLaw {
    tilt: f64,
    kind: JumpKind,
    total_rate: f64,
    killing_rate: f64,
    event_rate: f64,
    measure: Dislocation,
}

/// Absolute size below which a computed killing rate is treated as zero.
const KILLING_ZERO: f64 = 1e-12;

pub fn tilted_jump_law(nu: &Dislocation, p: f64) -> Result<TiltedJumpLaw, TaggedError> {
    let phi_p = exponent::phi(nu, p)?;
    let killing_rate = if phi_p.abs() < KILLING_ZERO { 0.0 } else { phi_p };
    let q = 1.0 + p;
    let kind = match nu {
        Dislocation::Discrete(d) => {
            let atoms = d.atoms().expect("discrete");
            let mut jumps = Vec::new();
            for a in atoms {
                for &s in a.partition.terms() {
                    jumps.push(Jump {
                        size: -s.ln(),
                        factor: s,
                        weight: a.rate * s.powf(q),
                    });
                }
            }
            let mut acc = 0.0;
            let cumulative = jumps
                .iter()
                .map(|j| {
                    acc += j.weight;
                    acc
                })
                .collect();
            JumpKind::Atoms { jumps, cumulative }
        }
        Dislocation::Truncated(t) => JumpKind::Density {
            measure: t.clone(),
            bound: if q >= 1.0 { 1.0 } else { 2f64.powf(1.0 - q) },
        },
        Dislocation::Density(_) => return Err(DislocationError::InfiniteActivity.into()),
    };
    let total_rate = match &kind {
        JumpKind::Atoms { cumulative, .. } => cumulative.last().copied().unwrap_or(0.0),
        JumpKind::Density { .. } => nu.integrate(&|s| s.iter().map(|x| x.powf(q)).sum())?,
    };
    Ok(TiltedJumpLaw {
        tilt: p,
        kind,
        total_rate,
        killing_rate,
        event_rate: nu.total_rate(),
        measure: nu.clone(),
    })
}

fn is_near_rational(r: f64) -> bool {
    // continued-fraction convergents of r up to the denominator cap
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    let mut x = r;
    for _ in 0..64 {
        let a = x.floor();
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > LATTICE_MAX_DENOMINATOR as f64 {
            return false;
        }
        if (r - h2 / k2).abs() <= LATTICE_TOL * r.abs().max(1.0) {
            return true;
        }
        let frac = x - a;
        if frac.abs() < 1e-15 {
            return true;
        }
        x = 1.0 / frac;
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
    }
    false
}

impl TiltedJumpLaw {
    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    /// Total mass of the tilted jump measure.
    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    /// `Phi(p)`, zero at the Malthusian parameter.
    pub fn killing_rate(&self) -> f64 {
        self.killing_rate
    }

    pub fn jumps(&self) -> Option<&[Jump]> {
        match &self.kind {
            JumpKind::Atoms { jumps, .. } => Some(jumps),
            JumpKind::Density { .. } => None,
        }
    }

    /// `int (1 - exp(-lambda x)) m_p(dx)`.
    pub fn laplace_integral(&self, lambda: f64) -> Result<f64, TaggedError> {
        match &self.kind {
            JumpKind::Atoms { jumps, .. } => Ok(jumps
                .iter()
                .map(|j| j.weight * -(-lambda * j.size).exp_m1())
                .sum()),
            JumpKind::Density { .. } => {
                let q = 1.0 + self.tilt;
                Ok(self.measure.integrate(&|s| {
                    s.iter().map(|x| x.powf(q) * (1.0 - x.powf(lambda))).sum()
                })?)
            }
        }
    }

    /// The common span of the jump sizes, if they are all integer multiples of one.
    pub fn lattice_span(&self) -> Option<f64> {
        let JumpKind::Atoms { jumps, .. } = &self.kind else {
            return None;
        };
        let sizes: Vec<f64> = jumps.iter().filter(|j| j.weight > 0.0).map(|j| j.size).collect();
        let base = sizes.iter().copied().fold(f64::INFINITY, f64::min);
        if !base.is_finite() {
            return None;
        }
        if sizes.iter().all(|&x| is_near_rational(x / base)) {
            // span = base / lcm of denominators; the smallest size is enough for reporting
            Some(base)
        } else {
            None
        }
    }

    /// One jump `(size, factor)` from the normalized tilted jump measure.
    pub fn sample_jump(&self, rng: &mut StreamRng, scratch: &mut Vec<f64>) -> (f64, f64) {
        match &self.kind {
            JumpKind::Atoms { jumps, cumulative } => {
                let target = rng.random::<f64>() * self.total_rate;
                let k = cumulative
                    .partition_point(|&c| c <= target)
                    .min(jumps.len() - 1);
                (jumps[k].size, jumps[k].factor)
            }
            JumpKind::Density { measure, bound } => {
                let q = 1.0 + self.tilt;
                loop {
                    measure.sample_terms(rng, scratch);
                    let mut u = rng.random::<f64>() * bound;
                    for &s in scratch.iter() {
                        let w = s.powf(q);
                        if u < w {
                            return (-s.ln(), s);
                        }
                        u -= w;
                    }
                }
            }
        }
    }

    /// Probability that an event of the jump chain is a kill.
    fn kill_probability(&self) -> f64 {
        if self.killing_rate <= 0.0 {
            0.0
        } else {
            self.killing_rate / (self.killing_rate + self.total_rate)
        }
    }

    fn walk<C: Fn(f64, f64) -> bool>(
        &self,
        rng: &mut StreamRng,
        level: f64,
        crossed: C,
    ) -> Result<Passage, TaggedError> {
        if self.total_rate <= 0.0 {
            return Err(TaggedError::NoJumps);
        }
        let kill = self.kill_probability();
        let mut scratch = Vec::new();
        let (mut position, mut mass) = (0.0, 1.0);
        let mut jumps = 0u32;
        loop {
            if kill > 0.0 && rng.random::<f64>() < kill {
                return Err(TaggedError::KilledBeforePassage { level });
            }
            let (size, factor) = self.sample_jump(rng, &mut scratch);
            position += size;
            mass *= factor;
            jumps += 1;
            if crossed(position, mass) {
                return Ok(Passage {
                    passage_value: position,
                    mass,
                    jumps,
                });
            }
        }
    }

    /// `(xi_tau(x), xi_tau(x) - x)` with `tau(x) = inf{t : xi_t > x}`.
    /// Holding times do not affect the overshoot and are not simulated.
    pub fn overshoot_sample(&self, x: f64, rng: &mut StreamRng) -> Result<Overshoot, TaggedError> {
        if x.is_nan() || x < 0.0 {
            return Err(TaggedError::InvalidLevel(x));
        }
        let p = self.walk(rng, x, |pos, _| pos > x)?;
        Ok(Overshoot {
            passage_value: p.passage_value,
            overshoot: p.passage_value - x,
        })
    }

    /// First passage of `exp(-xi)` strictly below `eta`. The crossing test
    /// is done on the product of mass factors so it agrees exactly with the
    /// freezing rule of stopping lines.
    pub fn passage_below(&self, eta: f64, rng: &mut StreamRng) -> Result<Passage, TaggedError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(TaggedError::InvalidLevel(eta));
        }
        self.walk(rng, -eta.ln(), |_, m| m < eta)
    }

    /// Tagged chain at time `t`: events at rate `nu(S)`, each one a kill
    /// with probability `Phi(p) / nu(S)` and otherwise a jump from the
    /// normalized tilted law. Returns `None` if killed.
    pub fn tagged_position(&self, t: f64, rng: &mut StreamRng) -> Result<Option<f64>, TaggedError> {
        if self.killing_rate < 0.0 {
            return Err(TaggedError::NegativeKilling(self.killing_rate));
        }
        let rate = self.killing_rate + self.total_rate;
        let kill = self.killing_rate / rate;
        let mut scratch = Vec::new();
        let mut clock = 0.0;
        let mut position = 0.0;
        loop {
            let u: f64 = rng.random();
            clock += -(1.0 - u).ln() / rate;
            if clock > t {
                return Ok(Some(position));
            }
            if kill > 0.0 && rng.random::<f64>() < kill {
                return Ok(None);
            }
            position += self.sample_jump(rng, &mut scratch).0;
        }
    }

    /// Event rate of the untilted chain, `nu(S)`.
    pub fn event_rate(&self) -> f64 {
        self.event_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overshoot {
    pub passage_value: f64,
    pub overshoot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Passage {
    /// `xi` at first passage.
    pub passage_value: f64,
    /// `exp(-xi)` as a product of mass factors.
    pub mass: f64,
    pub jumps: u32,
}

/// The deterministic measure `rho` on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LimitMeasure {
    measure: Dislocation,
    p_star: f64,
    phi_prime: f64,
}

impl LimitMeasure {
    pub fn new(nu: &Dislocation, p_star: f64) -> Result<Self, TaggedError> {
        Ok(Self {
            measure: nu.clone(),
            p_star,
            phi_prime: exponent::phi_prime(nu, p_star)?,
        })
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    /// `Phi'(p*)`.
    pub fn normalizer(&self) -> f64 {
        self.phi_prime
    }

    /// `<rho, f>`.
    pub fn pairing(&self, f: &TestFunction) -> Result<f64, TaggedError> {
        let q = 1.0 + self.p_star;
        let v = self.measure.integrate(&|s| {
            s.iter().map(|&x| x.powf(q) * f.log_primitive(x)).sum()
        })?;
        Ok(v / self.phi_prime)
    }

    /// `rho([0, u])`.
    pub fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let q = 1.0 + self.p_star;
        let v = self
            .measure
            .integrate(&|s| {
                s.iter()
                    .filter(|&&x| x < u)
                    .map(|&x| x.powf(q) * (u / x).ln())
                    .sum()
            })
            .unwrap_or(f64::NAN);
        v / self.phi_prime
    }
}

/// `<rho, f>` for the measure `nu` with Malthusian parameter `p_star`.
pub fn limit_pairing(nu: &Dislocation, p_star: f64, f: &TestFunction) -> Result<f64, TaggedError> {
    LimitMeasure::new(nu, p_star)?.pairing(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalPoint {
    pub x: f64,
    pub ks_distance: f64,
    pub samples: usize,
}

/// Kolmogorov-Smirnov distance between the law of `exp(-overshoot)` at
/// each level in `x_grid` and the limit measure.
pub fn renewal_limit_check(
    law: &TiltedJumpLaw,
    limit: &LimitMeasure,
    x_grid: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<RenewalPoint>, TaggedError> {
    if law.killing_rate() != 0.0 {
        return Err(TaggedError::NonZeroKilling(law.killing_rate()));
    }
    if let Some(span) = law.lattice_span() {
        return Err(TaggedError::LatticeDetected { span });
    }
    x_grid
        .iter()
        .enumerate()
        .map(|(gi, &x)| {
            let values = overshoot_values(law, x, replicas, master_seed, gi as u64)?;
            Ok(RenewalPoint {
                x,
                ks_distance: stats::ks_statistic(&values, |u| limit.cdf(u)),
                samples: values.len(),
            })
        })
        .collect()
}

/// `exp(-overshoot)` for `replicas` independent walks at level `x`.
pub fn overshoot_values(
    law: &TiltedJumpLaw,
    x: f64,
    replicas: usize,
    master_seed: u64,
    stream: u64,
) -> Result<Vec<f64>, TaggedError> {
    let seed = rng::mix64(master_seed, stream, rng::tag::OVERSHOOT);
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::replica_stream(seed, r, rng::tag::OVERSHOOT);
            law.overshoot_sample(x, &mut g).map(|o| (-o.overshoot).exp())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceComparison {
    pub lambda: f64,
    /// Mean of `exp(-lambda xi_t)` over surviving paths.
    pub conditional: MeanEstimate,
    /// `exp(-Phi_p(lambda) t)`.
    pub target: f64,
    pub z_score: f64,
    /// Mean of `exp(-lambda xi_t) 1{alive}` over all paths.
    pub unconditional: MeanEstimate,
    /// `exp(-Phi(lambda + p) t)`.
    pub unconditional_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedPathReport {
    pub tilt: f64,
    pub time: f64,
    pub replicas: usize,
    pub killed: usize,
    pub comparisons: Vec<LaplaceComparison>,
}

/// Simulates the tilted tagged chain and compares its Laplace transform at
/// time `t` with the closed form.
pub fn tagged_path_check(
    nu: &Dislocation,
    p: f64,
    t: f64,
    lambdas: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<TaggedPathReport, TaggedError> {
    let law = tilted_jump_law(nu, p)?;
    let positions: Vec<Option<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::replica_stream(master_seed, r, rng::tag::TAGGED);
            law.tagged_position(t, &mut g)
        })
        .collect::<Result<_, _>>()?;
    let killed = positions.iter().filter(|x| x.is_none()).count();
    let comparisons = lambdas
        .iter()
        .map(|&lambda| {
            let alive: Vec<f64> = positions
                .iter()
                .flatten()
                .map(|x| (-lambda * x).exp())
                .collect();
            let all: Vec<f64> = positions
                .iter()
                .map(|x| x.map_or(0.0, |x| (-lambda * x).exp()))
                .collect();
            let conditional = MeanEstimate::from_samples(&alive);
            let target = (-exponent::tilted_exponent(nu, p, lambda)? * t).exp();
            Ok(LaplaceComparison {
                lambda,
                z_score: conditional.z_against(target),
                conditional,
                target,
                unconditional: MeanEstimate::from_samples(&all),
                unconditional_target: (-exponent::phi(nu, lambda + p)? * t).exp(),
            })
        })
        .collect::<Result<Vec<_>, TaggedError>>()?;
    Ok(TaggedPathReport {
        tilt: p,
        time: t,
        replicas,
        killed,
        comparisons,
    })
}
