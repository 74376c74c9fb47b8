//! Simulation of homogeneous fragmentation genealogies.
//!
//! Blocks live for independent exponential times with parameter `nu(S)` and
//! then split according to `nu / nu(S)`; rates do not depend on mass. Each
//! block owns a random stream keyed by its path identifier (the root key is
//! derived from the master seed and replica, children hash their index into
//! the parent key). A block's lifetime and its dislocation are therefore the
//! same no matter when, or from which stopping line, it is expanded, which
//! is what makes [`StoppingLine::refine`] an exact path coupling.
//!
//! Masses are kept as products of partition terms, so dyadic masses stay
//! exact and comparisons against dyadic levels are not perturbed by rounding.

use rand::Rng;
use thiserror::Error;

use crate::dislocation::FiniteDislocation;
use crate::exponent::{ExponentContext, ExponentError};
use crate::rng::{self, StreamRng};

/// Default cap on the number of blocks created by one simulation.
pub const DEFAULT_BUDGET: usize = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("fragment budget of {0} exceeded; use a larger eta or a larger budget")]
    BudgetExceeded(usize),
    #[error("eta must be positive and finite, got {0}")]
    InvalidEta(f64),
    #[error("cannot refine a line at eta = {from} to the coarser level {to}")]
    CoarserLevel { from: f64, to: f64 },
    #[error("time horizon must be nonnegative and finite, got {0}")]
    InvalidTime(f64),
    #[error("stopping line was stored without its genealogy")]
    GenealogyMissing,
    #[error("measure has zero total rate")]
    ZeroRate,
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    /// Path identifier; also the seed of this block's random stream.
    pub id: u64,
    pub mass: f64,
    pub birth_time: f64,
    pub depth: u32,
    /// Index of the parent in the owning arena.
    pub parent: Option<usize>,
    /// Holding time before this block split; `None` while it has not split.
    pub lifetime: Option<f64>,
    pub frozen: bool,
}

impl Fragment {
    fn root(id: u64) -> Self {
        Self {
            id,
            mass: 1.0,
            birth_time: 0.0,
            depth: 0,
            parent: None,
            lifetime: None,
            frozen: false,
        }
    }

    /// `log X`, at most zero.
    pub fn log_mass(&self) -> f64 {
        self.mass.ln()
    }

    /// The time the block entered the stopping line; blocks freeze at birth.
    pub fn freeze_time(&self) -> f64 {
        self.birth_time
    }
}

/// One dislocation of the block with key `id`, drawn from its own stream.
struct Split {
    lifetime: f64,
}

fn split_block(
    nu: &dyn FiniteDislocation,
    id: u64,
    terms: &mut Vec<f64>,
) -> Split {
    let mut r: StreamRng = rng::stream(id);
    let u: f64 = r.random();
    let lifetime = -(1.0 - u).ln() / nu.total_rate();
    nu.sample_terms(&mut r, terms);
    Split { lifetime }
}

/// Fragments frozen when first strictly smaller than `eta`.
#[derive(Debug, Clone)]
pub struct StoppingLine {
    eta: f64,
    nodes: Vec<Fragment>,
    frozen: Vec<usize>,
    dust_events: u64,
    dust_mass: f64,
    root_id: u64,
    has_genealogy: bool,
}

struct Expander<'a> {
    nu: &'a dyn FiniteDislocation,
    eta: f64,
    budget: usize,
    terms: Vec<f64>,
}

impl Expander<'_> {
    /// Splits `start` repeatedly until every descendant is below `eta`.
    fn run(&mut self, line: &mut StoppingLine, start: usize) -> Result<(), SimError> {
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let (id, mass, birth, depth) = {
                let f = &line.nodes[i];
                (f.id, f.mass, f.birth_time, f.depth)
            };
            let split = split_block(self.nu, id, &mut self.terms);
            line.nodes[i].lifetime = Some(split.lifetime);
            line.nodes[i].frozen = false;
            let child_birth = birth + split.lifetime;
            let kept: f64 = self.terms.iter().sum();
            if kept < 1.0 {
                line.dust_events += 1;
                line.dust_mass += mass * (1.0 - kept);
            }
            if line.nodes.len() + self.terms.len() > self.budget {
                return Err(SimError::BudgetExceeded(self.budget));
            }
            for (j, &s) in self.terms.iter().enumerate() {
                let child = Fragment {
                    id: rng::child_id(id, j),
                    mass: mass * s,
                    birth_time: child_birth,
                    depth: depth + 1,
                    parent: Some(i),
                    lifetime: None,
                    frozen: false,
                };
                let k = line.nodes.len();
                if child.mass < self.eta {
                    line.nodes.push(Fragment {
                        frozen: true,
                        ..child
                    });
                    line.frozen.push(k);
                } else {
                    line.nodes.push(child);
                    stack.push(k);
                }
            }
        }
        Ok(())
    }
}

fn check_rate(nu: &dyn FiniteDislocation) -> Result<(), SimError> {
    if nu.total_rate() > 0.0 {
        Ok(())
    } else {
        Err(SimError::ZeroRate)
    }
}

impl StoppingLine {
    /// Simulates the line `X_eta` from a unit block whose stream key is `root_id`.
    /// For `eta >= 1` the line is the unit block itself.
    pub fn simulate(
        nu: &dyn FiniteDislocation,
        eta: f64,
        root_id: u64,
        budget: usize,
    ) -> Result<Self, SimError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(SimError::InvalidEta(eta));
        }
        check_rate(nu)?;
        let mut line = Self {
            eta,
            nodes: vec![Fragment::root(root_id)],
            frozen: Vec::new(),
            dust_events: 0,
            dust_mass: 0.0,
            root_id,
            has_genealogy: true,
        };
        if eta >= 1.0 {
            line.nodes[0].frozen = true;
            line.frozen.push(0);
            return Ok(line);
        }
        let mut ex = Expander {
            nu,
            eta,
            budget,
            terms: Vec::new(),
        };
        ex.run(&mut line, 0)?;
        Ok(line)
    }

    /// Continues the same genealogy down to `eta_fine <= eta`. Frozen
    /// fragments already below `eta_fine` are kept; the others are split
    /// further. The result coincides with [`StoppingLine::simulate`] at
    /// `eta_fine` for the same root key, up to enumeration order.
    pub fn refine(
        &self,
        nu: &dyn FiniteDislocation,
        eta_fine: f64,
        budget: usize,
    ) -> Result<Self, SimError> {
        if !(eta_fine > 0.0 && eta_fine.is_finite()) {
            return Err(SimError::InvalidEta(eta_fine));
        }
        if eta_fine > self.eta {
            return Err(SimError::CoarserLevel {
                from: self.eta,
                to: eta_fine,
            });
        }
        if eta_fine == self.eta {
            return Ok(self.clone());
        }
        check_rate(nu)?;
        let mut line = Self {
            eta: eta_fine,
            frozen: Vec::with_capacity(self.frozen.len()),
            ..self.clone()
        };
        let mut ex = Expander {
            nu,
            eta: eta_fine,
            budget,
            terms: Vec::new(),
        };
        for &i in &self.frozen {
            if line.nodes[i].mass < eta_fine {
                line.frozen.push(i);
            } else {
                ex.run(&mut line, i)?;
            }
        }
        Ok(line)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn root_id(&self) -> u64 {
        self.root_id
    }

    pub fn len(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frozen.is_empty()
    }

    /// Frozen fragments in enumeration order.
    pub fn fragments(&self) -> impl ExactSizeIterator<Item = &Fragment> + '_ {
        self.frozen.iter().map(move |&i| &self.nodes[i])
    }

    pub fn masses(&self) -> Vec<f64> {
        self.fragments().map(|f| f.mass).collect()
    }

    /// Number of dislocations that lost mass.
    pub fn dust_events(&self) -> u64 {
        self.dust_events
    }

    /// Total absolute mass lost to dust above the line.
    pub fn dust_mass(&self) -> f64 {
        self.dust_mass
    }

    /// Number of blocks ever created, frozen or not.
    pub fn blocks_created(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_genealogy(&self) -> bool {
        self.has_genealogy
    }

    /// Keeps only the frozen fragments. Refinement still works afterwards;
    /// freeze-time transforms do not.
    pub fn discard_genealogy(&mut self) {
        let nodes: Vec<Fragment> = self
            .frozen
            .iter()
            .map(|&i| Fragment {
                parent: None,
                ..self.nodes[i].clone()
            })
            .collect();
        self.frozen = (0..nodes.len()).collect();
        self.nodes = nodes;
        self.has_genealogy = false;
    }

    /// Ancestors of the `k`-th frozen fragment, root first, excluding itself.
    pub fn ancestry(&self, k: usize) -> Result<Vec<&Fragment>, SimError> {
        if !self.has_genealogy {
            return Err(SimError::GenealogyMissing);
        }
        let mut chain = Vec::new();
        let mut cur = self.nodes[self.frozen[k]].parent;
        while let Some(i) = cur {
            chain.push(&self.nodes[i]);
            cur = self.nodes[i].parent;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Freeze times after the self-similar time change of index `alpha`.
    ///
    /// Mass is constant between dislocations, so the change of clock acts
    /// segment by segment: the transformed freeze time of a fragment is the
    /// sum over its ancestors of `holding time * mass^alpha`. Masses, and
    /// hence the line itself, are unaffected.
    pub fn self_similar_freeze_times(&self, alpha: f64) -> Result<Vec<f64>, SimError> {
        if !self.has_genealogy {
            return Err(SimError::GenealogyMissing);
        }
        (0..self.frozen.len())
            .map(|k| {
                Ok(self
                    .ancestry(k)?
                    .iter()
                    .map(|a| {
                        let lifetime = a.lifetime.expect("ancestors have split");
                        if alpha == 0.0 {
                            lifetime
                        } else {
                            lifetime * a.mass.powf(alpha)
                        }
                    })
                    .sum())
            })
            .collect()
    }
}

/// `stopping_line(nu, eta)` for replica `replica` of `master_seed`.
pub fn stopping_line(
    nu: &dyn FiniteDislocation,
    eta: f64,
    master_seed: u64,
    replica: u64,
    budget: usize,
) -> Result<StoppingLine, SimError> {
    let root = rng::mix64(master_seed, replica, rng::tag::FRAGMENTS);
    StoppingLine::simulate(nu, eta, root, budget)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: u64,
    pub mass: f64,
    pub birth_time: f64,
    pub depth: u32,
}

/// The state `X(t)`, restricted to blocks of mass at least `floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub time: f64,
    pub floor: f64,
    /// Active blocks, largest first.
    pub active: Vec<Block>,
    pub absorbed_mass: f64,
    pub absorbed_count: u64,
    pub dust_mass: f64,
}

impl Population {
    pub fn total_active_mass(&self) -> f64 {
        self.active.iter().map(|b| b.mass).sum()
    }

    pub fn largest(&self) -> Option<f64> {
        self.active.first().map(|b| b.mass)
    }

    /// `sum X_i(t)^(1+p) exp(Phi(p) t)`, each term formed in log space.
    pub fn additive_martingale(&self, p: f64, ctx: &ExponentContext) -> Result<f64, SimError> {
        let phi = ctx.phi(p)?;
        Ok(self
            .active
            .iter()
            .map(|b| ((1.0 + p) * b.mass.ln() + phi * self.time).exp())
            .sum())
    }
}

/// Applies every dislocation up to time `t`; blocks below `floor` are moved
/// to the absorbed ledger without being split further.
pub fn simulate_until(
    nu: &dyn FiniteDislocation,
    t: f64,
    floor: f64,
    root_id: u64,
    budget: usize,
) -> Result<Population, SimError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SimError::InvalidTime(t));
    }
    check_rate(nu)?;
    let mut pop = Population {
        time: t,
        floor,
        active: Vec::new(),
        absorbed_mass: 0.0,
        absorbed_count: 0,
        dust_mass: 0.0,
    };
    let mut terms = Vec::new();
    let mut created = 1usize;
    let mut stack = vec![Block {
        id: root_id,
        mass: 1.0,
        birth_time: 0.0,
        depth: 0,
    }];
    while let Some(b) = stack.pop() {
        if b.mass < floor {
            pop.absorbed_mass += b.mass;
            pop.absorbed_count += 1;
            continue;
        }
        let split = split_block(nu, b.id, &mut terms);
        let death = b.birth_time + split.lifetime;
        if death > t {
            pop.active.push(b);
            continue;
        }
        let kept: f64 = terms.iter().sum();
        pop.dust_mass += b.mass * (1.0 - kept).max(0.0);
        created += terms.len();
        if created > budget {
            return Err(SimError::BudgetExceeded(budget));
        }
        for (j, &s) in terms.iter().enumerate() {
            stack.push(Block {
                id: rng::child_id(b.id, j),
                mass: b.mass * s,
                birth_time: death,
                depth: b.depth + 1,
            });
        }
    }
    pop.active
        .sort_by(|a, b| b.mass.total_cmp(&a.mass).then(a.id.cmp(&b.id)));
    Ok(pop)
}

/// `X_1(t)`, the largest block at time `t` (zero if everything became dust).
///
/// Blocks below a floor cannot have descendants above it, so the answer is
/// exact as soon as some block survives the floor; the floor is lowered
/// until that happens. Streams are keyed by block, so every attempt sees
/// the same genealogy.
pub fn largest_fragment(
    nu: &dyn FiniteDislocation,
    t: f64,
    root_id: u64,
    budget: usize,
) -> Result<f64, SimError> {
    let mut floor = 1e-2;
    while floor > 1e-300 {
        let pop = simulate_until(nu, t, floor, root_id, budget)?;
        if let Some(m) = pop.largest() {
            return Ok(m);
        }
        if pop.absorbed_count == 0 {
            return Ok(0.0);
        }
        floor *= 1e-3;
    }
    Ok(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dislocation::catalog::*;
    use crate::dislocation::Dislocation;

    fn line(nu: &dyn FiniteDislocation, eta: f64, replica: u64) -> StoppingLine {
        stopping_line(nu, eta, 2024, replica, DEFAULT_BUDGET).unwrap()
    }

    #[test]
    fn dyadic_cascade() {
        let nu = binary(0.5);
        let l = line(&nu, 0.3, 0);
        assert_eq!(l.masses(), vec![0.25; 4]);
        assert!(l.fragments().all(|f| f.depth == 2 && f.frozen));
        let r = l.refine(&nu, 0.2, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.masses(), vec![0.125; 8]);
    }

    #[test]
    fn unit_level_is_the_unit_block() {
        for (_, nu) in discrete_reference() {
            for eta in [1.0, 2.5] {
                let l = line(&nu, eta, 3);
                assert_eq!(l.masses(), vec![1.0]);
                assert_eq!(l.fragments().next().unwrap().freeze_time(), 0.0);
            }
        }
    }

    #[test]
    fn conservative_lines_keep_unit_mass() {
        let nu = binary(0.7);
        for replica in 0..20 {
            let l = line(&nu, 1e-3, replica);
            let total: f64 = l.masses().iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert_eq!(l.dust_events(), 0);
        }
    }

    #[test]
    fn frozen_fragments_straddle_the_level() {
        let nu = half_quarter();
        let l = line(&nu, 0.01, 9);
        let mut dust = 0.0;
        for (k, f) in l.fragments().enumerate() {
            assert!(f.mass < 0.01);
            let parent = l.ancestry(k).unwrap().last().unwrap().mass;
            assert!(parent >= 0.01);
            assert!(f.freeze_time() >= 0.0);
        }
        dust += l.dust_mass();
        let total: f64 = l.masses().iter().sum();
        assert!((total + dust - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refine_to_same_level_is_identity() {
        let nu = binary(0.7);
        let l = line(&nu, 0.05, 1);
        let same = l.refine(&nu, 0.05, DEFAULT_BUDGET).unwrap();
        assert_eq!(l.masses(), same.masses());
        assert!(matches!(
            l.refine(&nu, 0.1, DEFAULT_BUDGET),
            Err(SimError::CoarserLevel { .. })
        ));
    }

    #[test]
    fn refine_matches_direct_simulation_pathwise() {
        let nu = binary(0.7);
        for replica in 0..10 {
            let coarse = line(&nu, 0.05, replica);
            let refined = coarse.refine(&nu, 1e-3, DEFAULT_BUDGET).unwrap();
            let direct = line(&nu, 1e-3, replica);
            let mut a: Vec<(u64, f64, f64)> = refined
                .fragments()
                .map(|f| (f.id, f.mass, f.birth_time))
                .collect();
            let mut b: Vec<(u64, f64, f64)> = direct
                .fragments()
                .map(|f| (f.id, f.mass, f.birth_time))
                .collect();
            a.sort_by_key(|x| x.0);
            b.sort_by_key(|x| x.0);
            assert_eq!(a, b);
            let total: f64 = refined.masses().iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let nu = binary(0.5);
        assert!(matches!(
            stopping_line(&nu, 1e-4, 1, 0, 1000),
            Err(SimError::BudgetExceeded(1000))
        ));
    }

    #[test]
    fn population_at_time_zero_is_the_unit_block() {
        let nu = binary(0.7);
        let pop = simulate_until(&nu, 0.0, 0.0, 5, DEFAULT_BUDGET).unwrap();
        assert_eq!(pop.active.len(), 1);
        assert_eq!(pop.largest(), Some(1.0));
    }

    #[test]
    fn conservative_population_keeps_mass() {
        let nu = binary(0.7);
        for seed in 0..20 {
            for t in [0.5, 1.0, 2.0, 4.0] {
                let pop = simulate_until(&nu, t, 0.0, seed, DEFAULT_BUDGET).unwrap();
                assert!((pop.total_active_mass() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_block_count_grows_exponentially() {
        let nu = binary(0.5);
        let n = 10_000;
        let t = 2.0;
        let counts: Vec<f64> = (0..n)
            .map(|r| {
                let root = rng::mix64(17, r, rng::tag::FRAGMENTS);
                simulate_until(&nu, t, 0.0, root, DEFAULT_BUDGET)
                    .unwrap()
                    .active
                    .len() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        // each block splits into two at unit rate: m' = m
        assert!((mean - t.exp()).abs() < 3.0 * se, "{mean} vs {}", t.exp());
    }

    #[test]
    fn additive_martingale_basics() {
        let ctx = ExponentContext::new(Dislocation::Discrete(binary(0.7))).unwrap();
        let nu = binary(0.7);
        let pop = simulate_until(&nu, 0.0, 0.0, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(pop.additive_martingale(0.7, &ctx).unwrap(), 1.0);
        for seed in 0..10 {
            let pop = simulate_until(&nu, 3.0, 0.0, seed, DEFAULT_BUDGET).unwrap();
            assert!((pop.additive_martingale(0.0, &ctx).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dissipative_martingale_has_unit_mean() {
        let nu = half_quarter();
        let ctx = ExponentContext::new(Dislocation::Discrete(nu.clone())).unwrap();
        let n = 10_000u64;
        let vals: Vec<f64> = (0..n)
            .map(|r| {
                let root = rng::mix64(99, r, rng::tag::FRAGMENTS);
                simulate_until(&nu, 3.0, 0.0, root, DEFAULT_BUDGET)
                    .unwrap()
                    .additive_martingale(ctx.p_star, &ctx)
                    .unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean} (se {se})");
    }

    #[test]
    fn largest_fragment_agrees_with_full_population() {
        let nu = binary(0.7);
        for seed in 0..20 {
            let full = simulate_until(&nu, 4.0, 0.0, seed, DEFAULT_BUDGET).unwrap();
            let fast = largest_fragment(&nu, 4.0, seed, DEFAULT_BUDGET).unwrap();
            assert_eq!(full.largest(), Some(fast));
        }
    }

    #[test]
    fn self_similar_segment_sums() {
        let nu = binary(0.5);
        let l = line(&nu, 0.3, 4);
        let plain = l.self_similar_freeze_times(0.0).unwrap();
        let homogeneous: Vec<f64> = l.fragments().map(|f| f.freeze_time()).collect();
        for (a, b) in plain.iter().zip(&homogeneous) {
            assert!((a - b).abs() < 1e-12);
        }
        let ss = l.self_similar_freeze_times(1.0).unwrap();
        for (k, t) in ss.iter().enumerate() {
            let anc = l.ancestry(k).unwrap();
            assert_eq!(anc.len(), 2);
            let (t1, t2) = (anc[0].lifetime.unwrap(), anc[1].lifetime.unwrap());
            assert!((t - (t1 + 0.5 * t2)).abs() < 1e-12);
        }
    }

    #[test]
    fn discarded_genealogy_is_reported() {
        let nu = binary(0.7);
        let mut l = line(&nu, 0.1, 2);
        let masses = l.masses();
        l.discard_genealogy();
        assert_eq!(l.masses(), masses);
        assert_eq!(
            l.self_similar_freeze_times(1.0),
            Err(SimError::GenealogyMissing)
        );
        // refinement only needs the frozen fragments
        let a = l.refine(&nu, 0.01, DEFAULT_BUDGET).unwrap();
        let b = line(&nu, 0.01, 2);
        let mut ma = a.masses();
        let mut mb = b.masses();
        ma.sort_by(f64::total_cmp);
        mb.sort_by(f64::total_cmp);
        assert_eq!(ma, mb);
    }
}
