//! Empirical measures on stopping lines.
//!
//! For the line `X_eta` and a test function `f` on `[0, 1]`,
//!
//! ```text
//! <rho_eta, f> = sum_j X_j^(1 + p*) f(X_j / eta)
//! ```
//!
//! With `f = 1` this is a unit-mean martingale in `eta`; along a single
//! genealogy refined through decreasing levels `<rho_eta, f> / <rho, f>`
//! converges to the same limit.

use rayon::prelude::*;
use thiserror::Error;

use crate::dislocation::Dislocation;
use crate::exponent::{ExponentContext, ExponentError};
use crate::fragsim::{self, SimError, StoppingLine};
use crate::rng;
use crate::stats::MeanEstimate;
use crate::tagged::{self, LimitMeasure, TaggedError};
pub use crate::testfn::TestFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SllnError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Tagged(#[from] TaggedError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Dislocation(#[from] crate::dislocation::DislocationError),
    #[error("eta schedule must be strictly decreasing in (0, 1]")]
    BadSchedule,
    #[error("assumption not satisfied: {0}")]
    Assumption(String),
}

/// `<rho_eta, f>`. Zero-mass lines give zero.
pub fn empirical_pairing(line: &StoppingLine, p_star: f64, f: &TestFunction) -> f64 {
    let q = 1.0 + p_star;
    let eta = line.eta();
    line.fragments()
        .map(|b| (q * b.log_mass()).exp() * f.eval(b.mass / eta))
        .sum()
}

/// `<rho_eta, 1>`.
pub fn martingale_mass(line: &StoppingLine, p_star: f64) -> f64 {
    let q = 1.0 + p_star;
    line.fragments()
        .map(|b| (q * b.log_mass()).exp())
        .sum()
}

/// `sum_j X_j^(1 + p*) f(X_j)`, with `f` applied to the mass itself.
pub fn absolute_pairing(line: &StoppingLine, p_star: f64, f: &TestFunction) -> f64 {
    let q = 1.0 + p_star;
    line.fragments()
        .map(|b| (q * b.log_mass()).exp() * f.eval(b.mass))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManyToOne {
    pub lhs: MeanEstimate,
    pub rhs: MeanEstimate,
    pub z_score: f64,
}

/// Compares `E sum_j X_j^(1+p*) g(X_j)` over stopping lines with
/// `E g(exp(-xi_tau))` for the tilted tagged fragment passing below `eta`.
/// With `relative` set, `g(x) = f(x / eta)`, otherwise `g = f`.
pub fn many_to_one_check(
    ctx: &ExponentContext,
    eta: f64,
    f: &TestFunction,
    replicas: usize,
    master_seed: u64,
    relative: bool,
    budget: usize,
) -> Result<ManyToOne, SllnError> {
    let mut v = many_to_one_checks(
        ctx,
        eta,
        std::slice::from_ref(f),
        replicas,
        master_seed,
        relative,
        budget,
    )?;
    Ok(v.remove(0))
}

/// [`many_to_one_check`] for several test functions on the same samples.
pub fn many_to_one_checks(
    ctx: &ExponentContext,
    eta: f64,
    fs: &[TestFunction],
    replicas: usize,
    master_seed: u64,
    relative: bool,
    budget: usize,
) -> Result<Vec<ManyToOne>, SllnError> {
    let nu = ctx.measure.finite()?;
    let q = 1.0 + ctx.p_star;
    let scale = if relative { 1.0 / eta } else { 1.0 };
    let lhs: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let line = fragsim::stopping_line(nu, eta, master_seed, r, budget)?;
            Ok(fs
                .iter()
                .map(|f| {
                    line.fragments()
                        .map(|b| (q * b.log_mass()).exp() * f.eval(b.mass * scale))
                        .sum()
                })
                .collect())
        })
        .collect::<Result<_, SimError>>()?;
    let law = tagged::tilted_jump_law(&ctx.measure, ctx.p_star)?;
    let seed = rng::mix64(master_seed, 0, rng::tag::MEASURE);
    let rhs: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mass = if eta >= 1.0 {
                1.0
            } else {
                let mut g = rng::replica_stream(seed, r, rng::tag::OVERSHOOT);
                law.passage_below(eta, &mut g)?.mass
            };
            Ok(fs.iter().map(|f| f.eval(mass * scale)).collect())
        })
        .collect::<Result<_, TaggedError>>()?;
    Ok((0..fs.len())
        .map(|k| {
            let column = |rows: &[Vec<f64>]| rows.iter().map(|row| row[k]).collect::<Vec<_>>();
            let lhs = MeanEstimate::from_samples(&column(&lhs));
            let rhs = MeanEstimate::from_samples(&column(&rhs));
            ManyToOne {
                z_score: lhs.z_score(&rhs),
                lhs,
                rhs,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SllnRecord {
    pub eta: f64,
    /// `<rho_eta, f>`, one per test function.
    pub pairings: Vec<f64>,
    /// `<rho_eta, 1>`.
    pub mass: f64,
    /// `<rho_eta, f> / <rho, f>`, one per test function.
    pub ratios: Vec<f64>,
    pub fragment_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SllnTrajectory {
    pub replica: u64,
    pub seed: u64,
    pub records: Vec<SllnRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SllnExperiment {
    pub p_star: f64,
    /// `<rho, f>` for each test function.
    pub limits: Vec<f64>,
    /// Set when the jump sizes are commensurable.
    pub lattice_span: Option<f64>,
    pub trajectories: Vec<SllnTrajectory>,
}

fn check_schedule(schedule: &[f64]) -> Result<(), SllnError> {
    let in_range = schedule.iter().all(|&e| e > 0.0 && e <= 1.0);
    let decreasing = schedule.windows(2).all(|w| w[1] < w[0]);
    if schedule.is_empty() || !in_range || !decreasing {
        return Err(SllnError::BadSchedule);
    }
    Ok(())
}

/// `2^-from, ..., 2^-to`.
pub fn dyadic_schedule(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

/// Follows one genealogy per replica through `schedule` by refinement.
pub fn slln_experiment(
    ctx: &ExponentContext,
    fs: &[TestFunction],
    schedule: &[f64],
    replicas: usize,
    master_seed: u64,
    budget: usize,
) -> Result<SllnExperiment, SllnError> {
    check_schedule(schedule)?;
    let a = &ctx.assumptions;
    for c in [&a.finite_mean, &a.malthusian_root, &a.moment] {
        if c.applicable && !c.holds {
            return Err(SllnError::Assumption(c.detail.clone()));
        }
    }
    let nu = ctx.measure.finite()?;
    let rho = LimitMeasure::new(&ctx.measure, ctx.p_star)?;
    let limits = fs
        .iter()
        .map(|f| rho.pairing(f))
        .collect::<Result<Vec<_>, _>>()?;
    let lattice_span = tagged::tilted_jump_law(&ctx.measure, ctx.p_star)?.lattice_span();
    let p_star = ctx.p_star;
    let trajectories = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let seed = rng::mix64(master_seed, replica, rng::tag::FRAGMENTS);
            let mut line = StoppingLine::simulate(nu, schedule[0], seed, budget)?;
            let mut records = Vec::with_capacity(schedule.len());
            for (k, &eta) in schedule.iter().enumerate() {
                if k > 0 {
                    line = line.refine(nu, eta, budget)?;
                }
                let pairings: Vec<f64> =
                    fs.iter().map(|f| empirical_pairing(&line, p_star, f)).collect();
                let ratios = pairings.iter().zip(&limits).map(|(v, l)| v / l).collect();
                records.push(SllnRecord {
                    eta,
                    mass: martingale_mass(&line, p_star),
                    fragment_count: line.len(),
                    pairings,
                    ratios,
                });
            }
            Ok(SllnTrajectory {
                replica,
                seed,
                records,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SllnExperiment {
        p_star,
        limits,
        lattice_span,
        trajectories,
    })
}

/// Convenience wrapper building the exponent context from `nu`.
pub fn slln_for(
    nu: Dislocation,
    fs: &[TestFunction],
    schedule: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<SllnExperiment, SllnError> {
    let ctx = ExponentContext::new(nu)?;
    slln_experiment(&ctx, fs, schedule, replicas, master_seed, fragsim::DEFAULT_BUDGET)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dislocation::catalog::*;
    use crate::fragsim::DEFAULT_BUDGET;
    use crate::stats;

    fn ctx(d: crate::dislocation::DiscreteDislocation) -> ExponentContext {
        ExponentContext::new(Dislocation::Discrete(d)).unwrap()
    }

    /// Dissipative with random lines.
    fn two_atoms() -> crate::dislocation::DiscreteDislocation {
        crate::dislocation::DiscreteDislocation::from_raw(&[
            (1.0, vec![0.5, 0.25]),
            (1.0, vec![0.6, 0.3]),
        ])
        .unwrap()
    }

    #[test]
    fn dyadic_line_pairings() {
        let half = binary(0.5);
        let unit = StoppingLine::simulate(&half, 1.0, 7, DEFAULT_BUDGET).unwrap();
        assert_eq!(empirical_pairing(&unit, 0.0, &TestFunction::one()), 1.0);
        let line = StoppingLine::simulate(&half, 0.3, 7, DEFAULT_BUDGET).unwrap();
        assert_eq!(empirical_pairing(&line, 0.0, &TestFunction::one()), 1.0);
        let f = TestFunction::indicator(0.8, 1.0).unwrap();
        assert_eq!(empirical_pairing(&line, 0.0, &f), 1.0);
        let g = TestFunction::indicator(0.9, 1.0).unwrap();
        assert_eq!(empirical_pairing(&line, 0.0, &g), 0.0);
    }

    #[test]
    fn conservative_mass_is_one() {
        let nu = binary(0.7);
        for r in 0..50 {
            for eta in [1e-1, 1e-2, 1e-3] {
                let line = fragsim::stopping_line(&nu, eta, 3, r, DEFAULT_BUDGET).unwrap();
                assert!((martingale_mass(&line, 0.0) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pairing_is_monotone_and_linear() {
        let c = ctx(half_quarter());
        let nu = c.measure.finite().unwrap();
        let f = TestFunction::indicator(0.3, 0.7).unwrap();
        let g = TestFunction::indicator(0.2, 0.9).unwrap();
        let h = TestFunction::identity();
        for r in 0..20 {
            let line = fragsim::stopping_line(nu, 0.01, 11, r, DEFAULT_BUDGET).unwrap();
            let p = c.p_star;
            assert!(empirical_pairing(&line, p, &f) <= empirical_pairing(&line, p, &g));
            let sum = f.add_bins(&g.scaled(2.5)).unwrap();
            let lin = empirical_pairing(&line, p, &f) + 2.5 * empirical_pairing(&line, p, &g);
            assert!((empirical_pairing(&line, p, &sum) - lin).abs() < 1e-12);
            assert!(empirical_pairing(&line, p, &h) <= martingale_mass(&line, p) + 1e-15);
        }
    }

    #[test]
    fn many_to_one_examples() {
        let c = ctx(binary(0.5));
        let f = TestFunction::indicator(0.0, 0.26).unwrap();
        let m = many_to_one_check(&c, 0.3, &f, 200, 1, false, DEFAULT_BUDGET).unwrap();
        assert_eq!(m.lhs.mean, 1.0);
        assert_eq!(m.rhs.mean, 1.0);
        assert_eq!(m.z_score, 0.0);
        let one = TestFunction::one();
        let c = ctx(two_atoms());
        let m = many_to_one_check(&c, 0.05, &one, 20_000, 2, false, DEFAULT_BUDGET).unwrap();
        assert_eq!(m.rhs.mean, 1.0);
        assert!(m.z_score.abs() < 3.0);
    }

    #[test]
    fn many_to_one_relative_form() {
        let c = ctx(two_atoms());
        let f = TestFunction::indicator(0.5, 1.0).unwrap();
        let m = many_to_one_check(&c, 0.01, &f, 20_000, 9, true, DEFAULT_BUDGET).unwrap();
        assert!(m.z_score.abs() < 3.0, "{m:?}");
        let c = ctx(binary(0.7));
        let f = TestFunction::identity();
        let m = many_to_one_check(&c, 0.01, &f, 20_000, 9, true, DEFAULT_BUDGET).unwrap();
        assert!(m.z_score.abs() < 3.0, "{m:?}");
    }

    #[test]
    fn refinement_regression_slope() {
        let c = ctx(two_atoms());
        let nu = c.measure.finite().unwrap();
        let pairs: Vec<(f64, f64)> = (0..5000u64)
            .into_par_iter()
            .map(|r| {
                let coarse = fragsim::stopping_line(nu, 0.1, 21, r, DEFAULT_BUDGET).unwrap();
                let fine = coarse.refine(nu, 0.01, DEFAULT_BUDGET).unwrap();
                (martingale_mass(&coarse, c.p_star), martingale_mass(&fine, c.p_star))
            })
            .collect();
        let n = pairs.len() as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn constant_function_ratio_is_the_mass() {
        let exp = slln_for(
            Dislocation::Discrete(half_quarter()),
            &[TestFunction::one()],
            &dyadic_schedule(2, 8),
            8,
            4,
        )
        .unwrap();
        assert!((exp.limits[0] - 1.0).abs() < 1e-12);
        assert!(exp.lattice_span.is_some());
        for t in &exp.trajectories {
            assert_eq!(t.records.len(), 7);
            for r in &t.records {
                assert!((r.ratios[0] - r.mass).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conservative_ratio_settles() {
        let exp = slln_for(
            Dislocation::Discrete(binary(0.7)),
            &[TestFunction::indicator(0.5, 1.0).unwrap()],
            &dyadic_schedule(4, 14),
            30,
            8,
        )
        .unwrap();
        assert!(exp.lattice_span.is_none());
        let last: Vec<f64> = exp
            .trajectories
            .iter()
            .map(|t| (t.records.last().unwrap().ratios[0] - 1.0).abs())
            .collect();
        assert!(stats::median(&last) < 0.05);
    }

    #[test]
    fn schedule_validation() {
        let c = ctx(binary(0.7));
        let one = [TestFunction::one()];
        for bad in [vec![], vec![0.5, 0.5], vec![0.1, 0.2], vec![2.0, 0.5]] {
            assert_eq!(
                slln_experiment(&c, &one, &bad, 1, 0, DEFAULT_BUDGET),
                Err(SllnError::BadSchedule)
            );
        }
    }
}
