//! The Laplace exponent `Phi(p) = int (1 - sum s_i^(1+p)) nu(ds)` and the
//! indices derived from it.
//!
//! * the Malthusian parameter `p*`, the root of `Phi`;
//! * the threshold `p_bar`, the root of `(1 + p) Phi'(p) = Phi(p)`, which
//!   bounds the range where the additive martingale converges in mean;
//! * the tilted exponent `Phi_p(lambda) = Phi(lambda + p) - Phi(p)`.
//!
//! `Phi` is strictly increasing and concave above the lower index, so both
//! roots are found by bisection on a bracket where the sign is known.

use thiserror::Error;

use crate::dislocation::{Dislocation, DislocationError, DislocationMeasure};

/// Iteration cap for the bisection searches.
pub const MAX_BISECTIONS: usize = 200;
/// Default residual tolerance for [`malthusian`].
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
/// Candidate exponents tried when looking for a witness of the moment condition.
pub const MOMENT_GRID: [f64; 10] = [2.0, 1.9, 1.8, 1.7, 1.6, 1.5, 1.4, 1.3, 1.2, 1.1];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("p = {p} is not above the lower index {lower}")]
    BelowLowerIndex { p: f64, lower: f64 },
    #[error("Phi has no root above the lower index (Phi > 0 on the searched interval)")]
    NoMalthusianRoot,
    #[error("(1 + p) Phi'(p) - Phi(p) has no sign change on [{lo}, {hi}]")]
    NoBigginsRoot { lo: f64, hi: f64 },
    #[error("root tolerance {residual} not reached")]
    ToleranceNotReached { residual: f64 },
    #[error(transparent)]
    Dislocation(DislocationError),
}

fn check_index(nu: &dyn DislocationMeasure, p: f64) -> Result<(), ExponentError> {
    let lower = nu.lower_index();
    if p.is_nan() || p <= lower {
        return Err(ExponentError::BelowLowerIndex { p, lower });
    }
    Ok(())
}

fn lift(p: f64, lower: f64) -> impl Fn(DislocationError) -> ExponentError {
    move |e| match e {
        DislocationError::NonIntegrable(_) => ExponentError::BelowLowerIndex { p, lower },
        other => ExponentError::Dislocation(other),
    }
}

pub fn phi(nu: &dyn DislocationMeasure, p: f64) -> Result<f64, ExponentError> {
    check_index(nu, p)?;
    let q = 1.0 + p;
    nu.integrate(&|s| 1.0 - s.iter().map(|x| x.powf(q)).sum::<f64>())
        .map_err(lift(p, nu.lower_index()))
}

/// `Phi'(p) = int sum s_i^(1+p) log(1/s_i) nu(ds)`.
pub fn phi_prime(nu: &dyn DislocationMeasure, p: f64) -> Result<f64, ExponentError> {
    check_index(nu, p)?;
    let q = 1.0 + p;
    nu.integrate(&|s| s.iter().map(|x| -x.powf(q) * x.ln()).sum::<f64>())
        .map_err(lift(p, nu.lower_index()))
}

pub fn tilted_exponent(nu: &dyn DislocationMeasure, p: f64, lambda: f64) -> Result<f64, ExponentError> {
    Ok(phi(nu, lambda + p)? - phi(nu, p)?)
}

fn bisect<F>(mut lo: f64, mut hi: f64, f: F) -> Result<f64, ExponentError>
where
    F: Fn(f64) -> Result<f64, ExponentError>,
{
    // invariant: f(lo) < 0 < f(hi)
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The root `p*` of `Phi`; exactly `0` for conservative measures.
pub fn malthusian(nu: &dyn DislocationMeasure, tol: f64) -> Result<f64, ExponentError> {
    if nu.is_conservative() {
        return Ok(0.0);
    }
    let lower = nu.lower_index();
    if phi(nu, 0.0)? <= 0.0 {
        return Err(ExponentError::NoMalthusianRoot);
    }
    // sign scan towards the lower index
    let mut lo = None;
    let mut gap = -lower;
    for _ in 0..80 {
        gap *= 0.5;
        let p = lower + gap;
        if p <= lower {
            break;
        }
        match phi(nu, p) {
            Ok(v) if v < 0.0 => {
                lo = Some(p);
                break;
            }
            Ok(_) => {}
            Err(ExponentError::BelowLowerIndex { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    let lo = lo.ok_or(ExponentError::NoMalthusianRoot)?;
    let root = bisect(lo, 0.0, |p| phi(nu, p))?;
    let residual = phi(nu, root)?.abs();
    if residual >= tol {
        return Err(ExponentError::ToleranceNotReached { residual });
    }
    Ok(root)
}

/// `(1 + p) Phi'(p) - Phi(p)`.
pub fn biggins_residual(nu: &dyn DislocationMeasure, p: f64) -> Result<f64, ExponentError> {
    Ok((1.0 + p) * phi_prime(nu, p)? - phi(nu, p)?)
}

/// The root `p_bar` of `(1 + p) Phi'(p) = Phi(p)`, searched above `p*`.
pub fn biggins_threshold(nu: &dyn DislocationMeasure, tol: f64) -> Result<f64, ExponentError> {
    let p_star = malthusian(nu, DEFAULT_ROOT_TOL)?;
    // the residual is decreasing; positive at p*, negative for large p
    let lo = p_star;
    if biggins_residual(nu, lo)? <= 0.0 {
        return Err(ExponentError::NoBigginsRoot { lo, hi: lo });
    }
    let mut hi = lo.max(0.0) + 1.0;
    while biggins_residual(nu, hi)? >= 0.0 {
        hi = 2.0 * hi + 1.0;
        if hi > 1e4 {
            return Err(ExponentError::NoBigginsRoot { lo, hi });
        }
    }
    // bisect expects f(lo) < 0 < f(hi), so flip the sign
    let root = bisect(hi, lo, |p| biggins_residual(nu, p))?;
    let residual = biggins_residual(nu, root)?.abs();
    if residual >= tol {
        return Err(ExponentError::ToleranceNotReached { residual });
    }
    Ok(root)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub holds: bool,
    /// Whether the condition constrains this measure at all.
    pub applicable: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// `Phi'(0+) < infinity` when the lower index is 0.
    pub finite_mean: Check,
    /// A Malthusian root exists.
    pub malthusian_root: Check,
    /// `int (sum s_i^(1+p*))^p0 nu(ds) < infinity` for some `p0` in `(1, 2]`.
    pub moment: Check,
    pub p_star: Option<f64>,
    pub p0: Option<f64>,
    pub moment_integral: Option<f64>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.finite_mean.holds && self.malthusian_root.holds && self.moment.holds
    }
}

pub fn assumption_report(nu: &dyn DislocationMeasure) -> AssumptionReport {
    let lower = nu.lower_index();
    let finite_mean = if lower == 0.0 {
        match nu.integrate(&|s| s.iter().map(|x| -x * x.ln()).sum::<f64>()) {
            Ok(v) if v.is_finite() => Check {
                holds: true,
                applicable: true,
                detail: format!("Phi'(0+) = {v}"),
            },
            Ok(v) => Check {
                holds: false,
                applicable: true,
                detail: format!("Phi'(0+) = {v}"),
            },
            Err(e) => Check {
                holds: false,
                applicable: true,
                detail: e.to_string(),
            },
        }
    } else {
        Check {
            holds: true,
            applicable: false,
            detail: format!("lower index {lower} < 0"),
        }
    };

    let conservative = nu.is_conservative();
    let (malthusian_root, p_star) = match malthusian(nu, DEFAULT_ROOT_TOL) {
        Ok(p) => (
            Check {
                holds: true,
                applicable: true,
                detail: format!("p* = {p}"),
            },
            Some(p),
        ),
        Err(e) => (
            Check {
                holds: false,
                applicable: true,
                detail: e.to_string(),
            },
            None,
        ),
    };

    let (moment, p0, moment_integral) = match p_star {
        Some(p_star) => {
            let q = 1.0 + p_star;
            let witness = MOMENT_GRID.iter().find_map(|&p0| {
                nu.integrate(&|s| s.iter().map(|x| x.powf(q)).sum::<f64>().powf(p0))
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(|v| (p0, v))
            });
            match witness {
                Some((p0, v)) => (
                    Check {
                        holds: true,
                        applicable: !conservative,
                        detail: format!("finite with p0 = {p0}"),
                    },
                    Some(p0),
                    Some(v),
                ),
                None => (
                    Check {
                        holds: conservative,
                        applicable: !conservative,
                        detail: "no p0 in (1, 2] gives a finite integral".into(),
                    },
                    None,
                    None,
                ),
            }
        }
        None => (
            Check {
                holds: false,
                applicable: !conservative,
                detail: "requires p*".into(),
            },
            None,
            None,
        ),
    };

    AssumptionReport {
        finite_mean,
        malthusian_root,
        moment,
        p_star,
        p0,
        moment_integral,
    }
}

/// Everything about `Phi` for one fixed measure.
#[derive(Debug, Clone)]
pub struct ExponentContext {
    pub measure: Dislocation,
    pub p_lower: f64,
    pub p_star: f64,
    pub p_bar: f64,
    pub phi_at_zero: f64,
    /// `Phi'(p*)`, the mean jump of the tilted tagged fragment.
    pub phi_prime_at_p_star: f64,
    pub conservative: bool,
    pub assumptions: AssumptionReport,
}

impl ExponentContext {
    pub fn new(measure: Dislocation) -> Result<Self, ExponentError> {
        let assumptions = assumption_report(&measure);
        let p_star = malthusian(&measure, DEFAULT_ROOT_TOL)?;
        let p_bar = biggins_threshold(&measure, 1e-10)?;
        Ok(Self {
            p_lower: measure.lower_index(),
            phi_at_zero: phi(&measure, 0.0)?,
            phi_prime_at_p_star: phi_prime(&measure, p_star)?,
            conservative: measure.is_conservative(),
            p_star,
            p_bar,
            assumptions,
            measure,
        })
    }

    pub fn phi(&self, p: f64) -> Result<f64, ExponentError> {
        phi(&self.measure, p)
    }

    pub fn phi_prime(&self, p: f64) -> Result<f64, ExponentError> {
        phi_prime(&self.measure, p)
    }

    pub fn tilted(&self, p: f64, lambda: f64) -> Result<f64, ExponentError> {
        tilted_exponent(&self.measure, p, lambda)
    }
}
