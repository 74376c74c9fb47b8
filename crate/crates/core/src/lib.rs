//! Stopping lines of homogeneous fragmentations and their empirical measures.
//!
//! A dislocation measure `nu` drives a fragmentation of the unit mass. The
//! crate computes the exponent `Phi` and its distinguished roots, simulates
//! the line of first fragments smaller than `eta`, follows the tagged
//! fragment, and checks that `sum_j X_j^(1+p*) f(X_j / eta)` approaches
//! `<rho, f>` times the terminal value of the additive martingale.
//!
//! ```
//! use fragline::dislocation::{catalog, Dislocation};
//! use fragline::exponent::ExponentContext;
//!
//! let ctx = ExponentContext::new(Dislocation::Discrete(catalog::half_quarter())).unwrap();
//! assert!((ctx.p_star + 0.3057580863693827).abs() < 1e-10);
//! ```

pub mod dislocation;
pub mod exponent;
pub mod fragsim;
pub mod masspart;
pub mod quadrature;
pub mod rng;
pub mod slln;
pub mod stats;
pub mod tagged;
pub mod testfn;

pub use dislocation::{Dislocation, DislocationMeasure, FiniteDislocation};
pub use exponent::ExponentContext;
pub use fragsim::StoppingLine;
pub use masspart::MassPartition;
pub use testfn::TestFunction;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/exponent.md")]
mod book_exponent {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/stopping-lines.md")]
mod book_stopping_lines {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/tagged.md")]
mod book_tagged {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/slln.md")]
mod book_slln {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/self-similar.md")]
mod book_self_similar {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/reproducibility.md")]
mod book_reproducibility {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
