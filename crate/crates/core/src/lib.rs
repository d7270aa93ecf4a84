//! Averaging of near-representations of finite groupoids and of the
//! circle transformation groupoid.
//!
//! The pieces build on each other:
//!
//! - [`groupoid`]: finite groupoids from composition tables, action and pair
//!   groupoids, validation, orbits and restriction.
//! - [`haar`]: normalized left Haar systems and their checks.
//! - [`psrep`]: pseudo-representations on a bundle of inner-product spaces,
//!   with the norms `b` and `c` and the difference cocycle.
//! - [`averaging`]: the averaging operator, its exact identities and the
//!   iteration driver.
//! - [`bounds`]: the scalar sequence lemmas behind fast convergence.
//! - [`circle`]: the same operator on the transformation groupoid of
//!   `θ ↦ kθ` on the circle, discretized on a torus grid.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod averaging;
pub mod bounds;
pub mod circle;
pub mod groupoid;
pub mod haar;
pub mod io;
pub mod linalg;
pub mod psrep;
pub mod sample;
pub mod trace;

pub use averaging::{average, iterate, verify_fundamental_identities, verify_step_estimates};
pub use groupoid::FiniteGroupoid;
pub use haar::{counting_haar, HaarSystem};
pub use psrep::{FiberBundle, Norms, PseudoRep};
pub use trace::{IterationTrace, StopRule, Verdict};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/groupoids.md")]
    pub mod groupoids {}
    #[doc = include_str!("../../../book/src/haar.md")]
    pub mod haar {}
    #[doc = include_str!("../../../book/src/pseudo-representations.md")]
    pub mod pseudo_representations {}
    #[doc = include_str!("../../../book/src/averaging.md")]
    pub mod averaging {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    pub mod bounds {}
    #[doc = include_str!("../../../book/src/circle.md")]
    pub mod circle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
