//! Fractional parts of coupled random sums.
//!
//! The object of study is the vector of fractional parts
//! `{R^{i,y_i}}` of weighted partial sums
//! `R^{i,y} = phi((Y_1 + … + Y_{β_M^{q+1}} + x)/M) · (Y_1 + … + Y_{β_M^i} + y)`
//! together with the fluctuation statistic `K_M = √M (plug-in − θ)`.
//! As `M` grows the fractional parts become jointly uniform on `[0,1]^q`,
//! independent of `K_M`, which is asymptotically `N(0, σ_T²)`. This crate
//! simulates the vector, computes every limit object in closed form, and
//! ships the statistical tests that compare the two.
//!
//! Start with the examples:
//!
//! ```text
//! examples/
//!   uniformity.rs             fractional parts against Uniform[0,1]^q
//!   joint_limit.rs            joint grid test + Weyl sums + K_M normality
//!   delta_variance.rs         Var(K_M) against the delta-method σ_T²
//!   standardized_gaussian.rs  standardized increments against N(0, Γ)
//!   tv_clt.rs                 total-variation distance shrinking in M
//!   density_sweep.rs          transformed density against its Gaussian limit
//!   benford_products.rs       mantissa laws, fixed and data-adapted base
//!   resampling_variance.rs    stratified resampling variance decomposition
//!   integrability.rs          the moment condition behind the TV theorem
//! ```
//!
//! The same experiments are reachable from the `modone` binary; see the
//! crate README for the command set.

// Validation sites use `!(x > 0.0)`-style comparisons on purpose: the
// negation rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benford;
pub mod density;
pub mod error;
pub mod experiment;
pub mod frac;
pub mod limit;
pub mod model;
pub mod quad;
pub mod report;
pub mod resampling;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
