//! Leading coefficients of amplified, shifted sixth-moment integrals of the
//! Riemann zeta function, and the gap inequality they feed.
//!
//! - [`ring`]: truncated series algebra used by the oracle.
//! - [`moment_oracle`]: builds each coefficient from the swap-sum main term.
//! - [`closed_forms`]: the explicit trigonometric formulas and their exact
//!   κ-Taylor expansions.
//! - [`gap_inequality`]: the inequality in (u, v, κ) and its boundary in κ.
//! - [`optimizer`]: grid plus pattern search over (u, v).

pub mod closed_forms;
pub mod error;
pub mod gap_inequality;
pub mod moment_oracle;
pub mod optimizer;
pub mod ring;
pub mod scalar;

pub use closed_forms::{CoefficientLabel, KappaSeries, UPoly};
pub use error::{ClosedFormError, GapError, OracleError, RingError};
pub use gap_inequality::{GapParams, GapVerdict};
pub use moment_oracle::{evaluate_moment, MomentSpec};
pub use optimizer::{optimize, SearchConfig, SearchResult};
pub use ring::{Complex, EpsMask, JetElement, Monomial, Window};
