//! Gibbs measures μ₁ ∝ e^{−Φ}, μ₂ ∝ e^{−Ψ} and μ = μ₁ ⊗ μ₂.

pub mod gibbs;
pub mod lp;
pub mod quadrature;
pub mod sampling;

pub use gibbs::{normalize, tail_radius, GibbsMeasure, Normalization, ProductMeasure, QuadratureOptions};
pub use lp::{builtin_corpus, check_lp_inequality, derived_constant, LpCase, LpReport};
pub use sampling::{ks_distance, normal_cdf};
