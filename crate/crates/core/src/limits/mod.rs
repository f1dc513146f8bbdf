//! Large-N limits: level sets, the Gaussian process `κ_t` and its transform.

pub mod kappa;
pub mod levelset;
pub mod transform;

pub use kappa::{
    kappa_at, kappa_cov, kappa_cov_mixture, kappa_cov_resolvent, kappa_cov_series,
    kappa_parity_parts, kappa_sample, KappaSpec, MixingLaw, TruncationReport,
};
pub use levelset::{
    levelset_clt_check, levelset_cov, levelset_cov_matrix, levelset_direct,
    levelset_representation, CltReport, LevelSetProvenance, LevelSetSample,
};
pub use transform::{
    inversion_check, inversion_residuals, parseval_check, transform_at, transform_cov,
    transform_sample, InversionGrid, ParsevalReport, TransformCov,
};
