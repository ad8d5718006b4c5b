//! Numerical kernel: normal and chi-square distribution functions,
//! truncated-normal sampling and moments, least squares with
//! leave-one-out identities, and seeded random streams.

mod chisq;
mod normal;
mod ols;
mod rng;
mod truncnorm;

pub use chisq::chi_square_sf;
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
pub use ols::{
    loo_prediction, ols_fit, ols_fit_pruned, spd_inverse, unit_leverage_indices, Matrix, OlsFit,
    RANK_TOL, UNIT_LEVERAGE_TOL,
};
pub use rng::RngStream;
pub use truncnorm::{
    trunc_normal_invert_moment, trunc_normal_moment, trunc_normal_sample, TruncNormalParams,
};
