//! Numerical kernel: dense SPD linear algebra, multivariate normal draws,
//! and (non-central) t distribution functions.

pub mod dist;
pub mod matrix;
pub mod mvn;
pub mod rng;
pub mod special;

pub use dist::{noncentral_t_cdf, noncentral_t_sf, t_cdf, t_pdf, t_quantile, t_sf, MAX_NCP};
pub use matrix::{
    cholesky, cholesky_inverse, cholesky_solve, equilibrated_rcond, solve_spd, spd_inverse, Matrix,
};
pub use mvn::{mvn_sample, MvnSampler};
pub use rng::RngStream;
