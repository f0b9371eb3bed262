//! Numeric kernels shared by the simulator and the verification suites:
//! double-double log-gamma, normal and Kolmogorov distribution functions,
//! Poisson sampling, counter-based random streams, and compensated sums.

pub mod dd;
pub mod gamma;
pub mod kahan;
pub mod kolmogorov;
pub mod normal;
pub mod poisson;
pub mod rng;

pub use dd::{ln_dd, Dd};
pub use gamma::{gamma_q, h_of, log_gamma, log_gamma_dd, log_gamma_dd_z};
pub use kahan::KahanSum;
pub use kolmogorov::kolmogorov_q;
pub use normal::{erf, erfc, normal_cdf, normal_quantile};
pub use poisson::{poisson_pmf, poisson_sample};
pub use rng::RngStream;
