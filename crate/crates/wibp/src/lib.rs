//! Simulator and Monte Carlo verification laboratory for an Indian buffet
//! process with random dish weights.
//!
//! Customers arrive one at a time. Customer n+1 samples a Bernoulli point
//! process: each dish x already on the table is tried with probability
//!
//! ```text
//! (sum_{i<=n} R_i M_i{x} - beta) / (sum_{i<=n} R_i + c)
//! ```
//!
//! and a Poisson(Lambda_n) number of brand-new dishes is drawn, where R_i are
//! the customers' random appetite weights and Lambda_n is a deterministic
//! function of the accumulated weight mass. The crate simulates trajectories,
//! tracks the derived statistics (dish counts L_n, per-customer counts K_n,
//! running means, predictive means and their residuals), and runs seeded
//! Monte Carlo suites that test the model's limit laws: the exact Poisson law
//! of L_n under constant weights, laws of large numbers and central limit
//! theorems for the scaled dish count, and the predictive central limit
//! theorems for the running mean of K_n.

pub mod estimators;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod stats;
