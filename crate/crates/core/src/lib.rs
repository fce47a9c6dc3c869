//! Max-min fair relay precoding for the multi-pair two-way amplify-and-forward
//! relay channel.
//!
//! `M` user pairs exchange data through a relay with `N_R` antennas. The relay
//! applies a linear precoder `Ω` to its received signal under a sum-power
//! budget, and the goal is to maximize the worst user SINR. The crate provides:
//!
//! - [`channel`]: reproducible correlated Rayleigh channel draws,
//! - [`sinr`]: the quadratic-form representation of all SINRs and the relay power,
//! - [`bound`]: the closed-form minimax eigenvalue upper bound on the balanced SINR,
//! - [`lm`]: a modified Levenberg-Marquardt solver for the SINR-target equations,
//! - [`balance`]: bisection over SINR targets driving the solver,
//! - [`bench`]: the Monte-Carlo sweep harness and CSV output used by the CLI.

pub mod balance;
pub mod bench;
pub mod bound;
pub mod channel;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod lm;
pub mod sinr;

pub use balance::{balance, delta_scale, min_rate, BisectionConfig, SolveReport};
pub use bound::{max_generalized_eig, upper_bound, whiten, BoundResult, WhitenedProblem};
pub use channel::{correlation_matrix, generate_channels, psd_sqrt, ChannelSet, SystemConfig};
pub use error::{Error, Result};
pub use lm::{solve_at_gamma, LmConfig, LmState, RealifiedSystem};
pub use sinr::{build_quadratic_problem, relay_power, sinr_direct, sinr_quadratic, unvec, QuadraticProblem};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
/// Dense real vector.
pub type RVector = nalgebra::DVector<f64>;
