//! Hermite analysis of activation functions and the kernel dynamics of deep
//! random networks.
//!
//! * [`activations`]: catalog of unit-energy activations.
//! * [`hermite`]: normalized Hermite polynomials and expansions.
//! * [`kernel`]: kernel maps, fixed points, contraction bounds, transforms.
//! * [`dynamics`]: exact kernel sequences and the kernel ODE.
//! * [`mc_sim`]: finite-width Monte-Carlo networks.
//! * [`table`], [`export`]: summaries and file encodings.

pub mod activations;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod hermite;
pub mod kernel;
pub mod mc_sim;
pub mod quadrature;
pub mod table;

pub use activations::{catalog, Activation, ActivationKind};
pub use dynamics::{cobweb, iterate, ode_solve, OdeOptions, Trajectory, TrajectorySource};
pub use error::{Error, Result};
pub use hermite::{expand, he_eval, mehler_product, HermiteExpansion, DEFAULT_TRUNCATION};
pub use kernel::{
    contraction_bound, depth_threshold, find_fixed_point, kernel_oracle, Bound, BoundFunctional, ConvergenceCase,
    DepthThreshold, FixedPointReport, KernelMap, NormalizationMode,
};
pub use mc_sim::{make_input_pair, run, SimConfig, SimResult, WeightDist};
pub use quadrature::GaussianQuadrature;
