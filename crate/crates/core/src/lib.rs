//! Tabular off-policy evaluation.
//!
//! Datasets are generated from explicit finite-horizon MDPs and fed to three
//! families of estimators: importance-weighting ([`ips`]), direct regression
//! or model fitting ([`direct`]), and hybrids that correct a direct method's
//! `Q̂` with importance weights ([`hybrid`]). The [`harness`] module runs
//! seeded experiment grids and aggregates relative MSE.

pub mod data;
pub mod direct;
pub mod env;
pub mod error;
pub mod harness;
pub mod hybrid;
pub mod ips;
pub mod mdp;
pub mod policy;
pub mod qtable;
pub mod rng;
pub mod weights;

pub use data::{generate_dataset, Dataset, DatasetMetadata, Trajectory};
pub use direct::{DirectConfig, QFit};
pub use error::{OpeError, Result, Status};
pub use hybrid::magic::MagicConfig;
pub use ips::{ips_estimate, IpsVariant};
pub use mdp::{MdpTables, MonteCarloValue, RewardNoise, TabularMdp};
pub use policy::{estimate_behavior_policy, TabularPolicy};
pub use qtable::{OmegaTable, QTable};
pub use weights::{cumulative_rho, EvalContext, RhoTable};
