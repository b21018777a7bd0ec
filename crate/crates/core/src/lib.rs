//! Risk-sensitive Markov decision processes under the entropic criterion:
//! averaged and discounted Bellman equations, multiplicative Poisson
//! equations, ergodicity checks and risk-parameter sweeps.

pub mod assumptions;
pub mod avg_bellman;
pub mod corpus;
pub mod disc_bellman;
pub mod entropic;
pub mod gamma_sweep;
pub mod mdp;
pub mod numeric;
pub mod poisson;

pub use assumptions::AssumptionError;
pub use avg_bellman::AvgError;
pub use disc_bellman::DiscError;
pub use entropic::EntropicError;
pub use gamma_sweep::SweepError;
pub use mdp::{load_mdp, DecisionRule, MarkovPolicy, Mdp, ModelError};
pub use poisson::PoissonError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Assumption(#[from] AssumptionError),
    #[error(transparent)]
    Entropic(#[from] EntropicError),
    #[error(transparent)]
    Average(#[from] AvgError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Discounted(#[from] DiscError),
}
