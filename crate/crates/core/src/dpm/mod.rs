//! Slice-sampling MCMC for the Dirichlet-process mixture of Gamma kernels
//! and its inverse-Gamma mirror.

mod chain;
mod draw;
mod prior;
mod sampler;
mod state;

pub use chain::{
    chain_rng, run_chain, run_chain_stream, run_chains, run_engine, ChainOutput, Diagnostics,
    FitOptions, InitPolicy, DRAW_RESIDUAL,
};
pub use draw::{density_grid, mixture_logpdf, GridSummary, MixtureDensity, PosteriorDraw};
pub use prior::{
    base_measure_cdf, base_measure_logpdf, base_measure_sample, z_prior_logpdf, BaseMeasure, Model,
    PriorConfig,
};
pub use sampler::{Sampler, SweepStats, MAX_STICKS};
pub use state::{ChainState, Data};
