//! Moment bounds, tail bounds and light-cone extracts.

mod moments;
mod powerlaw;
mod tails;

pub use moments::{
    brownian_moment_bound, default_beta, g_of_eta, ln_simplex_integral, markov_grid_search, markov_tail,
    static_moment_bound, BetaSchedule, MarkovTail, MomentBound, MomentBoundParams, PathWeights,
};
pub use powerlaw::{
    alpha_regime, light_cone_exponent, n_star, powerlaw_constants, AlphaRegime, PowerLawCase, PowerLawConstants,
};
pub use tails::{
    branch_values, epsilon_of_delta, k_local_scrambling_time, ln_moment_bound, nn_spectral_simplified, printed_p_star,
    tail_probability, velocity, BoundQuantity, Branch, BranchValues, Discretization, TailBound, TailParams,
    TailProbability, TailSystem, VelocityEstimate, VelocityKind,
};
