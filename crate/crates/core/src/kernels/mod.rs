//! Random-variate samplers and small dense linear algebra for the Gibbs
//! sampler. Every sampler is a pure function of its arguments and the rng.

mod linalg;
mod rng;
mod truncnorm;
mod wishart;

pub use linalg::{
    bayes_linear_update, factorize_spd, sample_mvn, spd_inverse, standard_normal_vector,
    symmetrize, GaussianPosterior,
};
pub use rng::{chain_seed, splitmix64, RngStreams, StreamRng};
pub use truncnorm::{
    sample_truncated_normal, std_normal_cdf, std_normal_quantile, TruncationBounds, TAIL_CUTOFF,
};
pub use wishart::{sample_inverse_gamma, sample_inverse_wishart};
