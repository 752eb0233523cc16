//! Surrogate generative kernels: a smoothed backoff n-gram text model with
//! temperature / top-k / top-p / repetition-penalty decoding, and a Gaussian
//! mixture plus demographic attribute model for feature populations.

mod ngram;
mod population;
mod sampler;

pub use ngram::{
    fit_ngram, model_perplexity, ContextStats, NGramModel, Vocabulary, BOS, BOS_ID, EOS, EOS_ID,
    UNK, UNK_ID,
};
pub use sampler::{
    candidates, conditional_generate, decode, sample_text, Candidates, SamplerConfig,
    GREEDY_TEMPERATURE,
};
pub use population::{
    age_bin, fit_population_model, sample_population, AttributeModel, GaussianMixture,
    MixtureFitConfig, AGE_BINS, AGE_BIN_WIDTH,
};
