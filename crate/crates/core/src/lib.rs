//! Edge source coding with preference-aware codebooks.
//!
//! Content items are strings of symbols from an `N`-letter alphabet, each item
//! described by a symbol probability vector (SPV). An edge server keeps `K`
//! prefix codebooks and sends every requested item with the codebook that
//! minimizes its length, plus a short codebook id. Designing the codebooks is a
//! KL-divergence clustering of the SPVs weighted by how often items are
//! requested.

mod cluster;
pub mod codec;
pub mod continuous;
pub mod discrete;
pub mod error;
pub mod formats;
pub mod info;
pub mod model;
pub mod rng;
pub mod single;
pub mod twouser;

pub use error::{Error, Result};
pub use info::{
    best_codebook, code_cost, divergence_objective, entropy, expected_cost, kl_divergence,
    mean_entropy, partition_objective,
};
pub use model::{
    kraft_check, Codebook, CodebookSet, DiscretePreference, ItemSpec, PartitionAssignment, Spv,
};

/// The four-item example used throughout the docs and tests: two pairs of
/// mirrored SPVs on disjoint halves of a 4-letter alphabet.
pub fn demo_spvs() -> Vec<Spv> {
    [
        [0.75, 0.25, 0.0, 0.0],
        [0.25, 0.75, 0.0, 0.0],
        [0.0, 0.0, 0.75, 0.25],
        [0.0, 0.0, 0.25, 0.75],
    ]
    .iter()
    .map(|p| Spv::new(p.to_vec()).expect("valid SPV"))
    .collect()
}

/// [`demo_spvs`] with every item equally likely.
pub fn demo_preference() -> DiscretePreference {
    DiscretePreference::uniform(demo_spvs()).expect("valid preference")
}
