//! Test-only helpers: fixture paths, random corpora and questions, and
//! oracles that recompute results from scratch without going through the
//! code under test.

pub mod corpus_gen;
pub mod eval_oracle;
pub mod forum_sim;
pub mod lang_oracle;
pub mod retrieval_oracle;

use std::path::PathBuf;

/// Absolute path of a file in the shared fixtures directory.
pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}
