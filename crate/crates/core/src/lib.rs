//! Partial-fillup level-compressed (α-LC) tries over binary keys.
//!
//! * [`source`]: seeded memoryless key streams and key-file loading.
//! * [`trie`]: the uncompressed trie, level occupancy and α-fillup levels.
//! * [`lctrie`]: recursive α-level compression, depths and longest-prefix match.
//! * [`analysis`]: exact fill-fraction expectations and asymptotic predictors.
//! * [`montecarlo`]: reproducible experiments joining the two.

pub mod analysis;
pub mod error;
pub mod lctrie;
pub mod montecarlo;
pub mod report;
pub mod source;
pub mod trie;

pub use error::{Error, Result};
