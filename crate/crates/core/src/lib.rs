//! Core of the Rune toolchain: the Runefile front end, the `.rune` container
//! format and boundary codecs, the stage kernels, the RunicOS host virtual
//! machine, and the overhead benchmark.

pub mod bench;
pub mod bundle;
pub mod compile;
pub mod crc32;
pub mod fixtures;
pub mod model;
pub mod pipeline;
pub mod runefile;
pub mod runicos;
pub mod tensor;
