//! Data-parallel image and tensor kernels for blur-robust detection
//! pipelines: boundary-safe blur, region-aware rotation, transparency-gated
//! feature fusion, a fuzzy-feature pyramid branch, a two-regime dataset
//! augmenter and a serial-vs-parallel benchmark harness.

pub mod augment;
pub mod bench;
pub mod blur;
pub mod drs;
pub mod error;
pub mod io;
pub mod oracle;
pub mod parallel;
pub mod pyramid;
pub mod rotate;
pub mod tensor;

pub use error::{Error, Result};
pub use parallel::Parallelism;
pub use tensor::{Dims, ImageU8, Tensor4D};
