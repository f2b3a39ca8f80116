//! Image-to-video retrieval: a local channel over product-quantized keypoint
//! descriptors with Hough geometric verification, a global channel over binarized
//! Fisher vectors, and late fusion of the two ranked lists.

pub mod bits;
pub mod config;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod global_index;
pub mod global_query;
mod io;
pub mod local_index;
pub mod local_query;
pub mod matrix;
pub mod pipeline;
pub mod quantize;
pub mod ranked;
pub mod synth;

pub use config::EngineConfig;
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport, GroundTruth};
pub use fusion::{fuse, FusionConfig};
pub use global_index::GlobalIndex;
pub use local_index::LocalIndex;
pub use quantize::CodebookSet;
pub use ranked::{Channel, RankedList, RunFile};
