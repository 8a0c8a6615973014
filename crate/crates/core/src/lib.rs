pub mod candidates;
pub mod confidence;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod matching;
pub mod mesh;
pub mod model;
pub mod pipeline;
pub mod pointcloud;
pub mod selection;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
