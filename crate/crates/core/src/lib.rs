pub mod bart;
pub mod cli;
pub mod dataio;
pub mod diagnostics;
pub mod error;
pub mod estimate;
pub mod matrix;
pub mod pilot;
pub mod posterior;
pub mod rng;
pub mod simlab;
pub mod tree;

pub use bart::{run_bart_binary, run_bart_regression, BartConfig, PosteriorDraws};
pub use error::{Error, Result};
pub use matrix::{ColumnKind, Matrix};
pub use rng::{derive_stream, RngStream};
