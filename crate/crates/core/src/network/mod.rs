//! The fused network: shared convolutional extractor, one dense branch per
//! training domain, a domain classifier whose softmax output weights the
//! branches, and a linear activity classifier on the fused feature.

mod config;
mod io;
pub mod layers;
mod model;
mod params;

pub use config::ModelConfig;
pub use io::{load_params, load_params_checked, params_from_bytes, params_to_bytes, save_params, PARAMS_MAGIC};
pub use model::{
    backward, branch, domain_weights, extract, forward, fuse, one_hot, stack_windows, ForwardTrace, Fusion, Mode,
    Upstream, WEIGHT_FLOOR,
};
pub(crate) use model::select_rows;
pub use params::ModelParams;
