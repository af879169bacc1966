//! Matrix Market files and JSON manifests binding them into a model.

mod manifest;
mod matrix_market;

pub use manifest::{load_model, save_model, ModelManifest};
pub use matrix_market::{parse_matrix_market, read_matrix_market, write_matrix_market};
