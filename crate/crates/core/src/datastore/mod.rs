//! On-disk datasets (PGM frames + CSV index) and model files.

mod dataset;
mod keyvalue;
mod model_file;

pub use dataset::{
    dataset_hash, load_dataset, save_dataset, split, Dataset, DatasetMeta, Sample, INDEX_FILE,
    META_FILE,
};
pub use keyvalue::{parse_key_values, write_key_values};
pub use model_file::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION};

pub use crate::pose::Pose;
