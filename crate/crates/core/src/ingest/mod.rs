//! On-disk dataset contract: corpus, exported model outputs and activations.

pub mod codec;
pub mod dataset;
pub mod synth;

pub use codec::{read_matrix, read_matrix_file, write_matrix, write_matrix_file, CodecError};
pub use dataset::{
    load_dataset, validate_dataset, Activations, Dataset, IngestError, Instance, Manifest, Split, ValidationReport,
    Violation,
};
pub use synth::{synth_activations, SynthError};
