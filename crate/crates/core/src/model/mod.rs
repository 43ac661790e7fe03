//! The sequence editor: a small transformer encoder-decoder over the dual
//! sentence input, its training loop, decoding and checkpoints.

mod batch;
mod checkpoint;
mod config;
mod decode;
mod layers;
mod net;
mod optim;
mod params;
mod scalar;
mod train;

pub use batch::{encode_input, Batch, EncodedInput};
pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, read_checkpoint, save_checkpoint, CheckpointHeader,
    CheckpointMeta, TensorEntry,
};
pub use config::ModelConfig;
pub use decode::{backtranslate_corpus, refine_corpus, translate, DecodeOptions, Decoded, RefineOutput};
pub use layers::{Dropper, Span};
pub use net::{EditorModel, LossStats};
pub use optim::{Adam, InverseSqrt};
pub use params::{ParamId, Params};
pub use scalar::Scalar;
pub use train::{evaluate_nll, make_batches, perplexity, train, EpochLog, TrainOutcome};
mod gradcheck;

pub use gradcheck::{check_gradients, rel_err, GradCheck, NOISE_FLOOR};
