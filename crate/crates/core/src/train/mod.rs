//! Paired datasets, the training loop, checkpoints and volume inference.

mod checkpoint;
mod dataset;
mod infer;
mod patches;
mod trainer;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint,
};
pub use dataset::{
    generate_dataset, generate_frame, load_frame, split_dataset, DatasetIndex, DatasetSpec, FrameEntry, FramePair,
    PhantomFamily, Split, SplitFractions, Splits, INDEX_FILE,
};
pub use infer::{infer_volume, BenchReport, InferenceReport, BENCH_HEADER};
pub use patches::{input_patches, reconstruct_image, training_patches, PatchPair, WsChannel};
pub use trainer::{evaluate_loss, history_csv, train, train_step, EpochEvent, EpochRecord, TrainConfig, TrainOutcome};
