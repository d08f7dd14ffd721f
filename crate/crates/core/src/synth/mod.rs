//! Synthetic bilinear classification tasks and a small Adam trainer for
//! comparing how much each fusion head can express.

mod task;
mod train;

pub use task::{
    class_scores, elementwise_loss_floor, gen_task, Sample, SynthDataset, SynthTaskSpec, TaskKind,
};
pub use train::{
    evaluate, train, Adam, Classifier, EpochStats, Evaluation, TrainConfig, TrainReport, EPOCHS_CSV_HEADER,
};
