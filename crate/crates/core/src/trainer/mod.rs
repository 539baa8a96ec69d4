//! Losses, sparse Adam, and the training loop.

mod adam;
mod loss;
mod observer;
mod train;

pub use adam::{adam_update_row, AdamConfig, AdamState};
pub use loss::{bce, bce_grad, loss_self_adv, loss_terms, loss_uniform, sigmoid, LossKind, LossTerms};
pub use observer::{RunWriter, METRICS_HEADER};
pub use train::{
    accumulate_example, l3_penalty, train, EpochRecord, LossChoice, Negatives, TrainConfig, TrainObserver,
    TrainOutput,
};
