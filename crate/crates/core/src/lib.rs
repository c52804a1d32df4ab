//! Slot machines: networks whose connections each hold `K` fixed random
//! weight options and learn only which option to use.
//!
//! The building blocks are [`tensor::Tensor`], the dense [`kernels`], the
//! option/score storage in [`slot`], the fixed architectures in [`model`],
//! the optimizer in [`optim`], dataset handling in [`data`], the training
//! loop in [`train`] and diagnostics in [`analysis`].

pub mod analysis;
pub mod cli;
pub mod data;
pub mod error;
pub mod kernels;
pub mod model;
pub mod optim;
pub mod slot;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{Arch, Network};
pub use optim::Mode;
pub use slot::{SelectionMask, SlotLayer};
pub use tensor::Tensor;
pub use train::{Checkpoint, TrainConfig, TrainOutcome};
