//! Distribution discrepancies for domain-invariant representation learning.
//!
//! The crate centers on the central moment discrepancy (`CMD_K`), a
//! linear-time distance between bounded samples built from order-wise
//! central moments, alongside Gaussian-kernel MMD and a mean-activation KL
//! baseline. Around the measures sits a small training harness: a
//! feedforward classifier whose hidden layer is regularized toward
//! domain invariance, Adagrad/Adadelta optimizers, reverse
//! cross-validation, and parameter sensitivity sweeps.

pub mod adaptation;
pub mod checkpoint;
pub mod discrepancy;
pub mod error;
pub mod gradcheck;
pub mod network;
pub mod optim;
mod par;
pub mod samples;

pub use discrepancy::{
    central_moments, cmd_k, cmd_k_grad, cmd_term_bound, mkl, mkl_grad, mmd2, mmd2_grad, DiscrepancyKind,
    DiscrepancySpec, DiscrepancyValue,
};
pub use error::{Error, Result};
pub use samples::{Bounds, DomainDataset, LabeledSample, Sample};
