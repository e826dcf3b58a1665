//! Laboratory for interactive feedback channel coding.
//!
//! The crate is organised by subsystem:
//!
//! * [`channel`]: AWGN uplink/feedback channels and SNR trace generators.
//! * [`codec`]: the round-based session engine with configurable feedback
//!   lag, the convolutional mother code, Viterbi decoding and HARQ with
//!   Chase combining, plus Monte-Carlo PER measurement.
//! * [`neural`]: a small reverse-mode autodiff engine and the attention
//!   based feedback codec built on top of it.
//! * [`training`]: SNR curriculum sampling and end-to-end training.
//! * [`pipeline`]: closed-form and event-driven latency models for
//!   synchronous and asynchronous feedback coding.
//! * [`analysis`]: link budget, coverage and FPGA latency estimates.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and plain iteration otherwise.

// Index loops mirror the math in the numeric kernels.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod channel;
pub mod codec;
pub mod exec;
pub mod neural;
pub mod pipeline;
pub mod training;

pub use channel::SnrDb;
pub use exec::Execution;
