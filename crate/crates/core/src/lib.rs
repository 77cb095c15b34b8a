//! Stochastic cubic regularized Newton methods for gradient-dominant
//! objectives, with variance-reduced and policy-optimization variants.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] holds the small dense symmetric kernels,
//! * [`oracle`] defines stochastic objectives and synthetic test functions,
//! * [`cubic`] solves the cubic-regularized model sub-problem,
//! * [`optimizers`] runs SCRN, VR-SCRN, CRN and SGD over an oracle,
//! * [`rl`] contains tabular MDPs, softmax policies and the policy-gradient
//!   variants of the above.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cubic;
pub mod linalg;
pub mod optimizers;
pub mod oracle;
pub mod rl;
