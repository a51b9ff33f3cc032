//! Stabilizing state-feedback synthesis for uncertain 2D discrete switched
//! Roesser systems with state delays under asynchronous switching.
//!
//! The pipeline:
//!
//! * [`model`] holds the switched system, boundary conditions and the
//!   norm-bounded uncertainty realization.
//! * [`lmi`] assembles the matrix inequalities as affine expressions over
//!   structured decision variables.
//! * [`sdp`] finds strictly feasible points of those inequalities.
//! * [`synthesis`] runs the four-step design procedure and produces a
//!   [`synthesis::SynthesisCertificate`].
//! * [`sim`] propagates the closed loop along diagonal wavefronts, evaluates
//!   the piecewise Lyapunov functional and checks the decay bound.
//!
//! With the default `parallel` feature, independent work (solver restarts,
//! per-mode solves, the cells of one wavefront, randomized property sweeps)
//! is spread over a rayon pool. Without it the same code runs sequentially
//! and produces identical results.

pub mod fixtures;
pub mod lmi;
pub mod model;
pub mod numerics;
pub mod par;
pub mod sdp;
pub mod sim;
pub mod synthesis;

pub use numerics::{Matrix, SymMatrix};
