//! Shared plumbing for the workspace: exact rationals on the circle and
//! deterministic data-parallel helpers.
//!
//! With the default `parallel` feature the helpers in [`par`] run on rayon.
//! Without it they fall back to plain sequential loops with the same output.

pub mod par;
pub mod rational;

pub use rational::{
    floor_q, fmt_q, frac, parse_q, q, qz, to_f64, torus_dist, ParseRationalError, Q, Z,
};
