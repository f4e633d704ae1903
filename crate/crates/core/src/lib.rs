pub mod ao;
pub mod baselines;
pub mod cli;
pub mod decorrelator;
pub mod error;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod precoder;
pub mod sdp;
pub mod sinr;

pub use error::{Error, Result};
