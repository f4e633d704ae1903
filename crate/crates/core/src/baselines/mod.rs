//! Comparison schemes that design transceivers from the estimates as if they
//! were exact.

mod ia;
mod iterative;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{CsiView, SystemDims, TransceiverSet};

pub use ia::ia3_closed_form;
pub use iterative::{forward_max_sinr_filters, max_sinr_baseline, min_leakage_baseline, total_leakage};

/// Default number of forward/reverse sweeps for the iterative schemes.
pub const DEFAULT_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(alias = "ia3")]
    IA3,
    #[serde(alias = "max_sinr", alias = "max-sinr")]
    MaxSinr,
    #[serde(alias = "min_leakage", alias = "min-leakage")]
    MinLeakage,
}

impl BaselineKind {
    pub fn run(self, csi: &CsiView, dims: &SystemDims, sweeps: usize) -> Result<TransceiverSet> {
        match self {
            BaselineKind::IA3 => ia3_closed_form(csi, dims),
            BaselineKind::MaxSinr => max_sinr_baseline(csi, dims, sweeps),
            BaselineKind::MinLeakage => min_leakage_baseline(csi, dims, sweeps),
        }
    }
}

/// `√(P_k / L_k)`, the per-stream amplitude under an equal power split.
fn stream_amplitude(dims: &SystemDims, k: usize) -> f64 {
    (dims.power[k] / dims.streams[k] as f64).sqrt()
}
