//! Recurrent multistage fusion network for trimodal sequence prediction.
//!
//! Three per-modality hybrid-memory recurrent cells run over word-aligned
//! language/visual/acoustic sequences. At every time step their concatenated
//! outputs pass through a K-stage fusion process (recurrent attention
//! highlighting, LSTM fusion, summarization) whose cross-modal output feeds
//! back into the cells at the next step. The crate includes the small
//! autodiff engine everything trains on, synthetic cross-modal data
//! generation, an Adam training loop, evaluation metrics, ablation variants,
//! and attention-trace capture.

pub mod cells;
pub mod data;
pub mod error;
pub mod metrics;
pub mod mfp;
pub mod model;
pub mod numcore;
pub mod train;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// The three input channels, in their fixed concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Language,
    Visual,
    Acoustic,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Language, Modality::Visual, Modality::Acoustic];

    /// Single-letter tag used in parameter names and trace output.
    pub fn tag(self) -> &'static str {
        match self {
            Modality::Language => "l",
            Modality::Visual => "v",
            Modality::Acoustic => "a",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Modality::Language => 0,
            Modality::Visual => 1,
            Modality::Acoustic => 2,
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}
