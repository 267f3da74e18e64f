//! Dataset types, word-interval alignment, synthetic generation, and the
//! on-disk record format.

mod align;
mod generator;
mod io;

pub use align::{align_expectation, RawStream, WordInterval};
pub use generator::{gen_synthetic, raw_score, GenTask, GeneratorConfig, Interaction};
pub use io::{load_dataset, save_dataset};

use crate::error::{Error, Result};
use crate::Modality;

/// Target value attached to an example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Real(f64),
    Class(usize),
}

impl Label {
    pub fn as_real(&self) -> Result<f64> {
        match self {
            Label::Real(v) => Ok(*v),
            Label::Class(_) => Err(Error::Validation(
                "expected a continuous label, found a class id".into(),
            )),
        }
    }

    pub fn as_class(&self) -> Result<usize> {
        match self {
            Label::Class(c) => Ok(*c),
            Label::Real(_) => Err(Error::Validation(
                "expected a class id, found a continuous label".into(),
            )),
        }
    }
}

/// Three word-aligned feature sequences plus a label. Each sequence is
/// `T` rows of a fixed per-modality width.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalExample {
    pub id: String,
    pub x_l: Vec<Vec<f64>>,
    pub x_v: Vec<Vec<f64>>,
    pub x_a: Vec<Vec<f64>>,
    pub label: Label,
}

impl MultimodalExample {
    pub fn modality(&self, m: Modality) -> &[Vec<f64>] {
        match m {
            Modality::Language => &self.x_l,
            Modality::Visual => &self.x_v,
            Modality::Acoustic => &self.x_a,
        }
    }

    /// Shared sequence length; errors if the three sequences disagree or are
    /// empty, or if rows within a sequence have uneven widths.
    pub fn seq_len(&self) -> Result<usize> {
        let t = self.x_l.len();
        if t == 0 {
            return Err(Error::Validation(format!(
                "example {} has an empty sequence",
                self.id
            )));
        }
        if self.x_v.len() != t || self.x_a.len() != t {
            return Err(Error::Validation(format!(
                "example {} has misaligned sequence lengths l={} v={} a={}",
                self.id,
                t,
                self.x_v.len(),
                self.x_a.len()
            )));
        }
        for m in Modality::ALL {
            let rows = self.modality(m);
            let d = rows[0].len();
            if rows.iter().any(|r| r.len() != d) {
                return Err(Error::Validation(format!(
                    "example {} has ragged rows in modality {m}",
                    self.id
                )));
            }
        }
        Ok(t)
    }

    /// Per-modality feature widths `(d_l, d_v, d_a)`.
    pub fn dims(&self) -> Result<(usize, usize, usize)> {
        self.seq_len()?;
        Ok((self.x_l[0].len(), self.x_v[0].len(), self.x_a[0].len()))
    }
}
