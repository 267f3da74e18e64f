//! Multistage fusion: K recursive rounds of attention highlighting and LSTM
//! fusion over the concatenated per-modality outputs, summarized into one
//! cross-modal vector.
//!
//! Per stage: a decoder-style LSTM (fed the previous stage's attention,
//! memory initialized from the concatenated features) emits attention
//! weights; the features are rescaled by those weights and pushed through a
//! fusion LSTM whose memory starts from a fixed unit-norm vector. After K
//! stages every stage output is concatenated and mapped through an
//! affine+tanh layer. Both internal LSTMs restart at every time step; only
//! the cross-modal output persists, through the recurrent cells upstream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cells::{lstm_step, Affine, CellState, LstmParams};
use crate::error::{Error, Result};
use crate::numcore::{Tape, Tensor};

/// Attention-assignment parameters: memory-init map, decoder LSTM, and the
/// projection of its hidden output back onto feature space.
pub struct HighlightParams {
    pub mem_init: Affine,
    pub lstm: LstmParams,
    pub proj: Affine,
}

/// All fusion-process parameters. `highlight` is absent in the ablation that
/// removes attention, in which case every stage fuses the raw features.
pub struct MfpParams {
    pub highlight: Option<HighlightParams>,
    pub fuse: LstmParams,
    pub fuse_init_memory: Tensor,
    pub summarize: Affine,
}

impl MfpParams {
    /// `feature_dim` is the concatenated hidden size of the upstream cells.
    pub fn init(
        feature_dim: usize,
        highlight_dim: usize,
        fuse_dim: usize,
        z_dim: usize,
        stages: usize,
        with_highlight: bool,
        rng: &mut ChaCha8Rng,
    ) -> MfpParams {
        let highlight = with_highlight.then(|| HighlightParams {
            mem_init: Affine::init(highlight_dim, feature_dim, rng),
            lstm: LstmParams::init(feature_dim, highlight_dim, rng),
            proj: Affine::init(feature_dim, highlight_dim, rng),
        });
        MfpParams {
            highlight,
            fuse: LstmParams::init(feature_dim, fuse_dim, rng),
            fuse_init_memory: random_unit_vector(fuse_dim, rng),
            summarize: Affine::init(z_dim, stages * fuse_dim, rng),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.fuse.input_dim
    }

    pub fn fuse_dim(&self) -> usize {
        self.fuse.hidden_dim
    }

    pub fn z_dim(&self) -> usize {
        self.summarize.out_dim()
    }

    /// Stage count implied by the summarize layer's input width.
    pub fn stages(&self) -> usize {
        self.summarize.in_dim() / self.fuse_dim()
    }
}

/// Unit-norm row of a random orthogonal matrix (a normalized Gaussian draw),
/// used as the fixed initial fusion memory.
fn random_unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let mut data: Vec<f64> = (0..dim)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let norm = data.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        data.iter_mut().for_each(|v| *v /= norm);
    } else {
        data[0] = 1.0;
    }
    Tensor::vector(data)
}

/// Per-timestep record of the fusion process, for visualization and export.
/// `attention` is empty when the highlight module is absent.
#[derive(Clone, Debug)]
pub struct MfpTrace {
    pub attention: Vec<Vec<f64>>,
    pub highlighted: Vec<Vec<f64>>,
    pub stage_outputs: Vec<Vec<f64>>,
}

/// Initial decoder state: memory mapped from the concatenated features,
/// hidden output zero.
pub fn highlight_init(
    tape: &Tape,
    params: &HighlightParams,
    h_cat: &Tensor,
) -> Result<CellState> {
    let c = params
        .mem_init
        .apply(tape, h_cat)
        .map_err(|e| e.in_context("highlight memory init"))?;
    Ok(CellState {
        h: Tensor::zeros(params.lstm.hidden_dim),
        c,
    })
}

const ATTENTION_SUM_TOL: f64 = 1e-6;

/// One attention stage: step the decoder LSTM on the previous attention,
/// project its output to feature space, softmax into fresh weights.
pub fn highlight_stage(
    tape: &Tape,
    params: &HighlightParams,
    state: &CellState,
    prev_attention: &Tensor,
    h_cat: &Tensor,
) -> Result<(Tensor, CellState)> {
    let total: f64 = prev_attention.data().iter().sum();
    if (total - 1.0).abs() > ATTENTION_SUM_TOL {
        return Err(Error::Contract(format!(
            "previous attention must sum to 1 (got {total})"
        )));
    }
    if prev_attention.len() != h_cat.len() || params.proj.out_dim() != h_cat.len() {
        return Err(Error::ShapeMismatch {
            op: "highlight_stage",
            lhs: prev_attention.shape(),
            rhs: h_cat.shape(),
        });
    }
    let new_state = lstm_step(tape, &params.lstm, prev_attention, state)
        .map_err(|e| e.in_context("highlight lstm"))?;
    let logits = params
        .proj
        .apply(tape, &new_state.h)
        .map_err(|e| e.in_context("highlight projection"))?;
    let attention = tape.softmax(&logits)?;
    Ok((attention, new_state))
}

/// Rescale the concatenated features by the attention weights.
pub fn apply_highlight(tape: &Tape, h_cat: &Tensor, attention: &Tensor) -> Result<Tensor> {
    tape.hadamard(h_cat, attention)
        .map_err(|e| e.in_context("apply_highlight"))
}

/// One fusion stage: step the fusion LSTM on the highlighted features; the
/// stage output is the step's hidden vector.
pub fn fuse_stage(
    tape: &Tape,
    params: &MfpParams,
    state: &CellState,
    h_tilde: &Tensor,
) -> Result<(Tensor, CellState)> {
    let new_state =
        lstm_step(tape, &params.fuse, h_tilde, state).map_err(|e| e.in_context("fuse lstm"))?;
    Ok((new_state.h.clone(), new_state))
}

/// Map the concatenated stage outputs through affine+tanh into the
/// cross-modal vector.
pub fn summarize(tape: &Tape, params: &MfpParams, stage_outputs: &[Tensor]) -> Result<Tensor> {
    let expected = params.stages();
    if stage_outputs.len() != expected {
        return Err(Error::Contract(format!(
            "summarize expects {expected} stage outputs, got {}",
            stage_outputs.len()
        )));
    }
    let refs: Vec<&Tensor> = stage_outputs.iter().collect();
    let cat = tape.concat(&refs)?;
    let affine = params
        .summarize
        .apply(tape, &cat)
        .map_err(|e| e.in_context("summarize"))?;
    tape.tanh(&affine)
}

/// Run all `stages` fusion stages on one concatenated feature vector.
pub fn run_mfp(
    tape: &Tape,
    params: &MfpParams,
    h_cat: &Tensor,
    stages: usize,
    capture_trace: bool,
) -> Result<(Tensor, Option<MfpTrace>)> {
    if stages < 1 {
        return Err(Error::Config("fusion stage count must be at least 1".into()));
    }
    if stages != params.stages() {
        return Err(Error::Config(format!(
            "fusion parameters were built for {} stages, asked to run {stages}",
            params.stages()
        )));
    }
    let n = params.feature_dim();
    if h_cat.len() != n {
        return Err(Error::ShapeMismatch {
            op: "run_mfp",
            lhs: h_cat.shape(),
            rhs: vec![n],
        });
    }

    let mut trace = capture_trace.then(|| MfpTrace {
        attention: Vec::with_capacity(stages),
        highlighted: Vec::with_capacity(stages),
        stage_outputs: Vec::with_capacity(stages),
    });

    let mut hl_state = match &params.highlight {
        Some(hp) => Some(highlight_init(tape, hp, h_cat)?),
        None => None,
    };
    let mut fuse_state = CellState {
        h: Tensor::zeros(params.fuse_dim()),
        c: params.fuse_init_memory.clone(),
    };
    // No attention exists before stage 1; the neutral sentinel is uniform.
    let mut prev_attention = Tensor::vector(vec![1.0 / n as f64; n]);

    let mut stage_outputs = Vec::with_capacity(stages);
    for _ in 0..stages {
        let h_tilde = if let Some(hp) = &params.highlight {
            let (attention, new_hl) =
                highlight_stage(tape, hp, hl_state.as_ref().unwrap(), &prev_attention, h_cat)?;
            hl_state = Some(new_hl);
            let h_tilde = apply_highlight(tape, h_cat, &attention)?;
            if let Some(tr) = trace.as_mut() {
                tr.attention.push(attention.to_vec());
                tr.highlighted.push(h_tilde.to_vec());
            }
            prev_attention = attention;
            h_tilde
        } else {
            if let Some(tr) = trace.as_mut() {
                tr.highlighted.push(h_cat.to_vec());
            }
            h_cat.clone()
        };

        let (s, new_fuse) = fuse_stage(tape, params, &fuse_state, &h_tilde)?;
        fuse_state = new_fuse;
        if let Some(tr) = trace.as_mut() {
            tr.stage_outputs.push(s.to_vec());
        }
        stage_outputs.push(s);
    }

    let z = summarize(tape, params, &stage_outputs)?;
    Ok((z, trace))
}
