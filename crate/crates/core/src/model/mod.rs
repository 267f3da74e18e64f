//! Full-model assembly: three hybrid-memory cells, the per-timestep fusion
//! process, the final representation, the prediction head, and the ablation
//! variants.

mod checkpoint;
mod registry;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use registry::ParamRegistry;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cells::{lsthm_step, Affine, CellState, LsthmParams};
use crate::data::MultimodalExample;
use crate::error::{Error, Result};
use crate::mfp::{run_mfp, MfpParams, MfpTrace};
use crate::numcore::{dropout_mask, Tape, Tensor};
use crate::Modality;

/// Which parts of the architecture are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Complete model.
    Full,
    /// Cells only: no fusion process, no cross-modal term in any gate, and
    /// the final representation omits the cross-modal vector.
    NoMfp,
    /// Fusion without attention: every stage fuses the raw concatenated
    /// features; the attention LSTM and memory-init map do not exist.
    NoHighlight,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Variant> {
        match s {
            "full" => Ok(Variant::Full),
            "no_mfp" => Ok(Variant::NoMfp),
            "no_highlight" => Ok(Variant::NoHighlight),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoMfp => "no_mfp",
            Variant::NoHighlight => "no_highlight",
        }
    }
}

/// Prediction target type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification { classes: usize },
}

impl Task {
    /// Accepts `regression`, `classification:<c>`.
    pub fn parse(s: &str) -> Result<Task> {
        if s == "regression" {
            return Ok(Task::Regression);
        }
        if let Some(c) = s.strip_prefix("classification:") {
            let classes = c
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad class count '{c}': {e}")))?;
            return Ok(Task::Classification { classes });
        }
        Err(Error::Config(format!("unknown task '{s}'")))
    }

    pub fn name(&self) -> String {
        match self {
            Task::Regression => "regression".into(),
            Task::Classification { classes } => format!("classification:{classes}"),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Task::Regression => 1,
            Task::Classification { classes } => *classes,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_l: usize,
    pub d_v: usize,
    pub d_a: usize,
    pub h_l: usize,
    pub h_v: usize,
    pub h_a: usize,
    /// Attention-LSTM hidden size.
    pub d_hl: usize,
    /// Fusion-LSTM hidden size.
    pub d_f: usize,
    /// Cross-modal vector size.
    pub d_z: usize,
    /// Fusion stage count K.
    pub stages: usize,
    pub variant: Variant,
    pub task: Task,
    /// Dropout rate on the dense head input (never inside recurrences).
    pub dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_l", self.d_l),
            ("d_v", self.d_v),
            ("d_a", self.d_a),
            ("h_l", self.h_l),
            ("h_v", self.h_v),
            ("h_a", self.h_a),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.variant != Variant::NoMfp {
            for (name, v) in [("d_hl", self.d_hl), ("d_f", self.d_f), ("d_z", self.d_z)] {
                if v == 0 {
                    return Err(Error::Config(format!("{name} must be at least 1")));
                }
            }
            if self.stages == 0 {
                return Err(Error::Config("stage count must be at least 1".into()));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if let Task::Classification { classes } = self.task {
            if classes < 2 {
                return Err(Error::Config(format!(
                    "classification needs at least 2 classes, got {classes}"
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self, m: Modality) -> usize {
        match m {
            Modality::Language => self.d_l,
            Modality::Visual => self.d_v,
            Modality::Acoustic => self.d_a,
        }
    }

    pub fn hidden_dim(&self, m: Modality) -> usize {
        match m {
            Modality::Language => self.h_l,
            Modality::Visual => self.h_v,
            Modality::Acoustic => self.h_a,
        }
    }

    /// Concatenated hidden width shared by attention and fusion.
    pub fn feature_dim(&self) -> usize {
        self.h_l + self.h_v + self.h_a
    }

    /// Cross-modal width actually present under the variant.
    pub fn effective_z_dim(&self) -> usize {
        if self.variant == Variant::NoMfp {
            0
        } else {
            self.d_z
        }
    }

    /// Width of the final representation fed to the head.
    pub fn e_dim(&self) -> usize {
        self.feature_dim() + self.effective_z_dim()
    }
}

/// All trainable weights plus the fixed fusion-memory vector.
pub struct ModelParams {
    pub config: ModelConfig,
    pub lsthm: [LsthmParams; 3],
    pub mfp: Option<MfpParams>,
    pub head: Affine,
}

/// Construct the parameters the config's variant calls for, drawing every
/// weight deterministically from the config seed.
pub fn build_variant(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let z_dim = match config.variant {
        Variant::NoMfp => None,
        _ => Some(config.d_z),
    };
    let lsthm = Modality::ALL.map(|m| {
        LsthmParams::init(
            m,
            config.input_dim(m),
            config.hidden_dim(m),
            z_dim,
            &mut rng,
        )
    });
    let mfp = match config.variant {
        Variant::NoMfp => None,
        Variant::Full | Variant::NoHighlight => Some(MfpParams::init(
            config.feature_dim(),
            config.d_hl,
            config.d_f,
            config.d_z,
            config.stages,
            config.variant == Variant::Full,
            &mut rng,
        )),
    };
    let head = Affine::init(config.task.output_dim(), config.e_dim(), &mut rng);
    Ok(ModelParams {
        config: config.clone(),
        lsthm,
        mfp,
        head,
    })
}

impl ModelParams {
    /// Deterministically ordered registry of every trainable tensor.
    pub fn registry(&self) -> Result<ParamRegistry> {
        let mut reg = ParamRegistry::new();
        for params in &self.lsthm {
            let m = params.modality.tag();
            for (gate_name, gate) in params.gates() {
                reg.register(format!("lsthm.{m}.{gate_name}.w"), &gate.w)?;
                reg.register(format!("lsthm.{m}.{gate_name}.u"), &gate.u)?;
                if let Some(v) = &gate.v {
                    reg.register(format!("lsthm.{m}.{gate_name}.v"), v)?;
                }
                reg.register(format!("lsthm.{m}.{gate_name}.b"), &gate.b)?;
            }
        }
        if let Some(mfp) = &self.mfp {
            if let Some(hp) = &mfp.highlight {
                reg.register("mfp.mem_init.w", &hp.mem_init.w)?;
                reg.register("mfp.mem_init.b", &hp.mem_init.b)?;
                for (gate_name, gate) in hp.lstm.gates() {
                    reg.register(format!("mfp.highlight.{gate_name}.w"), &gate.w)?;
                    reg.register(format!("mfp.highlight.{gate_name}.u"), &gate.u)?;
                    reg.register(format!("mfp.highlight.{gate_name}.b"), &gate.b)?;
                }
                reg.register("mfp.proj.w", &hp.proj.w)?;
                reg.register("mfp.proj.b", &hp.proj.b)?;
            }
            for (gate_name, gate) in mfp.fuse.gates() {
                reg.register(format!("mfp.fuse.{gate_name}.w"), &gate.w)?;
                reg.register(format!("mfp.fuse.{gate_name}.u"), &gate.u)?;
                reg.register(format!("mfp.fuse.{gate_name}.b"), &gate.b)?;
            }
            reg.register("mfp.summarize.w", &mfp.summarize.w)?;
            reg.register("mfp.summarize.b", &mfp.summarize.b)?;
        }
        reg.register("head.w", &self.head.w)?;
        reg.register("head.b", &self.head.b)?;
        Ok(reg)
    }
}

/// Train mode needs a random source for the head-input dropout mask; eval
/// mode bypasses masking entirely.
pub enum Mode<'a> {
    Train(&'a mut ChaCha8Rng),
    Eval,
}

pub struct ForwardOutput {
    pub prediction: Tensor,
    /// Final representation: concatenated last hidden states plus (when the
    /// fusion process exists) the last cross-modal vector.
    pub representation: Tensor,
    pub final_hidden: Vec<Tensor>,
    pub final_z: Option<Tensor>,
    /// One fusion trace per time step when requested (and the variant has a
    /// fusion process).
    pub traces: Option<Vec<MfpTrace>>,
}

impl ModelParams {
    pub fn forward(
        &self,
        tape: &Tape,
        example: &MultimodalExample,
        mode: Mode<'_>,
        capture_trace: bool,
    ) -> Result<ForwardOutput> {
        let seq_len = example.seq_len()?;
        let (d_l, d_v, d_a) = example.dims()?;
        let cfg = &self.config;
        if (d_l, d_v, d_a) != (cfg.d_l, cfg.d_v, cfg.d_a) {
            return Err(Error::Validation(format!(
                "example {} has widths ({d_l},{d_v},{d_a}) but the model expects ({},{},{})",
                example.id, cfg.d_l, cfg.d_v, cfg.d_a
            )));
        }

        let mut states: Vec<CellState> = Modality::ALL
            .iter()
            .map(|&m| CellState::zeros(cfg.hidden_dim(m)))
            .collect();
        let mut z_prev = self.mfp.as_ref().map(|_| Tensor::zeros(cfg.d_z));
        let mut traces = capture_trace.then(Vec::new);

        for t in 0..seq_len {
            for (mi, m) in Modality::ALL.iter().enumerate() {
                let x_t = Tensor::vector(example.modality(*m)[t].clone());
                states[mi] = lsthm_step(tape, &self.lsthm[mi], &x_t, z_prev.as_ref(), &states[mi])?;
            }
            if let Some(mfp) = &self.mfp {
                let h_cat = tape.concat(&[&states[0].h, &states[1].h, &states[2].h])?;
                let (z, trace) = run_mfp(tape, mfp, &h_cat, cfg.stages, capture_trace)?;
                z_prev = Some(z);
                if let (Some(all), Some(tr)) = (traces.as_mut(), trace) {
                    all.push(tr);
                }
            }
        }

        let hidden: Vec<&Tensor> = states.iter().map(|s| &s.h).collect();
        let representation = match &z_prev {
            Some(z) => tape.concat(&[hidden[0], hidden[1], hidden[2], z])?,
            None => tape.concat(&[hidden[0], hidden[1], hidden[2]])?,
        };

        let head_input = match mode {
            Mode::Train(rng) if cfg.dropout > 0.0 => {
                let mask = dropout_mask(cfg.e_dim(), cfg.dropout, rng)?;
                tape.hadamard(&representation, &mask)?
            }
            _ => representation.clone(),
        };
        let prediction = self.head.apply(tape, &head_input)?;
        if !prediction.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite prediction on example {}",
                example.id
            )));
        }

        Ok(ForwardOutput {
            prediction,
            representation,
            final_hidden: states.iter().map(|s| s.h.clone()).collect(),
            final_z: z_prev,
            traces,
        })
    }
}
