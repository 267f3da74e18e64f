//! Recurrent building blocks: a standard LSTM cell and the hybrid-memory
//! variant whose gates take an extra term from the cross-modal vector.
//!
//! Both cells are pure functions of (parameters, inputs, state): each step
//! records onto the caller's tape and returns a fresh state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numcore::{Tape, Tensor};
use crate::Modality;

/// Hidden/memory pair produced by one cell step.
#[derive(Clone, Debug)]
pub struct CellState {
    pub h: Tensor,
    pub c: Tensor,
}

impl CellState {
    pub fn zeros(hidden_dim: usize) -> CellState {
        CellState {
            h: Tensor::zeros(hidden_dim),
            c: Tensor::zeros(hidden_dim),
        }
    }
}

/// Affine map `w*x + b`.
pub struct Affine {
    pub w: Tensor,
    pub b: Tensor,
}

impl Affine {
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Affine {
        Affine {
            w: uniform_matrix(out_dim, in_dim, rng),
            b: Tensor::param_vector(vec![0.0; out_dim]),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn apply(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        let wx = tape.matvec(&self.w, x)?;
        tape.add(&wx, &self.b)
    }
}

/// Weights for one LSTM gate.
pub struct LstmGate {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

/// Weights for one hybrid-memory gate; `v` is the cross-modal term and is
/// absent when the model variant removes the fusion pathway.
pub struct LsthmGate {
    pub w: Tensor,
    pub u: Tensor,
    pub v: Option<Tensor>,
    pub b: Tensor,
}

pub const GATE_NAMES: [&str; 4] = ["input", "forget", "output", "candidate"];

/// Standard LSTM cell parameters (used by the fusion process internally).
pub struct LstmParams {
    pub input: LstmGate,
    pub forget: LstmGate,
    pub output: LstmGate,
    pub candidate: LstmGate,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Per-modality hybrid-memory cell parameters.
pub struct LsthmParams {
    pub modality: Modality,
    pub input: LsthmGate,
    pub forget: LsthmGate,
    pub output: LsthmGate,
    pub candidate: LsthmGate,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub z_dim: Option<usize>,
}

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
fn uniform_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let bound = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::param_matrix(rows, cols, data).expect("generated data matches shape")
}

fn gate_bias(hidden_dim: usize, forget: bool) -> Tensor {
    // Forget-gate bias starts at 1.0 so early training does not erase memory.
    let fill = if forget { 1.0 } else { 0.0 };
    Tensor::param_vector(vec![fill; hidden_dim])
}

impl LstmParams {
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> LstmParams {
        let gate = |forget: bool, rng: &mut ChaCha8Rng| LstmGate {
            w: uniform_matrix(hidden_dim, input_dim, rng),
            u: uniform_matrix(hidden_dim, hidden_dim, rng),
            b: gate_bias(hidden_dim, forget),
        };
        LstmParams {
            input: gate(false, rng),
            forget: gate(true, rng),
            output: gate(false, rng),
            candidate: gate(false, rng),
            input_dim,
            hidden_dim,
        }
    }

    pub fn gates(&self) -> [(&'static str, &LstmGate); 4] {
        [
            ("input", &self.input),
            ("forget", &self.forget),
            ("output", &self.output),
            ("candidate", &self.candidate),
        ]
    }
}

impl LsthmParams {
    pub fn init(
        modality: Modality,
        input_dim: usize,
        hidden_dim: usize,
        z_dim: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> LsthmParams {
        let gate = |forget: bool, rng: &mut ChaCha8Rng| LsthmGate {
            w: uniform_matrix(hidden_dim, input_dim, rng),
            u: uniform_matrix(hidden_dim, hidden_dim, rng),
            v: z_dim.map(|d| uniform_matrix(hidden_dim, d, rng)),
            b: gate_bias(hidden_dim, forget),
        };
        LsthmParams {
            modality,
            input: gate(false, rng),
            forget: gate(true, rng),
            output: gate(false, rng),
            candidate: gate(false, rng),
            input_dim,
            hidden_dim,
            z_dim,
        }
    }

    pub fn gates(&self) -> [(&'static str, &LsthmGate); 4] {
        [
            ("input", &self.input),
            ("forget", &self.forget),
            ("output", &self.output),
            ("candidate", &self.candidate),
        ]
    }
}

fn check_vec_dim(what: &str, t: &Tensor, expect: usize) -> Result<()> {
    if t.rank() != 1 || t.len() != expect {
        return Err(Error::Validation(format!(
            "{what} has shape {:?}, expected [{expect}]",
            t.shape()
        )));
    }
    Ok(())
}

/// Pre-activation `w*x + u*h [+ v*z] + b` for one gate. The summation order
/// is fixed so that a zero `v` contribution reproduces the plain-LSTM value
/// bit for bit.
fn gate_preact(
    tape: &Tape,
    w: &Tensor,
    u: &Tensor,
    v: Option<(&Tensor, &Tensor)>,
    b: &Tensor,
    x: &Tensor,
    h: &Tensor,
    label: &str,
) -> Result<Tensor> {
    let ctx = |e: Error| e.in_context(format!("{label} gate"));
    let wx = tape.matvec(w, x).map_err(ctx)?;
    let uh = tape.matvec(u, h).map_err(ctx)?;
    let mut pre = tape.add(&wx, &uh).map_err(ctx)?;
    if let Some((vm, z)) = v {
        let vz = tape.matvec(vm, z).map_err(ctx)?;
        pre = tape.add(&pre, &vz).map_err(ctx)?;
    }
    tape.add(&pre, b).map_err(ctx)
}

/// One step of the standard LSTM:
/// gates are sigmoid of their pre-activations, the candidate is tanh,
/// `c' = f.c + i.cand`, `h' = o.tanh(c')`.
pub fn lstm_step(
    tape: &Tape,
    params: &LstmParams,
    x: &Tensor,
    state: &CellState,
) -> Result<CellState> {
    check_vec_dim("lstm input", x, params.input_dim)?;
    check_vec_dim("lstm hidden state", &state.h, params.hidden_dim)?;
    check_vec_dim("lstm memory state", &state.c, params.hidden_dim)?;

    let pre = |g: &LstmGate, label: &str| -> Result<Tensor> {
        gate_preact(tape, &g.w, &g.u, None, &g.b, x, &state.h, label)
    };
    let i = tape.sigmoid(&pre(&params.input, "lstm input")?)?;
    let f = tape.sigmoid(&pre(&params.forget, "lstm forget")?)?;
    let o = tape.sigmoid(&pre(&params.output, "lstm output")?)?;
    let cand = tape.tanh(&pre(&params.candidate, "lstm candidate")?)?;

    let c = tape.add(&tape.hadamard(&f, &state.c)?, &tape.hadamard(&i, &cand)?)?;
    let h = tape.hadamard(&o, &tape.tanh(&c)?)?;
    Ok(CellState { h, c })
}

/// One step of the hybrid-memory cell. The gates receive an extra `v*z_prev`
/// term from the previous step's cross-modal vector; the candidate
/// pre-activation stays linear and tanh is applied inside the memory update:
/// `c' = f.c + i.tanh(cand)`, `h' = o.tanh(c')`.
///
/// `z_prev` must be present exactly when the parameters carry `v` matrices.
pub fn lsthm_step(
    tape: &Tape,
    params: &LsthmParams,
    x: &Tensor,
    z_prev: Option<&Tensor>,
    state: &CellState,
) -> Result<CellState> {
    let m = params.modality;
    match (params.z_dim, z_prev) {
        (Some(d), Some(z)) => check_vec_dim(&format!("lsthm[{m}] cross-modal input"), z, d)?,
        (None, None) => {}
        (Some(_), None) => {
            return Err(Error::Contract(format!(
                "lsthm[{m}] has cross-modal weights but no z was supplied"
            )))
        }
        (None, Some(_)) => {
            return Err(Error::Contract(format!(
                "lsthm[{m}] has no cross-modal weights but a z was supplied"
            )))
        }
    }
    check_vec_dim(&format!("lsthm[{m}] input"), x, params.input_dim)?;
    check_vec_dim(&format!("lsthm[{m}] hidden state"), &state.h, params.hidden_dim)?;
    check_vec_dim(&format!("lsthm[{m}] memory state"), &state.c, params.hidden_dim)?;

    let pre = |g: &LsthmGate, gate_name: &str| -> Result<Tensor> {
        let v = g.v.as_ref().zip(z_prev);
        gate_preact(
            tape,
            &g.w,
            &g.u,
            v,
            &g.b,
            x,
            &state.h,
            &format!("lsthm[{m}] {gate_name}"),
        )
    };
    let i = tape.sigmoid(&pre(&params.input, "input")?)?;
    let f = tape.sigmoid(&pre(&params.forget, "forget")?)?;
    let o = tape.sigmoid(&pre(&params.output, "output")?)?;
    let cand = pre(&params.candidate, "candidate")?;

    let c = tape.add(
        &tape.hadamard(&f, &state.c)?,
        &tape.hadamard(&i, &tape.tanh(&cand)?)?,
    )?;
    let h = tape.hadamard(&o, &tape.tanh(&c)?)?;
    Ok(CellState { h, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn zero_lstm(input_dim: usize, hidden_dim: usize) -> LstmParams {
        let p = LstmParams::init(input_dim, hidden_dim, &mut rng(0));
        for (_, g) in p.gates() {
            g.w.update_data(|v| *v = 0.0);
            g.u.update_data(|v| *v = 0.0);
            g.b.update_data(|v| *v = 0.0);
        }
        p.forget.b.update_data(|v| *v = 0.0);
        p
    }

    fn zero_lsthm(input_dim: usize, hidden_dim: usize, z_dim: Option<usize>) -> LsthmParams {
        let p = LsthmParams::init(Modality::Language, input_dim, hidden_dim, z_dim, &mut rng(0));
        for (_, g) in p.gates() {
            g.w.update_data(|v| *v = 0.0);
            g.u.update_data(|v| *v = 0.0);
            g.b.update_data(|v| *v = 0.0);
            if let Some(v) = &g.v {
                v.update_data(|val| *val = 0.0);
            }
        }
        p
    }

    #[test]
    fn zero_params_give_zero_lstm_state() {
        let tape = Tape::new();
        let params = zero_lstm(2, 3);
        let out = lstm_step(
            &tape,
            &params,
            &Tensor::vector(vec![1.5, -0.5]),
            &CellState::zeros(3),
        )
        .unwrap();
        assert_eq!(out.h.to_vec(), vec![0.0; 3]);
        assert_eq!(out.c.to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn zero_params_give_zero_lsthm_state() {
        let tape = Tape::new();
        let params = zero_lsthm(2, 3, Some(2));
        let out = lsthm_step(
            &tape,
            &params,
            &Tensor::vector(vec![1.5, -0.5]),
            Some(&Tensor::vector(vec![0.3, -0.7])),
            &CellState::zeros(3),
        )
        .unwrap();
        assert_eq!(out.h.to_vec(), vec![0.0; 3]);
    }

    // Scalar re-derivation of the five LSTM equations for one hidden unit,
    // independent of the tape.
    fn scalar_lstm(w: [f64; 4], u: [f64; 4], b: [f64; 4], x: f64, h: f64, c: f64) -> (f64, f64) {
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = sig(w[0] * x + u[0] * h + b[0]);
        let f = sig(w[1] * x + u[1] * h + b[1]);
        let o = sig(w[2] * x + u[2] * h + b[2]);
        let cand = (w[3] * x + u[3] * h + b[3]).tanh();
        let c_new = f * c + i * cand;
        (o * c_new.tanh(), c_new)
    }

    #[test]
    fn single_unit_lstm_matches_hand_computation() {
        let tape = Tape::new();
        let params = zero_lstm(1, 1);
        let w = [0.4, -0.3, 0.8, 1.1];
        let u = [0.2, 0.5, -0.6, 0.9];
        let b = [0.1, -0.2, 0.3, 0.05];
        for (k, (_, g)) in params.gates().iter().enumerate() {
            g.w.set(0, w[k]);
            g.u.set(0, u[k]);
            g.b.set(0, b[k]);
        }
        let state = CellState {
            h: Tensor::vector(vec![0.25]),
            c: Tensor::vector(vec![-0.4]),
        };
        let out = lstm_step(&tape, &params, &Tensor::vector(vec![1.0]), &state).unwrap();
        let (h_expect, c_expect) = scalar_lstm(w, u, b, 1.0, 0.25, -0.4);
        assert!((out.h.get(0) - h_expect).abs() < 1e-12);
        assert!((out.c.get(0) - c_expect).abs() < 1e-12);
    }

    // Scalar re-derivation of the hybrid cell with linear candidate and the
    // cross-modal term in every gate.
    fn scalar_lsthm(
        w: [f64; 4],
        u: [f64; 4],
        v: [f64; 4],
        b: [f64; 4],
        x: f64,
        z: f64,
        h: f64,
        c: f64,
    ) -> (f64, f64) {
        let sig = |val: f64| 1.0 / (1.0 + (-val).exp());
        let i = sig(w[0] * x + u[0] * h + v[0] * z + b[0]);
        let f = sig(w[1] * x + u[1] * h + v[1] * z + b[1]);
        let o = sig(w[2] * x + u[2] * h + v[2] * z + b[2]);
        let cand = w[3] * x + u[3] * h + v[3] * z + b[3];
        let c_new = f * c + i * cand.tanh();
        (o * c_new.tanh(), c_new)
    }

    #[test]
    fn single_unit_lsthm_matches_hand_computation() {
        let tape = Tape::new();
        let params = zero_lsthm(1, 1, Some(1));
        let w = [0.4, -0.3, 0.8, 1.1];
        let u = [0.2, 0.5, -0.6, 0.9];
        let v = [0.7, -0.4, 0.15, -0.9];
        let b = [0.1, -0.2, 0.3, 0.05];
        for (k, (_, g)) in params.gates().iter().enumerate() {
            g.w.set(0, w[k]);
            g.u.set(0, u[k]);
            g.v.as_ref().unwrap().set(0, v[k]);
            g.b.set(0, b[k]);
        }
        let state = CellState {
            h: Tensor::vector(vec![0.25]),
            c: Tensor::vector(vec![-0.4]),
        };
        let out = lsthm_step(
            &tape,
            &params,
            &Tensor::vector(vec![1.0]),
            Some(&Tensor::vector(vec![1.0])),
            &state,
        )
        .unwrap();
        let (h_expect, c_expect) = scalar_lsthm(w, u, v, b, 1.0, 1.0, 0.25, -0.4);
        assert!((out.h.get(0) - h_expect).abs() < 1e-12);
        assert!((out.c.get(0) - c_expect).abs() < 1e-12);
    }

    #[test]
    fn lsthm_with_zero_v_equals_lstm_exactly() {
        let mut r = rng(21);
        for _ in 0..100 {
            let lstm = LstmParams::init(3, 4, &mut r);
            let lsthm = zero_lsthm(3, 4, Some(2));
            // Copy the LSTM weights into the hybrid cell, leaving v at zero.
            for ((_, a), (_, b)) in lsthm.gates().iter().zip(lstm.gates().iter()) {
                a.w.set_data(b.w.to_vec()).unwrap();
                a.u.set_data(b.u.to_vec()).unwrap();
                a.b.set_data(b.b.to_vec()).unwrap();
            }
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..2).map(|_| r.random_range(-1.0..1.0)).collect();

            let tape = Tape::new();
            let out_lstm = lstm_step(
                &tape,
                &lstm,
                &Tensor::vector(x.clone()),
                &CellState {
                    h: Tensor::vector(h.clone()),
                    c: Tensor::vector(c.clone()),
                },
            )
            .unwrap();
            let out_lsthm = lsthm_step(
                &tape,
                &lsthm,
                &Tensor::vector(x),
                Some(&Tensor::vector(z)),
                &CellState {
                    h: Tensor::vector(h),
                    c: Tensor::vector(c),
                },
            )
            .unwrap();
            assert_eq!(out_lstm.h.to_vec(), out_lsthm.h.to_vec());
            assert_eq!(out_lstm.c.to_vec(), out_lsthm.c.to_vec());
        }
    }

    #[test]
    fn hidden_output_is_bounded_by_one() {
        let mut r = rng(33);
        for _ in 0..50 {
            let params = LsthmParams::init(Modality::Visual, 3, 5, Some(2), &mut r);
            let scale = r.random_range(0.5..8.0);
            for (_, g) in params.gates() {
                g.w.update_data(|v| *v *= scale);
            }
            let tape = Tape::new();
            let out = lsthm_step(
                &tape,
                &params,
                &Tensor::vector((0..3).map(|_| r.random_range(-5.0..5.0)).collect()),
                Some(&Tensor::vector(
                    (0..2).map(|_| r.random_range(-5.0..5.0)).collect(),
                )),
                &CellState {
                    h: Tensor::vector((0..5).map(|_| r.random_range(-1.0..1.0)).collect()),
                    c: Tensor::vector((0..5).map(|_| r.random_range(-3.0..3.0)).collect()),
                },
            )
            .unwrap();
            assert!(out.h.to_vec().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn dimension_error_names_the_gate_and_modality() {
        let tape = Tape::new();
        let params = LsthmParams::init(Modality::Acoustic, 2, 3, Some(2), &mut rng(5));
        let err = lsthm_step(
            &tape,
            &params,
            &Tensor::vector(vec![1.0, 2.0]),
            None,
            &CellState::zeros(3),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("lsthm[a]"), "{err}");

        // Wrong input length reports which cell rejected it.
        let err2 = lsthm_step(
            &tape,
            &params,
            &Tensor::vector(vec![1.0]),
            Some(&Tensor::vector(vec![0.0, 0.0])),
            &CellState::zeros(3),
        )
        .unwrap_err()
        .to_string();
        assert!(err2.contains("lsthm[a] input"), "{err2}");
    }

    #[test]
    fn cell_gradients_match_finite_differences() {
        let mut r = rng(55);
        let params = LsthmParams::init(Modality::Language, 2, 3, Some(2), &mut r);
        let x = vec![0.3, -0.8];
        let z = vec![0.5, 0.2];
        let h0 = vec![0.1, -0.2, 0.4];
        let c0 = vec![0.0, 0.3, -0.5];

        let forward = || {
            let tape = Tape::new();
            let out = lsthm_step(
                &tape,
                &params,
                &Tensor::vector(x.clone()),
                Some(&Tensor::vector(z.clone())),
                &CellState {
                    h: Tensor::vector(h0.clone()),
                    c: Tensor::vector(c0.clone()),
                },
            )
            .unwrap();
            let loss = tape.sum(&out.h).unwrap();
            (tape, loss)
        };

        let (tape, loss) = forward();
        tape.backward(&loss).unwrap();

        let step = 1e-5;
        for (name, gate) in params.gates() {
            for (label, t) in [
                ("w", &gate.w),
                ("u", &gate.u),
                ("v", gate.v.as_ref().unwrap()),
                ("b", &gate.b),
            ] {
                let analytic = t.grad().unwrap();
                for idx in 0..t.len() {
                    let orig = t.get(idx);
                    t.set(idx, orig + step);
                    let up = forward().1.item().unwrap();
                    t.set(idx, orig - step);
                    let down = forward().1.item().unwrap();
                    t.set(idx, orig);
                    let numeric = (up - down) / (2.0 * step);
                    let denom = analytic[idx].abs().max(numeric.abs()).max(1e-8);
                    assert!(
                        (analytic[idx] - numeric).abs() / denom < 1e-4,
                        "{name}.{label}[{idx}]: {} vs {numeric}",
                        analytic[idx]
                    );
                }
            }
        }
    }
}
