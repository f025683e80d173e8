use rand::Rng;

use super::linalg::{sigmoid, Mat};

/// Gate order in every weight array: forget, input, candidate cell, output.
pub const GATES: [&str; 4] = ["f", "i", "c", "o"];
const F: usize = 0;
const I: usize = 1;
const C: usize = 2;
const O: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    /// Input weights `W_g`, `hidden x input`.
    pub w: [Mat; 4],
    /// Recurrent weights `U_g`, `hidden x hidden`.
    pub u: [Mat; 4],
    /// Biases `b_g`, `hidden x 1`.
    pub b: [Mat; 4],
}

impl LstmWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| Mat::zeros(hidden, input)),
            u: std::array::from_fn(|_| Mat::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| Mat::zeros(hidden, 1)),
        }
    }

    /// Uniform in `±1/sqrt(hidden)`, forget bias shifted by +1.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w = std::array::from_fn(|_| Mat::uniform(hidden, input, bound, rng));
        let u = std::array::from_fn(|_| Mat::uniform(hidden, hidden, bound, rng));
        let mut b: [Mat; 4] = std::array::from_fn(|_| Mat::uniform(hidden, 1, bound, rng));
        b[F].data.iter_mut().for_each(|v| *v += 1.0);
        Self { w, u, b }
    }

    pub fn input(&self) -> usize {
        self.w[0].cols
    }

    pub fn hidden(&self) -> usize {
        self.w[0].rows
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input(), self.hidden())
    }

    pub(crate) fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat)>) {
        for (k, g) in GATES.iter().enumerate() {
            out.push((format!("{prefix}.W_{g}"), &self.w[k]));
            out.push((format!("{prefix}.U_{g}"), &self.u[k]));
            out.push((format!("{prefix}.b_{g}"), &self.b[k]));
        }
    }

    pub(crate) fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        let Self { w, u, b } = self;
        for ((wk, uk), bk) in w.iter_mut().zip(u.iter_mut()).zip(b.iter_mut()) {
            out.push(wk);
            out.push(uk);
            out.push(bk);
        }
    }
}

/// Everything one step needs for its backward pass.
#[derive(Debug, Clone)]
pub struct LstmStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gate values, in [`GATES`] order.
    pub gates: [Vec<f64>; 4],
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn lstm_step(x: &[f64], h_prev: &[f64], c_prev: &[f64], wts: &LstmWeights) -> LstmStep {
    let hdim = wts.hidden();
    let gates: [Vec<f64>; 4] = std::array::from_fn(|k| {
        let mut z = wts.b[k].data.clone();
        wts.w[k].matvec_add(x, &mut z);
        wts.u[k].matvec_add(h_prev, &mut z);
        if k == C {
            z.iter_mut().for_each(|v| *v = v.tanh());
        } else {
            z.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        z
    });
    let c: Vec<f64> = (0..hdim)
        .map(|r| gates[F][r] * c_prev[r] + gates[I][r] * gates[C][r])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..hdim).map(|r| gates[O][r] * tanh_c[r]).collect();
    LstmStep {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        c,
        tanh_c,
        h,
    }
}

/// One LSTM cell update, returning `(h, c)`.
pub fn lstm_cell(x: &[f64], h_prev: &[f64], c_prev: &[f64], wts: &LstmWeights) -> (Vec<f64>, Vec<f64>) {
    let s = lstm_step(x, h_prev, c_prev, wts);
    (s.h, s.c)
}

/// Gradients flowing out of one step.
pub struct StepGrad {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

/// Backpropagates `dh`, `dc` (total gradients on this step's outputs) and
/// accumulates parameter gradients into `grad`.
pub fn lstm_step_backward(step: &LstmStep, dh: &[f64], dc: &[f64], wts: &LstmWeights, grad: &mut LstmWeights) -> StepGrad {
    let hdim = step.h.len();
    let g = &step.gates;
    let mut dz: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hdim]);
    let mut dc_prev = vec![0.0; hdim];
    for r in 0..hdim {
        let tc = step.tanh_c[r];
        let dct = dc[r] + dh[r] * g[O][r] * (1.0 - tc * tc);
        dz[O][r] = dh[r] * tc * g[O][r] * (1.0 - g[O][r]);
        dz[F][r] = dct * step.c_prev[r] * g[F][r] * (1.0 - g[F][r]);
        dz[I][r] = dct * g[C][r] * g[I][r] * (1.0 - g[I][r]);
        dz[C][r] = dct * g[I][r] * (1.0 - g[C][r] * g[C][r]);
        dc_prev[r] = dct * g[F][r];
    }
    let mut dx = vec![0.0; step.x.len()];
    let mut dh_prev = vec![0.0; hdim];
    for k in 0..4 {
        grad.w[k].outer_add(&dz[k], &step.x);
        grad.u[k].outer_add(&dz[k], &step.h_prev);
        grad.b[k].add_vec(&dz[k]);
        wts.w[k].matvec_t_add(&dz[k], &mut dx);
        wts.u[k].matvec_t_add(&dz[k], &mut dh_prev);
    }
    StepGrad { dx, dh_prev, dc_prev }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_zero_state() {
        let w = LstmWeights::zeros(2, 1);
        let (h, c) = lstm_cell(&[0.0, 0.0], &[0.0], &[0.0], &w);
        assert_eq!((h[0], c[0]), (0.0, 0.0));
    }

    #[test]
    fn zero_weights_unit_cell() {
        // all gates are sigmoid(0) = 0.5 and the candidate is tanh(0) = 0
        let w = LstmWeights::zeros(1, 1);
        let (h, c) = lstm_cell(&[0.0], &[0.0], &[1.0], &w);
        let expect_c = 0.5 * 1.0 + 0.5 * 0.0;
        let expect_h = 0.5 * f64::tanh(expect_c);
        assert_eq!(c[0], expect_c);
        assert!((h[0] - expect_h).abs() < 1e-15);
        assert!((h[0] - 0.231_058_578_630_005).abs() < 1e-12);
    }

    #[test]
    fn gates_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = LstmWeights::init(3, 4, &mut rng);
        let s = lstm_step(&[5.0, -3.0, 0.2], &[0.1, 0.9, -0.4, 0.0], &[2.0, -1.0, 0.0, 0.3], &w);
        for k in [F, I, O] {
            assert!(s.gates[k].iter().all(|&v| v > 0.0 && v < 1.0));
        }
        assert!(s.h.iter().chain(&s.c).all(|v| v.is_finite()));
    }
}
