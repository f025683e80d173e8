use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{node_features, FeatureScaling};
use super::linalg::{axpy, dot, sigmoid, softmax, Mat};
use super::lstm::{lstm_step, lstm_step_backward, LstmStep, LstmWeights};
use super::TrainingSample;
use crate::error::{invalid, Result};
use crate::instances::{Instance, ProblemKind};
use crate::scenario::ScenarioBundle;

const LOG_CLAMP: f64 = 1e-12;
/// Fed-back decisions are the model's own probabilities rounded at this level.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub kind: ProblemKind,
    /// Stage input width.
    pub input: usize,
    pub hidden: usize,
    /// Items per prediction, `d^M`.
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub enc_fwd: LstmWeights,
    pub enc_bwd: LstmWeights,
    /// Decoder LSTM over `[averaged encoder state; previous decisions]`.
    pub dec: LstmWeights,
    /// General attention score matrix, `hidden x 2 hidden`.
    pub w_att: Mat,
    /// Output projection from `[decoder state; context]`, `items x 3 hidden`.
    pub w_out: Mat,
    pub b_out: Mat,
}

impl Params {
    pub fn init(shape: &ModelShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = shape.hidden;
        let bound = 1.0 / (h as f64).sqrt();
        Self {
            enc_fwd: LstmWeights::init(shape.input, h, &mut rng),
            enc_bwd: LstmWeights::init(shape.input, h, &mut rng),
            dec: LstmWeights::init(2 * h + shape.items, h, &mut rng),
            w_att: Mat::uniform(h, 2 * h, bound, &mut rng),
            w_out: Mat::uniform(shape.items, 3 * h, bound, &mut rng),
            b_out: Mat::uniform(shape.items, 1, bound, &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            enc_fwd: self.enc_fwd.zeros_like(),
            enc_bwd: self.enc_bwd.zeros_like(),
            dec: self.dec.zeros_like(),
            w_att: self.w_att.zeros_like(),
            w_out: self.w_out.zeros_like(),
            b_out: self.b_out.zeros_like(),
        }
    }

    /// Named tensors in a fixed order shared with [`Self::tensors_mut`].
    pub fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut out = Vec::new();
        self.enc_fwd.tensors("enc_fwd", &mut out);
        self.enc_bwd.tensors("enc_bwd", &mut out);
        self.dec.tensors("dec", &mut out);
        out.push(("att.W_a".into(), &self.w_att));
        out.push(("out.W".into(), &self.w_out));
        out.push(("out.b".into(), &self.b_out));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut out = Vec::new();
        self.enc_fwd.tensors_mut(&mut out);
        self.enc_bwd.tensors_mut(&mut out);
        self.dec.tensors_mut(&mut out);
        out.push(&mut self.w_att);
        out.push(&mut self.w_out);
        out.push(&mut self.b_out);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.data.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    pub shape: ModelShape,
    pub scaling: FeatureScaling,
    pub params: Params,
}

impl SeqModel {
    pub fn new(scaling: FeatureScaling, items: usize, hidden: usize, seed: u64) -> Result<Self> {
        if items == 0 || hidden == 0 {
            return invalid("model needs at least one item and one hidden unit");
        }
        let shape = ModelShape {
            kind: scaling.kind,
            input: scaling.input_width(items),
            hidden,
            items,
        };
        Ok(Self {
            params: Params::init(&shape, seed),
            shape,
            scaling,
        })
    }

    fn check(&self, instance: &Instance) -> Result<()> {
        if instance.kind() != self.shape.kind || instance.items() != self.shape.items {
            return invalid(format!(
                "model expects {:?} with {} items, got {:?} with {} items",
                self.shape.kind,
                self.shape.items,
                instance.kind(),
                instance.items()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForwardMode {
    /// Every scenario is decoded from its own encoder states.
    Deterministic,
    /// Encoder states are averaged over scenario bundles before decoding.
    #[default]
    Stochastic,
}

/// Network inputs for one instance: the stage sequence of every scenario and
/// the bundle partitions.
#[derive(Debug, Clone)]
pub struct Episode {
    pub inputs: Vec<Vec<Vec<f64>>>,
    /// Node id per `[scenario][stage - 1]`.
    pub paths: Vec<Vec<usize>>,
    pub bundles: Vec<Vec<ScenarioBundle>>,
    pub node_count: usize,
}

impl Episode {
    pub fn new(model: &SeqModel, instance: &Instance) -> Result<Self> {
        model.check(instance)?;
        let view = instance.node_view();
        let feats = node_features(instance, &model.scaling)?;
        let paths: Vec<Vec<usize>> = view.tree.scenario_paths().into_iter().map(|p| p.nodes).collect();
        let inputs = paths
            .iter()
            .map(|p| p.iter().map(|&n| feats[n].clone()).collect())
            .collect();
        Ok(Self {
            inputs,
            paths,
            bundles: view.tree.all_bundles(),
            node_count: view.node_count(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.bundles.len()
    }
}

struct EncoderTrace {
    fwd: Vec<LstmStep>,
    /// Indexed by stage, although computed last to first.
    bwd: Vec<LstmStep>,
    states: Vec<Vec<f64>>,
}

fn encode(params: &Params, seq: &[Vec<f64>]) -> EncoderTrace {
    let h = params.enc_fwd.hidden();
    let t_len = seq.len();
    let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
    let mut fwd = Vec::with_capacity(t_len);
    for z in seq {
        let s = lstm_step(z, &hs, &cs, &params.enc_fwd);
        hs.clone_from(&s.h);
        cs.clone_from(&s.c);
        fwd.push(s);
    }
    let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
    let mut bwd: Vec<LstmStep> = Vec::with_capacity(t_len);
    for z in seq.iter().rev() {
        let s = lstm_step(z, &hs, &cs, &params.enc_bwd);
        hs.clone_from(&s.h);
        cs.clone_from(&s.c);
        bwd.push(s);
    }
    bwd.reverse();
    let states = fwd
        .iter()
        .zip(&bwd)
        .map(|(f, b)| f.h.iter().chain(&b.h).copied().collect())
        .collect();
    EncoderTrace { fwd, bwd, states }
}

/// Encoder states `[forward; backward]` per stage, width `2 hidden`.
pub fn bilstm_encode(params: &Params, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    encode(params, seq).states
}

/// Replaces every scenario's stage-`t` state with the mean over its stage-`t`
/// bundle. The mean is computed once per bundle and copied to each member, so
/// members receive bit-identical states.
pub fn neda_average(states: &[Vec<Vec<f64>>], bundles: &[Vec<ScenarioBundle>]) -> Vec<Vec<Vec<f64>>> {
    let mut out = states.to_vec();
    for (t, partition) in bundles.iter().enumerate() {
        for b in partition {
            let mut mean = vec![0.0; states[b.members[0]][t].len()];
            for &s in &b.members {
                axpy(1.0, &states[s][t], &mut mean);
            }
            let k = b.members.len() as f64;
            mean.iter_mut().for_each(|v| *v /= k);
            for &s in &b.members {
                out[s][t].clone_from(&mean);
            }
        }
    }
    out
}

/// General (bilinear) attention: scores `query^T W_a key`, softmax weights,
/// and the weighted sum of the keys as context.
pub fn attention(query: &[f64], w_att: &Mat, keys: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let (ctx, weights, _) = attend(query, w_att, keys);
    (ctx, weights)
}

fn attend(query: &[f64], w_att: &Mat, keys: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut q = vec![0.0; w_att.cols];
    w_att.matvec_t_add(query, &mut q);
    let scores: Vec<f64> = keys.iter().map(|k| dot(&q, k)).collect();
    let weights = softmax(&scores);
    let mut ctx = vec![0.0; q.len()];
    for (a, k) in weights.iter().zip(keys) {
        axpy(*a, k, &mut ctx);
    }
    (ctx, weights, q)
}

struct DecoderStep {
    lstm: LstmStep,
    q: Vec<f64>,
    alpha: Vec<f64>,
    ctx: Vec<f64>,
    probs: Vec<f64>,
}

/// Decodes one scenario. Stage `t` attends over averaged states `1..=t` only,
/// so predictions never look at stages not yet revealed. `teacher` supplies
/// the previous decisions; otherwise the thresholded own predictions are fed back.
fn decode(params: &Params, ebar: &[Vec<f64>], teacher: Option<&[Vec<f64>]>) -> Vec<DecoderStep> {
    let h = params.dec.hidden();
    let d = params.w_out.rows;
    let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
    let mut prev = vec![0.0; d];
    let mut steps: Vec<DecoderStep> = Vec::with_capacity(ebar.len());
    for t in 0..ebar.len() {
        if t > 0 {
            prev = match teacher {
                Some(tf) => tf[t - 1].clone(),
                None => steps[t - 1]
                    .probs
                    .iter()
                    .map(|&p| if p >= DECISION_THRESHOLD { 1.0 } else { 0.0 })
                    .collect(),
            };
        }
        let u: Vec<f64> = ebar[t].iter().chain(&prev).copied().collect();
        let lstm = lstm_step(&u, &hs, &cs, &params.dec);
        hs.clone_from(&lstm.h);
        cs.clone_from(&lstm.c);
        let (ctx, alpha, q) = attend(&lstm.h, &params.w_att, &ebar[..=t]);
        let joint: Vec<f64> = lstm.h.iter().chain(&ctx).copied().collect();
        let mut logits = params.b_out.data.clone();
        params.w_out.matvec_add(&joint, &mut logits);
        let probs = logits.iter().map(|&z| sigmoid(z)).collect();
        steps.push(DecoderStep {
            lstm,
            q,
            alpha,
            ctx,
            probs,
        });
    }
    steps
}

struct Trace {
    enc: Vec<EncoderTrace>,
    ebar: Vec<Vec<Vec<f64>>>,
    dec: Vec<Vec<DecoderStep>>,
}

fn run(params: &Params, ep: &Episode, mode: ForwardMode, teacher: Option<&[Vec<Vec<f64>>]>) -> Trace {
    let enc: Vec<EncoderTrace> = ep.inputs.iter().map(|seq| encode(params, seq)).collect();
    let states: Vec<Vec<Vec<f64>>> = enc.iter().map(|e| e.states.clone()).collect();
    let ebar = match mode {
        ForwardMode::Stochastic => neda_average(&states, &ep.bundles),
        ForwardMode::Deterministic => states,
    };
    let dec = ebar
        .iter()
        .enumerate()
        .map(|(s, e)| decode(params, e, teacher.map(|tf| tf[s].as_slice())))
        .collect();
    Trace { enc, ebar, dec }
}

/// Probabilities per scenario and per tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `[scenario][stage - 1][item]`.
    pub scenario_probs: Vec<Vec<Vec<f64>>>,
    /// `[item][node]`, read from each node's bundle representative.
    pub node_probs: Vec<Vec<f64>>,
}

fn node_view_of(ep: &Episode, scen: &[Vec<Vec<f64>>], items: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; ep.node_count]; items];
    for (t, partition) in ep.bundles.iter().enumerate() {
        for b in partition {
            for (j, row) in out.iter_mut().enumerate() {
                row[b.node] = scen[b.representative()][t][j];
            }
        }
    }
    out
}

/// Inference pass: previous decisions are the model's own thresholded predictions.
pub fn forward(model: &SeqModel, instance: &Instance, mode: ForwardMode) -> Result<Prediction> {
    let ep = Episode::new(model, instance)?;
    Ok(forward_episode(model, &ep, mode))
}

pub fn forward_episode(model: &SeqModel, ep: &Episode, mode: ForwardMode) -> Prediction {
    let tr = run(&model.params, ep, mode, None);
    let scenario_probs: Vec<Vec<Vec<f64>>> = tr
        .dec
        .iter()
        .map(|steps| steps.iter().map(|s| s.probs.clone()).collect())
        .collect();
    let node_probs = node_view_of(ep, &scenario_probs, model.shape.items);
    Prediction {
        scenario_probs,
        node_probs,
    }
}

fn bce(p: f64, y: f64) -> f64 {
    -(y * p.max(LOG_CLAMP).ln() + (1.0 - y) * (1.0 - p).max(LOG_CLAMP).ln())
}

/// Mean binary cross-entropy over matching `[item][node]` tables, log
/// arguments clamped at `1e-12`. Targets may be soft.
pub fn loss(probs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if probs.len() != targets.len() || probs.iter().zip(targets).any(|(a, b)| a.len() != b.len()) {
        return invalid("probability and target tables differ in shape");
    }
    let n: usize = probs.iter().map(Vec::len).sum();
    if n == 0 {
        return invalid("empty loss");
    }
    let total: f64 = probs
        .iter()
        .flatten()
        .zip(targets.iter().flatten())
        .map(|(&p, &y)| bce(p, y))
        .sum();
    Ok(total / n as f64)
}

fn teacher_inputs(ep: &Episode, targets: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
    ep.paths
        .iter()
        .map(|path| {
            path.iter()
                .map(|&n| targets.iter().map(|row| row[n]).collect())
                .collect()
        })
        .collect()
}

fn check_targets(model: &SeqModel, ep: &Episode, targets: &[Vec<f64>]) -> Result<()> {
    if targets.len() != model.shape.items || targets.iter().any(|r| r.len() != ep.node_count) {
        return invalid(format!(
            "targets must be indexed [{} items][{} nodes]",
            model.shape.items, ep.node_count
        ));
    }
    Ok(())
}

/// Teacher-forced training loss of one sample.
pub fn sample_loss(model: &SeqModel, sample: &TrainingSample) -> Result<f64> {
    let ep = Episode::new(model, &sample.instance)?;
    episode_loss(model, &ep, &sample.targets)
}

pub fn episode_loss(model: &SeqModel, ep: &Episode, targets: &[Vec<f64>]) -> Result<f64> {
    check_targets(model, ep, targets)?;
    let tf = teacher_inputs(ep, targets);
    let tr = run(&model.params, ep, ForwardMode::Stochastic, Some(&tf));
    let scen: Vec<Vec<Vec<f64>>> = tr
        .dec
        .iter()
        .map(|steps| steps.iter().map(|s| s.probs.clone()).collect())
        .collect();
    loss(&node_view_of(ep, &scen, model.shape.items), targets)
}

/// Teacher-forced loss and its exact gradient by backpropagation through time.
pub fn loss_and_gradient(model: &SeqModel, ep: &Episode, targets: &[Vec<f64>]) -> Result<(f64, Params)> {
    check_targets(model, ep, targets)?;
    let p = &model.params;
    let (h, d) = (model.shape.hidden, model.shape.items);
    let t_len = ep.horizon();
    let tf = teacher_inputs(ep, targets);
    let tr = run(p, ep, ForwardMode::Stochastic, Some(&tf));
    let mut grad = p.zeros_like();

    // output gradients at bundle representatives only
    let n = (ep.node_count * d) as f64;
    let mut total = 0.0;
    let mut dlogit = vec![vec![vec![0.0; d]; t_len]; tr.dec.len()];
    for (t, partition) in ep.bundles.iter().enumerate() {
        for b in partition {
            let probs = &tr.dec[b.representative()][t].probs;
            for j in 0..d {
                let y = targets[j][b.node];
                total += bce(probs[j], y);
                dlogit[b.representative()][t][j] = (probs[j] - y) / n;
            }
        }
    }
    let value = total / n;

    // decoder, one scenario at a time; collect gradients on averaged states
    let mut debar: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; 2 * h]; t_len]; tr.dec.len()];
    for (s, steps) in tr.dec.iter().enumerate() {
        if dlogit[s].iter().flatten().all(|&g| g == 0.0) {
            continue;
        }
        let ebar = &tr.ebar[s];
        let de = &mut debar[s];
        let (mut dh_next, mut dc_next) = (vec![0.0; h], vec![0.0; h]);
        for t in (0..t_len).rev() {
            let st = &steps[t];
            let dl = &dlogit[s][t];
            let joint: Vec<f64> = st.lstm.h.iter().chain(&st.ctx).copied().collect();
            grad.w_out.outer_add(dl, &joint);
            grad.b_out.add_vec(dl);
            let mut djoint = vec![0.0; 3 * h];
            p.w_out.matvec_t_add(dl, &mut djoint);
            let (ds_out, dctx) = djoint.split_at(h);
            let mut ds = ds_out.to_vec();
            axpy(1.0, &dh_next, &mut ds);

            let dalpha: Vec<f64> = ebar[..=t].iter().map(|k| dot(dctx, k)).collect();
            let mix = dot(&st.alpha, &dalpha);
            let mut dq = vec![0.0; 2 * h];
            for k in 0..=t {
                axpy(st.alpha[k], dctx, &mut de[k]);
                let dscore = st.alpha[k] * (dalpha[k] - mix);
                axpy(dscore, &ebar[k], &mut dq);
                axpy(dscore, &st.q, &mut de[k]);
            }
            grad.w_att.outer_add(&st.lstm.h, &dq);
            p.w_att.matvec_add(&dq, &mut ds);

            let g = lstm_step_backward(&st.lstm, &ds, &dc_next, &p.dec, &mut grad.dec);
            axpy(1.0, &g.dx[..2 * h], &mut de[t]);
            dh_next = g.dh_prev;
            dc_next = g.dc_prev;
        }
    }

    // the average hands 1/|bundle| of its gradient to every member
    let mut dstates = vec![vec![vec![0.0; 2 * h]; t_len]; tr.dec.len()];
    for (t, partition) in ep.bundles.iter().enumerate() {
        for b in partition {
            let mut sum = vec![0.0; 2 * h];
            for &s in &b.members {
                axpy(1.0, &debar[s][t], &mut sum);
            }
            let share = 1.0 / b.members.len() as f64;
            for &s in &b.members {
                axpy(share, &sum, &mut dstates[s][t]);
            }
        }
    }

    for (s, enc) in tr.enc.iter().enumerate() {
        let ds = &dstates[s];
        if ds.iter().flatten().all(|&g| g == 0.0) {
            continue;
        }
        let (mut dh, mut dc) = (vec![0.0; h], vec![0.0; h]);
        for t in (0..t_len).rev() {
            let mut dht = ds[t][..h].to_vec();
            axpy(1.0, &dh, &mut dht);
            let g = lstm_step_backward(&enc.fwd[t], &dht, &dc, &p.enc_fwd, &mut grad.enc_fwd);
            dh = g.dh_prev;
            dc = g.dc_prev;
        }
        let (mut dh, mut dc) = (vec![0.0; h], vec![0.0; h]);
        for t in 0..t_len {
            let mut dht = ds[t][h..].to_vec();
            axpy(1.0, &dh, &mut dht);
            let g = lstm_step_backward(&enc.bwd[t], &dht, &dc, &p.enc_bwd, &mut grad.enc_bwd);
            dh = g.dh_prev;
            dc = g.dc_prev;
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_mclsp, generate_stochastic, BaseInstance, MclspRanges};

    fn model(items: usize, hidden: usize, seed: u64) -> SeqModel {
        SeqModel::new(FeatureScaling::default_for(ProblemKind::Mclsp), items, hidden, seed).unwrap()
    }

    #[test]
    fn attention_single_key_and_ties() {
        let w = Mat::filled(2, 2, 0.3);
        let (ctx, a) = attention(&[1.0, -2.0], &w, &[vec![0.4, 0.6]]);
        assert_eq!(a, vec![1.0]);
        assert_eq!(ctx, vec![0.4, 0.6]);
        let zero = Mat::zeros(2, 2);
        let (ctx, a) = attention(&[1.0, 2.0], &zero, &[vec![0.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(a, vec![0.5, 0.5]);
        assert_eq!(ctx, vec![1.0, 3.0]);
    }

    #[test]
    fn attention_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = Mat::uniform(3, 4, 1.0, &mut rng);
        let keys: Vec<Vec<f64>> = (0..3).map(|_| Mat::uniform(4, 1, 1.0, &mut rng).data).collect();
        let q = [0.2, -0.7, 1.1];
        let (c1, a1) = attention(&q, &w, &keys);
        let perm = [2, 0, 1];
        let pk: Vec<Vec<f64>> = perm.iter().map(|&i| keys[i].clone()).collect();
        let (c2, a2) = attention(&q, &w, &pk);
        for (k, &i) in perm.iter().enumerate() {
            assert!((a2[k] - a1[i]).abs() < 1e-15);
        }
        for (x, y) in c1.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a1.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn neda_examples() {
        let tree = crate::scenario::build_tree(&[2], 0, 1).unwrap();
        let bundles = tree.all_bundles();
        // stage 1 bundles both scenarios, stage 2 is singletons
        let states = vec![vec![vec![1.0, 3.0], vec![7.0, 7.0]], vec![vec![3.0, 5.0], vec![8.0, 9.0]]];
        let avg = neda_average(&states, &bundles);
        assert_eq!(avg[0][0], vec![2.0, 4.0]);
        assert_eq!(avg[1][0], vec![2.0, 4.0]);
        assert_eq!(avg[0][1], states[0][1]);
        assert_eq!(avg[1][1], states[1][1]);
    }

    #[test]
    fn encoder_reversal_swaps_directions() {
        let m = model(1, 3, 1);
        let mut p = m.params.clone();
        p.enc_bwd = p.enc_fwd.clone();
        let w = m.shape.input;
        let seq: Vec<Vec<f64>> = (0..4).map(|t| (0..w).map(|k| 0.1 * (t * w + k) as f64).collect()).collect();
        let rev: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
        let a = bilstm_encode(&p, &seq);
        let b = bilstm_encode(&p, &rev);
        for t in 0..4 {
            assert_eq!(a[t][..3], b[3 - t][3..]);
            assert_eq!(a[t][3..], b[3 - t][..3]);
        }
        let single = bilstm_encode(&p, &seq[..1]);
        assert_eq!(single[0].len(), 6);
    }

    #[test]
    fn output_shape_and_range() {
        let m = model(3, 5, 2);
        let inst = Instance::Mclsp(generate_mclsp(0, 3, 6, &MclspRanges::default()).unwrap());
        let pred = forward(&m, &inst, ForwardMode::Stochastic).unwrap();
        assert_eq!(pred.scenario_probs.len(), 1);
        assert_eq!(pred.scenario_probs[0].len(), 6);
        assert!(pred.node_probs.iter().all(|r| r.len() == 6));
        assert!(pred.node_probs.iter().flatten().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn width_mismatch_is_invalid() {
        let m = model(3, 5, 2);
        let inst = Instance::Mclsp(generate_mclsp(0, 2, 3, &MclspRanges::default()).unwrap());
        assert!(forward(&m, &inst, ForwardMode::Stochastic).is_err());
    }

    #[test]
    fn bundles_share_predictions() {
        let m = model(2, 4, 7);
        let base = generate_mclsp(1, 2, 3, &MclspRanges::default()).unwrap();
        let s = generate_stochastic(BaseInstance::Mclsp(base), &[2, 2], 3).unwrap();
        let tree = s.tree.clone();
        let pred = forward(&m, &Instance::Stochastic(s), ForwardMode::Stochastic).unwrap();
        for (t, partition) in tree.all_bundles().iter().enumerate() {
            for b in partition {
                let first = &pred.scenario_probs[b.members[0]][t];
                for &s in &b.members {
                    assert_eq!(pred.scenario_probs[s][t], *first);
                }
            }
        }
    }

    #[test]
    fn single_scenario_modes_agree() {
        let m = model(2, 4, 7);
        let inst = Instance::Mclsp(generate_mclsp(5, 2, 4, &MclspRanges::default()).unwrap());
        let a = forward(&m, &inst, ForwardMode::Stochastic).unwrap();
        let b = forward(&m, &inst, ForwardMode::Deterministic).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_examples() {
        assert!(loss(&[vec![1.0, 0.0]], &[vec![1.0, 0.0]]).unwrap() <= 1e-9);
        let half = loss(&[vec![0.5; 4]], &[vec![1.0, 0.0, 1.0, 1.0]]).unwrap();
        assert!((half - std::f64::consts::LN_2).abs() < 1e-15);
        let a = loss(&[vec![0.3, 0.9]], &[vec![1.0, 0.0]]).unwrap();
        let b = loss(&[vec![0.7, 0.1]], &[vec![0.0, 1.0]]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        let mut m = model(2, 3, 4);
        m.params.w_out = m.params.w_out.zeros_like();
        m.params.b_out = m.params.b_out.zeros_like();
        let inst = Instance::Mclsp(generate_mclsp(2, 2, 3, &MclspRanges::default()).unwrap());
        let ep = Episode::new(&m, &inst).unwrap();
        let targets = vec![vec![0.5; 3]; 2];
        let (value, grad) = loss_and_gradient(&m, &ep, &targets).unwrap();
        assert!((value - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(grad.tensors().iter().all(|(_, t)| t.data.iter().all(|&g| g == 0.0)));
    }
}
