#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenopt::instances::{generate_mclsp, generate_msmk, generate_stochastic, BaseInstance, Instance, MclspRanges, MsmkRanges, ProblemKind};
use scenopt::seqmodel::{
    episode_loss, forward, from_checkpoint, loss_and_gradient, to_checkpoint, train, Episode, FeatureScaling,
    ForwardMode, SeqModel, TrainConfig, TrainingSample,
};

/// Central differences on every parameter, compared entry by entry.
fn worst_relative_error(model: &SeqModel, ep: &Episode, targets: &[Vec<f64>]) -> (f64, String) {
    let (_, grad) = loss_and_gradient(model, ep, targets).unwrap();
    let names: Vec<String> = grad.tensors().iter().map(|(n, _)| n.clone()).collect();
    let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|(_, m)| m.data.clone()).collect();
    let h = 1e-5;
    let mut worst = (0.0f64, String::new());
    let mut probe = model.clone();
    for (t, name) in names.iter().enumerate() {
        for k in 0..analytic[t].len() {
            let orig = probe.params.tensors_mut()[t].data[k];
            probe.params.tensors_mut()[t].data[k] = orig + h;
            let up = episode_loss(&probe, ep, targets).unwrap();
            probe.params.tensors_mut()[t].data[k] = orig - h;
            let down = episode_loss(&probe, ep, targets).unwrap();
            probe.params.tensors_mut()[t].data[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let g = analytic[t][k];
            let rel = (g - numeric).abs() / g.abs().max(1e-8);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{k}] analytic {g:e} numeric {numeric:e}"));
            }
        }
    }
    worst
}

fn random_targets(rng: &mut ChaCha8Rng, items: usize, nodes: usize) -> Vec<Vec<f64>> {
    (0..items)
        .map(|_| (0..nodes).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect())
        .collect()
}

#[test]
fn gradient_matches_finite_differences_deterministic() {
    let inst = Instance::Mclsp(generate_mclsp(4, 2, 3, &MclspRanges::default()).unwrap());
    let model = SeqModel::new(FeatureScaling::default_for(ProblemKind::Mclsp), 2, 4, 21).unwrap();
    let ep = Episode::new(&model, &inst).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let targets = random_targets(&mut rng, 2, 3);
    let (rel, at) = worst_relative_error(&model, &ep, &targets);
    assert!(rel < 1e-4, "worst relative error {rel:e} at {at}");
}

#[test]
fn gradient_matches_finite_differences_with_bundles() {
    let base = generate_msmk(8, 2, 3, &MsmkRanges::default()).unwrap();
    let inst = Instance::Stochastic(generate_stochastic(BaseInstance::Msmk(base), &[2, 2], 1).unwrap());
    let model = SeqModel::new(FeatureScaling::default_for(ProblemKind::Msmk), 2, 4, 33).unwrap();
    let ep = Episode::new(&model, &inst).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let targets = random_targets(&mut rng, 2, ep.node_count);
    let (rel, at) = worst_relative_error(&model, &ep, &targets);
    assert!(rel < 1e-4, "worst relative error {rel:e} at {at}");
}

fn toy_set(n: u64) -> Vec<TrainingSample> {
    // targets: set up whenever demand is above the midpoint
    (0..n)
        .map(|id| {
            let m = generate_mclsp(id, 2, 4, &MclspRanges::default()).unwrap();
            let targets = m
                .demand
                .iter()
                .map(|row| row.iter().map(|&x| f64::from(u8::from(x > 10.0))).collect())
                .collect();
            TrainingSample {
                id,
                instance: Instance::Mclsp(m),
                targets,
            }
        })
        .collect()
}

#[test]
fn loss_falls_on_a_toy_set() {
    let samples = toy_set(20);
    let cfg = TrainConfig {
        epochs: 50,
        hidden: 8,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let (_, log) = train(&samples, &FeatureScaling::default_for(ProblemKind::Mclsp), &cfg).unwrap();
    assert_eq!(log.epoch_loss.len(), 50);
    assert!(log.epoch_loss[49] < log.epoch_loss[0] * 0.8, "{:?}", log.epoch_loss);
}

#[test]
fn training_is_deterministic_and_checkpoints_round_trip() {
    let samples = toy_set(4);
    let cfg = TrainConfig {
        epochs: 3,
        hidden: 4,
        seed: 9,
        ..TrainConfig::default()
    };
    let scaling = FeatureScaling::default_for(ProblemKind::Mclsp);
    let (a, _) = train(&samples, &scaling, &cfg).unwrap();
    let (b, _) = train(&samples, &scaling, &cfg).unwrap();
    let text = to_checkpoint(&a).unwrap();
    assert_eq!(text, to_checkpoint(&b).unwrap());
    let back = from_checkpoint(&text).unwrap();
    let inst = &samples[0].instance;
    assert_eq!(
        forward(&a, inst, ForwardMode::Stochastic).unwrap(),
        forward(&back, inst, ForwardMode::Stochastic).unwrap()
    );
}

#[test]
fn horizon_is_not_baked_into_the_weights() {
    let model = SeqModel::new(FeatureScaling::default_for(ProblemKind::Mclsp), 2, 6, 2).unwrap();
    let long = Instance::Mclsp(generate_mclsp(1, 2, 15, &MclspRanges::default()).unwrap());
    let pred = forward(&model, &long, ForwardMode::Stochastic).unwrap();
    assert_eq!(pred.scenario_probs[0].len(), 15);
}

#[test]
fn bundles_are_bit_identical_for_random_weights() {
    for seed in 0..5u64 {
        for branching in [vec![2, 2], vec![3, 3]] {
            let model = SeqModel::new(FeatureScaling::default_for(ProblemKind::Msmk), 3, 5, seed).unwrap();
            let base = generate_msmk(seed, 3, 3, &MsmkRanges::default()).unwrap();
            let s = generate_stochastic(BaseInstance::Msmk(base), &branching, seed).unwrap();
            let tree = s.tree.clone();
            let pred = forward(&model, &Instance::Stochastic(s), ForwardMode::Stochastic).unwrap();
            for (t, partition) in tree.all_bundles().iter().enumerate() {
                for b in partition {
                    for &m in &b.members {
                        let same = pred.scenario_probs[m][t]
                            .iter()
                            .zip(&pred.scenario_probs[b.members[0]][t])
                            .all(|(x, y)| x.to_bits() == y.to_bits());
                        assert!(same);
                    }
                }
            }
        }
    }
}
