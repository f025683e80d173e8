use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureScaling;
use super::network::{loss_and_gradient, Episode, Params, SeqModel};
use super::TrainingSample;
use crate::error::{invalid, Error, Result};
use crate::instances::restrict_to_items;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds the weight initialization, the per-epoch sample order and the
    /// item permutations.
    pub seed: u64,
    /// Present every sample under a fresh random item order. Items of one
    /// family are exchangeable, so relabeled instances are equally valid data.
    pub permute_items: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            hidden: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            permute_items: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return invalid("hidden width must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return invalid("Adam needs betas in [0, 1) and a positive epsilon");
        }
        Ok(())
    }
}

pub struct Adam {
    m: Params,
    v: Params,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(params: &Params, cfg: &TrainConfig) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
        }
    }

    pub fn update(&mut self, params: &mut Params, grad: &Params) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let grads = grad.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, (_, g)), m), v) in params.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs) {
            for k in 0..p.data.len() {
                let gk = g.data[k];
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * gk;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * gk * gk;
                let mhat = m.data[k] / c1;
                let vhat = v.data[k] / c2;
                p.data[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epoch_loss: Vec<f64>,
}

/// The sample with its items listed in `perm` order.
fn permuted(model: &SeqModel, sample: &TrainingSample, perm: &[usize]) -> Result<(Episode, Vec<Vec<f64>>)> {
    let instance = restrict_to_items(&sample.instance, perm)?;
    let targets = perm.iter().map(|&j| sample.targets[j].clone()).collect();
    Ok((Episode::new(model, &instance)?, targets))
}

/// Trains a fresh model on `samples`, one Adam step per sample.
pub fn train(samples: &[TrainingSample], scaling: &FeatureScaling, cfg: &TrainConfig) -> Result<(SeqModel, TrainLog)> {
    cfg.validate()?;
    let Some(first) = samples.first() else {
        return invalid("no training samples");
    };
    let model = SeqModel::new(scaling.clone(), first.instance.items(), cfg.hidden, cfg.seed)?;
    train_from(model, samples, cfg)
}

/// Continues training `model` on `samples`.
pub fn train_from(mut model: SeqModel, samples: &[TrainingSample], cfg: &TrainConfig) -> Result<(SeqModel, TrainLog)> {
    cfg.validate()?;
    let episodes = samples
        .iter()
        .map(|s| Episode::new(&model, &s.instance))
        .collect::<Result<Vec<_>>>()?;
    let mut adam = Adam::new(&model.params, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7a11_0de5);
    let mut perm_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e2b_17c3);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainLog::default();
    info!(
        "training {} parameters on {} samples for {} epochs",
        model.params.parameter_count(),
        samples.len(),
        cfg.epochs
    );
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let (value, grad) = if cfg.permute_items && samples[k].instance.items() > 1 {
                let mut perm: Vec<usize> = (0..samples[k].instance.items()).collect();
                perm.shuffle(&mut perm_rng);
                let (ep, targets) = permuted(&model, &samples[k], &perm)?;
                loss_and_gradient(&model, &ep, &targets)?
            } else {
                loss_and_gradient(&model, &episodes[k], &samples[k].targets)?
            };
            if !value.is_finite() || !grad.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss {value} on sample {} in epoch {epoch}",
                    samples[k].id
                )));
            }
            adam.update(&mut model.params, &grad);
            total += value;
        }
        let mean = total / samples.len().max(1) as f64;
        debug!("epoch {epoch}: loss {mean:.6}");
        log.epoch_loss.push(mean);
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_mclsp, Instance, MclspInstance, MclspRanges};
    use crate::seqmodel::features::node_features;

    fn sample(m: MclspInstance) -> TrainingSample {
        let targets = m
            .demand
            .iter()
            .map(|row| row.iter().map(|&x| f64::from(u8::from(x > 10.0))).collect())
            .collect();
        TrainingSample {
            id: 0,
            instance: Instance::Mclsp(m),
            targets,
        }
    }

    #[test]
    fn targets_follow_their_items() {
        let s = sample(generate_mclsp(3, 3, 4, &MclspRanges::default()).unwrap());
        let model = SeqModel::new(FeatureScaling::default_for(s.instance.kind()), 3, 4, 0).unwrap();
        let (ep, targets) = permuted(&model, &s, &[2, 0, 1]).unwrap();
        assert_eq!(targets, vec![s.targets[2].clone(), s.targets[0].clone(), s.targets[1].clone()]);
        let orig = node_features(&s.instance, &model.scaling).unwrap();
        let w = crate::seqmodel::MCLSP_ITEM_FEATURES;
        // the first block of the relabeled input is item 2's block
        assert_eq!(ep.inputs[0][0][..w], orig[0][2 * w..3 * w]);
    }

    #[test]
    fn permuting_identical_items_changes_nothing() {
        let mut m = generate_mclsp(5, 1, 4, &MclspRanges::default()).unwrap();
        for field in [&mut m.demand, &mut m.setup_cost, &mut m.production_cost, &mut m.holding_cost] {
            field.push(field[0].clone());
        }
        m.initial_inventory.push(m.initial_inventory[0]);
        m.items = 2;
        let samples = vec![sample(m)];
        let scaling = FeatureScaling::default_for(samples[0].instance.kind());
        let on = TrainConfig {
            epochs: 3,
            hidden: 4,
            ..TrainConfig::default()
        };
        let off = TrainConfig {
            permute_items: false,
            ..on.clone()
        };
        assert_eq!(train(&samples, &scaling, &on).unwrap().0, train(&samples, &scaling, &off).unwrap().0);
    }
}
