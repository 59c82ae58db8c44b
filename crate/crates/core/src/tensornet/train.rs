use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Matrix, NetError, Network};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    CrossEntropy,
    MeanSquaredError,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Coefficient of `Σ|w|`, divided by the batch size.
    pub l1: f64,
    /// Coefficient of `Σw²`, divided by the batch size.
    pub l2: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Rows per update; `None` trains on the full set each step.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub loss: Loss,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.03,
            optimizer: Optimizer::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            l1: 1.0,
            l2: 1.0,
            patience: 3,
            max_epochs: 500,
            batch_size: None,
            seed: 0,
            loss: Loss::CrossEntropy,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::Config(m.to_string()));
        // a zero step size is accepted: it turns training into evaluation
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.patience < 1 {
            return bad("patience must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.batch_size == Some(0) || self.max_epochs < 1 {
            return bad("batch_size and max_epochs must be at least 1");
        }
        if !(self.l1 >= 0.0 && self.l2 >= 0.0) {
            return bad("regularization coefficients must be non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1)
            || !(0.0..1.0).contains(&self.adam_beta2)
            || self.adam_epsilon <= 0.0
        {
            return bad("invalid Adam constants");
        }
        Ok(())
    }

    /// Which validation metric drives early stopping for this loss.
    pub fn score_kind(&self) -> ScoreKind {
        match self.loss {
            Loss::CrossEntropy => ScoreKind::Accuracy,
            Loss::MeanSquaredError => ScoreKind::MeanSquaredError,
        }
    }
}

/// Paired input and target vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Samples {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self, NetError> {
        if inputs.len() != targets.len() {
            return Err(NetError::Dimension(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Samples { inputs, targets })
    }

    /// Inputs paired with one-hot targets over `n_classes`.
    pub fn one_hot(inputs: Vec<Vec<f64>>, classes: &[usize], n_classes: usize) -> Result<Self, NetError> {
        let targets = classes
            .iter()
            .map(|&c| {
                let mut t = vec![0.0; n_classes];
                t[c] = 1.0;
                t
            })
            .collect();
        Samples::new(inputs, targets)
    }

    /// Autoencoder samples: every input is its own target.
    pub fn reconstruction(inputs: Vec<Vec<f64>>) -> Self {
        Samples {
            targets: inputs.clone(),
            inputs,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Samples {
        Samples {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }

    pub(crate) fn check(&self, net: &Network) -> Result<(), NetError> {
        if self.is_empty() {
            return Err(NetError::EmptyDataset);
        }
        let (d_in, d_out) = (net.input_dim(), net.output_dim());
        if let Some(x) = self.inputs.iter().find(|x| x.len() != d_in) {
            return Err(NetError::Dimension(format!(
                "sample has {} inputs, network expects {d_in}",
                x.len()
            )));
        }
        if let Some(t) = self.targets.iter().find(|t| t.len() != d_out) {
            return Err(NetError::Dimension(format!(
                "target has {} values, network has {d_out} outputs",
                t.len()
            )));
        }
        Ok(())
    }
}

/// Validation metric used for early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Higher is better.
    Accuracy,
    /// Lower is better.
    MeanSquaredError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Training objective (data loss plus scaled penalty) after each epoch.
    pub train_loss_history: Vec<f64>,
    pub validation_score_history: Vec<f64>,
    /// Validation data loss after each epoch; breaks accuracy ties.
    pub validation_loss_history: Vec<f64>,
    pub score: ScoreKind,
    pub stopped_early: bool,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
}

/// Per-layer parameter gradients.
#[derive(Debug, Clone)]
pub(crate) struct Gradients {
    pub weights: Vec<Matrix<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers()
                .iter()
                .map(|l| Matrix::filled(l.out_units(), l.in_units(), 0.0))
                .collect(),
            biases: net.layers().iter().map(|l| vec![0.0; l.out_units()]).collect(),
        }
    }
}

fn forward_with_pre(net: &Network, input: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut zs = Vec::with_capacity(net.layers().len());
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let x = acts.last().map_or(input, |a| a.as_slice());
        let z = layer.pre_activation(x);
        let mut a = vec![0.0; z.len()];
        layer.activation.apply(&z, &mut a);
        zs.push(z);
        acts.push(a);
    }
    (zs, acts)
}

pub(crate) fn sample_loss(
    loss: Loss,
    activation: Activation,
    z: &[f64],
    a: &[f64],
    target: &[f64],
) -> f64 {
    match loss {
        Loss::MeanSquaredError => {
            a.iter()
                .zip(target)
                .map(|(a, y)| (a - y) * (a - y))
                .sum::<f64>()
                / a.len() as f64
        }
        Loss::CrossEntropy if activation == Activation::Softmax => {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            target
                .iter()
                .zip(z)
                .filter(|(y, _)| **y != 0.0)
                .map(|(y, z)| -y * (z - lse))
                .sum()
        }
        Loss::CrossEntropy => target
            .iter()
            .zip(a)
            .filter(|(y, _)| **y != 0.0)
            .map(|(y, a)| -y * a.ln())
            .sum(),
    }
}

fn penalty(net: &Network, l1: f64, l2: f64) -> f64 {
    if l1 == 0.0 && l2 == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for layer in net.layers() {
        for r in 0..layer.out_units() {
            for c in 0..layer.in_units() {
                if !layer.is_frozen(r, c) {
                    let w = *layer.weights.get(r, c);
                    total += l1 * w.abs() + l2 * w * w;
                }
            }
        }
    }
    total
}

/// Mean data loss over `idx` plus `(l1·Σ|w| + l2·Σw²) / |idx|` over
/// unfrozen weights.
pub(crate) fn objective(
    net: &Network,
    data: &Samples,
    idx: &[usize],
    loss: Loss,
    l1: f64,
    l2: f64,
) -> f64 {
    let out_act = net.layers().last().expect("non-empty").activation;
    let data_loss: f64 = idx
        .iter()
        .map(|&i| {
            let (zs, acts) = forward_with_pre(net, &data.inputs[i]);
            sample_loss(
                loss,
                out_act,
                zs.last().expect("non-empty"),
                acts.last().expect("non-empty"),
                &data.targets[i],
            )
        })
        .sum();
    let n = idx.len() as f64;
    data_loss / n + penalty(net, l1, l2) / n
}

/// Objective value and its gradient over the samples in `idx`.
pub(crate) fn objective_and_gradient(
    net: &Network,
    data: &Samples,
    idx: &[usize],
    loss: Loss,
    l1: f64,
    l2: f64,
) -> (f64, Gradients) {
    let mut grads = Gradients::zeros(net);
    let layers = net.layers();
    let last = layers.len() - 1;
    let mut data_loss = 0.0;

    for &i in idx {
        let input = &data.inputs[i];
        let target = &data.targets[i];
        let (zs, acts) = forward_with_pre(net, input);
        let out_act = layers[last].activation;
        data_loss += sample_loss(loss, out_act, &zs[last], &acts[last], target);

        // dL/dz at the output layer
        let a = &acts[last];
        let mut delta: Vec<f64> = match (loss, out_act) {
            (Loss::CrossEntropy, Activation::Softmax) => {
                let mass: f64 = target.iter().sum();
                a.iter().zip(target).map(|(a, y)| a * mass - y).collect()
            }
            (Loss::CrossEntropy, act) => {
                let mut g: Vec<f64> = a
                    .iter()
                    .zip(target)
                    .map(|(a, y)| if *y == 0.0 { 0.0 } else { -y / a })
                    .collect();
                act.backprop(a, &mut g);
                g
            }
            (Loss::MeanSquaredError, act) => {
                let n = a.len() as f64;
                let mut g: Vec<f64> =
                    a.iter().zip(target).map(|(a, y)| 2.0 * (a - y) / n).collect();
                act.backprop(a, &mut g);
                g
            }
        };

        for l in (0..=last).rev() {
            let x = if l == 0 { input.as_slice() } else { acts[l - 1].as_slice() };
            let gw = &mut grads.weights[l];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                grads.biases[l][r] += d;
                for (g, xv) in gw.row_mut(r).iter_mut().zip(x) {
                    *g += d * xv;
                }
            }
            if l == 0 {
                break;
            }
            let w = &layers[l].weights;
            let mut prev = vec![0.0; w.cols()];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (p, wv) in prev.iter_mut().zip(w.row(r)) {
                    *p += d * wv;
                }
            }
            layers[l - 1].activation.backprop(&acts[l - 1], &mut prev);
            delta = prev;
        }
    }

    let n = idx.len() as f64;
    for (l, layer) in layers.iter().enumerate() {
        for g in grads.weights[l].as_mut_slice() {
            *g /= n;
        }
        for g in &mut grads.biases[l] {
            *g /= n;
        }
        if l1 == 0.0 && l2 == 0.0 {
            continue;
        }
        for r in 0..layer.out_units() {
            for c in 0..layer.in_units() {
                if layer.is_frozen(r, c) {
                    continue;
                }
                let w = *layer.weights.get(r, c);
                let sign = if w > 0.0 {
                    1.0
                } else if w < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let g = grads.weights[l].get(r, c) + (l1 * sign + 2.0 * l2 * w) / n;
                grads.weights[l].set(r, c, g);
            }
        }
    }
    (data_loss / n + penalty(net, l1, l2) / n, grads)
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    t: i32,
}

fn apply_update(net: &mut Network, grads: &Gradients, cfg: &TrainConfig, adam: &mut Option<AdamState>) {
    let lr = cfg.learning_rate;
    let step = |g: f64, m: &mut f64, v: &mut f64, bc1: f64, bc2: f64| -> f64 {
        *m = cfg.adam_beta1 * *m + (1.0 - cfg.adam_beta1) * g;
        *v = cfg.adam_beta2 * *v + (1.0 - cfg.adam_beta2) * g * g;
        lr * (*m / bc1) / ((*v / bc2).sqrt() + cfg.adam_epsilon)
    };
    match adam {
        None => {
            for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                for r in 0..layer.out_units() {
                    for c in 0..layer.in_units() {
                        if !layer.is_frozen(r, c) {
                            let w = layer.weights.get(r, c) - lr * grads.weights[l].get(r, c);
                            layer.weights.set(r, c, w);
                        }
                    }
                    layer.biases[r] -= lr * grads.biases[l][r];
                }
            }
        }
        Some(state) => {
            state.t += 1;
            let bc1 = 1.0 - cfg.adam_beta1.powi(state.t);
            let bc2 = 1.0 - cfg.adam_beta2.powi(state.t);
            for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                for r in 0..layer.out_units() {
                    for c in 0..layer.in_units() {
                        if layer.is_frozen(r, c) {
                            continue;
                        }
                        let k = r * layer.in_units() + c;
                        let delta = step(
                            *grads.weights[l].get(r, c),
                            &mut state.m.weights[l].as_mut_slice()[k],
                            &mut state.v.weights[l].as_mut_slice()[k],
                            bc1,
                            bc2,
                        );
                        let w = layer.weights.get(r, c) - delta;
                        layer.weights.set(r, c, w);
                    }
                    let delta = step(
                        grads.biases[l][r],
                        &mut state.m.biases[l][r],
                        &mut state.v.biases[l][r],
                        bc1,
                        bc2,
                    );
                    layer.biases[r] -= delta;
                }
            }
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose predicted argmax equals the target argmax.
pub fn accuracy(net: &Network, data: &Samples) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .inputs
        .iter()
        .zip(&data.targets)
        .filter(|(x, t)| {
            let out = net.forward_unchecked(x).pop().expect("non-empty");
            argmax(&out) == argmax(t)
        })
        .count();
    hits as f64 / data.len() as f64
}

fn validation_score(net: &Network, data: &Samples, kind: ScoreKind, loss: Loss) -> (f64, f64) {
    let all: Vec<usize> = (0..data.len()).collect();
    let data_loss = objective(net, data, &all, loss, 0.0, 0.0);
    let score = match kind {
        ScoreKind::Accuracy => accuracy(net, data),
        ScoreKind::MeanSquaredError => objective(net, data, &all, Loss::MeanSquaredError, 0.0, 0.0),
    };
    (score, data_loss)
}

fn split_validation(data: &Samples, cfg: &TrainConfig) -> Result<(Vec<usize>, Vec<usize>), NetError> {
    if data.len() < 2 {
        return Err(NetError::Config(
            "an internal validation split needs at least 2 samples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, "validation-split"));
    let groups: Vec<Vec<usize>> = match cfg.loss {
        Loss::CrossEntropy => {
            let n_classes = data.targets[0].len();
            let mut g = vec![Vec::new(); n_classes];
            for (i, t) in data.targets.iter().enumerate() {
                g[argmax(t)].push(i);
            }
            g
        }
        Loss::MeanSquaredError => vec![(0..data.len()).collect()],
    };
    let mut train = Vec::new();
    let mut val = Vec::new();
    for mut g in groups {
        g.shuffle(&mut rng);
        let k = ((g.len() as f64) * cfg.validation_fraction).round() as usize;
        val.extend_from_slice(&g[..k]);
        train.extend_from_slice(&g[k..]);
    }
    if val.is_empty() {
        val.push(train.pop().expect("at least 2 samples"));
    }
    if train.is_empty() {
        train.push(val.pop().expect("at least 2 samples"));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Trains a copy of `net`, holding out `validation_fraction` of the data
/// (stratified by target class for cross-entropy) for early stopping.
///
/// Returns the weights from the best validation epoch.
pub fn train(net: &Network, data: &Samples, cfg: &TrainConfig) -> Result<(Network, TrainReport), NetError> {
    cfg.validate()?;
    data.check(net)?;
    let (train_idx, val_idx) = split_validation(data, cfg)?;
    train_with_validation(net, &data.subset(&train_idx), &data.subset(&val_idx), cfg)
}

/// Trains a copy of `net` on `train_data`, early-stopping on `validation`.
///
/// An epoch improves on the best so far when its validation score is strictly
/// better; for accuracy, an equal score with strictly lower validation loss
/// also counts.
pub fn train_with_validation(
    net: &Network,
    train_data: &Samples,
    validation: &Samples,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport), NetError> {
    cfg.validate()?;
    train_data.check(net)?;
    validation.check(net)?;

    let kind = cfg.score_kind();
    let mut current = net.clone();
    let mut adam = match cfg.optimizer {
        Optimizer::Adam => Some(AdamState {
            m: Gradients::zeros(net),
            v: Gradients::zeros(net),
            t: 0,
        }),
        Optimizer::Sgd => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, "batch-order"));
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let all: Vec<usize> = order.clone();

    let mut report = TrainReport {
        epochs_run: 0,
        train_loss_history: Vec::new(),
        validation_score_history: Vec::new(),
        validation_loss_history: Vec::new(),
        score: kind,
        stopped_early: false,
        best_epoch: 0,
    };
    let mut best: Option<(f64, f64, Network)> = None;
    let mut stale = 0;

    let batch_size = cfg.batch_size.unwrap_or(all.len()).min(all.len()).max(1);
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(batch_size).enumerate() {
            let (obj, grads) = objective_and_gradient(&current, train_data, batch, cfg.loss, cfg.l1, cfg.l2);
            if !obj.is_finite() {
                return Err(NetError::NonFiniteLoss { epoch, batch: b });
            }
            apply_update(&mut current, &grads, cfg, &mut adam);
        }
        let train_loss = objective(&current, train_data, &all, cfg.loss, 0.0, 0.0)
            + penalty(&current, cfg.l1, cfg.l2) / batch_size as f64;
        if !train_loss.is_finite() {
            return Err(NetError::NonFiniteLoss {
                epoch,
                batch: order.len().div_ceil(batch_size),
            });
        }
        let (score, val_loss) = validation_score(&current, validation, kind, cfg.loss);
        report.epochs_run = epoch;
        report.train_loss_history.push(train_loss);
        report.validation_score_history.push(score);
        report.validation_loss_history.push(val_loss);

        let improved = match &best {
            None => true,
            Some((best_score, best_loss, _)) => match kind {
                ScoreKind::Accuracy => {
                    score > *best_score || (score == *best_score && val_loss < *best_loss)
                }
                ScoreKind::MeanSquaredError => score < *best_score,
            },
        };
        if improved {
            best = Some((score, val_loss, current.clone()));
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    let (_, _, best_net) = best.expect("at least one epoch ran");
    Ok((best_net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::{build_mlp, Layer};

    fn xor() -> Samples {
        Samples::one_hot(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            &[0, 1, 1, 0],
            2,
        )
        .unwrap()
    }

    fn unregularized() -> TrainConfig {
        TrainConfig {
            l1: 0.0,
            l2: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_xor() {
        let data = xor();
        let net = build_mlp(2, &[8], 2, 3).unwrap();
        let cfg = TrainConfig {
            max_epochs: 2000,
            patience: 2000,
            batch_size: Some(4),
            ..unregularized()
        };
        let (trained, report) = train_with_validation(&net, &data, &data, &cfg).unwrap();
        assert_eq!(accuracy(&trained, &data), 1.0);
        assert!(report.epochs_run <= 2000);
        assert_eq!(report.train_loss_history.len(), report.epochs_run);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let data = xor();
        let net = build_mlp(2, &[8], 2, 3).unwrap();
        for optimizer in [Optimizer::Adam, Optimizer::Sgd] {
            let cfg = TrainConfig {
                learning_rate: 0.0,
                max_epochs: 10,
                patience: 20,
                optimizer,
                ..TrainConfig::default()
            };
            let (trained, report) = train_with_validation(&net, &data, &data, &cfg).unwrap();
            assert_eq!(trained, net);
            let first = report.train_loss_history[0];
            assert!(report.train_loss_history.iter().all(|l| *l == first));
        }
    }

    #[test]
    fn stops_after_patience_when_validation_only_gets_worse() {
        // Validation labels are the complement of the training labels, so
        // every epoch that fits the training set makes validation worse.
        let inputs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, 1.0 - i as f64 / 40.0]).collect();
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let flipped: Vec<usize> = labels.iter().map(|l| 1 - l).collect();
        let train_data = Samples::one_hot(inputs.clone(), &labels, 2).unwrap();
        let val = Samples::one_hot(inputs, &flipped, 2).unwrap();
        let net = build_mlp(2, &[8], 2, 11).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            patience: 3,
            max_epochs: 200,
            batch_size: Some(8),
            ..unregularized()
        };
        let (_, report) = train_with_validation(&net, &train_data, &val, &cfg).unwrap();
        assert!(report.stopped_early);
        assert_eq!(report.epochs_run, report.best_epoch + cfg.patience);
        assert!(report.epochs_run <= 4 + 1, "{report:?}");
        assert_eq!(report.epochs_run, report.validation_score_history.len());
    }

    #[test]
    fn frozen_weights_are_bit_identical() {
        let data = xor();
        let mut net = build_mlp(2, &[6], 2, 5).unwrap();
        let mask = Matrix::from_fn(6, 2, |r, c| (r + c) % 3 == 0);
        net.layers_mut()[0].frozen_mask = Some(mask.clone());
        let cfg = TrainConfig {
            max_epochs: 50,
            patience: 50,
            batch_size: Some(2),
            ..TrainConfig::default()
        };
        let (trained, _) = train_with_validation(&net, &data, &data, &cfg).unwrap();
        let (before, after) = (&net.layers()[0].weights, &trained.layers()[0].weights);
        let mut moved = 0;
        for r in 0..6 {
            for c in 0..2 {
                if *mask.get(r, c) {
                    assert_eq!(before.get(r, c).to_bits(), after.get(r, c).to_bits());
                } else if before.get(r, c) != after.get(r, c) {
                    moved += 1;
                }
            }
        }
        assert!(moved > 0);
    }

    #[test]
    fn training_is_deterministic() {
        let inputs: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 7) as f64 / 7.0, (i % 5) as f64 / 5.0]).collect();
        let labels: Vec<usize> = (0..60).map(|i| usize::from(i % 7 > 3)).collect();
        let data = Samples::one_hot(inputs, &labels, 2).unwrap();
        let net = build_mlp(2, &[10], 2, 8).unwrap();
        let cfg = TrainConfig { seed: 77, ..TrainConfig::default() };
        let (a, ra) = train(&net, &data, &cfg).unwrap();
        let (b, rb) = train(&net, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn l2_step_shrinks_every_unfrozen_weight() {
        // a single sample whose target equals the prediction gives zero data
        // gradient under MSE with a linear output
        let w = Matrix::from_rows(vec![vec![0.5, -1.5, 0.0], vec![2.0, 0.25, -0.75]]);
        let layer = Layer::new(w, vec![0.0, 0.0], Activation::Linear);
        let mut net = Network::new(
            vec![layer],
            vec!["a".into(), "b".into(), "c".into()],
            vec!["u".into(), "v".into()],
            None,
        )
        .unwrap();
        net.layers_mut()[0].frozen_mask = Some(Matrix::from_fn(2, 3, |r, c| r == 1 && c == 2));
        let x = vec![0.3, 0.7, 0.1];
        let y = net.predict(&x).unwrap();
        let data = Samples::new(vec![x], vec![y]).unwrap();
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 0.1,
            l1: 0.0,
            l2: 1.0,
            loss: Loss::MeanSquaredError,
            batch_size: Some(1),
            ..TrainConfig::default()
        };
        let (_, grads) = objective_and_gradient(&net, &data, &[0], cfg.loss, cfg.l1, cfg.l2);
        let before = net.clone();
        apply_update(&mut net, &grads, &cfg, &mut None);
        for r in 0..2 {
            for c in 0..3 {
                let (w0, w1) = (*before.layers()[0].weights.get(r, c), *net.layers()[0].weights.get(r, c));
                if before.layers()[0].is_frozen(r, c) {
                    assert_eq!(w0, w1);
                } else if w0 != 0.0 {
                    assert!(w1.abs() < w0.abs(), "({r},{c}): {w0} -> {w1}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = build_mlp(2, &[4], 2, 0).unwrap();
        assert_eq!(
            train(&net, &Samples::default(), &TrainConfig::default()),
            Err(NetError::EmptyDataset)
        );
        let bad = Samples::one_hot(vec![vec![1.0, 2.0, 3.0]; 4], &[0, 1, 0, 1], 2).unwrap();
        assert!(matches!(
            train(&net, &bad, &TrainConfig::default()),
            Err(NetError::Dimension(_))
        ));
        for cfg in [
            TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
            TrainConfig { patience: 0, ..TrainConfig::default() },
            TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() },
        ] {
            assert!(matches!(train(&net, &xor(), &cfg), Err(NetError::Config(_))));
        }
    }

    #[test]
    fn non_finite_loss_reports_epoch_and_batch() {
        let mut net = build_mlp(2, &[4], 2, 0).unwrap();
        net.layers_mut()[0].weights.set(0, 0, f64::NAN);
        let data = xor();
        let cfg = TrainConfig { batch_size: Some(2), ..TrainConfig::default() };
        assert_eq!(
            train_with_validation(&net, &data, &data, &cfg).map(|_| ()),
            Err(NetError::NonFiniteLoss { epoch: 1, batch: 0 })
        );
    }
}
