use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{minority_of, AugmentError, Augmented};
use crate::datakit::{Bounds, Class, Dataset, Origin};
use crate::seed;
use crate::tensornet::{build_dense, train, Activation, Loss, Network, Samples, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    /// Defaults to the feature count; any other value is rejected.
    pub output_width: Option<usize>,
    /// The loss is always mean squared error.
    pub train: TrainConfig,
    /// Spread of latent draws in units of the latent standard deviation.
    pub noise_scale: f64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            encoder_widths: vec![8, 4, 2],
            decoder_widths: vec![4, 8],
            output_width: None,
            train: TrainConfig {
                loss: Loss::MeanSquaredError,
                ..TrainConfig::default()
            },
            noise_scale: 1.0,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self, n_features: usize) -> Result<(), AugmentError> {
        if self.encoder_widths.is_empty() {
            return Err(AugmentError::Config("the encoder needs at least one layer".into()));
        }
        if self.encoder_widths.iter().chain(&self.decoder_widths).any(|&w| w == 0) {
            return Err(AugmentError::Config("layer widths must be at least 1".into()));
        }
        if let Some(w) = self.output_width {
            if w != n_features {
                return Err(AugmentError::Config(format!(
                    "output width {w} cannot reconstruct {n_features} features"
                )));
            }
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(AugmentError::Config("noise_scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// A trained autoencoder. Inputs are min-max scaled with `bounds` before
/// encoding and decoded outputs are mapped back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub network: Network,
    /// Index of the layer whose output is the latent code.
    pub bottleneck: usize,
    pub bounds: Bounds,
    pub noise_scale: f64,
    pub report: TrainReport,
}

impl Autoencoder {
    pub fn latent_dim(&self) -> usize {
        self.network.layers()[self.bottleneck].out_units()
    }

    pub fn encode(&self, row: &[f64]) -> Result<Vec<f64>, AugmentError> {
        let mut acts = self.network.forward(&self.bounds.scale(row))?;
        Ok(acts.swap_remove(self.bottleneck))
    }

    pub fn decode(&self, latent: &[f64]) -> Result<Vec<f64>, AugmentError> {
        if latent.len() != self.latent_dim() {
            return Err(AugmentError::Config(format!(
                "latent code has {} values, expected {}",
                latent.len(),
                self.latent_dim()
            )));
        }
        let mut x = latent.to_vec();
        for layer in &self.network.layers()[self.bottleneck + 1..] {
            let z = layer.pre_activation(&x);
            x = vec![0.0; z.len()];
            layer.activation.apply(&z, &mut x);
        }
        Ok(self.bounds.invert(&x))
    }

    /// Mean squared reconstruction error in scaled units.
    pub fn reconstruction_error(&self, rows: &[Vec<f64>]) -> Result<f64, AugmentError> {
        let mut total = 0.0;
        let mut count = 0usize;
        for row in rows {
            let x = self.bounds.scale(row);
            let y = self.network.predict(&x)?;
            total += x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            count += x.len();
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }
}

/// Trains `features → encoder → decoder → features` on all rows, labels
/// ignored.
pub fn train_autoencoder(data: &Dataset, cfg: &AutoencoderConfig) -> Result<Autoencoder, AugmentError> {
    let d = data.n_features();
    cfg.validate(d)?;
    if data.len() < 2 {
        return Err(AugmentError::TooFewRows(data.len()));
    }
    let mut spec: Vec<(usize, Activation)> = cfg
        .encoder_widths
        .iter()
        .chain(&cfg.decoder_widths)
        .map(|&w| (w, Activation::Relu))
        .collect();
    spec.push((d, Activation::Linear));
    let init = build_dense(d, &spec, seed::derive(cfg.train.seed, "autoencoder-init"))?
        .with_io_names(data.feature_names().to_vec(), data.feature_names().to_vec())?;

    let bounds = Bounds::of_rows(data.rows(), d);
    let inputs = data.rows().iter().map(|r| bounds.scale(r)).collect();
    let tc = TrainConfig {
        loss: Loss::MeanSquaredError,
        ..cfg.train.clone()
    };
    let (network, report) = train(&init, &Samples::reconstruction(inputs), &tc)?;
    Ok(Autoencoder {
        network,
        bottleneck: cfg.encoder_widths.len() - 1,
        bounds,
        noise_scale: cfg.noise_scale,
        report,
    })
}

/// Draws `n` synthetic rows for `class`: fit a per-dimension Gaussian to the
/// class's latent codes, sample at `noise_scale` times its spread, decode,
/// and clip to the per-feature range observed in `data`.
pub fn autoencoder_sample(
    ae: &Autoencoder,
    data: &Dataset,
    class: Class,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, AugmentError> {
    if n == 0 {
        return Err(AugmentError::Config("n must be at least 1".into()));
    }
    let codes: Vec<Vec<f64>> = data
        .rows()
        .iter()
        .zip(data.labels())
        .filter(|(_, &c)| c == class)
        .map(|(r, _)| ae.encode(r))
        .collect::<Result<_, _>>()?;
    if codes.is_empty() {
        return Err(AugmentError::ClassAbsent(class));
    }
    let k = ae.latent_dim();
    let m = codes.len() as f64;
    let mean: Vec<f64> = (0..k).map(|j| codes.iter().map(|c| c[j]).sum::<f64>() / m).collect();
    let std: Vec<f64> = (0..k)
        .map(|j| (codes.iter().map(|c| (c[j] - mean[j]).powi(2)).sum::<f64>() / m).sqrt())
        .collect();

    let observed = Bounds::of_rows(data.rows(), data.n_features());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let latent: Vec<f64> = (0..k)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean[j] + ae.noise_scale * std[j] * z
                })
                .collect();
            let row = ae.decode(&latent)?;
            Ok(row
                .iter()
                .enumerate()
                .map(|(j, v)| v.clamp(observed.min[j], observed.max[j]))
                .collect())
        })
        .collect()
}

/// Trains an autoencoder on `data` and appends minority rows sampled from it
/// until the classes are equal.
pub fn balance_with_autoencoder(
    data: &Dataset,
    cfg: &AutoencoderConfig,
    seed: u64,
) -> Result<(Augmented, Autoencoder), AugmentError> {
    let ae = train_autoencoder(data, cfg)?;
    let ((minority, m), (_, majority)) = minority_of(data);
    let needed = majority - m;
    if needed == 0 {
        let out = Augmented {
            data: data.clone(),
            minority,
            synthetic: 0,
            already_balanced: true,
        };
        return Ok((out, ae));
    }
    let rows = autoencoder_sample(&ae, data, minority, needed, seed)?;
    let mut out = data.clone();
    out.extend(rows, vec![minority; needed], Origin::Autoencoder)?;
    Ok((
        Augmented {
            data: out,
            minority,
            synthetic: needed,
            already_balanced: false,
        },
        ae,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{generate_synthetic, SynthConfig};

    fn small_config() -> AutoencoderConfig {
        AutoencoderConfig {
            train: TrainConfig {
                loss: Loss::MeanSquaredError,
                max_epochs: 60,
                ..TrainConfig::default()
            },
            ..AutoencoderConfig::default()
        }
    }

    fn skewed_players(seed: u64) -> Dataset {
        generate_synthetic(&SynthConfig { seed, ..SynthConfig::default() }).unwrap().train
    }

    #[test]
    fn default_widths() {
        let ae = train_autoencoder(&skewed_players(1), &small_config()).unwrap();
        let widths: Vec<_> = ae.network.layers().iter().map(|l| l.out_units()).collect();
        assert_eq!(ae.network.input_dim(), 9);
        assert_eq!(widths, vec![8, 4, 2, 4, 8, 9]);
        assert_eq!(ae.bottleneck, 2);
        assert_eq!(ae.latent_dim(), 2);
        assert_eq!(ae.network.layers()[5].activation, Activation::Linear);
    }

    #[test]
    fn constant_rows_reconstruct_exactly() {
        let rows = vec![vec![3.0, 7.0, 1.0]; 20];
        let names = vec!["a".into(), "b".into(), "c".into()];
        let d = Dataset::new(names, rows, vec![Class::High; 20]).unwrap();
        let cfg = AutoencoderConfig {
            train: TrainConfig {
                loss: Loss::MeanSquaredError,
                max_epochs: 50,
                ..TrainConfig::default()
            },
            ..AutoencoderConfig::default()
        };
        let ae = train_autoencoder(&d, &cfg).unwrap();
        assert!(ae.report.epochs_run <= 50);
        assert!(ae.reconstruction_error(d.rows()).unwrap() < 1e-3);
    }

    #[test]
    fn training_is_deterministic() {
        let d = skewed_players(2);
        let a = train_autoencoder(&d, &small_config()).unwrap();
        let b = train_autoencoder(&d, &small_config()).unwrap();
        assert_eq!(a.report.train_loss_history, b.report.train_loss_history);
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn best_validation_not_worse_than_first() {
        let ae = train_autoencoder(&skewed_players(3), &small_config()).unwrap();
        let h = &ae.report.validation_score_history;
        assert!(h[ae.report.best_epoch - 1] <= h[0]);
    }

    #[test]
    fn zero_noise_repeats_the_mean_decode() {
        let d = skewed_players(4);
        let mut ae = train_autoencoder(&d, &small_config()).unwrap();
        ae.noise_scale = 0.0;
        let out = autoencoder_sample(&ae, &d, Class::Low, 5, 11).unwrap();
        assert!(out.iter().all(|r| r == &out[0]));
    }

    #[test]
    fn samples_stay_in_range() {
        let d = skewed_players(5);
        let mut ae = train_autoencoder(&d, &small_config()).unwrap();
        ae.noise_scale = 3.0;
        let b = d.normalization();
        let out = autoencoder_sample(&ae, &d, Class::Low, 1000, 1).unwrap();
        for row in &out {
            for (j, v) in row.iter().enumerate() {
                assert!(*v >= b.min[j] && *v <= b.max[j]);
            }
        }
        assert_eq!(out, autoencoder_sample(&ae, &d, Class::Low, 1000, 1).unwrap());
    }

    #[test]
    fn balancing_fills_the_minority() {
        let d = skewed_players(6);
        let (low, high) = d.class_counts();
        let (out, _) = balance_with_autoencoder(&d, &small_config(), 2).unwrap();
        assert_eq!(out.synthetic, high - low);
        assert_eq!(out.data.class_counts(), (high, high));
        assert!(out.data.origin().unwrap()[d.len()..].iter().all(|&o| o == Origin::Autoencoder));
    }

    #[test]
    fn absent_class_and_bad_config() {
        let rows = vec![vec![1.0], vec![2.0]];
        let d = Dataset::new(vec!["a".into()], rows, vec![Class::High; 2]).unwrap();
        let ae = train_autoencoder(&d, &small_config()).unwrap();
        assert_eq!(
            autoencoder_sample(&ae, &d, Class::Low, 1, 0),
            Err(AugmentError::ClassAbsent(Class::Low))
        );
        let bad = AutoencoderConfig { output_width: Some(10), ..small_config() };
        assert!(matches!(train_autoencoder(&d, &bad), Err(AugmentError::Config(_))));
        let one = Dataset::new(vec!["a".into()], vec![vec![1.0]], vec![Class::High]).unwrap();
        assert_eq!(train_autoencoder(&one, &small_config()), Err(AugmentError::TooFewRows(1)));
    }
}
