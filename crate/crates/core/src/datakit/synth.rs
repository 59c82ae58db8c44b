//! Synthetic game-log data with class imbalance and a spurious feature.
//!
//! Labels come first (exactly `round(n · class_ratio)` High rows). Causal
//! features follow a mastery profile: a High row has every causal feature in
//! the upper band of its range, a Low row has at least one in the lower band
//! (which one is drawn in proportion to `causal_weights`), and a
//! `label_noise` fraction of rows gets the profile of the other class. The
//! spurious feature is `a · label + noise` with `a` calibrated so the
//! correlation measured after rounding and clipping hits the target. Other
//! features are label-independent shifted-gamma draws matching the schema
//! mean and standard deviation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{pearson, Class, DataError, Dataset, Origin};
use crate::seed;

/// Observed range and moments of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl FeatureRange {
    fn new(name: &str, min: f64, max: f64, mean: f64, std: f64) -> Self {
        FeatureRange {
            name: name.to_string(),
            min,
            max,
            mean,
            std,
        }
    }
}

fn schema_ranges() -> Vec<FeatureRange> {
    vec![
        FeatureRange::new("Arrow", 15.0, 180.0, 82.05, 34.65),
        FeatureRange::new("Big_cheese", 0.0, 4.0, 1.6, 0.7),
        FeatureRange::new("Small_cheese", 0.0, 74.0, 63.38, 17.72),
        FeatureRange::new("Function", 0.0, 4.0, 0.6, 1.2),
        FeatureRange::new("Debug", 0.0, 17.0, 0.8, 2.3),
        FeatureRange::new("Simulation", 0.0, 19.0, 2.92, 4.24),
        FeatureRange::new("Loop", 0.0, 50.0, 6.66, 8.12),
        FeatureRange::new("Conditional", 0.0, 46.0, 3.0, 6.4),
        FeatureRange::new("Hitting_wall", 0.0, 180.0, 6.19, 18.57),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Training rows.
    pub n_rows: usize,
    /// Test rows.
    pub n_test: usize,
    /// Fraction of High rows.
    pub class_ratio: f64,
    pub spurious_feature: String,
    pub train_spurious_r: f64,
    pub test_spurious_r: f64,
    /// Causal features and their relative weight as the failing skill of a
    /// Low row.
    pub causal_weights: Vec<(String, f64)>,
    /// Fraction of rows whose causal profile belongs to the other class.
    pub label_noise: f64,
    /// Normalized band for a mastered causal feature.
    pub mastered_band: (f64, f64),
    /// Normalized band for a failed causal feature.
    pub failed_band: (f64, f64),
    /// Chance that each further causal feature also fails in a Low profile,
    /// scaled by its relative weight.
    pub extra_failure: f64,
    pub seed: u64,
    /// Columns in output order.
    pub feature_ranges: Vec<FeatureRange>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rows: 427,
            n_test: 85,
            class_ratio: 364.0 / 427.0,
            spurious_feature: "Small_cheese".into(),
            train_spurious_r: 0.887,
            test_spurious_r: 0.632,
            causal_weights: ["Conditional", "Loop", "Debug", "Simulation", "Function"]
                .iter()
                .map(|n| (n.to_string(), 1.0))
                .collect(),
            label_noise: 0.05,
            mastered_band: (0.6, 1.0),
            failed_band: (0.0, 0.3),
            extra_failure: 0.25,
            seed: 0,
            feature_ranges: schema_ranges(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Config(m));
        if self.n_rows < 3 || self.n_test < 3 {
            return bad("n_rows and n_test must be at least 3".into());
        }
        if !(self.class_ratio > 0.0 && self.class_ratio < 1.0) {
            return bad("class_ratio must lie in (0, 1)".into());
        }
        for r in [self.train_spurious_r, self.test_spurious_r] {
            if !(r.abs() < 1.0) {
                return bad(format!("correlation {r} must satisfy |r| < 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.label_noise) || !(0.0..=1.0).contains(&self.extra_failure) {
            return bad("label_noise and extra_failure must lie in [0, 1]".into());
        }
        for (lo, hi) in [self.mastered_band, self.failed_band] {
            if !(lo <= hi) {
                return bad("band bounds must be ordered".into());
            }
        }
        let has = |n: &str| self.feature_ranges.iter().any(|f| f.name == n);
        if !has(&self.spurious_feature) {
            return bad(format!("spurious feature `{}` has no range", self.spurious_feature));
        }
        for (name, w) in &self.causal_weights {
            if !has(name) {
                return bad(format!("causal feature `{name}` has no range"));
            }
            if *name == self.spurious_feature {
                return bad("the spurious feature cannot be causal".into());
            }
            if !(*w >= 0.0) {
                return bad(format!("causal weight of `{name}` must be non-negative"));
            }
        }
        if !self.causal_weights.is_empty() && self.causal_weights.iter().all(|(_, w)| *w == 0.0) {
            return bad("at least one causal weight must be positive".into());
        }
        for f in &self.feature_ranges {
            if !(f.min <= f.max && f.std >= 0.0) {
                return bad(format!("invalid range for `{}`", f.name));
            }
        }
        Ok(())
    }
}

/// Generated splits with the spurious-feature correlations actually achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synthetic {
    pub train: Dataset,
    pub test: Dataset,
    pub train_spurious_r: f64,
    pub test_spurious_r: f64,
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<Synthetic, DataError> {
    config.validate()?;
    let (train, train_r) = generate_split(config, config.n_rows, config.train_spurious_r, "train")?;
    let (test, test_r) = generate_split(config, config.n_test, config.test_spurious_r, "test")?;
    Ok(Synthetic {
        train,
        test,
        train_spurious_r: train_r,
        test_spurious_r: test_r,
    })
}

fn generate_split(cfg: &SynthConfig, n: usize, target_r: f64, tag: &str) -> Result<(Dataset, f64), DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &format!("synth-{tag}")));
    let n_high = (n as f64 * cfg.class_ratio).round() as usize;
    if n_high == 0 || n_high == n {
        return Err(DataError::Infeasible(format!(
            "class_ratio {} leaves a single class in {n} rows",
            cfg.class_ratio
        )));
    }
    let mut labels: Vec<Class> = (0..n)
        .map(|i| if i < n_high { Class::High } else { Class::Low })
        .collect();
    labels.shuffle(&mut rng);

    let d = cfg.feature_ranges.len();
    let mut rows = vec![vec![0.0; d]; n];

    // causal mastery profiles
    let causal: Vec<(usize, f64)> = cfg
        .causal_weights
        .iter()
        .map(|(name, w)| {
            let j = cfg.feature_ranges.iter().position(|f| &f.name == name).expect("validated");
            (j, *w)
        })
        .collect();
    let picker = if causal.is_empty() {
        None
    } else {
        Some(WeightedIndex::new(causal.iter().map(|(_, w)| *w)).expect("validated weights"))
    };
    let w_max = causal.iter().map(|(_, w)| *w).fold(0.0, f64::max);
    for (row, label) in rows.iter_mut().zip(&labels) {
        let Some(picker) = &picker else { break };
        let flipped = rng.random_bool(cfg.label_noise);
        let profile_high = (*label == Class::High) != flipped;
        let mut failed = vec![false; causal.len()];
        if !profile_high {
            failed[picker.sample(&mut rng)] = true;
            for (k, (_, w)) in causal.iter().enumerate() {
                if !failed[k] && rng.random_bool((cfg.extra_failure * w / w_max).clamp(0.0, 1.0)) {
                    failed[k] = true;
                }
            }
        }
        for (k, (j, _)) in causal.iter().enumerate() {
            let (lo, hi) = if failed[k] { cfg.failed_band } else { cfg.mastered_band };
            let u = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let f = &cfg.feature_ranges[*j];
            row[*j] = (f.min + u * (f.max - f.min)).round().clamp(f.min, f.max);
        }
    }

    // label-independent features
    let spurious = cfg
        .feature_ranges
        .iter()
        .position(|f| f.name == cfg.spurious_feature)
        .expect("validated");
    for (j, f) in cfg.feature_ranges.iter().enumerate() {
        if j == spurious || causal.iter().any(|(c, _)| *c == j) {
            continue;
        }
        let excess = f.mean - f.min;
        let gamma = (excess > 0.0 && f.std > 0.0)
            .then(|| Gamma::new((excess / f.std).powi(2), f.std * f.std / excess).expect("positive parameters"));
        for row in rows.iter_mut() {
            let v = match &gamma {
                Some(g) => f.min + g.sample(&mut rng),
                None => f.mean,
            };
            row[j] = v.round().clamp(f.min, f.max);
        }
    }

    // spurious feature
    let y: Vec<f64> = labels.iter().map(|c| c.index() as f64).collect();
    let z = decorrelated_noise(&y, &mut rng);
    let f = &cfg.feature_ranges[spurious];
    let column = calibrate_spurious(f, &y, &z, target_r)?;
    for (row, v) in rows.iter_mut().zip(&column) {
        row[spurious] = *v;
    }
    let achieved = pearson(&column, &y).unwrap_or(0.0);

    let names = cfg.feature_ranges.iter().map(|f| f.name.clone()).collect();
    let data = Dataset::new(names, rows, labels)?.with_origin(vec![Origin::Real; n])?;
    Ok((data, achieved))
}

/// Standard normal draws with their sample correlation to `y` removed,
/// rescaled to mean 0 and unit variance.
fn decorrelated_noise(y: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = y.len() as f64;
    let mut z: Vec<f64> = (0..y.len()).map(|_| rng.sample(StandardNormal)).collect();
    let my = y.iter().sum::<f64>() / n;
    let mz = z.iter().sum::<f64>() / n;
    let cov: f64 = y.iter().zip(&z).map(|(y, z)| (y - my) * (z - mz)).sum::<f64>() / n;
    let var_y: f64 = y.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / n;
    let beta = cov / var_y;
    for (zi, yi) in z.iter_mut().zip(y) {
        *zi -= mz + beta * (yi - my);
    }
    let sd = (z.iter().map(|z| z * z).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        z.iter_mut().for_each(|z| *z /= sd);
    }
    z
}

fn spurious_column(f: &FeatureRange, y: &[f64], z: &[f64], a: f64, sigma: f64) -> Vec<f64> {
    let my = y.iter().sum::<f64>() / y.len() as f64;
    y.iter()
        .zip(z)
        .map(|(y, z)| (f.mean + a * (y - my) + sigma * z).round().clamp(f.min, f.max))
        .collect()
}

/// Finds the label shift whose rounded, clipped column has correlation
/// `target` with `y`, by bisection on a scale factor.
fn calibrate_spurious(f: &FeatureRange, y: &[f64], z: &[f64], target: f64) -> Result<Vec<f64>, DataError> {
    let n = y.len() as f64;
    let p = y.iter().sum::<f64>() / n;
    let spread = (p * (1.0 - p)).sqrt();
    let sigma = f.std * (1.0 - target * target).sqrt();
    let a0 = target.signum() * f.std / spread;
    let r_at = |t: f64| {
        let col = spurious_column(f, y, z, t * a0, sigma);
        (pearson(&col, y).unwrap_or(0.0) * target.signum(), col)
    };
    let goal = target.abs();
    let (mut lo, mut hi) = (0.0, 1.0);
    while r_at(hi).0 < goal {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(DataError::Infeasible(format!(
                "correlation {target} for `{}` is out of reach within [{}, {}]",
                f.name, f.min, f.max
            )));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if r_at(mid).0 < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (r_lo, col_lo) = r_at(lo);
    let (r_hi, col_hi) = r_at(hi);
    Ok(if (r_lo - goal).abs() <= (r_hi - goal).abs() { col_lo } else { col_hi })
}
