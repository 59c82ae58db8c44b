use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{minority_of, AugmentError, Augmented};
use crate::datakit::{Bounds, Origin};
use crate::datakit::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteTarget {
    /// Grow the minority to the majority's size.
    #[default]
    EqualizeClasses,
    /// Grow the minority to `round(ratio · majority)` rows.
    Ratio(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub target: SmoteTarget,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target: SmoteTarget::EqualizeClasses,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.k_neighbors < 1 {
            return Err(AugmentError::Config("k_neighbors must be at least 1".into()));
        }
        if let SmoteTarget::Ratio(r) = self.target {
            if !(r > 0.0 && r.is_finite()) {
                return Err(AugmentError::Config("ratio must be positive".into()));
            }
        }
        Ok(())
    }
}

pub(crate) fn interpolate(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + lambda * (y - x)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `points`) of the `k` nearest other points of each point.
/// Ties go to the lower index.
fn nearest_neighbors(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    (0..points.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| (sq_dist(&points[i], &points[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Oversamples the minority class.
///
/// Base points cycle through the minority rows in order; each synthetic row
/// interpolates towards one of the base point's `k` nearest minority
/// neighbours (Euclidean on min-max scaled features) at a uniform `λ ∈ [0, 1)`.
pub fn smote(data: &Dataset, cfg: &SmoteConfig) -> Result<Augmented, AugmentError> {
    cfg.validate()?;
    let ((minority, m), (_, majority)) = minority_of(data);
    let wanted = match cfg.target {
        SmoteTarget::EqualizeClasses => majority,
        SmoteTarget::Ratio(r) => (r * majority as f64).round() as usize,
    };
    let needed = wanted.saturating_sub(m);
    if needed == 0 {
        return Ok(Augmented {
            data: data.clone(),
            minority,
            synthetic: 0,
            already_balanced: true,
        });
    }
    if m < 2 || cfg.k_neighbors >= m {
        return Err(AugmentError::MinorityTooSmall {
            class: minority,
            count: m,
            k: cfg.k_neighbors,
        });
    }

    let members: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == minority).collect();
    let bounds = Bounds::of_rows(data.rows(), data.n_features());
    let scaled: Vec<Vec<f64>> = members.iter().map(|&i| bounds.scale(&data.rows()[i])).collect();
    let neighbors = nearest_neighbors(&scaled, cfg.k_neighbors);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows: Vec<Vec<f64>> = (0..needed)
        .map(|s| {
            let base = s % m;
            let nn = neighbors[base][rng.random_range(0..neighbors[base].len())];
            let lambda: f64 = rng.random();
            interpolate(&data.rows()[members[base]], &data.rows()[members[nn]], lambda)
        })
        .collect();

    let mut out = data.clone();
    out.extend(rows, vec![minority; needed], Origin::Smote)?;
    Ok(Augmented {
        data: out,
        minority,
        synthetic: needed,
        already_balanced: false,
    })
}
