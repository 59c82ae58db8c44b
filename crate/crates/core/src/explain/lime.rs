use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    Contribution, DataStats, ExplainError, Explanation, GlobalExplanation, GlobalImportance,
    LimeConfig, ProbaModel,
};
use crate::datakit::{Class, Dataset};
use crate::par::Execution;
use crate::seed;

const RIDGE: f64 = 1e-6;

pub(crate) fn probabilities<M: ProbaModel + ?Sized>(model: &M, x: &[f64]) -> Result<[f64; 2], ExplainError> {
    let p = model.predict_proba(x)?;
    if p.len() != 2 {
        return Err(ExplainError::Dimension(format!("model returned {} probabilities, expected 2", p.len())));
    }
    let sum = p[0] + p[1];
    if !((sum - 1.0).abs() <= 1e-9 && p.iter().all(|v| (0.0..=1.0).contains(v))) {
        return Err(ExplainError::NotProbabilities { sum });
    }
    Ok([p[0], p[1]])
}

pub(crate) fn predicted_class(p: &[f64; 2]) -> Class {
    if p[1] > p[0] {
        Class::High
    } else {
        Class::Low
    }
}

/// Solves `min Σ w_i (y_i − b0 − x_i·b)² + ridge·|b|²` through the normal
/// equations. Returns `[b0, b…]`, or `None` when a pivot vanishes.
pub fn solve_weighted_least_squares(x: &[Vec<f64>], y: &[f64], w: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let p = x.first().map_or(0, Vec::len) + 1;
    let mut a = vec![vec![0.0; p + 1]; p];
    for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
        let mut v = Vec::with_capacity(p);
        v.push(1.0);
        v.extend_from_slice(row);
        for r in 0..p {
            let wr = wi * v[r];
            for c in r..p {
                a[r][c] += wr * v[c];
            }
            a[r][p] += wr * yi;
        }
    }
    for r in 0..p {
        for c in 0..r {
            a[r][c] = a[c][r];
        }
        if r > 0 {
            a[r][r] += ridge;
        }
    }
    let scale = (0..p).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= tol {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..p {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut b = vec![0.0; p];
    for r in (0..p).rev() {
        let s: f64 = (r + 1..p).map(|c| a[r][c] * b[c]).sum();
        b[r] = (a[r][p] - s) / a[r][r];
    }
    b.iter().all(|v| v.is_finite()).then_some(b)
}

/// Local surrogate around `instance`.
///
/// The first perturbation is the instance itself; the rest add
/// `z_j · std_j` with standard-normal `z`. Weights are
/// `exp(−|z|² / width²)` and importances are the fitted slopes on `z`.
pub fn lime_explain<M: ProbaModel + ?Sized>(
    model: &M,
    instance: &[f64],
    stats: &DataStats,
    cfg: &LimeConfig,
) -> Result<Explanation, ExplainError> {
    cfg.validate()?;
    let d = instance.len();
    if stats.mean.len() != d || stats.std.len() != d || stats.feature_names.len() != d {
        return Err(ExplainError::Dimension(format!(
            "instance has {d} features, statistics cover {}",
            stats.std.len()
        )));
    }
    let width = cfg.kernel_width_for(d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut design = Vec::with_capacity(cfg.n_samples);
    let mut target = Vec::with_capacity(cfg.n_samples);
    let mut weight = Vec::with_capacity(cfg.n_samples);
    let mut confidence = [0.0; 2];
    for s in 0..cfg.n_samples {
        let z: Vec<f64> = if s == 0 {
            vec![0.0; d]
        } else {
            (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
        };
        let x: Vec<f64> = (0..d).map(|j| instance[j] + z[j] * stats.std[j]).collect();
        let p = probabilities(model, &x)?;
        if s == 0 {
            confidence = p;
        }
        let dist2: f64 = z.iter().map(|v| v * v).sum();
        weight.push((-dist2 / (width * width)).exp());
        target.push(p[Class::High.index()]);
        design.push(z);
    }

    let (coef, damped) = match solve_weighted_least_squares(&design, &target, &weight, 0.0) {
        Some(b) => (b, false),
        None => (
            solve_weighted_least_squares(&design, &target, &weight, RIDGE).ok_or(ExplainError::Singular)?,
            true,
        ),
    };
    let mut contributions: Vec<Contribution> = (0..d)
        .map(|j| Contribution {
            feature: stats.feature_names[j].clone(),
            value: instance[j],
            importance: coef[j + 1],
        })
        .collect();
    contributions.sort_by(|a, b| b.importance.abs().total_cmp(&a.importance.abs()));
    Ok(Explanation {
        instance_id: 0,
        predicted: predicted_class(&confidence),
        true_label: None,
        confidence,
        contributions,
        intercept: coef[0],
        damped,
    })
}

/// Explains the listed rows of `data`. Row `i` uses seed
/// `derive_index(cfg.seed, i)`; reported values are in raw units.
pub fn explain_rows<M: ProbaModel + ?Sized>(
    model: &M,
    data: &Dataset,
    rows: &[usize],
    stats: &DataStats,
    cfg: &LimeConfig,
    exec: Execution,
) -> Result<Vec<Explanation>, ExplainError> {
    cfg.validate()?;
    if let Some(&bad) = rows.iter().find(|&&i| i >= data.len()) {
        return Err(ExplainError::Dimension(format!("row {bad} is out of range")));
    }
    exec.try_map_range(rows.len(), |k| {
        let i = rows[k];
        let row = &data.rows()[i];
        let local = LimeConfig {
            seed: seed::derive_index(cfg.seed, i as u64),
            ..cfg.clone()
        };
        let mut e = lime_explain(model, row, stats, &local)?;
        let raw = data.scaled_with().map_or_else(|| row.clone(), |b| b.invert(row));
        for c in &mut e.contributions {
            let j = stats.feature_names.iter().position(|n| *n == c.feature).expect("known feature");
            c.value = raw[j];
        }
        e.instance_id = i;
        e.true_label = Some(data.labels()[i]);
        Ok(e)
    })
}

/// Mean signed and mean absolute local importance over every row, with
/// perturbation scales taken from `data`.
pub fn global_explain<M: ProbaModel + ?Sized>(
    model: &M,
    data: &Dataset,
    cfg: &LimeConfig,
    exec: Execution,
) -> Result<GlobalExplanation, ExplainError> {
    if data.is_empty() {
        return Err(ExplainError::EmptyData);
    }
    let stats = DataStats::of(data);
    let rows: Vec<usize> = (0..data.len()).collect();
    let local = explain_rows(model, data, &rows, &stats, cfg, exec)?;
    let n = local.len() as f64;
    let features = data
        .feature_names()
        .iter()
        .map(|f| {
            let imps: Vec<f64> = local.iter().map(|e| e.importance_of(f).expect("complete")).collect();
            GlobalImportance {
                feature: f.clone(),
                mean_importance: imps.iter().sum::<f64>() / n,
                mean_abs_importance: imps.iter().map(|v| v.abs()).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(GlobalExplanation {
        n_instances: local.len(),
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::sigmoid;

    fn stats(d: usize, std: f64) -> DataStats {
        DataStats {
            feature_names: (0..d).map(|j| format!("x{}", j + 1)).collect(),
            mean: vec![0.0; d],
            std: vec![std; d],
        }
    }

    fn logistic(c: Vec<f64>) -> impl Fn(&[f64]) -> Vec<f64> + Sync {
        move |x: &[f64]| {
            let p = sigmoid(x.iter().zip(&c).map(|(a, b)| a * b).sum());
            vec![1.0 - p, p]
        }
    }

    #[test]
    fn recovers_signs_and_order() {
        let model = logistic(vec![2.0, -3.0]);
        let e = lime_explain(&model, &[0.0, 0.0], &stats(2, 0.5), &LimeConfig::default()).unwrap();
        let (i1, i2) = (e.importance_of("x1").unwrap(), e.importance_of("x2").unwrap());
        assert!(i1 > 0.0 && i2 < 0.0);
        assert!(i2.abs() > i1.abs());
        assert_eq!(e.contributions[0].feature, "x2");
        assert_eq!(e.contributions.len(), 2);
        assert!((e.confidence[0] + e.confidence[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_model_has_no_importance() {
        let model = |_: &[f64]| vec![0.5, 0.5];
        let e = lime_explain(&model, &[1.0, 2.0, 3.0], &stats(3, 1.0), &LimeConfig::default()).unwrap();
        assert!(e.contributions.iter().all(|c| c.importance.abs() < 1e-3));
        assert!(!e.damped);
    }

    #[test]
    fn seeded_runs_agree() {
        let model = logistic(vec![1.0, 0.5, -0.2]);
        let cfg = LimeConfig { seed: 5, ..LimeConfig::default() };
        let a = lime_explain(&model, &[0.2, 0.1, 0.0], &stats(3, 1.0), &cfg).unwrap();
        let b = lime_explain(&model, &[0.2, 0.1, 0.0], &stats(3, 1.0), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn collinear_design_falls_back_to_ridge() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        let w = vec![1.0; 10];
        assert!(solve_weighted_least_squares(&x, &y, &w, 0.0).is_none());
        let b = solve_weighted_least_squares(&x, &y, &w, RIDGE).unwrap();
        assert!((b[1] - 1.0).abs() < 1e-3 && (b[2] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn exact_fit_on_linear_target() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + 0.5 * r[0] - 2.0 * r[1]).collect();
        let w: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        let b = solve_weighted_least_squares(&x, &y, &w, 0.0).unwrap();
        for (got, want) in b.iter().zip([1.0, 0.5, -2.0]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_models_and_settings() {
        let bad = |_: &[f64]| vec![0.7, 0.7];
        assert!(matches!(
            lime_explain(&bad, &[0.0], &stats(1, 1.0), &LimeConfig::default()),
            Err(ExplainError::NotProbabilities { .. })
        ));
        let three = |_: &[f64]| vec![0.2, 0.3, 0.5];
        assert!(matches!(
            lime_explain(&three, &[0.0], &stats(1, 1.0), &LimeConfig::default()),
            Err(ExplainError::Dimension(_))
        ));
        let ok = |_: &[f64]| vec![0.5, 0.5];
        let few = LimeConfig { n_samples: 10, ..LimeConfig::default() };
        assert!(matches!(lime_explain(&ok, &[0.0], &stats(1, 1.0), &few), Err(ExplainError::Config(_))));
        assert!(matches!(
            lime_explain(&ok, &[0.0, 1.0], &stats(1, 1.0), &LimeConfig::default()),
            Err(ExplainError::Dimension(_))
        ));
    }

    fn dataset(rows: Vec<Vec<f64>>) -> Dataset {
        let n = rows.len();
        let names = (0..rows[0].len()).map(|j| format!("x{}", j + 1)).collect();
        let labels = (0..n).map(|i| if i % 2 == 0 { Class::High } else { Class::Low }).collect();
        Dataset::new(names, rows, labels).unwrap()
    }

    #[test]
    fn ignored_feature_gets_nothing() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 5) as f64 / 4.0, (i % 3) as f64 / 2.0, (i % 7) as f64 / 6.0]).collect();
        let d = dataset(rows);
        let model = logistic(vec![0.8, 0.0, -0.6]);
        let g = global_explain(&model, &d, &LimeConfig::default(), Execution::default()).unwrap();
        assert_eq!(g.n_instances, 20);
        assert!(g.get("x2").unwrap().mean_abs_importance < 1e-3);
        assert!(g.get("x1").unwrap().mean_importance > 0.0);
        assert!(g.get("x3").unwrap().mean_importance < 0.0);
    }

    #[test]
    fn single_row_global_is_local() {
        let d = dataset(vec![vec![0.3, 0.9]]);
        let model = logistic(vec![1.0, -1.0]);
        let cfg = LimeConfig { seed: 4, ..LimeConfig::default() };
        let g = global_explain(&model, &d, &cfg, Execution::Sequential).unwrap();
        let local_cfg = LimeConfig { seed: seed::derive_index(4, 0), ..cfg };
        let e = lime_explain(&model, &[0.3, 0.9], &DataStats::of(&d), &local_cfg).unwrap();
        for gi in &g.features {
            assert_eq!(gi.mean_importance, e.importance_of(&gi.feature).unwrap());
        }
    }

    #[test]
    fn mirrored_features_match() {
        let mut rows = Vec::new();
        for i in 0..30 {
            let a = (i % 6) as f64 / 5.0;
            let b = (i * 7 % 11) as f64 / 10.0;
            rows.push(vec![a, b]);
            rows.push(vec![b, a]);
        }
        let d = dataset(rows);
        let model = |x: &[f64]| {
            let p = sigmoid(1.5 * x[0] + 1.5 * x[1] - 1.5);
            vec![1.0 - p, p]
        };
        let g = global_explain(&model, &d, &LimeConfig::default(), Execution::default()).unwrap();
        let (m1, m2) = (g.features[0].mean_abs_importance, g.features[1].mean_abs_importance);
        assert!((m1 - m2).abs() <= 0.05 * m1.max(m2), "{m1} vs {m2}");
    }

    #[test]
    fn parallel_matches_sequential() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0, (i % 4) as f64]).collect();
        let d = dataset(rows);
        let model = logistic(vec![1.0, -0.5]);
        let cfg = LimeConfig::default();
        assert_eq!(
            global_explain(&model, &d, &cfg, Execution::Sequential).unwrap(),
            global_explain(&model, &d, &cfg, Execution::Parallel).unwrap()
        );
    }
}
