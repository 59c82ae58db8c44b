use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::KbannError;
use crate::datakit::Dataset;
use crate::par::Execution;
use crate::seed;
use crate::tensornet::Network;

fn accuracy(net: &Network, rows: &[Vec<f64>], data: &Dataset) -> f64 {
    let hits = rows
        .iter()
        .zip(data.labels())
        .filter(|(x, y)| {
            let p = net.forward_unchecked(x).pop().expect("non-empty");
            let pred = usize::from(p[1] > p[0]);
            pred == y.index()
        })
        .count();
    hits as f64 / rows.len() as f64
}

/// Mean drop in accuracy over `repeats` seeded shuffles of one feature
/// column.
pub fn permutation_importance(
    net: &Network,
    data: &Dataset,
    feature: &str,
    repeats: usize,
    seed: u64,
) -> Result<f64, KbannError> {
    permutation_importance_with(net, data, feature, repeats, seed, Execution::default())
}

/// [`permutation_importance`] with an explicit schedule. Repeat `i` shuffles
/// with a seed derived from `(seed, i)`, so the result does not depend on
/// `exec`.
pub fn permutation_importance_with(
    net: &Network,
    data: &Dataset,
    feature: &str,
    repeats: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64, KbannError> {
    let j = data
        .feature_index(feature)
        .map_err(|_| KbannError::UnknownFeature(feature.to_string()))?;
    if repeats < 1 {
        return Err(KbannError::Config("repeats must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(KbannError::EmptyData);
    }
    if data.n_features() != net.input_dim() {
        return Err(KbannError::Dimension(format!(
            "{} features for a network with {} inputs",
            data.n_features(),
            net.input_dim()
        )));
    }
    let base = accuracy(net, data.rows(), data);
    let drops = exec.map_range(repeats, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_index(seed, i as u64));
        let mut column = data.column(j);
        column.shuffle(&mut rng);
        let rows: Vec<Vec<f64>> = data
            .rows()
            .iter()
            .zip(column)
            .map(|(r, v)| {
                let mut r = r.clone();
                r[j] = v;
                r
            })
            .collect();
        base - accuracy(net, &rows, data)
    });
    Ok(drops.iter().sum::<f64>() / repeats as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::Class;
    use crate::tensornet::{Activation, Layer, Matrix};

    fn indicator_net(weight: f64) -> Network {
        // High iff x0 > 0.5, ignoring x1
        let w = Matrix::from_rows(vec![vec![-weight, 0.0], vec![weight, 0.0]]);
        let layer = Layer::new(w, vec![weight / 2.0, -weight / 2.0], Activation::Softmax);
        Network::new(vec![layer], vec!["f".into(), "g".into()], Class::names(), None).unwrap()
    }

    fn separable(n: usize) -> Dataset {
        let rows = (0..n).map(|i| vec![(i % 2) as f64, (i % 3) as f64]).collect();
        let labels = (0..n).map(|i| if i % 2 == 1 { Class::High } else { Class::Low }).collect();
        Dataset::new(vec!["f".into(), "g".into()], rows, labels).unwrap()
    }

    #[test]
    fn ignored_feature_has_zero_importance() {
        let imp = permutation_importance(&indicator_net(10.0), &separable(40), "g", 5, 1).unwrap();
        assert_eq!(imp, 0.0);
    }

    #[test]
    fn indicator_importance_is_accuracy_minus_chance() {
        // a shuffled balanced column agrees with the label half the time
        let imp = permutation_importance(&indicator_net(10.0), &separable(2000), "f", 20, 4).unwrap();
        assert!((imp - 0.5).abs() < 0.03, "{imp}");
    }

    #[test]
    fn deterministic_across_schedules() {
        let (net, data) = (indicator_net(10.0), separable(101));
        let a = permutation_importance_with(&net, &data, "f", 5, 9, Execution::Sequential).unwrap();
        let b = permutation_importance_with(&net, &data, "f", 5, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, permutation_importance(&net, &data, "f", 5, 9).unwrap());
    }

    #[test]
    fn unknown_feature() {
        assert_eq!(
            permutation_importance(&indicator_net(1.0), &separable(4), "h", 1, 0),
            Err(KbannError::UnknownFeature("h".into()))
        );
    }
}
