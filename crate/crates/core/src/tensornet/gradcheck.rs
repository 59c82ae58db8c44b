use serde::{Deserialize, Serialize};

use super::train::{objective, objective_and_gradient};
use super::{Loss, NetError, Network, Samples};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameters compared (weights and biases).
    pub checked: usize,
    /// Zero weights skipped because the L1 term has a kink there.
    pub skipped_at_kink: usize,
}

/// Relative error `|a - n| / max(|a| + |n|, floor)`; the floor keeps tiny
/// gradients from amplifying rounding noise.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

/// Compares backprop gradients of the full objective (data loss plus L1/L2
/// terms) against central differences with step `epsilon`, for every weight
/// and bias.
pub fn numerical_gradient_check(
    net: &Network,
    batch: &Samples,
    loss: Loss,
    l1: f64,
    l2: f64,
    epsilon: f64,
) -> Result<GradCheckReport, NetError> {
    if !(epsilon > 0.0) {
        return Err(NetError::Config("epsilon must be positive".into()));
    }
    batch.check(net)?;
    let idx: Vec<usize> = (0..batch.len()).collect();
    let (_, grads) = objective_and_gradient(net, batch, &idx, loss, l1, l2);
    let mut probe = net.clone();
    let f = |n: &Network| objective(n, batch, &idx, loss, l1, l2);

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped_at_kink: 0,
    };
    for l in 0..net.layers().len() {
        let (rows, cols) = net.layers()[l].weights.shape();
        for r in 0..rows {
            for c in 0..cols {
                let w = *net.layers()[l].weights.get(r, c);
                let frozen = net.layers()[l].is_frozen(r, c);
                if l1 > 0.0 && w == 0.0 && !frozen {
                    report.skipped_at_kink += 1;
                    continue;
                }
                probe.layers_mut()[l].weights.set(r, c, w + epsilon);
                let up = f(&probe);
                probe.layers_mut()[l].weights.set(r, c, w - epsilon);
                let down = f(&probe);
                probe.layers_mut()[l].weights.set(r, c, w);
                let numeric = (up - down) / (2.0 * epsilon);
                let err = relative_error(*grads.weights[l].get(r, c), numeric);
                report.max_relative_error = report.max_relative_error.max(err);
                report.checked += 1;
            }
            let b = net.layers()[l].biases[r];
            probe.layers_mut()[l].biases[r] = b + epsilon;
            let up = f(&probe);
            probe.layers_mut()[l].biases[r] = b - epsilon;
            let down = f(&probe);
            probe.layers_mut()[l].biases[r] = b;
            let numeric = (up - down) / (2.0 * epsilon);
            let err = relative_error(grads.biases[l][r], numeric);
            report.max_relative_error = report.max_relative_error.max(err);
            report.checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::{build_dense, build_mlp, Activation, Layer, Matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, d_in: usize, d_out: usize, one_hot: bool) -> Samples {
        let inputs = (0..n)
            .map(|_| (0..d_in).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets = (0..n)
            .map(|_| {
                if one_hot {
                    let k = rng.random_range(0..d_out);
                    (0..d_out).map(|j| if j == k { 1.0 } else { 0.0 }).collect()
                } else {
                    (0..d_out).map(|_| rng.random_range(0.0..1.0)).collect()
                }
            })
            .collect();
        Samples::new(inputs, targets).unwrap()
    }

    #[test]
    fn small_mlp_matches_finite_differences() {
        let net = build_mlp(3, &[4], 2, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = random_batch(&mut rng, 8, 3, 2, true);
        let report = numerical_gradient_check(&net, &batch, Loss::CrossEntropy, 0.0, 0.0, 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
        assert_eq!(report.checked, net.parameter_count());
    }

    #[test]
    fn zero_weights_are_skipped_under_l1() {
        let mut net = build_dense(3, &[(4, Activation::Sigmoid), (2, Activation::Softmax)], 2).unwrap();
        for layer in net.layers_mut() {
            layer.weights.as_mut_slice().fill(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch = random_batch(&mut rng, 5, 3, 2, true);
        let report = numerical_gradient_check(&net, &batch, Loss::CrossEntropy, 1.0, 1.0, 1e-5).unwrap();
        assert_eq!(report.skipped_at_kink, 3 * 4 + 4 * 2);
        assert_eq!(report.checked, 4 + 2);
        assert!(report.max_relative_error < 1e-4);
    }

    #[test]
    fn linear_unit_matches_closed_form() {
        let (w, x, y) = (0.7, 1.3, 2.0);
        let layer = Layer::new(Matrix::filled(1, 1, w), vec![0.0], Activation::Linear);
        let net = Network::new(vec![layer], vec!["x".into()], vec!["y".into()], None).unwrap();
        let batch = Samples::new(vec![vec![x]], vec![vec![y]]).unwrap();
        let (_, grads) = objective_and_gradient(&net, &batch, &[0], Loss::MeanSquaredError, 0.0, 0.0);
        let closed = 2.0 * x * (w * x - y);
        assert!((grads.weights[0].get(0, 0) - closed).abs() < 1e-12);
        let eps = 1e-5;
        let f = |w: f64| (w * x - y) * (w * x - y);
        let numeric = (f(w + eps) - f(w - eps)) / (2.0 * eps);
        assert!((closed - numeric).abs() < 1e-6);
        let report = numerical_gradient_check(&net, &batch, Loss::MeanSquaredError, 0.0, 0.0, eps).unwrap();
        assert!(report.max_relative_error < 1e-6);
    }

    #[test]
    fn every_activation_and_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let hidden = [Activation::Relu, Activation::Sigmoid, Activation::Linear];
        for (i, act) in hidden.into_iter().enumerate() {
            for (loss, out) in [
                (Loss::CrossEntropy, Activation::Softmax),
                (Loss::CrossEntropy, Activation::Sigmoid),
                (Loss::MeanSquaredError, Activation::Linear),
                (Loss::MeanSquaredError, Activation::Softmax),
            ] {
                for (l1, l2) in [(0.0, 0.0), (1.0, 1.0)] {
                    let net = build_dense(4, &[(5, act), (3, out)], i as u64 + 100).unwrap();
                    let batch = random_batch(&mut rng, 6, 4, 3, loss == Loss::CrossEntropy);
                    let report = numerical_gradient_check(&net, &batch, loss, l1, l2, 1e-5).unwrap();
                    assert!(
                        report.max_relative_error < 1e-4,
                        "{act:?}/{out:?}/{loss:?}/{l1}: {report:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let net = build_mlp(2, &[2], 2, 0).unwrap();
        let batch = Samples::one_hot(vec![vec![0.0, 1.0]], &[1], 2).unwrap();
        assert!(numerical_gradient_check(&net, &batch, Loss::CrossEntropy, 0.0, 0.0, 0.0).is_err());
    }
}
