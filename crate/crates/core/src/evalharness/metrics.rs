use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::datakit::{Class, Dataset};
use crate::tensornet::{NetError, Network};

/// Classification metrics. Ratios with an empty denominator are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub recall: BTreeMap<Class, Option<f64>>,
    pub precision: BTreeMap<Class, Option<f64>>,
    /// `confusion[truth][predicted]`, indexed by [`Class::index`].
    pub confusion: [[usize; 2]; 2],
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(predictions: &[Class], truth: &[Class]) -> Result<Metrics, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::Length {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut confusion = [[0usize; 2]; 2];
    for (p, t) in predictions.iter().zip(truth) {
        confusion[t.index()][p.index()] += 1;
    }
    let n = truth.len();
    let mut recall = BTreeMap::new();
    let mut precision = BTreeMap::new();
    for c in Class::ALL {
        let i = c.index();
        let hits = confusion[i][i];
        recall.insert(c, ratio(hits, confusion[i][0] + confusion[i][1]));
        precision.insert(c, ratio(hits, confusion[0][i] + confusion[1][i]));
    }
    Ok(Metrics {
        n,
        accuracy: (confusion[0][0] + confusion[1][1]) as f64 / n as f64,
        recall,
        precision,
        confusion,
    })
}

/// Argmax class per row; ties go to `Low`.
pub fn predict_classes(net: &Network, data: &Dataset) -> Result<Vec<Class>, NetError> {
    data.rows()
        .iter()
        .map(|x| {
            let p = net.predict(x)?;
            Ok(if p[1] > p[0] { Class::High } else { Class::Low })
        })
        .collect()
}

pub fn evaluate(net: &Network, data: &Dataset) -> Result<Metrics, EvalError> {
    let pred = predict_classes(net, data)?;
    compute_metrics(&pred, data.labels())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Class::{High, Low};

    #[test]
    fn perfect() {
        let t = [High, High, High, Low, Low];
        let m = compute_metrics(&t, &t).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(m.recall.values().chain(m.precision.values()).all(|v| *v == Some(1.0)));
        assert_eq!(m.confusion, [[2, 0], [0, 3]]);
    }

    #[test]
    fn all_high_leaves_low_precision_undefined() {
        let m = compute_metrics(&[High, High], &[High, Low]).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.recall[&High], Some(1.0));
        assert_eq!(m.recall[&Low], Some(0.0));
        assert_eq!(m.precision[&Low], None);
        assert_eq!(m.precision[&High], Some(0.5));
    }

    #[test]
    fn hand_computed() {
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for (t, p, n) in [(High, High, 86), (High, Low, 14), (Low, High, 5), (Low, Low, 95)] {
            pred.extend(std::iter::repeat_n(p, n));
            truth.extend(std::iter::repeat_n(t, n));
        }
        let m = compute_metrics(&pred, &truth).unwrap();
        assert_eq!(m.accuracy, 181.0 / 200.0);
        assert_eq!(m.recall[&High], Some(86.0 / 100.0));
        assert_eq!(m.precision[&High], Some(86.0 / 91.0));
        assert_eq!(m.recall[&Low], Some(95.0 / 100.0));
        assert_eq!(m.precision[&Low], Some(95.0 / 109.0));
    }

    #[test]
    fn errors() {
        assert_eq!(
            compute_metrics(&[High], &[]),
            Err(EvalError::Length { predictions: 1, truth: 0 })
        );
        assert_eq!(compute_metrics(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn json_keeps_absent_precision() {
        let m = compute_metrics(&[High, High], &[High, Low]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"Low\":null"));
        assert_eq!(serde_json::from_str::<Metrics>(&s).unwrap(), m);
    }
}
