use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::datakit::{pearson, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub r: f64,
    /// The feature (or the label) is constant; `r` is reported as 0.
    pub constant: bool,
}

/// Pearson r of each feature with the label (Low = 0, High = 1), one column
/// per named dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub datasets: Vec<String>,
    pub features: Vec<String>,
    /// `cells[feature][dataset]`.
    pub cells: Vec<Vec<CorrelationCell>>,
}

impl CorrelationTable {
    pub fn get(&self, feature: &str, dataset: &str) -> Option<CorrelationCell> {
        let f = self.features.iter().position(|x| x == feature)?;
        let d = self.datasets.iter().position(|x| x == dataset)?;
        Some(self.cells[f][d])
    }
}

pub fn correlation_table(datasets: &[(&str, &Dataset)]) -> Result<CorrelationTable, EvalError> {
    let Some((_, first)) = datasets.first() else {
        return Err(EvalError::Empty);
    };
    let features = first.feature_names().to_vec();
    if let Some((name, _)) = datasets.iter().find(|(_, d)| d.feature_names() != features) {
        return Err(EvalError::Schema(format!("`{name}` has different feature columns")));
    }
    let labels: Vec<Vec<f64>> = datasets.iter().map(|(_, d)| d.label_indicator()).collect();
    let cells = (0..features.len())
        .map(|j| {
            datasets
                .iter()
                .zip(&labels)
                .map(|((_, d), y)| match pearson(&d.column(j), y) {
                    Some(r) => CorrelationCell { r, constant: false },
                    None => CorrelationCell { r: 0.0, constant: true },
                })
                .collect()
        })
        .collect();
    Ok(CorrelationTable {
        datasets: datasets.iter().map(|(n, _)| n.to_string()).collect(),
        features,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{generate_synthetic, Class, SynthConfig};

    #[test]
    fn label_copy_negation_and_constant() {
        let labels = vec![Class::High, Class::Low, Class::High, Class::Low, Class::Low];
        let rows = labels
            .iter()
            .map(|c| {
                let y = c.index() as f64;
                vec![y, 1.0 - y, 4.0]
            })
            .collect();
        let d = Dataset::new(vec!["same".into(), "neg".into(), "flat".into()], rows, labels).unwrap();
        let t = correlation_table(&[("d", &d)]).unwrap();
        assert!((t.get("same", "d").unwrap().r - 1.0).abs() < 1e-12);
        assert!((t.get("neg", "d").unwrap().r + 1.0).abs() < 1e-12);
        assert_eq!(t.get("flat", "d").unwrap(), CorrelationCell { r: 0.0, constant: true });
    }

    #[test]
    fn synthetic_train_hits_target() {
        let s = generate_synthetic(&SynthConfig::default()).unwrap();
        let t = correlation_table(&[("train", &s.train), ("test", &s.test)]).unwrap();
        assert!((t.get("Small_cheese", "train").unwrap().r - 0.887).abs() < 0.03);
        assert_eq!(t.datasets, vec!["train", "test"]);
    }

    #[test]
    fn schema_mismatch() {
        let a = Dataset::new(vec!["a".into()], vec![vec![1.0]], vec![Class::Low]).unwrap();
        let b = Dataset::new(vec!["b".into()], vec![vec![1.0]], vec![Class::Low]).unwrap();
        assert!(matches!(correlation_table(&[("a", &a), ("b", &b)]), Err(EvalError::Schema(_))));
    }
}
