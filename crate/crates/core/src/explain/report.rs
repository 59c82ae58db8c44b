use std::io::Write;

use serde::{Deserialize, Serialize};

use super::lime::{explain_rows, predicted_class, probabilities};
use super::{Contribution, DataStats, ExplainError, Explanation, LimeConfig, ProbaModel};
use crate::datakit::{Class, DataError, Dataset};
use crate::par::Execution;

/// A misclassified row with its features split by whether they push towards
/// the predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misprediction {
    pub explanation: Explanation,
    pub supporting: Vec<Contribution>,
    pub contradicting: Vec<Contribution>,
}

impl Misprediction {
    fn new(explanation: Explanation) -> Misprediction {
        let toward = |c: &&Contribution| match explanation.predicted {
            Class::High => c.importance > 0.0,
            Class::Low => c.importance < 0.0,
        };
        let supporting = explanation.contributions.iter().filter(toward).cloned().collect();
        let contradicting = explanation
            .contributions
            .iter()
            .filter(|c| c.importance != 0.0 && !toward(c))
            .cloned()
            .collect();
        Misprediction {
            explanation,
            supporting,
            contradicting,
        }
    }
}

/// Explains every row whose argmax prediction differs from its label.
pub fn misprediction_report<M: ProbaModel + ?Sized>(
    model: &M,
    data: &Dataset,
    cfg: &LimeConfig,
    exec: Execution,
) -> Result<Vec<Misprediction>, ExplainError> {
    let mut wrong = Vec::new();
    for (i, (row, label)) in data.rows().iter().zip(data.labels()).enumerate() {
        if predicted_class(&probabilities(model, row)?) != *label {
            wrong.push(i);
        }
    }
    if wrong.is_empty() {
        return Ok(Vec::new());
    }
    let stats = DataStats::of(data);
    let explanations = explain_rows(model, data, &wrong, &stats, cfg, exec)?;
    Ok(explanations.into_iter().map(Misprediction::new).collect())
}

fn joined(items: &[Contribution]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

const COLUMNS: [&str; 6] = ["row", "true", "predicted", "confidence (Low, High)", "supporting", "contradicting"];

fn fields(m: &Misprediction) -> [String; 6] {
    let e = &m.explanation;
    [
        e.instance_id.to_string(),
        e.true_label.map_or_else(String::new, |c| c.to_string()),
        e.predicted.to_string(),
        format!("({:.3}, {:.3})", e.confidence[0], e.confidence[1]),
        joined(&m.supporting),
        joined(&m.contradicting),
    ]
}

/// Tab-separated rendering, one misprediction per line.
pub fn misprediction_table(reports: &[Misprediction]) -> String {
    let mut out = COLUMNS.join("\t");
    out.push('\n');
    for m in reports {
        out.push_str(&fields(m).join("\t"));
        out.push('\n');
    }
    out
}

pub fn write_misprediction_csv<W: Write>(reports: &[Misprediction], writer: W) -> Result<(), DataError> {
    let err = |e: csv::Error| DataError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS).map_err(err)?;
    for m in reports {
        w.write_record(fields(m)).map_err(err)?;
    }
    w.flush().map_err(|e| DataError::Csv(e.to_string()))
}
