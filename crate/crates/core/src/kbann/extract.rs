use std::fmt;

use serde::{Deserialize, Serialize};

use super::KbannError;
use crate::datakit::Dataset;
use crate::tensornet::Network;

/// One weighted group of antecedents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: f64,
    pub antecedents: Vec<String>,
}

/// `head` fires when `Σ weight · Σ antecedents > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRule {
    pub head: String,
    pub threshold: f64,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRuleSet {
    /// Top hidden level first, output units last.
    pub rules: Vec<ExtractedRule>,
    /// Fraction of rows where the rule system picks the network's class.
    pub fidelity: f64,
}

impl ExtractedRuleSet {
    pub fn get(&self, head: &str) -> Option<&ExtractedRule> {
        self.rules.iter().find(|r| r.head == head)
    }

    /// Every antecedent mentioned by any rule.
    pub fn antecedents(&self) -> impl Iterator<Item = &str> {
        self.rules
            .iter()
            .flat_map(|r| r.terms.iter())
            .flat_map(|t| t.antecedents.iter().map(String::as_str))
    }
}

/// Shortest single-precision rendering, the way trained weights are usually
/// printed.
fn short(x: f64) -> String {
    format!("{}", x as f32)
}

impl fmt::Display for ExtractedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ", self.head, short(self.threshold))?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{} * ({})", short(t.weight), t.antecedents.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Display for ExtractedRuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        writeln!(f, "% fidelity {:.4}", self.fidelity)
    }
}

/// Clusters `(weight, source)` pairs: after sorting by weight, a new group
/// starts when the sign changes or the weight differs from the group's first
/// member by more than `tolerance` relative to the larger magnitude.
/// Returns `(mean weight, sources)` ordered by descending magnitude.
pub(crate) fn group_weights(weights: &[(f64, usize)], tolerance: f64) -> Vec<(f64, Vec<usize>)> {
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut groups: Vec<Vec<(f64, usize)>> = Vec::new();
    for (w, src) in sorted {
        let fits = groups.last().is_some_and(|g| {
            let first = g[0].0;
            first.signum() == w.signum()
                && (first == 0.0) == (w == 0.0)
                && (w - first).abs() <= tolerance * w.abs().max(first.abs())
        });
        if fits {
            groups.last_mut().expect("non-empty").push((w, src));
        } else {
            groups.push(vec![(w, src)]);
        }
    }
    let mut out: Vec<(f64, Vec<usize>)> = groups
        .into_iter()
        .map(|g| {
            let mean = g.iter().map(|(w, _)| w).sum::<f64>() / g.len() as f64;
            let mut sources: Vec<usize> = g.into_iter().map(|(_, s)| s).collect();
            sources.sort_unstable();
            (mean, sources)
        })
        .collect();
    out.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()).then(a.1[0].cmp(&b.1[0])));
    out
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

/// Threshold and (weight, source units) groups of one unit.
type GroupedUnit = (f64, Vec<(f64, Vec<usize>)>);

/// Reads one threshold rule per hidden and output unit off a labelled
/// network and measures how often the rules reproduce the network's class on
/// `data` (rows already scaled the way the network expects).
///
/// During replay inputs keep their real values, hidden rules output 1 when
/// their weighted sum exceeds the threshold and 0 otherwise, and the class
/// is the output rule with the largest margin.
pub fn extract_rules(net: &Network, data: &Dataset, group_tolerance: f64) -> Result<ExtractedRuleSet, KbannError> {
    let labels = net.unit_labels().ok_or(KbannError::Unlabeled)?;
    if data.is_empty() {
        return Err(KbannError::EmptyData);
    }
    if data.feature_names() != net.input_names() {
        return Err(KbannError::Dimension(format!(
            "dataset columns {:?} differ from network inputs {:?}",
            data.feature_names(),
            net.input_names()
        )));
    }
    if !(group_tolerance >= 0.0) {
        return Err(KbannError::Config("group_tolerance must be non-negative".into()));
    }

    // per layer: (threshold, groups) for each unit
    let mut grouped: Vec<Vec<GroupedUnit>> = Vec::new();
    for layer in net.layers() {
        let units = (0..layer.out_units())
            .map(|r| {
                let ws: Vec<(f64, usize)> = layer.weights.row(r).iter().copied().zip(0..).collect();
                (-layer.biases[r], group_weights(&ws, group_tolerance))
            })
            .collect();
        grouped.push(units);
    }

    let n_layers = grouped.len();
    let mut agree = 0usize;
    for row in data.rows() {
        let mut acts = row.clone();
        for (l, units) in grouped.iter().enumerate() {
            let margins: Vec<f64> = units
                .iter()
                .map(|(threshold, groups)| {
                    groups
                        .iter()
                        .map(|(w, srcs)| w * srcs.iter().map(|&s| acts[s]).sum::<f64>())
                        .sum::<f64>()
                        - threshold
                })
                .collect();
            acts = if l + 1 == n_layers {
                margins
            } else {
                margins.iter().map(|m| if *m > 0.0 { 1.0 } else { 0.0 }).collect()
            };
        }
        let predicted = net.forward_unchecked(row).pop().expect("non-empty");
        if argmax(&acts) == argmax(&predicted) {
            agree += 1;
        }
    }

    let mut rules = Vec::new();
    let mut order: Vec<usize> = (0..n_layers - 1).rev().collect();
    order.push(n_layers - 1);
    for l in order {
        let sources: &[String] = if l == 0 { net.input_names() } else { &labels[l - 1] };
        for (u, (threshold, groups)) in grouped[l].iter().enumerate() {
            rules.push(ExtractedRule {
                head: labels[l][u].clone(),
                threshold: *threshold,
                terms: groups
                    .iter()
                    .map(|(w, srcs)| Term {
                        weight: *w,
                        antecedents: srcs.iter().map(|&s| sources[s].clone()).collect(),
                    })
                    .collect(),
            });
        }
    }
    Ok(ExtractedRuleSet {
        rules,
        fidelity: agree as f64 / data.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{Class, FEATURES};
    use crate::kbann::{compile, CompileConfig};
    use crate::rulelang::parse_rules;
    use crate::tensornet::{Activation, Layer, Matrix};

    const CT_RULES: &str = "Final_score:- CT_concepts, CT_skills.\n\
        CT_concepts:- Conditional, Loop.\n\
        CT_skills:- Debug, Simulation, Function.\n";

    fn features() -> Vec<String> {
        FEATURES.iter().map(|s| s.to_string()).collect()
    }

    fn boolean_data(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..9).map(|j| ((i >> (j % 6)) & 1) as f64).collect())
            .collect();
        let labels = (0..n).map(|i| if i % 3 == 0 { Class::Low } else { Class::High }).collect();
        Dataset::new(features(), rows, labels).unwrap()
    }

    #[test]
    fn grouping_by_relative_magnitude() {
        let groups = group_weights(&[(2.0, 0), (2.01, 1), (-0.4, 2)], 0.1);
        assert_eq!(groups.len(), 2);
        assert!((groups[0].0 - 2.005).abs() < 1e-12);
        assert_eq!(groups[0].1, vec![0, 1]);
        assert_eq!(groups[1], (-0.4, vec![2]));
    }

    #[test]
    fn signs_never_share_a_group() {
        let groups = group_weights(&[(1e-9, 0), (-1e-9, 1), (0.0, 2)], 1.0);
        assert_eq!(groups.len(), 3);
    }

    #[test]
    fn single_weight_unit() {
        let layer = Layer::new(Matrix::filled(2, 1, 0.7), vec![0.3, -0.2], Activation::Softmax);
        let net = Network::new(
            vec![layer],
            vec!["u".into()],
            Class::names(),
            Some(vec![Class::names()]),
        )
        .unwrap();
        let data = Dataset::new(vec!["u".into()], vec![vec![1.0]], vec![Class::High]).unwrap();
        let rules = extract_rules(&net, &data, 0.1).unwrap();
        let high = rules.get("High").unwrap();
        assert_eq!(high.threshold, 0.2);
        assert_eq!(high.terms, vec![Term { weight: 0.7, antecedents: vec!["u".into()] }]);
    }

    #[test]
    fn compiled_ct_rules_restates_the_rules() {
        let rules = parse_rules(CT_RULES).unwrap();
        let cfg = CompileConfig {
            perturb_scale: 0.0,
            ..CompileConfig::default()
        };
        let omega = cfg.omega;
        let net = compile(&rules, &features(), &Class::names(), &cfg).unwrap();
        let extracted = extract_rules(&net, &boolean_data(64), 0.1).unwrap();
        assert_eq!(extracted.rules[0].head, "Final_score");
        let root = extracted.get("Final_score").unwrap();
        assert_eq!(root.terms[0].weight, omega);
        assert_eq!(root.terms[0].antecedents, vec!["CT_concepts", "CT_skills"]);
        assert_eq!(root.threshold, 1.5 * omega);
        let skills = extracted.get("CT_skills").unwrap();
        assert_eq!(skills.terms[0].antecedents, vec!["Function", "Debug", "Simulation"]);
        assert_eq!(skills.threshold, 2.5 * omega);
        assert_eq!(extracted.rules.last().unwrap().head, "High");
        assert_eq!(extracted.fidelity, 1.0);
        for f in FEATURES {
            assert!(extracted.antecedents().any(|a| a == f), "{f} missing");
        }
        let text = extracted.to_string();
        assert!(text.starts_with("Final_score: 12 8 * (CT_concepts,CT_skills) + 0 * ("), "{text}");
    }

    #[test]
    fn json_round_trip() {
        let rules = parse_rules(CT_RULES).unwrap();
        let net = compile(&rules, &features(), &Class::names(), &CompileConfig::default()).unwrap();
        let extracted = extract_rules(&net, &boolean_data(10), 0.1).unwrap();
        let json = serde_json::to_string(&extracted).unwrap();
        assert_eq!(serde_json::from_str::<ExtractedRuleSet>(&json).unwrap(), extracted);
    }

    #[test]
    fn errors() {
        let mlp = crate::tensornet::build_mlp(9, &[4], 2, 0).unwrap();
        assert_eq!(extract_rules(&mlp, &boolean_data(4), 0.1), Err(KbannError::Unlabeled));
        let rules = parse_rules(CT_RULES).unwrap();
        let net = compile(&rules, &features(), &Class::names(), &CompileConfig::default()).unwrap();
        let empty = Dataset::new(features(), vec![], vec![]).unwrap();
        assert_eq!(extract_rules(&net, &empty, 0.1), Err(KbannError::EmptyData));
    }
}
