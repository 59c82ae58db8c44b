use std::collections::{BTreeMap, HashMap};

use super::{is_free_head, relay_symbol};
use crate::rulelang::{evaluate_boolean, rewrite_disjuncts, RuleSet};
use crate::tensornet::Network;

pub const ACTIVATION_HIGH: f64 = 0.85;
pub const ACTIVATION_LOW: f64 = 0.15;

/// Sweeps every boolean assignment of the rule inputs (other features held
/// at 0) and checks that each rule-labelled hidden unit, relays included, is
/// above `activation_high` when the rules make its symbol true and below
/// `activation_low` when false.
///
/// Returns false if the network is unlabeled or lacks a unit for some head.
pub fn verify_compiled_logic(net: &Network, rules: &RuleSet, activation_high: f64, activation_low: f64) -> bool {
    let Ok(rules) = rewrite_disjuncts(rules) else {
        return false;
    };
    if rules.is_empty() {
        return true;
    }
    let Some(labels) = net.unit_labels() else {
        return false;
    };
    let hidden = &labels[..labels.len() - 1];

    // (layer, unit, symbol) for every unit that should follow a symbol
    let mut checks: Vec<(usize, usize, String)> = Vec::new();
    for (l, layer_labels) in hidden.iter().enumerate() {
        for (u, label) in layer_labels.iter().enumerate() {
            if is_free_head(label) {
                continue;
            }
            let symbol = relay_symbol(label).unwrap_or(label);
            if rules.is_head(symbol) || rules.inputs().contains(symbol) {
                checks.push((l, u, symbol.to_string()));
            }
        }
    }
    if rules
        .heads()
        .iter()
        .any(|h| !checks.iter().any(|(_, _, s)| s == h))
    {
        return false;
    }

    let position: HashMap<&str, usize> = net
        .input_names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let inputs: Vec<&String> = rules.inputs().iter().collect();
    let mut columns = Vec::with_capacity(inputs.len());
    for s in &inputs {
        match position.get(s.as_str()) {
            Some(&c) => columns.push(c),
            None => return false,
        }
    }

    for mask in 0u64..(1u64 << inputs.len()) {
        let mut x = vec![0.0; net.input_dim()];
        let mut assignment = BTreeMap::new();
        for (bit, (symbol, &c)) in inputs.iter().zip(&columns).enumerate() {
            let on = mask >> bit & 1 == 1;
            x[c] = if on { 1.0 } else { 0.0 };
            assignment.insert((*symbol).clone(), on);
        }
        let Ok(truth) = evaluate_boolean(&rules, &assignment) else {
            return false;
        };
        let acts = match net.forward(&x) {
            Ok(a) => a,
            Err(_) => return false,
        };
        for (l, u, symbol) in &checks {
            let expected = truth.get(symbol).or(assignment.get(symbol)).copied().unwrap_or(false);
            let a = acts[*l][*u];
            let ok = if expected { a > activation_high } else { a < activation_low };
            if !ok {
                return false;
            }
        }
    }
    true
}
