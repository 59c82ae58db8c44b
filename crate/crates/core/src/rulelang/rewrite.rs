use std::collections::BTreeSet;

use super::{HornClause, Literal, RuleError, RuleSet};

/// Name of the `index`-th (1-based) disjunct intermediate of `head`.
pub fn disjunct_name(head: &str, index: usize) -> String {
    format!("{head}__d{index}")
}

pub(crate) fn has_reserved_suffix(ident: &str) -> bool {
    match ident.rfind("__d") {
        Some(pos) => {
            let digits = &ident[pos + 3..];
            !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

/// Eliminates disjuncts.
///
/// Every head with `k > 1` defining clauses becomes `k` fresh intermediates
/// `<head>__d1..__dk` (one per original body) plus `k` single-antecedent
/// clauses `<head> :- <head>__di`, and the head is marked disjunctive. The new
/// clauses take the position of the head's first clause. Heads already marked
/// disjunctive are left alone, which makes the rewrite idempotent.
pub fn rewrite_disjuncts(rules: &RuleSet) -> Result<RuleSet, RuleError> {
    let mut disjunctive = rules.disjunctive.clone();
    let to_split: BTreeSet<&str> = rules
        .heads()
        .into_iter()
        .filter(|h| !disjunctive.contains(*h) && rules.clauses_for(h).nth(1).is_some())
        .collect();
    if to_split.is_empty() {
        return Ok(rules.clone());
    }

    let mut emitted: BTreeSet<&str> = BTreeSet::new();
    let mut clauses = Vec::with_capacity(rules.clauses.len() * 2);
    for clause in &rules.clauses {
        let head = clause.head.as_str();
        if !to_split.contains(head) {
            clauses.push(clause.clone());
            continue;
        }
        if !emitted.insert(head) {
            continue;
        }
        let bodies: Vec<&Vec<Literal>> = rules.clauses_for(head).map(|c| &c.body).collect();
        for i in 1..=bodies.len() {
            clauses.push(HornClause::new(
                head,
                vec![Literal::positive(disjunct_name(head, i))],
            ));
        }
        for (i, body) in bodies.into_iter().enumerate() {
            clauses.push(HornClause::new(disjunct_name(head, i + 1), body.clone()));
        }
        disjunctive.insert(head.to_string());
    }
    RuleSet::with_disjunctive(clauses, disjunctive)
}
