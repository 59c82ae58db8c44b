//! Propositional Horn-clause knowledge.
//!
//! Rule files use a Prolog-like syntax:
//!
//! ```text
//! % computational thinking
//! Final_score :- CT_concepts, CT_skills.
//! CT_concepts :- Conditional, Loop.
//! CT_skills   :- Debug, Simulation, not Hitting_wall.
//! ```
//!
//! A [`RuleSet`] is always non-recursive and free of duplicate clauses. Heads
//! defined by several clauses are disjunctions; [`rewrite_disjuncts`] turns
//! them into single-clause intermediates plus an OR head, which is the form the
//! network compiler accepts.

mod parse;
pub mod random;
mod rewrite;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::parse_rules;
pub use rewrite::{disjunct_name, rewrite_disjuncts};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("clause for `{head}` has an empty body")]
    EmptyBody { head: String },
    #[error("duplicate clause `{0}`")]
    DuplicateClause(String),
    #[error("antecedent `{symbol}` appears more than once in a clause for `{head}`")]
    DuplicateAntecedent { head: String, symbol: String },
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("no truth value given for input `{0}`")]
    MissingInput(String),
}

/// A possibly negated reference to a feature or intermediate concept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub symbol: String,
    pub negated: bool,
}

impl Literal {
    pub fn positive(symbol: impl Into<String>) -> Self {
        Literal {
            symbol: symbol.into(),
            negated: false,
        }
    }

    pub fn negative(symbol: impl Into<String>) -> Self {
        Literal {
            symbol: symbol.into(),
            negated: true,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "not {}", self.symbol)
        } else {
            f.write_str(&self.symbol)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HornClause {
    pub head: String,
    pub body: Vec<Literal>,
}

impl HornClause {
    pub fn new(head: impl Into<String>, body: Vec<Literal>) -> Self {
        HornClause {
            head: head.into(),
            body,
        }
    }

    pub fn positive_count(&self) -> usize {
        self.body.iter().filter(|l| !l.negated).count()
    }

    fn body_key(&self) -> BTreeSet<&Literal> {
        self.body.iter().collect()
    }
}

impl fmt::Display for HornClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, lit) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{lit}")?;
        }
        f.write_str(".")
    }
}

/// How a head combines its defining clauses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    /// Exactly one clause: the head is the AND of its body.
    Conjunctive,
    /// The OR of single-literal clauses produced by disjunct rewriting.
    Disjunctive,
}

/// A validated, non-recursive set of Horn clauses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    clauses: Vec<HornClause>,
    roots: BTreeSet<String>,
    inputs: BTreeSet<String>,
    disjunctive: BTreeSet<String>,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl RuleSet {
    /// Validates `clauses` and derives roots and inputs. All heads start out
    /// conjunctive.
    pub fn from_clauses(clauses: Vec<HornClause>) -> Result<Self, RuleError> {
        Self::with_disjunctive(clauses, BTreeSet::new())
    }

    pub(crate) fn with_disjunctive(
        clauses: Vec<HornClause>,
        disjunctive: BTreeSet<String>,
    ) -> Result<Self, RuleError> {
        let mut seen: HashMap<&str, Vec<BTreeSet<&Literal>>> = HashMap::new();
        for clause in &clauses {
            if !is_identifier(&clause.head) {
                return Err(RuleError::InvalidIdentifier(clause.head.clone()));
            }
            if clause.body.is_empty() {
                return Err(RuleError::EmptyBody {
                    head: clause.head.clone(),
                });
            }
            let mut symbols = BTreeSet::new();
            for lit in &clause.body {
                if !is_identifier(&lit.symbol) {
                    return Err(RuleError::InvalidIdentifier(lit.symbol.clone()));
                }
                if lit.symbol == clause.head {
                    return Err(RuleError::Cycle(vec![
                        clause.head.clone(),
                        clause.head.clone(),
                    ]));
                }
                if !symbols.insert(lit.symbol.as_str()) {
                    return Err(RuleError::DuplicateAntecedent {
                        head: clause.head.clone(),
                        symbol: lit.symbol.clone(),
                    });
                }
            }
            let bodies = seen.entry(clause.head.as_str()).or_default();
            let key = clause.body_key();
            if bodies.contains(&key) {
                return Err(RuleError::DuplicateClause(clause.to_string()));
            }
            bodies.push(key);
        }

        let heads: BTreeSet<String> = clauses.iter().map(|c| c.head.clone()).collect();
        let used: BTreeSet<String> = clauses
            .iter()
            .flat_map(|c| c.body.iter().map(|l| l.symbol.clone()))
            .collect();
        let roots = heads.difference(&used).cloned().collect();
        let inputs = used.difference(&heads).cloned().collect();
        let disjunctive = disjunctive.intersection(&heads).cloned().collect();

        let set = RuleSet {
            clauses,
            roots,
            inputs,
            disjunctive,
        };
        set.check_acyclic()?;
        Ok(set)
    }

    pub fn clauses(&self) -> &[HornClause] {
        &self.clauses
    }

    /// Heads that are no clause's antecedent.
    pub fn roots(&self) -> &BTreeSet<String> {
        &self.roots
    }

    /// Antecedents that are no clause's head.
    pub fn inputs(&self) -> &BTreeSet<String> {
        &self.inputs
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Heads in order of first definition.
    pub fn heads(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.clauses
            .iter()
            .filter(|c| seen.insert(c.head.as_str()))
            .map(|c| c.head.as_str())
            .collect()
    }

    pub fn is_head(&self, symbol: &str) -> bool {
        self.clauses.iter().any(|c| c.head == symbol)
    }

    pub fn clauses_for<'a>(&'a self, head: &'a str) -> impl Iterator<Item = &'a HornClause> + 'a {
        self.clauses.iter().filter(move |c| c.head == head)
    }

    pub fn head_kind(&self, head: &str) -> HeadKind {
        if self.disjunctive.contains(head) {
            HeadKind::Disjunctive
        } else {
            HeadKind::Conjunctive
        }
    }

    /// True when some head still has several clauses that were not produced by
    /// [`rewrite_disjuncts`].
    pub fn has_disjuncts(&self) -> bool {
        self.heads()
            .into_iter()
            .any(|h| !self.disjunctive.contains(h) && self.clauses_for(h).nth(1).is_some())
    }

    /// Level of every symbol: inputs sit at 0 and each head one above its
    /// deepest antecedent.
    pub fn levels(&self) -> BTreeMap<String, usize> {
        let mut levels: BTreeMap<String, usize> =
            self.inputs.iter().map(|s| (s.clone(), 0)).collect();
        for head in self.topological_heads() {
            let level = self
                .clauses_for(head)
                .flat_map(|c| c.body.iter())
                .map(|l| levels[&l.symbol])
                .max()
                .unwrap_or(0)
                + 1;
            levels.insert(head.to_string(), level);
        }
        levels
    }

    /// Heads ordered so that every head follows all heads it depends on; ties
    /// keep first-definition order.
    pub fn topological_heads(&self) -> Vec<&str> {
        let heads = self.heads();
        let mut done: BTreeSet<&str> = BTreeSet::new();
        let mut order = Vec::with_capacity(heads.len());
        while order.len() < heads.len() {
            let before = order.len();
            for &h in &heads {
                if done.contains(h) {
                    continue;
                }
                let ready = self
                    .clauses_for(h)
                    .flat_map(|c| c.body.iter())
                    .all(|l| !self.is_head(&l.symbol) || done.contains(l.symbol.as_str()));
                if ready {
                    done.insert(h);
                    order.push(h);
                }
            }
            // acyclicity is checked at construction
            assert!(order.len() > before, "rule graph is cyclic");
        }
        order
    }

    fn check_acyclic(&self) -> Result<(), RuleError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        let mut graph: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for c in &self.clauses {
            let deps = graph.entry(c.head.as_str()).or_default();
            deps.extend(c.body.iter().map(|l| l.symbol.as_str()));
        }

        fn visit<'a>(
            node: &'a str,
            graph: &BTreeMap<&'a str, Vec<&'a str>>,
            marks: &mut HashMap<&'a str, Mark>,
            path: &mut Vec<&'a str>,
        ) -> Result<(), RuleError> {
            match marks.get(node) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Active) => {
                    let start = path.iter().position(|n| *n == node).unwrap_or(0);
                    let mut cycle: Vec<String> =
                        path[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(node.to_string());
                    return Err(RuleError::Cycle(cycle));
                }
                None => {}
            }
            marks.insert(node, Mark::Active);
            path.push(node);
            if let Some(deps) = graph.get(node) {
                for dep in deps {
                    visit(dep, graph, marks, path)?;
                }
            }
            path.pop();
            marks.insert(node, Mark::Done);
            Ok(())
        }

        let mut marks = HashMap::new();
        let mut path = Vec::new();
        for head in graph.keys() {
            visit(head, &graph, &mut marks, &mut path)?;
        }
        Ok(())
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for clause in &self.clauses {
            writeln!(f, "{clause}")?;
        }
        Ok(())
    }
}

/// Evaluates every head bottom-up under a truth assignment of the inputs.
///
/// A head is true iff at least one of its clauses has all positive antecedents
/// true and all negated antecedents false.
pub fn evaluate_boolean(
    rules: &RuleSet,
    assignment: &BTreeMap<String, bool>,
) -> Result<BTreeMap<String, bool>, RuleError> {
    let mut values: HashMap<&str, bool> = HashMap::new();
    for input in rules.inputs() {
        let v = assignment
            .get(input)
            .ok_or_else(|| RuleError::MissingInput(input.clone()))?;
        values.insert(input.as_str(), *v);
    }
    let mut out = BTreeMap::new();
    for head in rules.topological_heads() {
        let value = rules
            .clauses_for(head)
            .any(|c| c.body.iter().all(|l| values[l.symbol.as_str()] != l.negated));
        values.insert(head, value);
        out.insert(head.to_string(), value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CT_RULES: &str = "Final_score:- CT_concepts, CT_skills.\n\
                                     CT_concepts:- Conditional, Loop.\n\
                                     CT_skills:- Debug, Simulation, Function.";

    fn all_true(rules: &RuleSet) -> BTreeMap<String, bool> {
        rules.inputs().iter().map(|s| (s.clone(), true)).collect()
    }

    #[test]
    fn ct_rules_all_inputs_true() {
        let rules = parse_rules(CT_RULES).unwrap();
        let out = evaluate_boolean(&rules, &all_true(&rules)).unwrap();
        assert!(out["CT_concepts"]);
        assert!(out["CT_skills"]);
        assert!(out["Final_score"]);
    }

    #[test]
    fn ct_rules_loop_false() {
        let rules = parse_rules(CT_RULES).unwrap();
        let mut a = all_true(&rules);
        a.insert("Loop".into(), false);
        let out = evaluate_boolean(&rules, &a).unwrap();
        assert!(!out["CT_concepts"]);
        assert!(out["CT_skills"]);
        assert!(!out["Final_score"]);
    }

    #[test]
    fn single_clause_false_input() {
        let rules = parse_rules("C :- A.").unwrap();
        let a = BTreeMap::from([("A".to_string(), false)]);
        let out = evaluate_boolean(&rules, &a).unwrap();
        assert_eq!(out, BTreeMap::from([("C".to_string(), false)]));
    }

    #[test]
    fn negated_literal_semantics() {
        let rules = parse_rules("C :- A, not B.").unwrap();
        for (a, b, want) in [
            (false, false, false),
            (true, false, true),
            (false, true, false),
            (true, true, false),
        ] {
            let asg = BTreeMap::from([("A".to_string(), a), ("B".to_string(), b)]);
            assert_eq!(evaluate_boolean(&rules, &asg).unwrap()["C"], want);
        }
    }

    #[test]
    fn missing_input_is_an_error() {
        let rules = parse_rules("C :- A, B.").unwrap();
        let a = BTreeMap::from([("A".to_string(), true)]);
        assert_eq!(
            evaluate_boolean(&rules, &a),
            Err(RuleError::MissingInput("B".into()))
        );
    }

    #[test]
    fn levels_and_topological_order() {
        let rules = parse_rules(CT_RULES).unwrap();
        let levels = rules.levels();
        assert_eq!(levels["Loop"], 0);
        assert_eq!(levels["CT_concepts"], 1);
        assert_eq!(levels["CT_skills"], 1);
        assert_eq!(levels["Final_score"], 2);
        assert_eq!(
            rules.topological_heads(),
            vec!["CT_concepts", "CT_skills", "Final_score"]
        );
    }

    #[test]
    fn programmatic_self_reference_is_rejected() {
        let err = RuleSet::from_clauses(vec![HornClause::new("A", vec![Literal::positive("A")])]);
        assert!(matches!(err, Err(RuleError::Cycle(_))));
    }

    #[test]
    fn duplicate_antecedent_is_rejected() {
        let err = RuleSet::from_clauses(vec![HornClause::new(
            "A",
            vec![Literal::positive("B"), Literal::negative("B")],
        )]);
        assert!(matches!(err, Err(RuleError::DuplicateAntecedent { .. })));
    }
}
