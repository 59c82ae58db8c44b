//! Random non-recursive rule sets for property tests and benchmarks.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::{HornClause, Literal, RuleSet};

/// Shape of generated rule sets.
#[derive(Debug, Clone)]
pub struct RandomRules {
    pub max_inputs: usize,
    pub max_levels: usize,
    pub max_heads_per_level: usize,
    pub max_body: usize,
    pub negation_probability: f64,
    /// Chance that a head receives a second defining clause.
    pub disjunct_probability: f64,
}

impl Default for RandomRules {
    fn default() -> Self {
        RandomRules {
            max_inputs: 10,
            max_levels: 3,
            max_heads_per_level: 3,
            max_body: 4,
            negation_probability: 0.2,
            disjunct_probability: 0.0,
        }
    }
}

/// Input symbol names used by the generator.
pub fn input_name(i: usize) -> String {
    format!("x{i}")
}

/// Generates a rule set with exactly one root. Every head at level `l` has at
/// least one antecedent at level `l - 1` in each of its clauses, so the root
/// sits at the drawn number of levels.
pub fn random_rule_set<R: Rng>(rng: &mut R, cfg: &RandomRules) -> RuleSet {
    let n_inputs = rng.random_range(2..=cfg.max_inputs.max(2));
    let n_levels = rng.random_range(1..=cfg.max_levels.max(1));

    // symbols per level; level 0 holds the candidate inputs
    let mut by_level: Vec<Vec<String>> = vec![(0..n_inputs).map(input_name).collect()];
    for level in 1..=n_levels {
        let count = if level == n_levels {
            1
        } else {
            rng.random_range(1..=cfg.max_heads_per_level.max(1))
        };
        by_level.push((0..count).map(|i| format!("h{level}_{i}")).collect());
    }

    let mut clauses: Vec<HornClause> = Vec::new();
    for level in 1..=n_levels {
        let below: Vec<String> = by_level[..level].iter().flatten().cloned().collect();
        for head in by_level[level].clone() {
            let mut bodies: Vec<Vec<Literal>> = Vec::new();
            let n_clauses = if rng.random_bool(cfg.disjunct_probability.clamp(0.0, 1.0)) {
                rng.random_range(2..=3)
            } else {
                1
            };
            let mut attempts = 0;
            while bodies.len() < n_clauses && attempts < 20 {
                attempts += 1;
                let body = random_body(rng, cfg, &by_level[level - 1], &below);
                let mut key: Vec<&Literal> = body.iter().collect();
                key.sort();
                let dup = bodies.iter().any(|b| {
                    let mut k: Vec<&Literal> = b.iter().collect();
                    k.sort();
                    k == key
                });
                if !dup {
                    bodies.push(body);
                }
            }
            for body in bodies {
                clauses.push(HornClause::new(head.clone(), body));
            }
        }
    }

    // attach every unused non-root head to some clause one level up
    for level in 1..n_levels {
        for head in by_level[level].clone() {
            let used = clauses
                .iter()
                .any(|c| c.body.iter().any(|l| l.symbol == head));
            if used {
                continue;
            }
            let parents: Vec<usize> = clauses
                .iter()
                .enumerate()
                .filter(|(_, c)| by_level[level + 1].contains(&c.head))
                .map(|(i, _)| i)
                .collect();
            let target = *parents.choose(rng).expect("every level has a head");
            let negated = rng.random_bool(cfg.negation_probability.clamp(0.0, 1.0));
            clauses[target].body.push(Literal {
                symbol: head,
                negated,
            });
        }
    }

    RuleSet::from_clauses(clauses).expect("generator emits valid rule sets")
}

fn random_body<R: Rng>(
    rng: &mut R,
    cfg: &RandomRules,
    previous_level: &[String],
    below: &[String],
) -> Vec<Literal> {
    let size = rng.random_range(1..=cfg.max_body.max(1)).min(below.len());
    let anchor = previous_level.choose(rng).expect("non-empty level").clone();
    let mut others: Vec<&String> = below.iter().filter(|s| **s != anchor).collect();
    others.shuffle(rng);
    let mut symbols = vec![anchor];
    symbols.extend(others.into_iter().take(size - 1).cloned());
    symbols.shuffle(rng);
    symbols
        .into_iter()
        .map(|symbol| Literal {
            symbol,
            negated: rng.random_bool(cfg.negation_probability.clamp(0.0, 1.0)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_sets_respect_bounds() {
        let cfg = RandomRules::default();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rules = random_rule_set(&mut rng, &cfg);
            assert_eq!(rules.roots().len(), 1);
            assert!(rules.inputs().len() <= cfg.max_inputs);
            assert!(!rules.has_disjuncts());
            let depth = rules.levels().values().copied().max().unwrap();
            assert!((1..=cfg.max_levels).contains(&depth));
        }
    }
}
