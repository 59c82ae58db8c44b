use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_free_head, relay_label, CompileConfig, KbannError, KnowledgeActivation};
use crate::rulelang::{HeadKind, Literal, RuleSet};
use crate::tensornet::{Activation, Layer, Matrix, Network};

enum Unit {
    Head(String),
    Relay { symbol: String, label: String },
    Free(String),
}

impl Unit {
    fn label(&self) -> &str {
        match self {
            Unit::Head(h) => h,
            Unit::Relay { label, .. } => label,
            Unit::Free(l) => l,
        }
    }
}

/// Maps a disjunct-free rule set onto an initialized network.
///
/// Hidden level `k` holds, in order, the heads at level `k`, relay units for
/// antecedents that skip past `k`, and the free units. A conjunctive head
/// gets `±omega` from its positive/negated antecedents and bias
/// `-omega · (P - 1/2)`; a disjunctive head gets `+omega` from each disjunct
/// and bias `-omega / 2`, as does a relay from the unit it carries. The
/// output row for the last class gets `+omega` from the root (bias
/// `-omega / 2`) and the first class the mirror image.
pub fn compile(
    rules: &RuleSet,
    feature_names: &[String],
    classes: &[String],
    cfg: &CompileConfig,
) -> Result<Network, KbannError> {
    cfg.validate()?;
    if classes.len() != 2 {
        return Err(KbannError::Classes(classes.len()));
    }
    if rules.is_empty() {
        return Err(KbannError::NoRules);
    }
    if let Some(h) = rules
        .heads()
        .into_iter()
        .find(|h| rules.head_kind(h) == HeadKind::Conjunctive && rules.clauses_for(h).nth(1).is_some())
    {
        return Err(KbannError::Disjuncts(h.to_string()));
    }
    if rules.roots().len() != 1 {
        return Err(KbannError::MultipleRoots(rules.roots().iter().cloned().collect()));
    }
    for input in rules.inputs() {
        if !feature_names.contains(input) {
            return Err(KbannError::UnknownSymbol(input.clone()));
        }
    }
    for head in rules.heads() {
        if feature_names.iter().any(|f| f == head) {
            return Err(KbannError::HeadIsFeature(head.to_string()));
        }
        if is_free_head(head) || head.contains('@') {
            return Err(KbannError::Config(format!("rule head `{head}` uses a reserved name")));
        }
    }

    let root = rules.roots().iter().next().expect("one root").clone();
    let levels = rules.levels();
    let top = levels[&root];
    let level_of = |s: &str| levels.get(s).copied().unwrap_or(0);

    // relay units needed at each level, in first-use order
    let mut relays: Vec<Vec<String>> = vec![Vec::new(); top + 1];
    for clause in rules.clauses() {
        let lh = level_of(&clause.head);
        for lit in &clause.body {
            for k in level_of(&lit.symbol) + 1..lh {
                if !relays[k].contains(&lit.symbol) {
                    relays[k].push(lit.symbol.clone());
                }
            }
        }
    }

    let mut units: Vec<Vec<Unit>> = (0..=top).map(|_| Vec::new()).collect();
    for head in rules.topological_heads() {
        units[level_of(head)].push(Unit::Head(head.to_string()));
    }
    let mut free = 0;
    for k in 1..=top {
        for s in &relays[k] {
            units[k].push(Unit::Relay {
                symbol: s.clone(),
                label: relay_label(s, k),
            });
        }
        for _ in 0..cfg.extra_hidden_per_level {
            free += 1;
            units[k].push(Unit::Free(format!("head{free}")));
        }
    }

    let omega = cfg.omega;
    let s = cfg.perturb_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = |rng: &mut ChaCha8Rng| if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 };
    let activation = match cfg.knowledge_activation {
        KnowledgeActivation::Sigmoid => Activation::Sigmoid,
    };

    let mut below: Vec<String> = feature_names.to_vec();
    let mut layers = Vec::with_capacity(top + 1);
    let mut labels = Vec::with_capacity(top + 1);
    for (k, level_units) in units.iter().enumerate().skip(1) {
        let index: HashMap<&str, usize> = below.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        // the unit at level k-1 that carries `symbol`
        let source = |symbol: &str| -> usize {
            if level_of(symbol) + 1 == k {
                index[symbol]
            } else {
                index[relay_label(symbol, k - 1).as_str()]
            }
        };

        let (rows, cols) = (level_units.len(), below.len());
        let mut knowledge: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut biases = vec![0.0; rows];
        for (r, unit) in level_units.iter().enumerate() {
            match unit {
                Unit::Head(h) => {
                    let body: Vec<&Literal> = rules.clauses_for(h).flat_map(|c| c.body.iter()).collect();
                    for lit in &body {
                        let w = if lit.negated { -omega } else { omega };
                        knowledge.insert((r, source(&lit.symbol)), w);
                    }
                    biases[r] = match rules.head_kind(h) {
                        HeadKind::Conjunctive => {
                            let positive = body.iter().filter(|l| !l.negated).count() as f64;
                            -omega * (positive - 0.5)
                        }
                        HeadKind::Disjunctive => -omega / 2.0,
                    };
                }
                Unit::Relay { symbol, .. } => {
                    knowledge.insert((r, source(symbol)), omega);
                    biases[r] = -omega / 2.0;
                }
                Unit::Free(_) => {}
            }
        }
        let mut weights = Matrix::filled(rows, cols, 0.0);
        let mut mask = Matrix::filled(rows, cols, false);
        for r in 0..rows {
            for c in 0..cols {
                let w = match knowledge.get(&(r, c)) {
                    Some(w) => {
                        mask.set(r, c, true);
                        *w
                    }
                    None => noise(&mut rng),
                };
                weights.set(r, c, w + noise(&mut rng));
            }
            biases[r] += noise(&mut rng);
        }
        let mut layer = Layer::new(weights, biases, activation);
        if cfg.freeze_knowledge_links {
            layer.frozen_mask = Some(mask.clone());
        }
        layer.knowledge_mask = mask;
        layers.push(layer);
        below = level_units.iter().map(|u| u.label().to_string()).collect();
        labels.push(below.clone());
    }

    // output layer: (negative class, positive class)
    let root_col = below.iter().position(|l| *l == root).expect("root sits at the top level");
    let cols = below.len();
    let mut weights = Matrix::filled(2, cols, 0.0);
    let mut mask = Matrix::filled(2, cols, false);
    let mut biases = vec![omega / 2.0, -omega / 2.0];
    for r in 0..2 {
        for c in 0..cols {
            let w = if c == root_col {
                mask.set(r, c, true);
                if r == 1 { omega } else { -omega }
            } else {
                noise(&mut rng)
            };
            weights.set(r, c, w + noise(&mut rng));
        }
        biases[r] += noise(&mut rng);
    }
    let mut out = Layer::new(weights, biases, Activation::Softmax);
    if cfg.freeze_knowledge_links {
        out.frozen_mask = Some(mask.clone());
    }
    out.knowledge_mask = mask;
    layers.push(out);
    labels.push(classes.to_vec());

    Network::new(layers, feature_names.to_vec(), classes.to_vec(), Some(labels))
        .map_err(|e| KbannError::Dimension(e.to_string()))
}
