use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{correlation_table, evaluate, CorrelationTable, EvalError, Metrics};
use crate::augment::{balance_with_autoencoder, smote, AutoencoderConfig, SmoteConfig};
use crate::datakit::{apply_normalization, kfold_split, Bounds, Class, Dataset};
use crate::kbann::{
    compile, extract_rules, permutation_importance_with, CompileConfig, ExtractedRuleSet,
    DEFAULT_GROUP_TOLERANCE,
};
use crate::par::Execution;
use crate::rulelang::{rewrite_disjuncts, RuleSet};
use crate::seed;
use crate::tensornet::{accuracy, build_mlp, train, Network, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DeepNn,
    DeepNnSmote,
    DeepNnAutoencoder,
    Nsai,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::DeepNn,
        ModelKind::DeepNnSmote,
        ModelKind::DeepNnAutoencoder,
        ModelKind::Nsai,
    ];

    /// Seed-derivation tag.
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::DeepNn => "deep_nn",
            ModelKind::DeepNnSmote => "deep_nn_smote",
            ModelKind::DeepNnAutoencoder => "deep_nn_autoencoder",
            ModelKind::Nsai => "nsai",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::DeepNn => "Deep NN",
            ModelKind::DeepNnSmote => "Deep NN-SMOTE",
            ModelKind::DeepNnAutoencoder => "Deep NN-Autoencoder",
            ModelKind::Nsai => "NSAI",
        }
    }
}

/// Architecture and training settings shared by the classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Hidden ReLU widths of the baseline.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub compile: CompileConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![50, 50],
            train: TrainConfig::default(),
            compile: CompileConfig::default(),
        }
    }
}

/// Trains the ReLU baseline. Initial weights use `derive(seed, "init")` and
/// batching / validation split use `derive(seed, "train")`.
pub fn fit_baseline(data: &Dataset, cfg: &ModelConfig, seed: u64) -> Result<(Network, TrainReport), EvalError> {
    let net = build_mlp(data.n_features(), &cfg.hidden, 2, seed::derive(seed, "init"))?
        .with_io_names(data.feature_names().to_vec(), Class::names())?;
    let tc = TrainConfig {
        seed: seed::derive(seed, "train"),
        ..cfg.train.clone()
    };
    Ok(train(&net, &data.to_samples(), &tc)?)
}

fn compile_for(data: &Dataset, rules: &RuleSet, cfg: &ModelConfig, seed: u64) -> Result<Network, EvalError> {
    let rules = rewrite_disjuncts(rules)?;
    let cc = CompileConfig {
        seed: seed::derive(seed, "init"),
        ..cfg.compile.clone()
    };
    Ok(compile(&rules, data.feature_names(), &Class::names(), &cc)?)
}

/// Compiles `rules` (after disjunct rewriting) and trains the result, with
/// the same seed derivation as [`fit_baseline`].
pub fn fit_nsai(
    data: &Dataset,
    rules: &RuleSet,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(Network, TrainReport), EvalError> {
    let net = compile_for(data, rules, cfg, seed)?;
    let tc = TrainConfig {
        seed: seed::derive(seed, "train"),
        ..cfg.train.clone()
    };
    Ok(train(&net, &data.to_samples(), &tc)?)
}

/// Settings of [`run_comparison`]. Component seeds inside `classifier`, `smote`
/// and `autoencoder` are ignored; everything derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComparisonConfig {
    pub seed: u64,
    pub classifier: ModelConfig,
    pub smote: SmoteConfig,
    pub autoencoder: AutoencoderConfig,
    /// 0 skips cross-validation.
    pub cv_folds: usize,
    pub importance_repeats: usize,
    pub spurious_feature: String,
    pub group_tolerance: f64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            seed: 0,
            classifier: ModelConfig::default(),
            smote: SmoteConfig::default(),
            autoencoder: AutoencoderConfig::default(),
            cv_folds: 10,
            importance_repeats: 10,
            spurious_feature: "Small_cheese".to_string(),
            group_tolerance: DEFAULT_GROUP_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: usize,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub std: f64,
}

impl CvSummary {
    fn of(accuracies: Vec<f64>) -> CvSummary {
        let k = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / k;
        let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
        CvSummary {
            folds: accuracies.len(),
            accuracies,
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    /// `derive(master, model.tag())`.
    pub seed: u64,
    pub training_rows: usize,
    /// (Low, High) rows in the training source.
    pub training_class_counts: (usize, usize),
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub test: Metrics,
    pub cv: Option<CvSummary>,
    pub spurious_importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub spurious_feature: String,
    pub models: Vec<ModelReport>,
    pub correlation: CorrelationTable,
    pub nsai_rules: ExtractedRuleSet,
    pub config: ComparisonConfig,
}

impl ExperimentReport {
    pub fn model(&self, kind: ModelKind) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == kind)
    }
}

/// The training rows a model of `kind` learns from: SMOTE or autoencoder
/// balancing for the augmented baselines (seeded from `master` as in
/// [`run_comparison`]), `data` itself otherwise.
pub fn training_source(
    kind: ModelKind,
    data: &Dataset,
    smote_cfg: &SmoteConfig,
    ae_cfg: &AutoencoderConfig,
    master: u64,
) -> Result<Dataset, EvalError> {
    match kind {
        ModelKind::DeepNnSmote => {
            let cfg = SmoteConfig {
                seed: seed::derive(master, "smote"),
                ..smote_cfg.clone()
            };
            Ok(smote(data, &cfg)?.data)
        }
        ModelKind::DeepNnAutoencoder => {
            let cfg = AutoencoderConfig {
                train: TrainConfig {
                    seed: seed::derive(master, "autoencoder"),
                    ..ae_cfg.train.clone()
                },
                ..ae_cfg.clone()
            };
            let (out, _) = balance_with_autoencoder(data, &cfg, seed::derive(master, "autoencoder-sample"))?;
            Ok(out.data)
        }
        ModelKind::DeepNn | ModelKind::Nsai => Ok(data.clone()),
    }
}

enum Job {
    Final(Network, TrainReport),
    Fold(f64),
}

/// Trains Deep NN, Deep NN-SMOTE, Deep NN-Autoencoder and NSAI and evaluates
/// them on the same test rows.
///
/// Features are min-max scaled with the training bounds for every source.
/// Seeds: model `m` uses `derive(seed, m.tag())`; its CV fold `f` uses
/// `derive_index(derive(model_seed, "cv"), f)` and the fold split
/// `derive(model_seed, "cv-split")`; permutation shuffles use
/// `derive(model_seed, "importance")`. SMOTE uses `derive(seed, "smote")`,
/// the autoencoder `derive(seed, "autoencoder")` for training and
/// `derive(seed, "autoencoder-sample")` for sampling.
pub fn run_comparison(
    train_data: &Dataset,
    test_data: &Dataset,
    rules: &RuleSet,
    cfg: &ComparisonConfig,
    exec: Execution,
) -> Result<ExperimentReport, EvalError> {
    if test_data.feature_names() != train_data.feature_names() {
        return Err(EvalError::Schema("train and test have different feature columns".into()));
    }
    if train_data.is_empty() || test_data.is_empty() {
        return Err(EvalError::Empty);
    }
    train_data.feature_index(&cfg.spurious_feature)?;
    if cfg.cv_folds == 1 {
        return Err(EvalError::Config("cv_folds must be 0 or at least 2".into()));
    }
    if cfg.importance_repeats == 0 {
        return Err(EvalError::Config("importance_repeats must be at least 1".into()));
    }
    let model_seed = |m: ModelKind| seed::derive(cfg.seed, m.tag());
    compile_for(train_data, rules, &cfg.classifier, model_seed(ModelKind::Nsai))?;

    let bounds = Bounds::of_rows(&train_data.raw_rows(), train_data.n_features());
    let train_n = apply_normalization(train_data, &bounds);
    let test_n = apply_normalization(test_data, &bounds);
    let smoted = training_source(ModelKind::DeepNnSmote, &train_n, &cfg.smote, &cfg.autoencoder, cfg.seed)?;
    let ae_aug = training_source(ModelKind::DeepNnAutoencoder, &train_n, &cfg.smote, &cfg.autoencoder, cfg.seed)?;
    let sources: [&Dataset; 4] = [&train_n, &smoted, &ae_aug, &train_n];

    let fit = |m: ModelKind, data: &Dataset, s: u64| match m {
        ModelKind::Nsai => fit_nsai(data, rules, &cfg.classifier, s),
        _ => fit_baseline(data, &cfg.classifier, s),
    };
    let folds: Vec<Vec<(Vec<usize>, Vec<usize>)>> = if cfg.cv_folds == 0 {
        vec![Vec::new(); 4]
    } else {
        ModelKind::ALL
            .iter()
            .zip(sources)
            .map(|(&m, src)| kfold_split(src, cfg.cv_folds, seed::derive(model_seed(m), "cv-split")))
            .collect::<Result<_, _>>()?
    };
    let mut jobs: Vec<(usize, Option<usize>)> = (0..4).map(|m| (m, None)).collect();
    for (m, f) in folds.iter().enumerate() {
        jobs.extend((0..f.len()).map(|i| (m, Some(i))));
    }
    let results = exec.try_map_range(jobs.len(), |j| -> Result<Job, EvalError> {
        let (m, fold) = jobs[j];
        let kind = ModelKind::ALL[m];
        let s = model_seed(kind);
        match fold {
            None => {
                let (net, report) = fit(kind, sources[m], s)?;
                Ok(Job::Final(net, report))
            }
            Some(f) => {
                let (tr, va) = &folds[m][f];
                let fs = seed::derive_index(seed::derive(s, "cv"), f as u64);
                let (net, _) = fit(kind, &sources[m].subset(tr), fs)?;
                Ok(Job::Fold(accuracy(&net, &sources[m].subset(va).to_samples())))
            }
        }
    })?;

    let mut finals = Vec::new();
    let mut fold_acc = vec![Vec::new(); 4];
    for (&(m, _), r) in jobs.iter().zip(results) {
        match r {
            Job::Final(net, report) => finals.push((net, report)),
            Job::Fold(a) => fold_acc[m].push(a),
        }
    }

    let mut models = Vec::with_capacity(4);
    for (m, ((net, report), accs)) in finals.iter().zip(fold_acc).enumerate() {
        let kind = ModelKind::ALL[m];
        let s = model_seed(kind);
        let spurious_importance = permutation_importance_with(
            net,
            &test_n,
            &cfg.spurious_feature,
            cfg.importance_repeats,
            seed::derive(s, "importance"),
            exec,
        )?;
        models.push(ModelReport {
            model: kind,
            seed: s,
            training_rows: sources[m].len(),
            training_class_counts: sources[m].class_counts(),
            epochs_run: report.epochs_run,
            best_epoch: report.best_epoch,
            test: evaluate(net, &test_n)?,
            cv: (!accs.is_empty()).then(|| CvSummary::of(accs)),
            spurious_importance,
        });
    }

    let correlation = correlation_table(&[
        ("train", &train_n),
        ("train+SMOTE", &smoted),
        ("train+autoencoder", &ae_aug),
        ("test", &test_n),
    ])?;
    let nsai_rules = extract_rules(&finals[3].0, &train_n, cfg.group_tolerance)?;
    Ok(ExperimentReport {
        seed: cfg.seed,
        train_rows: train_data.len(),
        test_rows: test_data.len(),
        spurious_feature: cfg.spurious_feature.clone(),
        models,
        correlation,
        nsai_rules,
        config: cfg.clone(),
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x))
}

/// Plain-text rendering: test metrics per model, CV, spurious-feature
/// importance, label correlations and the NSAI rules.
pub fn render_report(r: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<22}{:>10}{:>12}{:>12}{:>12}{:>12}{:>18}{:>12}",
        "Model", "Accuracy", "Recall H", "Recall L", "Prec. H", "Prec. L", "CV accuracy", "Imp."
    );
    for m in &r.models {
        let t = &m.test;
        let cv = m
            .cv
            .as_ref()
            .map_or_else(|| "-".to_string(), |c| format!("{:.2} ± {:.2}", 100.0 * c.mean, 100.0 * c.std));
        let _ = writeln!(
            s,
            "{:<22}{:>10}{:>12}{:>12}{:>12}{:>12}{:>18}{:>12.4}",
            m.model.display_name(),
            pct(Some(t.accuracy)),
            pct(t.recall[&Class::High]),
            pct(t.recall[&Class::Low]),
            pct(t.precision[&Class::High]),
            pct(t.precision[&Class::Low]),
            cv,
            m.spurious_importance
        );
    }
    let _ = writeln!(s, "\nImp. = permutation importance of {} on test data", r.spurious_feature);

    let _ = writeln!(s, "\nCorrelation with the label");
    let _ = write!(s, "{:<16}", "Feature");
    for d in &r.correlation.datasets {
        let _ = write!(s, "{d:>20}");
    }
    s.push('\n');
    for (f, row) in r.correlation.features.iter().zip(&r.correlation.cells) {
        let _ = write!(s, "{f:<16}");
        for c in row {
            let cell = if c.constant { "const".to_string() } else { format!("{:.3}", c.r) };
            let _ = write!(s, "{cell:>20}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "\nRules extracted from NSAI");
    let _ = write!(s, "{}", r.nsai_rules);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{generate_synthetic, SynthConfig};
    use crate::rulelang::parse_rules;

    const CT_RULES: &str = "Final_score :- CT_concepts, CT_skills.\n\
                          CT_concepts :- Conditional, Loop.\n\
                          CT_skills :- Debug, Simulation, Function.\n";

    fn quick() -> ComparisonConfig {
        ComparisonConfig {
            seed: 3,
            cv_folds: 2,
            importance_repeats: 2,
            ..ComparisonConfig::default()
        }
    }

    #[test]
    fn report_is_complete() {
        let s = generate_synthetic(&SynthConfig { n_rows: 160, n_test: 40, ..SynthConfig::default() }).unwrap();
        let rules = parse_rules(CT_RULES).unwrap();
        let r = run_comparison(&s.train, &s.test, &rules, &quick(), Execution::default()).unwrap();
        assert_eq!(r.models.len(), 4);
        assert!(r.models.iter().all(|m| m.test.n == 40 && m.cv.as_ref().unwrap().folds == 2));
        assert_eq!(r.correlation.datasets.len(), 4);
        assert!(r.nsai_rules.rules.len() >= 4);
        let smote = r.model(ModelKind::DeepNnSmote).unwrap();
        assert_eq!(smote.training_class_counts.0, smote.training_class_counts.1);
        let text = render_report(&r);
        assert!(text.contains("Deep NN-Autoencoder"));
        assert!(text.contains("Final_score:"));
    }

    #[test]
    fn unknown_rule_symbol_fails_before_training() {
        let s = generate_synthetic(&SynthConfig { n_rows: 60, n_test: 20, ..SynthConfig::default() }).unwrap();
        let rules = parse_rules("Final_score :- Teleport, Loop.").unwrap();
        let err = run_comparison(&s.train, &s.test, &rules, &quick(), Execution::Sequential).unwrap_err();
        assert!(matches!(err, EvalError::Kbann(_)), "{err:?}");
    }

    #[test]
    fn schedule_does_not_change_the_report() {
        let s = generate_synthetic(&SynthConfig { n_rows: 120, n_test: 30, ..SynthConfig::default() }).unwrap();
        let rules = parse_rules(CT_RULES).unwrap();
        let a = run_comparison(&s.train, &s.test, &rules, &quick(), Execution::Sequential).unwrap();
        let b = run_comparison(&s.train, &s.test, &rules, &quick(), Execution::Parallel).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
