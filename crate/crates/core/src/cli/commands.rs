use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{digest_bytes, load_settings, read_bytes, Outputs};
use super::{
    rt, AugmentChoice, CliError, CompareArgs, Common, EvaluateArgs, ExplainArgs, ExtractArgs,
    ModelChoice, SynthArgs, TrainArgs,
};
use crate::augment::{AutoencoderConfig, SmoteConfig};
use crate::datakit::{apply_normalization, generate_synthetic, read_csv, write_csv, Bounds, Class, Dataset, SynthConfig};
use crate::evalharness::{
    evaluate as evaluate_model, fit_baseline, fit_nsai, render_report, run_comparison, training_source,
    ComparisonConfig, EvalError, Metrics, ModelConfig, ModelKind,
};
use crate::explain::{global_explain, misprediction_report, misprediction_table, write_misprediction_csv, LimeConfig};
use crate::kbann::{extract_rules, DEFAULT_GROUP_TOLERANCE};
use crate::par::Execution;
use crate::rulelang::{parse_rules, RuleSet};
use crate::seed;
use crate::tensornet::Network;

/// A trained classifier with the bounds its inputs were scaled with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: ModelChoice,
    pub augment: AugmentChoice,
    pub bounds: Bounds,
    pub network: Network,
}

fn settings<T: for<'de> Deserialize<'de> + Default>(common: &Common, command: &str) -> Result<T, CliError> {
    match &common.config {
        Some(p) => load_settings(p, command),
        None => Ok(T::default()),
    }
}

fn require(value: Option<String>, flag: &str) -> Result<String, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

fn require_out(common: &Common) -> Result<&Path, CliError> {
    common
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing --out".into()))
}

struct Inputs(BTreeMap<String, String>);

impl Inputs {
    fn new() -> Self {
        Inputs(BTreeMap::new())
    }

    fn bytes(&mut self, path: &str) -> Result<Vec<u8>, CliError> {
        let bytes = read_bytes(Path::new(path)).map_err(rt)?;
        self.0.insert(path.to_string(), digest_bytes(&bytes));
        Ok(bytes)
    }

    fn dataset(&mut self, path: &str) -> Result<Dataset, CliError> {
        let bytes = self.bytes(path)?;
        read_csv(bytes.as_slice()).map_err(rt)
    }

    fn rules(&mut self, path: &str) -> Result<RuleSet, CliError> {
        let bytes = self.bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::Usage(format!("{path} is not UTF-8 text")))?;
        parse_rules(&text).map_err(rt)
    }

    fn model(&mut self, path: &str) -> Result<ModelFile, CliError> {
        let bytes = self.bytes(path)?;
        serde_json::from_slice(&bytes).map_err(rt)
    }
}

/// Scales `data` with the model's bounds after checking the columns.
fn model_input(model: &ModelFile, data: &Dataset) -> Result<Dataset, CliError> {
    if data.feature_names() != model.network.input_names() {
        return Err(rt(EvalError::Schema(format!(
            "data columns {:?} do not match the model inputs {:?}",
            data.feature_names(),
            model.network.input_names()
        ))));
    }
    Ok(apply_normalization(data, &model.bounds))
}

fn csv_bytes(data: &Dataset) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    write_csv(data, &mut out).map_err(rt)?;
    Ok(out)
}

fn io(e: std::io::Error) -> CliError {
    rt(crate::Error::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

pub(super) fn synth(a: SynthArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: SynthConfig = settings(&a.common, "synth")?;
    if let Some(n) = a.rows {
        cfg.n_rows = n as usize;
    }
    if let Some(n) = a.test_rows {
        cfg.n_test = n as usize;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.train_r {
        cfg.train_spurious_r = r;
    }
    if let Some(r) = a.test_r {
        cfg.test_spurious_r = r;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let out_dir = require_out(&a.common)?;
    let s = generate_synthetic(&cfg).map_err(rt)?;

    let mut out = Outputs::new(out_dir)?;
    out.write("train.csv", &csv_bytes(&s.train)?)?;
    out.write("test.csv", &csv_bytes(&s.test)?)?;
    let summary = json!({
        "train_rows": s.train.len(),
        "test_rows": s.test.len(),
        "train_class_counts": s.train.class_counts(),
        "test_class_counts": s.test.class_counts(),
        "train_spurious_r": s.train_spurious_r,
        "test_spurious_r": s.test_spurious_r,
    });
    writeln!(
        stdout,
        "wrote {} training and {} test rows to {} (spurious r: train {:.3}, test {:.3})",
        s.train.len(),
        s.test.len(),
        out_dir.display(),
        s.train_spurious_r,
        s.test_spurious_r
    )
    .map_err(io)?;
    out.finish("synth", Some(cfg.seed), &cfg, BTreeMap::new(), summary)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct TrainSettings {
    data: Option<String>,
    rules: Option<String>,
    model: Option<ModelChoice>,
    augment: AugmentChoice,
    seed: u64,
    classifier: ModelConfig,
    smote: SmoteConfig,
    autoencoder: AutoencoderConfig,
}

pub(super) fn train(a: TrainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: TrainSettings = settings(&a.common, "train")?;
    cfg.data = a.data.or(cfg.data);
    cfg.rules = a.rules.or(cfg.rules);
    cfg.model = a.model.or(cfg.model);
    cfg.augment = a.augment.unwrap_or(cfg.augment);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    let choice = cfg.model.unwrap_or(if cfg.rules.is_some() {
        ModelChoice::Nsai
    } else {
        ModelChoice::Baseline
    });
    cfg.model = Some(choice);
    match (choice, &cfg.rules) {
        (ModelChoice::Nsai, None) => return Err(CliError::Usage("--model nsai needs --rules".into())),
        (ModelChoice::Baseline, Some(_)) => {
            return Err(CliError::Usage("--rules only applies to --model nsai".into()))
        }
        _ => {}
    }
    cfg.classifier.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data_path = require(cfg.data.clone(), "data")?;
    let out_dir = require_out(&a.common)?;

    let mut inputs = Inputs::new();
    let data = inputs.dataset(&data_path)?;
    let rules = match &cfg.rules {
        Some(p) => Some(inputs.rules(p)?),
        None => None,
    };
    let bounds = Bounds::of_rows(&data.raw_rows(), data.n_features());
    let scaled = apply_normalization(&data, &bounds);
    let source_kind = match cfg.augment {
        AugmentChoice::None => ModelKind::DeepNn,
        AugmentChoice::Smote => ModelKind::DeepNnSmote,
        AugmentChoice::Autoencoder => ModelKind::DeepNnAutoencoder,
    };
    let source = training_source(source_kind, &scaled, &cfg.smote, &cfg.autoencoder, cfg.seed).map_err(rt)?;
    let (network, report) = match &rules {
        Some(r) => fit_nsai(&source, r, &cfg.classifier, seed::derive(cfg.seed, ModelKind::Nsai.tag())),
        None => fit_baseline(&source, &cfg.classifier, seed::derive(cfg.seed, source_kind.tag())),
    }
    .map_err(rt)?;

    let file = ModelFile {
        model: choice,
        augment: cfg.augment,
        bounds,
        network,
    };
    let mut out = Outputs::new(out_dir)?;
    out.write_json("model.json", &file)?;
    out.write_json("train_report.json", &report)?;
    let (low, high) = source.class_counts();
    let summary = json!({
        "input_rows": data.len(),
        "training_rows": source.len(),
        "training_class_counts": { "Low": low, "High": high },
        "epochs_run": report.epochs_run,
        "best_epoch": report.best_epoch,
    });
    writeln!(
        stdout,
        "trained {} on {} rows (Low {low}, High {high}); best epoch {} of {}",
        match choice {
            ModelChoice::Nsai => "nsai",
            ModelChoice::Baseline => "baseline",
        },
        source.len(),
        report.best_epoch,
        report.epochs_run
    )
    .map_err(io)?;
    out.finish("train", Some(cfg.seed), &cfg, inputs.0, summary)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct EvaluateSettings {
    model: Option<String>,
    data: Option<String>,
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x))
}

fn render_metrics(m: &Metrics) -> String {
    let c = &m.confusion;
    format!(
        "rows       {}\naccuracy   {}\nrecall     High {}  Low {}\nprecision  High {}  Low {}\n\
         confusion  (rows: true Low, High; columns: predicted Low, High)\n           {} {}\n           {} {}\n",
        m.n,
        pct(Some(m.accuracy)),
        pct(m.recall[&Class::High]),
        pct(m.recall[&Class::Low]),
        pct(m.precision[&Class::High]),
        pct(m.precision[&Class::Low]),
        c[0][0],
        c[0][1],
        c[1][0],
        c[1][1]
    )
}

pub(super) fn evaluate(a: EvaluateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: EvaluateSettings = settings(&a.common, "evaluate")?;
    cfg.model = a.model.or(cfg.model);
    cfg.data = a.data.or(cfg.data);
    let model_path = require(cfg.model.clone(), "model")?;
    let data_path = require(cfg.data.clone(), "data")?;
    let mut inputs = Inputs::new();
    let model = inputs.model(&model_path)?;
    let data = model_input(&model, &inputs.dataset(&data_path)?)?;
    let metrics = evaluate_model(&model.network, &data).map_err(rt)?;
    let text = render_metrics(&metrics);
    stdout.write_all(text.as_bytes()).map_err(io)?;
    if let Some(dir) = &a.common.out {
        let mut out = Outputs::new(dir)?;
        out.write_json("metrics.json", &metrics)?;
        out.write("metrics.txt", text.as_bytes())?;
        out.finish("evaluate", None, &cfg, inputs.0, json!({ "rows": data.len() }))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ExplainSettings {
    model: Option<String>,
    data: Option<String>,
    lime: LimeConfig,
}

pub(super) fn explain(a: ExplainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: ExplainSettings = settings(&a.common, "explain")?;
    cfg.model = a.model.or(cfg.model);
    cfg.data = a.data.or(cfg.data);
    cfg.lime.n_samples = a.samples.unwrap_or(cfg.lime.n_samples);
    cfg.lime.seed = a.seed.unwrap_or(cfg.lime.seed);
    cfg.lime.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let model_path = require(cfg.model.clone(), "model")?;
    let data_path = require(cfg.data.clone(), "data")?;
    let mut inputs = Inputs::new();
    let model = inputs.model(&model_path)?;
    let data = model_input(&model, &inputs.dataset(&data_path)?)?;
    let exec = Execution::default();
    let global = global_explain(&model.network, &data, &cfg.lime, exec).map_err(rt)?;
    let wrong = misprediction_report(&model.network, &data, &cfg.lime, exec).map_err(rt)?;

    let mut text = format!("{:<16}{:>18}{:>20}\n", "Feature", "mean importance", "mean |importance|");
    for g in &global.features {
        text.push_str(&format!(
            "{:<16}{:>18.4}{:>20.4}\n",
            g.feature, g.mean_importance, g.mean_abs_importance
        ));
    }
    text.push_str(&format!("\n{} mispredicted rows\n", wrong.len()));
    text.push_str(&misprediction_table(&wrong));
    stdout.write_all(text.as_bytes()).map_err(io)?;
    if let Some(dir) = &a.common.out {
        let mut out = Outputs::new(dir)?;
        out.write_json("global.json", &global)?;
        out.write_json("mispredictions.json", &wrong)?;
        let mut csv = Vec::new();
        write_misprediction_csv(&wrong, &mut csv).map_err(rt)?;
        out.write("mispredictions.csv", &csv)?;
        let summary = json!({ "rows": data.len(), "mispredicted": wrong.len() });
        out.finish("explain", Some(cfg.lime.seed), &cfg, inputs.0, summary)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ExtractSettings {
    model: Option<String>,
    data: Option<String>,
    group_tolerance: f64,
}

impl Default for ExtractSettings {
    fn default() -> Self {
        ExtractSettings {
            model: None,
            data: None,
            group_tolerance: DEFAULT_GROUP_TOLERANCE,
        }
    }
}

pub(super) fn extract(a: ExtractArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: ExtractSettings = settings(&a.common, "extract")?;
    cfg.model = a.model.or(cfg.model);
    cfg.data = a.data.or(cfg.data);
    cfg.group_tolerance = a.tolerance.unwrap_or(cfg.group_tolerance);
    if !(cfg.group_tolerance >= 0.0) {
        return Err(CliError::Usage("--tolerance must be non-negative".into()));
    }
    let model_path = require(cfg.model.clone(), "model")?;
    let data_path = require(cfg.data.clone(), "data")?;
    let mut inputs = Inputs::new();
    let model = inputs.model(&model_path)?;
    let data = model_input(&model, &inputs.dataset(&data_path)?)?;
    let rules = extract_rules(&model.network, &data, cfg.group_tolerance).map_err(rt)?;
    let text = rules.to_string();
    stdout.write_all(text.as_bytes()).map_err(io)?;
    if let Some(dir) = &a.common.out {
        let mut out = Outputs::new(dir)?;
        out.write("rules.txt", text.as_bytes())?;
        out.write_json("rules.json", &rules)?;
        let summary = json!({ "rules": rules.rules.len(), "fidelity": rules.fidelity });
        out.finish("extract", None, &cfg, inputs.0, summary)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct CompareSettings {
    train: Option<String>,
    test: Option<String>,
    rules: Option<String>,
    comparison: ComparisonConfig,
}

pub(super) fn compare(a: CompareArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: CompareSettings = settings(&a.common, "compare")?;
    cfg.train = a.train.or(cfg.train);
    cfg.test = a.test.or(cfg.test);
    cfg.rules = a.rules.or(cfg.rules);
    let c = &mut cfg.comparison;
    c.seed = a.seed.unwrap_or(c.seed);
    c.cv_folds = a.folds.unwrap_or(c.cv_folds);
    c.importance_repeats = a.repeats.unwrap_or(c.importance_repeats);
    if c.cv_folds == 1 || c.importance_repeats == 0 {
        return Err(CliError::Usage("--folds must be 0 or at least 2 and --repeats at least 1".into()));
    }
    let train_path = require(cfg.train.clone(), "train")?;
    let test_path = require(cfg.test.clone(), "test")?;
    let rules_path = require(cfg.rules.clone(), "rules")?;
    let mut inputs = Inputs::new();
    let train_data = inputs.dataset(&train_path)?;
    let test_data = inputs.dataset(&test_path)?;
    let rules = inputs.rules(&rules_path)?;
    let report = run_comparison(&train_data, &test_data, &rules, &cfg.comparison, Execution::default()).map_err(rt)?;
    let text = render_report(&report);
    stdout.write_all(text.as_bytes()).map_err(io)?;
    if let Some(dir) = &a.common.out {
        let mut out = Outputs::new(dir)?;
        out.write_json("report.json", &report)?;
        out.write("report.txt", text.as_bytes())?;
        let summary = json!({ "train_rows": report.train_rows, "test_rows": report.test_rows });
        out.finish("compare", Some(cfg.comparison.seed), &cfg, inputs.0, summary)?;
    }
    Ok(())
}
