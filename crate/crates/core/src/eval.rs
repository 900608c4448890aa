//! Experiment protocol: generate, balance and split, train, evaluate,
//! repeat, and report.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::characters::CharacterTable;
use crate::dataset::{EncodingKind, LabeledDataset, LabeledTriples, SplitManifest, SplitSpec, DEFAULT_TRAIN_FRACTION};
use crate::error::{Error, Result};
use crate::metrics::{auc, ConfusionMatrix};
use crate::models::cnn::{cnn_build, cnn_train, CnnConfig, CnnVariant};
use crate::models::gbdt::{gbdt_fit, GbdtConfig};
use crate::models::knn::{knn_fit, K_SWEEP};
use crate::seeds::{derive_seed, rng_from, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classifier {
    NearN,
    Cnn2,
    Cnn3,
    Lgbm,
}

impl Classifier {
    /// Column order of the reference table.
    pub const ALL: [Classifier; 4] = [Classifier::NearN, Classifier::Cnn2, Classifier::Cnn3, Classifier::Lgbm];

    pub fn name(self) -> &'static str {
        match self {
            Classifier::NearN => "nearn",
            Classifier::Cnn2 => "cnn2",
            Classifier::Cnn3 => "cnn3",
            Classifier::Lgbm => "lgbm",
        }
    }

    /// Column heading in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Classifier::NearN => "NearN",
            Classifier::Cnn2 => "CNN2",
            Classifier::Cnn3 => "CNN3",
            Classifier::Lgbm => "LGBM",
        }
    }

    pub fn encoding(self) -> EncodingKind {
        match self {
            Classifier::NearN | Classifier::Lgbm => EncodingKind::V1,
            Classifier::Cnn2 => EncodingKind::V2,
            Classifier::Cnn3 => EncodingKind::V3,
        }
    }

    fn column(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Classifier::ALL
            .into_iter()
            .find(|c| c.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown classifier {s:?}; expected nearn, cnn2, cnn3 or lgbm")))
    }
}

/// One row of the published accuracy table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceRow {
    pub n: usize,
    pub per_class: usize,
    /// Indexed like [`Classifier::ALL`].
    pub accuracy: [f64; 4],
}

pub const REFERENCE_TABLE: [ReferenceRow; 3] = [
    ReferenceRow { n: 12, per_class: 126_900, accuracy: [0.9155, 0.9529, 0.9697, 0.9714] },
    ReferenceRow { n: 13, per_class: 260_000, accuracy: [0.9318, 0.9618, 0.9773, 0.9837] },
    ReferenceRow { n: 14, per_class: 600_000, accuracy: [0.9364, 0.9635, 0.9772, 0.9845] },
];

/// Allowed absolute accuracy gap to the reference table.
pub const REFERENCE_TOLERANCE: f64 = 0.02;

pub fn reference_row(n: usize) -> Option<&'static ReferenceRow> {
    REFERENCE_TABLE.iter().find(|r| r.n == n)
}

pub fn reference_accuracy(n: usize, classifier: Classifier) -> Option<f64> {
    reference_row(n).map(|r| r.accuracy[classifier.column()])
}

/// Boosting rounds used by the reproduction recipe. Learning rate 0.01 with
/// 63 leaves is still improving validation accuracy well past 1000 rounds.
pub const REPRO_GBDT_ITERATIONS: usize = 5000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub n: usize,
    pub classifier: Classifier,
    /// Master seed; every random choice derives from it.
    pub seed: u64,
    pub per_class_cap: Option<usize>,
    pub train_fraction: f64,
    pub repetitions: usize,
    /// Keep only this share of each class of the training split.
    pub train_subsample: Option<f64>,
    /// `k` values tried by nearest neighbors; the best on validation is kept.
    pub knn_ks: Vec<usize>,
    pub cnn: CnnConfig,
    pub gbdt: GbdtConfig,
}

impl ExperimentPlan {
    /// Library defaults: no cap, 70/30 split, 5 repetitions.
    pub fn new(n: usize, classifier: Classifier, seed: u64) -> Self {
        Self {
            n,
            classifier,
            seed,
            per_class_cap: None,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            repetitions: 5,
            train_subsample: None,
            knn_ks: K_SWEEP.to_vec(),
            cnn: CnnConfig::default(),
            gbdt: GbdtConfig::default(),
        }
    }

    /// The published dataset sizes for `n` (when listed) and the
    /// reproduction boosting length.
    pub fn reproduction(n: usize, classifier: Classifier, seed: u64) -> Self {
        let mut plan = Self::new(n, classifier, seed);
        plan.per_class_cap = reference_row(n).map(|r| r.per_class);
        plan.gbdt.num_iterations = REPRO_GBDT_ITERATIONS;
        plan
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("at least one repetition is required".into()));
        }
        if let Some(f) = self.train_subsample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!("training subsample {f} outside (0, 1]")));
            }
        }
        if self.classifier == Classifier::NearN && self.knn_ks.is_empty() {
            return Err(Error::InvalidConfig("empty k sweep".into()));
        }
        Ok(())
    }

    fn split_spec(&self, repetition: u32) -> SplitSpec {
        let mut spec = SplitSpec::new(derive_seed(self.seed, Purpose::Split, repetition)).with_cap(self.per_class_cap);
        spec.train_fraction = self.train_fraction;
        spec
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    pub train0: usize,
    pub train1: usize,
    pub valid0: usize,
    pub valid1: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub generate: u64,
    pub train: u64,
    pub evaluate: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub repetition: u32,
    pub split: u64,
    /// Model initialization or bagging seed; 0 for nearest neighbors.
    pub model: u64,
    /// Minibatch shuffling seed (CNN only).
    pub shuffle: u64,
}

/// Result of one train/evaluate run. `confusion` rows are the true class
/// (0 then 1), columns the predicted class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub classifier: Classifier,
    pub encoding: u8,
    pub sizes: Sizes,
    pub accuracy: f64,
    pub precision0: f64,
    pub precision1: f64,
    pub recall0: f64,
    pub recall1: f64,
    pub auc: Option<f64>,
    pub confusion: [[u64; 2]; 2],
    pub config: serde_json::Value,
    pub seeds: Seeds,
    pub timings_ms: Timings,
}

impl EvalReport {
    fn from_predictions(
        classifier: Classifier,
        n: usize,
        sizes: Sizes,
        validation: &LabeledDataset,
        scores: &[f64],
        config: serde_json::Value,
        seeds: Seeds,
    ) -> Result<Self> {
        let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s > 0.5)).collect();
        let cm = ConfusionMatrix::from_labels(validation.labels(), &predicted)?;
        let area = auc(scores, validation.labels()).ok();
        let report = Self {
            n,
            classifier,
            encoding: classifier.encoding().index(),
            sizes,
            accuracy: cm.accuracy(),
            precision0: cm.precision(0),
            precision1: cm.precision(1),
            recall0: cm.recall(0),
            recall1: cm.recall(1),
            auc: area,
            confusion: cm.counts,
            config,
            seeds,
            timings_ms: Timings::default(),
        };
        report.check()?;
        Ok(report)
    }

    pub fn matrix(&self) -> ConfusionMatrix {
        ConfusionMatrix { counts: self.confusion }
    }

    /// Recomputes every derived metric from the confusion matrix and checks
    /// that the matrix agrees with the validation sizes.
    pub fn check(&self) -> Result<()> {
        let cm = self.matrix();
        let bad = |what: &str| Err(Error::Shape(format!("report {what} disagrees with its confusion matrix")));
        if cm.support(0) != self.sizes.valid0 as u64 || cm.support(1) != self.sizes.valid1 as u64 {
            return bad("validation size");
        }
        let pairs = [
            (self.accuracy, cm.accuracy()),
            (self.precision0, cm.precision(0)),
            (self.precision1, cm.precision(1)),
            (self.recall0, cm.recall(0)),
            (self.recall1, cm.recall(1)),
        ];
        if pairs.iter().any(|(a, b)| a != b) {
            return bad("metric");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// JSON with `timings_ms` zeroed: the byte-reproducible part.
    pub fn to_canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.timings_ms = Timings::default();
        copy.to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        report.check()?;
        Ok(report)
    }

    /// Errors per class: misclassified class-0 and class-1 samples.
    pub fn class_errors(&self) -> (u64, u64) {
        let cm = self.matrix();
        (cm.errors(0), cm.errors(1))
    }
}

/// All runs of a plan and the headline (median-accuracy) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub plan: ExperimentPlan,
    pub runs: Vec<EvalReport>,
    /// Index into `runs` of the median run by accuracy (lower median for an
    /// even count, earliest repetition among equal accuracies).
    pub headline: usize,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
}

impl ExperimentResult {
    pub fn headline_report(&self) -> &EvalReport {
        &self.runs[self.headline]
    }

    fn summarize(plan: ExperimentPlan, runs: Vec<EvalReport>) -> Self {
        let mut order: Vec<usize> = (0..runs.len()).collect();
        order.sort_by(|&a, &b| runs[a].accuracy.total_cmp(&runs[b].accuracy).then(a.cmp(&b)));
        let headline = order[(runs.len() - 1) / 2];
        let accs: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        Self {
            plan,
            headline,
            mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
            min_accuracy: accs.iter().copied().fold(f64::INFINITY, f64::min),
            max_accuracy: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            runs,
        }
    }
}

/// Builds the character table and labels every triple for `n`.
pub fn generate(n: usize) -> Result<LabeledTriples> {
    let table = CharacterTable::build(n)?;
    LabeledTriples::build(&table)
}

/// Where samples come from: labeled triples (any encoding) or an already
/// encoded dataset (one encoding).
#[derive(Clone, Copy, Debug)]
pub enum DataSource<'a> {
    Triples(&'a LabeledTriples),
    Encoded(&'a LabeledDataset),
}

impl<'a> From<&'a LabeledTriples> for DataSource<'a> {
    fn from(t: &'a LabeledTriples) -> Self {
        DataSource::Triples(t)
    }
}

impl<'a> From<&'a LabeledDataset> for DataSource<'a> {
    fn from(d: &'a LabeledDataset) -> Self {
        DataSource::Encoded(d)
    }
}

impl DataSource<'_> {
    pub fn n(&self) -> usize {
        match self {
            DataSource::Triples(t) => t.n(),
            DataSource::Encoded(d) => d.n(),
        }
    }

    pub fn labels(&self) -> &[u8] {
        match self {
            DataSource::Triples(t) => t.labels(),
            DataSource::Encoded(d) => d.labels(),
        }
    }

    /// The given rows in encoding `kind`.
    pub fn take(&self, kind: EncodingKind, rows: &[usize], model: Classifier) -> Result<LabeledDataset> {
        match self {
            DataSource::Triples(t) => Ok(t.encode(kind, Some(rows))),
            DataSource::Encoded(d) if d.kind() == kind => Ok(d.subset(rows)),
            DataSource::Encoded(d) => {
                Err(Error::EncodingMismatch { model: model.name().into(), expected: kind.index(), found: d.kind().index() })
            }
        }
    }
}

/// Training and validation sets of one repetition.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub manifest: SplitManifest,
    pub sizes: Sizes,
}

/// Balances and splits `source` for repetition `rep` of `plan`, then applies
/// the training subsample, in the classifier's encoding.
pub fn prepare<'a>(source: impl Into<DataSource<'a>>, plan: &ExperimentPlan, rep: u32) -> Result<Prepared> {
    let source = source.into();
    plan.validate()?;
    if source.n() != plan.n {
        return Err(Error::SizeMismatch { expected: plan.n, found: source.n() });
    }
    let spec = plan.split_spec(rep);
    let manifest = SplitManifest::plan(source.labels(), &spec)?;
    let mut train_rows = manifest.train.clone();
    if let Some(f) = plan.train_subsample {
        train_rows = subsample(&train_rows, source.labels(), f, derive_seed(plan.seed, Purpose::Subsample, rep));
    }
    let kind = plan.classifier.encoding();
    let train = source.take(kind, &train_rows, plan.classifier)?;
    let validation = source.take(kind, &manifest.validation, plan.classifier)?;
    let (train0, train1) = train.class_counts();
    let (valid0, valid1) = validation.class_counts();
    Ok(Prepared { train, validation, manifest, sizes: Sizes { train0, train1, valid0, valid1 } })
}

/// Runs `plan` from scratch, generating the labeled triples first.
pub fn run_experiment(plan: &ExperimentPlan, on_run: impl FnMut(&EvalReport) -> Result<()>) -> Result<ExperimentResult> {
    plan.validate()?;
    let t0 = Instant::now();
    let triples = generate(plan.n)?;
    let generate_ms = t0.elapsed().as_millis() as u64;
    run_experiment_on(&triples, plan, generate_ms, on_run)
}

/// Runs `plan` on existing data. `on_run` sees each repetition's report as
/// soon as it exists.
pub fn run_experiment_on<'a>(
    source: impl Into<DataSource<'a>>,
    plan: &ExperimentPlan,
    generate_ms: u64,
    mut on_run: impl FnMut(&EvalReport) -> Result<()>,
) -> Result<ExperimentResult> {
    let source = source.into();
    plan.validate()?;
    let mut runs = Vec::with_capacity(plan.repetitions);
    for rep in 0..plan.repetitions as u32 {
        let mut report = run_once(source, plan, rep)?;
        report.timings_ms.generate = generate_ms;
        on_run(&report)?;
        runs.push(report);
    }
    Ok(ExperimentResult::summarize(plan.clone(), runs))
}

/// Keeps `fraction` of each class of `rows`, chosen with `seed`.
fn subsample(rows: &[usize], labels: &[u8], fraction: f64, seed: u64) -> Vec<usize> {
    let mut rng = rng_from(seed);
    let mut kept = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = rows.iter().copied().filter(|&r| labels[r] == class).collect();
        let m = (members.len() as f64 * fraction).round() as usize;
        let (chosen, _) = members.partial_shuffle(&mut rng, m);
        kept.extend_from_slice(chosen);
    }
    kept.sort_unstable();
    kept
}

fn run_once(source: DataSource<'_>, plan: &ExperimentPlan, rep: u32) -> Result<EvalReport> {
    let t0 = Instant::now();
    let Prepared { train, validation, manifest, sizes } = prepare(source, plan, rep)?;
    let mut seeds = Seeds { master: plan.seed, repetition: rep, split: manifest.spec.seed, ..Seeds::default() };
    let prep_ms = t0.elapsed().as_millis() as u64;
    let t1 = Instant::now();
    let (scores, config, train_ms, eval_start) = match plan.classifier {
        Classifier::NearN => {
            let model = knn_fit(&train, 1)?;
            let fit_ms = t1.elapsed().as_millis() as u64;
            let t2 = Instant::now();
            let sweep = model.sweep_scores(&validation, &plan.knn_ks)?;
            let accuracies: Vec<f64> = sweep
                .iter()
                .map(|s| {
                    let correct = s.iter().zip(validation.labels()).filter(|(&p, &y)| u8::from(p > 0.5) == y).count();
                    correct as f64 / validation.len().max(1) as f64
                })
                .collect();
            // first k among equal best accuracies
            let best = (0..accuracies.len()).fold(0, |b, i| if accuracies[i] > accuracies[b] { i } else { b });
            let config = serde_json::json!({
                "k": plan.knn_ks[best],
                "k_sweep": plan.knn_ks,
                "sweep_accuracy": accuracies,
            });
            (sweep[best].clone(), config, fit_ms, t2)
        }
        Classifier::Cnn2 | Classifier::Cnn3 => {
            let variant = if plan.classifier == Classifier::Cnn2 { CnnVariant::Cnn2 } else { CnnVariant::Cnn3 };
            seeds.model = derive_seed(plan.seed, Purpose::CnnInit, rep);
            seeds.shuffle = derive_seed(plan.seed, Purpose::CnnShuffle, rep);
            let model = cnn_build(variant, plan.n, seeds.model)?;
            let parameters = model.parameter_count();
            let cfg = CnnConfig { shuffle_seed: seeds.shuffle, ..plan.cnn.clone() };
            let (model, history) = cnn_train(model, &train, None, &cfg)?;
            let fit_ms = t1.elapsed().as_millis() as u64;
            let t2 = Instant::now();
            let config = serde_json::json!({
                "variant": variant,
                "parameters": parameters,
                "optimizer": cfg,
                "epoch_loss": history.epoch_loss,
            });
            (model.predict_scores(&validation)?, config, fit_ms, t2)
        }
        Classifier::Lgbm => {
            seeds.model = derive_seed(plan.seed, Purpose::GbdtBagging, rep);
            let cfg = GbdtConfig { seed: seeds.model, ..plan.gbdt.clone() };
            let (model, history) = gbdt_fit(&train, Some(&validation), &cfg)?;
            let fit_ms = t1.elapsed().as_millis() as u64;
            let t2 = Instant::now();
            let config = serde_json::json!({
                "gbdt": cfg,
                "trees": model.trees.len(),
                "best_iteration": history.best_iteration,
                "iterations_run": history.validation_auc.len().max(model.trees.len()),
            });
            (model.predict_scores(&validation)?, config, fit_ms, t2)
        }
    };
    let mut config = config;
    config["train_subsample"] = serde_json::json!(plan.train_subsample);
    config["per_class_cap"] = serde_json::json!(plan.per_class_cap);
    config["train_fraction"] = serde_json::json!(plan.train_fraction);
    let mut report = EvalReport::from_predictions(plan.classifier, plan.n, sizes, &validation, &scores, config, seeds)?;
    report.timings_ms.train = prep_ms + train_ms;
    report.timings_ms.evaluate = eval_start.elapsed().as_millis() as u64;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
    Figure,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            "figure" | "svg" => Ok(ReportFormat::Figure),
            _ => Err(Error::InvalidConfig(format!("unknown report format {s:?}"))),
        }
    }
}

/// Writes `report` to `path` in the chosen format.
pub fn render_report(report: &EvalReport, format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Text => render_text(report),
        ReportFormat::Figure => render_svg(report),
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Aligned plain-text summary, including a one-row accuracy table.
pub fn render_text(report: &EvalReport) -> String {
    let mut s = String::new();
    let per_class = (report.sizes.train0 + report.sizes.valid0).max(report.sizes.train1 + report.sizes.valid1);
    let mut cells = [None; 4];
    cells[report.classifier.column()] = Some(report.accuracy);
    s.push_str(&render_accuracy_table(&[(report.n, per_class, cells)]));
    s.push('\n');
    let [[tn, fp], [fn_, tp]] = report.confusion;
    let _ = writeln!(s, "classifier  {}  (encoding v{})", report.classifier.label(), report.encoding);
    let _ = writeln!(s, "train       {} + {}", report.sizes.train0, report.sizes.train1);
    let _ = writeln!(s, "validation  {} + {}", report.sizes.valid0, report.sizes.valid1);
    let _ = writeln!(s, "accuracy    {:.4}", report.accuracy);
    let _ = writeln!(s, "precision   class0 {:.4}  class1 {:.4}", report.precision0, report.precision1);
    let _ = writeln!(s, "recall      class0 {:.4}  class1 {:.4}", report.recall0, report.recall1);
    if let Some(a) = report.auc {
        let _ = writeln!(s, "auc         {a:.4}");
    }
    let _ = writeln!(s, "confusion   true\\pred       0         1");
    let _ = writeln!(s, "            0         {tn:>9} {fp:>9}");
    let _ = writeln!(s, "            1         {fn_:>9} {tp:>9}");
    s
}

fn thousands(x: usize) -> String {
    let digits = x.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Accuracy table in the published layout: `n`, dataset size, then one
/// column per classifier. Missing cells print as `-`.
pub fn render_accuracy_table(rows: &[(usize, usize, [Option<f64>; 4])]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:>3}  {:>16}", "n", "#D");
    for c in Classifier::ALL {
        let _ = write!(s, "  {:>7}", c.label());
    }
    s.push('\n');
    for (n, per_class, cells) in rows {
        let _ = write!(s, "{n:>3}  {:>16}", format!("{} x 2", thousands(*per_class)));
        for cell in cells {
            match cell {
                Some(a) => {
                    let _ = write!(s, "  {a:>7.4}");
                }
                None => {
                    let _ = write!(s, "  {:>7}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

/// 2×2 heatmap, cell shade proportional to its count.
pub fn render_svg(report: &EvalReport) -> String {
    let max = report.confusion.iter().flatten().copied().max().unwrap_or(0).max(1);
    let cell = 120;
    let (ox, oy) = (70, 50);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif">"#,
        w = ox + 2 * cell + 20,
        h = oy + 2 * cell + 50
    );
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="24" text-anchor="middle" font-size="15">{} n={} accuracy {:.4}</text>"#,
        report.classifier.label(),
        report.n,
        report.accuracy,
        x = ox + cell
    );
    for (t, row) in report.confusion.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            let shade = count as f64 / max as f64;
            // white to dark blue
            let (r, g, b) = (255.0 - 230.0 * shade, 255.0 - 180.0 * shade, 255.0 - 90.0 * shade);
            let text = if shade > 0.5 { "white" } else { "black" };
            let (x, y) = (ox + p * cell, oy + t * cell);
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({:.0},{:.0},{:.0})" stroke="black" data-count="{count}" data-shade="{shade:.6}"/>"#,
                r, g, b
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="16" fill="{text}">{count}</text>"#,
                x + cell / 2,
                y + cell / 2 + 6
            );
        }
    }
    for i in 0..2 {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{i}</text>"#, ox + i * cell + cell / 2, oy + 2 * cell + 20);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="13">{i}</text>"#, ox - 8, oy + i * cell + cell / 2 + 5);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">predicted</text>"#, ox + cell, oy + 2 * cell + 40);
    let _ = writeln!(s, r#"<text x="16" y="{}" font-size="13" transform="rotate(-90 16 {})" text-anchor="middle">true</text>"#, oy + cell, oy + cell);
    s.push_str("</svg>\n");
    s
}

/// One cell of a comparison against the reference table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n: usize,
    pub classifier: Classifier,
    pub measured: f64,
    pub reference: f64,
    pub passed: bool,
}

/// Compares headline accuracies with the reference table, and checks the
/// ordering NearN < CNN2 < CNN3 < LGBM for each `n` where all four ran.
/// Returns the per-cell comparisons and the `n` values whose ordering held.
pub fn compare_with_reference(results: &[(usize, Classifier, f64)]) -> (Vec<Comparison>, Vec<(usize, bool)>) {
    let cells = results
        .iter()
        .filter_map(|&(n, c, acc)| {
            reference_accuracy(n, c).map(|r| Comparison { n, classifier: c, measured: acc, reference: r, passed: (acc - r).abs() <= REFERENCE_TOLERANCE })
        })
        .collect();
    let mut ns: Vec<usize> = results.iter().map(|r| r.0).collect();
    ns.sort_unstable();
    ns.dedup();
    let orderings = ns
        .into_iter()
        .filter_map(|n| {
            let accs: Option<Vec<f64>> = Classifier::ALL
                .iter()
                .map(|&c| results.iter().find(|r| r.0 == n && r.1 == c).map(|r| r.2))
                .collect();
            accs.map(|a| (n, a.windows(2).all(|w| w[0] < w[1])))
        })
        .collect();
    (cells, orderings)
}

/// Text rendering of a comparison: measured vs reference per cell.
pub fn render_comparison(cells: &[Comparison], orderings: &[(usize, bool)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>3}  {:<6} {:>8} {:>9} {:>8}  result", "n", "model", "measured", "reference", "diff");
    for c in cells {
        let _ = writeln!(
            s,
            "{:>3}  {:<6} {:>8.4} {:>9.4} {:>+8.4}  {}",
            c.n,
            c.classifier.label(),
            c.measured,
            c.reference,
            c.measured - c.reference,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    for (n, ok) in orderings {
        let _ = writeln!(s, "{n:>3}  ordering NearN < CNN2 < CNN3 < LGBM: {}", if *ok { "PASS" } else { "FAIL" });
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_plan(classifier: Classifier) -> ExperimentPlan {
        let mut plan = ExperimentPlan::new(7, classifier, 3);
        plan.repetitions = 3;
        plan.cnn.epochs = 2;
        plan.gbdt.num_iterations = 20;
        plan.gbdt.min_data_in_leaf = 2;
        plan
    }

    #[test]
    fn classifiers_force_their_encoding() {
        assert_eq!(Classifier::NearN.encoding(), EncodingKind::V1);
        assert_eq!(Classifier::Lgbm.encoding(), EncodingKind::V1);
        assert_eq!(Classifier::Cnn2.encoding(), EncodingKind::V2);
        assert_eq!(Classifier::Cnn3.encoding(), EncodingKind::V3);
        assert_eq!("LGBM".parse::<Classifier>().unwrap(), Classifier::Lgbm);
        assert!("svm".parse::<Classifier>().is_err());
    }

    #[test]
    fn reports_are_consistent_and_repeatable() {
        let triples = generate(7).unwrap();
        for c in Classifier::ALL {
            let plan = tiny_plan(c);
            let a = run_experiment_on(&triples, &plan, 0, |_| Ok(())).unwrap();
            let b = run_experiment_on(&triples, &plan, 0, |_| Ok(())).unwrap();
            assert_eq!(a.runs.len(), 3);
            for (x, y) in a.runs.iter().zip(&b.runs) {
                x.check().unwrap();
                assert_eq!(x.to_canonical_json(), y.to_canonical_json());
                let total: u64 = x.confusion.iter().flatten().sum();
                assert_eq!(total as usize, x.sizes.valid0 + x.sizes.valid1);
                assert_eq!(x.sizes.valid0, x.sizes.valid1);
                assert_eq!(EvalReport::from_json(&x.to_json()).unwrap(), *x);
            }
            let h = a.headline_report().accuracy;
            assert!(a.min_accuracy <= h && h <= a.max_accuracy);
        }
    }

    #[test]
    fn repetitions_use_fresh_splits() {
        let triples = generate(7).unwrap();
        let r = run_experiment_on(&triples, &tiny_plan(Classifier::NearN), 0, |_| Ok(())).unwrap();
        assert_ne!(r.runs[0].seeds.split, r.runs[1].seeds.split);
    }

    #[test]
    fn headline_is_the_median_run() {
        let triples = generate(6).unwrap();
        let plan = tiny_plan(Classifier::NearN);
        let base = run_experiment_on(&triples, &ExperimentPlan { n: 6, ..plan.clone() }, 0, |_| Ok(())).unwrap();
        let mut runs = base.runs.clone();
        for (r, acc) in runs.iter_mut().zip([0.9, 0.7, 0.8]) {
            r.accuracy = acc;
        }
        let s = ExperimentResult::summarize(plan, runs);
        assert_eq!(s.headline, 2);
        assert_eq!((s.min_accuracy, s.max_accuracy), (0.7, 0.9));
    }

    #[test]
    fn subsampling_halves_each_class() {
        let triples = generate(7).unwrap();
        let mut plan = tiny_plan(Classifier::Lgbm);
        plan.repetitions = 1;
        let full = run_experiment_on(&triples, &plan, 0, |_| Ok(())).unwrap();
        plan.train_subsample = Some(0.5);
        let half = run_experiment_on(&triples, &plan, 0, |_| Ok(())).unwrap();
        let (f, h) = (full.runs[0].sizes, half.runs[0].sizes);
        assert_eq!(h.train0, (f.train0 as f64 / 2.0).round() as usize);
        assert_eq!(h.train1, (f.train1 as f64 / 2.0).round() as usize);
        assert_eq!((h.valid0, h.valid1), (f.valid0, f.valid1));
    }

    #[test]
    fn text_and_figure_rendering() {
        let triples = generate(6).unwrap();
        let mut plan = tiny_plan(Classifier::Lgbm);
        plan.n = 6;
        plan.repetitions = 1;
        let r = run_experiment_on(&triples, &plan, 0, |_| Ok(())).unwrap().runs.remove(0);
        let text = render_text(&r);
        for c in Classifier::ALL {
            assert!(text.contains(c.label()));
        }
        let svg = render_svg(&r);
        assert_eq!(svg.matches("<rect").count(), 4);
        let max = *r.confusion.iter().flatten().max().unwrap();
        assert!(svg.contains(&format!("data-count=\"{max}\" data-shade=\"1.000000\"")));
    }

    #[test]
    fn table_layout_shows_four_columns() {
        let t = render_accuracy_table(&[(12, 126_900, [Some(0.9155), Some(0.9529), Some(0.9697), Some(0.9714)])]);
        assert!(t.contains("126,900 x 2"));
        assert!(t.contains("0.9155") && t.contains("0.9714"));
    }

    #[test]
    fn comparison_checks_tolerance_and_order() {
        let results = [
            (12, Classifier::NearN, 0.92),
            (12, Classifier::Cnn2, 0.94),
            (12, Classifier::Cnn3, 0.96),
            (12, Classifier::Lgbm, 0.9),
        ];
        let (cells, order) = compare_with_reference(&results);
        assert_eq!(cells.iter().filter(|c| c.passed).count(), 3);
        assert_eq!(order, vec![(12, false)]);
        assert!(render_comparison(&cells, &order).contains("FAIL"));
    }

    #[test]
    fn degenerate_dataset_still_reports() {
        let rows = [[2, 0, 2, 0, 2, 0], [1, 1, 1, 1, 2, 0], [2, 0, 1, 1, 1, 1], [1, 1, 2, 0, 1, 1]];
        let v = LabeledDataset::from_parts(2, EncodingKind::V1, rows.concat(), vec![1, 0, 0, 1]).unwrap();
        let sizes = Sizes { train0: 0, train1: 0, valid0: 2, valid1: 2 };
        let scores = [0.9, 0.2, 0.6, 0.4];
        let r = EvalReport::from_predictions(Classifier::NearN, 2, sizes, &v, &scores, serde_json::json!({}), Seeds::default())
            .unwrap();
        assert_eq!(r.confusion, [[1, 1], [1, 1]]);
        assert_eq!(r.confusion.iter().flatten().sum::<u64>(), 4);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.auc, Some(0.75));
    }
}
