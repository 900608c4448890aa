use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kronml::characters::cache_path;
use kronml::dataset::SplitManifest;
use kronml::eval::{
    compare_with_reference, generate, prepare, reference_row, render_accuracy_table, render_comparison, render_svg,
    render_text, run_experiment_on, Classifier, DataSource, EvalReport, ExperimentPlan, ExperimentResult,
};
use kronml::models::cnn::{cnn_build, cnn_train, CnnVariant};
use kronml::models::gbdt::gbdt_fit;
use kronml::models::knn::{knn_fit, DEFAULT_K};
use kronml::seeds::{derive_seed, Purpose};
use kronml::verify::{run_suite, Level};
use kronml::{CharacterTable, EncodingKind, Error, LabeledDataset, LabeledTriples, SplitSpec};

use crate::output::{atomically, ensure_dir, fingerprint, write_text};
use crate::{Cli, Command, Global, LevelArg, ModelArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verification(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Core(Error::TableVerification { .. } | Error::KroneckerCorruption { .. }) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Verification(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::EncodingMismatch { .. } | Error::InvalidConfig(_) | Error::DegreeOutOfRange { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult {
    let g = &cli.global;
    match &cli.command {
        Command::Chartab { n } => chartab(g, *n as usize),
        Command::Gen { n, encoding, cap, split } => gen(g, *n as usize, *encoding, *cap, *split || cap.is_some()),
        Command::Train(args) => train(g, args),
        Command::Eval { model, repetitions } => eval(g, model, *repetitions),
        Command::Repro { table, n, repetitions, subsample, iterations } => {
            repro(g, *table, n.map(|n| n as usize), *repetitions, *subsample, *iterations)
        }
        Command::Verify { level, n } => verify(g, *level, n.map(|n| n as usize)),
    }
}

fn progress(g: &Global, msg: impl fmt::Display) {
    if !g.quiet {
        eprintln!("{msg}");
    }
}

const SHOWN_TABLE_SIZE: usize = 11;

fn chartab(g: &Global, n: usize) -> CliResult {
    ensure_dir(&g.out_dir)?;
    let path = cache_path(&g.out_dir, n);
    let table = if path.exists() {
        CharacterTable::read_csv(&path)
            .map_err(|e| CliError::Verification(format!("cached table {} failed validation: {e}", path.display())))?
    } else {
        let t = CharacterTable::build(n)?;
        atomically(&path, |tmp| t.write_csv(tmp))?;
        t
    };
    let bytes = fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    println!("p({n})={}", table.size());
    if table.size() <= SHOWN_TABLE_SIZE {
        let rows: Vec<String> = (0..table.size())
            .map(|i| format!("[{}]", table.row(i).iter().map(i64::to_string).collect::<Vec<_>>().join(", ")))
            .collect();
        println!("table=[{}]", rows.join(", "));
    }
    println!("checksum={:016x}", fingerprint(&bytes));
    println!("file={}", path.display());
    Ok(())
}

fn dataset_path(dir: &Path, n: usize, kind: EncodingKind) -> PathBuf {
    dir.join(format!("dataset_n{n}_{kind}.csv"))
}

fn gen(g: &Global, n: usize, encoding: u8, cap: Option<usize>, split: bool) -> CliResult {
    if cap == Some(0) {
        return Err(CliError::Usage("--cap must be positive".into()));
    }
    let kind = EncodingKind::from_index(encoding)?;
    ensure_dir(&g.out_dir)?;
    let t0 = Instant::now();
    let triples = generate(n)?;
    progress(g, format_args!("labeled {} triples in {:.1?}", triples.len(), t0.elapsed()));
    let data = triples.encode(kind, None);
    let path = dataset_path(&g.out_dir, n, kind);
    atomically(&path, |tmp| data.write_csv(tmp))?;
    let (zeros, ones) = triples.class_counts();
    println!("rows={}", triples.len());
    println!("zeros={zeros} ones={ones}");
    println!("file={}", path.display());
    if split {
        let spec = SplitSpec::new(derive_seed(g.seed, Purpose::Split, 0)).with_cap(cap);
        let manifest = SplitManifest::plan(triples.labels(), &spec)?;
        let mpath = g.out_dir.join(format!("split_n{n}.txt"));
        atomically(&mpath, |tmp| manifest.write(tmp))?;
        println!("train={} validation={}", manifest.train.len(), manifest.validation.len());
        println!("manifest={}", mpath.display());
    }
    Ok(())
}

/// Checks flags against the model and builds its plan.
fn plan_for(g: &Global, args: &ModelArgs, repetitions: usize) -> CliResult<ExperimentPlan> {
    let n = args.n as usize;
    let m = args.model;
    let reject = |flag: &str, allowed: &str| Err(CliError::Usage(format!("--{flag} applies to {allowed} only")));
    if args.k.is_some() && m != Classifier::NearN {
        return reject("k", "nearn");
    }
    if args.epochs.is_some() && !matches!(m, Classifier::Cnn2 | Classifier::Cnn3) {
        return reject("epochs", "cnn2 and cnn3");
    }
    if args.iterations.is_some() && m != Classifier::Lgbm {
        return reject("iterations", "lgbm");
    }
    if args.learning_rate.is_some() && m == Classifier::NearN {
        return reject("learning-rate", "cnn2, cnn3 and lgbm");
    }
    if args.cap == Some(0) {
        return Err(CliError::Usage("--cap must be positive".into()));
    }
    let mut plan = ExperimentPlan::reproduction(n, m, g.seed);
    plan.repetitions = repetitions;
    if args.cap.is_some() {
        plan.per_class_cap = args.cap;
    }
    plan.train_subsample = args.subsample;
    if let Some(k) = args.k {
        plan.knn_ks = vec![k];
    }
    if let Some(e) = args.epochs {
        plan.cnn.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        plan.cnn.learning_rate = lr;
        plan.gbdt.learning_rate = lr;
    }
    if let Some(it) = args.iterations {
        plan.gbdt.num_iterations = it;
    }
    plan.validate()?;
    Ok(plan)
}

/// Either the dataset named by `--dataset` (checked against the model) or
/// freshly labeled triples.
enum Loaded {
    Triples(LabeledTriples),
    Encoded(LabeledDataset),
}

impl Loaded {
    fn source(&self) -> DataSource<'_> {
        match self {
            Loaded::Triples(t) => DataSource::Triples(t),
            Loaded::Encoded(d) => DataSource::Encoded(d),
        }
    }
}

fn load_data(g: &Global, args: &ModelArgs) -> CliResult<(Loaded, u64)> {
    let t0 = Instant::now();
    let loaded = match &args.dataset {
        Some(path) => {
            let data = LabeledDataset::read_csv(path)?;
            let want = args.model.encoding();
            if data.kind() != want {
                return Err(CliError::Usage(format!(
                    "{} needs a {want} dataset but {} holds {}",
                    args.model,
                    path.display(),
                    data.kind()
                )));
            }
            if data.n() != args.n as usize {
                return Err(CliError::Usage(format!("--n {} but {} is for n = {}", args.n, path.display(), data.n())));
            }
            Loaded::Encoded(data)
        }
        None => Loaded::Triples(generate(args.n as usize)?),
    };
    let ms = t0.elapsed().as_millis() as u64;
    progress(g, format_args!("data ready in {ms} ms"));
    Ok((loaded, ms))
}

fn model_path(dir: &Path, m: Classifier, n: usize) -> PathBuf {
    dir.join(format!("model_{m}_n{n}.txt"))
}

fn train(g: &Global, args: &ModelArgs) -> CliResult {
    let plan = plan_for(g, args, 1)?;
    let (loaded, _) = load_data(g, args)?;
    let prepared = prepare(loaded.source(), &plan, 0)?;
    ensure_dir(&g.out_dir)?;
    let n = plan.n;
    let path = model_path(&g.out_dir, plan.classifier, n);
    progress(g, format_args!("training {} on {} rows", plan.classifier, prepared.train.len()));
    match plan.classifier {
        Classifier::NearN => {
            let model = knn_fit(&prepared.train, args.k.unwrap_or(DEFAULT_K))?;
            atomically(&path, |tmp| model.save(tmp, n))?;
        }
        Classifier::Cnn2 | Classifier::Cnn3 => {
            let variant = if plan.classifier == Classifier::Cnn2 { CnnVariant::Cnn2 } else { CnnVariant::Cnn3 };
            let model = cnn_build(variant, n, derive_seed(plan.seed, Purpose::CnnInit, 0))?;
            println!("parameters={}", model.parameter_count());
            let mut cfg = plan.cnn.clone();
            cfg.shuffle_seed = derive_seed(plan.seed, Purpose::CnnShuffle, 0);
            let (model, history) = cnn_train(model, &prepared.train, None, &cfg)?;
            if let Some(l) = history.epoch_loss.last() {
                println!("final_loss={l:.6}");
            }
            atomically(&path, |tmp| model.save(tmp, &cfg))?;
        }
        Classifier::Lgbm => {
            let mut cfg = plan.gbdt.clone();
            cfg.seed = derive_seed(plan.seed, Purpose::GbdtBagging, 0);
            let (model, history) = gbdt_fit(&prepared.train, Some(&prepared.validation), &cfg)?;
            println!("trees={}", history.best_iteration);
            atomically(&path, |tmp| model.save(tmp))?;
        }
    }
    let mpath = g.out_dir.join(format!("split_{}_n{n}.txt", plan.classifier));
    atomically(&mpath, |tmp| prepared.manifest.write(tmp))?;
    println!("train={} validation={}", prepared.train.len(), prepared.validation.len());
    println!("model={}", path.display());
    Ok(())
}

/// Writes the headline json, text and figure plus a summary of all runs.
fn write_reports(dir: &Path, stem: &str, result: &ExperimentResult) -> CliResult<()> {
    let head = result.headline_report();
    write_text(&dir.join(format!("{stem}.json")), &head.to_json())?;
    write_text(&dir.join(format!("{stem}.txt")), &render_text(head))?;
    write_text(&dir.join(format!("{stem}.svg")), &render_svg(head))?;
    let summary = serde_summary(result);
    write_text(&dir.join(format!("{stem}_summary.txt")), &summary)?;
    Ok(())
}

fn serde_summary(result: &ExperimentResult) -> String {
    let mut s = String::new();
    for (i, r) in result.runs.iter().enumerate() {
        let mark = if i == result.headline { "  (headline)" } else { "" };
        s.push_str(&format!("repetition {i}: accuracy {:.4} confusion {:?}{mark}\n", r.accuracy, r.confusion));
    }
    s.push_str(&format!(
        "mean {:.4} min {:.4} max {:.4}\n",
        result.mean_accuracy, result.min_accuracy, result.max_accuracy
    ));
    s
}

fn run_logged<'a>(
    g: &Global,
    source: impl Into<DataSource<'a>>,
    plan: &ExperimentPlan,
    generate_ms: u64,
) -> CliResult<ExperimentResult> {
    let dir = g.out_dir.clone();
    let stem = format!("report_{}_n{}", plan.classifier, plan.n);
    let result = run_experiment_on(source, plan, generate_ms, |r: &EvalReport| {
        progress(
            g,
            format_args!(
                "{} n={} repetition {}: accuracy {:.4} ({} ms train)",
                r.classifier, r.n, r.seeds.repetition, r.accuracy, r.timings_ms.train
            ),
        );
        write_text(&dir.join(format!("{stem}_rep{}.json", r.seeds.repetition)), &r.to_json())
    })?;
    write_reports(&dir, &stem, &result)?;
    Ok(result)
}

fn eval(g: &Global, args: &ModelArgs, repetitions: usize) -> CliResult {
    let plan = plan_for(g, args, repetitions)?;
    let (loaded, generate_ms) = load_data(g, args)?;
    ensure_dir(&g.out_dir)?;
    let result = run_logged(g, loaded.source(), &plan, generate_ms)?;
    let head = result.headline_report();
    print!("{}", render_text(head));
    if let Some(c) = head.config.get("parameters") {
        println!("parameters={c}");
    }
    Ok(())
}

fn repro(
    g: &Global,
    table: u8,
    n: Option<usize>,
    repetitions: usize,
    subsample: Option<f64>,
    iterations: Option<usize>,
) -> CliResult {
    if repetitions == 0 {
        return Err(CliError::Usage("--repetitions must be positive".into()));
    }
    if let Some(f) = subsample {
        if !(f > 0.0 && f <= 1.0) {
            return Err(CliError::Usage(format!("--subsample {f} outside (0, 1]")));
        }
    }
    let ns = n.map_or(vec![12, 13, 14], |n| vec![n]);
    ensure_dir(&g.out_dir)?;
    let mut measured = Vec::new();
    let mut table_rows = Vec::new();
    let mut figures = String::new();
    for &n in &ns {
        let t0 = Instant::now();
        let triples = generate(n)?;
        let generate_ms = t0.elapsed().as_millis() as u64;
        let (zeros, ones) = triples.class_counts();
        progress(g, format_args!("n={n}: {} triples, zeros={zeros} ones={ones}", triples.len()));
        let mut cells = [None; 4];
        for (col, c) in Classifier::ALL.into_iter().enumerate() {
            let mut plan = ExperimentPlan::reproduction(n, c, g.seed);
            plan.repetitions = repetitions;
            plan.train_subsample = subsample;
            if let Some(it) = iterations {
                plan.gbdt.num_iterations = it;
            }
            let result = run_logged(g, &triples, &plan, generate_ms)?;
            let head = result.headline_report();
            cells[col] = Some(head.accuracy);
            measured.push((n, c, head.accuracy));
            if table == 2 {
                let fig = g.out_dir.join(format!("confusion_{c}_n{n}.svg"));
                write_text(&fig, &render_svg(head))?;
                let (e0, e1) = head.class_errors();
                figures.push_str(&format!(
                    "n={n} {:<5} confusion {:?}  errors class0={e0} class1={e1}  figure {}\n",
                    c.label(),
                    head.confusion,
                    fig.display()
                ));
            }
        }
        let per_class = reference_row(n).map_or(0, |r| r.per_class);
        table_rows.push((n, per_class, cells));
    }
    let ours = render_accuracy_table(&table_rows);
    if table == 2 {
        write_text(&g.out_dir.join("table2.txt"), &figures)?;
        print!("{figures}");
        return Ok(());
    }
    let (cells, orderings) = compare_with_reference(&measured);
    let comparison = render_comparison(&cells, &orderings);
    let body = format!("{ours}\n{comparison}");
    write_text(&g.out_dir.join("table1.txt"), &body)?;
    print!("{body}");
    let failed = cells.iter().filter(|c| !c.passed).count() + orderings.iter().filter(|o| !o.1).count();
    if failed > 0 {
        return Err(CliError::Verification(format!("{failed} comparison(s) outside tolerance")));
    }
    Ok(())
}

fn verify(g: &Global, level: LevelArg, n: Option<usize>) -> CliResult {
    let level = match level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    };
    let max_n = n.unwrap_or(level.default_max_n());
    let t0 = Instant::now();
    let outcomes = run_suite(level, max_n, g.seed, |o| println!("{o}"))?;
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    progress(g, format_args!("{} checks in {:.1?}", outcomes.len(), t0.elapsed()));
    if failed > 0 {
        return Err(CliError::Verification(format!("{failed} check(s) failed")));
    }
    println!("all {} checks passed", outcomes.len());
    Ok(())
}
