//! `ynprov`: generate YNote corpora, train the provenance classifier, and
//! evaluate or explain it.

mod manifest;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::{manifest_path, FileHash, RunManifest};
use ynote_provenance::corpus::{self, generate_corpus, GeneratorConfig, LabeledSong};
use ynote_provenance::eval::stratified_split;
use ynote_provenance::pipeline::{self, corpus_hash, render_explanation};
use ynote_provenance::{
    from_toml, ClassWeight, Classifier, ErrorKind, ModelArtifact, PipelineConfig, Sign, SourceClass, SplitSpec,
};

#[derive(Parser)]
#[command(name = "ynprov", version, about = "Classify YNote songs as Native, Algorithm, or LLM generated")]
struct Cli {
    /// Write the run manifest here instead of next to the output.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic three-source corpus.
    Generate(GenerateArgs),
    /// Split a corpus into train/val/test files.
    Split(SplitArgs),
    /// Fit vocabulary, SMOTE and the one-vs-rest model; write a model artifact.
    Train(TrainArgs),
    /// Classify one YNote string (argument or stdin).
    Predict(PredictArgs),
    /// Score a model on a labeled corpus.
    Evaluate(EvaluateArgs),
    /// Show each class's strongest positive and negative n-grams.
    Explain(ExplainArgs),
    /// Stratified k-fold cross-validation of the full pipeline.
    Cv(CvArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Native song count [default: 300]
    #[arg(long)]
    native: Option<usize>,
    /// Algorithm song count [default: 300]
    #[arg(long)]
    algorithm: Option<usize>,
    /// LLM song count [default: 300]
    #[arg(long)]
    llm: Option<usize>,
    /// Corpus file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    corpus: PathBuf,
    /// Split spec (TOML with train/val/test/seed/stratified).
    #[arg(long)]
    config: Option<PathBuf>,
    /// [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// [default: 0.65]
    #[arg(long)]
    train: Option<f64>,
    /// [default: 0.15]
    #[arg(long)]
    val: Option<f64>,
    /// [default: 0.20]
    #[arg(long)]
    test: Option<f64>,
    /// Directory for train.tsv, val.tsv and test.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Balanced,
    Uniform,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline config (TOML with vectorizer, smote and train tables).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for SMOTE and model initialization [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// [default: 1]
    #[arg(long)]
    ngram_min: Option<usize>,
    /// [default: 3]
    #[arg(long)]
    ngram_max: Option<usize>,
    /// [default: 8000]
    #[arg(long)]
    max_features: Option<usize>,
    /// Minimum document count [default: 3]
    #[arg(long)]
    min_df: Option<usize>,
    /// Maximum document proportion [default: 0.95]
    #[arg(long)]
    max_df: Option<f64>,
    /// Train on the unbalanced data.
    #[arg(long)]
    no_smote: bool,
    /// [default: balanced]
    #[arg(long, value_enum)]
    class_weight: Option<WeightArg>,
}

impl PipelineArgs {
    fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut c: PipelineConfig = match &self.config {
            Some(p) => from_toml(&read_text(p)?)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            c = c.with_seed(s);
        }
        let v = &mut c.vectorizer;
        v.ngram_min = self.ngram_min.unwrap_or(v.ngram_min);
        v.ngram_max = self.ngram_max.unwrap_or(v.ngram_max);
        v.max_features = self.max_features.unwrap_or(v.max_features);
        v.min_df = self.min_df.unwrap_or(v.min_df);
        v.max_df = self.max_df.unwrap_or(v.max_df);
        if self.no_smote {
            c.smote_enabled = false;
        }
        if let Some(w) = self.class_weight {
            c.train.class_weight = match w {
                WeightArg::Balanced => ClassWeight::Balanced,
                WeightArg::Uniform => ClassWeight::Uniform,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct TrainArgs {
    corpus: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Model artifact to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// YNote string; read from stdin when omitted.
    ynote: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    corpus: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CvArgs {
    corpus: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Also write the CV report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

/// Pending file writes, flushed only after every step has succeeded.
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.files.push((path, bytes.into()));
    }

    fn flush(self, manifest: &mut RunManifest, inputs: &[PathBuf], manifest_to: Option<PathBuf>) -> anyhow::Result<()> {
        for (p, bytes) in &self.files {
            if inputs.iter().any(|i| same_file(i, p)) {
                bail!(io::Error::new(io::ErrorKind::InvalidInput, format!("refusing to overwrite input {}", p.display())));
            }
            manifest.outputs.push(FileHash::of(p, bytes));
        }
        for (p, bytes) in &self.files {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?;
        }
        match manifest_to {
            Some(p) => fs::write(&p, manifest.to_json()).with_context(|| format!("writing {}", p.display()))?,
            None => eprint!("{}", manifest.to_json()),
        }
        Ok(())
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_songs(path: &Path, manifest: &mut RunManifest) -> anyhow::Result<Vec<LabeledSong>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    manifest.inputs.push(FileHash::of(path, &bytes));
    let report = corpus::read_corpus(bytes.as_slice())?;
    if !report.errors.is_empty() {
        for e in report.errors.iter().take(20) {
            eprintln!("{}:{}: {}", path.display(), e.line, e.message);
        }
        return Err(ynote_provenance::Error::from(corpus::CorpusError::Aggregated(report.errors)))
            .with_context(|| format!("malformed corpus {}", path.display()));
    }
    Ok(report.songs)
}

fn load_model(path: &Path, manifest: &mut RunManifest) -> anyhow::Result<Classifier> {
    let text = read_text(path)?;
    manifest.inputs.push(FileHash::of(path, text.as_bytes()));
    let artifact = ModelArtifact::from_json(&text)
        .map_err(ynote_provenance::Error::from)
        .with_context(|| format!("loading model {}", path.display()))?;
    Classifier::from_artifact(&artifact).with_context(|| format!("loading model {}", path.display()))
}

fn corpus_bytes(songs: &[LabeledSong]) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    corpus::write_corpus(songs, &mut buf)?;
    Ok(buf)
}

fn cmd_generate(a: &GenerateArgs, manifest_flag: Option<&Path>) -> anyhow::Result<()> {
    let mut m = RunManifest::new("generate");
    let mut cfg = match &a.config {
        Some(p) => {
            let text = read_text(p)?;
            m.inputs.push(FileHash::of(p, text.as_bytes()));
            GeneratorConfig::from_toml(&text)?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    for (class, count) in [(SourceClass::Native, a.native), (SourceClass::Algorithm, a.algorithm), (SourceClass::Llm, a.llm)] {
        let Some(count) = count else { continue };
        match cfg.classes.iter_mut().find(|c| c.class == class) {
            Some(spec) => spec.count = count,
            None => cfg.classes.push(corpus::ClassSpec::new(class, count)),
        }
    }
    cfg.validate()?;
    m.config(&cfg);
    m.seed("generator", cfg.seed);
    let songs = m.time("generate", || generate_corpus(&cfg))?;
    let mut out = Outputs::new();
    out.add(a.out.clone(), corpus_bytes(&songs)?);
    let counts = corpus::labels(&songs).iter().fold([0usize; 3], |mut acc, &l| {
        acc[l] += 1;
        acc
    });
    out.flush(&mut m, &[], manifest_path(manifest_flag, Some(&a.out), false))?;
    println!("wrote {} songs to {} (Native={} Algorithm={} LLM={})", songs.len(), a.out.display(), counts[0], counts[1], counts[2]);
    Ok(())
}

fn cmd_split(a: &SplitArgs, manifest_flag: Option<&Path>) -> anyhow::Result<()> {
    let mut m = RunManifest::new("split");
    let mut spec: SplitSpec = match &a.config {
        Some(p) => from_toml(&read_text(p)?)?,
        None => SplitSpec::default(),
    };
    spec.train = a.train.unwrap_or(spec.train);
    spec.val = a.val.unwrap_or(spec.val);
    spec.test = a.test.unwrap_or(spec.test);
    spec.seed = a.seed.unwrap_or(spec.seed);
    spec.validate().map_err(ynote_provenance::Error::from)?;
    if !spec.stratified {
        bail!(ynote_provenance::Error::Config("only stratified splitting is supported".into()));
    }
    m.config(&spec);
    m.seed("split", spec.seed);
    let songs = load_songs(&a.corpus, &mut m)?;
    let idx = m.time("split", || stratified_split(&corpus::labels(&songs), &spec)).map_err(ynote_provenance::Error::from)?;
    let mut out = Outputs::new();
    for (name, part) in [("train", &idx.train), ("val", &idx.val), ("test", &idx.test)] {
        let picked: Vec<LabeledSong> = part.iter().map(|&i| songs[i].clone()).collect();
        out.add(a.out.join(format!("{name}.tsv")), corpus_bytes(&picked)?);
        println!("{name}: {} songs", picked.len());
    }
    out.flush(&mut m, std::slice::from_ref(&a.corpus), manifest_path(manifest_flag, Some(&a.out), true))?;
    Ok(())
}

fn cmd_train(a: &TrainArgs, manifest_flag: Option<&Path>) -> anyhow::Result<()> {
    let mut m = RunManifest::new("train");
    let cfg = a.pipeline.resolve()?;
    m.config(&cfg);
    m.seed("smote", cfg.smote.seed);
    m.seed("train", cfg.train.seed);
    let songs = load_songs(&a.corpus, &mut m)?;
    let trained = m.time("train", || pipeline::train(&songs, &cfg))?;
    print!("{}", trained.summary.render());
    let mut out = Outputs::new();
    out.add(a.out.clone(), trained.artifact.to_json());
    out.flush(&mut m, std::slice::from_ref(&a.corpus), manifest_path(manifest_flag, Some(&a.out), false))?;
    println!("training data sha256: {}", corpus_hash(&songs));
    println!("model written to {}", a.out.display());
    Ok(())
}

fn cmd_predict(a: &PredictArgs, manifest_flag: Option<&Path>) -> anyhow::Result<()> {
    let mut m = RunManifest::new("predict");
    let clf = load_model(&a.model, &mut m)?;
    let text = match &a.ynote {
        Some(s) => s.clone(),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("reading stdin")?;
            s
        }
    };
    let p = clf.classify_str(text.trim())?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&p)?);
    } else {
        println!("{}", p.name);
        for (name, prob) in &p.probabilities {
            println!("  {name:<10} {prob:.6}");
        }
    }
    Outputs::new().flush(&mut m, &[], manifest_path(manifest_flag, None, false))
}

fn cmd_evaluate(a: &EvaluateArgs, manifest_flag: Option<&Path>) -> anyhow::Result<()> {
    let mut m = RunManifest::new("evaluate");
    let clf = load_model(&a.model, &mut m)?;
    let songs = load_songs(&a.corpus, &mut m)?;
    let report = m.time("evaluate", || clf.evaluate(&songs))?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    if a.json {
        print!("{json}");
    } else {
        print!("{}", report.render_table());
    }
    let mut out = Outputs::new();
    if let Some(p) = &a.out {
        out.add(p.clone(), json);
    }
    out.flush(&mut m, &[a.model.clone(), a.corpus.clone()], manifest_path(manifest_flag, a.out.as_deref(), false))
}

fn cmd_explain(a: &ExplainArgs, manifest_flag: Option<&Path>) -> anyhow::Result<()> {
    let mut m = RunManifest::new("explain");
    m.config(&serde_json::json!({ "top_k": a.top_k }));
    let clf = load_model(&a.model, &mut m)?;
    let ex = clf.explain(a.top_k)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&ex)?);
    } else {
        println!("Top {} positive features", a.top_k);
        print!("{}", render_explanation(&ex, Sign::Positive));
        println!();
        println!("Top {} negative features", a.top_k);
        print!("{}", render_explanation(&ex, Sign::Negative));
    }
    Outputs::new().flush(&mut m, &[], manifest_path(manifest_flag, None, false))
}

fn cmd_cv(a: &CvArgs, manifest_flag: Option<&Path>) -> anyhow::Result<()> {
    let mut m = RunManifest::new("cv");
    let cfg = a.pipeline.resolve()?;
    let seed = a.pipeline.seed.unwrap_or(cfg.train.seed);
    m.config(&serde_json::json!({ "pipeline": cfg, "folds": a.folds }));
    m.seed("folds", seed);
    m.seed("smote", cfg.smote.seed);
    m.seed("train", cfg.train.seed);
    let songs = load_songs(&a.corpus, &mut m)?;
    let (report, outcomes) = m.time("cv", || pipeline::cross_validate(&songs, &cfg, a.folds, seed))?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    if a.json {
        print!("{json}");
    } else {
        for o in &outcomes {
            println!("fold {}: train={} test={} vocabulary={} accuracy={:.4}", o.fold + 1, o.n_train, o.n_test, o.vocabulary.len(), o.accuracy);
        }
        println!("{}-fold CV accuracy: {:.4} ± {:.4}", report.folds, report.mean_accuracy, report.std_accuracy);
    }
    let mut out = Outputs::new();
    if let Some(p) = &a.out {
        out.add(p.clone(), json);
    }
    out.flush(&mut m, std::slice::from_ref(&a.corpus), manifest_path(manifest_flag, a.out.as_deref(), false))
}

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_MALFORMED: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;
const EXIT_IO: u8 = 5;

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<ynote_provenance::Error>() {
        return match e.kind() {
            ErrorKind::InvalidConfig => EXIT_CONFIG,
            ErrorKind::MalformedData => EXIT_MALFORMED,
            ErrorKind::DegenerateData => EXIT_DEGENERATE,
            ErrorKind::Io => EXIT_IO,
        };
    }
    if err.chain().any(|c| c.is::<io::Error>()) {
        return EXIT_IO;
    }
    EXIT_OTHER
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mf = cli.manifest.as_deref();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a, mf),
        Command::Split(a) => cmd_split(a, mf),
        Command::Train(a) => cmd_train(a, mf),
        Command::Predict(a) => cmd_predict(a, mf),
        Command::Evaluate(a) => cmd_evaluate(a, mf),
        Command::Explain(a) => cmd_explain(a, mf),
        Command::Cv(a) => cmd_cv(a, mf),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
