use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use entlink::blocking::BlockingIndex;
use entlink::checkpoint::{write_atomic, Checkpoint};
use entlink::config::PipelineConfig;
use entlink::fixtures;
use entlink::model::{load_entities, load_mentions, write_mentions, KnowledgeBase, Mention};
use entlink::pipeline::{self, DecisionRecord, EvalRecord};
use entlink::semantic::{BagOfEmbeddings, ContextEncoder, PrecomputedVectors};
use entlink::vectors::{load_word_vectors, WordVectors};

#[derive(Parser)]
#[command(name = "entlink", version, about = "Link entity mentions to a knowledge base")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the fuzzy-match candidates of every mention.
    Block(Opts),
    /// Train the entity encoder and scorer, then write a checkpoint.
    Train(Opts),
    /// Resolve every mention to an entity or to no link.
    Link(Opts),
    /// Score a labeled pairs file and report metrics.
    Eval(Opts),
    /// Write the built-in demo and synthetic corpora.
    Fixtures(FixtureOpts),
}

#[derive(Args, Default)]
struct Opts {
    #[arg(long, value_name = "PATH")]
    entities: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    mentions: Option<PathBuf>,
    /// Word vectors in word2vec text format.
    #[arg(long, value_name = "PATH")]
    vectors: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Blocking threshold on the fuzzy score.
    #[arg(long, value_name = "F")]
    threshold: Option<f64>,
    /// Score a pair must exceed to be linked.
    #[arg(long, value_name = "F")]
    decision_threshold: Option<f64>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Include every candidate and its score in link output.
    #[arg(long)]
    explain: bool,
    /// Identity activation between the two head layers.
    #[arg(long)]
    linear_head: bool,
    /// JSON config; flags take precedence over it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file (standard output when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Labeled pairs for `eval`.
    #[arg(long, value_name = "PATH")]
    pairs: Option<PathBuf>,
    /// Precomputed mention context vectors, used instead of word-vector pooling.
    #[arg(long, value_name = "PATH")]
    context_vectors: Option<PathBuf>,
    /// Also write the labeled training pairs here.
    #[arg(long, value_name = "PATH")]
    dataset_out: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureOpts {
    #[arg(long, value_name = "DIR")]
    dir: PathBuf,
    #[arg(long, value_name = "N", default_value_t = 42)]
    seed: u64,
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().with_context(|| format!("missing --{flag}"))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_entities(path: &Path) -> Result<KnowledgeBase> {
    load_entities(open(path)?).with_context(|| format!("{}", path.display()))
}

fn read_mentions(path: &Path) -> Result<Vec<Mention>> {
    load_mentions(open(path)?).with_context(|| format!("{}", path.display()))
}

fn read_vectors(path: &Path) -> Result<WordVectors> {
    load_word_vectors(open(path)?).with_context(|| format!("{}", path.display()))
}

/// Layers: defaults, then `base` (a checkpoint's config), then the config
/// file, then flags.
fn resolve_config(opts: &Opts, base: Option<&Value>) -> Result<PipelineConfig> {
    let mut layer = base.cloned().unwrap_or_else(|| PipelineConfig::default().echo());
    if let Some(path) = &opts.config {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let patch: Value = serde_json::from_str(&text).with_context(|| format!("{}", path.display()))?;
        entlink::config::merge(&mut layer, &patch);
    }
    let mut flags = json!({});
    if let Some(t) = opts.threshold {
        flags["blocking"] = json!({ "threshold": t });
    }
    if let Some(s) = opts.seed {
        flags["train"] = json!({ "seed": s });
    }
    let mut scorer = json!({});
    if opts.linear_head {
        scorer["linear_head"] = json!(true);
    }
    if let Some(t) = opts.decision_threshold {
        scorer["decision_threshold"] = json!(t);
    }
    flags["scorer"] = scorer;
    let mut cfg = PipelineConfig::from_layers(&PipelineConfig::default().echo(), Some(&layer))
        .and_then(|c| PipelineConfig::from_layers(&c.echo(), Some(&flags)))
        .context("invalid configuration")?;
    cfg.paths.entities = opts.entities.clone();
    cfg.paths.mentions = opts.mentions.clone();
    cfg.paths.vectors = opts.vectors.clone();
    cfg.paths.context_vectors = opts.context_vectors.clone();
    cfg.paths.checkpoint = opts.checkpoint.clone();
    cfg.paths.out = opts.out.clone();
    Ok(cfg)
}

/// Writes to `path` atomically, or to standard output.
fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut buf = Vec::new();
            body(&mut buf)?;
            write_atomic(p, &buf).with_context(|| format!("cannot write {}", p.display()))?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn context_encoder<'a>(opts: &Opts, vectors: &'a WordVectors) -> Result<Box<dyn ContextEncoder + 'a>> {
    Ok(match &opts.context_vectors {
        Some(p) => Box::new(PrecomputedVectors::load(open(p)?).with_context(|| format!("{}", p.display()))?),
        None => Box::new(BagOfEmbeddings::new(vectors)),
    })
}

fn cmd_block(opts: &Opts) -> Result<()> {
    let cfg = resolve_config(opts, None)?;
    let kb = read_entities(required(&opts.entities, "entities")?)?;
    let mentions = read_mentions(required(&opts.mentions, "mentions")?)?;
    let candidates = BlockingIndex::new(&kb).candidates_batch(&mentions, &cfg.blocking)?;
    let total: usize = candidates.iter().map(Vec::len).sum();
    emit(opts.out.as_deref(), |w| {
        pipeline::write_header(w, pipeline::CANDIDATES_FORMAT, &cfg)?;
        for c in candidates.iter().flatten() {
            pipeline::write_record(w, c)?;
        }
        Ok(())
    })?;
    eprintln!("{} mentions, {} candidate pairs", mentions.len(), total);
    Ok(())
}

fn cmd_train(opts: &Opts) -> Result<()> {
    let cfg = resolve_config(opts, None)?;
    let out = required(&opts.checkpoint, "checkpoint")?;
    let kb = read_entities(required(&opts.entities, "entities")?)?;
    let mentions = read_mentions(required(&opts.mentions, "mentions")?)?;
    let vectors = read_vectors(required(&opts.vectors, "vectors")?)?;
    let context = context_encoder(opts, &vectors)?;
    let trained = pipeline::train(&kb, &mentions, &vectors, context.as_ref(), &cfg)?;

    let s = &trained.summary;
    eprintln!(
        "{} supervision: {} pairs ({} positive), {} triplets",
        s.supervision, s.pairs, s.positives, s.triplets
    );
    if let Some(last) = s.epochs.last() {
        eprintln!("epoch {}: loss {:.4}, accuracy {:.4}", last.epoch, last.loss, last.accuracy);
    }
    if let Some(h) = &s.holdout {
        eprintln!("held-out pairs:\n{h}");
    }
    if let Some(p) = &opts.dataset_out {
        emit(Some(p), |w| {
            pipeline::write_header(w, pipeline::DATASET_FORMAT, &cfg)?;
            for pair in &trained.dataset {
                pipeline::write_record(w, pair)?;
            }
            Ok(())
        })?;
    }
    trained
        .checkpoint(&cfg, &vectors)
        .save(out)
        .with_context(|| format!("cannot write {}", out.display()))?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn load_checkpoint(opts: &Opts) -> Result<Checkpoint> {
    let p = required(&opts.checkpoint, "checkpoint")?;
    Checkpoint::load(p).with_context(|| format!("{}", p.display()))
}

fn cmd_link(opts: &Opts) -> Result<()> {
    let ck = load_checkpoint(opts)?;
    let cfg = resolve_config(opts, Some(&ck.config))?;
    let kb = read_entities(required(&opts.entities, "entities")?)?;
    let mentions = read_mentions(required(&opts.mentions, "mentions")?)?;
    let vectors = read_vectors(required(&opts.vectors, "vectors")?)?;
    let context = context_encoder(opts, &vectors)?;
    let decisions = pipeline::link(&ck, &kb, &mentions, &vectors, context.as_ref(), &cfg)?;
    emit(opts.out.as_deref(), |w| {
        pipeline::write_header(w, pipeline::DECISIONS_FORMAT, &cfg)?;
        for (m, d) in mentions.iter().zip(&decisions) {
            pipeline::write_record(w, &DecisionRecord::new(m, d, opts.explain))?;
        }
        Ok(())
    })?;
    let linked = decisions.iter().filter(|d| d.linked).count();
    eprintln!("{} of {} mentions linked", linked, decisions.len());
    Ok(())
}

fn cmd_eval(opts: &Opts) -> Result<()> {
    let pairs_path = required(&opts.pairs, "pairs")?;
    let (_, records): (_, Vec<EvalRecord>) =
        pipeline::read_records(open(pairs_path)?, pipeline::PAIRS_FORMAT)
            .with_context(|| format!("{}", pairs_path.display()))?;
    let (cfg, scores) = match &opts.checkpoint {
        Some(_) => {
            let ck = load_checkpoint(opts)?;
            let cfg = resolve_config(opts, Some(&ck.config))?;
            let kb = read_entities(required(&opts.entities, "entities")?)?;
            let vectors = read_vectors(required(&opts.vectors, "vectors")?)?;
            let context = context_encoder(opts, &vectors)?;
            let scores = pipeline::score_records(&ck.model, &records, &kb, &vectors, context.as_ref())?;
            (cfg, scores)
        }
        None => {
            let cfg = resolve_config(opts, None)?;
            let scores = records
                .iter()
                .enumerate()
                .map(|(i, r)| r.score.with_context(|| format!("record {} has no score and no --checkpoint was given", i + 1)))
                .collect::<Result<Vec<f64>>>()?;
            (cfg, scores)
        }
    };
    let report = pipeline::evaluate(&records, &scores, cfg.scorer.decision_threshold)?;
    print!("{report}");
    if let Some(p) = &opts.out {
        let doc = json!({
            "format": pipeline::METRICS_FORMAT,
            "version": pipeline::ARTIFACT_VERSION,
            "config": cfg.echo(),
            "metrics": report,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        write_atomic(p, text.as_bytes()).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

fn write_pairs(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        pipeline::write_record(&mut buf, r)?;
    }
    write_atomic(path, &buf)?;
    Ok(())
}

fn cmd_fixtures(opts: &FixtureOpts) -> Result<()> {
    let demo = opts.dir.join("demo");
    fs::create_dir_all(&demo)?;
    let (kb, mentions) = fixtures::demo_corpus();
    kb.write_jsonl(File::create(demo.join("entities.jsonl"))?)?;
    write_mentions(&mentions, File::create(demo.join("mentions.jsonl"))?)?;

    let synthetic = opts.dir.join("synthetic");
    let corpus = fixtures::synthetic_corpus(opts.seed);
    corpus.write(&synthetic)?;
    let probe = fixtures::david_davis_probe(opts.seed);
    write_mentions(&[probe], File::create(synthetic.join("probe.jsonl"))?)?;

    let eval = opts.dir.join("eval");
    fs::create_dir_all(&eval)?;
    let pair = |doc: &str, entity: &str, label: u8, score: f64| EvalRecord {
        doc_id: doc.into(),
        text: "joe adam".into(),
        context: String::new(),
        entity_id: entity.into(),
        label,
        score: Some(score),
    };
    let perfect = [
        pair("d1", "Q1", 1, 0.95),
        pair("d1", "Q2", 0, 0.10),
        pair("d2", "Q3", 1, 0.80),
        pair("d2", "Q1", 0, 0.30),
    ];
    let inverted: Vec<EvalRecord> = perfect
        .iter()
        .map(|r| EvalRecord { score: r.score.map(|s| 1.0 - s), ..r.clone() })
        .collect();
    write_pairs(&eval.join("perfect.jsonl"), &perfect)?;
    write_pairs(&eval.join("inverted.jsonl"), &inverted)?;
    eprintln!("wrote fixtures under {}", opts.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Block(o) => cmd_block(o),
        Command::Train(o) => cmd_train(o),
        Command::Link(o) => cmd_link(o),
        Command::Eval(o) => cmd_eval(o),
        Command::Fixtures(o) => cmd_fixtures(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
