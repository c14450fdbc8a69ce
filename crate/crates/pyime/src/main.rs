use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use pyime::build::{self, BuildSpec, DomainSource};
use pyime::config::Config;
use pyime::eval::{self, EvalOptions};
use pyime::service::{self, AppState, PredictRequest};
use pyime::{io, train};
use pyime_core::dataset::{ContextBucket, TargetBucket};
use pyime_core::{Modes, PinyinMode, Variant};

/// Pinyin input method engine: lexicon and dataset tools, training,
/// evaluation and a prediction service.
#[derive(Parser, Debug)]
#[command(name = "pyime", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file; command-line flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a lexicon file and write it back in normalized form.
    BuildLexicon {
        #[command(flatten)]
        common: Common,
        /// Lexicon to check (`char<TAB>syllable[<TAB>rank]` rows).
        #[arg(long)]
        input: PathBuf,
        /// Where to write the normalized lexicon; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample evaluation instances from domain corpora into JSONL files.
    BuildDataset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Domain corpus as NAME=PATH; repeat for several domains.
        #[arg(long = "domain", value_parser = parse_domain)]
        domains: Vec<DomainSource>,
        /// Instances per (context, target) configuration.
        #[arg(long)]
        per_config: Option<usize>,
        /// Output directory for the JSONL files and manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a corpus with one sentence per line.
    Train(TrainArgs),
    /// Decode a dataset and report P@K per configuration and domain.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        files: ModelFiles,
        /// Build directory, manifest, JSONL file, or `<pinyin>\t<target>` .tsv file.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_mode, default_value = "perfect")]
        mode: PinyinMode,
        #[arg(long, default_value_t = 16)]
        beam_size: usize,
        /// Comma-separated K values.
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        ks: Vec<usize>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the per-instance hit log (JSONL) here.
        #[arg(long)]
        hits: Option<PathBuf>,
    },
    /// Compare mean per-instance decoding latency of several models.
    Latency {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to time; repeat for each model.
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_mode, default_value = "perfect")]
        mode: PinyinMode,
        #[arg(long, default_value_t = 16)]
        beam_size: usize,
        /// Keep only instances with this context bucket (0-3, 4-9, 10+).
        #[arg(long)]
        context_bucket: Option<String>,
        /// Keep only instances with this target bucket (1-3, 4-9, 10+).
        #[arg(long)]
        target_bucket: Option<String>,
        /// Use at most this many instances.
        #[arg(long)]
        limit: Option<usize>,
        /// Write the rows as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Decode one request and print `rank<TAB>text<TAB>score` lines.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        files: ModelFiles,
        #[arg(long, default_value = "")]
        context: String,
        /// Space-separated pinyin tokens, one per character.
        #[arg(long)]
        pinyin: String,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<PinyinMode>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        beam_size: Option<usize>,
    },
    /// Serve predictions over HTTP.
    Serve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        files: ModelFiles,
        /// Address to listen on, e.g. 127.0.0.1:8080 (env PYIME_BIND).
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        beam_size: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Log filter such as info or debug (env PYIME_LOG).
        #[arg(long)]
        log: Option<String>,
    },
}

#[derive(Args, Debug, Clone)]
struct ModelFiles {
    /// Model checkpoint.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Lexicon the model was trained with.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Training text, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Checkpoint path, rewritten at every checkpoint interval and at the end.
    #[arg(long)]
    out: PathBuf,
    /// Metrics log (`step<TAB>loss<TAB>lr<TAB>examples_seen`); defaults to OUT.metrics.tsv.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// baseline, concat or embed.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Pinyin modes the model accepts: perfect, abbrev or both.
    #[arg(long, value_parser = parse_modes)]
    modes: Option<Modes>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    d_ff: Option<usize>,
    #[arg(long)]
    max_positions: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    warmup: Option<u64>,
    /// Examples are added to a batch until it holds this many tokens.
    #[arg(long)]
    batch_tokens: Option<usize>,
    /// Normalize target predictions over their pinyin class (true/false).
    #[arg(long)]
    pc_loss: Option<bool>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
}

fn parse_domain(s: &str) -> Result<DomainSource, String> {
    let (name, path) = s.split_once('=').ok_or("expected NAME=PATH")?;
    Ok(DomainSource { name: name.into(), path: path.into() })
}

fn parse_mode(s: &str) -> Result<PinyinMode, String> {
    PinyinMode::from_name(s).ok_or_else(|| format!("unknown mode {s:?} (perfect or abbrev)"))
}

fn parse_modes(s: &str) -> Result<Modes, String> {
    Modes::from_name(s).ok_or_else(|| format!("unknown modes {s:?} (perfect, abbrev or both)"))
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::from_name(s).ok_or_else(|| format!("unknown variant {s:?} (baseline, concat or embed)"))
}

fn parse_bucket<T>(s: &str, all: [T; 3], label: fn(T) -> &'static str) -> anyhow::Result<T>
where
    T: Copy,
{
    all.into_iter().find(|b| label(*b) == s).with_context(|| format!("unknown bucket {s:?}"))
}

fn lexicon_path(flag: Option<PathBuf>, cfg: &Config) -> anyhow::Result<PathBuf> {
    flag.or_else(|| cfg.lexicon.clone())
        .or_else(|| cfg.service.lexicon.clone())
        .context("no lexicon given (--lexicon or \"lexicon\" in the config file)")
}

fn model_path(flag: Option<PathBuf>, cfg: &Config) -> anyhow::Result<PathBuf> {
    flag.or_else(|| cfg.service.model.clone()).context("no model given (--model or service.model in the config file)")
}

fn init_logging(filter: &str, json: bool) {
    let filter = tracing_subscriber::EnvFilter::try_new(filter).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr);
    let _ = if json { builder.json().try_init() } else { builder.try_init() };
}

fn load_state(files: &ModelFiles, cfg: &Config) -> anyhow::Result<AppState> {
    let lexicon = io::load_lexicon(&lexicon_path(files.lexicon.clone(), cfg)?)?;
    let path = model_path(files.model.clone(), cfg)?;
    let model = io::load_model(&path, &lexicon)?;
    Ok(AppState::new(model, lexicon, io::model_id(&path), cfg.service.clone()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::BuildLexicon { common, input, output } => {
            let _cfg = Config::load(common.config.as_deref())?;
            let lex = io::load_lexicon(&input)?;
            let text = lex.to_tsv();
            match output {
                Some(path) => io::write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
            eprintln!(
                "{} characters, {} readings, {} syllables, {} abbreviation keys",
                lex.chars().len(),
                lex.reading_count(),
                lex.syllables().len(),
                lex.abbreviation_keys().len()
            );
        }
        Command::BuildDataset { common, lexicon, domains, per_config, out } => {
            let cfg = Config::load(common.config.as_deref())?;
            let base = cfg.dataset.clone();
            let spec = BuildSpec {
                domains: if domains.is_empty() { base.as_ref().map(|b| b.domains.clone()).unwrap_or_default() } else { domains },
                instances_per_config: per_config.or(base.as_ref().map(|b| b.instances_per_config)).unwrap_or(2000),
                seed: common.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0),
            };
            let lex = io::load_lexicon(&lexicon_path(lexicon, &cfg)?)?;
            let manifest = build::build(&spec, &lex, &out)?;
            for d in &manifest.domains {
                for c in &d.cells {
                    println!("{}\t{}\t{}\t{}\t{}", d.name, c.context_bucket, c.target_bucket, c.count, c.shortfall);
                }
            }
            eprintln!("{} instances written to {}", manifest.total, out.display());
        }
        Command::Train(args) => train_cmd(args)?,
        Command::Eval { common, files, dataset, mode, beam_size, ks, report, hits } => {
            let cfg = Config::load(common.config.as_deref())?;
            let state = load_state(&files, &cfg)?;
            let data = build::load_dataset(&dataset)?;
            let opts = EvalOptions { mode, beam_size, ks, model_id: state.model_id.clone(), seed: common.seed.unwrap_or(0) };
            let (hit_log, rep) = eval::evaluate(&state.model, &state.lexicon, &data, &opts)?;
            print!("{}", eval::render_table(&rep));
            println!("{}", serde_json::to_string_pretty(&rep)?);
            if let Some(p) = report {
                io::write_json(&p, &rep)?;
            }
            if let Some(p) = hits {
                io::write_jsonl(&p, &hit_log)?;
            }
        }
        Command::Latency { common, models, lexicon, dataset, mode, beam_size, context_bucket, target_bucket, limit, report } => {
            let cfg = Config::load(common.config.as_deref())?;
            if models.len() < 2 {
                bail!("give at least two --model checkpoints");
            }
            let lex = io::load_lexicon(&lexicon_path(lexicon, &cfg)?)?;
            let mut data = build::load_dataset(&dataset)?;
            if let Some(cb) = context_bucket {
                let cb = parse_bucket(&cb, ContextBucket::ALL, ContextBucket::label)?;
                data.retain(|i| i.context_bucket == cb);
            }
            if let Some(tb) = target_bucket {
                let tb = parse_bucket(&tb, TargetBucket::ALL, TargetBucket::label)?;
                data.retain(|i| i.target_bucket == tb);
            }
            if let Some(n) = limit {
                data.truncate(n);
            }
            let loaded: Vec<(String, pyime_core::Model)> = models
                .iter()
                .map(|p| Ok((io::model_id(p), io::load_model(p, &lex)?)))
                .collect::<anyhow::Result<_>>()?;
            let refs: Vec<(String, &pyime_core::Model)> = loaded.iter().map(|(id, m)| (id.clone(), m)).collect();
            let rows = eval::latency_compare(&refs, &lex, &data, mode, beam_size)?;
            print!("{}", eval::render_latency(&rows));
            if let Some(p) = report {
                io::write_json(&p, &rows)?;
            }
        }
        Command::Predict { common, files, context, pinyin, mode, top_k, beam_size } => {
            let cfg = Config::load(common.config.as_deref())?;
            let state = load_state(&files, &cfg)?;
            let beam_size = beam_size.unwrap_or(cfg.service.beam_size);
            let req = PredictRequest {
                context,
                pinyin: pinyin.split_whitespace().map(String::from).collect(),
                mode: mode.unwrap_or(state.model.vocab.default_mode()),
                top_k: top_k.unwrap_or(cfg.service.top_k.min(beam_size)),
                beam_size,
            };
            let resp = service::run_predict(&state, &req).map_err(|e| anyhow::anyhow!("{}: {}", e.code, e.message))?;
            for (i, c) in resp.candidates.iter().enumerate() {
                println!("{}\t{}\t{:.6}", i + 1, c.text, c.score);
            }
        }
        Command::Serve { common, files, bind, beam_size, top_k, log } => {
            let mut cfg = Config::load(common.config.as_deref())?;
            if let Some(b) = bind {
                cfg.service.bind = b;
            }
            if let Some(b) = beam_size {
                cfg.service.beam_size = b;
            }
            if let Some(k) = top_k {
                cfg.service.top_k = k;
            }
            if let Some(l) = log {
                cfg.service.log = l;
            }
            init_logging(&cfg.service.log, true);
            let state = load_state(&files, &cfg)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(state))?;
        }
    }
    Ok(())
}

fn train_cmd(a: TrainArgs) -> anyhow::Result<()> {
    let cfg = Config::load(a.common.config.as_deref())?;
    init_logging(&cfg.service.log, false);
    let mut spec = cfg.model.clone();
    let mut tc = cfg.train.clone();
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(spec.variant, a.variant);
    set!(spec.modes, a.modes);
    set!(spec.n_layers, a.layers);
    set!(spec.d_model, a.d_model);
    set!(spec.n_heads, a.heads);
    set!(spec.d_ff, a.d_ff);
    set!(spec.max_positions, a.max_positions);
    set!(spec.dropout, a.dropout);
    set!(tc.steps, a.steps);
    set!(tc.learning_rate, a.lr);
    set!(tc.warmup_steps, a.warmup);
    set!(tc.batch_size_tokens, a.batch_tokens);
    set!(tc.pc_loss, a.pc_loss);
    set!(tc.checkpoint_every, a.checkpoint_every);
    set!(tc.seed, a.common.seed);
    tc.validate()?;
    let lexicon = io::load_lexicon(&lexicon_path(a.lexicon, &cfg)?)?;
    let sentences = io::load_corpus(&a.corpus)?;
    let mut model = train::init_model(&spec, &lexicon, &sentences, tc.seed)?;
    let metrics = a.metrics.unwrap_or_else(|| sibling(&a.out, "metrics.tsv"));
    let log = train::train_to_files(&mut model, &lexicon, &sentences, &tc, &a.out, &metrics)?;
    match log.last() {
        Some(last) => eprintln!("step {} loss {:.6}; checkpoint {}", last.step, last.loss, a.out.display()),
        None => eprintln!("initial checkpoint {}", a.out.display()),
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
