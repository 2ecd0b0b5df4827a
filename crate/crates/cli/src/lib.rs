//! The `dupviper` command line: heat maps, pattern selection, search,
//! evaluation sweeps, synthetic corpora and the HTTP service.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dupviper::clonemap::{build_heatmap, DEFAULT_MIN_TOKENS};
use dupviper::corpus::{load_document, Document};
use dupviper::distance::DistanceCache;
use dupviper::harness::{auto_select_pattern, run_sweep, synth_corpus, HarnessError, SweepConfig, SynthSpec};
use dupviper::search::{search_with, Control, Optimizations, Pattern, SearchContext, SearchParams};
use dupviper_service::{AppState, ServiceConfig};
use serde::Serialize;
use thiserror::Error;

pub const CACHE_SIZE_ENV: &str = "DUPVIPER_CACHE_SIZE";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, parameters or input files. Exit status 2.
    #[error("{0}")]
    Usage(String),
    /// Anything else. Exit status 1.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "dupviper",
    version,
    about = "Find near-duplicate fragments in text documents"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Color every token by how many exact clones cover it
    Heatmap {
        doc: PathBuf,
        /// Shortest clone that counts, in tokens
        #[arg(long, default_value_t = DEFAULT_MIN_TOKENS)]
        min_tokens: usize,
        #[arg(long, value_enum, default_value_t = HeatFormat::Json)]
        format: HeatFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search a document for near duplicates of a pattern
    Search(SearchArgs),
    /// Print the hottest window of the given length
    SelectPattern {
        doc: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = DEFAULT_MIN_TOKENS)]
        min_tokens: usize,
        #[arg(long, value_enum, default_value_t = SelectFormat::Text)]
        format: SelectFormat,
    },
    /// Run a parameter sweep described by a TOML file
    Eval {
        config: PathBuf,
        /// Directory for runs.csv and summary.json
        #[arg(long, default_value = "eval-out")]
        out: PathBuf,
    },
    /// Serve the HTTP API
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Load every file of this directory at startup
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Where documents and session journals are kept
        #[arg(long, default_value = "dupviper-data")]
        data_dir: PathBuf,
    },
    /// Generate documents with planted near-duplicate groups
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Document sizes in symbols
        #[arg(long, value_delimiter = ',', default_value = "100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.8)]
        k: f64,
        #[arg(long, default_value_t = 2.0)]
        groups_per_100k: f64,
    },
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("pattern_source").required(true))]
pub struct SearchArgs {
    pub doc: PathBuf,
    #[arg(long, group = "pattern_source")]
    pub pattern: Option<String>,
    #[arg(long, group = "pattern_source")]
    pub pattern_file: Option<PathBuf>,
    /// Inclusive symbol interval of the document, `B:E`
    #[arg(long, group = "pattern_source", value_parser = parse_interval)]
    pub pattern_interval: Option<(usize, usize)>,
    #[arg(long)]
    pub k: f64,
    #[arg(long)]
    pub no_opt1: bool,
    #[arg(long)]
    pub no_opt2: bool,
    #[arg(long)]
    pub no_opt3: bool,
    #[arg(long)]
    pub no_opt4: bool,
    #[arg(long)]
    pub no_opt5: bool,
    #[arg(long)]
    pub strict_threshold: bool,
    #[arg(long)]
    pub exclude_self: bool,
    #[arg(long, value_enum, default_value_t = ResultFormat::Json)]
    pub format: ResultFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeatFormat {
    Json,
    Html,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResultFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectFormat {
    Text,
    Json,
}

fn parse_interval(s: &str) -> Result<(usize, usize), String> {
    let (b, e) = s.split_once(':').ok_or_else(|| format!("expected B:E, got {s:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad start {b:?}"))?;
    let e = e.trim().parse().map_err(|_| format!("bad end {e:?}"))?;
    Ok((b, e))
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dupviper: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Heatmap {
            doc,
            min_tokens,
            format,
            out,
        } => cmd_heatmap(&doc, min_tokens, format, out.as_deref()),
        Command::Search(args) => cmd_search(&args),
        Command::SelectPattern {
            doc,
            length,
            min_tokens,
            format,
        } => cmd_select_pattern(&doc, length, min_tokens, format),
        Command::Eval { config, out } => cmd_eval(&config, &out),
        Command::Serve { addr, corpus, data_dir } => cmd_serve(&addr, corpus.as_deref(), &data_dir),
        Command::Synth {
            out,
            seed,
            sizes,
            k,
            groups_per_100k,
        } => {
            let spec = SynthSpec {
                doc_sizes: sizes,
                groups_per_100k,
                k,
                seed,
                ..SynthSpec::default()
            };
            cmd_synth(&spec, &out)
        }
    }
}

/// Reads a UTF-8 document; its id is the file name.
pub fn read_document(path: &Path) -> Result<Document, CliError> {
    let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let id = path
        .file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    load_document(&bytes, id.as_str())
        .map(|d| d.with_source_path(path.display().to_string()))
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| internal(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes()).map_err(internal)?;
            stdout.flush().map_err(internal)
        }
    }
}

fn cache_capacity() -> Result<Option<usize>, CliError> {
    match std::env::var(CACHE_SIZE_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{CACHE_SIZE_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn cache() -> Result<Arc<DistanceCache>, CliError> {
    Ok(Arc::new(match cache_capacity()? {
        Some(n) => DistanceCache::new(n),
        None => DistanceCache::default(),
    }))
}

pub fn cmd_heatmap(doc: &Path, min_tokens: usize, format: HeatFormat, out: Option<&Path>) -> Result<(), CliError> {
    if min_tokens == 0 {
        return Err(usage("--min-tokens must be at least 1"));
    }
    let doc = read_document(doc)?;
    let map = build_heatmap(&doc, min_tokens);
    let text = match format {
        HeatFormat::Json => {
            let mut s = serde_json::to_string_pretty(&map.to_json(&doc, min_tokens)).map_err(internal)?;
            s.push('\n');
            s
        }
        HeatFormat::Html => map.to_html(&doc),
    };
    emit(out, &text)
}

fn optimizations(args: &SearchArgs) -> Optimizations {
    Optimizations {
        scan_skip: !args.no_opt1,
        shrink_skip: !args.no_opt2,
        cluster_overlaps: !args.no_opt3,
        extend_to_words: !args.no_opt4,
        reuse_and_parallelize: !args.no_opt5,
    }
}

fn read_pattern_file(path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let text = text.strip_suffix('\n').unwrap_or(&text);
    Ok(text.strip_suffix('\r').unwrap_or(text).to_string())
}

#[derive(Serialize)]
struct CsvRow<'a> {
    b: usize,
    e: usize,
    distance: usize,
    text: &'a str,
}

pub fn cmd_search(args: &SearchArgs) -> Result<(), CliError> {
    let doc = read_document(&args.doc)?;
    let pattern = match (&args.pattern, &args.pattern_file, args.pattern_interval) {
        (Some(p), _, _) => Pattern::from_text(p),
        (_, Some(f), _) => Pattern::from_text(&read_pattern_file(f)?),
        (_, _, Some((b, e))) => Pattern::from_interval(&doc, b, e).map_err(usage)?,
        _ => {
            return Err(usage(
                "one of --pattern, --pattern-file, --pattern-interval is required",
            ))
        }
    };
    if pattern.is_empty() {
        return Err(usage("pattern is empty"));
    }
    let params = SearchParams::new(args.k, pattern.len())
        .map_err(usage)?
        .with_optimizations(optimizations(args))
        .with_strict_threshold(args.strict_threshold)
        .with_exclude_self(args.exclude_self);
    let ctx = SearchContext::new(cache()?, Control::new());
    let result = search_with(&doc, &pattern, &params, &ctx).map_err(internal)?;
    let json = result.to_json(&doc);

    let text = match args.format {
        ResultFormat::Json => json.to_pretty(),
        ResultFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for el in &json.elements {
                w.serialize(CsvRow {
                    b: el.b,
                    e: el.e,
                    distance: el.distance,
                    text: &el.text,
                })
                .map_err(internal)?;
            }
            String::from_utf8(w.into_inner().map_err(internal)?).map_err(internal)?
        }
    };
    emit(args.out.as_deref(), &text)?;

    let t = result.timings;
    let summary = format!(
        "results: {}  pattern: {} symbols  k: {}  k_di: {:.2}  windows: {}  time: {:.1} ms (scan {:.1}, shrink {:.1}, filter {:.1})",
        json.elements.len(),
        pattern.len(),
        params.k,
        params.k_di(),
        result.w1.len(),
        t.total(),
        t.phase1,
        t.phase2,
        t.phase3
    );
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    if let Some(w) = &result.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

pub fn cmd_select_pattern(doc: &Path, length: usize, min_tokens: usize, format: SelectFormat) -> Result<(), CliError> {
    if min_tokens == 0 {
        return Err(usage("--min-tokens must be at least 1"));
    }
    let doc = read_document(doc)?;
    let heat = build_heatmap(&doc, min_tokens);
    let frag = auto_select_pattern(&doc, &heat, length).map_err(usage)?;
    let text = match format {
        SelectFormat::Text => format!("{}:{}\n{}\n", frag.b, frag.e, doc.str_of(&frag)),
        SelectFormat::Json => {
            let mut s = serde_json::to_string_pretty(&doc.fragment_json(&frag)).map_err(internal)?;
            s.push('\n');
            s
        }
    };
    emit(None, &text)
}

pub fn cmd_eval(config: &Path, out: &Path) -> Result<(), CliError> {
    let mut cfg = SweepConfig::load(config).map_err(usage)?;
    let base = config.parent().unwrap_or(Path::new("."));
    for p in &mut cfg.corpus {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(n) = cache_capacity()? {
        cfg.cache_capacity = n;
    }
    let report = run_sweep(&cfg).map_err(|e| match e {
        HarnessError::Io { .. } | HarnessError::Document { .. } | HarnessError::Config(_) => usage(e),
        other => internal(other),
    })?;
    report.write_to(out).map_err(internal)?;
    print!("{}", report.table());
    println!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> Result<(), CliError> {
    let corpus = synth_corpus(spec).map_err(usage)?;
    let paths = corpus.write_to(out).map_err(internal)?;
    println!(
        "wrote {} documents and {} planted groups to {}",
        paths.len(),
        corpus.truth.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_serve(addr: &str, corpus: Option<&Path>, data_dir: &Path) -> Result<(), CliError> {
    let mut config = ServiceConfig::new(data_dir);
    if let Some(n) = cache_capacity()? {
        config.cache_capacity = n;
    }
    let files = match corpus {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(usage(format!("{}: not a directory", dir.display())));
            }
            let mut files: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| usage(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            files
        }
        None => Vec::new(),
    };
    let state = AppState::open(config).map_err(internal)?;
    for path in &files {
        let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let info = state
            .store
            .insert(&bytes)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        println!("{}  {}", info.doc_id, path.display());
    }

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(internal)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| usage(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(internal)?;
        println!("listening on http://{local}");
        dupviper_service::serve(listener, state).await.map_err(internal)
    })
}
