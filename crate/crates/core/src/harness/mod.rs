//! Parameter sweeps over a corpus: pick a pattern from the duplicate heat
//! map, search at every (length, k) pair and summarize run times and output
//! sizes.

mod synth;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clonemap::{build_heatmap, HeatMap, DEFAULT_MIN_TOKENS};
use crate::corpus::{load_document, CorpusError, Document, TextFragment};
use crate::distance::DistanceCache;
use crate::groups::GroupError;
use crate::search::{
    search_with, validate_k, Control, Optimizations, Pattern, SearchContext, SearchError, SearchParams,
};

pub use synth::{synth_corpus, PlantedGroup, SynthCorpus, SynthSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Document {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("pattern length {length} does not fit a document of {doc_len} symbols")]
    PatternLength { length: usize, doc_len: usize },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// The `length`-symbol window whose intersecting tokens have the largest
/// total temperature. Tokens cut by the window edges count in full; ties go
/// to the leftmost window.
pub fn auto_select_pattern(doc: &Document, heat: &HeatMap, length: usize) -> Result<TextFragment, HarnessError> {
    let n = doc.len();
    if length == 0 || length > n {
        return Err(HarnessError::PatternLength { length, doc_len: n });
    }
    let tokens = doc.tokens();
    let mut prefix = Vec::with_capacity(tokens.len() + 1);
    prefix.push(0u64);
    for t in tokens {
        prefix.push(prefix.last().unwrap() + heat.temperatures[t.index] as u64);
    }
    let mut best = (0u64, 0usize);
    for a in 0..=n - length {
        let e = a + length - 1;
        let first = tokens.partition_point(|t| t.e() < a);
        let last = tokens.partition_point(|t| t.b() <= e);
        let sum = if first < last { prefix[last] - prefix[first] } else { 0 };
        if sum > best.0 {
            best = (sum, a);
        }
    }
    doc.fragment(best.1, best.1 + length - 1)
        .map_err(|e| HarnessError::Search(e.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub pattern_lengths: Vec<usize>,
    pub k_values: Vec<f64>,
    pub corpus: Vec<PathBuf>,
    /// Per-search budget in seconds.
    pub time_budget_secs: f64,
    pub min_tokens: usize,
    pub strict_threshold: bool,
    pub optimizations: Optimizations,
    pub cache_capacity: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            pattern_lengths: (1..=20).map(|i| i * 50).collect(),
            k_values: vec![0.6, 0.7, 0.8, 0.9, 1.0],
            corpus: Vec::new(),
            time_budget_secs: 300.0,
            min_tokens: DEFAULT_MIN_TOKENS,
            strict_threshold: false,
            optimizations: Optimizations::all(),
            cache_capacity: crate::distance::DEFAULT_CACHE_CAPACITY,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.pattern_lengths.contains(&0) {
            return Err(HarnessError::Config("pattern lengths must be positive".into()));
        }
        for &k in &self.k_values {
            validate_k(k).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if self.time_budget_secs.is_nan() || self.time_budget_secs <= 0.0 {
            return Err(HarnessError::Config("time budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Timeout,
}

/// One search of the sweep. `results` is empty for timed-out runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub doc: String,
    pub doc_len: usize,
    pub pattern_len: usize,
    pub pattern_b: usize,
    pub k: f64,
    pub status: RunStatus,
    pub elapsed_ms: f64,
    pub results: Option<usize>,
    pub phase1_ms: f64,
    pub phase2_ms: f64,
    pub phase3_ms: f64,
}

pub const RUNTIME_BUCKETS: [&str; 4] = ["<5s", "<30s", "<2min", ">=2min"];
pub const OUTPUT_BUCKETS: [&str; 5] = ["<100", "100-200", "200-600", "600-1000", ">=1000"];

pub fn runtime_bucket(elapsed_ms: f64) -> usize {
    match elapsed_ms {
        t if t < 5_000.0 => 0,
        t if t < 30_000.0 => 1,
        t if t < 120_000.0 => 2,
        _ => 3,
    }
}

pub fn output_bucket(results: usize) -> usize {
    match results {
        0..=99 => 0,
        100..=199 => 1,
        200..=599 => 2,
        600..=999 => 3,
        _ => 4,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn new(labels: &[&str]) -> Self {
        Histogram {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            counts: vec![0; labels.len()],
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub records: Vec<RunRecord>,
    /// Runs skipped because the pattern was longer than the document.
    pub skipped: usize,
    pub timeouts: usize,
    pub runtime_histogram: Histogram,
    pub output_histogram: Histogram,
}

impl SweepReport {
    fn from_records(records: Vec<RunRecord>, skipped: usize) -> Self {
        let mut runtime = Histogram::new(&RUNTIME_BUCKETS);
        let mut output = Histogram::new(&OUTPUT_BUCKETS);
        let mut timeouts = 0;
        for r in &records {
            runtime.counts[runtime_bucket(r.elapsed_ms)] += 1;
            match r.results {
                Some(n) => output.counts[output_bucket(n)] += 1,
                None => timeouts += 1,
            }
        }
        SweepReport {
            records,
            skipped,
            timeouts,
            runtime_histogram: runtime,
            output_histogram: output,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| HarnessError::io(Path::new("<csv>"), e))?;
        Ok(())
    }

    /// The report without per-run records.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "runs": self.records.len(),
            "skipped": self.skipped,
            "timeouts": self.timeouts,
            "runtime_histogram": self.runtime_histogram,
            "output_histogram": self.output_histogram,
        })
    }

    /// Writes `runs.csv` and `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let csv_path = dir.join("runs.csv");
        let file = fs::File::create(&csv_path).map_err(|e| HarnessError::io(&csv_path, e))?;
        self.write_csv(file)?;
        let json_path = dir.join("summary.json");
        let json = serde_json::to_string_pretty(&self.summary_json())?;
        fs::write(&json_path, json).map_err(|e| HarnessError::io(&json_path, e))?;
        Ok(())
    }

    /// Plain-text histogram table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let total = self.records.len().max(1) as f64;
        let _ = writeln!(
            s,
            "runs: {}  skipped: {}  timeouts: {}",
            self.records.len(),
            self.skipped,
            self.timeouts
        );
        for (title, h) in [
            ("run time", &self.runtime_histogram),
            ("output size", &self.output_histogram),
        ] {
            let _ = writeln!(s, "{title}:");
            let mut cumulative = 0;
            for (label, count) in h.labels.iter().zip(&h.counts) {
                cumulative += count;
                let _ = writeln!(
                    s,
                    "  {label:>9}  {count:>6}  {:>5.1}%  (cumulative {:>5.1}%)",
                    *count as f64 * 100.0 / total,
                    cumulative as f64 * 100.0 / total
                );
            }
        }
        s
    }
}

/// Loads every corpus path; a directory contributes its regular files.
pub fn load_corpus(paths: &[PathBuf]) -> Result<Vec<Document>, HarnessError> {
    let mut files = Vec::new();
    for p in paths {
        let meta = fs::metadata(p).map_err(|e| HarnessError::io(p, e))?;
        if meta.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| HarnessError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    files
        .into_iter()
        .map(|path| {
            let bytes = fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
            let id = path
                .file_name()
                .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
            load_document(&bytes, id.as_str())
                .map(|d| d.with_source_path(path.display().to_string()))
                .map_err(|source| HarnessError::Document { path, source })
        })
        .collect()
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport, HarnessError> {
    config.validate()?;
    let docs = load_corpus(&config.corpus)?;
    run_sweep_on(&docs, config)
}

/// Sweep over already loaded documents, one search at a time.
pub fn run_sweep_on(docs: &[Document], config: &SweepConfig) -> Result<SweepReport, HarnessError> {
    config.validate()?;
    let budget = Duration::from_secs_f64(config.time_budget_secs);
    let mut records = Vec::new();
    let mut skipped = 0;
    let mut heat_maps: HashMap<&str, HeatMap> = HashMap::new();
    for doc in docs {
        let heat = heat_maps
            .entry(doc.id().as_str())
            .or_insert_with(|| build_heatmap(doc, config.min_tokens));
        for &length in &config.pattern_lengths {
            if length > doc.len() {
                skipped += config.k_values.len();
                continue;
            }
            let fragment = auto_select_pattern(doc, heat, length)?;
            let pattern = Pattern::from_interval(doc, fragment.b, fragment.e)?;
            for &k in &config.k_values {
                let params = SearchParams::new(k, length)?
                    .with_optimizations(config.optimizations)
                    .with_strict_threshold(config.strict_threshold);
                let ctx = SearchContext::new(
                    Arc::new(DistanceCache::new(config.cache_capacity)),
                    Control::new().with_timeout(budget),
                );
                let start = Instant::now();
                let outcome = search_with(doc, &pattern, &params, &ctx);
                let elapsed_ms = start.elapsed().as_secs_f64() * 1000.0;
                let mut record = RunRecord {
                    doc: doc.id().to_string(),
                    doc_len: doc.len(),
                    pattern_len: length,
                    pattern_b: fragment.b,
                    k,
                    status: RunStatus::Ok,
                    elapsed_ms,
                    results: None,
                    phase1_ms: 0.0,
                    phase2_ms: 0.0,
                    phase3_ms: 0.0,
                };
                match outcome {
                    Ok(r) => {
                        record.results = Some(r.w3.len());
                        record.phase1_ms = r.timings.phase1;
                        record.phase2_ms = r.timings.phase2;
                        record.phase3_ms = r.timings.phase3;
                    }
                    Err(SearchError::TimedOut { .. }) => record.status = RunStatus::Timeout,
                    Err(e) => return Err(e.into()),
                }
                records.push(record);
            }
        }
    }
    Ok(SweepReport::from_records(records, skipped))
}
