//! Transition-detection metrics and parameter sweeps.
//!
//! A sweep runs every (stream, grid cell) pair independently and emits one
//! CSV row per pair, in grid order. Cells are evaluated in parallel.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_io::{read_stream_file, write_stream_file};
use crate::hvmm::{run_stream, EngineConfig, RetentionState};
use crate::simulator::LabeledStream;
use crate::strategies::{select, SelectorConfig, SelectorKind};
use crate::trace::write_trace;

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_WINDOW: u64 = 1;

/// Recall/precision of a selection against ground-truth transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub recall: f64,
    pub precision: f64,
    pub matched: usize,
    /// False when `truth` was empty; recall is then reported as 0.
    pub recall_defined: bool,
    /// False when nothing was selected; precision is then reported as 0.
    pub precision_defined: bool,
}

/// Greedy one-to-one matching in ascending order: each truth index takes
/// the earliest unused selected id within `±window`.
pub fn transition_recall(selected: &[u64], truth: &[u64], window: u64) -> MatchScore {
    let mut sel: Vec<u64> = selected.to_vec();
    sel.sort_unstable();
    let mut truth_sorted: Vec<u64> = truth.to_vec();
    truth_sorted.sort_unstable();

    let mut matched = 0;
    let mut next = 0;
    for &g in &truth_sorted {
        while next < sel.len() && sel[next] + window < g {
            next += 1;
        }
        if next < sel.len() && sel[next] <= g + window {
            matched += 1;
            next += 1;
        }
    }
    let ratio = |n: usize| if n == 0 { 0.0 } else { matched as f64 / n as f64 };
    MatchScore {
        recall: ratio(truth_sorted.len()),
        precision: ratio(sel.len()),
        matched,
        recall_defined: !truth_sorted.is_empty(),
        precision_defined: !sel.is_empty(),
    }
}

/// Axes of a sweep. Every combination becomes one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub strategies: Vec<SelectorKind>,
    pub lambdas: Vec<f64>,
    pub k1s: Vec<f64>,
    pub k2s: Vec<f64>,
    pub gammas: Vec<f64>,
    pub capacities: Vec<usize>,
    pub budgets: Vec<usize>,
    pub window: u64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        let e = EngineConfig::default();
        Self {
            strategies: vec![SelectorKind::CurveStreamFull],
            lambdas: vec![e.lambda],
            k1s: vec![e.k1],
            k2s: vec![e.k2],
            gammas: vec![e.gamma],
            capacities: vec![e.capacity],
            budgets: vec![e.capacity],
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub strategy: SelectorKind,
    pub engine: EngineConfig,
    pub budget: usize,
}

impl SweepGrid {
    pub fn cells(&self) -> Result<Vec<GridCell>> {
        let axes = [
            ("strategies", self.strategies.len()),
            ("lambda", self.lambdas.len()),
            ("k1", self.k1s.len()),
            ("k2", self.k2s.len()),
            ("gamma", self.gammas.len()),
            ("capacity", self.capacities.len()),
            ("budget", self.budgets.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Config(format!("sweep axis '{name}' is empty")));
        }
        let mut cells = Vec::new();
        for &strategy in &self.strategies {
            for &lambda in &self.lambdas {
                for &k1 in &self.k1s {
                    for &k2 in &self.k2s {
                        for &gamma in &self.gammas {
                            for &capacity in &self.capacities {
                                for &budget in &self.budgets {
                                    cells.push(GridCell {
                                        strategy,
                                        engine: EngineConfig {
                                            lambda,
                                            gamma,
                                            k1,
                                            k2,
                                            capacity,
                                            ..EngineConfig::default()
                                        },
                                        budget,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// One CSV row. Metric fields are empty for errored cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub schema: u32,
    pub stream: String,
    pub strategy: String,
    pub lambda: f64,
    pub gamma: f64,
    pub k1: f64,
    pub k2: f64,
    pub capacity: usize,
    pub budget: usize,
    pub window: u64,
    pub frames: usize,
    pub selected: Option<usize>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub precision_defined: Option<bool>,
    /// Recall of every frame routed Clear during the run, not just the
    /// ones left in the final queue.
    pub routed_recall: Option<f64>,
    pub mean_queue_len: Option<f64>,
    pub clear_ratio: Option<f64>,
    pub total_tokens: Option<f64>,
    pub clear: Option<u64>,
    pub blurred: Option<u64>,
    pub discard: Option<u64>,
    pub status: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for row in &self.rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let rows = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<std::result::Result<Vec<EvalRow>, _>>()
            .map_err(csv_err)?;
        Ok(Self { rows })
    }
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Format(e.to_string())
    }
}

/// A labeled stream with a display name.
#[derive(Debug, Clone)]
pub struct NamedStream {
    pub name: String,
    pub stream: LabeledStream,
}

fn base_row(name: &str, frames: usize, cell: &GridCell, window: u64) -> EvalRow {
    EvalRow {
        schema: CSV_SCHEMA_VERSION,
        stream: name.to_owned(),
        strategy: cell.strategy.to_string(),
        lambda: cell.engine.lambda,
        gamma: cell.engine.gamma,
        k1: cell.engine.k1,
        k2: cell.engine.k2,
        capacity: cell.engine.capacity,
        budget: cell.budget,
        window,
        frames,
        selected: None,
        recall: None,
        precision: None,
        precision_defined: None,
        routed_recall: None,
        mean_queue_len: None,
        clear_ratio: None,
        total_tokens: None,
        clear: None,
        blurred: None,
        discard: None,
        status: "ok".into(),
        error: String::new(),
    }
}

fn evaluate_cell(ns: &NamedStream, cell: &GridCell, window: u64, trace_path: Option<&Path>) -> Result<EvalRow> {
    let frames = &ns.stream.frames;
    let truth: Vec<u64> = ns.stream.ground_truth.iter().map(|&t| frames[t].frame_id).collect();
    let mut row = base_row(&ns.name, frames.len(), cell, window);

    let selector = SelectorConfig {
        kind: cell.strategy,
        budget: cell.budget,
        min_motion: None,
        engine: cell.engine,
    };
    cell.engine.validate()?;
    let selected = select(&selector, frames)?;
    let score = transition_recall(&selected, &truth, window);
    row.selected = Some(selected.len());
    row.recall = Some(score.recall);
    row.precision = Some(score.precision);
    row.precision_defined = Some(score.precision_defined);

    if cell.strategy == SelectorKind::CurveStreamFull {
        let (engine, traces) = run_stream(cell.engine, frames, &BTreeSet::new())?;
        let counts = engine.counts();
        let routed: Vec<u64> = traces
            .iter()
            .filter_map(|t| t.decision)
            .filter(|d| d.state == RetentionState::Clear)
            .map(|d| d.frame_id)
            .collect();
        let retained = counts.clear + counts.blurred;
        row.routed_recall = Some(transition_recall(&routed, &truth, window).recall);
        row.mean_queue_len =
            Some(traces.iter().map(|t| t.queue_len as f64).sum::<f64>() / traces.len() as f64);
        row.clear_ratio = Some(if retained == 0 { 0.0 } else { counts.clear as f64 / retained as f64 });
        row.total_tokens = Some(engine.tokens_total());
        row.clear = Some(counts.clear);
        row.blurred = Some(counts.blurred);
        row.discard = Some(counts.discard);
        if let Some(path) = trace_path {
            write_trace(&traces, std::io::BufWriter::new(fs::File::create(path)?))?;
        }
    } else {
        let n = selected.len() as u64;
        row.routed_recall = Some(score.recall);
        row.mean_queue_len = Some(n as f64);
        row.clear_ratio = Some(1.0);
        row.total_tokens = Some(n as f64 * cell.engine.cost.high);
        row.clear = Some(n);
        row.blurred = Some(0);
        row.discard = Some(frames.len() as u64 - n);
    }
    Ok(row)
}

/// Runs every (stream, cell) pair. A cell whose configuration is invalid
/// produces an errored row and the sweep continues. When `trace_dir` is
/// given, the engine trace of every `curvestream` cell is written there.
pub fn run_sweep(streams: &[NamedStream], grid: &SweepGrid, trace_dir: Option<&Path>) -> Result<EvalReport> {
    if streams.is_empty() {
        return Err(Error::Config("no streams to evaluate".into()));
    }
    let cells = grid.cells()?;
    if let Some(dir) = trace_dir {
        fs::create_dir_all(dir)?;
    }
    let jobs: Vec<(usize, &NamedStream, usize, &GridCell)> = streams
        .iter()
        .enumerate()
        .flat_map(|(si, s)| cells.iter().enumerate().map(move |(ci, c)| (si, s, ci, c)))
        .collect();

    let rows = jobs
        .par_iter()
        .map(|&(si, ns, ci, cell)| {
            let trace_path: Option<PathBuf> = trace_dir
                .filter(|_| cell.strategy == SelectorKind::CurveStreamFull)
                .map(|d| d.join(format!("s{si:03}_c{ci:04}.jsonl")));
            match evaluate_cell(ns, cell, grid.window, trace_path.as_deref()) {
                Ok(row) => Ok(row),
                Err(Error::Io(e)) => Err(Error::Io(e)),
                Err(e) => {
                    let mut row = base_row(&ns.name, ns.stream.frames.len(), cell, grid.window);
                    row.status = "error".into();
                    row.error = e.to_string();
                    Ok(row)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport { rows })
}

/// Path of the ground-truth sidecar for a stream file: `name.truth.json`.
pub fn truth_path(stream_path: &Path) -> PathBuf {
    let stem = stream_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stream_path.with_file_name(format!("{stem}.truth.json"))
}

fn is_stream_file(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    !name.ends_with(".truth.json") && (name.ends_with(".cvst") || name.ends_with(".jsonl"))
}

/// Writes a labeled stream and its sidecar. Returns the sidecar path.
pub fn write_labeled(path: &Path, stream: &LabeledStream) -> Result<PathBuf> {
    write_stream_file(path, &stream.frames)?;
    let sidecar = truth_path(path);
    let json = serde_json::to_string(&stream.ground_truth).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&sidecar, json + "\n")?;
    Ok(sidecar)
}

/// Loads one stream and its sidecar (if present; otherwise no transitions).
pub fn load_labeled(path: &Path) -> Result<NamedStream> {
    let frames = read_stream_file(path)?;
    let sidecar = truth_path(path);
    let ground_truth: Vec<usize> = if sidecar.exists() {
        serde_json::from_str(&fs::read_to_string(&sidecar)?)
            .map_err(|e| Error::Format(format!("{}: {e}", sidecar.display())))?
    } else {
        Vec::new()
    };
    if let Some(&bad) = ground_truth.iter().find(|&&t| t >= frames.len()) {
        return Err(Error::Format(format!(
            "{}: transition index {bad} is past the end of the stream",
            sidecar.display()
        )));
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(NamedStream {
        name,
        stream: LabeledStream { frames, ground_truth },
    })
}

/// Stream files (`.cvst`, `.jsonl`) in `dir`, sorted by name.
pub fn list_stream_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.is_file() && is_stream_file(p));
    paths.sort();
    Ok(paths)
}

/// Everything needed to rerun a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub version: String,
    pub streams: Vec<ManifestStream>,
    pub grid: SweepGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestStream {
    pub name: String,
    pub path: PathBuf,
    pub frames: usize,
    pub transitions: Vec<usize>,
}

impl RunManifest {
    pub fn new(paths: &[PathBuf], streams: &[NamedStream], grid: &SweepGrid) -> Self {
        Self {
            schema: CSV_SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            streams: paths
                .iter()
                .zip(streams)
                .map(|(p, s)| ManifestStream {
                    name: s.name.clone(),
                    path: p.clone(),
                    frames: s.stream.frames.len(),
                    transitions: s.stream.ground_truth.clone(),
                })
                .collect(),
            grid: grid.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))
    }
}
