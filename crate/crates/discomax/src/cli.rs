//! Experiment runner behind the `discomax` binary.
//!
//! Loads a delimited dataset, cross-validates the requested methods over a
//! dimension grid, and writes a self-describing results document plus an
//! aligned text table and optional per-cell solver traces. Cell evaluations
//! run concurrently; every artifact is written by the collecting thread, so
//! rerunning a configuration yields byte-identical results regardless of
//! scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dcor::{sample_dcorr2, DataMatrix};
use crate::error::{Error, Result};
use crate::pipeline::{
    cv_single, fit_embedding_model, kfold_indices, CvCell, Method, ScaleKind,
};
use crate::solver::{AlphaBound, SolverConfig};

/// Header line of every solver trace file (see `GmmTrace::to_tsv`).
pub const TRACE_HEADER: &str = "k\tf\tdcorr2_XZ\tdcorr2_Zy\talpha_star\tkappa\tinner_iters";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Everything a `run` invocation needs. Collected into one struct so the
/// results document can echo it and hash it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    /// Response selector: a column name, a zero-based index, or "last".
    pub response: String,
    pub methods: Vec<Method>,
    pub dims: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub scale_response: ScaleKind,
    pub out_dir: PathBuf,
    /// Write one trace TSV per (discomax cell, fold).
    pub write_traces: bool,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            response: "last".into(),
            methods: Method::ALL.to_vec(),
            dims: vec![2, 3],
            folds: 5,
            seed: 17,
            scale_response: ScaleKind::MinMax,
            out_dir: PathBuf::from("results"),
            write_traces: false,
            solver: SolverConfig::default(),
        }
    }
}

fn validate_config(config: &ExperimentConfig, n: usize, p: usize) -> Result<()> {
    if config.folds < 2 || config.folds > n {
        return Err(Error::InvalidParameter(format!(
            "fold count must satisfy 2 <= k <= n (k={}, n={n})",
            config.folds
        )));
    }
    let needs_dims = config.methods.iter().any(|m| *m != Method::Baseline);
    if needs_dims && config.dims.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one embedding dimension is required".into(),
        ));
    }
    for &d in &config.dims {
        if d < 2 || d >= p {
            return Err(Error::InvalidParameter(format!(
                "embedding dimension must satisfy 2 <= d < p (d={d}, p={p})"
            )));
        }
    }
    if config.methods.contains(&Method::Discomax) {
        // Fail fast on bad solver knobs instead of once per cell. The
        // smallest training fold has n - ceil(n/k) rows.
        let min_train = n - n.div_ceil(config.folds);
        for &d in &config.dims {
            if d >= min_train {
                return Err(Error::InvalidParameter(format!(
                    "embedding dimension {d} is too large for {min_train}-row training folds"
                )));
            }
        }
        config.solver.validate(min_train)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV loading
// ---------------------------------------------------------------------------

/// A numeric dataset split into features and a response column.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub feature_names: Vec<String>,
    pub response_name: String,
    /// Rows discarded because a cell failed to parse as a number (or the
    /// field count disagreed with the header).
    pub dropped_rows: usize,
    /// Data rows seen in the file, dropped ones included.
    pub n_raw_rows: usize,
}

fn read_text(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text.trim_start_matches('\u{feff}').to_string()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::FileNotFound {
            path: path.display().to_string(),
        }),
        Err(e) => Err(Error::Io(e)),
    }
}

/// Sniffs tab vs comma from the header line.
fn sniff_delimiter(text: &str) -> u8 {
    match text.lines().next() {
        Some(header) if header.contains('\t') => b'\t',
        _ => b',',
    }
}

/// Loads a delimited file with a header row, splitting off the response
/// column. Rows with any unparseable cell are dropped and counted rather
/// than aborting the load.
pub fn load_csv(path: &Path, response: &str) -> Result<LoadedData> {
    let text = read_text(path)?;
    let delimiter = sniff_delimiter(&text);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.len() < 2 {
        return Err(Error::NoNumericColumns {
            path: path.display().to_string(),
        });
    }

    let response_idx = resolve_response(&headers, response)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let Ok(record) = record else {
            dropped += 1;
            continue;
        };
        if record.len() != headers.len() {
            dropped += 1;
            continue;
        }
        match record
            .iter()
            .map(|cell| cell.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
        {
            Ok(values) => rows.push(values),
            Err(_) => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::NoNumericColumns {
            path: path.display().to_string(),
        });
    }

    let n = rows.len();
    let p = headers.len() - 1;
    let mut x = Array2::zeros((n, p));
    let mut y = Array1::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let mut at = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if j == response_idx {
                y[i] = v;
            } else {
                x[[i, at]] = v;
                at += 1;
            }
        }
    }
    let feature_names = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != response_idx)
        .map(|(_, h)| h.clone())
        .collect();
    Ok(LoadedData {
        x,
        y,
        feature_names,
        response_name: headers[response_idx].clone(),
        dropped_rows: dropped,
        n_raw_rows: n + dropped,
    })
}

fn resolve_response(headers: &[String], selector: &str) -> Result<usize> {
    let selector = selector.trim();
    if selector.eq_ignore_ascii_case("last") {
        return Ok(headers.len() - 1);
    }
    if let Ok(idx) = selector.parse::<usize>() {
        if idx < headers.len() {
            return Ok(idx);
        }
        return Err(Error::ResponseColumnMissing {
            name: selector.to_string(),
        });
    }
    headers
        .iter()
        .position(|h| h == selector)
        .ok_or_else(|| Error::ResponseColumnMissing {
            name: selector.to_string(),
        })
}

/// Loads a whole delimited file (header row, all columns numeric) as one
/// matrix. Strict: any unparseable cell is an error, because silently
/// dropping rows would desynchronize paired matrices.
pub fn load_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let delimiter = sniff_delimiter(&text);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let width = reader.headers()?.len();
    let mut values: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for record in reader.records() {
        let record = record?;
        for cell in record.iter() {
            let v = cell.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!(
                    "non-numeric cell {:?} in {}",
                    cell,
                    path.display()
                ))
            })?;
            values.push(v);
        }
        n += 1;
    }
    if n == 0 || width == 0 {
        return Err(Error::NoNumericColumns {
            path: path.display().to_string(),
        });
    }
    Array2::from_shape_vec((n, width), values).map_err(|_| {
        Error::InvalidParameter(format!("ragged rows in {}", path.display()))
    })
}

// ---------------------------------------------------------------------------
// Results document
// ---------------------------------------------------------------------------

/// One (method, dimension) slot of the experiment grid: either a result or
/// a captured error, never both.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: Method,
    pub dim: usize,
    pub result: Option<CvCell>,
    pub error: Option<String>,
    /// File names (relative to the results document) of the solver traces
    /// this cell produced.
    pub trace_files: Vec<String>,
}

/// Fixed description of the regression stage, echoed for the audit trail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressorInfo {
    pub kernel: String,
    pub bandwidth: String,
    pub ridge: String,
}

impl Default for RegressorInfo {
    fn default() -> Self {
        Self {
            kernel: "rbf".into(),
            bandwidth: "median pairwise training distance".into(),
            ridge: "1e-3 * n_train".into(),
        }
    }
}

/// Self-describing experiment output: run metadata, config echo, and one
/// record per grid cell. Contains no timestamps, durations or absolute
/// paths, so identical configurations serialize to identical bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultSet {
    pub dataset: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub dropped_rows: usize,
    pub response: String,
    pub folds: usize,
    pub seed: u64,
    pub scale_response: ScaleKind,
    pub methods: Vec<Method>,
    pub dims: Vec<usize>,
    pub solver: SolverConfig,
    pub regressor: RegressorInfo,
    /// SHA-256 over the canonical configuration (dataset file name,
    /// response selector, grid, seed, scaling, solver knobs).
    pub config_hash: String,
    pub cells: Vec<CellRecord>,
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").expect("write to string");
    }
    s
}

fn dataset_name(path: &Path) -> String {
    path.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Hash of the inputs that determine the numbers in the results document.
/// Excludes the output directory on purpose: where results land must not
/// change what they say.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::json!({
        "dataset": dataset_name(&config.data),
        "response": config.response,
        "methods": config.methods,
        "dims": config.dims,
        "folds": config.folds,
        "seed": config.seed,
        "scale_response": config.scale_response,
        "solver": &config.solver,
    });
    let bytes = serde_json::to_vec(&canonical).expect("config serializes");
    hex(&Sha256::digest(&bytes))
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

/// Per-cell wall time, kept out of [`ResultSet`] so reruns stay
/// byte-identical; written to a separate sidecar instead.
#[derive(Debug, Clone)]
pub struct TimingRow {
    pub method: Method,
    pub dim: usize,
    pub millis: u128,
}

/// Everything `run` produced, ready for [`emit_report`].
#[derive(Debug)]
pub struct RunOutput {
    pub results: ResultSet,
    pub timings: Vec<TimingRow>,
    /// Trace file bodies keyed by file name, to be written next to the
    /// results document.
    pub trace_bodies: Vec<(String, String)>,
    pub failed_cells: usize,
}

/// The (method, dim) grid in output order. The baseline regressor has no
/// reduction step, so it appears once at the full feature dimension.
fn grid(config: &ExperimentConfig, p: usize) -> Vec<(Method, usize)> {
    let mut jobs = Vec::new();
    for &m in &config.methods {
        if m == Method::Baseline {
            jobs.push((m, p));
        } else {
            for &d in &config.dims {
                jobs.push((m, d));
            }
        }
    }
    jobs
}

/// Runs the full cross-validation grid. Cell failures are captured in their
/// records; only configuration and I/O problems abort the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    let data = load_csv(&config.data, &config.response)?;
    let (n, p) = data.x.dim();
    validate_config(config, n, p)?;
    let folds = kfold_indices(n, config.folds, config.seed)?;
    let jobs = grid(config, p);

    // Cells are independent; evaluate them in parallel but collect in job
    // order so the output is schedule-independent.
    let evaluated: Vec<(CellRecord, Vec<(String, String)>, TimingRow)> = jobs
        .par_iter()
        .map(|&(method, dim)| {
            let started = Instant::now();
            let outcome = cv_single(
                &data.x,
                &data.y,
                method,
                dim,
                &folds,
                &config.solver,
                config.scale_response,
            );
            let timing = TimingRow {
                method,
                dim,
                millis: started.elapsed().as_millis(),
            };
            match outcome {
                Ok((cell, traces)) => {
                    let mut names = Vec::new();
                    let mut bodies = Vec::new();
                    if config.write_traces {
                        for (f, trace) in traces.iter().enumerate() {
                            let name = format!("trace_{method}_d{dim}_fold{f}.tsv");
                            bodies.push((name.clone(), trace.to_tsv()));
                            names.push(name);
                        }
                    }
                    let record = CellRecord {
                        method,
                        dim,
                        result: Some(cell),
                        error: None,
                        trace_files: names,
                    };
                    (record, bodies, timing)
                }
                Err(e) => (
                    CellRecord {
                        method,
                        dim,
                        result: None,
                        error: Some(e.to_string()),
                        trace_files: Vec::new(),
                    },
                    Vec::new(),
                    timing,
                ),
            }
        })
        .collect();

    let mut cells = Vec::with_capacity(evaluated.len());
    let mut timings = Vec::with_capacity(evaluated.len());
    let mut trace_bodies = Vec::new();
    let mut failed_cells = 0usize;
    for (record, bodies, timing) in evaluated {
        if record.error.is_some() {
            failed_cells += 1;
        }
        cells.push(record);
        timings.push(timing);
        trace_bodies.extend(bodies);
    }

    let results = ResultSet {
        dataset: dataset_name(&config.data),
        n_rows: n,
        n_features: p,
        dropped_rows: data.dropped_rows,
        response: data.response_name,
        folds: config.folds,
        seed: config.seed,
        scale_response: config.scale_response,
        methods: config.methods.clone(),
        dims: config.dims.clone(),
        solver: config.solver.clone(),
        regressor: RegressorInfo::default(),
        config_hash: config_hash(config),
        cells,
    };
    Ok(RunOutput {
        results,
        timings,
        trace_bodies,
        failed_cells,
    })
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

/// Aligned human-readable summary of the grid. Header-only when there are
/// no cells.
pub fn format_table(results: &ResultSet) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>4} {:>12} {:>12}  {}",
        "method", "dim", "mean_rms", "std_rms", "notes"
    );
    for cell in &results.cells {
        match (&cell.result, &cell.error) {
            (Some(r), _) => {
                let _ = writeln!(
                    out,
                    "{:<10} {:>4} {:>12.6} {:>12.6}  {}",
                    cell.method.name(),
                    cell.dim,
                    r.mean_rms,
                    r.std_rms,
                    ""
                );
            }
            (None, Some(e)) => {
                let _ = writeln!(
                    out,
                    "{:<10} {:>4} {:>12} {:>12}  error: {}",
                    cell.method.name(),
                    cell.dim,
                    "-",
                    "-",
                    e
                );
            }
            (None, None) => {
                let _ = writeln!(
                    out,
                    "{:<10} {:>4} {:>12} {:>12}  empty",
                    cell.method.name(),
                    cell.dim,
                    "-",
                    "-"
                );
            }
        }
    }
    out
}

fn format_timings(timings: &[TimingRow]) -> String {
    let mut out = String::from("method\tdim\tmillis\n");
    for t in timings {
        let _ = writeln!(out, "{}\t{}\t{}", t.method.name(), t.dim, t.millis);
    }
    out
}

/// Writes `results.json`, `table.txt`, the timing sidecar and any trace
/// files into `out_dir`. Returns the paths written.
pub fn emit_report(output: &RunOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let results_path = out_dir.join("results.json");
    let mut json = serde_json::to_string_pretty(&output.results)?;
    json.push('\n');
    fs::write(&results_path, json)?;
    written.push(results_path);

    let table_path = out_dir.join("table.txt");
    fs::write(&table_path, format_table(&output.results))?;
    written.push(table_path);

    let timings_path = out_dir.join("timings.tsv");
    fs::write(&timings_path, format_timings(&output.timings))?;
    written.push(timings_path);

    for (name, body) in &output.trace_bodies {
        let path = out_dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// Trace validation (trace-plot-data)
// ---------------------------------------------------------------------------

/// Checks that a trace file honors the export contract: the exact header
/// and seven numeric fields per row.
pub fn validate_trace_tsv(body: &str) -> Result<usize> {
    let mut lines = body.lines();
    match lines.next() {
        Some(header) if header == TRACE_HEADER => {}
        other => {
            return Err(Error::InvalidParameter(format!(
                "trace header mismatch: got {:?}, expected {:?}",
                other.unwrap_or(""),
                TRACE_HEADER
            )));
        }
    }
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(Error::InvalidParameter(format!(
                "trace row {} has {} fields, expected 7",
                i + 1,
                fields.len()
            )));
        }
        for f in fields {
            f.parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!(
                    "trace row {} holds a non-numeric field {:?}",
                    i + 1,
                    f
                ))
            })?;
        }
        rows += 1;
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Command-line surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "discomax",
    version,
    about = "Supervised dimension reduction by maximizing summed squared distance correlations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate methods over a dimension grid and write a results
    /// document.
    Run(RunArgs),
    /// Fit one embedding on the whole dataset; dump Z, the convergence
    /// trace and model metadata.
    Embed(EmbedArgs),
    /// Print the squared distance correlation between two delimited
    /// matrices (paired rows).
    Dcorr(DcorrArgs),
    /// Validate trace files referenced by a results document and re-emit
    /// them as plot-ready TSV.
    TracePlotData(TraceArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Outer minorize-maximize iteration cap.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Fixed-point iteration cap per subproblem solve.
    #[arg(long)]
    t_max: Option<usize>,
    /// Golden-section stop, relative to the initial bracket width.
    #[arg(long)]
    alpha_tol: Option<f64>,
    /// Fixed-point stop: absolute change of the subproblem objective.
    #[arg(long)]
    inner_tol: Option<f64>,
    /// Outer stop: relative squared change of Z between iterations.
    #[arg(long)]
    outer_tol: Option<f64>,
    /// Golden-section bracket top: lambda_min (default) or lambda_max.
    #[arg(long)]
    alpha_bound: Option<String>,
}

impl SolverArgs {
    fn apply(&self, mut base: SolverConfig) -> Result<SolverConfig> {
        if let Some(v) = self.max_outer {
            base.max_outer = v;
        }
        if let Some(v) = self.t_max {
            base.t_max = v;
        }
        if let Some(v) = self.alpha_tol {
            base.alpha_tol = v;
        }
        if let Some(v) = self.inner_tol {
            base.inner_tol = v;
        }
        if let Some(v) = self.outer_tol {
            base.outer_tol = v;
        }
        if let Some(v) = &self.alpha_bound {
            base.alpha_bound = match v.trim().to_ascii_lowercase().as_str() {
                "lambda_min" => AlphaBound::LambdaMin,
                "lambda_max" => AlphaBound::LambdaMax,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown alpha bound '{other}' (expected lambda_min or lambda_max)"
                    )));
                }
            };
        }
        Ok(base)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Input file: delimited text with a header row (comma or tab).
    #[arg(long)]
    data: PathBuf,
    /// Response column: a name, a zero-based index, or "last".
    #[arg(long, default_value = "last")]
    response: String,
    /// Methods to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "discomax,sir,save,baseline")]
    methods: Vec<String>,
    /// Embedding dimensions to evaluate (baseline ignores these).
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Response scaling for the regression stage: minmax, zscore or none.
    #[arg(long, default_value = "minmax")]
    scale_response: String,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Also write one solver trace file per (cell, fold).
    #[arg(long)]
    verbose_trace: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut methods = Vec::new();
        for m in &self.methods {
            let parsed = Method::parse(m)?;
            if !methods.contains(&parsed) {
                methods.push(parsed);
            }
        }
        let mut dims = Vec::new();
        for &d in &self.dims {
            if !dims.contains(&d) {
                dims.push(d);
            }
        }
        Ok(ExperimentConfig {
            data: self.data,
            response: self.response,
            methods,
            dims,
            folds: self.folds,
            seed: self.seed,
            scale_response: ScaleKind::parse(&self.scale_response)?,
            out_dir: self.out_dir,
            write_traces: self.verbose_trace,
            solver: self.solver.apply(SolverConfig::default())?,
        })
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    data: PathBuf,
    /// Response column: a name, a zero-based index, or "last".
    #[arg(long, default_value = "last")]
    response: String,
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Response scaling for the regression stage: minmax, zscore or none.
    #[arg(long, default_value = "minmax")]
    scale_response: String,
    #[arg(long, default_value = "embedding")]
    out_dir: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct DcorrArgs {
    /// First matrix (delimited, header row, all columns numeric).
    #[arg(long)]
    x: PathBuf,
    /// Second matrix with the same number of rows.
    #[arg(long)]
    y: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    /// Path to a results.json written by `run`.
    #[arg(long)]
    results: PathBuf,
    /// Directory for the re-emitted traces; omit to print them to stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    let config = args.into_config()?;
    let output = run_experiment(&config)?;
    let written = emit_report(&output, &config.out_dir)?;
    print!("{}", format_table(&output.results));
    println!("wrote {}", written[0].display());
    Ok(if output.failed_cells > 0 { 1 } else { 0 })
}

fn cmd_embed(args: EmbedArgs) -> Result<i32> {
    let data = load_csv(&args.data, &args.response)?;
    let mut solver = args.solver.apply(SolverConfig::default())?;
    solver.dim = args.dim;
    let scale = ScaleKind::parse(&args.scale_response)?;

    let x = DataMatrix::new(data.x.clone())?;
    let y = DataMatrix::from_column(data.y.clone())?;
    let (model, trace) = fit_embedding_model(&x, &y, &solver, scale)?;

    fs::create_dir_all(&args.out_dir)?;
    let mut z_tsv = String::new();
    let d = model.z_train.ncols();
    let header: Vec<String> = (1..=d).map(|j| format!("z{j}")).collect();
    let _ = writeln!(z_tsv, "{}", header.join("\t"));
    for row in model.z_train.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(z_tsv, "{}", cells.join("\t"));
    }
    fs::write(args.out_dir.join("z.tsv"), z_tsv)?;
    fs::write(args.out_dir.join("trace.tsv"), trace.to_tsv())?;

    let meta = serde_json::json!({
        "dataset": dataset_name(&args.data),
        "response": data.response_name,
        "n_rows": data.x.nrows(),
        "n_features": data.x.ncols(),
        "dropped_rows": data.dropped_rows,
        "dim": d,
        "scale_response": scale,
        "solver": &solver,
        "psi_sigma": model.psi.sigma,
        "psi_lambda": model.psi.lambda,
        "f_final": trace.records.last().map(|r| r.f),
    });
    let mut meta_json = serde_json::to_string_pretty(&meta)?;
    meta_json.push('\n');
    fs::write(args.out_dir.join("model.json"), meta_json)?;

    println!(
        "embedded {} rows into {} dimensions (f = {:.6}); wrote {}",
        data.x.nrows(),
        d,
        trace.records.last().map(|r| r.f).unwrap_or(f64::NAN),
        args.out_dir.display()
    );
    Ok(0)
}

fn cmd_dcorr(args: DcorrArgs) -> Result<i32> {
    let x = DataMatrix::new(load_csv_matrix(&args.x)?)?;
    let y = DataMatrix::new(load_csv_matrix(&args.y)?)?;
    let value = sample_dcorr2(&x, &y)?;
    println!("{value}");
    Ok(0)
}

fn cmd_trace_plot_data(args: TraceArgs) -> Result<i32> {
    let text = read_text(&args.results)?;
    let doc: ResultSet = serde_json::from_str(&text)?;
    let base = args.results.parent().unwrap_or(Path::new("."));
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut count = 0usize;
    for cell in &doc.cells {
        for name in &cell.trace_files {
            let body = read_text(&base.join(name))?;
            validate_trace_tsv(&body)?;
            match &args.out_dir {
                Some(dir) => fs::write(dir.join(name), &body)?,
                None => print!("# {name}\n{body}"),
            }
            count += 1;
        }
    }
    if let Some(dir) = &args.out_dir {
        println!("re-emitted {count} trace file(s) into {}", dir.display());
    }
    Ok(0)
}

/// Errors a user can fix by changing the invocation get exit code 2;
/// anything that failed while computing gets 1.
fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::FileNotFound { .. }
        | Error::NoNumericColumns { .. }
        | Error::ResponseColumnMissing { .. }
        | Error::InvalidParameter(_)
        | Error::BadDimension { .. } => 2,
        _ => 1,
    }
}

/// Binary entry point; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Dcorr(args) => cmd_dcorr(args),
        Command::TracePlotData(args) => cmd_trace_plot_data(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
