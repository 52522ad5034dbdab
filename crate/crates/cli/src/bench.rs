//! Benchmark harness: runs every (image, noise level, solver, sweep value,
//! seed) cell of an experiment spec and tabulates SNR, SSIM and timing.
//!
//! A spec is a TOML file:
//!
//! ```toml
//! output_dir = "results"          # relative to the spec file
//! seeds = [1, 2, 3]
//!
//! [[images]]
//! phantom = "circles"             # or: file = "cells.pgm"
//! width = 64
//! height = 64
//!
//! [[noise]]
//! eta = 4.0
//! sigma = 1e-4
//!
//! [[solvers]]
//! name = "bcaf"
//! alpha_w = 63.0                  # any solver parameter may be overridden
//!
//! [sweep]                         # optional
//! parameter = "alpha"
//! values = [20.0, 63.0, 200.0, 632.0, 2000.0]
//! ```
//!
//! Cells run on up to `MPG_THREADS` worker threads. Rows are written by a
//! single writer in cell order, so the table is identical for any thread count
//! apart from the timing column. A failing cell is recorded in its row and
//! does not stop the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use mpg_core::{corrupt, snr, ssim, ImageGrid, NoiseSpec, PhantomKind, SolverConfig, SolverKind, SsimConfig};
use serde::Deserialize;

use crate::commands::{clamp_nonnegative, ImageSource};
use crate::config::{baseline_lambda, SolverOverrides};
use crate::error::{CliError, CliResult};

pub const BENCH_HEADER: &str = "image,eta,sigma,solver,variant,seed,noisy_snr,snr,ssim,seconds,iters,status";

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub phantom: Option<String>,
    pub file: Option<PathBuf>,
    #[serde(default = "default_size")]
    pub width: usize,
    #[serde(default = "default_size")]
    pub height: usize,
}

fn default_size() -> usize {
    64
}

#[derive(Deserialize, Debug, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct NoiseEntry {
    pub eta: f64,
    pub sigma: f64,
}

/// A solver name plus parameter overrides, written as one flat table.
#[derive(Deserialize, Debug, Clone)]
#[serde(try_from = "toml::Table")]
pub struct SolverEntry {
    pub name: String,
    pub overrides: SolverOverrides,
}

impl TryFrom<toml::Table> for SolverEntry {
    type Error = String;

    fn try_from(mut table: toml::Table) -> Result<Self, String> {
        let name = match table.remove("name") {
            Some(toml::Value::String(s)) => s,
            Some(_) => return Err("solver `name` must be a string".into()),
            None => return Err("solver entry is missing `name`".into()),
        };
        let overrides = SolverOverrides::deserialize(toml::Value::Table(table))
            .map_err(|e| format!("solver {name}: {e}"))?;
        Ok(Self { name, overrides })
    }
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub images: Vec<ImageEntry>,
    pub noise: Vec<NoiseEntry>,
    pub solvers: Vec<SolverEntry>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub sweep: Option<SweepSpec>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        let spec: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        if spec.images.is_empty() || spec.noise.is_empty() || spec.solvers.is_empty() || spec.seeds.is_empty() {
            return Err("spec needs at least one image, noise level, solver and seed".into());
        }
        if let Some(s) = &spec.sweep {
            if s.values.is_empty() {
                return Err("sweep has no values".into());
            }
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut spec = Self::parse(&text).map_err(|r| CliError::format(path, r))?;
        // relative paths inside the spec are relative to the spec's directory
        let base = path.parent().unwrap_or(Path::new(""));
        if spec.output_dir.is_relative() {
            spec.output_dir = base.join(&spec.output_dir);
        }
        for img in &mut spec.images {
            if let Some(f) = &img.file {
                if f.is_relative() {
                    img.file = Some(base.join(f));
                }
            }
        }
        Ok(spec)
    }
}

/// Sets one named parameter, used by sweeps.
fn set_parameter(ov: &mut SolverOverrides, name: &str, value: f64) -> CliResult<()> {
    let count = || {
        if value >= 1.0 && value.fract() == 0.0 {
            Ok(value as usize)
        } else {
            Err(CliError::Usage(format!("{name} must be a positive integer, got {value}")))
        }
    };
    match name {
        "lambda1" => ov.lambda1 = Some(value),
        "lambda2" => ov.lambda2 = Some(value),
        "alpha" => ov.alpha = Some(value),
        "alpha_w" => ov.alpha_w = Some(value),
        "alpha_p" => ov.alpha_p = Some(value),
        "epsilon" => ov.epsilon = Some(value),
        "xi" => ov.xi = Some(value),
        "lambda" => ov.lambda = Some(value),
        "max_iters" => ov.max_iters = Some(count()?),
        "inner_iters" => ov.inner_iters = Some(count()?),
        other => return Err(CliError::Usage(format!("cannot sweep unknown parameter `{other}`"))),
    }
    Ok(())
}

struct Cell {
    image: usize,
    noise: NoiseEntry,
    solver: SolverKind,
    solver_name: String,
    variant: String,
    config: SolverConfig,
    lambda: Option<f64>,
    seed: u64,
}

/// Outcome of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub image: String,
    pub eta: f64,
    pub sigma: f64,
    pub solver: String,
    pub variant: String,
    pub seed: u64,
    pub noisy_snr: Option<f64>,
    pub snr: Option<f64>,
    pub ssim: Option<f64>,
    pub seconds: Option<f64>,
    pub iters: Option<usize>,
    pub status: String,
}

impl BenchRow {
    pub fn ok(&self) -> bool {
        !self.status.starts_with("error")
    }

    fn csv(&self) -> String {
        let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&self.image),
            self.eta,
            self.sigma,
            self.solver,
            csv_field(&self.variant),
            self.seed,
            o(self.noisy_snr),
            o(self.snr),
            o(self.ssim),
            o(self.seconds),
            self.iters.map(|n| n.to_string()).unwrap_or_default(),
            csv_field(&self.status)
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub table: PathBuf,
    pub rows: Vec<BenchRow>,
    pub aggregate_rows: usize,
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }
}

/// Worker count: `MPG_THREADS` if set, otherwise the available parallelism.
pub fn worker_threads() -> CliResult<usize> {
    match std::env::var("MPG_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!("MPG_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn build_cells(spec: &ExperimentSpec, flags: &SolverOverrides) -> CliResult<Vec<Cell>> {
    let variants: Vec<Option<f64>> = match &spec.sweep {
        Some(s) => s.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut cells = Vec::new();
    for image in 0..spec.images.len() {
        for &noise in &spec.noise {
            NoiseSpec::new(noise.eta, noise.sigma, 0).map_err(|e| CliError::Usage(e.to_string()))?;
            for entry in &spec.solvers {
                let solver: SolverKind = entry.name.parse().map_err(|e: mpg_core::Error| CliError::Usage(e.to_string()))?;
                for v in &variants {
                    let mut ov = entry.overrides.clone();
                    let mut variant = String::new();
                    if let (Some(value), Some(sweep)) = (v, &spec.sweep) {
                        set_parameter(&mut ov, &sweep.parameter, *value)?;
                        variant = format!("{}={}", sweep.parameter, value);
                    }
                    let merged = flags.over(&ov);
                    let config = merged.resolve();
                    config.validate().map_err(|e| CliError::Usage(format!("solver {}: {e}", entry.name)))?;
                    let lambda = baseline_lambda(solver, &config, merged.lambda);
                    for &seed in &spec.seeds {
                        cells.push(Cell {
                            image,
                            noise,
                            solver,
                            solver_name: entry.name.clone(),
                            variant: variant.clone(),
                            config,
                            lambda,
                            seed,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

fn run_cell(cell: &Cell, clean: &ImageGrid, label: &str) -> BenchRow {
    let mut row = BenchRow {
        image: label.to_string(),
        eta: cell.noise.eta,
        sigma: cell.noise.sigma,
        solver: cell.solver_name.clone(),
        variant: cell.variant.clone(),
        seed: cell.seed,
        noisy_snr: None,
        snr: None,
        ssim: None,
        seconds: None,
        iters: None,
        status: String::new(),
    };
    let f = match NoiseSpec::new(cell.noise.eta, cell.noise.sigma, cell.seed).and_then(|s| corrupt(clean, &s)) {
        Ok(f) => f,
        Err(e) => {
            row.status = format!("error: {e}");
            return row;
        }
    };
    row.noisy_snr = snr(&f, clean).ok();
    let f = if cell.solver == SolverKind::TvKl { clamp_nonnegative(&f).0 } else { f };
    let start = Instant::now();
    match cell.solver.solve(&f, &cell.config, cell.lambda, None) {
        Ok(sol) => {
            row.seconds = Some(start.elapsed().as_secs_f64());
            row.iters = Some(sol.iterations());
            row.snr = snr(&sol.image, clean).ok();
            row.ssim = ssim(&sol.image, clean, &SsimConfig::default()).ok();
            row.status = if sol.converged { "converged" } else { "max_iters" }.to_string();
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// One `seed = mean` row per (image, noise, solver, variant) group.
fn aggregate(rows: &[BenchRow], seeds: usize) -> Vec<String> {
    rows.chunks(seeds)
        .map(|group| {
            let ok: Vec<&BenchRow> = group.iter().filter(|r| r.ok()).collect();
            let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let first = &group[0];
            format!(
                "{},{},{},{},{},mean,{},{},{},{},{},{}/{} ok",
                csv_field(&first.image),
                first.eta,
                first.sigma,
                first.solver,
                csv_field(&first.variant),
                o(mean(group.iter().filter_map(|r| r.noisy_snr))),
                o(mean(ok.iter().filter_map(|r| r.snr))),
                o(mean(ok.iter().filter_map(|r| r.ssim))),
                o(mean(ok.iter().filter_map(|r| r.seconds))),
                o(mean(ok.iter().filter_map(|r| r.iters.map(|n| n as f64)))),
                ok.len(),
                group.len()
            )
        })
        .collect()
}

/// Runs the experiment and writes `bench.csv` into the spec's output
/// directory. `flags` take precedence over the per-solver spec values.
pub fn cmd_bench(spec: &ExperimentSpec, flags: &SolverOverrides, threads: usize) -> CliResult<BenchReport> {
    let sources: Vec<ImageSource> = spec
        .images
        .iter()
        .map(|img| match (&img.phantom, &img.file) {
            (Some(kind), None) => Ok(ImageSource::Phantom {
                kind: kind.parse::<PhantomKind>().map_err(|e| CliError::Usage(e.to_string()))?,
                width: img.width,
                height: img.height,
            }),
            (None, Some(path)) => Ok(ImageSource::File(path.clone())),
            _ => Err(CliError::Usage("each image needs exactly one of `phantom` or `file`".into())),
        })
        .collect::<CliResult<_>>()?;
    let images = sources.iter().map(ImageSource::load).collect::<CliResult<Vec<_>>>()?;
    let labels: Vec<String> = sources.iter().map(ImageSource::label).collect();
    let cells = build_cells(spec, flags)?;

    fs::create_dir_all(&spec.output_dir).map_err(|e| CliError::io(&spec.output_dir, e))?;
    let table = spec.output_dir.join("bench.csv");
    let file = File::create(&table).map_err(|e| CliError::io(&table, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| CliError::io(&table, e);

    let mut preamble = String::new();
    writeln!(preamble, "# cells = {}", cells.len()).unwrap();
    if spec.solvers.iter().any(|s| s.name.parse::<SolverKind>().ok() == Some(SolverKind::TvKl)) {
        writeln!(preamble, "# note: tvkl inputs are clamped at 0").unwrap();
    }
    write!(out, "{preamble}{BENCH_HEADER}\n").map_err(io_err)?;

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, BenchRow)>();
    let workers = threads.clamp(1, cells.len().max(1));
    let mut rows: Vec<BenchRow> = Vec::with_capacity(cells.len());
    let write_result = std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, cells, images, labels) = (&next, &cells, &images, &labels);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let row = run_cell(cell, &images[cell.image], &labels[cell.image]);
                if tx.send((i, row)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // single writer: emit rows in cell order as soon as the prefix is complete
        let mut pending = BTreeMap::new();
        for (i, row) in rx {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&rows.len()) {
                writeln!(out, "{}", row.csv())?;
                out.flush()?;
                rows.push(row);
            }
        }
        Ok::<(), std::io::Error>(())
    });
    write_result.map_err(io_err)?;

    let aggregates = aggregate(&rows, spec.seeds.len());
    for line in &aggregates {
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(BenchReport {
        table,
        rows,
        aggregate_rows: aggregates.len(),
    })
}
