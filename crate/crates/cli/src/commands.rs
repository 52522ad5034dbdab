//! The `phantom`, `corrupt` and `denoise` commands.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mpg_core::{corrupt, make_phantom, snr, ImageGrid, NoiseSpec, PhantomKind, SolverConfig, SolverKind};

use crate::config::{baseline_lambda, describe};
use crate::error::{from_solve, CliError, CliResult};
use crate::io::{read_image, write_image};
use crate::trace::write_trace;

/// Where an input image comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    File(PathBuf),
    Phantom { kind: PhantomKind, width: usize, height: usize },
}

impl ImageSource {
    pub fn load(&self) -> CliResult<ImageGrid> {
        match self {
            Self::File(path) => read_image(path),
            Self::Phantom { kind, width, height } => {
                make_phantom(*kind, *width, *height).map_err(|e| CliError::Usage(e.to_string()))
            }
        }
    }

    /// Short name used in bench tables.
    pub fn label(&self) -> String {
        match self {
            Self::File(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            Self::Phantom { kind, width, height } => format!("{kind}-{width}x{height}"),
        }
    }
}

pub fn cmd_phantom(kind: PhantomKind, width: usize, height: usize, output: &Path) -> CliResult<()> {
    let img = ImageSource::Phantom { kind, width, height }.load()?;
    write_image(&img, output)
}

pub fn cmd_corrupt(source: &ImageSource, spec: &NoiseSpec, output: &Path) -> CliResult<()> {
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let clean = source.load()?;
    let noisy = corrupt(&clean, spec).map_err(CliError::Input)?;
    write_image(&noisy, output)
}

#[derive(Debug, Clone)]
pub struct DenoiseRequest {
    pub input: PathBuf,
    pub output: PathBuf,
    pub solver: SolverKind,
    pub config: SolverConfig,
    /// Fidelity weight for TV+L2 / TV+KL; ignored by BCA and BCA_f.
    pub lambda: Option<f64>,
    pub truth: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct DenoiseSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_se: f64,
    pub snr: Option<f64>,
    pub seconds: f64,
    pub warnings: Vec<String>,
}

/// Clamps negative pixels to zero, returning how many were changed.
pub fn clamp_nonnegative(f: &ImageGrid) -> (ImageGrid, usize) {
    let count = f.data().iter().filter(|&&v| v < 0.0).count();
    (f.max_scalar(0.0), count)
}

pub fn cmd_denoise(req: &DenoiseRequest) -> CliResult<DenoiseSummary> {
    req.config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut f = read_image(&req.input)?;
    let truth = req.truth.as_deref().map(read_image).transpose()?;
    if let Some(t) = &truth {
        if !t.same_shape(&f) {
            return Err(CliError::Data(format!(
                "truth is {}x{} but input is {}x{}",
                t.width(),
                t.height(),
                f.width(),
                f.height()
            )));
        }
    }
    let mut comments = describe(req.solver, &req.config, req.lambda);
    comments.insert(0, format!("input = {}", req.input.display()));
    if req.solver == SolverKind::TvKl {
        let (clamped, n) = clamp_nonnegative(&f);
        comments.push(format!("note: tvkl input clamped at 0 ({n} pixels changed)"));
        f = clamped;
    }
    let lambda = baseline_lambda(req.solver, &req.config, req.lambda);

    let start = Instant::now();
    let sol = req.solver.solve(&f, &req.config, lambda, truth.as_ref()).map_err(from_solve)?;
    let seconds = start.elapsed().as_secs_f64();

    write_image(&sol.image, &req.output)?;
    if let Some(path) = &req.trace {
        comments.extend(sol.warnings.iter().map(|w| format!("warning: {w}")));
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        write_trace(BufWriter::new(file), &comments, &sol.trace).map_err(|e| CliError::io(path, e))?;
    }
    let final_snr = match &truth {
        Some(t) => Some(snr(&sol.image, t).map_err(|e| CliError::Data(e.to_string()))?),
        None => None,
    };
    Ok(DenoiseSummary {
        iterations: sol.iterations(),
        converged: sol.converged,
        final_se: sol.final_se().unwrap_or(f64::NAN),
        snr: final_snr,
        seconds,
        warnings: sol.warnings,
    })
}
