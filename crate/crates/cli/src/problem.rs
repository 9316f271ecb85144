use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use momnet::imaging::{
    backprojection_init, build_blur, build_radon, gaussian_kernel, random_ellipse_phantom, shepp_logan, CtGeometry,
};
use momnet::io::{open_reader, read_pgm, read_sparse_matrix, read_vector_csv};
use momnet::prox::ThresholdVector;
use momnet::refiner::{make_tf_filterbank, read_refiner, ConvRefiner, TiedCaolRefiner};
use momnet::{DataFit, Filter, Image, LinearOperator, Model, QuadraticDataFit};

use crate::config::{PhantomKind, ProblemSpec, RefinerSpec, RunConfig, SampleSpec};
use crate::error::CliError;

pub const REFINER_PREFIX: &str = "refiner_";

/// Forward operator together with the image shape it acts on.
pub struct Problem {
    pub op: Arc<dyn LinearOperator<f64>>,
    pub height: usize,
    pub width: usize,
    pub is_ct: bool,
}

impl Problem {
    pub fn build(cfg: &RunConfig) -> Result<Self, CliError> {
        let (height, width) = cfg.problem.shape();
        let (op, is_ct): (Arc<dyn LinearOperator<f64>>, bool) = match &cfg.problem {
            ProblemSpec::Ct {
                size,
                views,
                detectors,
                pitch,
            } => {
                let geom = match detectors {
                    Some(d) => CtGeometry::new(*size, *views, *d, *pitch)?,
                    None => CtGeometry::covering(*size, *views, *pitch)?,
                };
                (Arc::new(build_radon::<f64>(&geom)?), true)
            }
            ProblemSpec::Blur {
                height,
                width,
                kernel_side,
                kernel_variance,
            } => (
                Arc::new(build_blur(gaussian_kernel(*kernel_side, *kernel_variance)?, *height, *width)?),
                false,
            ),
            ProblemSpec::Matrix { operator, .. } => {
                let path = cfg.resolve(operator);
                let reader = open_reader(&path).map_err(|e| CliError::reading(&path, e))?;
                let m = read_sparse_matrix::<f64>(reader).map_err(|e| CliError::reading(&path, e))?;
                (Arc::new(m), false)
            }
        };
        if op.input_dim() != height * width {
            return Err(CliError::Config(format!(
                "operator acts on {} pixels but the problem image is {height}×{width}",
                op.input_dim()
            )));
        }
        Ok(Self { op, height, width, is_ct })
    }

    /// Starting image when none is supplied: the measurements themselves for square
    /// image-domain operators, a normalized back-projection otherwise.
    pub fn default_init(&self, f: &DataFit) -> Result<Image, CliError> {
        if !self.is_ct && self.op.output_dim() == self.height * self.width {
            Ok(Image::new(f.measurements().to_vec(), self.height, self.width)?)
        } else {
            Ok(backprojection_init(f, self.height, self.width)?)
        }
    }
}

pub fn read_image(path: &Path, height: usize, width: usize) -> Result<Image, CliError> {
    let img = if path.extension().is_some_and(|e| e == "pgm") {
        let reader = open_reader(path).map_err(|e| CliError::reading(path, e))?;
        read_pgm::<f64>(reader, 0.0, 1.0).map_err(|e| CliError::reading(path, e))?
    } else {
        let values = read_vector(path)?;
        Image::new(values, height, width).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    if img.shape() != (height, width) {
        return Err(CliError::Config(format!(
            "{}: image is {}×{}, expected {height}×{width}",
            path.display(),
            img.height(),
            img.width()
        )));
    }
    Ok(img)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let reader = open_reader(path).map_err(|e| CliError::reading(path, e))?;
    read_vector_csv(reader).map_err(|e| CliError::reading(path, e))
}

pub fn phantom(kind: PhantomKind, n: usize, seed: u64) -> Result<Image, CliError> {
    Ok(match kind {
        PhantomKind::SheppLogan => shepp_logan(n)?,
        PhantomKind::Random => random_ellipse_phantom(n, seed)?,
    })
}

/// Explicit file, else the file of that name in the sample directory if present.
fn sample_file(cfg: &RunConfig, spec: &SampleSpec, explicit: &Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(cfg.resolve(p));
    }
    let candidate = cfg.resolve(spec.dir.as_ref()?).join(default_name);
    candidate.exists().then_some(candidate)
}

pub fn sample_truth(cfg: &RunConfig, problem: &Problem, spec: &SampleSpec, index: usize) -> Result<Option<Image>, CliError> {
    if let Some(path) = sample_file(cfg, spec, &spec.truth, "truth.pgm") {
        return read_image(&path, problem.height, problem.width).map(Some);
    }
    match spec.phantom {
        Some(kind) => {
            if problem.height != problem.width {
                return Err(CliError::Config("phantoms need a square image".into()));
            }
            phantom(kind, problem.height, spec.phantom_seed.unwrap_or(index as u64)).map(Some)
        }
        None => Ok(None),
    }
}

/// A measured image ready for reconstruction or training.
pub struct LoadedSample {
    pub truth: Option<Image>,
    pub datafit: DataFit,
    pub init: Image,
}

pub fn load_samples(cfg: &RunConfig, problem: &Problem) -> Result<Vec<LoadedSample>, CliError> {
    if cfg.samples.is_empty() {
        return Err(CliError::Config("no [[samples]] listed".into()));
    }
    cfg.samples
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let truth = sample_truth(cfg, problem, spec, k)?;
            let y_path = sample_file(cfg, spec, &spec.measurements, "measurements.csv")
                .ok_or_else(|| CliError::Config(format!("sample {k} has no measurements file")))?;
            let y = read_vector(&y_path)?;
            let weights = match sample_file(cfg, spec, &spec.weights, "weights.csv") {
                Some(p) => read_vector(&p)?,
                None => vec![1.0; y.len()],
            };
            let datafit = QuadraticDataFit::new(problem.op.clone(), weights, y)
                .map_err(|e| CliError::Config(format!("sample {k}: {e}")))?;
            let init = match sample_file(cfg, spec, &spec.init, "init.csv") {
                Some(p) => read_image(&p, problem.height, problem.width)?,
                None => problem.default_init(&datafit)?,
            };
            Ok(LoadedSample { truth, datafit, init })
        })
        .collect()
}

pub fn refiner_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(REFINER_PREFIX) && n.ends_with(".txt"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!("no {REFINER_PREFIX}*.txt files in {}", dir.display())));
    }
    Ok(files)
}

fn scaling(factor: f64) -> Model {
    Model::Conv(ConvRefiner::new(Filter::new(1, vec![factor]).expect("1×1 filter")))
}

/// Refiners from `--refiners DIR` if given, else from the `[refiner]` section.
pub fn load_refiners(cfg: &RunConfig, override_dir: Option<&Path>) -> Result<Vec<Model>, CliError> {
    let spec = match (override_dir, &cfg.refiner) {
        (Some(dir), _) => RefinerSpec::Files { dir: dir.to_path_buf() },
        (None, Some(spec)) => match spec {
            RefinerSpec::Files { dir } => RefinerSpec::Files { dir: cfg.resolve(dir) },
            other => other.clone(),
        },
        (None, None) => return Err(CliError::Config("no refiners: pass --refiners or add a [refiner] section".into())),
    };
    match spec {
        RefinerSpec::Files { dir } => refiner_files(&dir)?
            .iter()
            .map(|p| open_reader(p).and_then(read_refiner).map_err(|e| CliError::reading(p, e)))
            .collect(),
        RefinerSpec::Identity => Ok(vec![scaling(1.0)]),
        RefinerSpec::Scaled { factor } => Ok(vec![scaling(factor)]),
        RefinerSpec::TfCaol { channels, threshold } => {
            let bank = make_tf_filterbank(channels)?;
            let thresholds = ThresholdVector::uniform(channels, threshold)?;
            Ok(vec![Model::TiedCaol(TiedCaolRefiner::new(bank, thresholds, true)?)])
        }
    }
}
