use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use momnet::prox::FeasibleSet;
use momnet::solver::Regularization;
use momnet::training::Architecture;
use momnet::{Config, TrainConfig};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level run configuration. Relative paths resolve against the config file's directory.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub samples: Vec<SampleSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    pub refiner: Option<RefinerSpec>,
    pub architecture: Option<ArchSpec>,
    #[serde(default)]
    pub training: TrainingSpec,
    #[serde(default)]
    pub diagnose: DiagnoseSpec,
    #[serde(default)]
    pub compare: CompareSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Ct {
        size: usize,
        views: usize,
        detectors: Option<usize>,
        #[serde(default = "default_pitch")]
        pitch: f64,
    },
    Blur {
        height: usize,
        width: usize,
        #[serde(default = "default_kernel_side")]
        kernel_side: usize,
        #[serde(default = "default_kernel_variance")]
        kernel_variance: f64,
    },
    Matrix {
        operator: PathBuf,
        height: usize,
        width: usize,
    },
}

impl ProblemSpec {
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            ProblemSpec::Ct { size, .. } => (size, size),
            ProblemSpec::Blur { height, width, .. } | ProblemSpec::Matrix { height, width, .. } => (height, width),
        }
    }
}

fn default_pitch() -> f64 {
    1.0
}

fn default_kernel_side() -> usize {
    5
}

fn default_kernel_variance() -> f64 {
    2.0
}

/// Measurement noise. CT problems use the photon model, others additive Gaussian noise.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub incident: f64,
    pub electronic_variance: f64,
    pub sigma: f64,
    pub noiseless: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            incident: 1e5,
            electronic_variance: 25.0,
            sigma: 0.01,
            noiseless: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    SheppLogan,
    Random,
}

/// One image. `dir` points at a `simulate` output folder and fills in any file left unset.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub dir: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub phantom: Option<PhantomKind>,
    pub phantom_seed: Option<u64>,
    pub measurements: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub init: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Momentum,
    MomentumNoextrap,
    Bcd,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Momentum => "momentum",
            SolverKind::MomentumNoextrap => "momentum-noextrap",
            SolverKind::Bcd => "bcd",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FeasibleKind {
    #[default]
    All,
    Nonnegative,
    Box,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub name: SolverKind,
    pub n_iter: usize,
    pub rho: f64,
    pub chi: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: f64,
    pub lambda: f64,
    pub convex: bool,
    pub inner_iters: usize,
    pub feasible: FeasibleKind,
    pub box_lo: Option<f64>,
    pub box_hi: Option<f64>,
    pub track_fixed_point: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let base = Config::default();
        Self {
            name: SolverKind::Momentum,
            n_iter: base.n_iter,
            rho: base.rho,
            chi: None,
            gamma: None,
            delta: base.delta,
            lambda: base.lambda,
            convex: base.convex,
            inner_iters: 10,
            feasible: FeasibleKind::All,
            box_lo: None,
            box_hi: None,
            track_fixed_point: false,
        }
    }
}

impl SolverSpec {
    pub fn net_config(&self) -> Result<Config, CliError> {
        let regularization = match (self.chi, self.gamma) {
            (Some(_), Some(_)) => return Err(CliError::Config("set either solver.chi or solver.gamma, not both".into())),
            (_, Some(g)) => Regularization::Gamma(g),
            (Some(c), None) => Regularization::Chi(c),
            (None, None) => Config::default().regularization,
        };
        let cfg = Config {
            n_iter: self.n_iter,
            rho: self.rho,
            regularization,
            delta: self.delta,
            lambda: self.lambda,
            convex: self.convex,
            extrapolate: self.name != SolverKind::MomentumNoextrap,
            sharp_majorizer: false,
            track_fixed_point: self.track_fixed_point,
        };
        match self.name {
            SolverKind::Bcd => cfg.validate_common(),
            _ => cfg.validate(),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn feasible_set(&self) -> Result<FeasibleSet<f64>, CliError> {
        match (self.feasible, self.box_lo, self.box_hi) {
            (FeasibleKind::All, None, None) => Ok(FeasibleSet::All),
            (FeasibleKind::Nonnegative, None, None) => Ok(FeasibleSet::NonNegative),
            (FeasibleKind::Box, Some(lo), Some(hi)) => {
                FeasibleSet::boxed(lo, hi).map_err(|e| CliError::Config(e.to_string()))
            }
            (FeasibleKind::Box, _, _) => Err(CliError::Config("feasible = \"box\" needs box_lo and box_hi".into())),
            _ => Err(CliError::Config("box_lo/box_hi are only valid with feasible = \"box\"".into())),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RefinerSpec {
    /// `refiner_*.txt` files in `dir`, applied in name order.
    Files { dir: PathBuf },
    Identity,
    Scaled { factor: f64 },
    TfCaol { channels: usize, threshold: f64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArchSpec {
    Scnn {
        channels: usize,
        filter_side: usize,
        #[serde(default = "default_true")]
        residual: bool,
    },
    Dcnn {
        depth: usize,
        channels: usize,
        filter_side: usize,
    },
}

fn default_true() -> bool {
    true
}

impl ArchSpec {
    pub fn architecture(&self) -> Architecture {
        match *self {
            ArchSpec::Scnn {
                channels,
                filter_side,
                residual,
            } => Architecture::Scnn {
                channels,
                filter_side,
                residual,
            },
            ArchSpec::Dcnn {
                depth,
                channels,
                filter_side,
            } => Architecture::Dcnn {
                depth,
                channels,
                filter_side,
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSpec {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_filters: f64,
    pub lr_thresholds: f64,
    pub lr_decay: f64,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        let base = TrainConfig::default();
        Self {
            batch_size: base.batch_size,
            epochs: base.epochs,
            lr_filters: base.lr_filters,
            lr_thresholds: base.lr_thresholds,
            lr_decay: base.lr_decay,
        }
    }
}

impl TrainingSpec {
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let cfg = TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr_filters: self.lr_filters,
            lr_thresholds: self.lr_thresholds,
            lr_decay: self.lr_decay,
            seed,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSpec {
    pub pairs: usize,
}

impl Default for DiagnoseSpec {
    fn default() -> Self {
        Self { pairs: 100 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSpec {
    /// Relative step residual that counts as converged.
    pub threshold: f64,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self { threshold: 1e-6 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
