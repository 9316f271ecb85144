use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use momnet::imaging::{psnr, rmse, simulate_ct, simulate_gaussian, CtNoise};
use momnet::io::{read_pgm, write_loss_csv, write_pgm};
use momnet::refiner::refiner_to_text;
use momnet::solver::TraceStatus;
use momnet::training::{diagnose_refiners, greedy_train, TrainingSample};
use momnet::{run_bcd_net, run_momentum_net, Config, DataFit, Feasible, Image, Model, Trace};

use crate::config::{PhantomKind, RunConfig, SolverKind, SolverSpec};
use crate::error::CliError;
use crate::output::OutputDir;
use crate::problem::{load_refiners, load_samples, phantom, sample_truth, Problem, LoadedSample, REFINER_PREFIX};

/// Command-line overrides of the `[solver]` section.
#[derive(Clone, Debug, Default)]
pub struct SolverOverrides {
    pub solver: Option<SolverKind>,
    pub no_extrapolation: bool,
    pub inner_iters: Option<usize>,
    pub rho: Option<f64>,
    pub chi: Option<f64>,
    pub n_iter: Option<usize>,
}

impl SolverOverrides {
    pub fn apply(&self, spec: &SolverSpec) -> Result<SolverSpec, CliError> {
        let mut s = spec.clone();
        if let Some(kind) = self.solver {
            s.name = kind;
        }
        if self.no_extrapolation {
            match s.name {
                SolverKind::Bcd => return Err(CliError::Config("--no-extrapolation does not apply to the bcd solver".into())),
                _ => s.name = SolverKind::MomentumNoextrap,
            }
        }
        if let Some(v) = self.inner_iters {
            s.inner_iters = v;
        }
        if let Some(v) = self.rho {
            s.rho = v;
        }
        if let Some(v) = self.chi {
            s.chi = Some(v);
            s.gamma = None;
        }
        if let Some(v) = self.n_iter {
            s.n_iter = v;
        }
        Ok(s)
    }
}

fn sample_name(k: usize) -> String {
    format!("sample_{k:03}")
}

fn run_solver(
    spec: &SolverSpec,
    net: &Config,
    refiners: &[Model],
    f: &DataFit,
    feasible: Feasible,
    x0: &Image,
) -> Result<Trace, CliError> {
    Ok(match spec.name {
        SolverKind::Bcd => run_bcd_net(net, refiners, f, feasible, x0, spec.inner_iters)?,
        SolverKind::Momentum | SolverKind::MomentumNoextrap => run_momentum_net(net, refiners, f, feasible, x0)?,
    })
}

fn status_text(trace: &Trace) -> String {
    match &trace.status {
        TraceStatus::Completed => "completed".into(),
        TraceStatus::NonFinite { iteration, stage } => format!("non-finite at iteration {iteration} ({stage})"),
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn phantom_cmd(size: usize, kind: PhantomKind, seed: u64, out: &Path) -> Result<(), CliError> {
    let img = phantom(kind, size, seed)?;
    let mut dir = OutputDir::create(out)?;
    dir.write_pgm("phantom.pgm", &img)?;
    dir.finish("phantom", None, seed)?;
    println!("wrote {}×{} phantom to {}", size, size, out.join("phantom.pgm").display());
    Ok(())
}

pub fn simulate_cmd(config: &Path, seed: Option<u64>, noiseless: bool, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let problem = Problem::build(&cfg)?;
    if cfg.samples.is_empty() {
        return Err(CliError::Config("no [[samples]] listed".into()));
    }
    let noiseless = noiseless || cfg.noise.noiseless;
    let mut dir = OutputDir::create(out)?;
    for (k, spec) in cfg.samples.iter().enumerate() {
        let truth = sample_truth(&cfg, &problem, spec, k)?
            .ok_or_else(|| CliError::Config(format!("sample {k} needs a truth image or a phantom")))?;
        // measure the image exactly as it will be stored
        let mut pgm = Vec::new();
        write_pgm(&truth, 0.0, 1.0, &mut pgm)?;
        let truth: Image = read_pgm(pgm.as_slice(), 0.0, 1.0)?;
        let noise_seed = seed.wrapping_add(k as u64);
        let (y, weights) = if problem.is_ct {
            let noise = CtNoise {
                incident: cfg.noise.incident,
                electronic_variance: cfg.noise.electronic_variance,
                noiseless,
            };
            let m = simulate_ct(&truth, problem.op.as_ref(), &noise, noise_seed)?;
            (m.sinogram, m.weights)
        } else {
            let sigma = if noiseless { 0.0 } else { cfg.noise.sigma };
            let y = simulate_gaussian(&truth, problem.op.as_ref(), sigma, noise_seed)?;
            let w = vec![1.0; y.len()];
            (y, w)
        };
        let f = DataFit::new(problem.op.clone(), weights.clone(), y.clone())?;
        let init = problem.default_init(&f)?;
        let name = sample_name(k);
        dir.write_bytes(&format!("{name}/truth.pgm"), &pgm)?;
        dir.write_vector(&format!("{name}/measurements.csv"), &y)?;
        dir.write_vector(&format!("{name}/weights.csv"), &weights)?;
        dir.write_vector(&format!("{name}/init.csv"), init.as_slice())?;
    }
    dir.finish("simulate", Some(config), seed)?;
    println!("simulated {} sample(s) into {}", cfg.samples.len(), out.display());
    Ok(())
}

fn training_samples(samples: Vec<LoadedSample>, net: &Config) -> Result<Vec<momnet::Sample>, CliError> {
    samples
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            let truth = s
                .truth
                .ok_or_else(|| CliError::Config(format!("sample {k} has no truth image")))?;
            Ok(TrainingSample::new(truth, s.init, s.datafit, net)?)
        })
        .collect()
}

pub fn train_cmd(config: &Path, seed: Option<u64>, overrides: &SolverOverrides, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let spec = overrides.apply(&cfg.solver)?;
    let net = spec.net_config()?;
    let feasible = spec.feasible_set()?;
    let arch = cfg
        .architecture
        .as_ref()
        .ok_or_else(|| CliError::Config("training needs an [architecture] section".into()))?
        .architecture();
    let train = cfg.training.train_config(seed)?;
    let problem = Problem::build(&cfg)?;
    let samples = training_samples(load_samples(&cfg, &problem)?, &net)?;
    let result = greedy_train(&samples, &arch, &net, feasible, &train)?;
    let mut dir = OutputDir::create(out)?;
    for (i, (model, history)) in result.refiners.iter().zip(&result.loss_histories).enumerate() {
        dir.write_bytes(&format!("{REFINER_PREFIX}{i:03}.txt"), refiner_to_text(model).as_bytes())?;
        let mut csv = Vec::new();
        write_loss_csv(history, &mut csv)?;
        dir.write_bytes(&format!("loss_{i:03}.csv"), &csv)?;
    }
    dir.finish("train", Some(config), seed)?;
    for (i, loss) in result.final_losses().iter().enumerate() {
        println!("iteration {i:3}: final loss {loss:.6e}");
    }
    Ok(())
}

pub fn reconstruct_cmd(
    config: &Path,
    seed: Option<u64>,
    overrides: &SolverOverrides,
    refiner_dir: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let spec = overrides.apply(&cfg.solver)?;
    let net = spec.net_config()?;
    let feasible = spec.feasible_set()?;
    let problem = Problem::build(&cfg)?;
    let refiners = load_refiners(&cfg, refiner_dir)?;
    let samples = load_samples(&cfg, &problem)?;
    let mut dir = OutputDir::create(out)?;
    let mut metrics = String::from("sample,solver,iterations,status,final_objective,rmse,psnr\n");
    let mut failure = None;
    for (k, s) in samples.iter().enumerate() {
        let trace = run_solver(&spec, &net, &refiners, &s.datafit, feasible, &s.init)?;
        let x = trace.final_iterate();
        let name = sample_name(k);
        dir.write_pgm(&format!("{name}/recon.pgm"), x)?;
        dir.write_vector(&format!("{name}/recon.csv"), x.as_slice())?;
        dir.write_trace(&format!("{name}/trace.csv"), &trace)?;
        let (err, peak) = match &s.truth {
            Some(t) => (Some(rmse(x, t, None)?), Some(psnr(x, t, 1.0)?)),
            None => (None, None),
        };
        let _ = writeln!(
            metrics,
            "{k},{},{},{},{},{},{}",
            spec.name.name(),
            trace.iterations(),
            status_text(&trace),
            opt_cell(trace.objectives().last().copied()),
            opt_cell(err),
            opt_cell(peak)
        );
        if !trace.is_completed() && failure.is_none() {
            failure = Some(format!("sample {k}: {}", status_text(&trace)));
        }
    }
    dir.write_bytes("metrics.csv", metrics.as_bytes())?;
    dir.finish("reconstruct", Some(config), seed)?;
    print!("{metrics}");
    match failure {
        Some(msg) => Err(CliError::Numeric(msg)),
        None => Ok(()),
    }
}

pub fn diagnose_cmd(
    config: &Path,
    seed: Option<u64>,
    overrides: &SolverOverrides,
    refiner_dir: Option<&Path>,
    pairs: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let spec = overrides.apply(&cfg.solver)?;
    let net = spec.net_config()?;
    let feasible = spec.feasible_set()?;
    let problem = Problem::build(&cfg)?;
    let refiners = load_refiners(&cfg, refiner_dir)?;
    let samples = training_samples(load_samples(&cfg, &problem)?, &net)?;
    let rows = diagnose_refiners(&refiners, &samples, &net, feasible, pairs.unwrap_or(cfg.diagnose.pairs), seed)?;
    let mut csv = String::from("iteration,kappa,epsilon,delta\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{:?},{},{}", r.iteration, r.kappa, opt_cell(r.epsilon), opt_cell(r.delta));
    }
    let mut dir = OutputDir::create(out)?;
    dir.write_bytes("diagnostics.csv", csv.as_bytes())?;
    dir.finish("diagnose", Some(config), seed)?;
    print!("{csv}");
    Ok(())
}

/// Outcome of one configuration in a comparison.
struct CompareRow {
    label: String,
    solver: SolverKind,
    trace: Trace,
    rmse: Option<f64>,
}

fn compare_one(config: &Path) -> Result<(RunConfig, CompareRow), CliError> {
    let cfg = RunConfig::load(config)?;
    let spec = cfg.solver.clone();
    let net = spec.net_config()?;
    let feasible = spec.feasible_set()?;
    let problem = Problem::build(&cfg)?;
    let refiners = load_refiners(&cfg, None)?;
    let sample = load_samples(&cfg, &problem)?.into_iter().next().expect("at least one sample");
    let trace = run_solver(&spec, &net, &refiners, &sample.datafit, feasible, &sample.init)?;
    let rmse = match &sample.truth {
        Some(t) => Some(rmse(trace.final_iterate(), t, None)?),
        None => None,
    };
    let label = config.file_stem().and_then(|s| s.to_str()).unwrap_or("config").to_string();
    Ok((
        cfg,
        CompareRow {
            label,
            solver: spec.name,
            trace,
            rmse,
        },
    ))
}

/// First iteration (1-based) whose relative step residual is at most `threshold`.
pub fn iterations_to_threshold(trace: &Trace, threshold: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .position(|r| r.relative_step_residual() <= threshold)
        .map(|i| i + 1)
}

pub fn compare_cmd(configs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    if configs.is_empty() {
        return Err(CliError::Config("compare needs at least one --config".into()));
    }
    // shapes are checked before any solver starts
    let mut shape = None;
    for path in configs {
        let cfg = RunConfig::load(path)?;
        let s = cfg.problem.shape();
        match shape {
            None => shape = Some((s, path.clone())),
            Some((first, ref p)) if first != s => {
                return Err(CliError::Config(format!(
                    "problem shape {}×{} in {} differs from {}×{} in {}",
                    s.0,
                    s.1,
                    path.display(),
                    first.0,
                    first.1,
                    p.display()
                )))
            }
            _ => {}
        }
    }
    let results: Vec<Result<(RunConfig, CompareRow), CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|p| scope.spawn(move || compare_one(p))).collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    let mut dir = OutputDir::create(out)?;
    let mut summary =
        String::from("config,solver,iterations,status,final_objective,final_relative_step,rmse,threshold,iterations_to_threshold\n");
    for (idx, result) in results.into_iter().enumerate() {
        let (cfg, row) = result?;
        let threshold = cfg.compare.threshold;
        dir.write_trace(&format!("trace_{idx:02}_{}.csv", row.label), &row.trace)?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{:?},{}",
            row.label,
            row.solver.name(),
            row.trace.iterations(),
            status_text(&row.trace),
            opt_cell(row.trace.objectives().last().copied()),
            opt_cell(row.trace.records.last().map(|r| r.relative_step_residual())),
            opt_cell(row.rmse),
            threshold,
            iterations_to_threshold(&row.trace, threshold).map(|i| i.to_string()).unwrap_or_default()
        );
    }
    dir.write_bytes("summary.csv", summary.as_bytes())?;
    dir.finish("compare", None, 0)?;
    print!("{summary}");
    Ok(())
}
