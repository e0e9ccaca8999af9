use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use super::cache::{cache_dir, cached_spectrum};
use super::config::*;
use super::output::{
    content_hash, plot_csv, sha256_hex, spectra_csv, to_json, Artifacts, Document, Gate, Manifest,
    PlotData, SCHEMA_VERSION,
};
use super::{RunError, EXIT_CONFIG, EXIT_FAILURE, EXIT_OK};
use crate::boundary::{Coupling, CouplingModel};
use crate::config_space::{fold_integral_check, AnisotropicGaussian};
use crate::propagator::{
    delta_pair_kernel, dual_reconstruction_check, epsilon_pair_kernel, free_kernel,
    ground_state_projection, hard_core_bose_kernel, permutation_sum, propagation_report,
    real_time_cross_check, robin_pair_kernel, robin_pde_check, verify_assumptions,
    verify_sector_properties, InitialState, KernelEvaluator, LadderRung, SectorPropertyReport,
};
use crate::spectral::report::{par_map, relative};
use crate::spectral::{
    duality_report_for, formulations_for, scale_invariance_report, SpectrumResult,
};
use crate::statistics::Statistics;

/// One command-line invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    /// Overrides the config's `output` key.
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub out_dir: Option<PathBuf>,
    pub artifacts: Vec<String>,
    pub gates: Vec<Gate>,
    /// Set when the run stopped before writing its report.
    pub error: Option<String>,
}

/// What a command computed, ready to be written.
#[derive(Debug)]
pub struct Experiment {
    pub command: Command,
    pub problem_hash: String,
    pub seed: u64,
    pub report: Value,
    pub gates: Vec<Gate>,
    pub artifacts: Artifacts,
}

impl Experiment {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    /// The JSON report document.
    pub fn document(&self) -> Result<Vec<u8>, RunError> {
        to_json(&Document {
            schema_version: SCHEMA_VERSION,
            command: self.command.name(),
            problem_hash: &self.problem_hash,
            seed: self.seed,
            passed: self.passed(),
            gates: &self.gates,
            report: &self.report,
        })
    }
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build a {t}-thread pool ({e}); using the default");
                f()
            }
        },
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}

/// Parse, run and write one experiment. Errors are reported on stderr and
/// through the exit code; nothing panics on bad input.
pub fn execute(inv: &Invocation) -> Outcome {
    let start = Instant::now();
    let fail = |code: i32, msg: String| {
        eprintln!("error: {msg}");
        Outcome {
            exit_code: code,
            out_dir: None,
            artifacts: Vec::new(),
            gates: Vec::new(),
            error: Some(msg),
        }
    };
    if inv.threads == Some(0) {
        return fail(
            EXIT_CONFIG,
            "config error at `--threads`: must be at least 1".into(),
        );
    }
    let text = match fs::read_to_string(&inv.config) {
        Ok(t) => t,
        Err(e) => {
            return fail(
                EXIT_CONFIG,
                format!("cannot read config {}: {e}", inv.config.display()),
            )
        }
    };
    let cfg = match ExperimentConfig::parse(inv.command, &text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e.to_string()),
    };
    let out_dir = inv
        .out
        .clone()
        .or_else(|| cfg.output().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(inv.command.name()));
    let cache = cache_dir();
    log::info!("running {} from {}", inv.command, inv.config.display());
    let exp = match with_threads(inv.threads, || run_experiment(&cfg, cache.as_deref())) {
        Ok(e) => e,
        Err(e) => return fail(e.exit_code(), e.to_string()),
    };
    let exit_code = if exp.passed() { EXIT_OK } else { EXIT_FAILURE };
    let written = exp
        .document()
        .and_then(|doc| {
            let mut files = Artifacts::default();
            files.add(inv.command.name(), "json", doc);
            let mut names = files.write(&out_dir, &exp.problem_hash)?;
            names.extend(exp.artifacts.write(&out_dir, &exp.problem_hash)?);
            Ok(names)
        })
        .and_then(|names| {
            let manifest = Manifest {
                schema_version: SCHEMA_VERSION,
                command: inv.command.name().to_string(),
                config_path: inv.config.display().to_string(),
                config_hash: sha256_hex(text.as_bytes()),
                problem_hash: exp.problem_hash.clone(),
                seed: exp.seed,
                versions: Manifest::versions(),
                threads: inv.threads,
                cache: cache.clone(),
                wall_time_seconds: start.elapsed().as_secs_f64(),
                exit_code,
                artifacts: names.clone(),
            };
            fs::write(out_dir.join("manifest.json"), to_json(&manifest)?)?;
            Ok(names)
        });
    let artifacts = match written {
        Ok(n) => n,
        Err(e) => {
            return fail(
                EXIT_FAILURE,
                format!("writing results to {}: {e}", out_dir.display()),
            )
        }
    };
    for g in &exp.gates {
        let verdict = if g.passed { "pass" } else { "FAIL" };
        let op = if g.bound == "max" { "<=" } else { ">=" };
        eprintln!("{verdict} {}: {:e} {op} {:e}", g.name, g.value, g.threshold);
    }
    Outcome {
        exit_code,
        out_dir: Some(out_dir),
        artifacts,
        gates: exp.gates,
        error: None,
    }
}

/// Run a validated experiment without touching the output directory.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    cache: Option<&Path>,
) -> Result<Experiment, RunError> {
    cfg.validate()?;
    let seed = cfg.seed();
    let mut exp = match cfg {
        ExperimentConfig::Spectrum(c) => spectrum(c, cache)?,
        ExperimentConfig::Duality(c) => duality(c)?,
        ExperimentConfig::ScaleInvariance(c) => scale_invariance(c)?,
        ExperimentConfig::KernelProperties(c) => kernel_properties(c)?,
        ExperimentConfig::DualKernels(c) => dual_kernels(c)?,
        ExperimentConfig::Propagate(c) => propagate(c)?,
        ExperimentConfig::FoldCheck(c) => fold_check(c)?,
    };
    exp.seed = seed;
    Ok(exp)
}

fn experiment<R: Serialize>(
    command: Command,
    hash_input: &impl Serialize,
    report: &R,
) -> Result<Experiment, RunError> {
    Ok(Experiment {
        command,
        problem_hash: content_hash(hash_input),
        seed: 0,
        report: serde_json::to_value(report)?,
        gates: Vec::new(),
        artifacts: Artifacts::default(),
    })
}

fn gate_max(
    gates: &mut Vec<Gate>,
    name: &str,
    threshold: Option<f64>,
    value: impl FnOnce() -> f64,
) {
    if let Some(t) = threshold {
        gates.push(Gate::at_most(name, value(), t));
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    // NaN when empty or when any value is NaN: an uncomputable gate fails
    let mut it = values.into_iter().peekable();
    if it.peek().is_none() {
        return f64::NAN;
    }
    it.fold(f64::NEG_INFINITY, |m, v| {
        if v.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(v)
        }
    })
}

#[derive(Serialize)]
struct Problem<'a, T: Serialize> {
    domain: &'a crate::spectral::DomainSpec,
    model: &'a CouplingModel,
    extra: T,
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    domain: &'a crate::spectral::DomainSpec,
    couplings: Vec<String>,
    k: usize,
    spectra: &'a [SpectrumResult],
}

fn spectrum(c: &SpectrumConfig, cache: Option<&Path>) -> Result<Experiment, RunError> {
    let dom = c.domain.to_domain(c.n)?;
    let model = c.coupling.to_model(c.n)?;
    let formulations = c
        .formulations
        .clone()
        .unwrap_or_else(|| formulations_for(&model));
    let opts = c.solver.options(c.seed)?;
    let results = par_map(&formulations, |&f| {
        cached_spectrum(cache, f, &dom, &model, c.k, &opts)
    });
    let spectra = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let report = SpectrumReport {
        domain: &dom,
        couplings: model.labels(),
        k: c.k,
        spectra: &spectra,
    };
    let mut exp = experiment(
        Command::Spectrum,
        &Problem {
            domain: &dom,
            model: &model,
            extra: (),
        },
        &report,
    )?;
    gate_max(&mut exp.gates, "residual", c.gates.residual, || {
        max_of(spectra.iter().flat_map(|s| s.residuals.iter().copied()))
    });
    let mut plot = PlotData::default();
    for s in &spectra {
        for (i, e) in s.eigenvalues.iter().enumerate() {
            plot.push(s.formulation.name(), i as f64, *e);
        }
    }
    exp.artifacts
        .add("spectra", "csv", spectra_csv(&[spectra])?);
    exp.artifacts.add("levels", "csv", plot_csv(&plot)?);
    Ok(exp)
}

fn duality(c: &DualityConfig) -> Result<Experiment, RunError> {
    let dom = c.domain.to_domain(c.n)?;
    let model = c.coupling.to_model(c.n)?;
    let formulations = c
        .formulations
        .clone()
        .unwrap_or_else(|| formulations_for(&model));
    let opts = c.solver.options(c.seed)?;
    let rep = duality_report_for(&dom, &model, &formulations, c.k, c.refinements, &opts)?;
    let mut exp = experiment(
        Command::Duality,
        &Problem {
            domain: &dom,
            model: &model,
            extra: (),
        },
        &rep,
    )?;
    let g = &c.gates;
    let gates = &mut exp.gates;
    gate_max(gates, "pair_deviation", g.pair_deviation, || {
        if rep.formulations.len() < 2 {
            f64::NAN
        } else {
            rep.finest_deviation()
        }
    });
    gate_max(gates, "mapping", g.mapping, || {
        max_of(rep.mapping.iter().map(|m| m.deviation))
    });
    if let (Some(order), Some(tol)) = (g.order, g.order_tolerance) {
        let worst = max_of(
            rep.convergence
                .iter()
                .filter(|cv| cv.index == 0)
                .map(|cv| cv.order.map_or(f64::NAN, |p| (p - order).abs())),
        );
        gates.push(Gate::at_most("order", worst, tol));
    }
    if let (Some(tol), Some(target)) = (g.ground_energy, c.oracle.ground_energy) {
        gates.push(Gate::at_most(
            "ground_energy",
            max_of(
                rep.finest()
                    .iter()
                    .map(|s| relative(s.eigenvalues[0], target)),
            ),
            tol,
        ));
    }
    if let (Some(tol), Some(levels)) = (g.levels, &c.oracle.levels) {
        let dev = rep.finest().iter().flat_map(|s| {
            s.eigenvalues
                .iter()
                .zip(levels)
                .map(|(e, x)| relative(*e, *x))
        });
        gates.push(Gate::at_most("levels", max_of(dev), tol));
    }
    gate_max(gates, "residual", g.residual, || {
        max_of(
            rep.spectra
                .iter()
                .flatten()
                .flat_map(|s| s.residuals.iter().copied()),
        )
    });

    let mut plot = PlotData::default();
    for specs in &rep.spectra {
        for s in specs {
            for (i, e) in s.eigenvalues.iter().enumerate() {
                plot.push(format!("{}/E{i}", s.formulation.name()), s.h, *e);
            }
        }
    }
    for level in &rep.deviations {
        for p in &level.pairs {
            plot.push(
                format!("deviation/{}-{}", p.a.name(), p.b.name()),
                level.h,
                p.max_relative,
            );
        }
    }
    exp.artifacts
        .add("spectra", "csv", spectra_csv(&rep.spectra)?);
    exp.artifacts.add("convergence", "csv", plot_csv(&plot)?);
    Ok(exp)
}

fn scale_invariance(c: &ScaleInvarianceConfig) -> Result<Experiment, RunError> {
    let dom = c.domain.to_domain(c.n)?;
    let g = match &c.scale.g {
        PerFace::One(v) => vec![*v; c.n - 1],
        PerFace::Many(v) => v.clone(),
    };
    let opts = c.solver.options(c.seed)?;
    let s = &c.scale;
    let rep = scale_invariance_report(&g, s.lambda, &dom, c.k, s.shift, s.control_length, &opts)?;
    let model = CouplingModel::new(g.iter().map(|&v| Coupling::ScaleInvariant(v)).collect())?;
    let mut exp = experiment(
        Command::ScaleInvariance,
        &Problem {
            domain: &dom,
            model: &model,
            extra: (s.lambda, s.shift, s.control_length),
        },
        &rep,
    )?;
    let gates = &mut exp.gates;
    gate_max(gates, "dilation", c.gates.dilation, || rep.max_relative);
    gate_max(gates, "translation", c.gates.translation, || {
        rep.translation_abs
    });
    if let Some(t) = c.gates.control_min {
        gates.push(Gate::at_least("control_min", rep.control_max_relative, t));
    }
    let l2 = s.lambda * s.lambda;
    let mut plot = PlotData::default();
    for (i, e) in rep.base.iter().enumerate() {
        plot.push("scale_invariant/base", i as f64, *e);
    }
    for (i, e) in rep.dilated.iter().enumerate() {
        plot.push("scale_invariant/dilated_rescaled", i as f64, l2 * e);
    }
    for (i, e) in rep.control_base.iter().enumerate() {
        plot.push("control/base", i as f64, *e);
    }
    for (i, e) in rep.control_dilated.iter().enumerate() {
        plot.push("control/dilated_rescaled", i as f64, l2 * e);
    }
    exp.artifacts.add("dilation", "csv", plot_csv(&plot)?);
    Ok(exp)
}

/// Full-space kernel of a config, with its statistics (`None` for the free
/// kernel) and the sector model its permutation sum obeys.
fn full_kernel(kc: &KernelConfig, n: usize) -> Result<KernelEvaluator, RunError> {
    let cp = kc.pair_coupling(n)?;
    Ok(match (kc.kind, cp) {
        (KernelKind::Free, _) => free_kernel(n),
        (KernelKind::HardCore, _) => hard_core_bose_kernel(n),
        (KernelKind::DeltaPair, Some(c)) => delta_pair_kernel(n, c)?,
        (KernelKind::EpsilonPair, Some(c)) => epsilon_pair_kernel(n, c)?,
        (KernelKind::RobinPair, Some(c)) => robin_pair_kernel(n, c)?,
        (kind, None) => {
            return Err(ConfigError::new("kernel.a", format!("required for {kind:?}")).into())
        }
    })
}

fn sector_model(kc: &KernelConfig, n: usize, stat: Statistics) -> Result<CouplingModel, RunError> {
    Ok(match (kc.kind, kc.pair_coupling(n)?) {
        (KernelKind::Free, _) => CouplingModel::uniform(
            n,
            if stat == Statistics::Bose {
                Coupling::Neumann
            } else {
                Coupling::Dirichlet
            },
        ),
        (KernelKind::HardCore, _) => CouplingModel::uniform(n, Coupling::Dirichlet),
        (_, Some(c)) => CouplingModel::uniform(n, c),
        (kind, None) => {
            return Err(ConfigError::new("kernel.a", format!("required for {kind:?}")).into())
        }
    })
}

#[derive(Serialize)]
struct SectorEntry {
    statistics: Option<Statistics>,
    model: Vec<String>,
    report: SectorPropertyReport,
}

#[derive(Serialize)]
struct KernelPropertiesReport {
    sampling: crate::propagator::SamplingSpec,
    pde: Option<crate::propagator::PdeCheck>,
    assumptions: Option<crate::propagator::AssumptionReport>,
    sector: Vec<SectorEntry>,
}

fn ladder(plot: &mut PlotData, series: &str, rungs: &[LadderRung]) {
    for r in rungs {
        plot.push(series, r.tau, r.residual);
    }
}

fn kernel_properties(c: &KernelPropertiesConfig) -> Result<Experiment, RunError> {
    let spec = c.sampling.spec(c.n, c.seed)?;
    let k = full_kernel(&c.kernel, c.n)?;
    let mut pde = None;
    let mut assumptions = None;
    let mut sector = Vec::new();
    if c.kernel.kind == KernelKind::RobinPair {
        let cp = c
            .kernel
            .pair_coupling(c.n)?
            .expect("pair kernel has a coupling");
        pde = Some(robin_pde_check(cp, c.pde.source, c.pde.tau0, c.pde.tau1)?);
        let model = CouplingModel::uniform(c.n, cp);
        sector.push(SectorEntry {
            statistics: None,
            model: model.labels(),
            report: verify_sector_properties(&k, &model, &spec)?,
        });
    } else {
        assumptions = Some(verify_assumptions(&k, &spec)?);
        let stats = match c.kernel.statistics() {
            Some(s) => vec![s],
            None => vec![Statistics::Bose, Statistics::Fermi],
        };
        for stat in stats {
            let model = sector_model(&c.kernel, c.n, stat)?;
            let km = permutation_sum(&k, stat)?;
            sector.push(SectorEntry {
                statistics: Some(stat),
                model: model.labels(),
                report: verify_sector_properties(&km, &model, &spec)?,
            });
        }
    }
    let report = KernelPropertiesReport {
        sampling: spec,
        pde,
        assumptions,
        sector,
    };
    let mut exp = experiment(
        Command::KernelProperties,
        &(c.n, &c.kernel, &report.sampling),
        &report,
    )?;
    let g = &c.gates;
    let gates = &mut exp.gates;
    gate_max(gates, "pde", g.pde, || {
        report.pde.as_ref().map_or(f64::NAN, |p| p.max_deviation)
    });
    gate_max(gates, "assumptions", g.assumptions, || {
        report.assumptions.as_ref().map_or(f64::NAN, |a| a.worst())
    });
    gate_max(gates, "sector", g.sector, || {
        max_of(report.sector.iter().map(|s| s.report.worst()))
    });
    gate_max(gates, "boundary", g.boundary, || {
        max_of(report.sector.iter().map(|s| s.report.boundary))
    });
    gate_max(gates, "composition", g.composition, || {
        max_of(
            report
                .assumptions
                .iter()
                .map(|a| a.composition)
                .chain(report.sector.iter().map(|s| s.report.composition)),
        )
    });
    let all = |s: &SectorEntry, name: &str| s.model.iter().all(|m| m == name);
    gate_max(gates, "face_value", g.face_value, || {
        max_of(
            report
                .sector
                .iter()
                .filter(|s| all(s, "dirichlet"))
                .map(|s| s.report.face_value),
        )
    });
    gate_max(gates, "normal_derivative", g.normal_derivative, || {
        max_of(
            report
                .sector
                .iter()
                .filter(|s| all(s, "neumann"))
                .map(|s| s.report.normal_derivative),
        )
    });
    let mut plot = PlotData::default();
    if let Some(a) = &report.assumptions {
        ladder(
            &mut plot,
            &format!("{}/full", a.kernel),
            &a.initial_condition,
        );
    }
    for s in &report.sector {
        let stat = s.statistics.map_or("sector", |st| match st {
            Statistics::Bose => "bose",
            Statistics::Fermi => "fermi",
        });
        ladder(
            &mut plot,
            &format!("{}/{stat}", s.report.kernel),
            &s.report.initial_condition,
        );
    }
    exp.artifacts.add("ladder", "csv", plot_csv(&plot)?);
    Ok(exp)
}

#[derive(Serialize)]
struct DualKernelsReport {
    sampling: crate::propagator::SamplingSpec,
    reconstruction: crate::propagator::DualReport,
    real_time: Option<crate::propagator::RealTimeReport>,
}

fn dual_kernels(c: &DualKernelsConfig) -> Result<Experiment, RunError> {
    let spec = c.sampling.spec(c.n, c.seed)?;
    let cp = coupling_from_length(c.coupling.a, "coupling.a")?;
    let (kb, kf) = match cp {
        Coupling::Dirichlet => (hard_core_bose_kernel(c.n), free_kernel(c.n)),
        _ => (delta_pair_kernel(c.n, cp)?, epsilon_pair_kernel(c.n, cp)?),
    };
    let reconstruction = dual_reconstruction_check(&kb, &kf, &spec)?;
    let real_time = match &c.real_time {
        Some(rt) => {
            let dom = rt
                .domain
                .to_domain(c.n)
                .map_err(|e| ConfigError::new(format!("real_time.{}", e.key), e.message))?;
            Some(real_time_cross_check(
                &dom,
                &CouplingModel::uniform(c.n, cp),
                rt.t,
            )?)
        }
        None => None,
    };
    let report = DualKernelsReport {
        sampling: spec,
        reconstruction,
        real_time,
    };
    let mut exp = experiment(
        Command::DualKernels,
        &(c.n, cp, &report.sampling, &c.real_time),
        &report,
    )?;
    let g = &c.gates;
    let gates = &mut exp.gates;
    let r = &report.reconstruction;
    gate_max(gates, "reconstruction", g.reconstruction, || {
        r.max_deviation
    });
    gate_max(gates, "connection", g.connection, || {
        max_of([r.bose_connection, r.fermi_connection])
    });
    gate_max(gates, "real_time", g.real_time, || {
        report
            .real_time
            .as_ref()
            .map_or(f64::NAN, |t| max_of([t.bose_deviation, t.fermi_deviation]))
    });
    Ok(exp)
}

#[derive(Serialize)]
struct PropagateReport {
    statistics: Statistics,
    propagation: crate::propagator::PropagationReport,
    ground_state: Option<crate::propagator::GroundStateProjection>,
}

fn propagate(c: &PropagateConfig) -> Result<Experiment, RunError> {
    let dom = c.domain.to_domain(c.n)?;
    let k = full_kernel(&c.kernel, c.n)?;
    let stat = c
        .kernel
        .statistics()
        .or(c.statistics)
        .ok_or_else(|| ConfigError::new("statistics", "required for the free kernel"))?;
    let psi0 = InitialState::gaussian(&c.initial.centre, c.initial.width);
    let propagation = propagation_report(&k, stat, &psi0, &dom, &c.propagation)?;
    let model = sector_model(&c.kernel, c.n, stat)?;
    let ground_state = match &c.ground_state {
        Some(gs) => Some(ground_state_projection(&dom, &model, &psi0, gs.tau)?),
        None => None,
    };
    let report = PropagateReport {
        statistics: stat,
        propagation,
        ground_state,
    };
    let mut exp = experiment(
        Command::Propagate,
        &Problem {
            domain: &dom,
            model: &model,
            extra: (&c.kernel, stat, &c.initial, &c.propagation),
        },
        &report,
    )?;
    let g = &c.gates;
    let p = &report.propagation;
    let gates = &mut exp.gates;
    gate_max(gates, "route", g.route, || p.route_deviation);
    gate_max(gates, "semigroup", g.semigroup, || p.semigroup_deviation);
    gate_max(gates, "grid", g.grid, || p.grid_deviation);
    gate_max(gates, "overlap_deficit", g.overlap_deficit, || {
        report
            .ground_state
            .as_ref()
            .map_or(f64::NAN, |gs| 1.0 - gs.overlap)
    });
    Ok(exp)
}

#[derive(Serialize)]
struct FoldSample {
    gaussian: AnisotropicGaussian,
    lhs: f64,
    rhs: f64,
    exact: f64,
    residual: f64,
    /// `|rhs - exact| / exact`: the sector side against the closed form.
    exact_residual: f64,
}

#[derive(Serialize)]
struct FoldReport {
    n: usize,
    rel_tol: f64,
    samples: Vec<FoldSample>,
    max_residual: f64,
}

fn fold_check(c: &FoldCheckConfig) -> Result<Experiment, RunError> {
    let rel_tol = c.rel_tol.unwrap_or_else(|| default_fold_tol(c.n));
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let gaussians: Vec<AnisotropicGaussian> = (0..c.samples)
        .map(|_| AnisotropicGaussian::random(c.n, &mut rng))
        .collect();
    let checks = par_map(&gaussians, |g| {
        fold_integral_check(|y| g.eval(y), &g.fold_quadrature(rel_tol))
    });
    let mut samples = Vec::new();
    for (g, check) in gaussians.into_iter().zip(checks) {
        let check = check?;
        let exact = g.integral();
        samples.push(FoldSample {
            lhs: check.lhs,
            rhs: check.rhs,
            exact,
            residual: check.residual,
            exact_residual: (check.rhs - exact).abs() / exact,
            gaussian: g,
        });
    }
    let max_residual = max_of(samples.iter().map(|s| s.residual));
    let report = FoldReport {
        n: c.n,
        rel_tol,
        samples,
        max_residual,
    };
    let mut exp = experiment(
        Command::FoldCheck,
        &(c.n, c.samples, c.seed, rel_tol),
        &report,
    )?;
    gate_max(&mut exp.gates, "residual", c.gates.residual, || {
        max_residual
    });
    let mut plot = PlotData::default();
    for (i, s) in report.samples.iter().enumerate() {
        plot.push("residual", i as f64, s.residual);
        plot.push("exact_residual", i as f64, s.exact_residual);
    }
    exp.artifacts.add("fold", "csv", plot_csv(&plot)?);
    Ok(exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_of_propagates_nan() {
        assert!(max_of([]).is_nan());
        assert!(max_of([1.0, f64::NAN, 2.0]).is_nan());
        assert_eq!(max_of([1.0, 3.0, 2.0]), 3.0);
    }
}
