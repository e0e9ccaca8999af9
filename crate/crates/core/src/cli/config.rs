//! Experiment configuration.
//!
//! One TOML file describes one experiment. Sections may be written as tables
//! or as dotted keys (`domain.length = 10`). Every command has its own schema
//! and unknown keys are rejected.

use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{Coupling, CouplingModel};
use crate::propagator::{PropagationSpec, SamplingSpec};
use crate::spectral::{Confinement, DomainSpec, Formulation, SolverOptions};
use crate::statistics::Statistics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Duality,
    ScaleInvariance,
    KernelProperties,
    DualKernels,
    Propagate,
    FoldCheck,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Spectrum,
        Command::Duality,
        Command::ScaleInvariance,
        Command::KernelProperties,
        Command::DualKernels,
        Command::Propagate,
        Command::FoldCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Duality => "duality",
            Command::ScaleInvariance => "scale-invariance",
            Command::KernelProperties => "kernel-properties",
            Command::DualKernels => "dual-kernels",
            Command::Propagate => "propagate",
            Command::FoldCheck => "fold-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// A configuration problem, tied to the key that caused it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("config error at `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

fn ensure(ok: bool, key: &str, message: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(key, message()))
    }
}

fn positive(v: f64, key: &str) -> Result<(), ConfigError> {
    ensure(v > 0.0 && v.is_finite(), key, || {
        format!("must be positive and finite, got {v}")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfinementKind {
    #[default]
    Box,
    Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default)]
    pub confinement: ConfinementKind,
    pub length: Option<f64>,
    #[serde(default)]
    pub origin: f64,
    pub omega: Option<f64>,
    pub half_width: Option<f64>,
    /// Cells per axis on the coarsest grid.
    pub cells: usize,
}

impl DomainConfig {
    pub fn to_domain(&self, n: usize) -> Result<DomainSpec, ConfigError> {
        let confinement = match self.confinement {
            ConfinementKind::Box => {
                ensure(self.omega.is_none(), "domain.omega", || {
                    "only valid for harmonic confinement".into()
                })?;
                ensure(self.half_width.is_none(), "domain.half_width", || {
                    "only valid for harmonic confinement".into()
                })?;
                let length = self.length.ok_or_else(|| {
                    ConfigError::new("domain.length", "required for box confinement")
                })?;
                positive(length, "domain.length")?;
                ensure(self.origin.is_finite(), "domain.origin", || {
                    "must be finite".into()
                })?;
                Confinement::Box {
                    origin: self.origin,
                    length,
                }
            }
            ConfinementKind::Harmonic => {
                ensure(self.length.is_none(), "domain.length", || {
                    "only valid for box confinement".into()
                })?;
                let omega = self.omega.ok_or_else(|| {
                    ConfigError::new("domain.omega", "required for harmonic confinement")
                })?;
                let half_width = self.half_width.ok_or_else(|| {
                    ConfigError::new("domain.half_width", "required for harmonic confinement")
                })?;
                positive(omega, "domain.omega")?;
                positive(half_width, "domain.half_width")?;
                Confinement::Harmonic { omega, half_width }
            }
        };
        DomainSpec::new(n, confinement, self.cells)
            .map_err(|e| ConfigError::new("domain.cells", e.to_string()))
    }
}

/// A single value for every face, or one value per face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerFace {
    One(f64),
    Many(Vec<f64>),
}

impl PerFace {
    fn expand(&self, faces: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            PerFace::One(v) => Ok(vec![*v; faces]),
            PerFace::Many(v) => {
                ensure(v.len() == faces, key, || {
                    format!("expected {faces} entries (one per face), got {}", v.len())
                })?;
                Ok(v.clone())
            }
        }
    }
}

/// Robin length `a = 0` is the Dirichlet sentinel and `a = ±inf` the Neumann
/// sentinel.
pub fn coupling_from_length(a: f64, key: &str) -> Result<Coupling, ConfigError> {
    if a == 0.0 {
        Ok(Coupling::Dirichlet)
    } else if a.is_infinite() {
        Ok(Coupling::Neumann)
    } else if a.is_nan() {
        Err(ConfigError::new(key, "Robin length is NaN"))
    } else {
        Ok(Coupling::Robin(a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    /// Robin lengths.
    pub a: Option<PerFace>,
    /// Scale-invariant couplings `a_j = g_j r`.
    pub g: Option<PerFace>,
}

impl CouplingConfig {
    pub fn to_model(&self, n: usize) -> Result<CouplingModel, ConfigError> {
        let faces = n.saturating_sub(1).max(1);
        let entries = match (&self.a, &self.g) {
            (Some(a), None) => a
                .expand(faces, "coupling.a")?
                .into_iter()
                .map(|v| coupling_from_length(v, "coupling.a"))
                .collect::<Result<Vec<_>, _>>()?,
            (None, Some(g)) => {
                ensure(n >= 3, "coupling.g", || {
                    "scale-invariant couplings need n >= 3".into()
                })?;
                g.expand(faces, "coupling.g")?
                    .into_iter()
                    .map(Coupling::ScaleInvariant)
                    .collect()
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    "coupling",
                    "give either `a` or `g`, not both",
                ))
            }
            (None, None) => {
                return Err(ConfigError::new(
                    "coupling",
                    "one of `a` or `g` is required",
                ))
            }
        };
        let key = if self.a.is_some() {
            "coupling.a"
        } else {
            "coupling.g"
        };
        CouplingModel::new(entries).map_err(|e| ConfigError::new(key, e.to_string()))
    }
}

/// Reject builders whose sentinel limits the model hits.
pub fn check_formulations(
    model: &CouplingModel,
    formulations: &[Formulation],
    key: &str,
) -> Result<(), ConfigError> {
    for f in formulations {
        match f {
            Formulation::DeltaBose if model.any(|c| matches!(c, Coupling::Dirichlet)) => {
                return Err(ConfigError::new(
                    key,
                    "Dirichlet sentinel not valid for delta builder",
                ))
            }
            Formulation::EpsilonFermi if model.any(|c| matches!(c, Coupling::Neumann)) => {
                return Err(ConfigError::new(
                    key,
                    "Neumann sentinel not valid for epsilon builder",
                ))
            }
            Formulation::HardCoreBose if !model.any(|c| matches!(c, Coupling::Dirichlet)) => {
                return Err(ConfigError::new(
                    "formulations",
                    "hard_core_bose needs a Dirichlet face (a = 0)",
                ))
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_restarts: usize,
    pub dense_below: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_restarts: d.max_restarts,
            dense_below: d.dense_below,
        }
    }
}

impl SolverConfig {
    pub fn options(&self, seed: u64) -> Result<SolverOptions, ConfigError> {
        positive(self.tol, "solver.tol")?;
        ensure(self.max_restarts > 0, "solver.max_restarts", || {
            "must be at least 1".into()
        })?;
        Ok(SolverOptions {
            tol: self.tol,
            max_restarts: self.max_restarts,
            dense_below: self.dense_below,
            seed,
            ..SolverOptions::default()
        })
    }
}

fn default_k() -> usize {
    4
}

fn default_refinements() -> u32 {
    3
}

fn check_k(k: usize) -> Result<(), ConfigError> {
    ensure((1..=64).contains(&k), "k", || {
        format!("must be in 1..=64, got {k}")
    })
}

fn check_n(n: usize, range: std::ops::RangeInclusive<usize>) -> Result<(), ConfigError> {
    ensure(range.contains(&n), "n", || {
        format!("must be in {}..={}, got {n}", range.start(), range.end())
    })
}

fn check_gate(v: Option<f64>, key: &str) -> Result<(), ConfigError> {
    match v {
        Some(t) => ensure(t >= 0.0 && t.is_finite(), key, || {
            format!("tolerance must be finite and non-negative, got {t}")
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumGates {
    /// Largest eigen-residual.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub command: Option<Command>,
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<String>,
    pub domain: DomainConfig,
    pub coupling: CouplingConfig,
    pub formulations: Option<Vec<Formulation>>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub gates: SpectrumGates,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oracle {
    /// Expected total ground energy.
    pub ground_energy: Option<f64>,
    /// Expected lowest levels, ascending.
    pub levels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityGates {
    /// Largest pairwise relative eigenvalue deviation at the finest level.
    pub pair_deviation: Option<f64>,
    /// Largest boson-fermion mapping deviation.
    pub mapping: Option<f64>,
    /// Target convergence order of the ground level, checked with
    /// `order_tolerance`.
    pub order: Option<f64>,
    pub order_tolerance: Option<f64>,
    /// Relative deviation of every formulation's finest ground energy from
    /// `oracle.ground_energy`.
    pub ground_energy: Option<f64>,
    /// Largest relative deviation of every formulation's finest levels from
    /// `oracle.levels`.
    pub levels: Option<f64>,
    /// Largest eigen-residual.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityConfig {
    pub command: Option<Command>,
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<String>,
    pub domain: DomainConfig,
    pub coupling: CouplingConfig,
    #[serde(default = "default_refinements")]
    pub refinements: u32,
    pub formulations: Option<Vec<Formulation>>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub oracle: Oracle,
    #[serde(default)]
    pub gates: DualityGates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub g: PerFace,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Box translation of the translation test.
    #[serde(default = "default_shift")]
    pub shift: f64,
    /// Negative control: constant `a_j = g_j · control_length`.
    #[serde(default = "default_control_length")]
    pub control_length: f64,
}

fn default_lambda() -> f64 {
    2.0
}

fn default_shift() -> f64 {
    0.37
}

fn default_control_length() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleGates {
    /// Largest relative deviation of `λ² E(λ)` from `E(1)`.
    pub dilation: Option<f64>,
    /// Largest absolute eigenvalue change under translation.
    pub translation: Option<f64>,
    /// Smallest acceptable violation of the constant-length control.
    pub control_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleInvarianceConfig {
    pub command: Option<Command>,
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<String>,
    pub domain: DomainConfig,
    pub scale: ScaleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub gates: ScaleGates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Free kernel on the full space.
    Free,
    /// Sector kernel of a Robin pair (n = 2).
    RobinPair,
    /// Full-space δ kernel (n = 2).
    DeltaPair,
    /// Full-space ε kernel (n = 2).
    EpsilonPair,
    /// Impenetrable bosons.
    HardCore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// Robin length of the pair kernels.
    pub a: Option<f64>,
}

impl KernelConfig {
    /// The coupling of a pair kernel, checked against the builder's
    /// sentinels.
    pub fn pair_coupling(&self, n: usize) -> Result<Option<Coupling>, ConfigError> {
        match self.kind {
            KernelKind::Free | KernelKind::HardCore => {
                ensure(self.a.is_none(), "kernel.a", || {
                    format!("not used by the {:?} kernel", self.kind)
                })?;
                Ok(None)
            }
            kind => {
                ensure(n == 2, "n", || {
                    format!("pair kernels are closed-form only for n = 2, got {n}")
                })?;
                let a = self
                    .a
                    .ok_or_else(|| ConfigError::new("kernel.a", "required for pair kernels"))?;
                let c = coupling_from_length(a, "kernel.a")?;
                match (kind, c) {
                    (KernelKind::DeltaPair, Coupling::Dirichlet) => Err(ConfigError::new(
                        "kernel.a",
                        "Dirichlet sentinel not valid for delta builder",
                    )),
                    (KernelKind::EpsilonPair, Coupling::Neumann) => Err(ConfigError::new(
                        "kernel.a",
                        "Neumann sentinel not valid for epsilon builder",
                    )),
                    _ => Ok(Some(c)),
                }
            }
        }
    }

    /// Statistics a full-space kernel is built for; `None` for the free
    /// kernel, which serves both.
    pub fn statistics(&self) -> Option<Statistics> {
        match self.kind {
            KernelKind::DeltaPair | KernelKind::HardCore => Some(Statistics::Bose),
            KernelKind::EpsilonPair => Some(Statistics::Fermi),
            KernelKind::Free | KernelKind::RobinPair => None,
        }
    }
}

/// Overrides of the dimension-dependent sampling defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub points: Option<usize>,
    pub spread: Option<f64>,
    pub min_gap: Option<f64>,
    pub tau: Option<f64>,
    pub composition_tau: Option<(f64, f64)>,
    pub tau_ladder: Option<Vec<f64>>,
    pub fd_step: Option<f64>,
    pub boundary_step: Option<f64>,
    pub quad_tol: Option<f64>,
}

impl SamplingConfig {
    pub fn spec(&self, n: usize, seed: u64) -> Result<SamplingSpec, ConfigError> {
        let mut s = SamplingSpec::for_dimension(n);
        s.seed = seed;
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field.clone() {
                    s.$field = v;
                }
            };
        }
        set!(points);
        set!(spread);
        set!(min_gap);
        set!(tau);
        set!(composition_tau);
        set!(tau_ladder);
        set!(fd_step);
        set!(boundary_step);
        set!(quad_tol);
        ensure(s.points > 0, "sampling.points", || {
            "must be at least 1".into()
        })?;
        positive(s.spread, "sampling.spread")?;
        ensure(s.min_gap >= 0.0, "sampling.min_gap", || {
            "must be non-negative".into()
        })?;
        ensure(
            s.min_gap * (n as f64 - 1.0) < 2.0 * s.spread,
            "sampling.min_gap",
            || "too large for the sampling spread".into(),
        )?;
        positive(s.tau, "sampling.tau")?;
        positive(s.composition_tau.0, "sampling.composition_tau")?;
        positive(s.composition_tau.1, "sampling.composition_tau")?;
        for &t in &s.tau_ladder {
            positive(t, "sampling.tau_ladder")?;
        }
        positive(s.fd_step, "sampling.fd_step")?;
        positive(s.boundary_step, "sampling.boundary_step")?;
        positive(s.quad_tol, "sampling.quad_tol")?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeConfig {
    /// Source point on the half-line.
    pub source: f64,
    pub tau0: f64,
    pub tau1: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            source: 0.7,
            tau0: 0.1,
            tau1: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelGates {
    /// Worst full-space assumption residual.
    pub assumptions: Option<f64>,
    /// Worst sector-property residual.
    pub sector: Option<f64>,
    /// Robin residual on the faces.
    pub boundary: Option<f64>,
    /// Composition residual (full-space and sector).
    pub composition: Option<f64>,
    /// Deviation from the independent heat solve (Robin pair only).
    pub pde: Option<f64>,
    /// Largest `|K|` on a face for Fermi sums.
    pub face_value: Option<f64>,
    /// Largest normal derivative on a face for Bose sums.
    pub normal_derivative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelPropertiesConfig {
    pub command: Option<Command>,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<String>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub pde: PdeConfig,
    #[serde(default)]
    pub gates: KernelGates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairCoupling {
    /// Robin length of the pair; `0` pairs impenetrable bosons with free
    /// fermions.
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealTimeConfig {
    pub domain: DomainConfig,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualGates {
    /// Largest deviation of the Bose and Fermi permutation sums.
    pub reconstruction: Option<f64>,
    /// Largest connection-condition residual of the two input kernels.
    pub connection: Option<f64>,
    /// Largest deviation of the real-time matrix sums.
    pub real_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualKernelsConfig {
    pub command: Option<Command>,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<String>,
    pub coupling: PairCoupling,
    #[serde(default)]
    pub sampling: SamplingConfig,
    pub real_time: Option<RealTimeConfig>,
    #[serde(default)]
    pub gates: DualGates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub centre: Vec<f64>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateConfig {
    /// Projection time; `24 / gap` when absent.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateGates {
    pub route: Option<f64>,
    pub semigroup: Option<f64>,
    /// Grid matrix exponential against the quadrature route.
    pub grid: Option<f64>,
    /// Bound on `1 - overlap` of the projected state with the ground state.
    pub overlap_deficit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    pub command: Option<Command>,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<String>,
    pub domain: DomainConfig,
    pub kernel: KernelConfig,
    /// Required for the free kernel; must match the kernel otherwise.
    pub statistics: Option<Statistics>,
    pub initial: InitialConfig,
    #[serde(default)]
    pub propagation: PropagationSpec,
    pub ground_state: Option<GroundStateConfig>,
    #[serde(default)]
    pub gates: PropagateGates,
}

fn default_samples() -> usize {
    10
}

/// Quadrature tolerance of the fold check by particle count.
pub fn default_fold_tol(n: usize) -> f64 {
    match n {
        2 => 1e-11,
        3 => 1e-9,
        _ => 1e-7,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldGates {
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldCheckConfig {
    pub command: Option<Command>,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<String>,
    /// Random anisotropic Gaussians.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Quadrature tolerance; chosen from `n` when absent.
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub gates: FoldGates,
}

/// A parsed and validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentConfig {
    Spectrum(SpectrumConfig),
    Duality(DualityConfig),
    ScaleInvariance(ScaleInvarianceConfig),
    KernelProperties(KernelPropertiesConfig),
    DualKernels(DualKernelsConfig),
    Propagate(PropagateConfig),
    FoldCheck(FoldCheckConfig),
}

/// Key named by a TOML error: the field in "unknown/missing field" messages,
/// otherwise the key on the offending line.
fn error_key(text: &str, err: &toml::de::Error) -> String {
    let msg = err.message();
    for marker in [
        "unknown field `",
        "missing field `",
        "duplicate key `",
        "duplicate field `",
    ] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    if let Some(span) = err.span() {
        let line_start = text[..span.start.min(text.len())]
            .rfind('\n')
            .map_or(0, |i| i + 1);
        let line = text[line_start..].lines().next().unwrap_or("");
        if let Some((key, _)) = line.split_once('=') {
            return key.trim().to_string();
        }
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            return trimmed.trim_matches(|c| c == '[' || c == ']').to_string();
        }
    }
    "<document>".into()
}

fn parse_as<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    toml::from_str(text)
        .map_err(|e| ConfigError::new(error_key(text, &e), e.message().trim().to_string()))
}

impl ExperimentConfig {
    /// Parse `text` with the schema of `command` and validate it.
    pub fn parse(command: Command, text: &str) -> Result<Self, ConfigError> {
        let cfg = match command {
            Command::Spectrum => ExperimentConfig::Spectrum(parse_as(text)?),
            Command::Duality => ExperimentConfig::Duality(parse_as(text)?),
            Command::ScaleInvariance => ExperimentConfig::ScaleInvariance(parse_as(text)?),
            Command::KernelProperties => ExperimentConfig::KernelProperties(parse_as(text)?),
            Command::DualKernels => ExperimentConfig::DualKernels(parse_as(text)?),
            Command::Propagate => ExperimentConfig::Propagate(parse_as(text)?),
            Command::FoldCheck => ExperimentConfig::FoldCheck(parse_as(text)?),
        };
        if let Some(c) = cfg.declared_command() {
            ensure(c == command, "command", || {
                format!("config is for `{c}`, invoked as `{command}`")
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn command(&self) -> Command {
        match self {
            ExperimentConfig::Spectrum(_) => Command::Spectrum,
            ExperimentConfig::Duality(_) => Command::Duality,
            ExperimentConfig::ScaleInvariance(_) => Command::ScaleInvariance,
            ExperimentConfig::KernelProperties(_) => Command::KernelProperties,
            ExperimentConfig::DualKernels(_) => Command::DualKernels,
            ExperimentConfig::Propagate(_) => Command::Propagate,
            ExperimentConfig::FoldCheck(_) => Command::FoldCheck,
        }
    }

    fn declared_command(&self) -> Option<Command> {
        match self {
            ExperimentConfig::Spectrum(c) => c.command,
            ExperimentConfig::Duality(c) => c.command,
            ExperimentConfig::ScaleInvariance(c) => c.command,
            ExperimentConfig::KernelProperties(c) => c.command,
            ExperimentConfig::DualKernels(c) => c.command,
            ExperimentConfig::Propagate(c) => c.command,
            ExperimentConfig::FoldCheck(c) => c.command,
        }
    }

    pub fn output(&self) -> Option<&str> {
        match self {
            ExperimentConfig::Spectrum(c) => c.output.as_deref(),
            ExperimentConfig::Duality(c) => c.output.as_deref(),
            ExperimentConfig::ScaleInvariance(c) => c.output.as_deref(),
            ExperimentConfig::KernelProperties(c) => c.output.as_deref(),
            ExperimentConfig::DualKernels(c) => c.output.as_deref(),
            ExperimentConfig::Propagate(c) => c.output.as_deref(),
            ExperimentConfig::FoldCheck(c) => c.output.as_deref(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Spectrum(c) => c.seed,
            ExperimentConfig::Duality(c) => c.seed,
            ExperimentConfig::ScaleInvariance(c) => c.seed,
            ExperimentConfig::KernelProperties(c) => c.seed,
            ExperimentConfig::DualKernels(c) => c.seed,
            ExperimentConfig::Propagate(c) => c.seed,
            ExperimentConfig::FoldCheck(c) => c.seed,
        }
    }

    /// Everything that can be checked without computing.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            ExperimentConfig::Spectrum(c) => {
                check_n(c.n, 2..=4)?;
                check_k(c.k)?;
                c.domain.to_domain(c.n)?;
                let model = c.coupling.to_model(c.n)?;
                if let Some(f) = &c.formulations {
                    ensure(!f.is_empty(), "formulations", || "must not be empty".into())?;
                    check_formulations(&model, f, "coupling.a")?;
                }
                c.solver.options(c.seed)?;
                check_gate(c.gates.residual, "gates.residual")
            }
            ExperimentConfig::Duality(c) => {
                check_n(c.n, 2..=4)?;
                check_k(c.k)?;
                c.domain.to_domain(c.n)?;
                let model = c.coupling.to_model(c.n)?;
                if let Some(f) = &c.formulations {
                    ensure(!f.is_empty(), "formulations", || "must not be empty".into())?;
                    check_formulations(&model, f, "coupling.a")?;
                }
                ensure((1..=6).contains(&c.refinements), "refinements", || {
                    format!("must be in 1..=6, got {}", c.refinements)
                })?;
                c.solver.options(c.seed)?;
                let g = &c.gates;
                check_gate(g.pair_deviation, "gates.pair_deviation")?;
                check_gate(g.mapping, "gates.mapping")?;
                check_gate(g.order_tolerance, "gates.order_tolerance")?;
                check_gate(g.ground_energy, "gates.ground_energy")?;
                check_gate(g.residual, "gates.residual")?;
                check_gate(g.levels, "gates.levels")?;
                if g.levels.is_some() {
                    let levels = c.oracle.levels.as_ref().ok_or_else(|| {
                        ConfigError::new("oracle.levels", "required by gates.levels")
                    })?;
                    ensure(
                        !levels.is_empty() && levels.len() <= c.k,
                        "oracle.levels",
                        || format!("needs 1..={} values", c.k),
                    )?;
                }
                ensure(
                    g.order.is_some() == g.order_tolerance.is_some(),
                    "gates.order",
                    || "`order` and `order_tolerance` go together".into(),
                )?;
                if g.order.is_some() {
                    ensure(c.refinements >= 3, "refinements", || {
                        "an order gate needs at least 3 refinements".into()
                    })?;
                }
                if g.ground_energy.is_some() {
                    ensure(
                        c.oracle.ground_energy.is_some(),
                        "oracle.ground_energy",
                        || "required by gates.ground_energy".into(),
                    )?;
                }
                Ok(())
            }
            ExperimentConfig::ScaleInvariance(c) => {
                check_n(c.n, 3..=3)?;
                check_k(c.k)?;
                ensure(
                    c.domain.confinement == ConfinementKind::Box,
                    "domain.confinement",
                    || "the dilation test needs box confinement".into(),
                )?;
                c.domain.to_domain(c.n)?;
                let g = c.scale.g.expand(c.n - 1, "scale.g")?;
                for v in &g {
                    ensure(*v != 0.0 && v.is_finite(), "scale.g", || {
                        format!("must be finite and nonzero, got {v}")
                    })?;
                }
                positive(c.scale.lambda, "scale.lambda")?;
                ensure(c.scale.shift.is_finite(), "scale.shift", || {
                    "must be finite".into()
                })?;
                positive(c.scale.control_length, "scale.control_length")?;
                c.solver.options(c.seed)?;
                check_gate(c.gates.dilation, "gates.dilation")?;
                check_gate(c.gates.translation, "gates.translation")?;
                check_gate(c.gates.control_min, "gates.control_min")
            }
            ExperimentConfig::KernelProperties(c) => {
                check_n(c.n, 2..=4)?;
                c.kernel.pair_coupling(c.n)?;
                c.sampling.spec(c.n, c.seed)?;
                if c.kernel.kind == KernelKind::RobinPair {
                    ensure(c.pde.source >= 0.0, "pde.source", || {
                        "must be on the half-line".into()
                    })?;
                    positive(c.pde.tau0, "pde.tau0")?;
                    ensure(c.pde.tau1 > c.pde.tau0, "pde.tau1", || {
                        "must exceed pde.tau0".into()
                    })?;
                } else {
                    ensure(c.gates.pde.is_none(), "gates.pde", || {
                        "only the robin_pair kernel has a PDE gate".into()
                    })?;
                }
                let g = &c.gates;
                check_gate(g.assumptions, "gates.assumptions")?;
                check_gate(g.sector, "gates.sector")?;
                check_gate(g.boundary, "gates.boundary")?;
                check_gate(g.composition, "gates.composition")?;
                check_gate(g.pde, "gates.pde")?;
                check_gate(g.face_value, "gates.face_value")?;
                check_gate(g.normal_derivative, "gates.normal_derivative")
            }
            ExperimentConfig::DualKernels(c) => {
                check_n(c.n, 2..=4)?;
                let cp = coupling_from_length(c.coupling.a, "coupling.a")?;
                match cp {
                    Coupling::Dirichlet => {}
                    Coupling::Neumann => {
                        return Err(ConfigError::new(
                            "coupling.a",
                            "Neumann sentinel not valid for epsilon builder",
                        ))
                    }
                    _ => ensure(c.n == 2, "n", || {
                        format!(
                            "finite-a kernels are closed-form only for n = 2, got {}",
                            c.n
                        )
                    })?,
                }
                c.sampling.spec(c.n, c.seed)?;
                if let Some(rt) = &c.real_time {
                    rt.domain
                        .to_domain(c.n)
                        .map_err(|e| ConfigError::new(format!("real_time.{}", e.key), e.message))?;
                    ensure(rt.t.is_finite(), "real_time.t", || "must be finite".into())?;
                } else {
                    ensure(c.gates.real_time.is_none(), "gates.real_time", || {
                        "needs a [real_time] section".into()
                    })?;
                }
                check_gate(c.gates.reconstruction, "gates.reconstruction")?;
                check_gate(c.gates.connection, "gates.connection")?;
                check_gate(c.gates.real_time, "gates.real_time")
            }
            ExperimentConfig::Propagate(c) => {
                check_n(c.n, 2..=3)?;
                c.domain.to_domain(c.n)?;
                ensure(
                    c.kernel.kind != KernelKind::RobinPair,
                    "kernel.kind",
                    || {
                        "propagation takes a full-space kernel; the sector kernel is its permutation sum".into()
                    },
                )?;
                c.kernel.pair_coupling(c.n)?;
                match (c.kernel.statistics(), c.statistics) {
                    (None, None) => {
                        return Err(ConfigError::new(
                            "statistics",
                            "required for the free kernel",
                        ))
                    }
                    (Some(a), Some(b)) if a != b => {
                        return Err(ConfigError::new(
                            "statistics",
                            format!("the {:?} kernel is {a:?}", c.kernel.kind),
                        ))
                    }
                    _ => {}
                }
                ensure(c.initial.centre.len() == c.n, "initial.centre", || {
                    format!("needs {} coordinates", c.n)
                })?;
                ensure(
                    c.initial.centre.iter().all(|v| v.is_finite()),
                    "initial.centre",
                    || "must be finite".into(),
                )?;
                positive(c.initial.width, "initial.width")?;
                let p = &c.propagation;
                positive(p.tau, "propagation.tau")?;
                ensure(p.split > 0.0 && p.split < 1.0, "propagation.split", || {
                    "must be in (0, 1)".into()
                })?;
                ensure(p.nodes > 0, "propagation.nodes", || {
                    "must be at least 1".into()
                })?;
                positive(p.quad_tol, "propagation.quad_tol")?;
                positive(p.semigroup_tol, "propagation.semigroup_tol")?;
                if let Some(gs) = &c.ground_state {
                    if let Some(t) = gs.tau {
                        positive(t, "ground_state.tau")?;
                    }
                } else {
                    ensure(
                        c.gates.overlap_deficit.is_none(),
                        "gates.overlap_deficit",
                        || "needs a [ground_state] section".into(),
                    )?;
                }
                check_gate(c.gates.route, "gates.route")?;
                check_gate(c.gates.semigroup, "gates.semigroup")?;
                check_gate(c.gates.grid, "gates.grid")?;
                check_gate(c.gates.overlap_deficit, "gates.overlap_deficit")
            }
            ExperimentConfig::FoldCheck(c) => {
                check_n(c.n, 2..=4)?;
                ensure(c.samples > 0, "samples", || "must be at least 1".into())?;
                if let Some(t) = c.rel_tol {
                    positive(t, "rel_tol")?;
                }
                check_gate(c.gates.residual, "gates.residual")
            }
        }
    }
}
