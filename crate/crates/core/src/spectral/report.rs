//! Spectral comparison of the three formulations and the scale-invariance
//! check.

use serde::{Deserialize, Serialize};

use super::domain::DomainSpec;
use super::eigen::{solve, SolverOptions, SpectrumResult};
use super::operator::{build, Formulation, GridOperator};
use super::SpectralError;
use crate::boundary::{Coupling, CouplingModel};
use crate::statistics::{bf_map, extend, Statistics, WavefunctionGrid};

/// Relative gap below which neighbouring levels are treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Deviations below this are at the level of round-off.
pub const ROUNDOFF_DEVIATION: f64 = 1e-11;

/// The formulations applicable to a coupling model: the sector problem, the
/// boson model (hard core when any face is Dirichlet) and the fermion model
/// unless a face is Neumann.
pub fn formulations_for(model: &CouplingModel) -> Vec<Formulation> {
    let mut out = vec![Formulation::Sector];
    if model.any(|c| matches!(c, Coupling::Dirichlet)) {
        out.push(Formulation::HardCoreBose);
    } else {
        out.push(Formulation::DeltaBose);
    }
    if !model.any(|c| matches!(c, Coupling::Neumann)) {
        out.push(Formulation::EpsilonFermi);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDeviation {
    pub a: Formulation,
    pub b: Formulation,
    /// Largest relative eigenvalue difference over the reported levels.
    pub max_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDeviations {
    pub level: u32,
    pub cells: usize,
    pub h: f64,
    pub pairs: Vec<PairDeviation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub formulation: Formulation,
    pub index: usize,
    /// `log2` of successive difference ratios; `None` when the differences
    /// are at round-off.
    pub order: Option<f64>,
    /// Richardson extrapolation with the observed order (second order when
    /// the order is unavailable).
    pub extrapolated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingCheck {
    /// First level of the (possibly degenerate) cluster.
    pub index: usize,
    pub multiplicity: usize,
    /// `1 - |⟨bf_map ψ_B, ψ_F⟩|` for simple levels; for clusters,
    /// `1 - ‖G‖²_F / d` with `G` the overlap matrix of the two subspaces.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub n: usize,
    pub domain: DomainSpec,
    pub couplings: Vec<String>,
    pub k: usize,
    pub formulations: Vec<Formulation>,
    /// `spectra[level][formulation]`.
    pub spectra: Vec<Vec<SpectrumResult>>,
    pub deviations: Vec<LevelDeviations>,
    /// Orders of the pairwise deviations between successive levels; `None`
    /// where the deviations are already at round-off.
    pub deviation_orders: Vec<Option<f64>>,
    pub convergence: Vec<Convergence>,
    pub mapping: Vec<MappingCheck>,
}

impl DualityReport {
    pub fn finest(&self) -> &[SpectrumResult] {
        self.spectra.last().expect("at least one level")
    }

    pub fn finest_deviation(&self) -> f64 {
        self.deviations
            .last()
            .map(|l| l.pairs.iter().map(|p| p.max_relative).fold(0.0, f64::max))
            .unwrap_or(0.0)
    }

    pub fn spectrum(&self, level: usize, f: Formulation) -> Option<&SpectrumResult> {
        self.spectra.get(level)?.iter().find(|s| s.formulation == f)
    }
}

pub(crate) fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Order and extrapolated limit from three successive values on grids
/// halving `h`.
pub fn richardson(e0: f64, e1: f64, e2: f64) -> (Option<f64>, f64) {
    let d1 = e0 - e1;
    let d2 = e1 - e2;
    let scale = e2.abs().max(1.0);
    if d1.abs() < ROUNDOFF_DEVIATION * scale || d2.abs() < ROUNDOFF_DEVIATION * scale {
        return (None, e2);
    }
    let p = (d1 / d2).abs().log2();
    let factor = if p.is_finite() && p > 0.5 {
        2f64.powf(p) - 1.0
    } else {
        3.0
    };
    (Some(p), e2 - d2 / factor)
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Solve every applicable formulation at `levels` successive refinements of
/// `dom`.
pub fn duality_report(
    dom: &DomainSpec,
    model: &CouplingModel,
    k: usize,
    levels: u32,
    opts: &SolverOptions,
) -> Result<DualityReport, SpectralError> {
    duality_report_for(dom, model, &formulations_for(model), k, levels, opts)
}

/// [`duality_report`] restricted to the given formulations.
pub fn duality_report_for(
    dom: &DomainSpec,
    model: &CouplingModel,
    formulations: &[Formulation],
    k: usize,
    levels: u32,
    opts: &SolverOptions,
) -> Result<DualityReport, SpectralError> {
    if levels == 0 {
        return Err(SpectralError::InvalidRequest(
            "need at least one refinement level".into(),
        ));
    }
    if formulations.is_empty() {
        return Err(SpectralError::InvalidRequest(
            "need at least one formulation".into(),
        ));
    }
    let formulations = formulations.to_vec();
    let jobs: Vec<(u32, Formulation)> = (0..levels)
        .flat_map(|l| formulations.iter().map(move |&f| (l, f)))
        .collect();
    let results = par_map(
        &jobs,
        |&(level, f)| -> Result<(SpectrumResult, Option<GridOperator>), SpectralError> {
            let d = dom.refined(level)?;
            let op = build(f, &d, model)?;
            let finest = level + 1 == levels;
            let mut o = *opts;
            o.keep_vectors = finest;
            let spec = solve(&op, k, &o)?;
            Ok((spec, finest.then_some(op)))
        },
    );
    let mut spectra: Vec<Vec<SpectrumResult>> = vec![Vec::new(); levels as usize];
    let mut finest_ops = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        let (spec, op) = r?;
        spectra[job.0 as usize].push(spec);
        if let Some(op) = op {
            finest_ops.push(op);
        }
    }

    let mut deviations = Vec::new();
    for (level, specs) in spectra.iter().enumerate() {
        let mut pairs = Vec::new();
        for a in 0..specs.len() {
            for b in a + 1..specs.len() {
                let max_relative = specs[a]
                    .eigenvalues
                    .iter()
                    .zip(&specs[b].eigenvalues)
                    .map(|(x, y)| relative(*x, *y))
                    .fold(0.0, f64::max);
                pairs.push(PairDeviation {
                    a: specs[a].formulation,
                    b: specs[b].formulation,
                    max_relative,
                });
            }
        }
        deviations.push(LevelDeviations {
            level: level as u32,
            cells: specs[0].cells,
            h: specs[0].h,
            pairs,
        });
    }
    let worst: Vec<f64> = deviations
        .iter()
        .map(|l| l.pairs.iter().map(|p| p.max_relative).fold(0.0, f64::max))
        .collect();
    let deviation_orders = worst
        .windows(2)
        .map(|w| {
            (w[0] > ROUNDOFF_DEVIATION && w[1] > ROUNDOFF_DEVIATION).then(|| (w[0] / w[1]).log2())
        })
        .collect();

    let mut convergence = Vec::new();
    if levels >= 3 {
        let l = levels as usize;
        for (fi, &f) in formulations.iter().enumerate() {
            for index in 0..k {
                let e = |lv: usize| spectra[lv][fi].eigenvalues[index];
                let (order, extrapolated) = richardson(e(l - 3), e(l - 2), e(l - 1));
                convergence.push(Convergence {
                    formulation: f,
                    index,
                    order,
                    extrapolated: Some(extrapolated),
                });
            }
        }
    }

    let mapping = mapping_checks(&finest_ops, &spectra[levels as usize - 1])?;
    Ok(DualityReport {
        n: dom.n,
        domain: *dom,
        couplings: model.labels(),
        k,
        formulations,
        spectra,
        deviations,
        deviation_orders,
        convergence,
        mapping,
    })
}

/// Group level indices into clusters of relative gap below
/// [`DEGENERACY_GAP`].
pub fn clusters(values: &[f64]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some((start, len)) if relative(values[*start + *len - 1], v) < DEGENERACY_GAP => {
                *len += 1
            }
            _ => out.push((i, 1)),
        }
    }
    out
}

fn mapping_checks(
    ops: &[GridOperator],
    specs: &[SpectrumResult],
) -> Result<Vec<MappingCheck>, SpectralError> {
    let find = |pred: &dyn Fn(Formulation) -> bool| {
        ops.iter().zip(specs).find(|(o, _)| pred(o.formulation()))
    };
    let Some((bop, bspec)) =
        find(&|f| matches!(f, Formulation::DeltaBose | Formulation::HardCoreBose))
    else {
        return Ok(Vec::new());
    };
    let Some((fop, fspec)) = find(&|f| f == Formulation::EpsilonFermi) else {
        return Ok(Vec::new());
    };
    let bvec = bspec.vectors.as_ref().expect("finest level keeps vectors");
    let fvec = fspec.vectors.as_ref().expect("finest level keeps vectors");
    let mapped: Vec<WavefunctionGrid> = bvec
        .iter()
        .map(|y| {
            let psi_b = bop.full_wavefunction(y, Some(Statistics::Bose))?;
            Ok(bf_map(&psi_b)?)
        })
        .collect::<Result<_, SpectralError>>()?;
    let fermi: Vec<WavefunctionGrid> = fvec
        .iter()
        .map(|y| Ok(extend(&fop.sector_wavefunction(y)?, Statistics::Fermi)?))
        .collect::<Result<_, SpectralError>>()?;
    let mut out = Vec::new();
    for (start, len) in clusters(&fspec.eigenvalues) {
        // a cluster cut by the end of the list cannot be compared reliably
        if start + len == fspec.eigenvalues.len() && len > 1 {
            continue;
        }
        let mut frob = 0.0;
        for a in start..start + len {
            for b in start..start + len {
                let na = mapped[a].norm_sq().sqrt();
                let nb = fermi[b].norm_sq().sqrt();
                frob += (mapped[a].inner(&fermi[b])?.norm() / (na * nb)).powi(2);
            }
        }
        let deviation = if len == 1 {
            1.0 - frob.sqrt()
        } else {
            1.0 - frob / len as f64
        };
        out.push(MappingCheck {
            index: start,
            multiplicity: len,
            deviation: deviation.max(0.0),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleInvarianceReport {
    pub lambda: f64,
    pub g: Vec<f64>,
    pub base: Vec<f64>,
    pub dilated: Vec<f64>,
    /// Largest `|λ² E(λ) - E(1)| / |E(1)|`.
    pub max_relative: f64,
    pub shift: f64,
    /// Largest `|E_shifted - E|`.
    pub translation_abs: f64,
    pub translation_tol: f64,
    pub control_length: f64,
    pub control_base: Vec<f64>,
    pub control_dilated: Vec<f64>,
    pub control_max_relative: f64,
}

/// Compare the spectrum of the scale-invariant model with its dilation by
/// `lambda` (same node count), a translated box, and a constant-length
/// control with `a_j = g_j · control_length`.
pub fn scale_invariance_report(
    g: &[f64],
    lambda: f64,
    dom: &DomainSpec,
    k: usize,
    shift: f64,
    control_length: f64,
    opts: &SolverOptions,
) -> Result<ScaleInvarianceReport, SpectralError> {
    if dom.n != 3 {
        return Err(SpectralError::InvalidRequest(format!(
            "scale-invariance check is for n = 3, got {}",
            dom.n
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SpectralError::InvalidRequest(format!(
            "dilation {lambda} must be positive"
        )));
    }
    let model = CouplingModel::new(g.iter().map(|&v| Coupling::ScaleInvariant(v)).collect())?;
    let control = CouplingModel::new(
        g.iter()
            .map(|&v| Coupling::Robin(v * control_length))
            .collect(),
    )?;
    let mut o = *opts;
    o.keep_vectors = false;
    let dilated_dom = dom.dilated(lambda)?;
    let shifted_dom = dom.translated(shift)?;
    let jobs = [
        (*dom, model.clone()),
        (dilated_dom, model.clone()),
        (shifted_dom, model),
        (*dom, control.clone()),
        (dilated_dom, control),
    ];
    let results = par_map(&jobs, |(d, m)| -> Result<Vec<f64>, SpectralError> {
        Ok(solve(&build(Formulation::Sector, d, m)?, k, &o)?.eigenvalues)
    });
    let mut it = results.into_iter();
    let mut next = || it.next().expect("five jobs");
    let base = next()?;
    let dilated = next()?;
    let shifted = next()?;
    let control_base = next()?;
    let control_dilated = next()?;
    let l2 = lambda * lambda;
    let rel = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| relative(*x, l2 * y))
            .fold(0.0, f64::max)
    };
    let translation_abs = base
        .iter()
        .zip(&shifted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ScaleInvarianceReport {
        lambda,
        g: g.to_vec(),
        max_relative: rel(&base, &dilated),
        base,
        dilated,
        shift,
        translation_abs,
        translation_tol: opts.tol,
        control_length,
        control_max_relative: rel(&control_base, &control_dilated),
        control_base,
        control_dilated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_recovers_second_order() {
        let f = |h: f64| 1.0 + 0.3 * h * h + 0.01 * h * h * h;
        let (p, e) = richardson(f(0.4), f(0.2), f(0.1));
        assert!((p.unwrap() - 2.0).abs() < 0.1);
        assert!((e - 1.0).abs() < 1e-3);
        assert_eq!(richardson(1.0, 1.0, 1.0).0, None);
    }

    #[test]
    fn cluster_grouping() {
        assert_eq!(
            clusters(&[1.0, 2.0, 2.0 + 1e-12, 3.0]),
            vec![(0, 1), (1, 2), (3, 1)]
        );
    }

    #[test]
    fn formulation_selection() {
        assert_eq!(
            formulations_for(&CouplingModel::uniform(2, Coupling::Neumann)).len(),
            2
        );
        assert!(
            formulations_for(&CouplingModel::uniform(2, Coupling::Dirichlet))
                .contains(&Formulation::HardCoreBose)
        );
        assert_eq!(
            formulations_for(&CouplingModel::uniform(2, Coupling::Robin(1.0))).len(),
            3
        );
    }
}
