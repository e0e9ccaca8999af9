//! Memoized spectra under `CONTACT_DUALITY_CACHE`.
//!
//! Entries are keyed by a hash of everything the solve depends on, so a hit
//! is bit-identical to a fresh solve.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::output::content_hash;
use crate::boundary::CouplingModel;
use crate::spectral::{
    build, solve, DomainSpec, Formulation, SolverOptions, SpectralError, SpectrumResult,
};

pub const CACHE_ENV: &str = "CONTACT_DUALITY_CACHE";

/// Cache directory from the environment, if set and non-empty.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

#[derive(Serialize)]
struct Key<'a> {
    version: &'static str,
    formulation: Formulation,
    domain: &'a DomainSpec,
    model: &'a CouplingModel,
    k: usize,
    tol: f64,
    max_restarts: usize,
    krylov_dim: Option<usize>,
    dense_below: usize,
    seed: u64,
}

fn entry(
    dir: &Path,
    f: Formulation,
    dom: &DomainSpec,
    model: &CouplingModel,
    k: usize,
    o: &SolverOptions,
) -> PathBuf {
    let key = Key {
        version: env!("CARGO_PKG_VERSION"),
        formulation: f,
        domain: dom,
        model,
        k,
        tol: o.tol,
        max_restarts: o.max_restarts,
        krylov_dim: o.krylov_dim,
        dense_below: o.dense_below,
        seed: o.seed,
    };
    dir.join(format!("spectrum-{}.json", content_hash(&key)))
}

/// Eigenvalues and residuals (no vectors), read from or stored in `dir`.
/// Unreadable entries are recomputed; write failures are logged and ignored.
pub fn cached_spectrum(
    dir: Option<&Path>,
    f: Formulation,
    dom: &DomainSpec,
    model: &CouplingModel,
    k: usize,
    opts: &SolverOptions,
) -> Result<SpectrumResult, SpectralError> {
    let mut o = *opts;
    o.keep_vectors = false;
    let path = dir.map(|d| entry(d, f, dom, model, k, &o));
    if let Some(p) = &path {
        if let Ok(bytes) = fs::read(p) {
            match serde_json::from_slice::<SpectrumResult>(&bytes) {
                Ok(s) => {
                    log::debug!("cache hit {}", p.display());
                    return Ok(s);
                }
                Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", p.display()),
            }
        }
    }
    let s = solve(&build(f, dom, model)?, k, &o)?;
    if let (Some(p), Some(d)) = (&path, dir) {
        let stored = fs::create_dir_all(d)
            .and_then(|_| fs::write(p, serde_json::to_vec(&s).expect("spectra serialize")));
        if let Err(e) = stored {
            log::warn!("could not write cache entry {}: {e}", p.display());
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Coupling;

    #[test]
    fn hit_is_identical_to_fresh_solve() {
        let dir = tempfile::tempdir().unwrap();
        let dom = DomainSpec::boxed(2, 4.0, 12).unwrap();
        let model = CouplingModel::uniform(2, Coupling::Robin(-1.0));
        let o = SolverOptions::default();
        let fresh = cached_spectrum(None, Formulation::Sector, &dom, &model, 3, &o).unwrap();
        let stored =
            cached_spectrum(Some(dir.path()), Formulation::Sector, &dom, &model, 3, &o).unwrap();
        let hit =
            cached_spectrum(Some(dir.path()), Formulation::Sector, &dom, &model, 3, &o).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(fresh, stored);
        assert_eq!(fresh, hit);
        for (a, b) in fresh.eigenvalues.iter().zip(&hit.eigenvalues) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
