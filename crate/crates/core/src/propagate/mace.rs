//! Moving-average cluster expansion.
//!
//! Every local observable is read off an exact evolution of a small cluster
//! built around it: the centre atom plus its most strongly coupled partners
//! (for bonds, partners ranked by their summed coupling to both ends).

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::hamiltonian::{HamiltonianKind, HamiltonianSpec, DENSE_CAP};
use crate::lattice::{CouplingMatrix, Geometry};
use crate::state::{Axis, ProductState, StateVector};

use super::{drive_with, evolve_model_with, Engine, StepControl};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaceConfig {
    pub cluster_size: usize,
    pub engine: Engine,
    pub step: StepControl,
}

impl Default for MaceConfig {
    fn default() -> Self {
        Self {
            cluster_size: 12,
            engine: Engine::Auto,
            step: StepControl::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalObservable {
    /// `⟨σ^a_i⟩` on every atom.
    Site(Axis),
    /// `⟨σ^a_i σ^b_j⟩` on every nearest-neighbour bond.
    Bond(Axis, Axis),
}

/// Local expectation values, `values[observable][time][unit]` where a unit
/// is an atom or a bond.
#[derive(Debug, Clone)]
pub struct MaceTrajectory {
    pub times: Vec<f64>,
    pub observables: Vec<LocalObservable>,
    pub bonds: Vec<(usize, usize)>,
    pub values: Vec<Vec<Vec<f64>>>,
    pub n_clusters: usize,
}

impl MaceTrajectory {
    /// Unit-averaged series of one observable.
    pub fn mean(&self, observable: usize) -> Vec<f64> {
        self.values[observable]
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len().max(1) as f64)
            .collect()
    }
}

fn ranked_partners(j: &CouplingMatrix, centre: &[usize], take: usize) -> Vec<usize> {
    let n = j.n_atoms();
    let mut others: Vec<(f64, usize)> = (0..n)
        .filter(|k| !centre.contains(k))
        .map(|k| (centre.iter().map(|&c| j.get(c, k).abs()).sum::<f64>(), k))
        .collect();
    others.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut sites: Vec<usize> = centre.to_vec();
    sites.extend(others.into_iter().take(take).map(|(_, k)| k));
    sites.sort_unstable();
    sites
}

/// Cluster of `size` atoms around one atom.
pub fn site_cluster(j: &CouplingMatrix, site: usize, size: usize) -> Vec<usize> {
    ranked_partners(j, &[site], size.saturating_sub(1))
}

/// Cluster of `size` atoms around a bond.
pub fn bond_cluster(j: &CouplingMatrix, a: usize, b: usize, size: usize) -> Vec<usize> {
    ranked_partners(j, &[a, b], size.saturating_sub(2))
}

struct Task {
    observable: usize,
    unit: usize,
    /// local indices of the atoms involved
    local: (usize, Option<usize>),
}

fn evaluate(state: &StateVector, obs: LocalObservable, local: (usize, Option<usize>)) -> f64 {
    match (obs, local) {
        (LocalObservable::Site(a), (i, _)) => state.expectation_single(i, a),
        (LocalObservable::Bond(a, b), (i, Some(k))) => state.expectation_pair(i, a, k, b),
        (LocalObservable::Bond(..), (_, None)) => f64::NAN,
    }
}

fn evolve_spec(
    spec: &HamiltonianSpec,
    sites: &[usize],
    start: &[C64],
    times: &[f64],
    cfg: &MaceConfig,
    observe: &mut dyn FnMut(usize, &[C64]),
) -> Result<()> {
    let local = spec.restrict(sites);
    match &local.kind {
        HamiltonianKind::Driven(seq) => {
            let step = StepControl {
                engine: cfg.engine,
                ..cfg.step
            };
            drive_with(&local.couplings, seq, start, times, &step, observe)
        }
        _ => {
            let model = local.static_model()?.expect("static kind");
            evolve_model_with(&model, start, times, cfg.engine, observe)
        }
    }
}

/// Cluster-expanded evolution of local observables from a product state.
pub fn mace_evolve(
    g: &Geometry,
    spec: &HamiltonianSpec,
    psi0: &ProductState,
    observables: &[LocalObservable],
    times: &[f64],
    cfg: &MaceConfig,
) -> Result<MaceTrajectory> {
    mace_evolve_with(
        g,
        &spec.couplings,
        psi0,
        observables,
        times,
        cfg,
        |sites, start, times, observe| evolve_spec(spec, sites, start, times, cfg, observe),
    )
}

/// Cluster expansion with a caller-supplied cluster propagator.
///
/// `evolve(sites, psi0, times, observe)` must evolve the cluster on `sites`
/// (global indices, ascending) from `psi0` and report every time point.
pub fn mace_evolve_with<F>(
    g: &Geometry,
    couplings: &CouplingMatrix,
    psi0: &ProductState,
    observables: &[LocalObservable],
    times: &[f64],
    cfg: &MaceConfig,
    evolve: F,
) -> Result<MaceTrajectory>
where
    F: Fn(&[usize], &[C64], &[f64], &mut dyn FnMut(usize, &[C64])) -> Result<()> + Sync,
{
    let n = couplings.n_atoms();
    if g.n_atoms() != n || psi0.n_atoms() != n {
        return Err(SimError::DimensionMismatch {
            expected: n,
            got: psi0.n_atoms().min(g.n_atoms()),
        });
    }
    if cfg.cluster_size < 2 || cfg.cluster_size > DENSE_CAP {
        return Err(SimError::param(format!(
            "cluster size must lie in [2, {DENSE_CAP}], got {}",
            cfg.cluster_size
        )));
    }
    let size = cfg.cluster_size.min(n);
    let bonds = g.nearest_neighbor_bonds();
    let j = couplings;

    // group work by distinct cluster so shared clusters are evolved once
    let mut clusters: BTreeMap<Vec<usize>, Vec<Task>> = BTreeMap::new();
    let mut unit_counts = Vec::with_capacity(observables.len());
    for (oi, obs) in observables.iter().enumerate() {
        match *obs {
            LocalObservable::Site(_) => {
                unit_counts.push(n);
                for site in 0..n {
                    let sites = site_cluster(j, site, size);
                    let li = sites.binary_search(&site).expect("centre in cluster");
                    clusters.entry(sites).or_default().push(Task {
                        observable: oi,
                        unit: site,
                        local: (li, None),
                    });
                }
            }
            LocalObservable::Bond(..) => {
                unit_counts.push(bonds.len());
                for (bi, &(a, b)) in bonds.iter().enumerate() {
                    let sites = bond_cluster(j, a, b, size);
                    let la = sites.binary_search(&a).expect("bond end in cluster");
                    let lb = sites.binary_search(&b).expect("bond end in cluster");
                    clusters.entry(sites).or_default().push(Task {
                        observable: oi,
                        unit: bi,
                        local: (la, Some(lb)),
                    });
                }
            }
        }
    }

    let work: Vec<(&Vec<usize>, &Vec<Task>)> = clusters.iter().collect();
    let results: Vec<Result<Vec<Vec<f64>>>> =
        work.par_iter()
            .map(|(sites, tasks)| {
                let start = psi0.restrict(sites).to_state_vector()?;
                let m = sites.len();
                let mut per_time = vec![Vec::new(); times.len()];
                let mut failure = None;
                evolve(sites, start.amplitudes(), times, &mut |k, a| {
                    match StateVector::from_amplitudes(m, a.to_vec()) {
                        Ok(state) => {
                            per_time[k] = tasks
                                .iter()
                                .map(|t| evaluate(&state, observables[t.observable], t.local))
                                .collect()
                        }
                        Err(e) => failure = Some(e),
                    }
                })?;
                failure.map_or(Ok(per_time), Err)
            })
            .collect();

    let mut values: Vec<Vec<Vec<f64>>> = unit_counts
        .iter()
        .map(|&u| vec![vec![f64::NAN; u]; times.len()])
        .collect();
    for ((_, tasks), res) in work.iter().zip(results) {
        let per_time = res?;
        for (k, row) in per_time.iter().enumerate() {
            for (task, v) in tasks.iter().zip(row) {
                values[task.observable][k][task.unit] = *v;
            }
        }
    }
    Ok(MaceTrajectory {
        times: times.to_vec(),
        observables: observables.to_vec(),
        bonds,
        values,
        n_clusters: work.len(),
    })
}
