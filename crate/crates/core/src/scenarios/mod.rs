//! Scenario presets: configuration, runners and result files.
//!
//! Every scenario produces a list of [`ObservableSeries`], optional
//! site-by-time density maps and a JSON summary. Results depend only on the
//! configuration and its seed.

pub mod config;
pub mod fit;
pub mod output;

mod chain;
mod freeze;
mod single_atom;
mod two_atom;

use serde_json::{Map, Value};

use crate::error::{Result, SimError};
use crate::lattice::{
    build_geometry, c3_for_coupling, couplings, jitter, CouplingMatrix, Geometry, GeometryKind,
};
use crate::measure::{readout_distribution, sample_bitstrings, ShotRecord, SpamModel};
use crate::observe::{
    magnetization_z_dist, mean_sem, normalized_time, ChainBoundary, ObservableSeries,
};
use crate::propagate::{drive_with, StepControl};
use crate::pulse::PulseSequence;
use crate::rng::{self, domain};
use crate::state::{rotation_gate, Axis, StateVector};

pub use config::{
    CouplingRange, Dynamics, FreezeMode, GeometryChoice, JConvention, PulseKind, ScenarioConfig,
    ScenarioId,
};
pub use fit::{fit_damped_cosine, fit_frequency, FitFlag, FrequencyFit};
pub use output::{write_outputs, OutputFiles};

/// `⟨σᶻ_i⟩` (or any per-site quantity) on a site × time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub label: String,
    pub times_us: Vec<f64>,
    pub t_prime: Vec<f64>,
    /// `values[time][site]`
    pub values: Vec<Vec<f64>>,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: ScenarioId,
    pub series: Vec<ObservableSeries>,
    pub maps: Vec<DensityMap>,
    pub summary: Map<String, Value>,
}

impl RunOutput {
    fn new(scenario: ScenarioId) -> Self {
        Self {
            scenario,
            series: Vec::new(),
            maps: Vec::new(),
            summary: Map::new(),
        }
    }

    /// Series with the given name and site.
    pub fn find(&self, name: &str, site: Option<usize>) -> Option<&ObservableSeries> {
        self.series
            .iter()
            .find(|s| s.name == name && s.site == site)
    }
}

/// Runs a validated configuration.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut out = match cfg.scenario {
        ScenarioId::TwoAtomFreq => two_atom::run_frequency(cfg),
        ScenarioId::XxXxxSwitch => two_atom::run_switch(cfg),
        ScenarioId::Freeze2d => freeze::run(cfg),
        ScenarioId::Dw1d | ScenarioId::NflipPbc | ScenarioId::FinitePulse => chain::run(cfg),
        ScenarioId::SingleAtomCycles => single_atom::run(cfg),
    }?;
    out.summary
        .insert("scenario".into(), Value::from(cfg.scenario.name()));
    out.summary
        .insert("config".into(), serde_json::to_value(cfg)?);
    Ok(out)
}

/// Label fragment for an anisotropy, e.g. `delta=1.33`.
fn delta_label(delta: f64) -> String {
    format!("delta={delta}")
}

/// Rounds away the last bits of grid arithmetic so `3 × 0.3` prints as `0.9`.
fn tidy(t: f64) -> f64 {
    (t * 1e12).round() / 1e12
}

/// `k·dt` for `k = 0, 1, …` up to `stop`.
fn uniform_grid(stop: f64, dt: f64) -> Vec<f64> {
    let n = (stop / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| tidy(k as f64 * dt)).collect()
}

fn t_prime(times: &[f64], delta: f64) -> Result<Vec<f64>> {
    times
        .iter()
        .map(|&t| normalized_time(t, delta, 1.0))
        .collect()
}

fn seed_for(cfg: &ScenarioConfig, realization: usize) -> u64 {
    rng::derive_seed(cfg.seed, &[domain::REALIZATION, realization as u64])
}

fn shot_seed(cfg: &ScenarioConfig, curve: usize, time: usize, realization: usize) -> u64 {
    rng::derive_seed(
        cfg.seed,
        &[domain::SHOT, curve as u64, time as u64, realization as u64],
    )
}

fn boundary(cfg: &ScenarioConfig) -> ChainBoundary {
    match cfg.geometry {
        GeometryChoice::Ring => ChainBoundary::Periodic,
        _ => ChainBoundary::Open,
    }
}

/// Arrays lie in the xy-plane with the quantization axis along z.
const AXIS: [f64; 3] = [0.0, 0.0, 1.0];

fn ideal_geometry(cfg: &ScenarioConfig) -> Result<Geometry> {
    let kind = match cfg.geometry {
        GeometryChoice::Chain => GeometryKind::ObcChain { n: cfg.n_atoms },
        GeometryChoice::Ring => GeometryKind::PbcRing { n: cfg.n_atoms },
        GeometryChoice::Square => GeometryKind::Square2D {
            rows: cfg.rows,
            cols: cfg.cols,
        },
    };
    build_geometry(kind, cfg.spacing_um, AXIS)
}

fn c3(cfg: &ScenarioConfig) -> Result<f64> {
    match (cfg.j_mhz, cfg.c3_mhz_um3) {
        (_, Some(c3)) => Ok(c3),
        (Some(j), None) => c3_for_coupling(j, cfg.spacing_um, std::f64::consts::FRAC_PI_2),
        (None, None) => Err(SimError::Config("no coupling strength given".into())),
    }
}

/// Nearest-neighbour coupling in the units of `j_mhz`.
fn nn_coupling(cfg: &ScenarioConfig) -> Result<f64> {
    Ok(c3(cfg)? / (2.0 * cfg.spacing_um.powi(3)))
}

/// Exchange rate `J` of the nearest-neighbour pair (swap frequency `2J`).
fn exchange_coupling(cfg: &ScenarioConfig) -> Result<f64> {
    Ok(nn_coupling(cfg)? * cfg.j_convention.factor() * 2.0)
}

/// Couplings entering the Hamiltonian for one realization of the positions.
fn hamiltonian_couplings(
    cfg: &ScenarioConfig,
    ideal: &Geometry,
    realization: usize,
) -> Result<CouplingMatrix> {
    let g = if cfg.jitter_um > 0.0 {
        jitter(ideal, cfg.jitter_um, seed_for(cfg, realization))?
    } else {
        ideal.clone()
    };
    let full = couplings(&g, c3(cfg)?)?;
    let j = match cfg.couplings {
        CouplingRange::Dipolar => full,
        CouplingRange::NearestNeighbor => {
            let n = full.n_atoms();
            let mut rows = vec![vec![0.0; n]; n];
            for (a, b) in ideal.nearest_neighbor_bonds() {
                rows[a][b] = full.get(a, b);
                rows[b][a] = full.get(a, b);
            }
            CouplingMatrix::from_rows(&rows)?
        }
    };
    Ok(j.scaled(cfg.j_convention.factor()))
}

/// What the detector records for one state: the exact distribution of
/// recorded bitstrings, or sampled shots.
enum Readout {
    Exact(Vec<f64>),
    Shots(Vec<ShotRecord>),
}

impl Readout {
    /// Reads `psi` in the basis of `axis` (z, or y after a global π/2 about x).
    fn of(
        psi: &StateVector,
        axis: Axis,
        spam: &SpamModel,
        shots: usize,
        seed: u64,
    ) -> Result<Self> {
        let rotated;
        let target = match axis {
            Axis::Z => psi,
            Axis::Y => {
                let mut r = psi.clone();
                r.apply_global(&rotation_gate([1.0, 0.0, 0.0], std::f64::consts::FRAC_PI_2));
                rotated = r;
                &rotated
            }
            Axis::X => {
                return Err(SimError::param(
                    "σˣ has no readout basis change in this model",
                ))
            }
        };
        if shots == 0 {
            Ok(Self::Exact(readout_distribution(
                &target.probabilities(),
                target.n_atoms(),
                spam,
            )?))
        } else {
            Ok(Self::Shots(sample_bitstrings(target, shots, spam, seed)?))
        }
    }

    /// One value for an exact readout, one per shot otherwise.
    fn values(
        &self,
        exact: impl Fn(&[f64]) -> Result<f64>,
        shot: impl Fn(&ShotRecord) -> f64,
    ) -> Result<Vec<f64>> {
        match self {
            Self::Exact(p) => Ok(vec![exact(p)?]),
            Self::Shots(s) => Ok(s.iter().map(shot).collect()),
        }
    }

    /// Per-atom mean of the recorded `±1` readings.
    fn mean_spin(&self, n_atoms: usize) -> Result<Vec<f64>> {
        self.values(
            |p| Ok(magnetization_z_dist(p, n_atoms)?.iter().sum::<f64>() / n_atoms as f64),
            |s| (2.0 * s.up_count() as f64 - n_atoms as f64) / n_atoms as f64,
        )
    }
}

/// Evolves under `H_XX` plus the drive of `seq` to the end of the sequence.
fn drive_to_end(
    j: &CouplingMatrix,
    seq: &PulseSequence,
    psi0: &StateVector,
    ctl: &StepControl,
) -> Result<StateVector> {
    let t = seq.duration_us();
    if t <= 0.0 {
        return Ok(psi0.clone());
    }
    let mut out = None;
    drive_with(j, seq, psi0.amplitudes(), &[t], ctl, |_, a| {
        out = Some(a.to_vec())
    })?;
    StateVector::from_amplitudes(psi0.n_atoms(), out.expect("one sample"))
}

fn step_control(cfg: &ScenarioConfig) -> StepControl {
    StepControl {
        tol: cfg.step_tol,
        ..StepControl::default()
    }
}

/// Collects per-sample values (one per realization, or one per shot) at
/// every time point and reduces them to mean and standard error.
#[derive(Debug, Clone)]
struct Samples {
    values: Vec<Vec<f64>>,
}

impl Samples {
    fn new(n_times: usize) -> Self {
        Self {
            values: vec![Vec::new(); n_times],
        }
    }

    fn push(&mut self, time: usize, v: f64) {
        self.values[time].push(v);
    }

    fn extend(&mut self, time: usize, v: impl IntoIterator<Item = f64>) {
        self.values[time].extend(v);
    }

    fn reduce(&self) -> (Vec<f64>, Vec<f64>) {
        self.values.iter().map(|v| mean_sem(v)).unzip()
    }

    fn series(
        &self,
        name: impl Into<String>,
        site: Option<usize>,
        times_us: &[f64],
        t_prime: &[f64],
        n_shots: usize,
    ) -> Result<ObservableSeries> {
        let (mean, sem) = self.reduce();
        ObservableSeries::new(
            name,
            site,
            times_us.to_vec(),
            t_prime.to_vec(),
            mean,
            sem,
            n_shots,
        )
    }
}

/// Whether a sequence never increases by more than `slack`.
fn non_increasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Index of the grid point nearest to `x`.
fn nearest(grid: &[f64], x: f64) -> Option<usize> {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_end_point() {
        assert_eq!(uniform_grid(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(uniform_grid(1.1, 0.1).len(), 12);
        assert_eq!(uniform_grid(1.0, 0.1)[3], 0.3);
    }

    #[test]
    fn exchange_rate_follows_convention() {
        let mut cfg = ScenarioConfig::defaults(ScenarioId::TwoAtomFreq);
        assert!((exchange_coupling(&cfg).unwrap() - 0.93).abs() < 1e-12);
        let g = ideal_geometry(&cfg).unwrap();
        let j = hamiltonian_couplings(&cfg, &g, 0).unwrap();
        assert!((j.get(0, 1) - 0.465).abs() < 1e-12);
        cfg.j_convention = JConvention::Literal;
        assert!((exchange_coupling(&cfg).unwrap() - 1.86).abs() < 1e-12);
        assert!((hamiltonian_couplings(&cfg, &g, 0).unwrap().get(0, 1) - 0.93).abs() < 1e-12);
    }

    #[test]
    fn nearest_neighbour_range_keeps_bonds_only() {
        let mut cfg = ScenarioConfig::defaults(ScenarioId::Dw1d);
        cfg.couplings = CouplingRange::NearestNeighbor;
        cfg.jitter_um = 0.0;
        let g = ideal_geometry(&cfg).unwrap();
        let j = hamiltonian_couplings(&cfg, &g, 0).unwrap();
        assert!((j.get(3, 4) - 0.135).abs() < 1e-12, "{}", j.get(3, 4));
        assert_eq!(j.get(3, 5), 0.0);
    }
}
