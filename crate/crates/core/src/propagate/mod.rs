//! Time evolution: exact static propagation, driven propagation through pulse
//! sequences, and the cluster expansion for larger arrays.

pub mod analytic;
pub mod mace;
pub mod spectral;
pub mod taylor;

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Result, SimError};
use crate::hamiltonian::{xx_model, OperatorMatrix, SpinModel};
use crate::lattice::CouplingMatrix;
use crate::pulse::{Pulse, PulseSequence, Segment};
use crate::rng;
use crate::state::{self, StateVector};

pub use analytic::{
    two_atom_analytic, two_atom_sigma_y_frequency, TwoAtomInitial, TwoAtomObservables,
};
pub use mace::{mace_evolve, mace_evolve_with, LocalObservable, MaceConfig, MaceTrajectory};
pub use spectral::Spectral;
pub use taylor::Taylor;

const NORM_TOL: f64 = 1e-9;
const DRIVEN_NORM_TOL: f64 = 1e-8;
const TIME_EPS: f64 = 1e-12;
/// Block-cubed sizes above which the spectral engine is not chosen automatically.
const SPECTRAL_SETUP_LIMIT: f64 = 3e8;

/// States on a strictly increasing time grid (μs).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn map<T>(&self, f: impl Fn(&StateVector) -> T) -> Vec<T> {
        self.states.iter().map(f).collect()
    }

    pub fn last(&self) -> Option<&StateVector> {
        self.states.last()
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(SimError::param("time grid must be finite and non-negative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::param("time grid must be strictly increasing"));
    }
    Ok(())
}

fn check_norm(amps: &[C64], tol: f64, t: f64) -> Result<()> {
    let n = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (n - 1.0).abs() > tol {
        return Err(SimError::Numerical(format!(
            "norm drifted to {n:.12} at t = {t} μs"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Pick by estimated cost.
    #[default]
    Auto,
    Spectral,
    Taylor,
}

/// Accuracy control for driven propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Allowed change of the final-state fidelity when the steps are halved.
    pub tol: f64,
    /// Upper bound on steps per pulse window.
    pub max_steps: usize,
    /// Skip calibration and use this many steps per window.
    pub fixed_steps: Option<usize>,
    pub engine: Engine,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_steps: 4096,
            fixed_steps: None,
            engine: Engine::Auto,
        }
    }
}

/// `exp(−i·2π·H·t)` for a fixed Hamiltonian.
#[derive(Debug, Clone)]
pub enum StaticPropagator {
    Spectral(Spectral),
    Taylor(Taylor),
}

impl StaticPropagator {
    pub fn new(model: &SpinModel, engine: Engine) -> Result<Self> {
        Ok(match engine {
            Engine::Spectral => Self::Spectral(Spectral::from_model(model)?),
            Engine::Taylor => Self::Taylor(Taylor::new(model)),
            Engine::Auto => {
                let setup: f64 = spectral::block_sizes(model)
                    .iter()
                    .map(|&d| (d as f64).powi(3))
                    .sum();
                if setup <= SPECTRAL_SETUP_LIMIT {
                    Self::Spectral(Spectral::from_model(model)?)
                } else {
                    Self::Taylor(Taylor::new(model))
                }
            }
        })
    }

    pub fn propagate(&self, psi: &mut [C64], t: f64) -> Result<()> {
        match self {
            Self::Spectral(s) => {
                s.propagate(psi, t);
                Ok(())
            }
            Self::Taylor(tay) => tay.propagate(psi, t),
        }
    }
}

/// Evolves under a dense operator by spectral decomposition.
pub fn evolve_static(h: &OperatorMatrix, psi0: &StateVector, times: &[f64]) -> Result<Trajectory> {
    if h.dim() != psi0.dim() {
        return Err(SimError::DimensionMismatch {
            expected: h.dim(),
            got: psi0.dim(),
        });
    }
    check_grid(times)?;
    let spec = Spectral::from_operator(h)?;
    let coeffs = spec.coefficients(psi0.amplitudes());
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let mut out = vec![C64::new(0.0, 0.0); psi0.dim()];
        spec.reconstruct(&coeffs, t, &mut out);
        check_norm(&out, NORM_TOL, t)?;
        states.push(StateVector::from_amplitudes(psi0.n_atoms(), out)?);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

/// Evolves under a structured model, calling `observe(k, state)` at each time.
pub fn evolve_model_with(
    model: &SpinModel,
    psi0: &[C64],
    times: &[f64],
    engine: Engine,
    mut observe: impl FnMut(usize, &[C64]),
) -> Result<()> {
    if model.dim() != psi0.len() {
        return Err(SimError::DimensionMismatch {
            expected: model.dim(),
            got: psi0.len(),
        });
    }
    check_grid(times)?;
    let prop = StaticPropagator::new(model, engine)?;
    match &prop {
        StaticPropagator::Spectral(s) => {
            let coeffs = s.coefficients(psi0);
            let mut out = vec![C64::new(0.0, 0.0); psi0.len()];
            for (k, &t) in times.iter().enumerate() {
                s.reconstruct(&coeffs, t, &mut out);
                check_norm(&out, NORM_TOL, t)?;
                observe(k, &out);
            }
        }
        StaticPropagator::Taylor(tay) => {
            let mut psi = psi0.to_vec();
            let mut now = 0.0;
            for (k, &t) in times.iter().enumerate() {
                tay.propagate(&mut psi, t - now)?;
                now = t;
                check_norm(&psi, NORM_TOL, t)?;
                observe(k, &psi);
            }
        }
    }
    Ok(())
}

/// Evolves under `stages[0].0` until `stages[0].1`, then under the next model
/// and so on; the last model applies for all later times.
pub fn evolve_piecewise_with(
    stages: &[(SpinModel, f64)],
    psi0: &[C64],
    times: &[f64],
    engine: Engine,
    mut observe: impl FnMut(usize, &[C64]),
) -> Result<()> {
    if stages.is_empty() {
        return Err(SimError::param(
            "piecewise evolution needs at least one stage",
        ));
    }
    check_grid(times)?;
    let props = stages
        .iter()
        .map(|(m, _)| {
            if m.dim() != psi0.len() {
                return Err(SimError::DimensionMismatch {
                    expected: m.dim(),
                    got: psi0.len(),
                });
            }
            StaticPropagator::new(m, engine)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut psi = psi0.to_vec();
    let mut now = 0.0;
    let mut stage = 0;
    for (k, &target) in times.iter().enumerate() {
        while now < target {
            let last = stage + 1 == stages.len();
            let end = if last { f64::INFINITY } else { stages[stage].1 };
            let upto = target.min(end);
            if upto > now {
                props[stage].propagate(&mut psi, upto - now)?;
                now = upto;
            }
            if !last && now >= end {
                stage += 1;
            }
        }
        check_norm(&psi, NORM_TOL, target)?;
        observe(k, &psi);
    }
    Ok(())
}

pub fn evolve_model(
    model: &SpinModel,
    psi0: &StateVector,
    times: &[f64],
    engine: Engine,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(times.len());
    let n = psi0.n_atoms();
    let mut failure = None;
    evolve_model_with(model, psi0.amplitudes(), times, engine, |_, a| {
        match StateVector::from_amplitudes(n, a.to_vec()) {
            Ok(s) => states.push(s),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

/// Global single-atom gate on every atom.
fn apply_global_raw(psi: &mut [C64], n_atoms: usize, g: &state::Gate) {
    for site in 0..n_atoms {
        state::apply_single_raw(psi, site, g);
    }
}

/// Propagation through pulse windows with a rotate/interact/rotate splitting.
struct DrivenStepper<'a> {
    n_atoms: usize,
    free: &'a StaticPropagator,
    steps: HashMap<u64, usize>,
    ctl: StepControl,
    n_windows: usize,
}

impl DrivenStepper<'_> {
    /// Advances through `[a, b]` of a pulse window using `n` steps per window.
    fn window(&self, psi: &mut [C64], pulse: &Pulse, a: f64, b: f64, n: usize) -> Result<()> {
        let w = pulse.window_us();
        if b <= a {
            return Ok(());
        }
        let k = ((n as f64) * (b - a) / w).ceil().max(1.0) as usize;
        let h = (b - a) / k as f64;
        let mut at = a;
        for step in 0..k {
            let mid = a + (step as f64 + 0.5) * h;
            apply_global_raw(psi, self.n_atoms, &pulse.rotation_between(at, mid));
            self.free.propagate(psi, h)?;
            at = mid;
        }
        apply_global_raw(psi, self.n_atoms, &pulse.rotation_between(at, b));
        Ok(())
    }

    fn steps_for(&mut self, pulse: &Pulse) -> Result<usize> {
        if let Some(n) = self.ctl.fixed_steps {
            return Ok(n.max(1));
        }
        let key = pulse.window_us().to_bits() ^ pulse.omega_peak_mhz().to_bits().rotate_left(17);
        if let Some(&n) = self.steps.get(&key) {
            return Ok(n);
        }
        // calibrate on a fixed generic state
        let dim = 1usize << self.n_atoms;
        let mut r = rng::rng_for(0x5eed, &[self.n_atoms as u64]);
        let mut probe: Vec<C64> = (0..dim)
            .map(|_| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
            .collect();
        let nrm = probe.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        probe.iter_mut().for_each(|z| *z /= nrm);
        let target = self.ctl.tol / (self.n_windows.max(1) as f64).powi(2);
        let w = pulse.window_us();
        let mut n = 1;
        let mut prev = probe.clone();
        self.window(&mut prev, pulse, 0.0, w, n)?;
        loop {
            if 2 * n > self.ctl.max_steps {
                return Err(SimError::Numerical(format!(
                    "step control unsatisfiable: {} steps per {:.3} ns window exceed the limit of {}",
                    2 * n,
                    w * 1e3,
                    self.ctl.max_steps
                )));
            }
            let mut next = probe.clone();
            self.window(&mut next, pulse, 0.0, w, 2 * n)?;
            let overlap: C64 = prev.iter().zip(&next).map(|(a, b)| a.conj() * b).sum();
            let change = 1.0 - overlap.norm_sqr();
            n *= 2;
            if change < target {
                break;
            }
            prev = next;
        }
        self.steps.insert(key, n);
        Ok(n)
    }
}

/// Evolves under `H_XX` plus the drive of `seq`, which starts at `t = 0`.
/// Times past the end of the sequence evolve freely under `H_XX`.
pub fn drive_with(
    j: &CouplingMatrix,
    seq: &PulseSequence,
    psi0: &[C64],
    times: &[f64],
    ctl: &StepControl,
    mut observe: impl FnMut(usize, &[C64]),
) -> Result<()> {
    let n_atoms = j.n_atoms();
    if psi0.len() != 1usize << n_atoms {
        return Err(SimError::DimensionMismatch {
            expected: 1 << n_atoms,
            got: psi0.len(),
        });
    }
    check_grid(times)?;
    if !(ctl.tol > 0.0) {
        return Err(SimError::param("step tolerance must be positive"));
    }
    let free = StaticPropagator::new(&xx_model(j), ctl.engine)?;
    let n_windows = seq.pulses().filter(|p| p.window_us() > 0.0).count();
    let mut stepper = DrivenStepper {
        n_atoms,
        free: &free,
        steps: HashMap::new(),
        ctl: *ctl,
        n_windows,
    };

    // flatten into (start, segment) with a trailing open-ended gap
    let mut timeline: Vec<(f64, &Segment)> = Vec::with_capacity(seq.segments().len());
    let mut start = 0.0;
    for seg in seq.segments() {
        timeline.push((start, seg));
        start += seg.duration_us();
    }

    let mut psi = psi0.to_vec();
    let mut now = 0.0;
    let mut idx = 0;
    for (k, &target) in times.iter().enumerate() {
        loop {
            let Some(&(s0, seg)) = timeline.get(idx) else {
                if target > now {
                    free.propagate(&mut psi, target - now)?;
                    now = target;
                }
                break;
            };
            let d = seg.duration_us();
            match seg {
                Segment::Pulse(p) if d == 0.0 => {
                    // an instantaneous pulse acts on every sample after t = 0 at or past its time
                    if !(target > TIME_EPS && s0 <= target + TIME_EPS) {
                        break;
                    }
                    apply_global_raw(&mut psi, n_atoms, &p.ideal_rotation());
                    idx += 1;
                }
                _ => {
                    let s1 = s0 + d;
                    let upto = target.min(s1);
                    if upto > now {
                        match seg {
                            Segment::Gap { .. } => free.propagate(&mut psi, upto - now)?,
                            Segment::Pulse(p) => {
                                let n = stepper.steps_for(p)?;
                                stepper.window(&mut psi, p, now - s0, upto - s0, n)?;
                            }
                        }
                        now = upto;
                    }
                    if now >= s1 - TIME_EPS {
                        idx += 1;
                    } else {
                        break;
                    }
                }
            }
        }
        check_norm(&psi, DRIVEN_NORM_TOL, target)?;
        observe(k, &psi);
    }
    Ok(())
}

/// Driven evolution recorded as a trajectory.
pub fn evolve_driven(
    j: &CouplingMatrix,
    seq: &PulseSequence,
    psi0: &StateVector,
    times: &[f64],
    ctl: &StepControl,
) -> Result<Trajectory> {
    let n = psi0.n_atoms();
    if n != j.n_atoms() {
        return Err(SimError::DimensionMismatch {
            expected: j.n_atoms(),
            got: n,
        });
    }
    let mut states = Vec::with_capacity(times.len());
    drive_with(j, seq, psi0.amplitudes(), times, ctl, |_, a| {
        states.push(a.to_vec())
    })?;
    let states = states
        .into_iter()
        .map(|a| StateVector::from_amplitudes(n, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

/// Driven evolution read out after whole cycles of a recipe-built train.
///
/// Sample `m` is the state produced by `seq.train(m)` (all pulses ideal or as
/// perturbed in `seq`), reported with that train's duration. At `δ = 2` the
/// closing −X pulse is applied to a copy at every sample.
pub fn drive_cycle_samples(
    j: &CouplingMatrix,
    seq: &PulseSequence,
    psi0: &[C64],
    cycles: &[usize],
    ctl: &StepControl,
    mut observe: impl FnMut(usize, f64, &[C64]),
) -> Result<()> {
    if seq.anisotropy().is_nan() {
        return Err(SimError::param(
            "cycle sampling needs a sequence built from a cycle recipe",
        ));
    }
    if cycles.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::param("cycle counts must be strictly increasing"));
    }
    let Some(&last) = cycles.last() else {
        return Ok(());
    };
    if last > seq.n_cycles() {
        return Err(SimError::param(format!(
            "sequence has {} cycles, {last} requested",
            seq.n_cycles()
        )));
    }
    let n_atoms = j.n_atoms();
    let tc = seq.cycle_us();

    let mut body = seq.segments().to_vec();
    let closing = if seq.delta2_mode() {
        // drop the final −X (and anything after it) from the body
        let pos = body.iter().rposition(|s| matches!(s, Segment::Pulse(_)));
        match pos.map(|p| body.drain(p..).next()) {
            Some(Some(Segment::Pulse(p))) => Some(p),
            _ => None,
        }
    } else {
        None
    };
    let body = PulseSequence::from_segments(body)?;

    // delta pulses sitting exactly on a sample time belong to the next cycle
    let mut starts = Vec::new();
    let mut t = 0.0;
    for seg in body.segments() {
        if let Segment::Pulse(p) = seg {
            if p.window_us() == 0.0 {
                starts.push((t, p.ideal_rotation()));
            }
        }
        t += seg.duration_us();
    }

    let times: Vec<f64> = cycles.iter().map(|&m| m as f64 * tc).collect();
    let mut states = Vec::with_capacity(times.len());
    drive_with(j, &body, psi0, &times, ctl, |k, a| {
        let mut psi = a.to_vec();
        let target = times[k];
        if target > TIME_EPS {
            for (_, g) in starts
                .iter()
                .rev()
                .filter(|(s0, _)| (s0 - target).abs() <= TIME_EPS)
            {
                apply_global_raw(&mut psi, n_atoms, &state::gate_adjoint(g));
            }
        }
        states.push(psi);
    })?;

    for (k, (mut psi, &m)) in states.into_iter().zip(cycles).enumerate() {
        let mut time = times[k];
        if let (Some(p), true) = (&closing, m > 0) {
            if p.window_us() == 0.0 {
                apply_global_raw(&mut psi, n_atoms, &p.ideal_rotation());
            } else {
                let single = PulseSequence::from_segments(vec![Segment::Pulse(p.clone())])?;
                let mut out = Vec::new();
                drive_with(j, &single, &psi, &[p.window_us()], ctl, |_, a| {
                    out = a.to_vec()
                })?;
                psi = out;
                time += p.window_us();
            }
        }
        observe(k, time, &psi);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::CouplingMatrix;
    use crate::pulse::{build_train, perturb_axes, PulseShape};
    use crate::state::StateVector;

    fn chain(n: usize, j: f64) -> CouplingMatrix {
        let bonds: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        CouplingMatrix::from_bonds(n, &bonds, j).unwrap()
    }

    fn final_state(j: &CouplingMatrix, seq: &PulseSequence, psi0: &StateVector) -> (f64, Vec<C64>) {
        let t = seq.duration_us();
        let tr = evolve_driven(j, seq, psi0, &[t], &StepControl::default()).unwrap();
        (t, tr.states[0].amplitudes().to_vec())
    }

    fn check_against_trains(delta: f64, shape: PulseShape, dtheta: f64) {
        let j = chain(4, 0.4);
        let mut psi0 = StateVector::with_up_sites(4, &[0, 1]).unwrap();
        psi0.apply_single(2, &state::rotation_gate([1.0, 0.0, 0.0], 0.9));
        let full = build_train(delta, 0.3, shape, 4).unwrap();
        let (full, _) = perturb_axes(&full, dtheta, 9).unwrap();
        let cycles = [0, 1, 3, 4];
        let mut got = Vec::new();
        drive_cycle_samples(
            &j,
            &full,
            psi0.amplitudes(),
            &cycles,
            &StepControl::default(),
            |_, t, a| got.push((t, a.to_vec())),
        )
        .unwrap();
        for (&m, (t, amps)) in cycles.iter().zip(&got) {
            if m == 0 {
                assert_eq!(*t, 0.0);
                assert_eq!(amps.as_slice(), psi0.amplitudes());
                continue;
            }
            // an m-cycle train cut from the same perturbed pulses
            let mut segs: Vec<Segment> = Vec::new();
            let mut time = 0.0;
            let cut = m as f64 * 0.3;
            for s in full.segments() {
                if time < cut - 1e-12 {
                    match s {
                        Segment::Gap { duration_us } if time + duration_us > cut => {
                            segs.push(Segment::Gap {
                                duration_us: cut - time,
                            })
                        }
                        _ => segs.push(s.clone()),
                    }
                }
                time += s.duration_us();
            }
            if full.delta2_mode() {
                if let Some(Segment::Pulse(p)) = full
                    .segments()
                    .iter()
                    .rev()
                    .find(|s| matches!(s, Segment::Pulse(_)))
                {
                    segs.push(Segment::Pulse(p.clone()));
                }
            }
            let short = PulseSequence::from_segments(segs).unwrap();
            let (t_ref, reference) = final_state(&j, &short, &psi0);
            assert!((t - t_ref).abs() < 1e-12, "time {t} vs {t_ref}");
            let overlap: C64 = reference.iter().zip(amps).map(|(a, b)| a.conj() * b).sum();
            assert!(
                (overlap.norm() - 1.0).abs() < 1e-9,
                "m = {m}: overlap {}",
                overlap.norm()
            );
        }
    }

    #[test]
    fn cycle_samples_match_shorter_trains() {
        for delta in [0.0, 0.7, 2.0] {
            check_against_trains(delta, PulseShape::Delta, 0.0);
            check_against_trains(delta, PulseShape::Delta, 0.05);
            check_against_trains(delta, PulseShape::GaussianWidth { width_1e2_ns: 8.0 }, 0.05);
        }
    }

    #[test]
    fn piecewise_matches_two_calls() {
        let j = chain(3, 0.5);
        let psi0 = StateVector::with_up_sites(3, &[0]).unwrap();
        let a = crate::hamiltonian::xxz_model(&j, 1.0).unwrap();
        let b = xx_model(&j);
        let mut got = Vec::new();
        evolve_piecewise_with(
            &[(a.clone(), 0.4), (b.clone(), 0.0)],
            psi0.amplitudes(),
            &[0.2, 0.4, 0.9],
            Engine::Auto,
            |_, s| got.push(s.to_vec()),
        )
        .unwrap();
        let mid = evolve_model(&a, &psi0, &[0.4], Engine::Spectral).unwrap();
        let end = evolve_model(&b, &mid.states[0], &[0.5], Engine::Spectral).unwrap();
        for (x, y) in got[2].iter().zip(end.states[0].amplitudes()) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
