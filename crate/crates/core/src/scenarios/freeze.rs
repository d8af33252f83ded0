//! 2D freezing: per-atom `⟨σʸ⟩` of a square array during and after an
//! engineered-XXX drive, against the ideal `H_XXX`-then-`H_XX` reference.

use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use crate::error::Result;
use crate::hamiltonian::{xx_model, xxz_model};
use crate::lattice::{CouplingMatrix, Geometry};
use crate::measure::{prepare_product, PreparationSpec, PreparationTarget};
use crate::observe::ObservableSeries;
use crate::propagate::{
    drive_cycle_samples, evolve_model_with, evolve_piecewise_with, mace_evolve_with, Engine,
    LocalObservable, MaceConfig,
};
use crate::pulse::{build_train, perturb_axes, PulseSequence};
use crate::state::{Axis, ProductState, StateVector};

use super::{
    delta_label, hamiltonian_couplings, ideal_geometry, non_increasing, seed_for, step_control,
    t_prime, tidy, FreezeMode, RunOutput, Samples, ScenarioConfig, ScenarioId,
};

type ClusterEvolve<'a> =
    dyn Fn(&[usize], &[C64], &[f64], &mut dyn FnMut(usize, &[C64])) -> Result<()> + Sync + 'a;

/// Per-site `⟨σʸ_i⟩` at every time: `[time][site]`.
fn sigma_y_profile(
    cfg: &ScenarioConfig,
    g: &Geometry,
    j: &CouplingMatrix,
    psi0: &ProductState,
    times: &[f64],
    evolve: &ClusterEvolve<'_>,
) -> Result<Vec<Vec<f64>>> {
    match cfg.mode {
        FreezeMode::Mace => {
            let mc = MaceConfig {
                cluster_size: cfg.cluster_size,
                engine: Engine::Auto,
                step: step_control(cfg),
            };
            let tr = mace_evolve_with(
                g,
                j,
                psi0,
                &[LocalObservable::Site(Axis::Y)],
                times,
                &mc,
                evolve,
            )?;
            Ok(tr.values.into_iter().next().unwrap_or_default())
        }
        FreezeMode::Exact => {
            let n = psi0.n_atoms();
            let sites: Vec<usize> = (0..n).collect();
            let start = psi0.to_state_vector()?;
            let mut rows = vec![Vec::new(); times.len()];
            let mut failure = None;
            evolve(
                &sites,
                start.amplitudes(),
                times,
                &mut |k, a| match StateVector::from_amplitudes(n, a.to_vec()) {
                    Ok(s) => rows[k] = (0..n).map(|i| s.expectation_single(i, Axis::Y)).collect(),
                    Err(e) => failure = Some(e),
                },
            )?;
            failure.map_or(Ok(rows), Err)
        }
    }
}

/// Driven cluster evolution: whole cycles sampled at the cycle boundaries,
/// then free `H_XX` for the remaining times.
fn driven_evolver<'a>(
    cfg: &'a ScenarioConfig,
    j: &'a CouplingMatrix,
    seq: &'a PulseSequence,
    n_drive: usize,
) -> impl Fn(&[usize], &[C64], &[f64], &mut dyn FnMut(usize, &[C64])) -> Result<()> + Sync + 'a {
    move |sites, start, times, observe| {
        let local = j.restrict(sites);
        let cycles: Vec<usize> = (0..=n_drive).collect();
        let ctl = step_control(cfg);
        let mut last = start.to_vec();
        drive_cycle_samples(&local, seq, start, &cycles, &ctl, |m, _, a| {
            observe(m, a);
            last = a.to_vec();
        })?;
        let end = times[n_drive];
        let rest: Vec<f64> = times[n_drive + 1..].iter().map(|t| t - end).collect();
        if rest.is_empty() {
            return Ok(());
        }
        evolve_model_with(&xx_model(&local), &last, &rest, Engine::Auto, |k, a| {
            observe(n_drive + 1 + k, a)
        })
    }
}

fn series_of(
    name: String,
    samples: &Samples,
    times: &[f64],
    delta: f64,
) -> Result<ObservableSeries> {
    samples.series(name, None, times, &t_prime(times, delta)?, 0)
}

fn curve_summary(s: &ObservableSeries, n_drive: usize) -> Value {
    let during = &s.mean[..=n_drive];
    let initial = during[0];
    let end = during[n_drive];
    let drift = during
        .iter()
        .map(|v| (v - initial).abs())
        .fold(0.0, f64::max);
    json!({
        "name": s.name,
        "initial": initial,
        "at_drive_end": end,
        "retention": end / initial,
        "drift_during_drive": drift,
        "monotonic_decay_during_drive": non_increasing(during, 1e-9),
        "final": s.mean.last(),
    })
}

pub(super) fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(ScenarioId::Freeze2d);
    let delta = cfg.deltas[0];
    let tc = cfg.tc_us();
    let n_drive = (cfg.drive_us / tc + 1e-9).floor() as usize;
    let drive_end = n_drive as f64 * tc;
    let mut times: Vec<f64> = (0..=n_drive).map(|m| tidy(m as f64 * tc)).collect();
    let n_after = ((cfg.t_stop_us - drive_end) / cfg.dt_us + 1e-9)
        .floor()
        .max(0.0) as usize;
    times.extend((1..=n_after).map(|k| tidy(drive_end + k as f64 * cfg.dt_us)));

    let g = ideal_geometry(cfg)?;
    let n = g.n_atoms();
    let (a, b) = cfg.spam()?.affine();
    let prep = PreparationSpec::new(n, PreparationTarget::AllPlusY, cfg.p_prep)?;
    let per_atom = |rows: Vec<Vec<f64>>| -> Vec<f64> {
        rows.iter()
            .map(|r| a * r.iter().sum::<f64>() / r.len() as f64 + b)
            .collect()
    };

    let mut summaries = Vec::new();
    for &factor in &cfg.rabi_factors {
        let train = build_train(delta, tc, cfg.pulse_shape(factor)?, n_drive.max(1))?;
        let mut samples = Samples::new(times.len());
        for r in 0..cfg.realizations {
            let seed = seed_for(cfg, r);
            let j = hamiltonian_couplings(cfg, &g, r)?;
            let seq = if cfg.axis_error_rad > 0.0 {
                perturb_axes(&train, cfg.axis_error_rad, seed)?.0
            } else {
                train.clone()
            };
            let psi0 = prepare_product(&prep, seed)?;
            let evolve = driven_evolver(cfg, &j, &seq, n_drive);
            let rows = sigma_y_profile(cfg, &g, &j, &psi0, &times, &evolve)?;
            for (k, v) in per_atom(rows).into_iter().enumerate() {
                samples.push(k, v);
            }
        }
        let s = series_of(
            format!("sigma_y[{},rabi_x{factor}]", delta_label(delta)),
            &samples,
            &times,
            delta,
        )?;
        summaries.push(curve_summary(&s, n_drive));
        out.series.push(s);
    }

    // ideal reference: H_XXX for the drive window, then H_XX
    let j = hamiltonian_couplings(cfg, &g, 0)?;
    let psi0 = prepare_product(
        &PreparationSpec::new(n, PreparationTarget::AllPlusY, 0.0)?,
        0,
    )?;
    let reference =
        |sites: &[usize], start: &[C64], ts: &[f64], observe: &mut dyn FnMut(usize, &[C64])| {
            let local = j.restrict(sites);
            let stages = [
                (xxz_model(&local, delta)?, drive_end),
                (xx_model(&local), f64::INFINITY),
            ];
            evolve_piecewise_with(&stages, start, ts, Engine::Auto, |k, a| observe(k, a))
        };
    let rows = sigma_y_profile(cfg, &g, &j, &psi0, &times, &reference)?;
    let mut samples = Samples::new(times.len());
    for (k, v) in per_atom(rows).into_iter().enumerate() {
        samples.push(k, v);
    }
    let s = series_of(
        format!("sigma_y_reference[{}]", delta_label(delta)),
        &samples,
        &times,
        delta,
    )?;
    out.summary
        .insert("reference".into(), curve_summary(&s, n_drive));
    out.series.push(s);

    out.summary.insert("curves".into(), Value::Array(summaries));
    out.summary.insert("drive_cycles".into(), json!(n_drive));
    out.summary.insert("drive_end_us".into(), json!(drive_end));
    out.summary.insert("n_atoms".into(), json!(n));
    Ok(out)
}
