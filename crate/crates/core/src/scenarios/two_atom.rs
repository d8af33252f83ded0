//! Two-atom scenarios: the frequency law and the XX → XXX → XX switch.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Result, SimError};
use crate::hamiltonian::xxz_weights;
use crate::lattice::CouplingMatrix;
use crate::measure::{prepare, PreparationSpec, PreparationTarget};
use crate::pulse::{build_cycle, perturb_axes, PulseSequence, Segment};
use crate::state::{Axis, StateVector};

use super::fit::{fit_damped_cosine, fit_frequency, FitFlag, FrequencyFit};
use super::{
    delta_label, drive_to_end, hamiltonian_couplings, ideal_geometry, seed_for, shot_seed,
    step_control, t_prime, uniform_grid, Readout, RunOutput, Samples, ScenarioConfig, ScenarioId,
};

/// Per-realization couplings and initial states.
fn realizations(
    cfg: &ScenarioConfig,
    target: PreparationTarget,
) -> Result<Vec<(CouplingMatrix, StateVector)>> {
    let ideal = ideal_geometry(cfg)?;
    let prep = PreparationSpec::new(cfg.n_atoms, target, cfg.p_prep)?;
    (0..cfg.realizations)
        .map(|r| {
            Ok((
                hamiltonian_couplings(cfg, &ideal, r)?,
                prepare(&prep, seed_for(cfg, r))?,
            ))
        })
        .collect()
}

fn with_axis_noise(cfg: &ScenarioConfig, seq: PulseSequence, r: usize) -> Result<PulseSequence> {
    if cfg.axis_error_rad > 0.0 {
        Ok(perturb_axes(&seq, cfg.axis_error_rad, seed_for(cfg, r))?.0)
    } else {
        Ok(seq)
    }
}

fn fit_json(fit: &FrequencyFit) -> Value {
    serde_json::to_value(fit).unwrap_or(Value::Null)
}

/// Ratio of the frequency at `δ` to the one at `δ = 0` predicted by the
/// average Hamiltonian.
pub fn expected_frequency_ratio(delta: f64) -> f64 {
    2.0 * (1.0 - delta).abs() / (2.0 + delta)
}

/// Per-atom `⟨σʸ⟩` from `|→→⟩_y` after a single cycle of length `t`, with `t`
/// swept over the grid.
pub(super) fn run_frequency(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(ScenarioId::TwoAtomFreq);
    let shape = cfg.pulse_shape(1.0)?;
    let ctl = step_control(cfg);
    let spam = cfg.spam()?;
    let per_real = cfg.shots / cfg.realizations;
    let runs = realizations(cfg, PreparationTarget::AllPlusY)?;
    let grid = uniform_grid(cfg.t_stop_us, cfg.dt_us);

    let mut fits = Vec::new();
    for (ci, &delta) in cfg.deltas.iter().enumerate() {
        let points: Vec<Result<Option<Vec<f64>>>> = grid
            .par_iter()
            .enumerate()
            .map(|(k, &t)| {
                let cycle = if t > 0.0 {
                    match build_cycle(delta, t, shape) {
                        Ok(c) => Some(c),
                        Err(SimError::InvalidParameter(_)) => return Ok(None),
                        Err(e) => return Err(e),
                    }
                } else {
                    None
                };
                let mut values = Vec::new();
                for (r, (j, psi0)) in runs.iter().enumerate() {
                    let psi = match &cycle {
                        Some(c) => {
                            drive_to_end(j, &with_axis_noise(cfg, c.clone(), r)?, psi0, &ctl)?
                        }
                        None => psi0.clone(),
                    };
                    let read =
                        Readout::of(&psi, Axis::Y, &spam, per_real, shot_seed(cfg, ci, k, r))?;
                    values.extend(read.mean_spin(cfg.n_atoms)?);
                }
                Ok(Some(values))
            })
            .collect();

        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (&t, p) in grid.iter().zip(points) {
            if let Some(v) = p? {
                times.push(t);
                samples.push(v);
            }
        }
        let skipped = grid.len() - times.len();
        let series = Samples { values: samples }.series(
            format!("sigma_y[{}]", delta_label(delta)),
            None,
            &times,
            &t_prime(&times, delta)?,
            cfg.shots,
        )?;
        let fit = fit_frequency(&series)?;
        fits.push((delta, fit, skipped));
        out.series.push(series);
    }

    let reference = fits
        .iter()
        .find(|(d, f, _)| *d == 0.0 && f.flag != FitFlag::Degenerate)
        .map(|(_, f, _)| f.frequency_mhz);
    let rows: Vec<Value> = fits
        .iter()
        .map(|(delta, fit, skipped)| {
            let (jx, jz) = xxz_weights(*delta).unwrap_or((f64::NAN, f64::NAN));
            json!({
                "delta": delta,
                "j_x_over_j": jx,
                "j_z_over_j": jz,
                "fit": fit_json(fit),
                "ratio_to_delta0": reference.map(|f0| fit.frequency_mhz / f0),
                "expected_ratio": expected_frequency_ratio(*delta),
                "skipped_infeasible_points": skipped,
            })
        })
        .collect();
    out.summary.insert("frequencies".into(), Value::Array(rows));
    Ok(out)
}

/// Sequence that waits `on` μs and then runs one cycle of length `tc`.
fn delayed_cycle(
    delta: f64,
    on: f64,
    tc: f64,
    cfg: &ScenarioConfig,
) -> Result<Option<PulseSequence>> {
    let cycle = match build_cycle(delta, tc, cfg.pulse_shape(1.0)?) {
        Ok(c) => c,
        Err(SimError::InvalidParameter(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut segments = vec![Segment::Gap { duration_us: on }];
    segments.extend(cycle.segments().iter().cloned());
    Ok(Some(PulseSequence::from_segments(segments)?))
}

/// `P_↑↓` from `|↑↓⟩`: free `H_XX`, a single engineered cycle filling the
/// switch window, then free `H_XX` again.
pub(super) fn run_switch(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(ScenarioId::XxXxxSwitch);
    let delta = cfg.deltas[0];
    let (on, off) = (cfg.switch_on_us, cfg.switch_off_us);
    let ctl = step_control(cfg);
    let spam = cfg.spam()?;
    let per_real = cfg.shots / cfg.realizations;
    let runs = realizations(cfg, PreparationTarget::Pattern(vec![true, false]))?;
    let grid = uniform_grid(cfg.t_stop_us, cfg.dt_us);
    let full = delayed_cycle(delta, on, off - on, cfg)?.ok_or_else(|| {
        SimError::Config("the switch window is shorter than the minimum t_c".into())
    })?;

    let points: Vec<Result<Option<Vec<f64>>>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let seq = if t <= on {
                PulseSequence::from_segments(vec![Segment::Gap { duration_us: t }])?
            } else if t <= off {
                match delayed_cycle(delta, on, t - on, cfg)? {
                    Some(s) => s,
                    None => return Ok(None),
                }
            } else if t >= full.duration_us() {
                let mut segments = full.segments().to_vec();
                segments.push(Segment::Gap {
                    duration_us: t - full.duration_us(),
                });
                PulseSequence::from_segments(segments)?
            } else {
                return Ok(None);
            };
            let mut values = Vec::new();
            for (r, (j, psi0)) in runs.iter().enumerate() {
                let psi = drive_to_end(j, &with_axis_noise(cfg, seq.clone(), r)?, psi0, &ctl)?;
                let read = Readout::of(&psi, Axis::Z, &spam, per_real, shot_seed(cfg, 0, k, r))?;
                values.extend(
                    read.values(|p| Ok(p[0b01]), |s| if s.bits == 0b01 { 1.0 } else { 0.0 })?,
                );
            }
            Ok(Some(values))
        })
        .collect();

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (&t, p) in grid.iter().zip(points) {
        if let Some(v) = p? {
            times.push(t);
            samples.push(v);
        }
    }
    let series =
        Samples { values: samples }.series("p_up_down", None, &times, &times, cfg.shots)?;

    let window = |lo: f64, hi: f64| -> Result<Option<FrequencyFit>> {
        let (t, y): (Vec<f64>, Vec<f64>) = series
            .times_us
            .iter()
            .zip(&series.mean)
            .filter(|(t, _)| **t > lo && **t <= hi)
            .map(|(t, y)| (*t, *y))
            .unzip();
        if t.len() < 6 {
            return Ok(None);
        }
        fit_damped_cosine(&t, &y).map(Some)
    };
    let before = window(f64::NEG_INFINITY, on)?;
    let during = window(on, off)?;
    let after = window(off, f64::INFINITY)?;
    let freq = |f: &Option<FrequencyFit>| f.as_ref().map(|f| f.frequency_mhz);
    let ratio = match (freq(&during), freq(&after)) {
        (Some(d), Some(a)) if a > 0.0 => Some(d / a),
        _ => None,
    };
    let (jx, _) = xxz_weights(delta)?;
    out.summary.insert("delta".into(), json!(delta));
    out.summary.insert(
        "fit_before".into(),
        before.as_ref().map_or(Value::Null, fit_json),
    );
    out.summary.insert(
        "fit_during".into(),
        during.as_ref().map_or(Value::Null, fit_json),
    );
    out.summary.insert(
        "fit_after".into(),
        after.as_ref().map_or(Value::Null, fit_json),
    );
    out.summary
        .insert("ratio_during_to_after".into(), json!(ratio));
    out.summary.insert("expected_ratio".into(), json!(jx));
    out.series.push(series);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::PulseKind;

    #[test]
    fn expected_ratios() {
        assert!((expected_frequency_ratio(1.8) - 0.4210526).abs() < 1e-6);
        assert_eq!(expected_frequency_ratio(1.0), 0.0);
        assert!((expected_frequency_ratio(2.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn delta_pulse_frequency_law() {
        let mut cfg = ScenarioConfig::defaults(ScenarioId::TwoAtomFreq);
        cfg.pulse = PulseKind::Delta;
        cfg.deltas = vec![0.0, 0.5, 2.0];
        cfg.p_false_positive = 0.0;
        cfg.p_false_negative = 0.0;
        let out = super::super::run(&cfg).unwrap();
        let rows = out.summary["frequencies"].as_array().unwrap();
        for row in &rows[1..] {
            let got = row["ratio_to_delta0"].as_f64().unwrap();
            let want = row["expected_ratio"].as_f64().unwrap();
            assert!((got / want - 1.0).abs() < 1e-3, "{row}");
        }
    }
}
