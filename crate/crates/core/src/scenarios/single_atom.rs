//! Single-atom decay under repeated cycles with tilted pulse axes.
//!
//! Without interactions each pulse is a plain rotation, so a realization is
//! a product of 2×2 gates.

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::Result;
use crate::pulse::{build_train, perturb_axes, Pulse};
use crate::rng;
use crate::state::{apply_gate_to_qubit, gate_mul, identity_gate, qubit_down, Gate};

use super::{
    delta_label, non_increasing, seed_for, shot_seed, t_prime, tidy, RunOutput, Samples,
    ScenarioConfig, ScenarioId,
};

/// Pulses making up the first `m` cycles of a train laid out like `pulses`.
fn cycle_pulses(pulses: &[Pulse], m: usize, delta2: bool) -> Vec<&Pulse> {
    if m == 0 || pulses.is_empty() {
        return Vec::new();
    }
    if delta2 {
        let mut out = vec![&pulses[0]];
        out.extend(&pulses[1..1 + 2 * m]);
        out.push(&pulses[pulses.len() - 1]);
        out
    } else {
        pulses[..4 * m].iter().collect()
    }
}

fn product(pulses: &[&Pulse]) -> Gate {
    pulses
        .iter()
        .fold(identity_gate(), |u, p| gate_mul(&p.ideal_rotation(), &u))
}

pub(super) fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(ScenarioId::SingleAtomCycles);
    let spam = cfg.spam()?;
    let per_real = cfg.shots / cfg.realizations;
    let shape = cfg.pulse_shape(1.0)?;
    let tc = cfg.tc_us();
    let mut rows = Vec::new();
    for (ci, &delta) in cfg.deltas.iter().enumerate() {
        let train = build_train(delta, tc, shape, cfg.n_cycles)?;
        let delta2 = train.delta2_mode();
        let extra = if delta2 { shape.window_us()? } else { 0.0 };
        let times: Vec<f64> = (0..=cfg.n_cycles)
            .map(|m| tidy(m as f64 * tc + if m > 0 { extra } else { 0.0 }))
            .collect();

        let per_realization: Vec<Result<Vec<Vec<f64>>>> = (0..cfg.realizations)
            .into_par_iter()
            .map(|r| {
                let seq = if cfg.axis_error_rad > 0.0 {
                    perturb_axes(&train, cfg.axis_error_rad, seed_for(cfg, r))?.0
                } else {
                    train.clone()
                };
                let pulses: Vec<Pulse> = seq.pulses().cloned().collect();
                let values = (0..=cfg.n_cycles)
                    .map(|m| {
                        let q = apply_gate_to_qubit(
                            &product(&cycle_pulses(&pulses, m, delta2)),
                            &qubit_down(),
                        );
                        let p_down = q[0].norm_sqr();
                        // probability of recording 0
                        let p_read = p_down * (1.0 - spam.p_false_negative)
                            + (1.0 - p_down) * spam.p_false_positive;
                        if per_real == 0 {
                            vec![p_read]
                        } else {
                            let mut g = rng::rng_for(shot_seed(cfg, ci, m, r), &[]);
                            (0..per_real)
                                .map(|_| f64::from(u8::from(g.random::<f64>() < p_read)))
                                .collect()
                        }
                    })
                    .collect();
                Ok(values)
            })
            .collect();

        let mut samples = Samples::new(times.len());
        for values in per_realization {
            for (m, v) in values?.into_iter().enumerate() {
                samples.extend(m, v);
            }
        }
        let s = samples.series(
            format!("p_down[{}]", delta_label(delta)),
            None,
            &times,
            &t_prime(&times, delta)?,
            cfg.shots,
        )?;
        rows.push(json!({
            "delta": delta,
            "p_down": s.mean,
            "sem": s.sem,
            "monotonic_decrease": non_increasing(&s.mean, 0.0),
        }));
        out.series.push(s);
    }
    out.summary.insert("curves".into(), Value::Array(rows));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::PulseShape;

    #[test]
    fn ideal_cycles_return_to_down() {
        for delta in [0.5, 1.0, 2.0] {
            let train = build_train(delta, 0.3, PulseShape::Delta, 5).unwrap();
            let pulses: Vec<Pulse> = train.pulses().cloned().collect();
            for m in 0..=5 {
                let q = apply_gate_to_qubit(
                    &product(&cycle_pulses(&pulses, m, train.delta2_mode())),
                    &qubit_down(),
                );
                assert!(q[0].norm_sqr() > 1.0 - 1e-12, "δ={delta} m={m}");
            }
        }
    }
}
