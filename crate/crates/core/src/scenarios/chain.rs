//! Domain-wall melting on chains and rings: per-site magnetization, spin-flip
//! counts, domain-wall probabilities and the width of the melting front.

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::hamiltonian::xxz_model;
use crate::measure::{prepare, PreparationSpec, PreparationTarget};
use crate::observe::{
    classify, domain_wall_probabilities_dist, magnetization_z_dist, n_flip_dist, n_flip_shot,
    normalized_time, profile_variance, profile_width, ChainBoundary, DomainWallSpec,
    ObservableSeries, WallClass,
};
use crate::propagate::{drive_cycle_samples, evolve_model_with, Engine};
use crate::pulse::{build_train, perturb_axes};
use crate::state::{Axis, StateVector};

use super::{
    boundary, delta_label, exchange_coupling, hamiltonian_couplings, ideal_geometry, nearest,
    non_increasing, seed_for, shot_seed, step_control, tidy, uniform_grid, DensityMap, Dynamics,
    Readout, RunOutput, Samples, ScenarioConfig, ScenarioId,
};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Xxz,
    Driven(f64),
}

#[derive(Debug, Clone)]
struct Curve {
    delta: f64,
    kind: Kind,
    label: String,
}

fn curves(cfg: &ScenarioConfig) -> Vec<Curve> {
    let mut out = Vec::new();
    for &delta in &cfg.deltas {
        let d = delta_label(delta);
        if cfg.hamiltonian == Dynamics::Xxz || cfg.scenario == ScenarioId::FinitePulse {
            out.push(Curve {
                delta,
                kind: Kind::Xxz,
                label: d.clone(),
            });
        }
        if cfg.hamiltonian == Dynamics::Driven {
            for &f in &cfg.rabi_factors {
                out.push(Curve {
                    delta,
                    kind: Kind::Driven(f),
                    label: format!("{d},driven,rabi_x{f}"),
                });
            }
        }
    }
    out
}

/// `[quantity][sample]`: site magnetizations, then N_flip, P_ini, P_other.
fn readings(read: &Readout, spec: &DomainWallSpec) -> Result<Vec<Vec<f64>>> {
    let n = spec.n_atoms;
    match read {
        Readout::Exact(p) => {
            let mut q: Vec<Vec<f64>> = magnetization_z_dist(p, n)?
                .into_iter()
                .map(|v| vec![v])
                .collect();
            q.push(vec![n_flip_dist(p, n, spec.boundary)?]);
            let (ini, other) = domain_wall_probabilities_dist(p, spec)?;
            q.push(vec![ini]);
            q.push(vec![other]);
            Ok(q)
        }
        Readout::Shots(shots) => {
            let mut q = vec![Vec::with_capacity(shots.len()); n + 3];
            for s in shots {
                let up: Vec<bool> = (0..n).map(|i| s.is_up(i)).collect();
                for (i, &u) in up.iter().enumerate() {
                    q[i].push(if u { 1.0 } else { -1.0 });
                }
                q[n].push(n_flip_shot(s, spec.boundary) as f64);
                let class = classify(&up, spec);
                q[n + 1].push(f64::from(u8::from(class == WallClass::Initial)));
                q[n + 2].push(f64::from(u8::from(class == WallClass::Other)));
            }
            Ok(q)
        }
    }
}

type Realization = (Vec<f64>, Vec<Vec<Vec<f64>>>);

/// One realization of one curve: actual sample times and readings per time.
fn realize(
    cfg: &ScenarioConfig,
    curve: &Curve,
    ci: usize,
    r: usize,
    spec: &DomainWallSpec,
) -> Result<Realization> {
    let n = cfg.n_atoms;
    let g = ideal_geometry(cfg)?;
    let j = hamiltonian_couplings(cfg, &g, r)?;
    let seed = seed_for(cfg, r);
    let prep = PreparationSpec::new(
        n,
        PreparationTarget::Pattern(spec.initial_bits()),
        cfg.p_prep,
    )?;
    let psi0 = prepare(&prep, seed)?;
    let spam = cfg.spam()?;
    let per_real = cfg.shots / cfg.realizations;
    let grid: Vec<f64> = uniform_grid(cfg.t_prime_stop, cfg.dt_prime)
        .iter()
        .map(|tp| tidy(tp * (2.0 + curve.delta) / 2.0))
        .collect();

    let mut states: Vec<(f64, Vec<num_complex::Complex64>)> = Vec::with_capacity(grid.len());
    match curve.kind {
        Kind::Xxz => {
            let model = xxz_model(&j, curve.delta)?;
            evolve_model_with(&model, psi0.amplitudes(), &grid, Engine::Auto, |k, a| {
                states.push((grid[k], a.to_vec()))
            })?;
        }
        Kind::Driven(factor) => {
            let tc = cfg.tc_us();
            let mut cycles: Vec<usize> = grid.iter().map(|t| (t / tc).round() as usize).collect();
            cycles.dedup();
            let last = cycles.last().copied().unwrap_or(0).max(1);
            let train = build_train(curve.delta, tc, cfg.pulse_shape(factor)?, last)?;
            let seq = if cfg.axis_error_rad > 0.0 {
                perturb_axes(&train, cfg.axis_error_rad, seed)?.0
            } else {
                train
            };
            drive_cycle_samples(
                &j,
                &seq,
                psi0.amplitudes(),
                &cycles,
                &step_control(cfg),
                |_, t, a| states.push((tidy(t), a.to_vec())),
            )?;
        }
    }

    let mut times = Vec::with_capacity(states.len());
    let mut values = Vec::with_capacity(states.len());
    for (k, (t, amps)) in states.into_iter().enumerate() {
        let psi = StateVector::from_amplitudes(n, amps)?;
        let read = Readout::of(&psi, Axis::Z, &spam, per_real, shot_seed(cfg, ci, k, r))?;
        times.push(t);
        values.push(readings(&read, spec)?);
    }
    Ok((times, values))
}

/// Linear interpolation of `(x, y)` at `at`, clamped to the ends.
fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    match x.iter().position(|&v| v >= at) {
        Some(0) => y[0],
        Some(i) => {
            let w = (at - x[i - 1]) / (x[i] - x[i - 1]);
            y[i - 1] + w * (y[i] - y[i - 1])
        }
        None => *y.last().expect("non-empty series"),
    }
}

struct CurveResult {
    curve: Curve,
    sz: Vec<ObservableSeries>,
    n_flip: ObservableSeries,
    p_ini: ObservableSeries,
    p_other: ObservableSeries,
    xi: ObservableSeries,
    variance: ObservableSeries,
    front_flags: Vec<bool>,
}

pub(super) fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg.scenario);
    let n = cfg.n_atoms;
    let bnd = boundary(cfg);
    let mut spec = DomainWallSpec::new(n, cfg.initial_start, cfg.initial_len, bnd)?
        .with_sizes(cfg.dw_sizes.clone())?;
    spec.ini_radius = cfg.dw_ini_radius;
    let initial: Vec<f64> = spec
        .initial_bits()
        .iter()
        .map(|&u| if u { 1.0 } else { -1.0 })
        .collect();
    let j_exch = exchange_coupling(cfg)?;

    let mut results = Vec::new();
    for (ci, curve) in curves(cfg).into_iter().enumerate() {
        let runs: Vec<Result<Realization>> = (0..cfg.realizations)
            .into_par_iter()
            .map(|r| realize(cfg, &curve, ci, r, &spec))
            .collect();
        let mut times = Vec::new();
        let mut quantities: Vec<Samples> = Vec::new();
        for run in runs {
            let (t, values) = run?;
            if quantities.is_empty() {
                times = t;
                quantities = vec![Samples::new(times.len()); n + 3];
            }
            for (k, per_q) in values.into_iter().enumerate() {
                for (q, v) in per_q.into_iter().enumerate() {
                    quantities[q].extend(k, v);
                }
            }
        }
        let tp: Vec<f64> = times
            .iter()
            .map(|&t| normalized_time(t, curve.delta, 1.0))
            .collect::<Result<_>>()?;
        let name = |obs: &str| format!("{obs}[{}]", curve.label);
        let sz = (0..n)
            .map(|i| quantities[i].series(name("sigma_z"), Some(i), &times, &tp, cfg.shots))
            .collect::<Result<Vec<_>>>()?;
        let n_flip = quantities[n].series(name("n_flip"), None, &times, &tp, cfg.shots)?;
        let p_ini = quantities[n + 1].series(name("p_dw_ini"), None, &times, &tp, cfg.shots)?;
        let p_other = quantities[n + 2].series(name("p_dw_other"), None, &times, &tp, cfg.shots)?;

        let profiles: Vec<Vec<f64>> = (0..times.len())
            .map(|k| sz.iter().map(|s| s.mean[k]).collect())
            .collect();
        // the measured first profile carries the readout and preparation bias
        let reference: Vec<f64> = profiles[0]
            .iter()
            .zip(&initial)
            .map(|(m, i)| if m * i > 0.0 { *m } else { *i })
            .collect();
        let mut xi = Vec::new();
        let mut flags = Vec::new();
        for p in &profiles {
            let w = profile_width(p, &reference, cfg.width_threshold, bnd)?;
            xi.push(w.xi);
            flags.push(w.flag.is_some());
        }
        let variance: Vec<f64> = profiles.iter().map(|p| profile_variance(p)).collect();
        out.maps.push(DensityMap {
            label: name("sigma_z"),
            times_us: times.clone(),
            t_prime: tp.clone(),
            values: profiles,
        });
        results.push(CurveResult {
            xi: ObservableSeries::exact(name("xi"), None, times.clone(), tp.clone(), xi)?,
            variance: ObservableSeries::exact(
                name("profile_variance"),
                None,
                times.clone(),
                tp.clone(),
                variance,
            )?,
            front_flags: flags,
            curve,
            sz,
            n_flip,
            p_ini,
            p_other,
        });
    }

    let mut rows = Vec::new();
    let mut long_time = Vec::new();
    for res in &results {
        let tp = &res.xi.t_prime;
        let mut row = Map::new();
        row.insert("label".into(), json!(res.curve.label));
        row.insert("delta".into(), json!(res.curve.delta));
        row.insert("n_flip_initial".into(), json!(res.n_flip.mean[0]));
        let tail = tp.len() - tp.len().div_ceil(4);
        let (nf_mean, _) = crate::observe::mean_sem(&res.n_flip.mean[tail..]);
        row.insert("n_flip_long_time".into(), json!(nf_mean));
        if res.curve.kind == Kind::Xxz {
            long_time.push(nf_mean);
        }

        // front against ξ = 2J·t′ with J as an angular frequency
        let cone: Vec<f64> = tp
            .iter()
            .map(|t| 4.0 * std::f64::consts::PI * j_exch * t)
            .collect();
        let dev = tp
            .iter()
            .enumerate()
            .filter(|&(k, &t)| t <= 1.0 + 1e-9 && !res.front_flags[k])
            .map(|(k, _)| (res.xi.mean[k] - cone[k]).abs())
            .fold(0.0, f64::max);
        row.insert(
            "light_cone_sites_per_t_prime".into(),
            json!(4.0 * std::f64::consts::PI * j_exch),
        );
        row.insert("front_max_deviation_t_prime_le_1".into(), json!(dev));

        let var0 = res.variance.mean[0];
        if let Some(k3) = nearest(tp, 3.0).filter(|&k| (tp[k] - 3.0).abs() < 0.5) {
            row.insert(
                "variance_ratio_at_t_prime_3".into(),
                json!(res.variance.mean[k3] / var0),
            );
        }
        if let (Some(a), Some(b)) = (nearest(tp, 1.1), nearest(tp, 2.0)) {
            let change = res
                .sz
                .iter()
                .map(|s| (s.mean[b] - s.mean[a]).abs())
                .fold(0.0, f64::max);
            row.insert("max_site_change_t_prime_1_1_to_2_0".into(), json!(change));
        }
        if let Kind::Driven(_) = res.curve.kind {
            if let Some(reference) = results
                .iter()
                .find(|o| o.curve.kind == Kind::Xxz && o.curve.delta == res.curve.delta)
            {
                let max_diff = |a: &ObservableSeries, b: &ObservableSeries| {
                    a.t_prime
                        .iter()
                        .zip(&a.mean)
                        .map(|(&t, &v)| (v - interpolate(&b.t_prime, &b.mean, t)).abs())
                        .fold(0.0, f64::max)
                };
                row.insert(
                    "max_abs_diff_p_dw_ini".into(),
                    json!(max_diff(&res.p_ini, &reference.p_ini)),
                );
                row.insert(
                    "max_abs_diff_p_dw_other".into(),
                    json!(max_diff(&res.p_other, &reference.p_other)),
                );
            }
        }
        rows.push(Value::Object(row));
    }
    out.summary.insert("curves".into(), Value::Array(rows));
    out.summary
        .insert("exchange_coupling_mhz".into(), json!(j_exch));
    out.summary.insert(
        "n_flip_fully_random".into(),
        json!(bnd.bonds(n).len() as f64 / 2.0),
    );
    if cfg.scenario == ScenarioId::NflipPbc {
        out.summary.insert(
            "n_flip_long_time_non_increasing_in_delta".into(),
            json!(non_increasing(&long_time, 0.0)),
        );
    }
    if bnd == ChainBoundary::Periodic {
        out.summary.insert("boundary".into(), json!("periodic"));
    } else {
        out.summary.insert("boundary".into(), json!("open"));
    }

    for res in results {
        out.series.extend(res.sz);
        out.series.push(res.n_flip);
        out.series.push(res.p_ini);
        out.series.push(res.p_other);
        out.series.push(res.xi);
        out.series.push(res.variance);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_clamps() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 2.0, 0.0];
        assert_eq!(interpolate(&x, &y, -1.0), 0.0);
        assert_eq!(interpolate(&x, &y, 0.5), 1.0);
        assert_eq!(interpolate(&x, &y, 5.0), 0.0);
    }
}
