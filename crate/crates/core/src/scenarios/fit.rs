//! Damped-cosine frequency fits.
//!
//! The model is `y = A·exp(−γt)·cos(2πft + φ) + c`. A periodogram scan seeds
//! the frequency, Levenberg-Marquardt refines all five parameters.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::observe::ObservableSeries;

/// Periods the series must span for a trusted frequency.
pub const MIN_PERIODS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    Ok,
    /// No variation to fit; frequency reported as zero.
    Degenerate,
    /// Fewer than [`MIN_PERIODS`] periods inside the series.
    InsufficientCoverage,
    /// Levenberg-Marquardt did not converge.
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyFit {
    pub frequency_mhz: f64,
    pub uncertainty_mhz: f64,
    pub amplitude: f64,
    pub damping_per_us: f64,
    pub phase: f64,
    pub offset: f64,
    pub rms_residual: f64,
    pub flag: FitFlag,
}

pub fn fit_frequency(series: &ObservableSeries) -> Result<FrequencyFit> {
    fit_damped_cosine(&series.times_us, &series.mean)
}

fn model(p: &[f64; 5], t: f64) -> f64 {
    let [a, g, f, phi, c] = *p;
    a * (-g * t).exp() * (TAU * f * t + phi).cos() + c
}

fn jacobian_row(p: &[f64; 5], t: f64) -> [f64; 5] {
    let [a, g, f, phi, _] = *p;
    let e = (-g * t).exp();
    let arg = TAU * f * t + phi;
    let (s, c) = arg.sin_cos();
    [e * c, -t * a * e * c, -a * e * s * TAU * t, -a * e * s, 1.0]
}

fn rss(p: &[f64; 5], t: &[f64], y: &[f64]) -> f64 {
    t.iter()
        .zip(y)
        .map(|(&ti, &yi)| (yi - model(p, ti)).powi(2))
        .sum()
}

/// Linear least squares of `y` on `(cos, sin, 1)` at frequency `f`.
fn linear_fit(t: &[f64], y: &[f64], f: f64) -> Option<(f64, [f64; 3])> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (TAU * f * ti).sin_cos();
        let row = Vector3::new(c, s, 1.0);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let x = ata.cholesky()?.solve(&aty);
    let r = t.iter().zip(y).map(|(&ti, &yi)| {
        let (s, c) = (TAU * f * ti).sin_cos();
        (yi - x[0] * c - x[1] * s - x[2]).powi(2)
    });
    Some((r.sum(), [x[0], x[1], x[2]]))
}

pub fn fit_damped_cosine(t: &[f64], y: &[f64]) -> Result<FrequencyFit> {
    if t.len() != y.len() {
        return Err(SimError::DimensionMismatch {
            expected: t.len(),
            got: y.len(),
        });
    }
    if t.len() < 6 {
        return Err(SimError::param(format!(
            "a frequency fit needs at least 6 points, got {}",
            t.len()
        )));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(SimError::param("fit input must be finite"));
    }
    let n = t.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let spread = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let span = t.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - t.iter().copied().fold(f64::INFINITY, f64::min);
    if spread <= 1e-9 * mean.abs().max(1.0) || span <= 0.0 {
        return Ok(FrequencyFit {
            frequency_mhz: 0.0,
            uncertainty_mhz: 0.0,
            amplitude: 0.0,
            damping_per_us: 0.0,
            phase: 0.0,
            offset: mean,
            rms_residual: spread,
            flag: FitFlag::Degenerate,
        });
    }

    // periodogram seed up to the Nyquist frequency of the mean spacing
    let nyquist = 0.5 * (t.len() - 1) as f64 / span;
    let df = 0.05 / span;
    let mut best = (f64::INFINITY, 0.0, [0.0; 3]);
    let mut f = df;
    while f <= nyquist {
        if let Some((r, x)) = linear_fit(t, y, f) {
            if r < best.0 {
                best = (r, f, x);
            }
        }
        f += df;
    }
    let (_, f0, [ca, sa, c0]) = best;
    let mut p = [ca.hypot(sa), 0.0, f0, (-sa).atan2(ca), c0];

    // Levenberg-Marquardt
    let mut lambda = 1e-3;
    let mut cost = rss(&p, t, y);
    let mut converged = false;
    for _ in 0..200 {
        let mut jtj = DMatrix::<f64>::zeros(5, 5);
        let mut jtr = DVector::<f64>::zeros(5);
        for (&ti, &yi) in t.iter().zip(y) {
            let row = jacobian_row(&p, ti);
            let r = yi - model(&p, ti);
            for a in 0..5 {
                jtr[a] += row[a] * r;
                for b in 0..5 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut m = jtj.clone();
            for d in 0..5 {
                m[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = m.cholesky().map(|ch| ch.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: [f64; 5] = std::array::from_fn(|k| p[k] + step[k]);
            let c = rss(&trial, t, y);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(1e-300);
                p = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-12 || cost < 1e-28 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step left: a minimum to numerical precision
            converged = true;
        }
        if converged {
            break;
        }
    }

    if p[2] < 0.0 {
        p[2] = -p[2];
        p[3] = -p[3];
    }
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[3] += std::f64::consts::PI;
    }
    p[3] = p[3].rem_euclid(TAU);

    let dof = (t.len() as f64 - 5.0).max(1.0);
    let s2 = cost / dof;
    let mut jtj = DMatrix::<f64>::zeros(5, 5);
    for &ti in t {
        let row = jacobian_row(&p, ti);
        for a in 0..5 {
            for b in 0..5 {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    let uncertainty = jtj
        .try_inverse()
        .map_or(f64::INFINITY, |inv| (s2 * inv[(2, 2)]).max(0.0).sqrt());

    let flag = if !converged {
        FitFlag::NotConverged
    } else if p[2] * span < MIN_PERIODS {
        FitFlag::InsufficientCoverage
    } else {
        FitFlag::Ok
    };
    Ok(FrequencyFit {
        frequency_mhz: p[2],
        uncertainty_mhz: uncertainty,
        amplitude: p[0],
        damping_per_us: p[1],
        phase: p[3],
        offset: p[4],
        rms_residual: (cost / n).sqrt(),
        flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::xxz_weights;
    use crate::propagate::{two_atom_analytic, TwoAtomInitial};

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn recovers_pure_cosine() {
        let t = grid(200, 0.02);
        let y: Vec<f64> = t.iter().map(|&x| (TAU * 1.86 * x).cos()).collect();
        let fit = fit_damped_cosine(&t, &y).unwrap();
        assert_eq!(fit.flag, FitFlag::Ok);
        assert!((fit.frequency_mhz - 1.86).abs() < 1e-3, "{fit:?}");
        assert!(fit.rms_residual < 1e-8);
    }

    #[test]
    fn recovers_damped_shifted_cosine() {
        let t = grid(300, 0.03);
        let y: Vec<f64> = t
            .iter()
            .map(|&x| 0.45 * (-0.3 * x).exp() * (TAU * 0.73 * x + 1.1).cos() + 0.2)
            .collect();
        let fit = fit_damped_cosine(&t, &y).unwrap();
        assert!((fit.frequency_mhz - 0.73).abs() < 1e-6);
        assert!((fit.damping_per_us - 0.3).abs() < 1e-5);
        assert!((fit.offset - 0.2).abs() < 1e-6);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let t = grid(50, 0.1);
        let fit = fit_damped_cosine(&t, &vec![0.7; 50]).unwrap();
        assert_eq!(fit.flag, FitFlag::Degenerate);
        assert_eq!(fit.frequency_mhz, 0.0);
    }

    #[test]
    fn short_series_is_flagged() {
        let t = grid(40, 0.01);
        let y: Vec<f64> = t.iter().map(|&x| (TAU * 2.0 * x).cos()).collect();
        assert_eq!(
            fit_damped_cosine(&t, &y).unwrap().flag,
            FitFlag::InsufficientCoverage
        );
        assert!(fit_damped_cosine(&t[..4], &y[..4]).is_err());
    }

    #[test]
    fn two_atom_ratio_at_delta_1_8() {
        let sigma_y = |delta: f64| -> Vec<f64> {
            let (wx, wz) = xxz_weights(delta).unwrap();
            grid(400, 0.025)
                .iter()
                .map(|&t| {
                    two_atom_analytic(0.465 * wx, 0.465 * wz, TwoAtomInitial::PlusY, t)
                        .unwrap()
                        .sigma_y
                })
                .collect()
        };
        let t = grid(400, 0.025);
        let f0 = fit_damped_cosine(&t, &sigma_y(0.0)).unwrap().frequency_mhz;
        let f = fit_damped_cosine(&t, &sigma_y(1.8)).unwrap().frequency_mhz;
        // oracle: 2|1−δ|/(2+δ)
        assert!((f / f0 - 0.421).abs() < 0.01, "{}", f / f0);
        assert!((f / f0 - 1.6 / 3.8).abs() < 1e-6);
    }
}
