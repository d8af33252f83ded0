//! Matrix-free propagation by truncated Taylor series with sub-stepping.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Result, SimError};
use crate::hamiltonian::{CompiledModel, SpinModel};

/// Largest `2π·‖H‖·dt` handled in one sub-step.
const MAX_PHASE_PER_STEP: f64 = 2.0;
const TERM_TOL: f64 = 1e-15;
const MAX_TERMS: usize = 80;

#[derive(Debug, Clone)]
pub struct Taylor {
    model: CompiledModel,
    norm: f64,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl Taylor {
    pub fn new(model: &SpinModel) -> Self {
        let model = model.compile();
        let norm = model.norm_bound();
        Self { model, norm }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Estimated multiply-adds for one propagation over `t` μs.
    pub fn cost(&self, t: f64) -> usize {
        let phase = 2.0 * PI * self.norm * t.abs();
        let steps = (phase / MAX_PHASE_PER_STEP).ceil().max(1.0);
        let terms = steps * 12.0 + phase * 1.5;
        (terms as usize).max(1) * self.model.nnz().max(self.dim())
    }

    /// `exp(−i·2π·H·t)·psi` in place.
    pub fn propagate(&self, psi: &mut [C64], t: f64) -> Result<()> {
        if t == 0.0 || self.norm == 0.0 {
            return Ok(());
        }
        let phase = 2.0 * PI * self.norm * t.abs();
        let steps = (phase / MAX_PHASE_PER_STEP).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        let mut term = vec![C64::new(0.0, 0.0); psi.len()];
        let mut next = vec![C64::new(0.0, 0.0); psi.len()];
        let scale = C64::new(0.0, -2.0 * PI * dt);
        for _ in 0..steps {
            term.copy_from_slice(psi);
            let reference = norm(psi);
            let mut converged = false;
            for k in 1..=MAX_TERMS {
                self.model.apply(&term, &mut next);
                let f = scale / k as f64;
                for (tn, n) in term.iter_mut().zip(&next) {
                    *tn = n * f;
                }
                for (p, tn) in psi.iter_mut().zip(&term) {
                    *p += tn;
                }
                if norm(&term) <= TERM_TOL * reference {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(SimError::Numerical("Taylor series did not converge".into()));
            }
        }
        Ok(())
    }
}
