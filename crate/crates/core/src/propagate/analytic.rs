//! Closed-form two-atom XXZ dynamics.
//!
//! For `H = J_x(σˣσˣ + σʸσʸ) + J_z σᶻσᶻ` the eigenvalues are `J_z` on
//! `|↑↑⟩, |↓↓⟩` and `−J_z ± 2J_x` on `|±⟩ = (|↑↓⟩ ± |↓↑⟩)/√2`.

use std::f64::consts::PI;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoAtomInitial {
    /// `|→→⟩_y`, both atoms along +y.
    PlusY,
    /// `|↑↓⟩`.
    UpDown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoAtomObservables {
    /// Per-atom `⟨σʸ⟩`.
    pub sigma_y: f64,
    /// Probability of `|↑↓⟩`.
    pub p_up_down: f64,
    /// Per-atom `⟨σᶻ⟩` of the first atom.
    pub sigma_z_first: f64,
}

pub fn two_atom_analytic(
    jx: f64,
    jz: f64,
    initial: TwoAtomInitial,
    t: f64,
) -> Result<TwoAtomObservables> {
    if !(jx.is_finite() && jz.is_finite() && t.is_finite()) {
        return Err(SimError::param("couplings and time must be finite"));
    }
    Ok(match initial {
        // beat between J_z and −J_z + 2J_x
        TwoAtomInitial::PlusY => TwoAtomObservables {
            sigma_y: (2.0 * PI * 2.0 * (jx - jz) * t).cos(),
            p_up_down: 0.25,
            sigma_z_first: 0.0,
        },
        // beat between the |±⟩ energies, split by 4J_x
        TwoAtomInitial::UpDown => {
            let c = (2.0 * PI * 4.0 * jx * t).cos();
            TwoAtomObservables {
                sigma_y: 0.0,
                p_up_down: 0.5 * (1.0 + c),
                sigma_z_first: c,
            }
        }
    })
}

/// Oscillation frequency (MHz) of the per-atom `⟨σʸ⟩` from `|→→⟩_y`.
pub fn two_atom_sigma_y_frequency(jx: f64, jz: f64) -> f64 {
    2.0 * (jx - jz).abs()
}
