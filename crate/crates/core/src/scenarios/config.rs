//! Scenario configuration files.
//!
//! A configuration is a flat JSON object. Units are part of the key names.
//! Keys starting with `//` are comments and ignored; any other unknown key
//! is an error. Missing keys take the per-scenario defaults below.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Result, SimError};
use crate::hamiltonian::DENSE_CAP;
use crate::measure::SpamModel;
use crate::pulse::{build_cycle, PulseShape};
use crate::state::MAX_STATE_ATOMS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    TwoAtomFreq,
    XxXxxSwitch,
    Freeze2d,
    Dw1d,
    NflipPbc,
    SingleAtomCycles,
    FinitePulse,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 7] = [
        ScenarioId::TwoAtomFreq,
        ScenarioId::XxXxxSwitch,
        ScenarioId::Freeze2d,
        ScenarioId::Dw1d,
        ScenarioId::NflipPbc,
        ScenarioId::SingleAtomCycles,
        ScenarioId::FinitePulse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::TwoAtomFreq => "two_atom_freq",
            ScenarioId::XxXxxSwitch => "xx_xxx_switch",
            ScenarioId::Freeze2d => "freeze_2d",
            ScenarioId::Dw1d => "dw_1d",
            ScenarioId::NflipPbc => "nflip_pbc",
            ScenarioId::SingleAtomCycles => "single_atom_cycles",
            ScenarioId::FinitePulse => "finite_pulse",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioId::TwoAtomFreq => {
                "two atoms from |→→⟩_y, one cycle of duration t_c per point; ⟨σʸ⟩ frequency vs δ"
            }
            ScenarioId::XxXxxSwitch => {
                "two atoms from |↑↓⟩; H_XX, one XXX cycle in a window, H_XX again; P_↑↓"
            }
            ScenarioId::Freeze2d => {
                "square array from |→…→⟩_y; driven XXX then H_XX, cluster expansion; per-atom ⟨σʸ⟩"
            }
            ScenarioId::Dw1d => {
                "10-atom chain or ring from a domain wall; ⟨σᶻ_i⟩ maps, P_DW and front width vs t′"
            }
            ScenarioId::NflipPbc => "10-atom ring from a domain wall; N_flip vs t′ for several δ",
            ScenarioId::SingleAtomCycles => {
                "single atom through XXX cycles with axis errors; P_↓ per cycle"
            }
            ScenarioId::FinitePulse => {
                "domain-wall P_DW under H_driven at two Rabi frequencies vs ideal H_XXX"
            }
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| SimError::Config(format!("unknown scenario '{name}'")))
    }
}

/// How the `j_mhz` value maps onto the Hamiltonian coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JConvention {
    /// `j_mhz` is the exchange rate: two atoms swap `|↑↓⟩ ↔ |↓↑⟩` at `2J`;
    /// the pair coefficient in front of `σˣσˣ + σʸσʸ` is `J/2`.
    Exchange,
    /// `j_mhz` is the pair coefficient itself.
    Literal,
}

impl JConvention {
    pub fn factor(self) -> f64 {
        match self {
            JConvention::Exchange => 0.5,
            JConvention::Literal => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryChoice {
    Chain,
    Ring,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRange {
    /// All pairs, `1/r³`.
    Dipolar,
    /// Nearest-neighbour bonds only.
    NearestNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Delta,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// Ideal average Hamiltonian.
    Xxz,
    /// Pulse-by-pulse drive.
    Driven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezeMode {
    Mace,
    Exact,
}

/// Every key a configuration file may set.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    seed: Option<u64>,
    shots: Option<usize>,
    realizations: Option<usize>,
    j_convention: Option<JConvention>,
    geometry: Option<GeometryChoice>,
    n_atoms: Option<usize>,
    rows: Option<usize>,
    cols: Option<usize>,
    spacing_um: Option<f64>,
    j_mhz: Option<f64>,
    c3_mhz_um3: Option<f64>,
    couplings: Option<CouplingRange>,
    deltas: Option<Vec<f64>>,
    tc_ns: Option<f64>,
    pulse: Option<PulseKind>,
    pulse_width_ns: Option<f64>,
    mean_rabi_mhz: Option<f64>,
    rabi_factors: Option<Vec<f64>>,
    hamiltonian: Option<Dynamics>,
    drive_us: Option<f64>,
    switch_on_us: Option<f64>,
    switch_off_us: Option<f64>,
    p_false_positive: Option<f64>,
    p_false_negative: Option<f64>,
    p_prep: Option<f64>,
    axis_error_rad: Option<f64>,
    jitter_um: Option<f64>,
    t_stop_us: Option<f64>,
    dt_us: Option<f64>,
    t_prime_stop: Option<f64>,
    dt_prime: Option<f64>,
    n_cycles: Option<usize>,
    mode: Option<FreezeMode>,
    cluster_size: Option<usize>,
    initial_start: Option<usize>,
    initial_len: Option<usize>,
    dw_sizes: Option<Vec<usize>>,
    dw_ini_radius: Option<f64>,
    width_threshold: Option<f64>,
    step_tol: Option<f64>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub seed: u64,
    /// Readout shots per curve point; 0 evaluates expectation values exactly.
    pub shots: usize,
    /// Independent draws of the stochastic errors (preparation, positions,
    /// pulse axes) averaged per curve point.
    pub realizations: usize,
    pub j_convention: JConvention,
    pub geometry: GeometryChoice,
    pub n_atoms: usize,
    pub rows: usize,
    pub cols: usize,
    pub spacing_um: f64,
    /// Nearest-neighbour coupling; `None` when `c3_mhz_um3` is given.
    pub j_mhz: Option<f64>,
    pub c3_mhz_um3: Option<f64>,
    pub couplings: CouplingRange,
    pub deltas: Vec<f64>,
    pub tc_ns: f64,
    pub pulse: PulseKind,
    pub pulse_width_ns: Option<f64>,
    pub mean_rabi_mhz: Option<f64>,
    pub rabi_factors: Vec<f64>,
    pub hamiltonian: Dynamics,
    pub drive_us: f64,
    pub switch_on_us: f64,
    pub switch_off_us: f64,
    pub p_false_positive: f64,
    pub p_false_negative: f64,
    pub p_prep: f64,
    pub axis_error_rad: f64,
    pub jitter_um: f64,
    pub t_stop_us: f64,
    pub dt_us: f64,
    pub t_prime_stop: f64,
    pub dt_prime: f64,
    pub n_cycles: usize,
    pub mode: FreezeMode,
    pub cluster_size: usize,
    pub initial_start: usize,
    pub initial_len: usize,
    pub dw_sizes: Vec<usize>,
    pub dw_ini_radius: f64,
    pub width_threshold: f64,
    pub step_tol: f64,
}

impl ScenarioConfig {
    /// Built-in defaults of a scenario.
    pub fn defaults(id: ScenarioId) -> Self {
        let base = ScenarioConfig {
            scenario: id,
            seed: 1,
            shots: 0,
            realizations: 1,
            j_convention: JConvention::Exchange,
            geometry: GeometryChoice::Chain,
            n_atoms: 10,
            rows: 4,
            cols: 8,
            spacing_um: 19.0,
            j_mhz: Some(0.27),
            c3_mhz_um3: None,
            couplings: CouplingRange::Dipolar,
            deltas: vec![1.0],
            tc_ns: 300.0,
            pulse: PulseKind::Gaussian,
            pulse_width_ns: Some(16.8),
            mean_rabi_mhz: None,
            rabi_factors: vec![1.0],
            hamiltonian: Dynamics::Xxz,
            drive_us: 3.0,
            switch_on_us: 0.8,
            switch_off_us: 1.7,
            p_false_positive: 0.05,
            p_false_negative: 0.035,
            p_prep: 0.0,
            axis_error_rad: 0.0,
            jitter_um: 0.0,
            t_stop_us: 6.0,
            dt_us: 0.3,
            t_prime_stop: 4.0,
            dt_prime: 0.1,
            n_cycles: 10,
            mode: FreezeMode::Mace,
            cluster_size: 12,
            initial_start: 0,
            initial_len: 5,
            dw_sizes: vec![4, 5, 6],
            dw_ini_radius: 1.0,
            width_threshold: 0.15,
            step_tol: 1e-8,
        };
        match id {
            ScenarioId::TwoAtomFreq => ScenarioConfig {
                n_atoms: 2,
                spacing_um: 30.0,
                j_mhz: Some(0.93),
                deltas: vec![0.0, 0.5, 1.0, 1.33, 1.8, 2.0],
                pulse_width_ns: None,
                mean_rabi_mhz: Some(7.2),
                t_stop_us: 10.0,
                dt_us: 0.05,
                ..base
            },
            ScenarioId::XxXxxSwitch => ScenarioConfig {
                n_atoms: 2,
                spacing_um: 30.0,
                j_mhz: Some(0.93),
                deltas: vec![1.0],
                pulse_width_ns: None,
                mean_rabi_mhz: Some(7.2),
                t_stop_us: 4.0,
                dt_us: 0.02,
                ..base
            },
            ScenarioId::Freeze2d => ScenarioConfig {
                geometry: GeometryChoice::Square,
                spacing_um: 27.0,
                j_mhz: Some(0.133),
                hamiltonian: Dynamics::Driven,
                axis_error_rad: 0.06,
                realizations: 4,
                ..base
            },
            ScenarioId::Dw1d => ScenarioConfig {
                deltas: vec![0.0, 1.0, 2.0],
                p_prep: 0.05,
                jitter_um: 1.0,
                realizations: 20,
                dt_prime: 0.05,
                ..base
            },
            ScenarioId::NflipPbc => ScenarioConfig {
                geometry: GeometryChoice::Ring,
                deltas: vec![0.5, 1.0, 1.5, 2.0],
                p_prep: 0.05,
                jitter_um: 1.0,
                realizations: 20,
                shots: 1000,
                ..base
            },
            ScenarioId::SingleAtomCycles => ScenarioConfig {
                n_atoms: 1,
                axis_error_rad: 0.06,
                realizations: 10_000,
                hamiltonian: Dynamics::Driven,
                ..base
            },
            ScenarioId::FinitePulse => ScenarioConfig {
                geometry: GeometryChoice::Ring,
                hamiltonian: Dynamics::Driven,
                rabi_factors: vec![1.0, 4.0],
                p_false_positive: 0.0,
                p_false_negative: 0.0,
                t_prime_stop: 6.0,
                dt_prime: 0.2,
                ..base
            },
        }
    }

    /// Parses a configuration file and applies defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| SimError::Config(format!("invalid JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(SimError::Config(
                "configuration must be a JSON object".into(),
            ));
        };
        let stripped: Map<String, Value> = map
            .into_iter()
            .filter(|(k, _)| !k.starts_with("//"))
            .collect();
        let raw: RawConfig = serde_json::from_value(Value::Object(stripped))
            .map_err(|e| SimError::Config(e.to_string()))?;
        let cfg = Self::from_raw(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let id = ScenarioId::parse(&raw.scenario)?;
        let mut c = Self::defaults(id);
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = raw.$field { c.$field = v; } )* };
        }
        take!(
            seed,
            shots,
            realizations,
            j_convention,
            geometry,
            n_atoms,
            rows,
            cols,
            spacing_um,
            couplings,
            deltas,
            tc_ns,
            pulse,
            rabi_factors,
            hamiltonian,
            drive_us,
            switch_on_us,
            switch_off_us,
            p_false_positive,
            p_false_negative,
            p_prep,
            axis_error_rad,
            jitter_um,
            t_stop_us,
            dt_us,
            t_prime_stop,
            dt_prime,
            n_cycles,
            mode,
            cluster_size,
            initial_start,
            initial_len,
            dw_sizes,
            dw_ini_radius,
            width_threshold,
            step_tol
        );
        match (raw.j_mhz, raw.c3_mhz_um3) {
            (Some(_), Some(_)) => {
                return Err(SimError::Config(
                    "give either j_mhz or c3_mhz_um3, not both".into(),
                ))
            }
            (Some(j), None) => c.j_mhz = Some(j),
            (None, Some(c3)) => {
                c.j_mhz = None;
                c.c3_mhz_um3 = Some(c3);
            }
            (None, None) => {}
        }
        match (raw.pulse_width_ns, raw.mean_rabi_mhz) {
            (Some(_), Some(_)) => {
                return Err(SimError::Config(
                    "give either pulse_width_ns or mean_rabi_mhz, not both".into(),
                ))
            }
            (Some(w), None) => {
                c.pulse_width_ns = Some(w);
                c.mean_rabi_mhz = None;
            }
            (None, Some(r)) => {
                c.pulse_width_ns = None;
                c.mean_rabi_mhz = Some(r);
            }
            (None, None) => {}
        }
        Ok(c)
    }

    pub fn spam(&self) -> Result<SpamModel> {
        SpamModel::new(self.p_false_positive, self.p_false_negative)
    }

    /// Pulse shape scaled to `rabi_factor` times the configured drive strength.
    pub fn pulse_shape(&self, rabi_factor: f64) -> Result<PulseShape> {
        if !(rabi_factor.is_finite() && rabi_factor > 0.0) {
            return Err(SimError::Config(format!(
                "Rabi factors must be positive, got {rabi_factor}"
            )));
        }
        Ok(match self.pulse {
            PulseKind::Delta => PulseShape::Delta,
            PulseKind::Gaussian => match (self.pulse_width_ns, self.mean_rabi_mhz) {
                (_, Some(r)) => PulseShape::GaussianMeanRabi {
                    mean_rabi_mhz: r * rabi_factor,
                },
                (Some(w), None) => PulseShape::GaussianWidth {
                    width_1e2_ns: w / rabi_factor,
                },
                (None, None) => {
                    return Err(SimError::Config(
                        "Gaussian pulses need a width or a Rabi frequency".into(),
                    ))
                }
            },
        })
    }

    pub fn tc_us(&self) -> f64 {
        self.tc_ns * 1e-3
    }

    /// Atoms simulated in one exact state vector.
    pub fn register_size(&self) -> usize {
        match self.geometry {
            GeometryChoice::Square => self.rows * self.cols,
            _ => self.n_atoms,
        }
    }

    /// Rejects infeasible or inconsistent settings before any computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        let positive = [
            ("spacing_um", self.spacing_um),
            ("tc_ns", self.tc_ns),
            ("t_stop_us", self.t_stop_us),
            ("dt_us", self.dt_us),
            ("t_prime_stop", self.t_prime_stop),
            ("dt_prime", self.dt_prime),
            ("drive_us", self.drive_us),
            ("step_tol", self.step_tol),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        for (k, v) in [
            ("p_false_positive", self.p_false_positive),
            ("p_false_negative", self.p_false_negative),
            ("p_prep", self.p_prep),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{k} must lie in [0, 1], got {v}"));
            }
        }
        if self.p_false_positive + self.p_false_negative >= 1.0 {
            return bad("p_false_positive + p_false_negative must stay below 1".into());
        }
        if !(self.axis_error_rad.is_finite() && (0.0..0.5).contains(&self.axis_error_rad)) {
            return bad(format!(
                "axis_error_rad must lie in [0, 0.5), got {}",
                self.axis_error_rad
            ));
        }
        if !(self.jitter_um.is_finite()
            && self.jitter_um >= 0.0
            && self.jitter_um < 0.25 * self.spacing_um)
        {
            return bad(format!(
                "jitter_um must lie in [0, spacing/4), got {}",
                self.jitter_um
            ));
        }
        if let Some(j) = self.j_mhz {
            if !(j.is_finite() && j > 0.0) {
                return bad(format!("j_mhz must be positive, got {j}"));
            }
        }
        if let Some(c3) = self.c3_mhz_um3 {
            if !(c3.is_finite() && c3 != 0.0) {
                return bad(format!("c3_mhz_um3 must be finite and non-zero, got {c3}"));
            }
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(0.0..=2.0).contains(d)) {
            return bad(format!(
                "deltas must be a non-empty list in [0, 2], got {:?}",
                self.deltas
            ));
        }
        if self.rabi_factors.is_empty() {
            return bad("rabi_factors must not be empty".into());
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.dw_sizes.is_empty() || self.dw_sizes.contains(&0) {
            return bad("dw_sizes must be a non-empty list of positive sizes".into());
        }
        if !(self.width_threshold > 0.0 && self.width_threshold < 2.0) {
            return bad(format!(
                "width_threshold must lie in (0, 2), got {}",
                self.width_threshold
            ));
        }

        let n = self.register_size();
        match self.scenario {
            ScenarioId::TwoAtomFreq | ScenarioId::XxXxxSwitch => {
                if n != 2 {
                    return bad(format!(
                        "{} simulates two atoms, got n_atoms = {n}",
                        self.scenario.name()
                    ));
                }
                if self.scenario == ScenarioId::XxXxxSwitch
                    && !(0.0 < self.switch_on_us
                        && self.switch_on_us < self.switch_off_us
                        && self.switch_off_us < self.t_stop_us)
                {
                    return bad("need 0 < switch_on_us < switch_off_us < t_stop_us".into());
                }
            }
            ScenarioId::Freeze2d => {
                if self.geometry != GeometryChoice::Square {
                    return bad("freeze_2d runs on a square array".into());
                }
                if self.deltas.len() != 1 {
                    return bad("freeze_2d takes a single anisotropy".into());
                }
                match self.mode {
                    FreezeMode::Exact if n > MAX_STATE_ATOMS.min(16) => {
                        return Err(SimError::DimensionLimit {
                            n_atoms: n,
                            cap: 16,
                        });
                    }
                    FreezeMode::Mace if !(2..=DENSE_CAP).contains(&self.cluster_size) => {
                        return bad(format!(
                            "cluster_size must lie in [2, {DENSE_CAP}], got {}",
                            self.cluster_size
                        ));
                    }
                    _ => {}
                }
                if self.drive_us > self.t_stop_us {
                    return bad("drive_us must not exceed t_stop_us".into());
                }
            }
            ScenarioId::Dw1d | ScenarioId::NflipPbc | ScenarioId::FinitePulse => {
                if self.geometry == GeometryChoice::Square {
                    return bad(format!(
                        "{} runs on a chain or a ring",
                        self.scenario.name()
                    ));
                }
                if self.scenario == ScenarioId::NflipPbc && self.geometry != GeometryChoice::Ring {
                    return bad("nflip_pbc runs on a ring".into());
                }
                if n > DENSE_CAP {
                    return Err(SimError::DimensionLimit {
                        n_atoms: n,
                        cap: DENSE_CAP,
                    });
                }
                if self.initial_len == 0 || self.initial_len >= n || self.initial_start >= n {
                    return bad(format!(
                        "initial wall ({}, {}) does not fit {n} atoms",
                        self.initial_start, self.initial_len
                    ));
                }
                if self.geometry == GeometryChoice::Chain
                    && self.initial_start + self.initial_len > n
                {
                    return bad("initial wall runs past the end of the chain".into());
                }
            }
            ScenarioId::SingleAtomCycles => {
                if n != 1 {
                    return bad(format!(
                        "single_atom_cycles simulates one atom, got n_atoms = {n}"
                    ));
                }
                if self.n_cycles == 0 {
                    return bad("n_cycles must be at least 1".into());
                }
            }
        }
        if n == 0 {
            return bad("the register is empty".into());
        }

        // every pulse must fit its cycle
        let driven = match self.scenario {
            ScenarioId::Freeze2d | ScenarioId::SingleAtomCycles | ScenarioId::FinitePulse => true,
            ScenarioId::Dw1d | ScenarioId::NflipPbc => self.hamiltonian == Dynamics::Driven,
            ScenarioId::TwoAtomFreq | ScenarioId::XxXxxSwitch => false,
        };
        if driven {
            for &d in &self.deltas {
                for &f in &self.rabi_factors {
                    build_cycle(d, self.tc_us(), self.pulse_shape(f)?)
                        .map_err(|e| SimError::Config(e.to_string()))?;
                }
            }
        } else {
            for &f in &self.rabi_factors {
                self.pulse_shape(f)?;
            }
        }
        if self.shots > 0 && !self.shots.is_multiple_of(self.realizations) {
            return bad(format!(
                "shots ({}) must be a multiple of realizations ({})",
                self.shots, self.realizations
            ));
        }
        Ok(())
    }
}
