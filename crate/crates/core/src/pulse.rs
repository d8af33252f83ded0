//! Microwave pulses and the four-pulse Floquet cycle.
//!
//! A cycle with delays `(τ1, τ2, τ3)` is laid out, with pulse peaks on the
//! delta-pulse times, as
//!
//! ```text
//! X ─ τ2 ─ (−Y) ─ 2τ3 ─ Y ─ τ2 ─ (−X) ─ 2τ1 ─
//! ```
//!
//! Finite pulses occupy a window `W` starting at each peak-to-peak time, so the
//! gaps shrink by `W` and the cycle length is unchanged.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::rng::{self, domain};
use crate::state::{self, Gate};

/// Phases of the X, −Y, Y, −X pulses.
pub const CYCLE_PHASES: [f64; 4] = [0.0, -FRAC_PI_2, FRAC_PI_2, PI];

const AREA: f64 = FRAC_PI_2;
const DELTA2_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// Instantaneous rotation.
    Delta,
    /// `Ω(t) = Ω_peak·exp(−2t²/w²)` with `w` half the 1/e² full width.
    Gaussian { width_1e2_ns: f64 },
}

/// How pulses of a sequence are shaped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseShape {
    Delta,
    /// Gaussian with the given 1/e² full width.
    GaussianWidth {
        width_1e2_ns: f64,
    },
    /// Gaussian whose mean Rabi frequency over the window is given.
    GaussianMeanRabi {
        mean_rabi_mhz: f64,
    },
}

impl PulseShape {
    /// 1/e² full width in ns, `None` for delta pulses.
    pub fn width_1e2_ns(&self) -> Result<Option<f64>> {
        match *self {
            PulseShape::Delta => Ok(None),
            PulseShape::GaussianWidth { width_1e2_ns } => {
                if !(width_1e2_ns.is_finite() && width_1e2_ns > 0.0) {
                    return Err(SimError::param(format!(
                        "pulse width must be positive, got {width_1e2_ns} ns"
                    )));
                }
                Ok(Some(width_1e2_ns))
            }
            PulseShape::GaussianMeanRabi { mean_rabi_mhz } => {
                if !(mean_rabi_mhz.is_finite() && mean_rabi_mhz > 0.0) {
                    return Err(SimError::param(format!(
                        "mean Rabi frequency must be positive, got {mean_rabi_mhz}"
                    )));
                }
                let window_us = AREA / (2.0 * PI * mean_rabi_mhz);
                Ok(Some(window_us * 1e3 / 2.0))
            }
        }
    }

    /// Truncation window in μs (zero for delta pulses).
    pub fn window_us(&self) -> Result<f64> {
        Ok(self.width_1e2_ns()?.map_or(0.0, |w| 2.0 * w * 1e-3))
    }
}

/// One resonant rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    phase: f64,
    area: f64,
    envelope: Envelope,
    omega_peak_mhz: f64,
    window_us: f64,
    axis: [f64; 3],
}

/// `∫_{-x}^{x} exp(−2t²/w²) dt`.
fn gaussian_integral(w: f64, x: f64) -> f64 {
    w * (PI / 8.0).sqrt() * 2.0 * libm::erf(2f64.sqrt() * x / w)
}

impl Pulse {
    pub fn delta(phase: f64) -> Self {
        Self {
            phase,
            area: AREA,
            envelope: Envelope::Delta,
            omega_peak_mhz: f64::INFINITY,
            window_us: 0.0,
            axis: [phase.cos(), phase.sin(), 0.0],
        }
    }

    /// Gaussian π/2 pulse, peak calibrated so the truncated area is exact.
    pub fn gaussian(phase: f64, width_1e2_ns: f64) -> Result<Self> {
        if !(width_1e2_ns.is_finite() && width_1e2_ns > 0.0) {
            return Err(SimError::param(format!(
                "pulse width must be positive, got {width_1e2_ns} ns"
            )));
        }
        let w = 0.5 * width_1e2_ns * 1e-3;
        let window_us = 2.0 * width_1e2_ns * 1e-3;
        let omega_peak_mhz = AREA / (2.0 * PI * gaussian_integral(w, 0.5 * window_us));
        Ok(Self {
            phase,
            area: AREA,
            envelope: Envelope::Gaussian { width_1e2_ns },
            omega_peak_mhz,
            window_us,
            axis: [phase.cos(), phase.sin(), 0.0],
        })
    }

    pub fn with_shape(phase: f64, shape: PulseShape) -> Result<Self> {
        match shape.width_1e2_ns()? {
            None => Ok(Self::delta(phase)),
            Some(w) => Self::gaussian(phase, w),
        }
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Nominal rotation angle (radians).
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn envelope(&self) -> Envelope {
        self.envelope
    }

    pub fn omega_peak_mhz(&self) -> f64 {
        self.omega_peak_mhz
    }

    pub fn window_us(&self) -> f64 {
        self.window_us
    }

    /// Rotation axis, tilted if the pulse was perturbed.
    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    /// Area divided by the window, as a frequency (MHz).
    pub fn mean_rabi_mhz(&self) -> f64 {
        if self.window_us == 0.0 {
            f64::INFINITY
        } else {
            self.area / (2.0 * PI * self.window_us)
        }
    }

    /// Rabi frequency `t_rel` μs after the window opens.
    pub fn rabi_at(&self, t_rel: f64) -> f64 {
        match self.envelope {
            Envelope::Delta => 0.0,
            Envelope::Gaussian { width_1e2_ns } => {
                if !(0.0..=self.window_us).contains(&t_rel) {
                    return 0.0;
                }
                let w = 0.5 * width_1e2_ns * 1e-3;
                let x = t_rel - 0.5 * self.window_us;
                self.omega_peak_mhz * (-2.0 * x * x / (w * w)).exp()
            }
        }
    }

    /// Rotation angle `2π∫Ω dt` accumulated between two window offsets.
    pub fn angle_between(&self, a_rel: f64, b_rel: f64) -> f64 {
        match self.envelope {
            Envelope::Delta => {
                if a_rel <= 0.0 && b_rel >= 0.0 {
                    self.area
                } else {
                    0.0
                }
            }
            Envelope::Gaussian { width_1e2_ns } => {
                let w = 0.5 * width_1e2_ns * 1e-3;
                let c = 0.5 * self.window_us;
                let a = a_rel.clamp(0.0, self.window_us) - c;
                let b = b_rel.clamp(0.0, self.window_us) - c;
                let k = 2.0 * PI * self.omega_peak_mhz * w * (PI / 8.0).sqrt();
                k * (libm::erf(2f64.sqrt() * b / w) - libm::erf(2f64.sqrt() * a / w))
            }
        }
    }

    /// Rotation between two window offsets as a single-atom gate.
    pub fn rotation_between(&self, a_rel: f64, b_rel: f64) -> Gate {
        state::rotation_gate(self.axis, self.angle_between(a_rel, b_rel))
    }

    /// Full rotation of the pulse.
    pub fn ideal_rotation(&self) -> Gate {
        state::rotation_gate(self.axis, self.area)
    }

    /// Tilts the axis per `√(1−n1²−n2²)·n + n1·n⊥ + n2·z`.
    pub fn tilted(&self, n1: f64, n2: f64) -> Self {
        let (s, c) = self.phase.sin_cos();
        let k = (1.0 - n1 * n1 - n2 * n2).sqrt();
        let mut p = self.clone();
        p.axis = [k * c - n1 * s, k * s + n1 * c, n2];
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Gap { duration_us: f64 },
    Pulse(Pulse),
}

impl Segment {
    pub fn duration_us(&self) -> f64 {
        match self {
            Segment::Gap { duration_us } => *duration_us,
            Segment::Pulse(p) => p.window_us(),
        }
    }
}

/// Ordered pulses and gaps for one or more Floquet cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    segments: Vec<Segment>,
    cycle_us: f64,
    delays_us: (f64, f64, f64),
    delta: f64,
    delta2_mode: bool,
    n_cycles: usize,
    shape: PulseShape,
}

#[derive(Serialize)]
struct SegmentDump {
    t_start_us: f64,
    kind: &'static str,
    duration_us: f64,
    phi_rad: Option<f64>,
    #[serde(rename = "omega_peak_MHz")]
    omega_peak_mhz: Option<f64>,
    width_ns: Option<f64>,
}

/// Delays `(τ1, τ2, τ3)` in μs realising anisotropy `δ` at cycle time `t_c`.
pub fn anisotropy_to_delays(delta: f64, tc_us: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..=2.0).contains(&delta) {
        return Err(SimError::param(format!(
            "anisotropy must lie in [0, 2], got {delta}"
        )));
    }
    if !(tc_us.is_finite() && tc_us > 0.0) {
        return Err(SimError::param(format!(
            "cycle time must be positive, got {tc_us} μs"
        )));
    }
    let tau2 = delta * tc_us / (2.0 * (2.0 + delta));
    let tau1 = (0.5 * tc_us - 2.0 * tau2).max(0.0);
    Ok((tau1, tau2, tau2))
}

/// One cycle for anisotropy `δ`.
pub fn build_cycle(delta: f64, tc_us: f64, shape: PulseShape) -> Result<PulseSequence> {
    build_train(delta, tc_us, shape, 1)
}

/// `n_cycles` consecutive cycles. At `δ = 2` the interior X/−X pairs are
/// dropped and only the first X and last −X are kept.
pub fn build_train(
    delta: f64,
    tc_us: f64,
    shape: PulseShape,
    n_cycles: usize,
) -> Result<PulseSequence> {
    let (tau1, tau2, tau3) = anisotropy_to_delays(delta, tc_us)?;
    if n_cycles == 0 {
        return Err(SimError::param("a pulse train needs at least one cycle"));
    }
    let delta2_mode = delta >= 2.0 - DELTA2_EPS;
    let k = n_cycles as f64;
    let window = shape.window_us()?;

    // peak-to-peak event times and phases
    let mut events: Vec<(f64, f64)> = Vec::new();
    let mut end = k * tc_us;
    if tau2 > 0.0 || tau3 > 0.0 {
        if delta2_mode {
            events.push((0.0, CYCLE_PHASES[0]));
            for c in 0..n_cycles {
                let t0 = c as f64 * tc_us;
                events.push((t0 + tau2, CYCLE_PHASES[1]));
                events.push((t0 + tau2 + 2.0 * tau3, CYCLE_PHASES[2]));
            }
            events.push((end, CYCLE_PHASES[3]));
            end += window;
        } else {
            for c in 0..n_cycles {
                let t0 = c as f64 * tc_us;
                events.push((t0, CYCLE_PHASES[0]));
                events.push((t0 + tau2, CYCLE_PHASES[1]));
                events.push((t0 + tau2 + 2.0 * tau3, CYCLE_PHASES[2]));
                events.push((t0 + 2.0 * tau2 + 2.0 * tau3, CYCLE_PHASES[3]));
            }
        }
    }

    // every window must fit before the next event
    if window > 0.0 && !events.is_empty() {
        let mut spacings: Vec<f64> = events.windows(2).map(|w| w[1].0 - w[0].0).collect();
        if !delta2_mode {
            spacings.push(tc_us - (2.0 * tau2 + 2.0 * tau3));
        }
        let worst = spacings.iter().copied().fold(f64::INFINITY, f64::min);
        if worst < window - 1e-12 {
            let scale = if worst > 0.0 {
                window / worst
            } else {
                f64::INFINITY
            };
            return Err(SimError::InvalidParameter(format!(
                "pulse window {:.3} ns does not fit the delays at t_c = {:.3} ns; minimum t_c is {:.3} ns",
                window * 1e3,
                tc_us * 1e3,
                tc_us * scale * 1e3
            )));
        }
    }

    let mut segments = Vec::new();
    let mut cursor = 0.0;
    for &(t, phase) in &events {
        if t > cursor {
            segments.push(Segment::Gap {
                duration_us: t - cursor,
            });
        }
        segments.push(Segment::Pulse(Pulse::with_shape(phase, shape)?));
        cursor = t + window;
    }
    if end > cursor + 1e-15 {
        segments.push(Segment::Gap {
            duration_us: end - cursor,
        });
    }
    Ok(PulseSequence {
        segments,
        cycle_us: tc_us,
        delays_us: (tau1, tau2, tau3),
        delta,
        delta2_mode,
        n_cycles,
        shape,
    })
}

impl PulseSequence {
    /// Arbitrary segment list; `cycle_us` is taken as the total duration.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if let Segment::Gap { duration_us } = s {
                if !(duration_us.is_finite() && *duration_us >= 0.0) {
                    return Err(SimError::param(format!(
                        "gap durations must be non-negative, got {duration_us}"
                    )));
                }
            }
        }
        let total: f64 = segments.iter().map(Segment::duration_us).sum();
        Ok(Self {
            segments,
            cycle_us: total,
            delays_us: (0.0, 0.0, 0.0),
            delta: f64::NAN,
            delta2_mode: false,
            n_cycles: 1,
            shape: PulseShape::Delta,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn cycle_us(&self) -> f64 {
        self.cycle_us
    }

    pub fn delays_us(&self) -> (f64, f64, f64) {
        self.delays_us
    }

    pub fn anisotropy(&self) -> f64 {
        self.delta
    }

    pub fn delta2_mode(&self) -> bool {
        self.delta2_mode
    }

    pub fn n_cycles(&self) -> usize {
        self.n_cycles
    }

    pub fn shape(&self) -> PulseShape {
        self.shape
    }

    pub fn duration_us(&self) -> f64 {
        self.segments.iter().map(Segment::duration_us).sum()
    }

    pub fn pulses(&self) -> impl Iterator<Item = &Pulse> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Pulse(p) => Some(p),
            Segment::Gap { .. } => None,
        })
    }

    /// Same recipe repeated `n_cycles` times.
    pub fn train(&self, n_cycles: usize) -> Result<PulseSequence> {
        if self.delta.is_nan() {
            return Err(SimError::param(
                "sequence was not built from a cycle recipe",
            ));
        }
        build_train(self.delta, self.cycle_us, self.shape, n_cycles)
    }

    /// Finite pulse active at `t` with the offset into its window.
    pub fn pulse_at(&self, t: f64) -> Option<(&Pulse, f64)> {
        let mut start = 0.0;
        for seg in &self.segments {
            let d = seg.duration_us();
            if let Segment::Pulse(p) = seg {
                if d > 0.0 && t >= start && t <= start + d {
                    return Some((p, t - start));
                }
            }
            start += d;
        }
        None
    }

    /// Product of the ideal rotations, in time order (single atom).
    pub fn net_rotation(&self) -> Gate {
        self.pulses().fold(state::identity_gate(), |u, p| {
            state::gate_mul(&p.ideal_rotation(), &u)
        })
    }

    pub fn dump_json(&self) -> Result<String> {
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let d = seg.duration_us();
            out.push(match seg {
                Segment::Gap { .. } => SegmentDump {
                    t_start_us: t,
                    kind: "gap",
                    duration_us: d,
                    phi_rad: None,
                    omega_peak_mhz: None,
                    width_ns: None,
                },
                Segment::Pulse(p) => SegmentDump {
                    t_start_us: t,
                    kind: "pulse",
                    duration_us: d,
                    phi_rad: Some(p.phase),
                    omega_peak_mhz: p.omega_peak_mhz.is_finite().then_some(p.omega_peak_mhz),
                    width_ns: match p.envelope {
                        Envelope::Delta => None,
                        Envelope::Gaussian { width_1e2_ns } => Some(width_1e2_ns),
                    },
                },
            });
            t += d;
        }
        Ok(serde_json::to_string_pretty(&out)?)
    }
}

/// Draws `(n1, n2) ~ N(0, Δθ)²` conditioned on `n1² + n2² < 1`; returns the
/// pair and the number of rejected draws.
pub fn draw_tilt<R: Rng>(rng: &mut R, dtheta: f64) -> Result<((f64, f64), u64)> {
    let normal =
        Normal::new(0.0, dtheta).map_err(|e| SimError::param(format!("axis error: {e}")))?;
    let mut redraws = 0;
    loop {
        let n1: f64 = normal.sample(rng);
        let n2: f64 = normal.sample(rng);
        if n1 * n1 + n2 * n2 < 1.0 {
            return Ok(((n1, n2), redraws));
        }
        redraws += 1;
        if redraws > 1_000_000 {
            return Err(SimError::param(format!(
                "axis error {dtheta} too large to sample"
            )));
        }
    }
}

/// Independently tilts the axis of every pulse. Returns the perturbed sequence
/// and the number of re-drawn samples.
pub fn perturb_axes(seq: &PulseSequence, dtheta: f64, seed: u64) -> Result<(PulseSequence, u64)> {
    if !(dtheta.is_finite() && dtheta >= 0.0) {
        return Err(SimError::param(format!(
            "axis error must be non-negative, got {dtheta}"
        )));
    }
    if dtheta == 0.0 {
        return Ok((seq.clone(), 0));
    }
    let mut rng = rng::rng_for(seed, &[domain::AXIS]);
    let mut out = seq.clone();
    let mut total = 0;
    for seg in &mut out.segments {
        if let Segment::Pulse(p) = seg {
            let ((n1, n2), r) = draw_tilt(&mut rng, dtheta)?;
            total += r;
            *p = p.tilted(n1, n2);
        }
    }
    Ok((out, total))
}
