//! Observables: magnetizations, spin-flip counts, domain-wall probabilities,
//! profile widths and the normalized time axis.

use crate::error::{Result, SimError};
use crate::hamiltonian::xxz_weights;
use crate::measure::ShotRecord;
use crate::state::{Axis, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainBoundary {
    Open,
    Periodic,
}

impl ChainBoundary {
    pub fn bonds(self, n: usize) -> Vec<(usize, usize)> {
        let mut b: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if self == ChainBoundary::Periodic && n > 2 {
            b.push((n - 1, 0));
        }
        b
    }
}

/// Mean and standard error of the mean.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `⟨σᶻ_i⟩` for every atom.
pub fn magnetization_z(psi: &StateVector) -> Vec<f64> {
    magnetization_z_dist(&psi.probabilities(), psi.n_atoms()).expect("state dimension matches")
}

/// Total magnetization along an axis divided by the number of atoms.
pub fn magnetization_per_atom(psi: &StateVector, axis: Axis) -> f64 {
    psi.mean_magnetization(axis)
}

/// Per-site `σᶻ` readings from shots: (mean, sem) per atom.
pub fn magnetization_z_shots(shots: &[ShotRecord]) -> Vec<(f64, f64)> {
    let Some(first) = shots.first() else {
        return Vec::new();
    };
    (0..first.n_atoms)
        .map(|i| {
            let v: Vec<f64> = shots
                .iter()
                .map(|s| if s.is_up(i) { 1.0 } else { -1.0 })
                .collect();
            mean_sem(&v)
        })
        .collect()
}

/// `½ Σ_bonds (1 − ⟨σᶻ_i σᶻ_j⟩)`.
pub fn n_flip(psi: &StateVector, boundary: ChainBoundary) -> Result<f64> {
    let n = psi.n_atoms();
    if n < 2 {
        return Err(SimError::param("spin-flip count needs at least two atoms"));
    }
    Ok(boundary
        .bonds(n)
        .iter()
        .map(|&(i, j)| 0.5 * (1.0 - psi.expectation_zz(i, j)))
        .sum())
}

/// Number of anti-aligned bonds in one shot.
pub fn n_flip_shot(shot: &ShotRecord, boundary: ChainBoundary) -> usize {
    boundary
        .bonds(shot.n_atoms)
        .iter()
        .filter(|&&(i, j)| shot.is_up(i) != shot.is_up(j))
        .count()
}

/// Shot-averaged spin-flip count: (mean, sem).
pub fn n_flip_shots(shots: &[ShotRecord], boundary: ChainBoundary) -> Result<(f64, f64)> {
    if shots.is_empty() {
        return Err(SimError::param("no shots"));
    }
    let v: Vec<f64> = shots
        .iter()
        .map(|s| n_flip_shot(s, boundary) as f64)
        .collect();
    Ok(mean_sem(&v))
}

/// Domain-wall classification rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainWallSpec {
    pub n_atoms: usize,
    /// First site of the initial up-block.
    pub initial_start: usize,
    pub initial_len: usize,
    pub accepted_sizes: Vec<usize>,
    pub boundary: ChainBoundary,
    /// Largest block-centre distance (sites) still counted as the initial wall.
    pub ini_radius: f64,
}

impl DomainWallSpec {
    pub fn new(
        n_atoms: usize,
        initial_start: usize,
        initial_len: usize,
        boundary: ChainBoundary,
    ) -> Result<Self> {
        if initial_len == 0 || initial_len > n_atoms || initial_start >= n_atoms {
            return Err(SimError::param(
                "initial block must be non-empty and inside the register",
            ));
        }
        if boundary == ChainBoundary::Open && initial_start + initial_len > n_atoms {
            return Err(SimError::param("initial block wraps around an open chain"));
        }
        Ok(Self {
            n_atoms,
            initial_start,
            initial_len,
            accepted_sizes: vec![4, 5, 6],
            boundary,
            ini_radius: 1.0,
        })
    }

    pub fn with_sizes(mut self, sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(SimError::param("accepted block sizes must not be empty"));
        }
        self.accepted_sizes = sizes;
        Ok(self)
    }

    fn centre(&self, start: usize, len: usize) -> f64 {
        let c = start as f64 + (len as f64 - 1.0) / 2.0;
        match self.boundary {
            ChainBoundary::Open => c,
            ChainBoundary::Periodic => c.rem_euclid(self.n_atoms as f64),
        }
    }

    fn centre_distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.boundary {
            ChainBoundary::Open => d,
            ChainBoundary::Periodic => d.min(self.n_atoms as f64 - d),
        }
    }

    /// Initial pattern, `true` = up.
    pub fn initial_bits(&self) -> Vec<bool> {
        let mut b = vec![false; self.n_atoms];
        for k in 0..self.initial_len {
            b[(self.initial_start + k) % self.n_atoms] = true;
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallClass {
    Initial,
    Other,
    None,
}

/// `(start, len)` of the single contiguous up-block, if the pattern has one.
pub fn single_block(up: &[bool], boundary: ChainBoundary) -> Option<(usize, usize)> {
    let n = up.len();
    let count = up.iter().filter(|&&u| u).count();
    if count == 0 {
        return None;
    }
    match boundary {
        ChainBoundary::Open => {
            let first = up.iter().position(|&u| u)?;
            let last = up.iter().rposition(|&u| u)?;
            (last - first + 1 == count).then_some((first, count))
        }
        ChainBoundary::Periodic => {
            if count == n {
                return None;
            }
            let starts: Vec<usize> = (0..n).filter(|&i| up[i] && !up[(i + n - 1) % n]).collect();
            (starts.len() == 1).then(|| (starts[0], count))
        }
    }
}

pub fn classify(up: &[bool], spec: &DomainWallSpec) -> WallClass {
    match single_block(up, spec.boundary) {
        Some((start, len)) if spec.accepted_sizes.contains(&len) => {
            let c = spec.centre(start, len);
            let c0 = spec.centre(spec.initial_start, spec.initial_len);
            if spec.centre_distance(c, c0) <= spec.ini_radius + 1e-12 {
                WallClass::Initial
            } else {
                WallClass::Other
            }
        }
        _ => WallClass::None,
    }
}

/// `(P_ini, P_other)` over shots.
pub fn domain_wall_probabilities(
    shots: &[ShotRecord],
    spec: &DomainWallSpec,
) -> Result<(f64, f64)> {
    if shots.is_empty() {
        return Err(SimError::param("no shots"));
    }
    let (mut ini, mut other) = (0usize, 0usize);
    for s in shots {
        let up: Vec<bool> = (0..s.n_atoms).map(|i| s.is_up(i)).collect();
        match classify(&up, spec) {
            WallClass::Initial => ini += 1,
            WallClass::Other => other += 1,
            WallClass::None => {}
        }
    }
    let n = shots.len() as f64;
    Ok((ini as f64 / n, other as f64 / n))
}

/// `(P_ini, P_other)` from Born probabilities, without readout errors.
pub fn domain_wall_probabilities_exact(
    psi: &StateVector,
    spec: &DomainWallSpec,
) -> Result<(f64, f64)> {
    if psi.n_atoms() != spec.n_atoms {
        return Err(SimError::DimensionMismatch {
            expected: spec.n_atoms,
            got: psi.n_atoms(),
        });
    }
    domain_wall_probabilities_dist(&psi.probabilities(), spec)
}

/// `(P_ini, P_other)` from a bitstring distribution.
pub fn domain_wall_probabilities_dist(probs: &[f64], spec: &DomainWallSpec) -> Result<(f64, f64)> {
    let n = spec.n_atoms;
    check_dist(probs, n)?;
    let (mut ini, mut other) = (0.0, 0.0);
    let mut up = vec![false; n];
    for (s, p) in probs.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        for (i, u) in up.iter_mut().enumerate() {
            *u = s >> i & 1 == 1;
        }
        match classify(&up, spec) {
            WallClass::Initial => ini += p,
            WallClass::Other => other += p,
            WallClass::None => {}
        }
    }
    Ok((ini, other))
}

fn check_dist(probs: &[f64], n_atoms: usize) -> Result<()> {
    if n_atoms >= usize::BITS as usize || probs.len() != 1usize << n_atoms {
        return Err(SimError::DimensionMismatch {
            expected: n_atoms,
            got: probs.len(),
        });
    }
    Ok(())
}

/// `⟨σᶻ_i⟩` per atom from a bitstring distribution.
pub fn magnetization_z_dist(probs: &[f64], n_atoms: usize) -> Result<Vec<f64>> {
    check_dist(probs, n_atoms)?;
    let mut m = vec![0.0; n_atoms];
    for (s, p) in probs.iter().enumerate() {
        for (i, mi) in m.iter_mut().enumerate() {
            *mi += if s >> i & 1 == 1 { *p } else { -p };
        }
    }
    Ok(m)
}

/// Spin-flip count from a bitstring distribution.
pub fn n_flip_dist(probs: &[f64], n_atoms: usize, boundary: ChainBoundary) -> Result<f64> {
    check_dist(probs, n_atoms)?;
    if n_atoms < 2 {
        return Err(SimError::param("spin-flip count needs at least two atoms"));
    }
    let bonds = boundary.bonds(n_atoms);
    Ok(probs
        .iter()
        .enumerate()
        .map(|(s, p)| {
            p * bonds
                .iter()
                .filter(|&&(i, j)| (s >> i & 1) != (s >> j & 1))
                .count() as f64
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthFlag {
    /// No spatial structure left.
    Uniform,
    /// The front has reached the end of the register.
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileWidth {
    /// Front distance from the nearest initial wall, in sites.
    pub xi: f64,
    pub flag: Option<WidthFlag>,
}

/// Front position of a melting profile relative to the initial walls.
///
/// Walls sit half-way between initial neighbours of opposite sign; a site is
/// part of the front when `|Δ⟨σᶻ⟩|` exceeds `threshold`. `ξ` counts sites
/// from the wall, so the first neighbour across it is one site away.
pub fn profile_width(
    profile: &[f64],
    initial: &[f64],
    threshold: f64,
    boundary: ChainBoundary,
) -> Result<ProfileWidth> {
    let n = profile.len();
    if n != initial.len() || n < 2 {
        return Err(SimError::DimensionMismatch {
            expected: initial.len(),
            got: n,
        });
    }
    let walls: Vec<f64> = boundary
        .bonds(n)
        .iter()
        .filter(|&&(i, j)| initial[i] * initial[j] < 0.0)
        .map(|&(i, j)| {
            if j == i + 1 {
                i as f64 + 0.5
            } else {
                n as f64 - 0.5
            }
        })
        .collect();
    if walls.is_empty() {
        return Err(SimError::param("initial profile has no wall"));
    }
    let dist = |k: usize| {
        walls
            .iter()
            .map(|w| {
                let d = (k as f64 - w).abs();
                match boundary {
                    ChainBoundary::Open => d,
                    ChainBoundary::Periodic => d.min(n as f64 - d),
                }
            })
            .fold(f64::INFINITY, f64::min)
            + 0.5
    };
    let mut xi: f64 = 0.0;
    let mut reach_max: f64 = 0.0;
    for k in 0..n {
        reach_max = reach_max.max(dist(k));
        if (profile[k] - initial[k]).abs() > threshold {
            xi = xi.max(dist(k));
        }
    }
    let (lo, hi) = profile
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let flag = if hi - lo <= threshold {
        Some(WidthFlag::Uniform)
    } else if xi >= reach_max && xi > 0.0 {
        Some(WidthFlag::Saturated)
    } else {
        None
    };
    Ok(ProfileWidth { xi, flag })
}

/// Spatial variance of a profile about its mean.
pub fn profile_variance(profile: &[f64]) -> f64 {
    let n = profile.len() as f64;
    let mean = profile.iter().sum::<f64>() / n;
    profile.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// `t′ = t·J_x(δ)/J`, dimensionless with `t` in μs.
pub fn normalized_time(t_us: f64, delta: f64, j_mhz: f64) -> Result<f64> {
    if !(j_mhz > 0.0) {
        return Err(SimError::param(format!(
            "coupling must be positive, got {j_mhz}"
        )));
    }
    let (wx, _) = xxz_weights(delta)?;
    Ok(t_us * wx * j_mhz / j_mhz)
}

/// A named time series with uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub name: String,
    /// Atom index, or `None` for an array-level quantity.
    pub site: Option<usize>,
    pub times_us: Vec<f64>,
    pub t_prime: Vec<f64>,
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
    pub n_shots: usize,
}

impl ObservableSeries {
    pub fn new(
        name: impl Into<String>,
        site: Option<usize>,
        times_us: Vec<f64>,
        t_prime: Vec<f64>,
        mean: Vec<f64>,
        sem: Vec<f64>,
        n_shots: usize,
    ) -> Result<Self> {
        let n = times_us.len();
        if t_prime.len() != n || mean.len() != n || sem.len() != n {
            return Err(SimError::DimensionMismatch {
                expected: n,
                got: mean.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            site,
            times_us,
            t_prime,
            mean,
            sem,
            n_shots,
        })
    }

    /// Noise-free series (zero uncertainty).
    pub fn exact(
        name: impl Into<String>,
        site: Option<usize>,
        times_us: Vec<f64>,
        t_prime: Vec<f64>,
        mean: Vec<f64>,
    ) -> Result<Self> {
        let sem = vec![0.0; mean.len()];
        Self::new(name, site, times_us, t_prime, mean, sem, 0)
    }

    pub fn len(&self) -> usize {
        self.times_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_us.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    fn shot(s: &str) -> ShotRecord {
        ShotRecord::from_bits(0, &bits(s)).unwrap()
    }

    #[test]
    fn magnetization_of_domain_wall() {
        let psi = StateVector::with_up_sites(10, &[0, 1, 2, 3, 4]).unwrap();
        let m = magnetization_z(&psi);
        assert_eq!(m, [vec![1.0; 5], vec![-1.0; 5]].concat());
    }

    #[test]
    fn n_flip_reference_values() {
        let dw = StateVector::with_up_sites(10, &[0, 1, 2, 3, 4]).unwrap();
        assert_relative_eq!(n_flip(&dw, ChainBoundary::Periodic).unwrap(), 2.0);
        assert_relative_eq!(n_flip(&dw, ChainBoundary::Open).unwrap(), 1.0);
        let alt = StateVector::with_up_sites(10, &[0, 2, 4, 6, 8]).unwrap();
        assert_relative_eq!(n_flip(&alt, ChainBoundary::Periodic).unwrap(), 10.0);
        assert_eq!(n_flip_shot(&shot("1111100000"), ChainBoundary::Periodic), 2);
        // uniform superposition: ⟨σσ⟩ = 0 on every bond
        let amps = vec![num_complex::Complex64::new(1.0 / 32.0, 0.0); 1024];
        let mixed = StateVector::from_amplitudes(10, amps).unwrap();
        assert_relative_eq!(
            n_flip(&mixed, ChainBoundary::Periodic).unwrap(),
            5.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn wall_classification() {
        let spec = DomainWallSpec::new(10, 0, 5, ChainBoundary::Periodic).unwrap();
        assert_eq!(classify(&bits("1111100000"), &spec), WallClass::Initial);
        assert_eq!(classify(&bits("0001111100"), &spec), WallClass::Other);
        assert_eq!(classify(&bits("1011101000"), &spec), WallClass::None);
        // wraps around the ring
        assert_eq!(classify(&bits("1111000001"), &spec), WallClass::Initial);
        assert_eq!(classify(&bits("1110000011"), &spec), WallClass::Other);
        assert_eq!(classify(&bits("0111100000"), &spec), WallClass::Initial);
        assert_eq!(classify(&bits("1110000000"), &spec), WallClass::None);
        let open = DomainWallSpec::new(10, 0, 5, ChainBoundary::Open).unwrap();
        assert_eq!(classify(&bits("1110000011"), &open), WallClass::None);
    }

    #[test]
    fn wall_probabilities_from_shots() {
        let spec = DomainWallSpec::new(10, 0, 5, ChainBoundary::Periodic).unwrap();
        let shots = vec![
            shot("1111100000"),
            shot("0001111100"),
            shot("1010101010"),
            shot("1111000000"),
        ];
        let (ini, other) = domain_wall_probabilities(&shots, &spec).unwrap();
        assert_relative_eq!(ini, 0.5);
        assert_relative_eq!(other, 0.25);
    }

    #[test]
    fn width_of_initial_and_uniform_profiles() {
        let init = [vec![1.0; 5], vec![-1.0; 5]].concat();
        let w = profile_width(&init, &init, 0.15, ChainBoundary::Open).unwrap();
        assert_eq!(w.xi, 0.0);
        assert_eq!(w.flag, None);
        let mut moved = init.clone();
        moved[6] = -0.5;
        moved[3] = 0.7;
        let w = profile_width(&moved, &init, 0.15, ChainBoundary::Open).unwrap();
        assert_relative_eq!(w.xi, 2.0);
        let flat = vec![0.01; 10];
        assert_eq!(
            profile_width(&flat, &init, 0.15, ChainBoundary::Open)
                .unwrap()
                .flag,
            Some(WidthFlag::Uniform)
        );
    }

    #[test]
    fn normalized_time_examples() {
        assert_relative_eq!(normalized_time(1.7, 0.0, 0.27).unwrap(), 1.7);
        assert_relative_eq!(normalized_time(3.0, 1.0, 0.4).unwrap(), 2.0);
        assert_relative_eq!(normalized_time(2.0, 2.0, 1.0).unwrap(), 1.0);
        assert!(normalized_time(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn distribution_helpers_agree_with_state_versions() {
        let mut psi = StateVector::with_up_sites(6, &[1, 2, 3]).unwrap();
        psi.apply_single(0, &crate::state::rotation_gate([1.0, 0.0, 0.0], 0.8));
        psi.apply_single(4, &crate::state::rotation_gate([0.0, 1.0, 0.0], 1.9));
        let probs = psi.probabilities();
        let mz = magnetization_z_dist(&probs, 6).unwrap();
        for (a, b) in mz.iter().zip(magnetization_z(&psi)) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        for b in [ChainBoundary::Open, ChainBoundary::Periodic] {
            assert_relative_eq!(
                n_flip_dist(&probs, 6, b).unwrap(),
                n_flip(&psi, b).unwrap(),
                epsilon = 1e-12
            );
        }
        assert!(n_flip_dist(&probs, 5, ChainBoundary::Open).is_err());
    }
}
