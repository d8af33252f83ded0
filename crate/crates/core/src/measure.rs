//! State preparation with per-atom errors, and readout with false-positive /
//! false-negative flips.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::rng::{self, domain};
use crate::state::{self, Axis, ProductState, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub enum PreparationTarget {
    AllDown,
    /// Every atom along +y: a global π/2 rotation about x applied to all-down.
    AllPlusY,
    /// Listed sites up, the rest down.
    DomainWall(Vec<usize>),
    /// Explicit pattern, `true` = up.
    Pattern(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparationSpec {
    pub n_atoms: usize,
    pub target: PreparationTarget,
    /// Per-atom probability that the intended basis state is flipped.
    pub p_prep: f64,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::param(format!(
            "{name} must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

impl PreparationSpec {
    pub fn new(n_atoms: usize, target: PreparationTarget, p_prep: f64) -> Result<Self> {
        check_probability("p_prep", p_prep)?;
        if n_atoms == 0 {
            return Err(SimError::param("preparation needs at least one atom"));
        }
        match &target {
            PreparationTarget::DomainWall(sites) => {
                if let Some(s) = sites.iter().find(|&&s| s >= n_atoms) {
                    return Err(SimError::param(format!(
                        "domain-wall site {s} outside [0, {n_atoms})"
                    )));
                }
            }
            PreparationTarget::Pattern(bits) => {
                if bits.len() != n_atoms {
                    return Err(SimError::DimensionMismatch {
                        expected: n_atoms,
                        got: bits.len(),
                    });
                }
            }
            PreparationTarget::AllDown | PreparationTarget::AllPlusY => {}
        }
        Ok(Self {
            n_atoms,
            target,
            p_prep,
        })
    }

    /// Basis pattern before any global rotation.
    pub fn intended_bits(&self) -> Vec<bool> {
        match &self.target {
            PreparationTarget::AllDown | PreparationTarget::AllPlusY => vec![false; self.n_atoms],
            PreparationTarget::DomainWall(sites) => {
                let mut b = vec![false; self.n_atoms];
                for &s in sites {
                    b[s] = true;
                }
                b
            }
            PreparationTarget::Pattern(bits) => bits.clone(),
        }
    }
}

/// Which atoms get their intended basis state flipped for this seed.
pub fn preparation_flips(spec: &PreparationSpec, seed: u64) -> Vec<bool> {
    if spec.p_prep == 0.0 {
        return vec![false; spec.n_atoms];
    }
    let mut r = rng::rng_for(seed, &[domain::PREPARE]);
    (0..spec.n_atoms)
        .map(|_| r.random::<f64>() < spec.p_prep)
        .collect()
}

/// Prepared state as a product of single-atom states.
pub fn prepare_product(spec: &PreparationSpec, seed: u64) -> Result<ProductState> {
    let bits: Vec<bool> = spec
        .intended_bits()
        .iter()
        .zip(preparation_flips(spec, seed))
        .map(|(b, f)| b ^ f)
        .collect();
    let base = ProductState::from_bits(&bits);
    match spec.target {
        PreparationTarget::AllPlusY => {
            let g = state::rotation_gate([1.0, 0.0, 0.0], std::f64::consts::FRAC_PI_2);
            ProductState::new(
                base.qubits()
                    .iter()
                    .map(|q| state::apply_gate_to_qubit(&g, q))
                    .collect(),
            )
        }
        _ => Ok(base),
    }
}

pub fn prepare(spec: &PreparationSpec, seed: u64) -> Result<StateVector> {
    prepare_product(spec, seed)?.to_state_vector()
}

/// Readout flip probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpamModel {
    /// A true `|↑⟩` is recorded as `0`.
    pub p_false_positive: f64,
    /// A true `|↓⟩` is recorded as `1`.
    pub p_false_negative: f64,
}

impl Default for SpamModel {
    fn default() -> Self {
        Self {
            p_false_positive: 0.05,
            p_false_negative: 0.035,
        }
    }
}

impl SpamModel {
    pub fn new(p_false_positive: f64, p_false_negative: f64) -> Result<Self> {
        check_probability("p_false_positive", p_false_positive)?;
        check_probability("p_false_negative", p_false_negative)?;
        Ok(Self {
            p_false_positive,
            p_false_negative,
        })
    }

    pub fn ideal() -> Self {
        Self {
            p_false_positive: 0.0,
            p_false_negative: 0.0,
        }
    }

    /// `(a, b)` with measured `⟨σᶻ⟩ = a·true + b`.
    pub fn affine(&self) -> (f64, f64) {
        (
            1.0 - self.p_false_positive - self.p_false_negative,
            self.p_false_negative - self.p_false_positive,
        )
    }

    /// Measured value of a single-atom expectation read in its own basis.
    pub fn apply_to_expectation(&self, value: f64) -> f64 {
        let (a, b) = self.affine();
        a * value + b
    }

    fn flip<R: Rng>(&self, up: bool, r: &mut R) -> bool {
        let u: f64 = r.random();
        if up {
            u >= self.p_false_positive
        } else {
            u < self.p_false_negative
        }
    }
}

/// One recorded bitstring; bit `i` set means atom `i` was read as `|↑⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShotRecord {
    pub shot_id: u64,
    pub n_atoms: usize,
    pub bits: u64,
}

impl ShotRecord {
    pub fn from_bits(shot_id: u64, up: &[bool]) -> Result<Self> {
        if up.len() > 64 {
            return Err(SimError::DimensionLimit {
                n_atoms: up.len(),
                cap: 64,
            });
        }
        let bits = up
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &u)| acc | (u as u64) << i);
        Ok(Self {
            shot_id,
            n_atoms: up.len(),
            bits,
        })
    }

    pub fn is_up(&self, site: usize) -> bool {
        self.bits >> site & 1 == 1
    }

    pub fn up_count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn up_sites(&self) -> Vec<usize> {
        (0..self.n_atoms).filter(|&s| self.is_up(s)).collect()
    }

    /// `'0'/'1'` string, atom 0 first.
    pub fn to_bitstring(&self) -> String {
        (0..self.n_atoms)
            .map(|s| if self.is_up(s) { '1' } else { '0' })
            .collect()
    }
}

/// Born-rule sampling followed by independent readout flips.
pub fn sample_bitstrings(
    psi: &StateVector,
    n_shots: usize,
    spam: &SpamModel,
    seed: u64,
) -> Result<Vec<ShotRecord>> {
    let n = psi.n_atoms();
    if n > 64 {
        return Err(SimError::DimensionLimit {
            n_atoms: n,
            cap: 64,
        });
    }
    let mut cdf = Vec::with_capacity(psi.dim());
    let mut acc = 0.0;
    for p in psi.probabilities() {
        acc += p;
        cdf.push(acc);
    }
    if (acc - 1.0).abs() > 1e-9 {
        return Err(SimError::Numerical(format!(
            "cannot sample from a state with norm² {acc}"
        )));
    }
    let shots = (0..n_shots as u64)
        .into_par_iter()
        .map(|id| {
            let mut r = rng::rng_for(seed, &[domain::SAMPLE, id]);
            let u: f64 = r.random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let mut bits = 0u64;
            for s in 0..n {
                if spam.flip(idx >> s & 1 == 1, &mut r) {
                    bits |= 1 << s;
                }
            }
            ShotRecord {
                shot_id: id,
                n_atoms: n,
                bits,
            }
        })
        .collect();
    Ok(shots)
}

/// Applies the readout flips to an already-known basis pattern.
pub fn read_out(up: &[bool], spam: &SpamModel, shot_id: u64, seed: u64) -> Result<ShotRecord> {
    let mut r = rng::rng_for(seed, &[domain::SAMPLE, shot_id]);
    let flipped: Vec<bool> = up.iter().map(|&u| spam.flip(u, &mut r)).collect();
    ShotRecord::from_bits(shot_id, &flipped)
}

/// Pauli string `Π σ^{a}_{i}` measured through the readout channel.
pub fn spam_adjusted_expectation(
    psi: &StateVector,
    observable: &[(usize, Axis)],
    spam: &SpamModel,
) -> Result<f64> {
    let Some(&(_, axis)) = observable.first() else {
        return Ok(1.0);
    };
    if observable.iter().any(|&(_, a)| a != axis) {
        return Err(SimError::param(
            "mixed-axis strings cannot be read in a single basis",
        ));
    }
    let mut sites: Vec<usize> = observable.iter().map(|&(s, _)| s).collect();
    sites.sort_unstable();
    if sites.windows(2).any(|w| w[0] == w[1]) || sites.last().is_some_and(|&s| s >= psi.n_atoms()) {
        return Err(SimError::param(
            "observable sites must be distinct and inside the register",
        ));
    }
    let rotated;
    let target = match axis {
        Axis::Z => psi,
        // global π/2 about x maps +y to ↑ before z readout
        Axis::Y => {
            let mut r = psi.clone();
            r.apply_global(&state::rotation_gate(
                [1.0, 0.0, 0.0],
                std::f64::consts::FRAC_PI_2,
            ));
            rotated = r;
            &rotated
        }
        Axis::X => {
            return Err(SimError::param(
                "σˣ has no readout basis change in this model",
            ))
        }
    };
    let (a, b) = spam.affine();
    Ok(target
        .probabilities()
        .iter()
        .enumerate()
        .map(|(s, p)| {
            p * sites
                .iter()
                .map(|&i| a * if s >> i & 1 == 1 { 1.0 } else { -1.0 } + b)
                .product::<f64>()
        })
        .sum())
}

/// Distribution of recorded bitstrings given Born probabilities `probs` of
/// an `n_atoms` register.
pub fn readout_distribution(probs: &[f64], n_atoms: usize, spam: &SpamModel) -> Result<Vec<f64>> {
    if probs.len() != 1usize << n_atoms {
        return Err(SimError::DimensionMismatch {
            expected: 1 << n_atoms,
            got: probs.len(),
        });
    }
    let mut p = probs.to_vec();
    let (fp, fn_) = (spam.p_false_positive, spam.p_false_negative);
    if fp == 0.0 && fn_ == 0.0 {
        return Ok(p);
    }
    for i in 0..n_atoms {
        let bit = 1usize << i;
        for s in 0..p.len() {
            if s & bit == 0 {
                let (down, up) = (p[s], p[s | bit]);
                p[s] = (1.0 - fn_) * down + fp * up;
                p[s | bit] = fn_ * down + (1.0 - fp) * up;
            }
        }
    }
    Ok(p)
}

/// Parsed contents of a shots file.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotsFile {
    pub n_atoms: usize,
    pub seed: u64,
    pub spam: SpamModel,
    pub shots: Vec<ShotRecord>,
}

pub fn write_shots(shots: &[ShotRecord], n_atoms: usize, seed: u64, spam: &SpamModel) -> String {
    let mut out = format!(
        "# n_atoms={n_atoms} seed={seed} p_false_positive={} p_false_negative={}\n",
        spam.p_false_positive, spam.p_false_negative
    );
    for s in shots {
        let _ = writeln!(out, "{}", s.to_bitstring());
    }
    out
}

pub fn parse_shots(text: &str) -> Result<ShotsFile> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SimError::Parse("empty shots file".into()))?;
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| SimError::Parse("missing '#' header".into()))?;
    let (mut n_atoms, mut seed, mut fp, mut fnr) = (None, None, None, None);
    for field in body.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| SimError::Parse(format!("bad header field '{field}'")))?;
        let bad = || SimError::Parse(format!("bad value for {k}: '{v}'"));
        match k {
            "n_atoms" => n_atoms = Some(v.parse::<usize>().map_err(|_| bad())?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
            "p_false_positive" => fp = Some(v.parse::<f64>().map_err(|_| bad())?),
            "p_false_negative" => fnr = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(SimError::Parse(format!("unknown header field '{k}'"))),
        }
    }
    let missing = |k: &str| SimError::Parse(format!("header lacks {k}"));
    let n_atoms = n_atoms.ok_or_else(|| missing("n_atoms"))?;
    if n_atoms == 0 || n_atoms > 64 {
        return Err(SimError::Parse(format!(
            "n_atoms must lie in [1, 64], got {n_atoms}"
        )));
    }
    let seed = seed.ok_or_else(|| missing("seed"))?;
    let spam = SpamModel::new(
        fp.ok_or_else(|| missing("p_false_positive"))?,
        fnr.ok_or_else(|| missing("p_false_negative"))?,
    )
    .map_err(|e| SimError::Parse(e.to_string()))?;
    let mut shots = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if line.len() != n_atoms {
            return Err(SimError::Parse(format!(
                "shot {k} has {} characters, expected {n_atoms}",
                line.len()
            )));
        }
        let mut bits = 0u64;
        for (i, c) in line.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => bits |= 1 << i,
                _ => {
                    return Err(SimError::Parse(format!(
                        "shot {k} contains '{}'",
                        c as char
                    )))
                }
            }
        }
        shots.push(ShotRecord {
            shot_id: shots.len() as u64,
            n_atoms,
            bits,
        });
    }
    Ok(ShotsFile {
        n_atoms,
        seed,
        spam,
        shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64 as C64;

    #[test]
    fn ideal_domain_wall() {
        let spec =
            PreparationSpec::new(10, PreparationTarget::DomainWall((0..5).collect()), 0.0).unwrap();
        let psi = prepare(&spec, 1).unwrap();
        assert_relative_eq!(psi.probabilities()[0b11111], 1.0);
    }

    #[test]
    fn preparation_error_rate() {
        let spec = PreparationSpec::new(10, PreparationTarget::DomainWall((0..5).collect()), 0.05)
            .unwrap();
        let shots = 20_000;
        let wrong: usize = (0..shots)
            .map(|k| {
                preparation_flips(&spec, k as u64)
                    .iter()
                    .filter(|&&f| f)
                    .count()
            })
            .sum();
        let mean = wrong as f64 / shots as f64;
        // binomial mean 0.5, standard error ≈ 0.0049
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn plus_y_pair_matches_closed_form() {
        let spec = PreparationSpec::new(2, PreparationTarget::AllPlusY, 0.0).unwrap();
        let psi = prepare(&spec, 0).unwrap();
        // (|↑↑⟩ − |↓↓⟩ + i(|↑↓⟩ + |↓↑⟩))/2 up to a global phase
        let h = 0.5;
        let target = [
            C64::new(-h, 0.0),
            C64::new(0.0, h),
            C64::new(0.0, h),
            C64::new(h, 0.0),
        ];
        let overlap: C64 = psi
            .amplitudes()
            .iter()
            .zip(&target)
            .map(|(a, b)| b.conj() * a)
            .sum();
        assert_relative_eq!(overlap.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(psi.expectation_single(0, Axis::Y), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn basis_state_without_spam_is_deterministic() {
        let psi = StateVector::basis(6, 0b101100).unwrap();
        let shots = sample_bitstrings(&psi, 50, &SpamModel::ideal(), 3).unwrap();
        assert!(shots.iter().all(|s| s.bits == 0b101100));
        assert!(sample_bitstrings(&psi, 0, &SpamModel::ideal(), 3)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn false_negative_rate_on_all_down() {
        let psi = StateVector::basis(10, 0).unwrap();
        let shots = sample_bitstrings(&psi, 10_000, &SpamModel::default(), 9).unwrap();
        let mean = shots.iter().map(|s| s.up_count()).sum::<usize>() as f64 / 1e4;
        // 10 · 0.035 with standard error ≈ 0.0058
        assert!((mean - 0.35).abs() < 0.025, "{mean}");
    }

    #[test]
    fn bell_pair_statistics() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = vec![
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
        ];
        let psi = StateVector::from_amplitudes(2, amps).unwrap();
        let shots = sample_bitstrings(&psi, 10_000, &SpamModel::ideal(), 5).unwrap();
        let ones = shots.iter().filter(|s| s.bits == 0b01).count() as f64 / 1e4;
        assert!(shots.iter().all(|s| s.bits == 0b01 || s.bits == 0b10));
        assert!((ones - 0.5).abs() < 0.02);
    }

    #[test]
    fn spam_channel_algebra() {
        let spam = SpamModel::default();
        let up = StateVector::basis(1, 1).unwrap();
        assert_relative_eq!(
            spam_adjusted_expectation(&up, &[(0, Axis::Z)], &spam).unwrap(),
            0.9,
            epsilon = 1e-12
        );
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus =
            StateVector::from_amplitudes(1, vec![C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap();
        assert_relative_eq!(
            spam_adjusted_expectation(&plus, &[(0, Axis::Z)], &spam).unwrap(),
            -0.015,
            epsilon = 1e-12
        );
        let ideal = SpamModel::ideal();
        assert_relative_eq!(
            spam_adjusted_expectation(&up, &[(0, Axis::Z)], &ideal).unwrap(),
            1.0
        );
        assert!(spam_adjusted_expectation(&up, &[(0, Axis::X)], &spam).is_err());
    }

    #[test]
    fn y_readout_through_rotation() {
        let spec = PreparationSpec::new(3, PreparationTarget::AllPlusY, 0.0).unwrap();
        let psi = prepare(&spec, 0).unwrap();
        let spam = SpamModel::new(0.1, 0.02).unwrap();
        let v = spam_adjusted_expectation(&psi, &[(1, Axis::Y)], &spam).unwrap();
        assert_relative_eq!(v, spam.apply_to_expectation(1.0), epsilon = 1e-12);
        let zz = spam_adjusted_expectation(&psi, &[(0, Axis::Y), (2, Axis::Y)], &spam).unwrap();
        assert_relative_eq!(zz, spam.apply_to_expectation(1.0).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn shots_file_round_trip() {
        let psi = StateVector::basis(5, 0b10011).unwrap();
        let spam = SpamModel::default();
        let shots = sample_bitstrings(&psi, 20, &spam, 77).unwrap();
        let text = write_shots(&shots, 5, 77, &spam);
        let parsed = parse_shots(&text).unwrap();
        assert_eq!(parsed.shots, shots);
        assert_eq!(parsed.spam, spam);
        assert_eq!(parsed.seed, 77);
        assert!(
            parse_shots("# n_atoms=2 seed=1 p_false_positive=0 p_false_negative=0\n012\n").is_err()
        );
        assert!(parse_shots("n_atoms=2\n").is_err());
    }

    #[test]
    fn readout_distribution_matches_affine_channel() {
        let spec = PreparationSpec::new(3, PreparationTarget::AllPlusY, 0.0).unwrap();
        let mut psi = prepare(&spec, 0).unwrap();
        psi.apply_single(1, &state::rotation_gate([0.3, 0.2, 0.9], 0.7));
        let spam = SpamModel::new(0.05, 0.035).unwrap();
        let dist = readout_distribution(&psi.probabilities(), 3, &spam).unwrap();
        assert_relative_eq!(dist.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        for site in 0..3 {
            let measured: f64 = dist
                .iter()
                .enumerate()
                .map(|(s, p)| if s >> site & 1 == 1 { *p } else { -p })
                .sum();
            let oracle = spam_adjusted_expectation(&psi, &[(site, Axis::Z)], &spam).unwrap();
            assert_relative_eq!(measured, oracle, epsilon = 1e-12);
        }
        assert!(readout_distribution(&[1.0, 0.0], 2, &spam).is_err());
    }
}
