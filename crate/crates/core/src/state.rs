//! State vectors over the `2^N` computational basis and single-atom gates.

use num_complex::Complex64 as C64;

use crate::error::{Result, SimError};

/// Largest register handled as a full state vector.
pub const MAX_STATE_ATOMS: usize = 24;

/// Cartesian spin axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }
}

/// 2×2 matrix in the single-atom basis `(|↓⟩, |↑⟩)`.
pub type Gate = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn pauli(axis: Axis) -> Gate {
    match axis {
        Axis::X => [[ZERO, ONE], [ONE, ZERO]],
        // σ^y|↓⟩ = -i|↑⟩, σ^y|↑⟩ = i|↓⟩
        Axis::Y => [[ZERO, I], [-I, ZERO]],
        Axis::Z => [[-ONE, ZERO], [ZERO, ONE]],
    }
}

pub fn gate_mul(a: &Gate, b: &Gate) -> Gate {
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn gate_adjoint(a: &Gate) -> Gate {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub fn identity_gate() -> Gate {
    [[ONE, ZERO], [ZERO, ONE]]
}

/// `exp(-i θ/2 n·σ)`; the axis is normalized first.
pub fn rotation_gate(axis: [f64; 3], angle: f64) -> Gate {
    let (s, c) = (angle / 2.0).sin_cos();
    let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if len == 0.0 {
        return identity_gate();
    }
    let [nx, ny, nz] = axis.map(|v| v / len);
    // n·σ = [[-nz, nx + i ny], [nx - i ny, nz]]
    let ns = [
        [C64::new(-nz, 0.0), C64::new(nx, ny)],
        [C64::new(nx, -ny), C64::new(nz, 0.0)],
    ];
    let mut g = [[ZERO; 2]; 2];
    for r in 0..2 {
        for col in 0..2 {
            let id = if r == col { c } else { 0.0 };
            g[r][col] = C64::new(id, 0.0) - I * s * ns[r][col];
        }
    }
    g
}

/// Rotation matrix `M` with `U† σ_a U = Σ_b M[a][b] σ_b`.
pub fn heisenberg_rotation(u: &Gate) -> [[f64; 3]; 3] {
    let axes = [Axis::X, Axis::Y, Axis::Z];
    let mut m = [[0.0; 3]; 3];
    let ud = gate_adjoint(u);
    for (a, &ax) in axes.iter().enumerate() {
        let conj = gate_mul(&ud, &gate_mul(&pauli(ax), u));
        for (b, &bx) in axes.iter().enumerate() {
            // ½ Tr(σ_b · conj)
            let p = pauli(bx);
            let tr = p[0][0] * conj[0][0]
                + p[0][1] * conj[1][0]
                + p[1][0] * conj[0][1]
                + p[1][1] * conj[1][1];
            m[a][b] = 0.5 * tr.re;
        }
    }
    m
}

/// Single-atom state `α|↓⟩ + β|↑⟩` stored as `[α, β]`.
pub type Qubit = [C64; 2];

pub fn qubit_down() -> Qubit {
    [ONE, ZERO]
}

pub fn qubit_up() -> Qubit {
    [ZERO, ONE]
}

pub fn apply_gate_to_qubit(g: &Gate, q: &Qubit) -> Qubit {
    [
        g[0][0] * q[0] + g[0][1] * q[1],
        g[1][0] * q[0] + g[1][1] * q[1],
    ]
}

/// Product of single-atom states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    qubits: Vec<Qubit>,
}

impl ProductState {
    pub fn new(qubits: Vec<Qubit>) -> Result<Self> {
        if qubits.is_empty() {
            return Err(SimError::param("product state needs at least one atom"));
        }
        for q in &qubits {
            let n = q[0].norm_sqr() + q[1].norm_sqr();
            if (n - 1.0).abs() > 1e-9 {
                return Err(SimError::param(format!(
                    "single-atom state not normalized (norm² {n})"
                )));
            }
        }
        Ok(Self { qubits })
    }

    /// Basis product state; `up[i]` selects `|↑⟩` for atom `i`.
    pub fn from_bits(up: &[bool]) -> Self {
        Self {
            qubits: up
                .iter()
                .map(|&u| if u { qubit_up() } else { qubit_down() })
                .collect(),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.qubits.len()
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    pub fn restrict(&self, sites: &[usize]) -> ProductState {
        Self {
            qubits: sites.iter().map(|&s| self.qubits[s]).collect(),
        }
    }

    pub fn to_state_vector(&self) -> Result<StateVector> {
        let n = self.n_atoms();
        check_size(n)?;
        let mut amps = vec![ONE];
        // atom i ends up on bit i: prepend higher atoms as the slow index
        for q in &self.qubits {
            let mut next = Vec::with_capacity(amps.len() * 2);
            next.extend(amps.iter().map(|a| a * q[0]));
            next.extend(amps.iter().map(|a| a * q[1]));
            amps = next;
        }
        Ok(StateVector { n_atoms: n, amps })
    }

    /// Single-atom expectation `⟨σ^axis_i⟩`.
    pub fn expectation(&self, site: usize, axis: Axis) -> f64 {
        let q = &self.qubits[site];
        let p = pauli(axis);
        let v = apply_gate_to_qubit(&p, q);
        (q[0].conj() * v[0] + q[1].conj() * v[1]).re
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_STATE_ATOMS {
        return Err(SimError::DimensionLimit {
            n_atoms: n,
            cap: MAX_STATE_ATOMS,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_atoms: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn from_amplitudes(n_atoms: usize, amps: Vec<C64>) -> Result<Self> {
        check_size(n_atoms)?;
        if amps.len() != 1usize << n_atoms {
            return Err(SimError::DimensionMismatch {
                expected: 1 << n_atoms,
                got: amps.len(),
            });
        }
        Ok(Self { n_atoms, amps })
    }

    pub fn basis(n_atoms: usize, index: usize) -> Result<Self> {
        check_size(n_atoms)?;
        let dim = 1usize << n_atoms;
        if index >= dim {
            return Err(SimError::param("basis index out of range"));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { n_atoms, amps })
    }

    /// Basis state with `|↑⟩` on the listed sites.
    pub fn with_up_sites(n_atoms: usize, up: &[usize]) -> Result<Self> {
        let mut idx = 0usize;
        for &s in up {
            if s >= n_atoms {
                return Err(SimError::param("site out of range"));
            }
            idx |= 1 << s;
        }
        Self::basis(n_atoms, idx)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|⟨a|b⟩|²` for normalised states.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies the same gate to every atom.
    pub fn apply_global(&mut self, g: &Gate) {
        for site in 0..self.n_atoms {
            self.apply_single(site, g);
        }
    }

    pub fn apply_single(&mut self, site: usize, g: &Gate) {
        apply_single_raw(&mut self.amps, site, g);
    }

    /// `⟨σ^axis_site⟩`.
    pub fn expectation_single(&self, site: usize, axis: Axis) -> f64 {
        let bit = 1usize << site;
        match axis {
            Axis::Z => self
                .amps
                .iter()
                .enumerate()
                .map(|(s, a)| {
                    if s & bit != 0 {
                        a.norm_sqr()
                    } else {
                        -a.norm_sqr()
                    }
                })
                .sum(),
            Axis::X | Axis::Y => {
                let mut acc = C64::new(0.0, 0.0);
                for s in 0..self.amps.len() {
                    if s & bit == 0 {
                        let down = self.amps[s];
                        let up = self.amps[s | bit];
                        // ⟨ψ|σ|ψ⟩ restricted to this pair of amplitudes
                        let p = pauli(axis);
                        let v0 = p[0][0] * down + p[0][1] * up;
                        let v1 = p[1][0] * down + p[1][1] * up;
                        acc += down.conj() * v0 + up.conj() * v1;
                    }
                }
                acc.re
            }
        }
    }

    /// `⟨σ^z_i σ^z_j⟩`.
    pub fn expectation_zz(&self, i: usize, j: usize) -> f64 {
        let (bi, bj) = (1usize << i, 1usize << j);
        self.amps
            .iter()
            .enumerate()
            .map(|(s, a)| {
                let same = ((s & bi) != 0) == ((s & bj) != 0);
                if same {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum()
    }

    /// `⟨σ^a_i σ^b_j⟩` for `i ≠ j` and arbitrary axes.
    pub fn expectation_pair(&self, i: usize, a: Axis, j: usize, b: Axis) -> f64 {
        let mut tmp = self.clone();
        tmp.apply_single(j, &pauli(b));
        tmp.apply_single(i, &pauli(a));
        self.inner(&tmp).re
    }

    /// Per-atom mean `⟨Σ_i σ^axis_i⟩ / N`.
    pub fn mean_magnetization(&self, axis: Axis) -> f64 {
        (0..self.n_atoms)
            .map(|s| self.expectation_single(s, axis))
            .sum::<f64>()
            / self.n_atoms as f64
    }
}

pub(crate) fn apply_single_raw(amps: &mut [C64], site: usize, g: &Gate) {
    let bit = 1usize << site;
    let dim = amps.len();
    let mut base = 0usize;
    while base < dim {
        for s in base..base + bit {
            let down = amps[s];
            let up = amps[s | bit];
            amps[s] = g[0][0] * down + g[0][1] * up;
            amps[s | bit] = g[1][0] * down + g[1][1] * up;
        }
        base += bit << 1;
    }
}
