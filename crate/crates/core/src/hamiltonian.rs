//! Spin Hamiltonians on the `2^N` computational basis.
//!
//! Pair Hamiltonians are kept in structured form ([`SpinModel`]): a list of
//! pair coupling tensors plus optional single-atom fields. Dense matrices
//! ([`OperatorMatrix`]) are produced on request for small registers.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::lattice::CouplingMatrix;
use crate::pulse::{PulseSequence, Segment};
use crate::state::{self, Axis, Gate};

/// Default upper bound on atoms for dense operator construction.
pub const DENSE_CAP: usize = 14;

const HERMITICITY_TOL: f64 = 1e-12;

pub type Tensor = [[f64; 3]; 3];

/// `Σ_ab T_ab σ^a_i σ^b_j` for one pair `i < j` (MHz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub tensor: Tensor,
}

/// Structured spin Hamiltonian `H = Σ_pairs T·(σ_i ⊗ σ_j) + Σ_i h_i·σ_i` (MHz).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    n_atoms: usize,
    pairs: Vec<PairTerm>,
    fields: Vec<[f64; 3]>,
}

fn diag_tensor(xx: f64, yy: f64, zz: f64) -> Tensor {
    [[xx, 0.0, 0.0], [0.0, yy, 0.0], [0.0, 0.0, zz]]
}

impl SpinModel {
    pub fn new(n_atoms: usize) -> Self {
        Self {
            n_atoms,
            pairs: Vec::new(),
            fields: vec![[0.0; 3]; n_atoms],
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_atoms
    }

    pub fn pairs(&self) -> &[PairTerm] {
        &self.pairs
    }

    pub fn fields(&self) -> &[[f64; 3]] {
        &self.fields
    }

    /// Adds (accumulates) a pair tensor. The tensor is symmetrised.
    pub fn add_pair(&mut self, i: usize, j: usize, tensor: Tensor) {
        assert!(
            i != j && i < self.n_atoms && j < self.n_atoms,
            "invalid pair ({i},{j})"
        );
        let (i, j, t) = if i < j {
            (i, j, tensor)
        } else {
            let mut t = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    t[a][b] = tensor[b][a];
                }
            }
            (j, i, t)
        };
        let mut sym = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                sym[a][b] = 0.5 * (t[a][b] + t[b][a]);
            }
        }
        if let Some(p) = self.pairs.iter_mut().find(|p| p.i == i && p.j == j) {
            for a in 0..3 {
                for b in 0..3 {
                    p.tensor[a][b] += sym[a][b];
                }
            }
        } else {
            self.pairs.push(PairTerm { i, j, tensor: sym });
        }
    }

    pub fn add_field(&mut self, site: usize, h: [f64; 3]) {
        for a in 0..3 {
            self.fields[site][a] += h[a];
        }
    }

    /// Same model with every pair tensor `T → Mᵀ T M` and field `h → Mᵀ h`,
    /// i.e. conjugated by a global rotation with Heisenberg matrix `M`.
    pub fn toggled(&self, m: &[[f64; 3]; 3]) -> SpinModel {
        let mut out = SpinModel::new(self.n_atoms);
        for p in &self.pairs {
            let mut t = [[0.0; 3]; 3];
            for b in 0..3 {
                for c in 0..3 {
                    let mut acc = 0.0;
                    for a in 0..3 {
                        for d in 0..3 {
                            acc += m[a][b] * p.tensor[a][d] * m[d][c];
                        }
                    }
                    t[b][c] = acc;
                }
            }
            out.pairs.push(PairTerm {
                i: p.i,
                j: p.j,
                tensor: t,
            });
        }
        for (s, h) in self.fields.iter().enumerate() {
            for b in 0..3 {
                out.fields[s][b] = (0..3).map(|a| m[a][b] * h[a]).sum();
            }
        }
        out
    }

    /// `Σ w_k · model_k` for models on the same register.
    pub fn weighted_sum(terms: &[(f64, SpinModel)]) -> Result<SpinModel> {
        let n = terms
            .first()
            .map(|t| t.1.n_atoms)
            .ok_or_else(|| SimError::param("empty sum"))?;
        let mut out = SpinModel::new(n);
        for (w, m) in terms {
            if m.n_atoms != n {
                return Err(SimError::DimensionMismatch {
                    expected: n,
                    got: m.n_atoms,
                });
            }
            for p in &m.pairs {
                out.add_pair(p.i, p.j, p.tensor.map(|r| r.map(|v| v * w)));
            }
            for (s, h) in m.fields.iter().enumerate() {
                out.add_field(s, h.map(|v| v * w));
            }
        }
        Ok(out)
    }

    fn scale(&self) -> f64 {
        let p = self
            .pairs
            .iter()
            .flat_map(|p| p.tensor.iter().flatten())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        self.fields.iter().flatten().fold(p, |m, v| m.max(v.abs()))
    }

    /// Conserves the total excitation number `Σσ^z`.
    pub fn conserves_excitations(&self) -> bool {
        let tol = 1e-14 * self.scale().max(1e-300);
        self.pairs.iter().all(|p| {
            let t = &p.tensor;
            (t[0][0] - t[1][1]).abs() <= tol
                && t[0][1].abs() <= tol
                && t[0][2].abs() <= tol
                && t[1][2].abs() <= tol
        }) && self
            .fields
            .iter()
            .all(|h| h[0].abs() <= tol && h[1].abs() <= tol)
    }

    /// Conserves the parity of the excitation number.
    pub fn conserves_parity(&self) -> bool {
        let tol = 1e-14 * self.scale().max(1e-300);
        self.pairs
            .iter()
            .all(|p| p.tensor[0][2].abs() <= tol && p.tensor[1][2].abs() <= tol)
            && self
                .fields
                .iter()
                .all(|h| h[0].abs() <= tol && h[1].abs() <= tol)
    }

    /// All matrix elements in the computational basis are real.
    pub fn is_real(&self) -> bool {
        let tol = 1e-14 * self.scale().max(1e-300);
        self.pairs
            .iter()
            .all(|p| p.tensor[0][1].abs() <= tol && p.tensor[1][2].abs() <= tol)
            && self.fields.iter().all(|h| h[1].abs() <= tol)
    }

    /// Upper bound on the spectral norm (MHz), Gershgorin-style.
    pub fn norm_bound(&self) -> f64 {
        let compiled = self.compile();
        compiled.norm_bound()
    }

    /// Calls `f(row, value)` for every non-zero element `H[row, col]` of the
    /// given column.
    pub fn for_each_in_column(&self, col: usize, mut f: impl FnMut(usize, C64)) {
        let sign = |s: usize, site: usize| if s >> site & 1 == 1 { 1.0 } else { -1.0 };
        let mut diag = 0.0;
        for p in &self.pairs {
            let t = &p.tensor;
            let (si, sj) = (sign(col, p.i), sign(col, p.j));
            diag += t[2][2] * si * sj;
            let both = C64::new(t[0][0] - t[1][1] * si * sj, t[0][1] * (si + sj));
            if both != C64::new(0.0, 0.0) {
                f(col ^ (1 << p.i) ^ (1 << p.j), both);
            }
            let flip_i = C64::new(t[0][2], si * t[1][2]) * sj;
            if flip_i != C64::new(0.0, 0.0) {
                f(col ^ (1 << p.i), flip_i);
            }
            let flip_j = C64::new(t[2][0], sj * t[2][1]) * si;
            if flip_j != C64::new(0.0, 0.0) {
                f(col ^ (1 << p.j), flip_j);
            }
        }
        for (site, h) in self.fields.iter().enumerate() {
            let s = sign(col, site);
            diag += h[2] * s;
            let flip = C64::new(h[0], s * h[1]);
            if flip != C64::new(0.0, 0.0) {
                f(col ^ (1 << site), flip);
            }
        }
        if diag != 0.0 {
            f(col, C64::new(diag, 0.0));
        }
    }

    pub fn to_operator(&self) -> Result<OperatorMatrix> {
        self.to_operator_capped(DENSE_CAP)
    }

    pub fn to_operator_capped(&self, cap: usize) -> Result<OperatorMatrix> {
        if self.n_atoms > cap {
            return Err(SimError::DimensionLimit {
                n_atoms: self.n_atoms,
                cap,
            });
        }
        let dim = self.dim();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for col in 0..dim {
            self.for_each_in_column(col, |row, v| m[(row, col)] += v);
        }
        Ok(OperatorMatrix {
            n_atoms: self.n_atoms,
            matrix: m,
        })
    }

    /// Pre-computed form for repeated matrix-vector products.
    pub fn compile(&self) -> CompiledModel {
        let dim = self.dim();
        let mut diag = vec![0.0; dim];
        let mut two_flip = Vec::new();
        let mut one_flip = Vec::new();
        for p in &self.pairs {
            let t = &p.tensor;
            let (bi, bj) = (1usize << p.i, 1usize << p.j);
            if t[2][2] != 0.0 {
                for (s, d) in diag.iter_mut().enumerate() {
                    let same = ((s & bi) == 0) == ((s & bj) == 0);
                    *d += if same { t[2][2] } else { -t[2][2] };
                }
            }
            let anti = t[0][0] + t[1][1];
            let up_up = C64::new(t[0][0] - t[1][1], 2.0 * t[0][1]);
            let down_down = up_up.conj();
            if anti != 0.0 || up_up.norm() != 0.0 {
                two_flip.push(TwoFlip {
                    lo: p.i,
                    hi: p.j,
                    anti,
                    up_up,
                    down_down,
                });
            }
            // flip of i with σ^z on j, and flip of j with σ^z on i
            for (flip, z, ax, ay) in [(p.i, p.j, t[0][2], t[1][2]), (p.j, p.i, t[2][0], t[2][1])] {
                if ax != 0.0 || ay != 0.0 {
                    one_flip.push(OneFlip {
                        flip,
                        z: Some(z),
                        hx: ax,
                        hy: ay,
                    });
                }
            }
        }
        for (site, h) in self.fields.iter().enumerate() {
            let b = 1usize << site;
            if h[2] != 0.0 {
                for (s, d) in diag.iter_mut().enumerate() {
                    *d += if s & b != 0 { h[2] } else { -h[2] };
                }
            }
            if h[0] != 0.0 || h[1] != 0.0 {
                one_flip.push(OneFlip {
                    flip: site,
                    z: None,
                    hx: h[0],
                    hy: h[1],
                });
            }
        }
        let has_diag = diag.iter().any(|d| *d != 0.0);
        CompiledModel {
            dim,
            diag,
            has_diag,
            two_flip,
            one_flip,
        }
    }
}

#[inline]
fn insert_zero(x: usize, pos: usize) -> usize {
    let low = x & ((1 << pos) - 1);
    ((x >> pos) << (pos + 1)) | low
}

#[derive(Debug, Clone)]
struct TwoFlip {
    lo: usize,
    hi: usize,
    /// amplitude between anti-parallel configurations
    anti: f64,
    /// amplitude taking `↑↑` to `↓↓`
    up_up: C64,
    down_down: C64,
}

#[derive(Debug, Clone)]
struct OneFlip {
    flip: usize,
    z: Option<usize>,
    hx: f64,
    hy: f64,
}

/// Matrix-free form of a [`SpinModel`].
#[derive(Debug, Clone)]
pub struct CompiledModel {
    dim: usize,
    diag: Vec<f64>,
    has_diag: bool,
    two_flip: Vec<TwoFlip>,
    one_flip: Vec<OneFlip>,
}

impl CompiledModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored non-zero elements, a cost measure for `apply`.
    pub fn nnz(&self) -> usize {
        let two: usize = self
            .two_flip
            .iter()
            .map(|t| {
                (t.anti != 0.0) as usize * self.dim / 2
                    + (t.up_up.norm() != 0.0) as usize * self.dim / 2
            })
            .sum();
        two + self.one_flip.len() * self.dim + if self.has_diag { self.dim } else { 0 }
    }

    /// `out = H·psi` (MHz).
    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        debug_assert_eq!(psi.len(), self.dim);
        if self.has_diag {
            for ((o, p), d) in out.iter_mut().zip(psi).zip(&self.diag) {
                *o = p * d;
            }
        } else {
            out.fill(C64::new(0.0, 0.0));
        }
        let quarter = self.dim >> 2;
        for tf in &self.two_flip {
            let (ml, mh) = (1usize << tf.lo, 1usize << tf.hi);
            let parallel = tf.up_up.norm_sqr() != 0.0;
            for r in 0..quarter {
                let s00 = insert_zero(insert_zero(r, tf.lo), tf.hi);
                let (s01, s10, s11) = (s00 | ml, s00 | mh, s00 | ml | mh);
                if tf.anti != 0.0 {
                    out[s01] += psi[s10] * tf.anti;
                    out[s10] += psi[s01] * tf.anti;
                }
                if parallel {
                    out[s00] += psi[s11] * tf.up_up;
                    out[s11] += psi[s00] * tf.down_down;
                }
            }
        }
        let half = self.dim >> 1;
        for of in &self.one_flip {
            let m = 1usize << of.flip;
            // source ↓ → ↑ picks up hx − i·hy, source ↑ → ↓ picks up hx + i·hy
            let raise = C64::new(of.hx, -of.hy);
            let lower = raise.conj();
            for r in 0..half {
                let s0 = insert_zero(r, of.flip);
                let s1 = s0 | m;
                let zs = match of.z {
                    Some(z) if s0 >> z & 1 == 0 => -1.0,
                    _ => 1.0,
                };
                out[s1] += psi[s0] * raise * zs;
                out[s0] += psi[s1] * lower * zs;
            }
        }
    }

    pub fn norm_bound(&self) -> f64 {
        let dmax = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let two: f64 = self
            .two_flip
            .iter()
            .map(|t| t.anti.abs().max(t.up_up.norm()))
            .sum();
        let one: f64 = self.one_flip.iter().map(|o| o.hx.hypot(o.hy)).sum();
        dmax + two + one
    }
}

/// Dense Hermitian operator over the computational basis (MHz).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    n_atoms: usize,
    matrix: DMatrix<C64>,
}

#[derive(Serialize, Deserialize)]
struct OperatorDump {
    n_atoms: usize,
    dim: usize,
    /// `[row, col, re, im]`
    entries: Vec<(usize, usize, f64, f64)>,
}

impl OperatorMatrix {
    pub fn from_matrix(n_atoms: usize, matrix: DMatrix<C64>) -> Result<Self> {
        let dim = 1usize << n_atoms;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(SimError::DimensionMismatch {
                expected: dim,
                got: matrix.nrows(),
            });
        }
        Ok(Self { n_atoms, matrix })
    }

    pub fn zeros(n_atoms: usize) -> Self {
        let dim = 1usize << n_atoms;
        Self {
            n_atoms,
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    /// `max |H - H†|` over elements.
    pub fn hermiticity_error(&self) -> f64 {
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.max_abs().max(1.0);
        self.hermiticity_error() <= HERMITICITY_TOL * scale
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |A - B|` over elements.
    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |[A, B]|` over elements.
    pub fn commutator_norm(&self, other: &OperatorMatrix) -> f64 {
        let c = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        c.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let v = nalgebra::DVector::from_column_slice(psi);
        (&self.matrix * v).iter().copied().collect()
    }

    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let hv = self.apply(psi);
        psi.iter()
            .zip(&hv)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .re
    }

    /// Eigenvalues in ascending order (Hermitian part).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// JSON dump of the non-zero elements for cross-implementation diffing.
    pub fn dump_json(&self) -> Result<String> {
        let mut entries = Vec::new();
        for c in 0..self.dim() {
            for r in 0..self.dim() {
                let v = self.matrix[(r, c)];
                if v.norm() > 1e-15 {
                    entries.push((r, c, v.re, v.im));
                }
            }
        }
        let dump = OperatorDump {
            n_atoms: self.n_atoms,
            dim: self.dim(),
            entries,
        };
        Ok(serde_json::to_string(&dump)?)
    }

    /// Inverse of [`OperatorMatrix::dump_json`]; limited to [`DENSE_CAP`] atoms.
    pub fn from_dump_json(text: &str) -> Result<Self> {
        let dump: OperatorDump = serde_json::from_str(text)?;
        if dump.n_atoms > DENSE_CAP {
            return Err(SimError::DimensionLimit {
                n_atoms: dump.n_atoms,
                cap: DENSE_CAP,
            });
        }
        let dim = 1usize << dump.n_atoms;
        if dump.dim != dim {
            return Err(SimError::DimensionMismatch {
                expected: dim,
                got: dump.dim,
            });
        }
        let mut matrix = DMatrix::zeros(dim, dim);
        for (r, c, re, im) in dump.entries {
            if r >= dim || c >= dim {
                return Err(SimError::Parse(format!(
                    "entry ({r}, {c}) outside a {dim}-dimensional operator"
                )));
            }
            if !(re.is_finite() && im.is_finite()) {
                return Err(SimError::Parse(format!("entry ({r}, {c}) is not finite")));
            }
            matrix[(r, c)] = C64::new(re, im);
        }
        Ok(Self {
            n_atoms: dump.n_atoms,
            matrix,
        })
    }
}

/// `Σ_i σ^axis_i`.
pub fn collective_spin(n_atoms: usize, axis: Axis) -> Result<OperatorMatrix> {
    let mut m = SpinModel::new(n_atoms);
    for s in 0..n_atoms {
        m.add_field(s, axis.unit());
    }
    m.to_operator()
}

/// `H_XX = ½ Σ_{i≠j} J_ij (σ^x_i σ^x_j + σ^y_i σ^y_j)`.
pub fn xx_model(j: &CouplingMatrix) -> SpinModel {
    xyz_model_weights(j, 1.0, 1.0, 0.0)
}

fn xyz_model_weights(j: &CouplingMatrix, wx: f64, wy: f64, wz: f64) -> SpinModel {
    let mut m = SpinModel::new(j.n_atoms());
    for (a, b, jab) in j.pairs() {
        if jab != 0.0 {
            m.add_pair(a, b, diag_tensor(wx * jab, wy * jab, wz * jab));
        }
    }
    m
}

/// Engineered XXZ couplings: `J^x = 2J/(2+δ)`, `J^z = 2Jδ/(2+δ)`.
pub fn xxz_weights(delta: f64) -> Result<(f64, f64)> {
    if !(0.0..=2.0).contains(&delta) {
        return Err(SimError::param(format!(
            "anisotropy must lie in [0, 2], got {delta}"
        )));
    }
    Ok((2.0 / (2.0 + delta), 2.0 * delta / (2.0 + delta)))
}

pub fn xxz_model(j: &CouplingMatrix, delta: f64) -> Result<SpinModel> {
    let (wx, wz) = xxz_weights(delta)?;
    Ok(xyz_model_weights(j, wx, wx, wz))
}

pub fn xyz_model(
    j: &CouplingMatrix,
    tau1: f64,
    tau2: f64,
    tau3: f64,
    tc: f64,
) -> Result<SpinModel> {
    if [tau1, tau2, tau3]
        .iter()
        .any(|t| !(t.is_finite() && *t >= 0.0))
    {
        return Err(SimError::param("delays must be finite and non-negative"));
    }
    let sum = tau1 + tau2 + tau3;
    if sum <= 0.0 {
        return Err(SimError::param("at least one delay must be positive"));
    }
    if !(tc.is_finite() && ((tc - 2.0 * sum) / tc).abs() <= 1e-9) {
        return Err(SimError::param(format!(
            "cycle time {tc} inconsistent with 2(τ1+τ2+τ3) = {}",
            2.0 * sum
        )));
    }
    let k = 2.0 / tc;
    Ok(xyz_model_weights(
        j,
        k * (tau1 + tau2),
        k * (tau1 + tau3),
        k * (tau2 + tau3),
    ))
}

pub fn build_xx(j: &CouplingMatrix) -> Result<OperatorMatrix> {
    xx_model(j).to_operator()
}

pub fn build_xxz(j: &CouplingMatrix, delta: f64) -> Result<OperatorMatrix> {
    xxz_model(j, delta)?.to_operator()
}

pub fn build_xyz(
    j: &CouplingMatrix,
    tau1: f64,
    tau2: f64,
    tau3: f64,
    tc: f64,
) -> Result<OperatorMatrix> {
    xyz_model(j, tau1, tau2, tau3, tc)?.to_operator()
}

/// `H(t) = H_XX + Ω(t)/2 Σ_i n(t)·σ_i` at time `t` (μs) within the sequence.
pub fn driven_model(j: &CouplingMatrix, seq: &PulseSequence, t: f64) -> SpinModel {
    let mut m = xx_model(j);
    if let Some((pulse, t_rel)) = seq.pulse_at(t) {
        let omega = pulse.rabi_at(t_rel);
        if omega != 0.0 {
            let n = pulse.axis();
            for s in 0..j.n_atoms() {
                m.add_field(s, n.map(|c| 0.5 * omega * c));
            }
        }
    }
    m
}

pub fn driven_hamiltonian(
    j: &CouplingMatrix,
    seq: &PulseSequence,
    t: f64,
) -> Result<OperatorMatrix> {
    driven_model(j, seq, t).to_operator()
}

/// Toggling-frame average of `H_XX` over the sequence with every pulse
/// replaced by an instantaneous rotation at its centre.
pub fn average_model(seq: &PulseSequence, j: &CouplingMatrix) -> Result<SpinModel> {
    const AREA_TOL: f64 = 1e-9;
    let total = seq.duration_us();
    if total <= 0.0 {
        return Err(SimError::param("sequence has zero duration"));
    }
    let hxx = xx_model(j);
    let mut frame: Gate = state::identity_gate();
    let mut terms: Vec<(f64, Gate)> = Vec::new();
    let mut pending = 0.0;
    for seg in seq.segments() {
        match seg {
            Segment::Gap { duration_us } => pending += duration_us,
            Segment::Pulse(p) => {
                if (p.area() - std::f64::consts::FRAC_PI_2).abs() > AREA_TOL {
                    return Err(SimError::param(format!(
                        "average Hamiltonian requires π/2 pulses, found area {}",
                        p.area()
                    )));
                }
                let half = 0.5 * p.window_us();
                terms.push((pending + half, frame));
                pending = half;
                frame = state::gate_mul(&p.ideal_rotation(), &frame);
            }
        }
    }
    terms.push((pending, frame));
    let weighted: Vec<(f64, SpinModel)> = terms
        .into_iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, u)| (w / total, hxx.toggled(&state::heisenberg_rotation(&u))))
        .collect();
    if weighted.is_empty() {
        return Err(SimError::param("sequence has no free evolution"));
    }
    SpinModel::weighted_sum(&weighted)
}

pub fn average_of_sequence(seq: &PulseSequence, j: &CouplingMatrix) -> Result<OperatorMatrix> {
    average_model(seq, j)?.to_operator()
}

/// Which Hamiltonian governs an evolution.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianKind {
    Xx,
    Xxz {
        delta: f64,
    },
    /// Delays in μs; the cycle time is `2(τ1+τ2+τ3)`.
    Xyz {
        tau1: f64,
        tau2: f64,
        tau3: f64,
    },
    Driven(PulseSequence),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    pub couplings: CouplingMatrix,
}

impl HamiltonianSpec {
    pub fn new(kind: HamiltonianKind, couplings: CouplingMatrix) -> Result<Self> {
        match &kind {
            HamiltonianKind::Xxz { delta } => {
                xxz_weights(*delta)?;
            }
            HamiltonianKind::Xyz { tau1, tau2, tau3 } => {
                xyz_model(&couplings, *tau1, *tau2, *tau3, 2.0 * (tau1 + tau2 + tau3))?;
            }
            HamiltonianKind::Xx | HamiltonianKind::Driven(_) => {}
        }
        Ok(Self { kind, couplings })
    }

    pub fn n_atoms(&self) -> usize {
        self.couplings.n_atoms()
    }

    /// Time-independent model, or `None` for a driven spec.
    pub fn static_model(&self) -> Result<Option<SpinModel>> {
        Ok(match &self.kind {
            HamiltonianKind::Xx => Some(xx_model(&self.couplings)),
            HamiltonianKind::Xxz { delta } => Some(xxz_model(&self.couplings, *delta)?),
            HamiltonianKind::Xyz { tau1, tau2, tau3 } => Some(xyz_model(
                &self.couplings,
                *tau1,
                *tau2,
                *tau3,
                2.0 * (tau1 + tau2 + tau3),
            )?),
            HamiltonianKind::Driven(_) => None,
        })
    }

    /// Same kind bound to the couplings of a sub-cluster.
    pub fn restrict(&self, sites: &[usize]) -> HamiltonianSpec {
        HamiltonianSpec {
            kind: self.kind.clone(),
            couplings: self.couplings.restrict(sites),
        }
    }
}
