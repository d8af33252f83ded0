//! Exact propagation by block eigendecomposition.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Result, SimError};
use crate::hamiltonian::{OperatorMatrix, SpinModel};

#[derive(Debug, Clone)]
enum Vectors {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    energies: Vec<f64>,
    vectors: Vectors,
}

/// Eigendecomposition of a Hermitian operator, split into invariant blocks.
#[derive(Debug, Clone)]
pub struct Spectral {
    dim: usize,
    blocks: Vec<Block>,
}

/// Sizes of the blocks [`Spectral::from_model`] would produce.
pub fn block_sizes(model: &SpinModel) -> Vec<usize> {
    let n = model.n_atoms();
    let dim = model.dim();
    let mut sizes = vec![0usize; n + 1];
    if model.conserves_excitations() {
        for s in 0..dim {
            sizes[s.count_ones() as usize] += 1;
        }
        sizes.retain(|&d| d > 0);
        sizes
    } else if model.conserves_parity() && n > 0 {
        vec![dim / 2, dim / 2]
    } else {
        vec![dim]
    }
}

fn label_blocks(labels: &[usize]) -> Vec<Vec<usize>> {
    let n_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); n_labels];
    for (s, &l) in labels.iter().enumerate() {
        out[l].push(s);
    }
    out.retain(|b| !b.is_empty());
    out
}

fn union_find_blocks(op: &OperatorMatrix) -> Vec<Vec<usize>> {
    let dim = op.dim();
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let m = op.matrix();
    for c in 0..dim {
        for r in 0..c {
            if m[(r, c)].norm() != 0.0 || m[(c, r)].norm() != 0.0 {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let labels: Vec<usize> = (0..dim).map(|s| find(&mut parent, s)).collect();
    label_blocks(&labels)
}

fn diagonalize(indices: Vec<usize>, element: impl Fn(usize, usize) -> C64, real: bool) -> Block {
    let d = indices.len();
    if real {
        let m = DMatrix::<f64>::from_fn(d, d, |r, c| element(indices[r], indices[c]).re);
        let eig = SymmetricEigen::new(m);
        Block {
            indices,
            energies: eig.eigenvalues.iter().copied().collect(),
            vectors: Vectors::Real(eig.eigenvectors),
        }
    } else {
        let m = DMatrix::<C64>::from_fn(d, d, |r, c| element(indices[r], indices[c]));
        let eig = SymmetricEigen::new(m);
        Block {
            indices,
            energies: eig.eigenvalues.iter().copied().collect(),
            vectors: Vectors::Complex(eig.eigenvectors),
        }
    }
}

impl Spectral {
    /// Decomposes a structured model, splitting by its conserved quantities.
    pub fn from_model(model: &SpinModel) -> Result<Self> {
        let n = model.n_atoms();
        let dim = model.dim();
        let labels: Vec<usize> = if model.conserves_excitations() {
            (0..dim).map(|s| s.count_ones() as usize).collect()
        } else if model.conserves_parity() {
            (0..dim).map(|s| (s.count_ones() & 1) as usize).collect()
        } else {
            vec![0; dim]
        };
        let blocks_idx = label_blocks(&labels);
        let real = model.is_real();
        let mut local = vec![usize::MAX; dim];
        let mut blocks = Vec::with_capacity(blocks_idx.len());
        for idx in blocks_idx {
            for (k, &s) in idx.iter().enumerate() {
                local[s] = k;
            }
            let d = idx.len();
            let mut m = DMatrix::<C64>::zeros(d, d);
            for (c, &col) in idx.iter().enumerate() {
                let mut leaked = false;
                model.for_each_in_column(col, |row, v| {
                    if labels[row] != labels[col] {
                        leaked = true;
                    } else {
                        m[(local[row], c)] += v;
                    }
                });
                if leaked {
                    return Err(SimError::Numerical(format!(
                        "symmetry block leak for {n}-atom model"
                    )));
                }
            }
            blocks.push(diagonalize(idx, |r, c| m[(local[r], local[c])], real));
        }
        Ok(Self { dim, blocks })
    }

    /// Decomposes a dense operator; blocks are its connected components.
    pub fn from_operator(op: &OperatorMatrix) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(SimError::Numerical(format!(
                "operator is not Hermitian (max |H - H†| = {:.3e})",
                op.hermiticity_error()
            )));
        }
        let m = op.matrix();
        let real = m.iter().all(|v| v.im == 0.0);
        let blocks = union_find_blocks(op)
            .into_iter()
            .map(|idx| diagonalize(idx, |r, c| 0.5 * (m[(r, c)] + m[(c, r)].conj()), real))
            .collect();
        Ok(Self {
            dim: op.dim(),
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All eigenvalues, ascending (MHz).
    pub fn energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.energies.iter().copied())
            .collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    /// Cost of one application in multiply-adds.
    pub fn apply_cost(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| 2 * b.indices.len() * b.indices.len())
            .sum()
    }

    /// Coefficients of `psi` in the eigenbasis, block by block.
    pub fn coefficients(&self, psi: &[C64]) -> Vec<Vec<C64>> {
        self.blocks
            .iter()
            .map(|b| {
                let d = b.indices.len();
                match &b.vectors {
                    Vectors::Real(v) => {
                        let re = DVector::from_iterator(d, b.indices.iter().map(|&s| psi[s].re));
                        let im = DVector::from_iterator(d, b.indices.iter().map(|&s| psi[s].im));
                        let cr = v.tr_mul(&re);
                        let ci = v.tr_mul(&im);
                        cr.iter()
                            .zip(ci.iter())
                            .map(|(a, b)| C64::new(*a, *b))
                            .collect()
                    }
                    Vectors::Complex(v) => {
                        let x = DVector::from_iterator(d, b.indices.iter().map(|&s| psi[s]));
                        v.ad_mul(&x).iter().copied().collect()
                    }
                }
            })
            .collect()
    }

    /// State at time `t` (μs) from eigenbasis coefficients at time zero.
    pub fn reconstruct(&self, coeffs: &[Vec<C64>], t: f64, out: &mut [C64]) {
        for (b, c) in self.blocks.iter().zip(coeffs) {
            let d = b.indices.len();
            let phased: Vec<C64> = c
                .iter()
                .zip(&b.energies)
                .map(|(c, e)| c * C64::from_polar(1.0, -2.0 * PI * e * t))
                .collect();
            match &b.vectors {
                Vectors::Real(v) => {
                    let re = DVector::from_iterator(d, phased.iter().map(|z| z.re));
                    let im = DVector::from_iterator(d, phased.iter().map(|z| z.im));
                    let yr = v * re;
                    let yi = v * im;
                    for (k, &s) in b.indices.iter().enumerate() {
                        out[s] = C64::new(yr[k], yi[k]);
                    }
                }
                Vectors::Complex(v) => {
                    let x = DVector::from_vec(phased);
                    let y = v * x;
                    for (k, &s) in b.indices.iter().enumerate() {
                        out[s] = y[k];
                    }
                }
            }
        }
    }

    /// `exp(−i·2π·H·t)·psi` in place.
    pub fn propagate(&self, psi: &mut [C64], t: f64) {
        let c = self.coefficients(psi);
        self.reconstruct(&c, t, psi);
    }
}
