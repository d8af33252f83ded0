//! Atom-array geometries and the resonant dipole-dipole coupling matrix.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::rng::{self, domain};

pub type Vec3 = [f64; 3];

/// Smallest pairwise distance (μm) accepted between two atoms.
const MIN_DISTANCE_UM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    ObcChain,
    PbcRing,
    Square2D,
    Custom,
}

/// Layout requested from [`build_geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    ObcChain { n: usize },
    PbcRing { n: usize },
    Square2D { rows: usize, cols: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    positions: Vec<Vec3>,
    boundary: Boundary,
    quantization_axis: Vec3,
}

#[derive(Serialize, Deserialize)]
struct GeometryJson {
    positions: Vec<Vec3>,
    axis: Vec3,
    boundary: Boundary,
}

fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl Geometry {
    /// Validates positions and normalises the quantization axis.
    pub fn new(positions: Vec<Vec3>, boundary: Boundary, quantization_axis: Vec3) -> Result<Self> {
        if positions.is_empty() {
            return Err(SimError::InvalidGeometry("no atoms".into()));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(SimError::InvalidGeometry("non-finite coordinate".into()));
        }
        let axis_norm = norm(quantization_axis);
        if !axis_norm.is_finite() || axis_norm < 1e-12 {
            return Err(SimError::InvalidGeometry(
                "quantization axis must be a non-zero finite vector".into(),
            ));
        }
        let axis = quantization_axis.map(|c| c / axis_norm);
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                let r = norm(sub(positions[i], positions[j]));
                if r <= MIN_DISTANCE_UM {
                    return Err(SimError::InvalidGeometry(format!(
                        "atoms {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            positions,
            boundary,
            quantization_axis: axis,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn quantization_axis(&self) -> Vec3 {
        self.quantization_axis
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        norm(sub(self.positions[i], self.positions[j]))
    }

    /// Nearest-neighbour bonds of a chain or ring in site order. Square and
    /// custom geometries return the bonds between atoms at the minimal
    /// pairwise distance.
    pub fn nearest_neighbor_bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_atoms();
        match self.boundary {
            Boundary::ObcChain => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Boundary::PbcRing if n > 2 => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Boundary::PbcRing => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Boundary::Square2D | Boundary::Custom => {
                let mut dmin = f64::INFINITY;
                for i in 0..n {
                    for j in (i + 1)..n {
                        dmin = dmin.min(self.distance(i, j));
                    }
                }
                let mut bonds = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if (self.distance(i, j) - dmin).abs() <= 1e-6 * dmin {
                            bonds.push((i, j));
                        }
                    }
                }
                bonds
            }
        }
    }

    /// Copy with the atoms at `sites` only, in the given order.
    pub fn subset(&self, sites: &[usize]) -> Result<Geometry> {
        if sites.iter().any(|&s| s >= self.n_atoms()) {
            return Err(SimError::param("subset site out of range"));
        }
        Geometry::new(
            sites.iter().map(|&s| self.positions[s]).collect(),
            Boundary::Custom,
            self.quantization_axis,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = GeometryJson {
            positions: self.positions.clone(),
            axis: self.quantization_axis,
            boundary: self.boundary,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GeometryJson = serde_json::from_str(text)?;
        Geometry::new(doc.positions, doc.boundary, doc.axis)
    }
}

pub fn build_geometry(
    kind: GeometryKind,
    spacing_um: f64,
    quantization_axis: Vec3,
) -> Result<Geometry> {
    if !(spacing_um.is_finite() && spacing_um > 0.0) {
        return Err(SimError::InvalidGeometry(format!(
            "spacing must be positive, got {spacing_um}"
        )));
    }
    let (positions, boundary) = match kind {
        GeometryKind::ObcChain { n } => {
            if n == 0 {
                return Err(SimError::InvalidGeometry(
                    "chain needs at least one atom".into(),
                ));
            }
            let p = (0..n).map(|i| [i as f64 * spacing_um, 0.0, 0.0]).collect();
            (p, Boundary::ObcChain)
        }
        GeometryKind::PbcRing { n } => {
            if n < 3 {
                return Err(SimError::InvalidGeometry(format!(
                    "a ring needs at least 3 atoms, got {n}"
                )));
            }
            let radius = ring_radius(n, spacing_um);
            let p = (0..n)
                .map(|k| {
                    let phi = std::f64::consts::TAU * k as f64 / n as f64;
                    [radius * phi.cos(), radius * phi.sin(), 0.0]
                })
                .collect();
            (p, Boundary::PbcRing)
        }
        GeometryKind::Square2D { rows, cols } => {
            if rows == 0 || cols == 0 {
                return Err(SimError::InvalidGeometry(
                    "square array needs rows, cols >= 1".into(),
                ));
            }
            let mut p = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    p.push([c as f64 * spacing_um, r as f64 * spacing_um, 0.0]);
                }
            }
            (p, Boundary::Square2D)
        }
    };
    Geometry::new(positions, boundary, quantization_axis)
}

/// Radius of the ring of `n` atoms whose nearest-neighbour chord is `spacing`.
pub fn ring_radius(n: usize, spacing_um: f64) -> f64 {
    spacing_um / (2.0 * (std::f64::consts::PI / n as f64).sin())
}

/// Symmetric matrix of pairwise couplings `J_ij` in MHz with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CouplingMatrix {
    /// Builds from a dense row-major matrix; symmetry is enforced to 1e-12
    /// relative and the diagonal must vanish.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(SimError::param("coupling matrix must be square"));
        }
        let scale = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(SimError::param("coupling matrix diagonal must be zero"));
            }
            for j in 0..n {
                if !rows[i][j].is_finite() {
                    return Err(SimError::param("non-finite coupling"));
                }
                if (rows[i][j] - rows[j][i]).abs() > 1e-12 * scale.max(1e-300) {
                    return Err(SimError::param(format!(
                        "coupling matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let values = rows.iter().flatten().copied().collect();
        Ok(Self { n, values })
    }

    /// Uniform nearest-neighbour-only couplings on the given bonds.
    pub fn from_bonds(n: usize, bonds: &[(usize, usize)], j: f64) -> Result<Self> {
        let mut rows = vec![vec![0.0; n]; n];
        for &(a, b) in bonds {
            if a >= n || b >= n || a == b {
                return Err(SimError::param("invalid bond"));
            }
            rows[a][b] = j;
            rows[b][a] = j;
        }
        Self::from_rows(&rows)
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// All pairs `i < j` with their coupling, including zeros.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Sub-matrix over `sites` in the given order.
    pub fn restrict(&self, sites: &[usize]) -> Self {
        let n = sites.len();
        let mut values = Vec::with_capacity(n * n);
        for &a in sites {
            for &b in sites {
                values.push(self.get(a, b));
            }
        }
        Self { n, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `J_ij = C3 (1 - 3 cos²θ_ij) / (2 r_ij³)` with `θ_ij` the angle between the
/// interatomic vector and the quantization axis.
pub fn couplings(g: &Geometry, c3_mhz_um3: f64) -> Result<CouplingMatrix> {
    if !c3_mhz_um3.is_finite() {
        return Err(SimError::param("C3 must be finite"));
    }
    let n = g.n_atoms();
    let axis = g.quantization_axis();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sub(g.positions[j], g.positions[i]);
            let r = norm(d);
            if r <= MIN_DISTANCE_UM {
                return Err(SimError::InvalidGeometry(format!(
                    "atoms {i} and {j} coincide"
                )));
            }
            let cos_t = dot(d, axis) / r;
            let jij = c3_mhz_um3 * (1.0 - 3.0 * cos_t * cos_t) / (2.0 * r * r * r);
            values[i * n + j] = jij;
            values[j * n + i] = jij;
        }
    }
    Ok(CouplingMatrix { n, values })
}

/// `C3` that produces coupling `j_mhz` between two atoms `r_um` apart at angle
/// `theta` to the quantization axis.
pub fn c3_for_coupling(j_mhz: f64, r_um: f64, theta: f64) -> Result<f64> {
    let angular = 1.0 - 3.0 * theta.cos().powi(2);
    if angular.abs() < 1e-12 {
        return Err(SimError::param(
            "no C3 reproduces a coupling at the magic angle",
        ));
    }
    Ok(2.0 * j_mhz * r_um.powi(3) / angular)
}

/// Mean interaction energy `J_m = (1/N) Σ_{i≠j} |J_ij|`.
pub fn mean_coupling(j: &CouplingMatrix) -> f64 {
    let n = j.n_atoms();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = j.values.iter().map(|v| v.abs()).sum();
    total / n as f64
}

/// Gaussian position noise: every coordinate is displaced independently with
/// standard deviation `sigma_um`.
pub fn jitter(g: &Geometry, sigma_um: f64, seed: u64) -> Result<Geometry> {
    if !(sigma_um.is_finite() && sigma_um >= 0.0) {
        return Err(SimError::param(format!(
            "jitter sigma must be >= 0, got {sigma_um}"
        )));
    }
    if sigma_um == 0.0 {
        return Ok(g.clone());
    }
    let normal = Normal::new(0.0, sigma_um).map_err(|e| SimError::param(e.to_string()))?;
    let mut rng = rng::rng_for(seed, &[domain::JITTER]);
    let positions = g
        .positions
        .iter()
        .map(|p| p.map(|c| c + normal.sample(&mut rng)))
        .collect();
    Geometry::new(positions, g.boundary, g.quantization_axis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const Z: Vec3 = [0.0, 0.0, 1.0];

    #[test]
    fn ring_chord_equals_spacing() {
        let g = build_geometry(GeometryKind::PbcRing { n: 10 }, 19.0, Z).unwrap();
        let radius = norm(g.positions()[0]);
        assert_relative_eq!(radius, 30.7426, epsilon = 1e-4);
        for i in 0..10 {
            assert_relative_eq!(g.distance(i, (i + 1) % 10), 19.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_atom_chain() {
        let g = build_geometry(GeometryKind::ObcChain { n: 2 }, 30.0, Z).unwrap();
        assert_eq!(g.positions(), &[[0.0, 0.0, 0.0], [30.0, 0.0, 0.0]]);
    }

    #[test]
    fn square_bond_count_by_enumeration() {
        let g = build_geometry(GeometryKind::Square2D { rows: 4, cols: 8 }, 27.0, Z).unwrap();
        assert_eq!(g.n_atoms(), 32);
        let mut bonds = 0;
        for i in 0..32 {
            for j in (i + 1)..32 {
                if (g.distance(i, j) - 27.0).abs() < 1e-9 {
                    bonds += 1;
                }
            }
        }
        assert_eq!(bonds, 52);
        assert_eq!(g.nearest_neighbor_bonds().len(), 52);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_geometry(GeometryKind::ObcChain { n: 3 }, 0.0, Z).is_err());
        assert!(build_geometry(GeometryKind::ObcChain { n: 3 }, -1.0, Z).is_err());
        assert!(build_geometry(GeometryKind::PbcRing { n: 2 }, 5.0, Z).is_err());
        assert!(build_geometry(GeometryKind::ObcChain { n: 3 }, 5.0, [0.0; 3]).is_err());
        assert!(Geometry::new(vec![[0.0; 3], [0.0; 3]], Boundary::Custom, Z).is_err());
    }

    #[test]
    fn axial_pair_coupling() {
        let g = build_geometry(GeometryKind::ObcChain { n: 2 }, 30.0, [1.0, 0.0, 0.0]).unwrap();
        let c3 = 0.93 * 27000.0;
        let j = couplings(&g, c3).unwrap();
        assert_relative_eq!(j.get(0, 1), -c3 / 27000.0, epsilon = 1e-12);
        assert_relative_eq!(j.get(0, 1).abs(), 0.93, epsilon = 1e-12);
    }

    #[test]
    fn magic_angle_vanishes() {
        let theta = (1.0f64 / 3.0f64.sqrt()).acos();
        let g = Geometry::new(
            vec![[0.0; 3], [20.0 * theta.sin(), 0.0, 20.0 * theta.cos()]],
            Boundary::Custom,
            Z,
        )
        .unwrap();
        assert!(couplings(&g, 5000.0).unwrap().get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn perpendicular_square_nn_coupling() {
        let c3 = 2.0 * 0.133 * 27f64.powi(3);
        assert_relative_eq!(c3, 5235.6, epsilon = 0.1);
        let g = build_geometry(GeometryKind::Square2D { rows: 2, cols: 2 }, 27.0, Z).unwrap();
        let j = couplings(&g, c3).unwrap();
        assert_relative_eq!(j.get(0, 1), 0.133, epsilon = 1e-12);
        assert_relative_eq!(
            c3_for_coupling(0.133, 27.0, std::f64::consts::FRAC_PI_2).unwrap(),
            c3
        );
    }

    #[test]
    fn mean_coupling_pair() {
        let j = CouplingMatrix::from_rows(&[vec![0.0, -0.93], vec![-0.93, 0.0]]).unwrap();
        assert_relative_eq!(mean_coupling(&j), 0.93, epsilon = 1e-12);
    }

    #[test]
    fn jitter_contract() {
        let g = build_geometry(GeometryKind::ObcChain { n: 2 }, 30.0, Z).unwrap();
        assert_eq!(jitter(&g, 0.0, 1).unwrap(), g);
        assert_eq!(jitter(&g, 1.0, 5).unwrap(), jitter(&g, 1.0, 5).unwrap());
        assert_ne!(jitter(&g, 1.0, 5).unwrap(), jitter(&g, 1.0, 6).unwrap());
        assert!(jitter(&g, -1.0, 5).is_err());
    }

    #[test]
    fn jitter_statistics() {
        let g = build_geometry(GeometryKind::ObcChain { n: 2 }, 30.0, Z).unwrap();
        let samples: Vec<f64> = (0..10_000)
            .map(|s| jitter(&g, 1.0, s).unwrap().positions()[1][1])
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var =
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        assert!((var.sqrt() - 1.0).abs() < 0.05, "stddev {}", var.sqrt());
    }

    #[test]
    fn json_round_trip_keeps_precision() {
        let g = build_geometry(GeometryKind::PbcRing { n: 7 }, 19.123456789, Z).unwrap();
        let back = Geometry::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(Geometry::from_json(
            "{\"positions\": [], \"axis\": [0,0,1], \"boundary\": \"custom\"}"
        )
        .is_err());
    }
}
