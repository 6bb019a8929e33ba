//! Port geometry, steering vectors with derivatives, and co-array structure.

use nalgebra::DVector;

use crate::{c64, C64, Error, Result};

/// Absolute position tolerance when collapsing co-array entries.
const COARRAY_TOL: f64 = 1e-9;

/// A uniform grid of `n_ports` antenna ports with a selected subset wired to
/// RF chains.
///
/// Port `n` (1-based) sits at `(n - 1) * spacing` in half-wavelength units.
/// Selected ports keep their absolute grid positions, so the phase reference
/// is the grid origin whether or not port 1 is selected; this keeps subset
/// steering consistent with full-aperture steering during reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    n_ports: usize,
    selected: Vec<usize>,
    positions: Vec<f64>,
    spacing: f64,
}

impl ArrayGeometry {
    /// Builds a geometry from 1-based port indices. Indices may arrive in any
    /// order; they are sorted. Duplicate or out-of-range indices are errors.
    pub fn new(n_ports: usize, selected: &[usize], spacing: f64) -> Result<Self> {
        if n_ports == 0 {
            return Err(Error::Geometry("n_ports must be at least 1".into()));
        }
        if selected.is_empty() {
            return Err(Error::Geometry("selected port set is empty".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Geometry(format!("spacing must be positive, got {spacing}")));
        }
        let mut sel = selected.to_vec();
        sel.sort_unstable();
        for pair in sel.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::Geometry(format!("duplicate port index {}", pair[0])));
            }
        }
        if sel[0] == 0 || *sel.last().unwrap() > n_ports {
            return Err(Error::Geometry(format!(
                "port indices must lie in 1..={n_ports}"
            )));
        }
        let positions = sel.iter().map(|&n| (n - 1) as f64 * spacing).collect();
        Ok(Self { n_ports, selected: sel, positions, spacing })
    }

    /// Geometry with every port selected.
    pub fn full(n_ports: usize, spacing: f64) -> Result<Self> {
        let all: Vec<usize> = (1..=n_ports).collect();
        Self::new(n_ports, &all, spacing)
    }

    /// Number of selected ports (RF chains), `M`.
    pub fn m(&self) -> usize {
        self.selected.len()
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Sorted 1-based indices of the selected ports.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Positions of the selected ports, half-wavelength units, ascending.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
}

/// Steering vector together with its first two angle derivatives.
#[derive(Debug, Clone)]
pub struct SteeringSet {
    pub a: DVector<C64>,
    pub da: DVector<C64>,
    pub dda: DVector<C64>,
}

/// Steering vector over arbitrary element positions (half-wavelength units)
/// at angle `theta` radians from broadside: `a[l] = exp(j*pi*d[l]*sin(theta))`.
pub fn steering_vector(positions: &[f64], theta: f64) -> DVector<C64> {
    let s = theta.sin();
    DVector::from_iterator(
        positions.len(),
        positions.iter().map(|&d| {
            let phase = std::f64::consts::PI * d * s;
            c64(phase.cos(), phase.sin())
        }),
    )
}

/// Steering vector plus exact first and second derivatives in `theta`.
///
/// With `w = pi*d`, `a = exp(j*w*sin)` gives
/// `da = j*w*cos * a` and `dda = -(j*w*sin + w^2*cos^2) * a`.
pub fn steering_set(positions: &[f64], theta: f64) -> SteeringSet {
    let (s, c) = theta.sin_cos();
    let a = steering_vector(positions, theta);
    let mut da = a.clone();
    let mut dda = a.clone();
    for (l, &d) in positions.iter().enumerate() {
        let w = std::f64::consts::PI * d;
        da[l] *= c64(0.0, w * c);
        dda[l] *= c64(-w * w * c * c, -w * s);
    }
    SteeringSet { a, da, dda }
}

/// Virtual array induced by the difference co-array of a geometry.
///
/// Entry `(m1, m2)` of the vectorized second-moment lattice lives at
/// `d[m1] - d[m2]`; laid out row-major over `(m1, m2)` so the virtual
/// steering vector equals `a kron conj(a)` entrywise.
#[derive(Debug, Clone)]
pub struct VirtualGeometry {
    positions: Vec<f64>,
    diff_set: Vec<f64>,
    dof: usize,
}

impl VirtualGeometry {
    /// All `M^2` virtual element positions in kron order.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Sorted distinct difference lags.
    pub fn diff_set(&self) -> &[f64] {
        &self.diff_set
    }

    /// Degrees of freedom: distinct lags minus the zero lag. Fourth-order
    /// identifiability requires `K <= dof`.
    pub fn dof(&self) -> usize {
        self.dof
    }
}

fn sorted_distinct(mut vals: Vec<f64>) -> Vec<f64> {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup_by(|a, b| (*a - *b).abs() <= COARRAY_TOL);
    vals
}

/// Difference co-array of the selected ports.
pub fn virtual_geometry(geom: &ArrayGeometry) -> VirtualGeometry {
    let d = geom.positions();
    let m = d.len();
    let mut positions = Vec::with_capacity(m * m);
    for &d1 in d {
        for &d2 in d {
            positions.push(d1 - d2);
        }
    }
    let diff_set = sorted_distinct(positions.clone());
    let dof = diff_set.len() - 1;
    VirtualGeometry { positions, diff_set, dof }
}

/// Sorted distinct sums `d[m1] + d[m2]`. Holes here but not in the difference
/// set are the signature that separates the two co-array types.
pub fn sum_coarray(geom: &ArrayGeometry) -> Vec<f64> {
    let d = geom.positions();
    let mut sums = Vec::with_capacity(d.len() * d.len());
    for &d1 in d {
        for &d2 in d {
            sums.push(d1 + d2);
        }
    }
    sorted_distinct(sums)
}

/// Steering set over the virtual array positions.
pub fn virtual_steering_set(vg: &VirtualGeometry, theta: f64) -> SteeringSet {
    steering_set(vg.positions(), theta)
}
