//! Sample grids: the discretized force domains everything else is built on.
//!
//! A grid holds the sample points of one or two force domains, the number of
//! force components carried per point (1 = scalar force, 3 = vector force)
//! and, when the points sit on a regular lattice, the lattice descriptor that
//! k-domain operations require.

use serde::{Deserialize, Serialize};

use crate::error::{EaiError, Result};

/// Which of the two generalized forces a quantity refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForceType {
    One,
    Two,
}

impl ForceType {
    pub const BOTH: [ForceType; 2] = [ForceType::One, ForceType::Two];

    pub fn index(self) -> usize {
        match self {
            ForceType::One => 0,
            ForceType::Two => 1,
        }
    }

    pub fn other(self) -> ForceType {
        match self {
            ForceType::One => ForceType::Two,
            ForceType::Two => ForceType::One,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ForceType::One => "1",
            ForceType::Two => "2",
        }
    }
}

/// Domain membership of a sample point. `Both` covers the case where the two
/// force domains coincide or overlap at that point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainId {
    V1,
    V2,
    Both,
}

impl DomainId {
    pub fn contains(self, m: ForceType) -> bool {
        matches!(
            (self, m),
            (DomainId::V1, ForceType::One) | (DomainId::V2, ForceType::Two) | (DomainId::Both, _)
        )
    }
}

/// Regular lattice descriptor: origin, per-axis spacing and node counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub extents: [usize; 3],
}

impl Lattice {
    pub fn line(n: usize, spacing: f64) -> Lattice {
        Lattice {
            origin: [0.0; 3],
            spacing: [spacing, 1.0, 1.0],
            extents: [n, 1, 1],
        }
    }

    pub fn len(&self) -> usize {
        self.extents[0] * self.extents[1] * self.extents[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, idx: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + idx[0] as f64 * self.spacing[0],
            self.origin[1] + idx[1] as f64 * self.spacing[1],
            self.origin[2] + idx[2] as f64 * self.spacing[2],
        ]
    }

    /// All node positions in row-major (axis 0 slowest) order.
    pub fn nodes(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.extents[0] {
            for j in 0..self.extents[1] {
                for k in 0..self.extents[2] {
                    out.push(self.node([i, j, k]));
                }
            }
        }
        out
    }

    /// Integer coordinates of the node a point coincides with, within
    /// 1e-9 * spacing per axis.
    pub fn node_coords(&self, p: [f64; 3]) -> Result<[usize; 3]> {
        let mut coords = [0usize; 3];
        for axis in 0..3 {
            let extent = self.extents[axis];
            let span = self.spacing[axis];
            if extent <= 1 {
                let tol = 1e-9 * span.abs().max(1.0);
                if (p[axis] - self.origin[axis]).abs() > tol {
                    return Err(EaiError::data(format!(
                        "point {:?} off the lattice along axis {axis}",
                        p
                    )));
                }
                coords[axis] = 0;
                continue;
            }
            let t = (p[axis] - self.origin[axis]) / span;
            let rounded = t.round();
            if (t - rounded).abs() > 1e-9 {
                return Err(EaiError::data(format!(
                    "point {:?} off the lattice along axis {axis} (offset {:.3e} nodes)",
                    p,
                    (t - rounded).abs()
                )));
            }
            if rounded < -0.5 || rounded as usize >= extent {
                return Err(EaiError::data(format!(
                    "point {:?} outside the lattice along axis {axis}",
                    p
                )));
            }
            coords[axis] = rounded as usize;
        }
        Ok(coords)
    }
}

/// Discretization of one or two force domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    points: Vec<[f64; 3]>,
    domains: Vec<DomainId>,
    /// Components per point for force types 1 and 2; each 1 or 3.
    components: [usize; 2],
    lattice: Option<Lattice>,
}

impl SampleGrid {
    pub fn new(
        points: Vec<[f64; 3]>,
        domains: Vec<DomainId>,
        c1: usize,
        c2: usize,
        lattice: Option<Lattice>,
    ) -> Result<SampleGrid> {
        if points.len() != domains.len() {
            return Err(EaiError::dim(format!(
                "{} points vs {} domain labels",
                points.len(),
                domains.len()
            )));
        }
        for &c in &[c1, c2] {
            if c != 1 && c != 3 {
                return Err(EaiError::data(format!(
                    "components per point must be 1 or 3, got {c}"
                )));
            }
        }
        if points.is_empty() {
            return Err(EaiError::data("a grid needs at least one point"));
        }
        if points
            .iter()
            .any(|p| p.iter().any(|x| !x.is_finite()))
        {
            return Err(EaiError::data("non-finite point coordinates"));
        }
        if let Some(lat) = &lattice {
            for p in &points {
                lat.node_coords(*p)?;
            }
        }
        Ok(SampleGrid {
            points,
            domains,
            components: [c1, c2],
            lattice,
        })
    }

    /// All points in a single domain V1 with scalar or vector force.
    pub fn single_domain(points: Vec<[f64; 3]>, c: usize) -> Result<SampleGrid> {
        let n = points.len();
        SampleGrid::new(points, vec![DomainId::V1; n], c, 1, None)
    }

    /// Both force domains share every point (overlapping domains).
    pub fn shared_domain(points: Vec<[f64; 3]>, c1: usize, c2: usize) -> Result<SampleGrid> {
        let n = points.len();
        SampleGrid::new(points, vec![DomainId::Both; n], c1, c2, None)
    }

    /// Two disjoint domains, concatenated (V1 points first).
    pub fn two_domain(
        points1: Vec<[f64; 3]>,
        c1: usize,
        points2: Vec<[f64; 3]>,
        c2: usize,
    ) -> Result<SampleGrid> {
        let mut points = points1.clone();
        points.extend_from_slice(&points2);
        let mut domains = vec![DomainId::V1; points1.len()];
        domains.extend(vec![DomainId::V2; points2.len()]);
        SampleGrid::new(points, domains, c1, c2, None)
    }

    /// A 1D chain of `n` points along x with the given spacing, carrying a
    /// lattice descriptor (suitable for ring/k-domain work).
    pub fn lattice_line(n: usize, spacing: f64, c: usize) -> Result<SampleGrid> {
        let lat = Lattice::line(n, spacing);
        let points = lat.nodes();
        let domains = vec![DomainId::V1; points.len()];
        SampleGrid::new(points, domains, c, 1, Some(lat))
    }

    pub fn with_lattice(mut self, lattice: Lattice) -> Result<SampleGrid> {
        for p in &self.points {
            lattice.node_coords(*p)?;
        }
        self.lattice = Some(lattice);
        Ok(self)
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn domains(&self) -> &[DomainId] {
        &self.domains
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    pub fn components(&self, m: ForceType) -> usize {
        self.components[m.index()]
    }

    /// Grid indices of the points belonging to domain m, in grid order.
    pub fn domain_point_indices(&self, m: ForceType) -> Vec<usize> {
        self.domains
            .iter()
            .enumerate()
            .filter(|(_, d)| d.contains(m))
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of points J_m in domain m.
    pub fn point_count(&self, m: ForceType) -> usize {
        self.domains.iter().filter(|d| d.contains(m)).count()
    }

    /// State dimension c_m * J_m of force type m.
    pub fn state_dim(&self, m: ForceType) -> usize {
        self.components(m) * self.point_count(m)
    }

    /// Dimension of the assembled two-domain state vector.
    pub fn total_dim(&self) -> usize {
        self.state_dim(ForceType::One) + self.state_dim(ForceType::Two)
    }

    /// Offset of force type m's block inside the assembled vector.
    pub fn block_offset(&self, m: ForceType) -> usize {
        match m {
            ForceType::One => 0,
            ForceType::Two => self.state_dim(ForceType::One),
        }
    }

    /// State index of (local point rank, component) within force type m.
    pub fn state_index(&self, m: ForceType, local_point: usize, component: usize) -> Result<usize> {
        let c = self.components(m);
        let j = self.point_count(m);
        if local_point >= j {
            return Err(EaiError::dim(format!(
                "point index {local_point} out of range (J_{} = {j})",
                m.label()
            )));
        }
        if component >= c {
            return Err(EaiError::dim(format!(
                "component {component} out of range (c_{} = {c})",
                m.label()
            )));
        }
        Ok(local_point * c + component)
    }

    /// Position and component of every state index of force type m, in order.
    pub fn state_positions(&self, m: ForceType) -> Vec<([f64; 3], usize)> {
        let c = self.components(m);
        let mut out = Vec::with_capacity(self.state_dim(m));
        for &pi in &self.domain_point_indices(m) {
            for s in 0..c {
                out.push((self.points[pi], s));
            }
        }
        out
    }

    /// True when every point belongs to exactly the single domain m.
    pub fn is_single_domain(&self, m: ForceType) -> bool {
        let only = match m {
            ForceType::One => DomainId::V1,
            ForceType::Two => DomainId::V2,
        };
        self.domains.iter().all(|&d| d == only)
    }
}
