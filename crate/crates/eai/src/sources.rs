//! Probe force fields, source catalogs and their SVD dual bases.
//!
//! A campaign's probe fields form the columns of F^src over the assembled
//! state space; the dual basis F~ = U Sigma^-1 V^dagger deconvolves the probe
//! patterns from measured matrix elements. Singular values below a relative
//! threshold are truncated (their inverses set to zero).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{EaiError, Result};
use crate::force::ForceVector;
use crate::grid::{ForceType, SampleGrid};
use crate::linalg::{c, svd_thin, C64, CMat, CVec};

/// Canonical identifier of a catalog column. Constructors produce these in a
/// deterministic lexicographic layout so campaigns are reproducible.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceId(pub String);

impl SourceId {
    pub fn point(m: ForceType, j: usize, s: usize) -> SourceId {
        SourceId(format!("pt:{}:{j:06}:{s}", m.label()))
    }

    pub fn uniform(m: ForceType, s: usize) -> SourceId {
        SourceId(format!("uni:{}:{s}", m.label()))
    }

    pub fn plane_wave(m: ForceType, k: [f64; 3]) -> SourceId {
        SourceId(format!(
            "pw:{}:{:+.9e},{:+.9e},{:+.9e}",
            m.label(),
            k[0],
            k[1],
            k[2]
        ))
    }

    pub fn custom(name: impl Into<String>) -> SourceId {
        SourceId(name.into())
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A point-like unidirectional probe: one non-zero amplitude at (point, axis).
pub fn point_probe(
    grid: &SampleGrid,
    m: ForceType,
    point: usize,
    axis: usize,
    amplitude: C64,
) -> Result<ForceVector> {
    let idx = grid.state_index(m, point, axis)?;
    let mut amp = CVec::zeros(grid.state_dim(m));
    amp[idx] = amplitude;
    ForceVector::new(grid, m, amp)
}

/// A spatially uniform probe along one component.
pub fn uniform_probe(
    grid: &SampleGrid,
    m: ForceType,
    axis: usize,
    amplitude: C64,
) -> Result<ForceVector> {
    let cc = grid.components(m);
    if axis >= cc {
        return Err(EaiError::dim(format!(
            "axis {axis} out of range (c_{} = {cc})",
            m.label()
        )));
    }
    let j = grid.point_count(m);
    let mut amp = CVec::zeros(grid.state_dim(m));
    for p in 0..j {
        amp[p * cc + axis] = amplitude;
    }
    ForceVector::new(grid, m, amp)
}

/// A plane-wave probe with entries a * p_s * exp(i k . r_j). Requires a
/// lattice on the grid and a unit-norm polarization of length c.
pub fn plane_wave_probe(
    grid: &SampleGrid,
    m: ForceType,
    k: [f64; 3],
    polarization: &[C64],
    amplitude: C64,
) -> Result<ForceVector> {
    if grid.lattice().is_none() {
        return Err(EaiError::pre("plane-wave probes need a lattice on the grid"));
    }
    let cc = grid.components(m);
    if polarization.len() != cc {
        return Err(EaiError::dim(format!(
            "polarization has {} components, c_{} = {cc}",
            polarization.len(),
            m.label()
        )));
    }
    let pol_norm: f64 = polarization.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (pol_norm - 1.0).abs() > 1e-10 {
        return Err(EaiError::pre(format!(
            "polarization must be unit norm, got {pol_norm}"
        )));
    }
    let states = grid.state_positions(m);
    let mut amp = CVec::zeros(states.len());
    for (i, (r, s)) in states.iter().enumerate() {
        let phase = k[0] * r[0] + k[1] * r[1] + k[2] * r[2];
        amp[i] = amplitude * polarization[*s] * C64::new(0.0, phase).exp();
    }
    ForceVector::new(grid, m, amp)
}

/// One catalog column: id and probe field.
#[derive(Clone, Debug)]
pub struct SourceEntry {
    pub id: SourceId,
    pub force: ForceVector,
}

/// An ordered catalog of probe fields over a grid. Column n of the matrix
/// view is entry n's force embedded into the assembled state space.
#[derive(Clone, Debug)]
pub struct SourceCatalog {
    grid: SampleGrid,
    entries: Vec<SourceEntry>,
}

impl SourceCatalog {
    pub fn new(grid: SampleGrid) -> SourceCatalog {
        SourceCatalog {
            grid,
            entries: Vec::new(),
        }
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SourceEntry] {
        &self.entries
    }

    pub fn entry(&self, n: usize) -> &SourceEntry {
        &self.entries[n]
    }

    pub fn contains(&self, id: &SourceId) -> bool {
        self.entries.iter().any(|e| &e.id == id)
    }

    /// Append a column. Zero vectors and duplicate ids are rejected.
    pub fn push(&mut self, id: SourceId, force: ForceVector) -> Result<usize> {
        if force.norm() == 0.0 {
            return Err(EaiError::pre(format!("source {id} has a zero force column")));
        }
        if force.amplitudes.len() != self.grid.state_dim(force.force_type) {
            return Err(EaiError::dim(format!(
                "source {id} column does not match the grid dimension"
            )));
        }
        if self.contains(&id) {
            return Err(EaiError::pre(format!("duplicate source id {id}")));
        }
        self.entries.push(SourceEntry { id, force });
        Ok(self.entries.len() - 1)
    }

    /// The identity point-probe catalog for force type m: every (point, axis)
    /// in lexicographic order, common amplitude a.
    pub fn all_points(grid: &SampleGrid, m: ForceType, amplitude: C64) -> Result<SourceCatalog> {
        let mut cat = SourceCatalog::new(grid.clone());
        for j in 0..grid.point_count(m) {
            for s in 0..grid.components(m) {
                let f = point_probe(grid, m, j, s, amplitude)?;
                cat.push(SourceId::point(m, j, s), f)?;
            }
        }
        Ok(cat)
    }

    /// Plane-wave columns for the full DFT k-set of the grid's lattice, with
    /// amplitude 1/sqrt(J) so the catalog's matrix view is exactly unitary on
    /// the position factor (M = D_k for scalar forces).
    pub fn full_dft(grid: &SampleGrid, m: ForceType) -> Result<SourceCatalog> {
        let kgrid = crate::kdomain::KGrid::from_grid(grid)?;
        let cc = grid.components(m);
        if cc != 1 {
            return Err(EaiError::pre(
                "full-DFT catalogs are defined for scalar forces (c = 1)",
            ));
        }
        let j = grid.point_count(m);
        let amp = c(1.0 / (j as f64).sqrt(), 0.0);
        let pol = vec![c(1.0, 0.0)];
        let mut cat = SourceCatalog::new(grid.clone());
        for k in kgrid.wavevectors() {
            let f = plane_wave_probe(grid, m, *k, &pol, amp)?;
            cat.push(SourceId::plane_wave(m, *k), f)?;
        }
        Ok(cat)
    }

    /// Matrix view F^src: assembled state dimension x N.
    pub fn matrix(&self) -> Result<CMat> {
        let dim = self.grid.total_dim();
        let mut f = CMat::zeros(dim, self.entries.len());
        for (n, e) in self.entries.iter().enumerate() {
            let col = e.force.embed(&self.grid)?;
            f.set_column(n, &col);
        }
        Ok(f)
    }

    /// Dual basis of this catalog's matrix view.
    pub fn dual_basis(&self, tol_svd: f64) -> Result<DualBasis> {
        if self.is_empty() {
            return Err(EaiError::pre("catalog is empty"));
        }
        dual_basis(&self.matrix()?, tol_svd)
    }
}

/// F^src = G^src L^src: scale each Green's column by its diagonal dipole
/// amplitude. Zero-amplitude columns are flagged, not dropped.
#[derive(Clone, Debug)]
pub struct SourceMatrix {
    pub f: CMat,
    pub zero_columns: Vec<usize>,
}

pub fn source_matrix(greens: &CMat, dipole_amplitudes: &[C64]) -> Result<SourceMatrix> {
    if greens.ncols() != dipole_amplitudes.len() {
        return Err(EaiError::dim(format!(
            "{} Green's columns vs {} dipole amplitudes",
            greens.ncols(),
            dipole_amplitudes.len()
        )));
    }
    let mut f = greens.clone();
    let mut zero_columns = Vec::new();
    for (n, &l) in dipole_amplitudes.iter().enumerate() {
        if l.norm() == 0.0 {
            zero_columns.push(n);
        }
        let mut col = f.column_mut(n);
        for z in col.iter_mut() {
            *z *= l;
        }
    }
    Ok(SourceMatrix { f, zero_columns })
}

/// The SVD pseudo-inverse basis of a source matrix, with truncation metadata.
#[derive(Clone, Debug)]
pub struct DualBasis {
    /// F~ = U Sigma^-1 V^dagger, same shape as F.
    pub dual: CMat,
    /// Retained left singular vectors (dim x r).
    pub u: CMat,
    /// Retained right singular vectors (N x r).
    pub v: CMat,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
    pub retained_rank: usize,
    pub tol: f64,
}

impl DualBasis {
    /// The measurement-filter projector P = U_r U_r^dagger.
    pub fn projector(&self) -> CMat {
        &self.u * self.u.adjoint()
    }
}

/// Compute the dual basis of F with relative singular-value threshold
/// `tol_svd`: sigma_i < tol_svd * sigma_1 truncates (inverse set to zero).
pub fn dual_basis(f: &CMat, tol_svd: f64) -> Result<DualBasis> {
    if f.ncols() == 0 || f.nrows() == 0 {
        return Err(EaiError::pre("source matrix is empty"));
    }
    let (u, s, v) = svd_thin(f)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return Err(EaiError::pre("source matrix has rank 0"));
    }
    let rank = s.iter().take_while(|&&x| x >= tol_svd * smax && x > 0.0).count();
    let u_r = u.columns(0, rank).into_owned();
    let v_r = v.columns(0, rank).into_owned();
    let mut dual = CMat::zeros(f.nrows(), f.ncols());
    for i in 0..rank {
        let scale = c(1.0 / s[i], 0.0);
        dual += u_r.column(i) * v_r.column(i).adjoint() * scale;
    }
    Ok(DualBasis {
        dual,
        u: u_r,
        v: v_r,
        singular_values: s,
        retained_rank: rank,
        tol: tol_svd,
    })
}
