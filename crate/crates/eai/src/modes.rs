//! Natural-mode decompositions and coupled-mode power.
//!
//! Self blocks are Hermitian and diagonalize into orthonormal modes with real
//! responsivities. Cross blocks decompose by SVD into weighted pairs of
//! mutually coherent fields, one per domain. The assembled tensor diagonalizes
//! jointly over the concatenated two-domain space.

use crate::error::{EaiError, Result};
use crate::grid::{ForceType, SampleGrid};
use crate::linalg::{
    c, gram_residual, hermitian_eigen_desc, hermiticity_residual, phase_fix_column, svd_thin, CMat,
    CVec, RMat,
};
use crate::tensor::{BlockResponseMatrix, Tolerances};

/// What kind of decomposition a mode set came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeKind {
    /// Eigendecomposition of a self block D^mm.
    SelfEigen(ForceType),
    /// SVD of a cross block; vectors are the left (domain 1') set, with
    /// `right_vectors` holding the paired domain-2' set.
    CrossSvd,
    /// Eigendecomposition of the assembled two-domain tensor.
    Joint,
}

/// Relative eigenvalue gap below which neighbours are treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// A spectrum with its mode vectors. Vectors are stored as matrix columns in
/// spectrum order (descending), phase-fixed so each vector's largest-magnitude
/// entry is real positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    pub kind: ModeKind,
    pub spectrum: Vec<f64>,
    pub vectors: CMat,
    /// Cross decompositions only: the right (second-domain) vectors.
    pub right_vectors: Option<CMat>,
    /// Degenerate clusters as half-open index ranges [start, end), each
    /// covering at least two modes. Mode comparisons inside a cluster are
    /// only meaningful at subspace level.
    pub clusters: Vec<(usize, usize)>,
}

impl ModeSet {
    pub fn new(
        kind: ModeKind,
        spectrum: Vec<f64>,
        vectors: CMat,
        right_vectors: Option<CMat>,
        clusters: Vec<(usize, usize)>,
    ) -> ModeSet {
        ModeSet {
            kind,
            spectrum,
            vectors,
            right_vectors,
            clusters,
        }
    }

    pub fn len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty()
    }

    /// Columns 0..k as a matrix (the leading subspace).
    pub fn leading(&self, k: usize) -> CMat {
        self.vectors.columns(0, k.min(self.vectors.ncols())).into_owned()
    }

    /// Sum of squared responsivities.
    pub fn hs_norm(&self) -> f64 {
        self.spectrum.iter().map(|a| a * a).sum()
    }

    /// Split a joint mode vector into its two domain parts.
    pub fn split_joint(&self, grid: &SampleGrid, index: usize) -> Result<(CVec, CVec)> {
        if self.kind != ModeKind::Joint {
            return Err(EaiError::pre("split_joint needs a joint mode set"));
        }
        let n1 = grid.state_dim(ForceType::One);
        let n2 = grid.state_dim(ForceType::Two);
        let col = self.vectors.column(index);
        if col.len() != n1 + n2 {
            return Err(EaiError::dim("mode vector does not match grid dimensions"));
        }
        let v1 = CVec::from_iterator(n1, col.iter().take(n1).copied());
        let v2 = CVec::from_iterator(n2, col.iter().skip(n1).copied());
        Ok((v1, v2))
    }
}

fn degenerate_clusters(spectrum: &[f64]) -> Vec<(usize, usize)> {
    let scale = spectrum.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut clusters = Vec::new();
    let mut start = 0usize;
    for i in 1..=spectrum.len() {
        let connected = i < spectrum.len() && (spectrum[i - 1] - spectrum[i]).abs() < DEGENERACY_GAP * scale;
        if !connected {
            if i - start >= 2 {
                clusters.push((start, i));
            }
            start = i;
        }
    }
    clusters
}

/// Decompose a Hermitian matrix into modes: descending spectrum, phase-fixed
/// eigenvectors, degenerate clusters flagged.
pub fn hermitian_mode_decomposition(a: &CMat, kind: ModeKind, tol_herm: f64) -> Result<ModeSet> {
    let residual = hermiticity_residual(a);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    if residual > tol_herm * scale {
        return Err(EaiError::pre(format!(
            "matrix is not Hermitian (residual {residual:.3e} > {tol_herm:.0e} relative)"
        )));
    }
    let (spectrum, mut vectors) = hermitian_eigen_desc(a)?;
    for i in 0..vectors.ncols() {
        let mut col = vectors.column(i).into_owned();
        phase_fix_column(&mut col);
        vectors.set_column(i, &col);
    }
    let clusters = degenerate_clusters(&spectrum);
    Ok(ModeSet::new(kind, spectrum, vectors, None, clusters))
}

/// Natural modes of a self block D^mm.
pub fn natural_modes(d: &BlockResponseMatrix, m: ForceType, tol: &Tolerances) -> Result<ModeSet> {
    let block = d.block_or_zero(m, m);
    hermitian_mode_decomposition(&block, ModeKind::SelfEigen(m), tol.herm)
}

/// Natural modes of an arbitrary Hermitian matrix (reconstructions, wrapped
/// responses, k-domain tensors).
pub fn natural_modes_matrix(a: &CMat, tol: &Tolerances) -> Result<ModeSet> {
    hermitian_mode_decomposition(a, ModeKind::Joint, tol.herm)
}

/// Relative singular-value floor below which cross modes are dropped.
const CROSS_SPECTRUM_FLOOR: f64 = 1e-12;

/// Hilbert-Schmidt decomposition of a cross block: SVD pairs
/// (weight, left vector, right vector), weights descending. Zero blocks give
/// an empty spectrum.
pub fn cross_modes(block: &CMat) -> Result<ModeSet> {
    if block.is_empty() {
        return Ok(ModeSet::new(
            ModeKind::CrossSvd,
            Vec::new(),
            CMat::zeros(block.nrows(), 0),
            Some(CMat::zeros(block.ncols(), 0)),
            Vec::new(),
        ));
    }
    let (u, s, v) = svd_thin(block)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let keep = s.iter().take_while(|&&x| x > CROSS_SPECTRUM_FLOOR * smax && x > 0.0).count();
    let mut left = CMat::zeros(block.nrows(), keep);
    let mut right = CMat::zeros(block.ncols(), keep);
    for i in 0..keep {
        let mut ucol = u.column(i).into_owned();
        let phase = phase_fix_column(&mut ucol);
        // The same phase rotates the partner so u v^dagger is unchanged.
        let vcol = v.column(i).into_owned() * phase.conj();
        left.set_column(i, &ucol);
        right.set_column(i, &vcol);
    }
    Ok(ModeSet::new(
        ModeKind::CrossSvd,
        s[..keep].to_vec(),
        left,
        Some(right),
        Vec::new(),
    ))
}

/// Joint modes of the assembled two-domain tensor.
pub fn joint_modes(d: &BlockResponseMatrix, tol: &Tolerances) -> Result<ModeSet> {
    hermitian_mode_decomposition(&d.assembled(), ModeKind::Joint, tol.herm)
}

/// Scattering overlaps between a system mode set and a force mode set.
#[derive(Clone, Debug)]
pub struct Coupling {
    /// Per-domain overlap matrices S^m with S^m[i, j] = <d_i^m, f_j^m>.
    pub per_domain: Vec<CMat>,
    /// Summed overlap sum_m S^m.
    pub total: CMat,
    /// t[i, j] = |sum_m S^m[i, j]|^2.
    pub t: RMat,
}

fn domain_overlap(system: &CMat, force: &CMat, rows: std::ops::Range<usize>) -> CMat {
    let len = rows.end - rows.start;
    let sys = system.rows(rows.start, len);
    let frc = force.rows(rows.start, len);
    // S[i, j] = sum_p d_i[p] conj(f_j[p])
    (frc.adjoint() * sys).transpose()
}

/// Couple system modes to force modes: S^m_ij = sum over domain m of
/// d_i^m (f_j^m)^*, and t_ij = |sum_m S^m_ij|^2.
///
/// Both sets must live on the same vector space: two joint sets over a grid,
/// or two single-domain sets of equal dimension.
pub fn coupling_matrix(system: &ModeSet, force: &ModeSet, grid: &SampleGrid) -> Result<Coupling> {
    if system.vectors.nrows() != force.vectors.nrows() {
        return Err(EaiError::dim(format!(
            "system modes on dimension {}, force modes on {}",
            system.vectors.nrows(),
            force.vectors.nrows()
        )));
    }
    let dim = system.vectors.nrows();
    let n1 = grid.state_dim(ForceType::One);
    let ranges: Vec<std::ops::Range<usize>> = if dim == grid.total_dim() && grid.state_dim(ForceType::Two) > 0 {
        vec![0..n1, n1..dim]
    } else {
        vec![0..dim]
    };
    let per_domain: Vec<CMat> = ranges
        .into_iter()
        .map(|r| domain_overlap(&system.vectors, &force.vectors, r))
        .collect();
    let mut total = CMat::zeros(system.len(), force.len());
    for s in &per_domain {
        total += s;
    }
    let t = RMat::from_fn(system.len(), force.len(), |i, j| total[(i, j)].norm_sqr());
    Ok(Coupling { per_domain, total, t })
}

/// Coupled-mode absorbed power: P = 2 omega0 sum_ij alpha_i beta_j t_ij.
pub fn modal_power(alphas: &[f64], betas: &[f64], t: &RMat, omega0: f64) -> Result<f64> {
    if t.nrows() != alphas.len() || t.ncols() != betas.len() {
        return Err(EaiError::dim(format!(
            "t is {}x{}, spectra are {} and {}",
            t.nrows(),
            t.ncols(),
            alphas.len(),
            betas.len()
        )));
    }
    let mut p = 0.0;
    for (i, &a) in alphas.iter().enumerate() {
        for (j, &b) in betas.iter().enumerate() {
            p += a * b * t[(i, j)];
        }
    }
    Ok(2.0 * omega0 * p)
}

/// Wrap the intrinsic response in a scattering operator: K = G^dagger D G.
/// G maps the external force space (columns) into the grid's internal space
/// (rows); K lives on the external space.
pub fn wrap_scattering(d: &BlockResponseMatrix, g: &CMat) -> Result<CMat> {
    let full = d.assembled();
    if g.nrows() != full.nrows() {
        return Err(EaiError::dim(format!(
            "scattering matrix has {} rows, tensor dimension is {}",
            g.nrows(),
            full.nrows()
        )));
    }
    Ok(g.adjoint() * full * g)
}

/// Projection of cross modes onto the self bases of both domains.
#[derive(Clone, Debug)]
pub struct CrossProjection {
    /// coeffs[m][(i, k)] = <d_i^{m'}, d_k^m>: cross mode i on self mode k.
    pub coefficients: [CMat; 2],
    /// Captured fraction sum_k |c_ik|^2 per cross mode, per domain.
    pub captured: [Vec<f64>; 2],
}

/// Project the cross-mode pairs onto the self bases of their domains and
/// report the captured energy fraction per mode (1 when the self basis spans
/// the cross mode).
pub fn project_cross_onto_self(
    cross: &ModeSet,
    self1: &ModeSet,
    self2: &ModeSet,
) -> Result<CrossProjection> {
    let right = cross
        .right_vectors
        .as_ref()
        .ok_or_else(|| EaiError::pre("cross projection needs a cross-svd mode set"))?;
    if self1.vectors.nrows() != cross.vectors.nrows() {
        return Err(EaiError::dim("domain-1 self basis does not match cross modes"));
    }
    if self2.vectors.nrows() != right.nrows() {
        return Err(EaiError::dim("domain-2 self basis does not match cross modes"));
    }
    let coeff = |basis: &CMat, modes: &CMat| -> CMat { basis.adjoint() * modes };
    let c1 = coeff(&self1.vectors, &cross.vectors); // (k, i)
    let c2 = coeff(&self2.vectors, right);
    let captured = |co: &CMat| -> Vec<f64> {
        (0..co.ncols())
            .map(|i| co.column(i).iter().map(|z| z.norm_sqr()).sum())
            .collect()
    };
    let cap1 = captured(&c1);
    let cap2 = captured(&c2);
    Ok(CrossProjection {
        coefficients: [c1.transpose(), c2.transpose()],
        captured: [cap1, cap2],
    })
}

/// Smallest I with sum_{i<=I} alpha_i^2 >= eta * sum alpha_i^2.
/// The spectrum must be sorted descending; an all-zero spectrum gives 0.
pub fn mode_count(spectrum: &[f64], eta: f64) -> Result<usize> {
    if !(0.0 < eta && eta <= 1.0) {
        return Err(EaiError::pre(format!("eta must lie in (0, 1], got {eta}")));
    }
    let total: f64 = spectrum.iter().map(|a| a * a).sum();
    if total <= 0.0 {
        return Ok(0);
    }
    let mut acc = 0.0;
    for (i, &a) in spectrum.iter().enumerate() {
        acc += a * a;
        if acc >= eta * total {
            return Ok(i + 1);
        }
    }
    Ok(spectrum.len())
}

/// Default energy fraction for mode counting; reports always state the value
/// they used.
pub const DEFAULT_MODE_ENERGY_FRACTION: f64 = 0.999;

/// Diagnostic for the range-inclusion claim: the column space of the cross
/// block should lie inside the range of the corresponding self block.
/// Returns the captured fraction of each cross singular vector by the self
/// range (1 = fully inside).
pub fn cross_range_inclusion(d_self: &CMat, d_cross: &CMat, tol: &Tolerances) -> Result<Vec<f64>> {
    if d_self.nrows() != d_cross.nrows() {
        return Err(EaiError::dim("self and cross blocks have different row spaces"));
    }
    let self_modes = hermitian_mode_decomposition(d_self, ModeKind::Joint, tol.herm)?;
    let scale = self_modes.spectrum.first().copied().unwrap_or(0.0);
    let rank = self_modes
        .spectrum
        .iter()
        .take_while(|&&a| a > tol.psd.max(1e-12) * scale.max(f64::MIN_POSITIVE))
        .count();
    let basis = self_modes.leading(rank);
    let cross = cross_modes(d_cross)?;
    let coeffs = basis.adjoint() * &cross.vectors;
    Ok((0..coeffs.ncols())
        .map(|i| coeffs.column(i).iter().map(|z| z.norm_sqr()).sum())
        .collect())
}

/// Orthonormality defect of a mode set's vectors (and right vectors if any).
pub fn orthonormality_residual(set: &ModeSet) -> f64 {
    let mut r = gram_residual(&set.vectors);
    if let Some(right) = &set.right_vectors {
        r = r.max(gram_residual(right));
    }
    r
}

/// Rebuild the Hermitian matrix sum_i alpha_i d_i d_i^dagger from a mode set.
pub fn rebuild_from_modes(set: &ModeSet) -> Result<CMat> {
    crate::linalg::weighted_outer_sum(&set.vectors, &set.spectrum)
}

/// Rebuild a cross block sum_i w_i u_i v_i^dagger.
pub fn rebuild_cross_block(set: &ModeSet) -> Result<CMat> {
    let right = set
        .right_vectors
        .as_ref()
        .ok_or_else(|| EaiError::pre("not a cross mode set"))?;
    let mut out = CMat::zeros(set.vectors.nrows(), right.nrows());
    for (i, &w) in set.spectrum.iter().enumerate() {
        out += set.vectors.column(i) * right.column(i).adjoint() * c(w, 0.0);
    }
    Ok(out)
}
