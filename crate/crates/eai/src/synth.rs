//! Synthetic response tensors with known ground-truth modes.
//!
//! Everything here builds Hermitian tensors whose spectra and mode subspaces
//! are known exactly, so reconstruction and decomposition can be verified end
//! to end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{EaiError, Result};
use crate::grid::{ForceType, SampleGrid};
use crate::linalg::{c, gram_residual, min_eigenvalue, weighted_outer_sum, CMat, CVec};
use crate::modes::{ModeKind, ModeSet};
use crate::tensor::{BlockResponseMatrix, Tolerances};

/// A self mode: responsivity and its vector over one domain.
#[derive(Clone, Debug)]
pub struct ModeSpec {
    pub alpha: f64,
    pub vector: CVec,
}

/// A cross pair: weight and the unit-norm vectors of the two domains.
#[derive(Clone, Debug)]
pub struct CrossPairSpec {
    pub weight: f64,
    pub left: CVec,
    pub right: CVec,
}

const GRAM_TOL: f64 = 1e-8;

/// D^mm = sum_i alpha_i d_i d_i^dagger from an orthonormal mode set.
pub fn from_self_modes(grid: &SampleGrid, m: ForceType, modes: &[ModeSpec]) -> Result<CMat> {
    let dim = grid.state_dim(m);
    if modes.is_empty() {
        return Ok(CMat::zeros(dim, dim));
    }
    let mut vectors = CMat::zeros(dim, modes.len());
    let mut weights = Vec::with_capacity(modes.len());
    for (i, spec) in modes.iter().enumerate() {
        if spec.vector.len() != dim {
            return Err(EaiError::dim(format!(
                "mode {i} has length {}, state dimension is {dim}",
                spec.vector.len()
            )));
        }
        if spec.alpha < 0.0 || !spec.alpha.is_finite() {
            return Err(EaiError::pre(format!(
                "responsivity of mode {i} must be finite and >= 0, got {}",
                spec.alpha
            )));
        }
        vectors.set_column(i, &spec.vector);
        weights.push(spec.alpha);
    }
    let gram = gram_residual(&vectors);
    if gram > GRAM_TOL {
        return Err(EaiError::pre(format!(
            "self modes are not orthonormal (Gram residual {gram:.3e} > {GRAM_TOL:.0e})"
        )));
    }
    weighted_outer_sum(&vectors, &weights)
}

/// Off-diagonal blocks D12 = sum_i w_i left_i right_i^dagger and D21 = D12^dagger.
pub fn from_cross_pairs(grid: &SampleGrid, pairs: &[CrossPairSpec]) -> Result<(CMat, CMat)> {
    let n1 = grid.state_dim(ForceType::One);
    let n2 = grid.state_dim(ForceType::Two);
    let mut d12 = CMat::zeros(n1, n2);
    for (i, pair) in pairs.iter().enumerate() {
        if pair.left.len() != n1 || pair.right.len() != n2 {
            return Err(EaiError::dim(format!(
                "cross pair {i}: left {} / right {} vs domain dimensions {n1} / {n2}",
                pair.left.len(),
                pair.right.len()
            )));
        }
        if pair.weight < 0.0 || !pair.weight.is_finite() {
            return Err(EaiError::pre(format!(
                "cross weight of pair {i} must be finite and >= 0"
            )));
        }
        if pair.weight > 0.0 {
            for norm in [pair.left.norm(), pair.right.norm()] {
                if (norm - 1.0).abs() > GRAM_TOL {
                    return Err(EaiError::pre(format!(
                        "cross pair {i} vectors must be unit norm (got {norm})"
                    )));
                }
            }
        }
        d12 += &pair.left * pair.right.adjoint() * c(pair.weight, 0.0);
    }
    let d21 = d12.adjoint();
    Ok((d12, d21))
}

/// Result of assembling self and cross blocks at a cross-coupling scale.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub tensor: BlockResponseMatrix,
    /// Whether the assembled tensor is PSD at the requested scale.
    pub psd: bool,
    pub min_eigenvalue: f64,
    /// Largest scale in [0, lambda] that keeps the tensor PSD, found by
    /// bisection when the requested scale fails; None when the check passed
    /// or when even lambda = 0 is indefinite (non-PSD self blocks).
    pub lambda_star: Option<f64>,
}

/// Assemble [[D11, lambda D12], [lambda D21, D22]] and check positivity.
/// The caller chooses what to do with a non-PSD assembly; `lambda_star`
/// reports the largest safe scale.
pub fn assemble_full(
    grid: &SampleGrid,
    d11: Option<CMat>,
    d22: Option<CMat>,
    d12: Option<CMat>,
    d21: Option<CMat>,
    lambda: f64,
    omega0: f64,
    tol: &Tolerances,
) -> Result<Assembly> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(EaiError::pre(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let d12 = match (d12, d21) {
        (Some(d12), Some(d21)) => {
            let residual = (&d21 - d12.adjoint()).norm();
            let scale = d12.norm().max(d21.norm()).max(f64::MIN_POSITIVE);
            if residual > tol.herm.max(1e-12) * scale {
                return Err(EaiError::pre(format!(
                    "cross blocks violate reciprocity: ||D21 - D12^dagger|| = {residual:.3e}"
                )));
            }
            Some(d12)
        }
        (Some(d12), None) => Some(d12),
        (None, Some(d21)) => Some(d21.adjoint()),
        (None, None) => None,
    };

    let build = |scale: f64| -> Result<BlockResponseMatrix> {
        let scaled12 = d12.as_ref().map(|b| b * c(scale, 0.0));
        let scaled21 = scaled12.as_ref().map(|b| b.adjoint());
        BlockResponseMatrix::from_blocks(
            grid.clone(),
            d11.clone(),
            scaled12,
            scaled21,
            d22.clone(),
            omega0,
        )
    };

    let tensor = build(lambda)?;
    let full = tensor.assembled();
    let norm = full.norm().max(f64::MIN_POSITIVE);
    let min_eig = min_eigenvalue(&full)?;
    let psd_at = |eig: f64| eig >= -tol.psd * norm;
    if psd_at(min_eig) || d12.is_none() {
        return Ok(Assembly {
            tensor,
            psd: psd_at(min_eig),
            min_eigenvalue: min_eig,
            lambda_star: None,
        });
    }

    // Bisect the PSD boundary on [0, lambda].
    let eig_at = |s: f64| -> Result<f64> { min_eigenvalue(&build(s)?.assembled()) };
    let mut lo = 0.0f64;
    let mut hi = lambda;
    if !psd_at(eig_at(lo)?) {
        return Ok(Assembly {
            tensor,
            psd: false,
            min_eigenvalue: min_eig,
            lambda_star: None,
        });
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if psd_at(eig_at(mid)?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Assembly {
        tensor,
        psd: false,
        min_eigenvalue: min_eig,
        lambda_star: Some(lo),
    })
}

/// Block-diagonal-by-point response: the discrete stand-in for a local
/// (delta-kernel) absorber, one c x c Hermitian PSD matrix per point.
pub fn local_absorber(grid: &SampleGrid, m: ForceType, pointwise: &[CMat]) -> Result<CMat> {
    let j = grid.point_count(m);
    let cc = grid.components(m);
    if pointwise.len() != j {
        return Err(EaiError::dim(format!(
            "{} pointwise matrices vs {j} points",
            pointwise.len()
        )));
    }
    let dim = grid.state_dim(m);
    let mut out = CMat::zeros(dim, dim);
    for (p, d0) in pointwise.iter().enumerate() {
        if d0.nrows() != cc || d0.ncols() != cc {
            return Err(EaiError::dim(format!(
                "pointwise matrix {p} is {}x{}, expected {cc}x{cc}",
                d0.nrows(),
                d0.ncols()
            )));
        }
        let herm = crate::linalg::hermiticity_residual(d0);
        if herm > 1e-12 * d0.norm().max(1.0) {
            return Err(EaiError::pre(format!(
                "pointwise matrix {p} is not Hermitian (residual {herm:.3e})"
            )));
        }
        if min_eigenvalue(d0)? < -1e-12 * d0.norm().max(1.0) {
            return Err(EaiError::pre(format!("pointwise matrix {p} is not PSD")));
        }
        out.view_mut((p * cc, p * cc), (cc, cc)).copy_from(d0);
    }
    Ok(out)
}

/// Deterministic random PSD system: orthonormalized Gaussian-envelope random
/// fields as modes, prescribed spectrum as eigenvalues. Returns the tensor and
/// its ground-truth (joint) mode set.
pub fn random_psd_system(
    grid: &SampleGrid,
    spectrum: &[f64],
    coherence_length: f64,
    seed: u64,
    omega0: f64,
) -> Result<(BlockResponseMatrix, ModeSet)> {
    let dim = grid.total_dim();
    if spectrum.len() > dim {
        return Err(EaiError::pre(format!(
            "{} modes requested on a dimension-{dim} grid",
            spectrum.len()
        )));
    }
    if coherence_length <= 0.0 {
        return Err(EaiError::pre("coherence length must be > 0"));
    }
    for w in spectrum.windows(2) {
        if w[1] > w[0] + 1e-12 {
            return Err(EaiError::pre("spectrum must be non-increasing"));
        }
    }
    if spectrum.iter().any(|&a| a < 0.0 || !a.is_finite()) {
        return Err(EaiError::pre("spectrum entries must be finite and >= 0"));
    }

    let n_modes = spectrum.len();
    if n_modes == 0 {
        let zero = CMat::zeros(dim, dim);
        let tensor = BlockResponseMatrix::from_full(grid.clone(), zero, omega0)?;
        let modes = ModeSet::new(ModeKind::Joint, Vec::new(), CMat::zeros(dim, 0), None, Vec::new());
        return Ok((tensor, modes));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = CMat::zeros(dim, n_modes);
    for j in 0..n_modes {
        for i in 0..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            raw[(i, j)] = c(re, im);
        }
    }

    // Correlate by smoothing with a Gaussian kernel within each force-type
    // block; components and blocks stay independent.
    let smooth = smoothing_matrix(grid, coherence_length);
    let smoothed = &smooth * raw;

    let qr = smoothed.qr();
    let q = qr.q();
    let mut vectors = CMat::zeros(dim, n_modes);
    for i in 0..n_modes {
        vectors.set_column(i, &q.column(i));
    }
    let full = weighted_outer_sum(&vectors, spectrum)?;
    let tensor = BlockResponseMatrix::from_full(grid.clone(), full, omega0)?;
    let modes = ModeSet::new(
        ModeKind::Joint,
        spectrum.to_vec(),
        vectors,
        None,
        Vec::new(),
    );
    Ok((tensor, modes))
}

fn smoothing_matrix(grid: &SampleGrid, ell: f64) -> CMat {
    let dim = grid.total_dim();
    let mut s = CMat::zeros(dim, dim);
    for m in ForceType::BOTH {
        let off = grid.block_offset(m);
        let states = grid.state_positions(m);
        for (a, (ra, sa)) in states.iter().enumerate() {
            for (b, (rb, sb)) in states.iter().enumerate() {
                if sa != sb {
                    continue;
                }
                let d2 = (0..3).map(|k| (ra[k] - rb[k]).powi(2)).sum::<f64>();
                s[(off + a, off + b)] = c((-d2 / (2.0 * ell * ell)).exp(), 0.0);
            }
        }
    }
    s
}

/// Circulant Gaussian-kernel system on a 1D ring: entry (j, j') is
/// exp(-d^2 / 2 ell^2) with d the ring distance. Shift invariant, Hermitian,
/// and PSD for the kernel widths used in practice; the canonical k-domain
/// test system.
pub fn gaussian_ring_system(
    n: usize,
    ell: f64,
    omega0: f64,
) -> Result<(SampleGrid, BlockResponseMatrix)> {
    if n == 0 {
        return Err(EaiError::pre("ring needs at least one point"));
    }
    let grid = SampleGrid::lattice_line(n, 1.0, 1)?;
    let mut block = CMat::zeros(n, n);
    for j in 0..n {
        for jp in 0..n {
            let raw = (j as f64 - jp as f64).abs();
            let d = raw.min(n as f64 - raw);
            block[(j, jp)] = c((-d * d / (2.0 * ell * ell)).exp(), 0.0);
        }
    }
    let tensor =
        BlockResponseMatrix::from_blocks(grid.clone(), Some(block), None, None, None, omega0)?;
    Ok((grid, tensor))
}
