//! Block-Hermitian response tensors and absorbed-power evaluation.
//!
//! The dissipative response of a system to one or two generalized forces is a
//! Hermitian block matrix D with self blocks D11, D22 and cross blocks
//! D12 = D21^dagger. Time-averaged absorbed power under a coherent drive f is
//! P = 2 omega0 f^dagger D f; under a partially coherent drive with coherence
//! matrix N it is P = 2 omega0 Tr[D N^dagger]. The 2 omega0 prefactor is
//! applied uniformly by every power-returning function in this crate.

use serde::{Deserialize, Serialize};

use crate::error::{EaiError, Result};
use crate::force::{embed_forces, CoherenceMatrix, ForceVector};
use crate::grid::{ForceType, SampleGrid};
use crate::linalg::{
    all_finite, c, frob, hermiticity_residual, max_abs, min_eigenvalue, CMat, CVec,
};

/// Relative tolerances used by validation and decomposition.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity / reciprocity: max |A - A^dagger| <= herm * ||A||_F.
    pub herm: f64,
    /// Positive semidefiniteness: min eigenvalue >= -psd * ||D||_F.
    pub psd: f64,
    /// Singular-value truncation for dual bases: sigma < svd * sigma_1 drops.
    pub svd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-10,
            psd: 1e-10,
            svd: 1e-10,
        }
    }
}

/// Outcome of checking a tensor against its invariants. Always produced;
/// failing checks set flags rather than raising.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Frobenius norm of the assembled matrix; the scale for everything below.
    pub scale: f64,
    /// max |D11 - D11^dagger|, max over self blocks.
    pub herm_residual: f64,
    /// Frobenius norm of D21 - D12^dagger.
    pub onsager_residual: f64,
    /// Minimum eigenvalue of the assembled matrix.
    pub min_eigenvalue: f64,
    pub herm_pass: bool,
    pub onsager_pass: bool,
    pub psd_pass: bool,
    pub tolerances: Tolerances,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.herm_pass && self.onsager_pass && self.psd_pass
    }
}

/// The Hermitian block tensor D on a sample grid, evaluated at omega0.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockResponseMatrix {
    grid: SampleGrid,
    d11: Option<CMat>,
    d12: Option<CMat>,
    d21: Option<CMat>,
    d22: Option<CMat>,
    omega0: f64,
}

fn check_block(
    name: &str,
    block: &Option<CMat>,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if let Some(b) = block {
        if b.nrows() != rows || b.ncols() != cols {
            return Err(EaiError::dim(format!(
                "block {name} is {}x{}, expected {rows}x{cols}",
                b.nrows(),
                b.ncols()
            )));
        }
        if !all_finite(b) {
            return Err(EaiError::data(format!("non-finite entries in block {name}")));
        }
    }
    Ok(())
}

impl BlockResponseMatrix {
    /// Build from explicit blocks. Shapes and finiteness are enforced here;
    /// Hermiticity, reciprocity and positivity are checked by [`validate`],
    /// not forced, since measured tensors may violate them slightly.
    pub fn from_blocks(
        grid: SampleGrid,
        d11: Option<CMat>,
        d12: Option<CMat>,
        d21: Option<CMat>,
        d22: Option<CMat>,
        omega0: f64,
    ) -> Result<BlockResponseMatrix> {
        let n1 = grid.state_dim(ForceType::One);
        let n2 = grid.state_dim(ForceType::Two);
        check_block("D11", &d11, n1, n1)?;
        check_block("D12", &d12, n1, n2)?;
        check_block("D21", &d21, n2, n1)?;
        check_block("D22", &d22, n2, n2)?;
        if !omega0.is_finite() {
            return Err(EaiError::data("non-finite omega0"));
        }
        Ok(BlockResponseMatrix {
            grid,
            d11,
            d12,
            d21,
            d22,
            omega0,
        })
    }

    /// Split an assembled matrix into blocks along the grid's type boundary.
    pub fn from_full(grid: SampleGrid, full: CMat, omega0: f64) -> Result<BlockResponseMatrix> {
        let dim = grid.total_dim();
        if full.nrows() != dim || full.ncols() != dim {
            return Err(EaiError::dim(format!(
                "assembled matrix is {}x{}, grid dimension is {dim}",
                full.nrows(),
                full.ncols()
            )));
        }
        let n1 = grid.state_dim(ForceType::One);
        let n2 = grid.state_dim(ForceType::Two);
        let take = |r0: usize, c0: usize, nr: usize, nc: usize| -> Option<CMat> {
            if nr == 0 || nc == 0 {
                None
            } else {
                Some(full.view((r0, c0), (nr, nc)).into_owned())
            }
        };
        BlockResponseMatrix::from_blocks(
            grid,
            take(0, 0, n1, n1),
            take(0, n1, n1, n2),
            take(n1, 0, n2, n1),
            take(n1, n1, n2, n2),
            omega0,
        )
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn block(&self, m: ForceType, n: ForceType) -> Option<&CMat> {
        match (m, n) {
            (ForceType::One, ForceType::One) => self.d11.as_ref(),
            (ForceType::One, ForceType::Two) => self.d12.as_ref(),
            (ForceType::Two, ForceType::One) => self.d21.as_ref(),
            (ForceType::Two, ForceType::Two) => self.d22.as_ref(),
        }
    }

    /// The requested block, materializing zeros when absent.
    pub fn block_or_zero(&self, m: ForceType, n: ForceType) -> CMat {
        self.block(m, n)
            .cloned()
            .unwrap_or_else(|| CMat::zeros(self.grid.state_dim(m), self.grid.state_dim(n)))
    }

    /// Assemble [[D11, D12], [D21, D22]], absent blocks as zeros.
    pub fn assembled(&self) -> CMat {
        let n1 = self.grid.state_dim(ForceType::One);
        let n2 = self.grid.state_dim(ForceType::Two);
        let dim = n1 + n2;
        let mut full = CMat::zeros(dim, dim);
        let mut put = |r0: usize, c0: usize, b: &Option<CMat>| {
            if let Some(b) = b {
                full.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
            }
        };
        put(0, 0, &self.d11);
        put(0, n1, &self.d12);
        put(n1, 0, &self.d21);
        put(n1, n1, &self.d22);
        full
    }

    /// Anti-Hermitian part of a susceptibility matrix, rendered Hermitian:
    /// D = (chi - chi^dagger) / 2i, split blockwise over the grid.
    pub fn anti_hermitian_part(
        grid: SampleGrid,
        chi: &CMat,
        omega0: f64,
    ) -> Result<BlockResponseMatrix> {
        let dim = grid.total_dim();
        if chi.nrows() != dim || chi.ncols() != dim {
            return Err(EaiError::dim(format!(
                "susceptibility is {}x{}, grid dimension is {dim}",
                chi.nrows(),
                chi.ncols()
            )));
        }
        if !all_finite(chi) {
            return Err(EaiError::data("non-finite susceptibility entries"));
        }
        let half_over_i = c(0.0, -0.5); // 1/(2i)
        let d = (chi - chi.adjoint()) * half_over_i;
        BlockResponseMatrix::from_full(grid, d, omega0)
    }

    /// Check Hermiticity of the self blocks, Onsager reciprocity of the cross
    /// blocks and positivity of the assembled matrix. Always returns a report.
    pub fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let full = self.assembled();
        let scale = frob(&full);
        let mut herm_residual = 0.0f64;
        for m in ForceType::BOTH {
            if let Some(b) = self.block(m, m) {
                herm_residual = herm_residual.max(hermiticity_residual(b));
            }
        }
        let d12 = self.block_or_zero(ForceType::One, ForceType::Two);
        let d21 = self.block_or_zero(ForceType::Two, ForceType::One);
        let onsager_residual = frob(&(&d21 - d12.adjoint()));
        let min_eig = min_eigenvalue(&full).unwrap_or(f64::NAN);
        ValidationReport {
            scale,
            herm_residual,
            onsager_residual,
            min_eigenvalue: min_eig,
            herm_pass: herm_residual <= tol.herm * scale.max(f64::MIN_POSITIVE),
            onsager_pass: onsager_residual <= tol.herm * scale.max(f64::MIN_POSITIVE),
            psd_pass: min_eig >= -tol.psd * scale,
            tolerances: *tol,
        }
    }

    /// Squared Hilbert-Schmidt norm: sum of |entry|^2 over all blocks, which
    /// equals the sum of squared responsivities of the assembled matrix.
    pub fn hs_norm(&self) -> f64 {
        let mut total = 0.0;
        for b in [&self.d11, &self.d12, &self.d21, &self.d22].into_iter().flatten() {
            let f = frob(b);
            total += f * f;
        }
        total
    }

    /// Hermitian-symmetrize in place: D <- (D + D^dagger)/2, blockwise.
    pub fn symmetrized(&self) -> BlockResponseMatrix {
        let full = self.assembled();
        let sym = (&full + full.adjoint()).scale(0.5);
        BlockResponseMatrix::from_full(self.grid.clone(), sym, self.omega0)
            .expect("shape preserved by symmetrization")
    }
}

/// Sesquilinear form x^dagger A x.
pub(crate) fn quadratic_form(a: &CMat, x: &CVec) -> Result<num_complex::Complex<f64>> {
    if a.ncols() != x.len() || a.nrows() != x.len() {
        return Err(EaiError::dim(format!(
            "quadratic form: matrix {}x{} vs vector {}",
            a.nrows(),
            a.ncols(),
            x.len()
        )));
    }
    Ok((x.adjoint() * a * x)[(0, 0)])
}

/// Absorbed power of a fully coherent drive: P = 2 omega0 sum_mn f_m^dagger D^mn f_n.
/// Multiple vectors of the same force type superpose coherently.
pub fn absorbed_power_coherent(
    d: &BlockResponseMatrix,
    forces: &[&ForceVector],
    omega0: f64,
) -> Result<f64> {
    let full = embed_forces(d.grid(), forces)?;
    let p = quadratic_form(&d.assembled(), &full)?;
    Ok(2.0 * omega0 * p.re)
}

/// Absorbed power of a partially coherent drive: P = 2 omega0 Tr[D N^dagger].
pub fn absorbed_power_ensemble(
    d: &BlockResponseMatrix,
    n: &CoherenceMatrix,
    omega0: f64,
) -> Result<f64> {
    let full = d.assembled();
    if n.dim() != full.nrows() {
        return Err(EaiError::dim(format!(
            "coherence dimension {} vs tensor dimension {}",
            n.dim(),
            full.nrows()
        )));
    }
    let product = &full * n.assembled().adjoint();
    let trace: num_complex::Complex<f64> = (0..product.nrows()).map(|i| product[(i, i)]).sum();
    Ok(2.0 * omega0 * trace.re)
}

/// Residual diagnostics of one tensor against another (ground truth).
pub fn relative_difference(a: &BlockResponseMatrix, b: &BlockResponseMatrix) -> Result<f64> {
    let fa = a.assembled();
    let fb = b.assembled();
    if fa.nrows() != fb.nrows() {
        return Err(EaiError::dim("tensors live on different dimensions".to_string()));
    }
    let scale = frob(&fb).max(f64::MIN_POSITIVE);
    Ok(frob(&(&fa - &fb)) / scale)
}

/// max |A - B| over entries, for bit-level and tolerance comparisons.
pub fn max_entry_difference(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> SampleGrid {
        let points = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        SampleGrid::single_domain(points, 1).unwrap()
    }

    fn identity_tensor(n: usize, omega0: f64) -> BlockResponseMatrix {
        BlockResponseMatrix::from_blocks(grid(n), Some(CMat::identity(n, n)), None, None, None, omega0)
            .unwrap()
    }

    #[test]
    fn anti_hermitian_of_purely_dissipative() {
        // chi = i I2 -> D = I2
        let g = grid(2);
        let chi = CMat::identity(2, 2) * c(0.0, 1.0);
        let d = BlockResponseMatrix::anti_hermitian_part(g, &chi, 1.0).unwrap();
        assert!(max_entry_difference(&d.assembled(), &CMat::identity(2, 2)) < 1e-15);
    }

    #[test]
    fn anti_hermitian_of_purely_reactive_is_zero() {
        let g = grid(2);
        let chi = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        let d = BlockResponseMatrix::anti_hermitian_part(g, &chi, 1.0).unwrap();
        assert!(frob(&d.assembled()) < 1e-15);
    }

    #[test]
    fn anti_hermitian_general_case() {
        // chi = [[i, 1+i], [-1+i, 2i]] -> D = [[1, 1-i], [1+i, 2]], checked by
        // elementwise (chi - chi^dagger)/2i with scalar arithmetic.
        let g = grid(2);
        let chi = CMat::from_row_slice(
            2,
            2,
            &[c(0.0, 1.0), c(1.0, 1.0), c(-1.0, 1.0), c(0.0, 2.0)],
        );
        let d = BlockResponseMatrix::anti_hermitian_part(g.clone(), &chi, 1.0).unwrap();

        let mut oracle = CMat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                oracle[(i, j)] = (chi[(i, j)] - chi[(j, i)].conj()) / c(0.0, 2.0);
            }
        }
        assert!(max_entry_difference(&d.assembled(), &oracle) < 1e-15);

        let expected = CMat::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(2.0, 0.0)],
        );
        assert!(max_entry_difference(&d.assembled(), &expected) < 1e-15);

        // Hermitian by construction; eigenvalues {3, 0} from the hand-solved
        // characteristic polynomial.
        let report = d.validate(&Tolerances::default());
        assert!(report.herm_pass);
        assert!(report.psd_pass);
        assert!(report.min_eigenvalue.abs() < 1e-12);
    }

    #[test]
    fn validate_flags_broken_reciprocity() {
        let g = SampleGrid::two_domain(vec![[0.0; 3]], 1, vec![[1.0, 0.0, 0.0]], 1).unwrap();
        let d12 = CMat::from_element(1, 1, c(1.0, 0.0));
        let d = BlockResponseMatrix::from_blocks(
            g,
            Some(CMat::identity(1, 1)),
            Some(d12.clone()),
            Some(CMat::zeros(1, 1)),
            Some(CMat::identity(1, 1)),
            1.0,
        )
        .unwrap();
        let report = d.validate(&Tolerances::default());
        assert!(!report.onsager_pass);
        assert_relative_eq!(report.onsager_residual, frob(&d12), max_relative = 1e-14);
    }

    #[test]
    fn validate_identity_passes() {
        let report = identity_tensor(2, 1.0).validate(&Tolerances::default());
        assert!(report.all_pass());
        assert_relative_eq!(report.min_eigenvalue, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn hs_norm_examples() {
        assert_relative_eq!(identity_tensor(2, 1.0).hs_norm(), 2.0, max_relative = 1e-14);

        // single mode alpha = 2 on unit d -> hs = 4
        let g = grid(2);
        let d_vec = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]) / c(2.0f64.sqrt(), 0.0);
        let block = &d_vec * d_vec.adjoint() * c(2.0, 0.0);
        let d = BlockResponseMatrix::from_blocks(g, Some(block), None, None, None, 1.0).unwrap();
        assert_relative_eq!(d.hs_norm(), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn coherent_power_examples() {
        // D = I2, f = (1, 0), omega0 = 0.5 -> P = 1
        let d = identity_tensor(2, 0.5);
        let f = ForceVector::new(
            d.grid(),
            ForceType::One,
            CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
        )
        .unwrap();
        assert_relative_eq!(
            absorbed_power_coherent(&d, &[&f], 0.5).unwrap(),
            1.0,
            max_relative = 1e-14
        );

        // null-space force of [[1, 1-i], [1+i, 2]]: f = (1-i, -1) -> P = 0,
        // verified by the matrix multiply in the assertion itself.
        let g = grid(2);
        let block = CMat::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(2.0, 0.0)],
        );
        let d = BlockResponseMatrix::from_blocks(g, Some(block.clone()), None, None, None, 1.0)
            .unwrap();
        let f_amp = CVec::from_vec(vec![c(1.0, -1.0), c(-1.0, 0.0)]);
        assert!((&block * &f_amp).norm() < 1e-14, "f must lie in the null space");
        let f = ForceVector::new(d.grid(), ForceType::One, f_amp).unwrap();
        assert!(absorbed_power_coherent(&d, &[&f], 1.0).unwrap().abs() < 1e-13);

        // D = [[1,1],[1,1]], f = (1,1), omega0 = 1 -> P = 8
        let g = grid(2);
        let ones = CMat::from_element(2, 2, c(1.0, 0.0));
        let d = BlockResponseMatrix::from_blocks(g, Some(ones), None, None, None, 1.0).unwrap();
        let f = ForceVector::new(
            d.grid(),
            ForceType::One,
            CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]),
        )
        .unwrap();
        assert_relative_eq!(
            absorbed_power_coherent(&d, &[&f], 1.0).unwrap(),
            8.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn ensemble_power_matches_coherent_for_rank_one() {
        let g = grid(3);
        let block = CMat::from_fn(3, 3, |i, j| c(0.2 * (i + j) as f64, 0.1 * (i as f64 - j as f64)));
        let herm = (&block + block.adjoint()).scale(0.5) + CMat::identity(3, 3) * c(2.0, 0.0);
        let d = BlockResponseMatrix::from_blocks(g.clone(), Some(herm), None, None, None, 1.0)
            .unwrap();
        let f = ForceVector::new(
            &g,
            ForceType::One,
            CVec::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.0, -1.0)]),
        )
        .unwrap();
        let n = CoherenceMatrix::from_force(&g, &f).unwrap();
        let pc = absorbed_power_coherent(&d, &[&f], 0.7).unwrap();
        let pe = absorbed_power_ensemble(&d, &n, 0.7).unwrap();
        assert_relative_eq!(pc, pe, max_relative = 1e-12);
    }

    #[test]
    fn ensemble_power_identity_counts_dimension() {
        // D = I_J, N = I_J, omega0 = 1 -> P = 2 J
        let j = 5;
        let d = identity_tensor(j, 1.0);
        let n = CoherenceMatrix::from_full(d.grid(), CMat::identity(j, j)).unwrap();
        assert_relative_eq!(
            absorbed_power_ensemble(&d, &n, 1.0).unwrap(),
            2.0 * j as f64,
            max_relative = 1e-14
        );
    }
}
