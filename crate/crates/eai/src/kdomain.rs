//! Wave-vector representation of response tensors on regular lattices.
//!
//! The continuous Fourier convention is replaced by the unitary discrete
//! transform U over lattice positions (identity on the component index), so
//! D_k = U D U^dagger preserves Hermiticity and the spectrum exactly and
//! Parseval holds bit-for-bit. Shift-invariant (circulant) systems become
//! diagonal in k.

use std::f64::consts::TAU;

use crate::error::{EaiError, Result};
use crate::force::ForceVector;
use crate::grid::{ForceType, Lattice, SampleGrid};
use crate::linalg::{C64, CMat, CVec};
use crate::tensor::BlockResponseMatrix;

/// The reciprocal grid of a sample lattice: one k-point per lattice node, in
/// DFT index order (axis 0 slowest), with the unitary-DFT convention.
#[derive(Clone, Debug, PartialEq)]
pub struct KGrid {
    lattice: Lattice,
    /// Integer DFT indices per k-point.
    indices: Vec<[usize; 3]>,
    /// Physical wavevectors 2 pi n / (N dx) per axis.
    ks: Vec<[f64; 3]>,
    /// Lattice coordinates of each grid point, in grid point order.
    point_coords: Vec<[usize; 3]>,
}

impl KGrid {
    /// Build the reciprocal grid. The sample grid must be single-domain, carry
    /// a lattice, and its points must tile the lattice exactly once.
    pub fn from_grid(grid: &SampleGrid) -> Result<KGrid> {
        let lattice = grid
            .lattice()
            .ok_or_else(|| EaiError::pre("k-domain operations need a lattice on the grid"))?
            .clone();
        let m = single_domain_type(grid)?;
        let point_indices = grid.domain_point_indices(m);
        if point_indices.len() != lattice.len() {
            return Err(EaiError::pre(format!(
                "{} grid points do not tile the {}-node lattice",
                point_indices.len(),
                lattice.len()
            )));
        }
        let mut seen = vec![false; lattice.len()];
        let mut point_coords = Vec::with_capacity(point_indices.len());
        for &pi in &point_indices {
            let coords = lattice.node_coords(grid.points()[pi])?;
            let flat = (coords[0] * lattice.extents[1] + coords[1]) * lattice.extents[2] + coords[2];
            if seen[flat] {
                return Err(EaiError::pre(format!(
                    "lattice node {coords:?} hit by more than one grid point"
                )));
            }
            seen[flat] = true;
            point_coords.push(coords);
        }
        let mut indices = Vec::with_capacity(lattice.len());
        let mut ks = Vec::with_capacity(lattice.len());
        for n0 in 0..lattice.extents[0] {
            for n1 in 0..lattice.extents[1] {
                for n2 in 0..lattice.extents[2] {
                    let n = [n0, n1, n2];
                    indices.push(n);
                    let mut k = [0.0; 3];
                    for a in 0..3 {
                        if lattice.extents[a] > 1 {
                            k[a] = TAU * n[a] as f64
                                / (lattice.extents[a] as f64 * lattice.spacing[a]);
                        }
                    }
                    ks.push(k);
                }
            }
        }
        Ok(KGrid {
            lattice,
            indices,
            ks,
            point_coords,
        })
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn wavevectors(&self) -> &[[f64; 3]] {
        &self.ks
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// The unitary DFT over positions: U[k, j] = exp(-2 pi i n(k).m(j)/N)/sqrt(J).
    pub fn position_dft(&self) -> CMat {
        let j = self.len();
        let norm = 1.0 / (j as f64).sqrt();
        CMat::from_fn(j, j, |krow, jcol| {
            let n = self.indices[krow];
            let m = self.point_coords[jcol];
            let mut phase = 0.0;
            for a in 0..3 {
                let extent = self.lattice.extents[a];
                if extent > 1 {
                    phase += TAU * (n[a] * m[a]) as f64 / extent as f64;
                }
            }
            C64::from_polar(norm, -phase)
        })
    }

    /// The full transform over one force type's state space: DFT on positions,
    /// identity on components.
    pub fn state_dft(&self, components: usize) -> CMat {
        let u = self.position_dft();
        if components == 1 {
            u
        } else {
            u.kronecker(&CMat::identity(components, components))
        }
    }
}

fn single_domain_type(grid: &SampleGrid) -> Result<ForceType> {
    for m in ForceType::BOTH {
        if grid.is_single_domain(m) {
            return Ok(m);
        }
    }
    Err(EaiError::pre(
        "k-domain operations support single-domain grids only",
    ))
}

/// A response tensor in the k-domain.
#[derive(Clone, Debug)]
pub struct KDomainTensor {
    pub matrix: CMat,
    pub kgrid: KGrid,
    pub force_type: ForceType,
    pub components: usize,
    pub omega0: f64,
}

/// Transform a single-domain tensor to the k-domain: D_k = U D U^dagger.
pub fn to_kdomain(d: &BlockResponseMatrix) -> Result<KDomainTensor> {
    let grid = d.grid();
    let m = single_domain_type(grid)?;
    let kgrid = KGrid::from_grid(grid)?;
    let components = grid.components(m);
    let u = kgrid.state_dft(components);
    let block = d.block_or_zero(m, m);
    let matrix = &u * block * u.adjoint();
    Ok(KDomainTensor {
        matrix,
        kgrid,
        force_type: m,
        components,
        omega0: d.omega0(),
    })
}

/// Invert the transform back onto a grid: D = U^dagger D_k U.
pub fn from_kdomain(kd: &KDomainTensor, grid: &SampleGrid) -> Result<BlockResponseMatrix> {
    let m = single_domain_type(grid)?;
    if m != kd.force_type || grid.components(m) != kd.components {
        return Err(EaiError::dim(
            "grid force type/components do not match the k-domain tensor",
        ));
    }
    let kgrid = KGrid::from_grid(grid)?;
    if kgrid.lattice() != kd.kgrid.lattice() {
        return Err(EaiError::dim("grid lattice does not match the k-domain tensor"));
    }
    let u = kgrid.state_dft(kd.components);
    let block = u.adjoint() * &kd.matrix * u;
    let (d11, d22) = match m {
        ForceType::One => (Some(block), None),
        ForceType::Two => (None, Some(block)),
    };
    BlockResponseMatrix::from_blocks(grid.clone(), d11, None, None, d22, kd.omega0)
}

/// Off-diagonal Frobenius energy fraction of a square matrix; None for the
/// zero matrix, where the fraction is undefined.
pub fn diagonality(dk: &CMat) -> Option<f64> {
    let total: f64 = dk.iter().map(|z| z.norm_sqr()).sum();
    if total <= 0.0 {
        return None;
    }
    let diag: f64 = (0..dk.nrows().min(dk.ncols()))
        .map(|i| dk[(i, i)].norm_sqr())
        .sum();
    Some((total - diag) / total)
}

/// Transform a force vector to the k-domain: F_k = U f.
pub fn to_k_force(kd: &KDomainTensor, f: &ForceVector) -> Result<CVec> {
    if f.force_type != kd.force_type {
        return Err(EaiError::dim("force type does not match the k-domain tensor"));
    }
    let u = kd.kgrid.state_dft(kd.components);
    if f.amplitudes.len() != u.ncols() {
        return Err(EaiError::dim(format!(
            "force has {} entries, transform expects {}",
            f.amplitudes.len(),
            u.ncols()
        )));
    }
    Ok(&u * &f.amplitudes)
}

/// Absorbed power evaluated in the k-domain: P = 2 omega0 F_k^dagger D_k F_k.
pub fn kdomain_power(kd: &KDomainTensor, fk: &CVec, omega0: f64) -> Result<f64> {
    if fk.len() != kd.matrix.nrows() {
        return Err(EaiError::dim(format!(
            "k-space force has {} entries, tensor is {}x{}",
            fk.len(),
            kd.matrix.nrows(),
            kd.matrix.ncols()
        )));
    }
    let p = (fk.adjoint() * &kd.matrix * fk)[(0, 0)];
    Ok(2.0 * omega0 * p.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};
    use crate::synth::gaussian_ring_system;
    use approx::assert_relative_eq;

    #[test]
    fn unitarity_of_the_dft() {
        let g = SampleGrid::lattice_line(12, 0.7, 1).unwrap();
        let kg = KGrid::from_grid(&g).unwrap();
        let u = kg.position_dft();
        assert!(max_abs(&(&u * u.adjoint() - CMat::identity(12, 12))) < 1e-12);
    }

    #[test]
    fn identity_stays_identity() {
        let g = SampleGrid::lattice_line(6, 1.0, 1).unwrap();
        let d =
            BlockResponseMatrix::from_blocks(g, Some(CMat::identity(6, 6)), None, None, None, 1.0)
                .unwrap();
        let kd = to_kdomain(&d).unwrap();
        assert!(max_abs(&(&kd.matrix - CMat::identity(6, 6))) < 1e-12);
    }

    #[test]
    fn circulant_becomes_diagonal_with_dft_kernel_entries() {
        let n = 16usize;
        let ell = 2.0;
        let (_, d) = gaussian_ring_system(n, ell, 1.0).unwrap();
        let kd = to_kdomain(&d).unwrap();
        assert!(diagonality(&kd.matrix).unwrap() < 1e-24);

        // oracle: eigenvalues of a circulant are the DFT of its first row,
        // computed by an explicit loop.
        let block = d.block_or_zero(ForceType::One, ForceType::One);
        for (krow, _) in kd.kgrid.wavevectors().iter().enumerate() {
            let mut sum = crate::linalg::C64::new(0.0, 0.0);
            for j in 0..n {
                let phase = -TAU * (krow * j) as f64 / n as f64;
                sum += block[(0, j)] * crate::linalg::C64::from_polar(1.0, phase);
            }
            assert!(
                (kd.matrix[(krow, krow)] - sum).norm() < 1e-10,
                "k node {krow}"
            );
        }
    }

    #[test]
    fn eigenvalues_preserved_by_transform() {
        let (_, d) = gaussian_ring_system(8, 1.5, 1.0).unwrap();
        let kd = to_kdomain(&d).unwrap();
        let before = crate::linalg::hermitian_eigen_desc(&d.assembled()).unwrap().0;
        let after = crate::linalg::hermitian_eigen_desc(&kd.matrix).unwrap().0;
        for (a, b) in before.iter().zip(after.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let (g, d) = gaussian_ring_system(10, 1.2, 2.0).unwrap();
        let kd = to_kdomain(&d).unwrap();
        let back = from_kdomain(&kd, &g).unwrap();
        assert!(max_abs(&(&back.assembled() - d.assembled())) < 1e-12);
    }

    #[test]
    fn diagonality_of_all_ones() {
        // rank-1 all-ones on J = 4: fraction 1 - 4/16 = 0.75
        let ones = CMat::from_element(4, 4, c(1.0, 0.0));
        assert_relative_eq!(diagonality(&ones).unwrap(), 0.75, max_relative = 1e-14);
        assert!(diagonality(&CMat::zeros(3, 3)).is_none());
        assert_eq!(diagonality(&CMat::identity(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn parseval_power_consistency() {
        let (g, d) = gaussian_ring_system(9, 1.0, 1.3).unwrap();
        let kd = to_kdomain(&d).unwrap();
        let amps = CVec::from_fn(9, |i, _| crate::linalg::C64::new((i as f64).sin(), 0.3 * i as f64));
        let f = ForceVector::new(&g, ForceType::One, amps).unwrap();
        let p_space = crate::tensor::absorbed_power_coherent(&d, &[&f], 1.3).unwrap();
        let fk = to_k_force(&kd, &f).unwrap();
        let p_k = kdomain_power(&kd, &fk, 1.3).unwrap();
        assert_relative_eq!(p_space, p_k, max_relative = 1e-12);
    }

    #[test]
    fn single_dft_probe_picks_off_diagonal() {
        let (g, d) = gaussian_ring_system(8, 1.5, 1.0).unwrap();
        let kd = to_kdomain(&d).unwrap();
        let k = kd.kgrid.wavevectors()[3];
        let probe = crate::sources::plane_wave_probe(
            &g,
            ForceType::One,
            k,
            &[c(1.0, 0.0)],
            c(1.0 / (8f64).sqrt(), 0.0),
        )
        .unwrap();
        let p = crate::tensor::absorbed_power_coherent(&d, &[&probe], 1.0).unwrap();
        assert_relative_eq!(p, 2.0 * kd.matrix[(3, 3)].re, max_relative = 1e-10);
    }

    #[test]
    fn two_domain_grid_rejected() {
        let g = SampleGrid::two_domain(vec![[0.0; 3]], 1, vec![[1.0, 0.0, 0.0]], 1).unwrap();
        let d = BlockResponseMatrix::from_blocks(
            g,
            Some(CMat::identity(1, 1)),
            None,
            None,
            Some(CMat::identity(1, 1)),
            1.0,
        )
        .unwrap();
        assert!(to_kdomain(&d).is_err());
    }

    #[test]
    fn missing_lattice_rejected() {
        let g = SampleGrid::single_domain(vec![[0.0; 3], [1.0, 0.0, 0.0]], 1).unwrap();
        let d =
            BlockResponseMatrix::from_blocks(g, Some(CMat::identity(2, 2)), None, None, None, 1.0)
                .unwrap();
        assert!(to_kdomain(&d).is_err());
    }

    use std::f64::consts::TAU;
}
