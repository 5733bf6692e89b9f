//! Force vectors and force coherence matrices.

use crate::error::{EaiError, Result};
use crate::grid::{ForceType, SampleGrid};
use crate::linalg::{all_finite, c, vec_all_finite, CMat, CVec};

/// Complex force amplitudes over one force type's state space.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceVector {
    pub force_type: ForceType,
    pub amplitudes: CVec,
}

impl ForceVector {
    pub fn new(grid: &SampleGrid, force_type: ForceType, amplitudes: CVec) -> Result<ForceVector> {
        let dim = grid.state_dim(force_type);
        if amplitudes.len() != dim {
            return Err(EaiError::dim(format!(
                "force vector length {} vs state dimension {} for type {}",
                amplitudes.len(),
                dim,
                force_type.label()
            )));
        }
        if !vec_all_finite(&amplitudes) {
            return Err(EaiError::data("non-finite force amplitudes"));
        }
        Ok(ForceVector {
            force_type,
            amplitudes,
        })
    }

    pub fn zeros(grid: &SampleGrid, force_type: ForceType) -> ForceVector {
        ForceVector {
            force_type,
            amplitudes: CVec::zeros(grid.state_dim(force_type)),
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Embed into the assembled two-domain state vector (zeros elsewhere).
    pub fn embed(&self, grid: &SampleGrid) -> Result<CVec> {
        let dim = grid.state_dim(self.force_type);
        if self.amplitudes.len() != dim {
            return Err(EaiError::dim(format!(
                "force vector length {} does not match grid dimension {} for type {}",
                self.amplitudes.len(),
                dim,
                self.force_type.label()
            )));
        }
        let mut full = CVec::zeros(grid.total_dim());
        let off = grid.block_offset(self.force_type);
        for (i, z) in self.amplitudes.iter().enumerate() {
            full[off + i] = *z;
        }
        Ok(full)
    }
}

/// Combine any number of per-type force vectors into one assembled vector.
/// Same-type vectors superpose by addition.
pub fn embed_forces(grid: &SampleGrid, forces: &[&ForceVector]) -> Result<CVec> {
    let mut full = CVec::zeros(grid.total_dim());
    for f in forces {
        full += f.embed(grid)?;
    }
    Ok(full)
}

/// Spatial correlation matrix <f f^dagger> of the applied forces, stored on
/// the assembled two-domain space.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceMatrix {
    matrix: CMat,
}

impl CoherenceMatrix {
    pub fn from_full(grid: &SampleGrid, matrix: CMat) -> Result<CoherenceMatrix> {
        let dim = grid.total_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(EaiError::dim(format!(
                "coherence matrix is {}x{}, grid dimension is {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !all_finite(&matrix) {
            return Err(EaiError::data("non-finite coherence entries"));
        }
        Ok(CoherenceMatrix { matrix })
    }

    /// Rank-1 coherence of a single coherent force, N = f f^dagger.
    pub fn from_force(grid: &SampleGrid, f: &ForceVector) -> Result<CoherenceMatrix> {
        let full = f.embed(grid)?;
        Ok(CoherenceMatrix {
            matrix: &full * full.adjoint(),
        })
    }

    /// Incoherent superposition N = sum_j beta_j f_j f_j^dagger of embedded
    /// force columns.
    pub fn from_modes(grid: &SampleGrid, weights: &[f64], columns: &CMat) -> Result<CoherenceMatrix> {
        let dim = grid.total_dim();
        if columns.nrows() != dim {
            return Err(EaiError::dim(format!(
                "coherence mode rows {} vs grid dimension {dim}",
                columns.nrows()
            )));
        }
        if columns.ncols() != weights.len() {
            return Err(EaiError::dim(format!(
                "{} mode columns vs {} weights",
                columns.ncols(),
                weights.len()
            )));
        }
        let mut m = CMat::zeros(dim, dim);
        for (j, &w) in weights.iter().enumerate() {
            let col = columns.column(j);
            for r in 0..dim {
                for s in 0..dim {
                    m[(r, s)] += col[r] * col[s].conj() * c(w, 0.0);
                }
            }
        }
        Ok(CoherenceMatrix { matrix: m })
    }

    pub fn assembled(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SampleGrid;

    fn grid2() -> SampleGrid {
        SampleGrid::single_domain(vec![[0.0; 3], [1.0, 0.0, 0.0]], 1).unwrap()
    }

    #[test]
    fn wrong_length_rejected() {
        let g = grid2();
        let v = CVec::from_vec(vec![c(1.0, 0.0)]);
        assert!(ForceVector::new(&g, ForceType::One, v).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let g = grid2();
        let v = CVec::from_vec(vec![c(f64::NAN, 0.0), c(0.0, 0.0)]);
        assert!(ForceVector::new(&g, ForceType::One, v).is_err());
    }

    #[test]
    fn embedding_places_type_two_after_type_one() {
        let g = SampleGrid::two_domain(vec![[0.0; 3]], 1, vec![[1.0, 0.0, 0.0]], 1).unwrap();
        let f = ForceVector::new(&g, ForceType::Two, CVec::from_vec(vec![c(2.0, 1.0)])).unwrap();
        let full = f.embed(&g).unwrap();
        assert_eq!(full.len(), 2);
        assert_eq!(full[0], c(0.0, 0.0));
        assert_eq!(full[1], c(2.0, 1.0));
    }
}
