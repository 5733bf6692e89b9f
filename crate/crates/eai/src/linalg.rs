//! Small dense complex linear-algebra helpers used throughout the crate.
//!
//! Everything here wraps nalgebra; the conventions (descending spectra,
//! robust small-angle computation) are the ones the analysis modules rely on.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{EaiError, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Frobenius norm.
pub fn frob(a: &CMat) -> f64 {
    a.norm()
}

/// Largest entry magnitude.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn vec_all_finite(v: &CVec) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// max |A - A^dagger| over entries.
pub fn hermiticity_residual(a: &CMat) -> f64 {
    let n = a.nrows().min(a.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix, spectrum sorted descending.
///
/// The caller is responsible for the matrix being Hermitian to working
/// tolerance; the strictly Hermitian average (A + A^dagger)/2 is decomposed so
/// rounding in the input cannot leak into complex eigenvalues.
pub fn hermitian_eigen_desc(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    if a.nrows() != a.ncols() {
        return Err(EaiError::dim(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.is_empty() {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(a.nrows(), a.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Minimum eigenvalue of a Hermitian matrix (0 for the empty matrix).
pub fn min_eigenvalue(a: &CMat) -> Result<f64> {
    let (vals, _) = hermitian_eigen_desc(a)?;
    Ok(vals.last().copied().unwrap_or(0.0))
}

/// Thin SVD: A = U diag(s) V^dagger with singular values descending.
pub fn svd_thin(a: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    if a.is_empty() {
        return Err(EaiError::dim("SVD of an empty matrix".to_string()));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| EaiError::data("SVD failed to produce U"))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| EaiError::data("SVD failed to produce V"))?;
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    // nalgebra returns singular values descending already; keep a guard for
    // the rare unordered case.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).expect("finite singular values"));
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return Ok((u, s, v_t.adjoint()));
    }
    let mut u_s = CMat::zeros(u.nrows(), u.ncols());
    let v = v_t.adjoint();
    let mut v_s = CMat::zeros(v.nrows(), v.ncols());
    let mut s_sorted = Vec::with_capacity(s.len());
    for (dst, &src) in order.iter().enumerate() {
        u_s.set_column(dst, &u.column(src));
        v_s.set_column(dst, &v.column(src));
        s_sorted.push(s[src]);
    }
    Ok((u_s, s_sorted, v_s))
}

/// Rotate a column's global phase so its largest-magnitude entry is real
/// positive. Returns the applied phase factor.
pub fn phase_fix_column(col: &mut CVec) -> C64 {
    let mut best = 0usize;
    let mut best_mag = -1.0f64;
    for (i, z) in col.iter().enumerate() {
        let m = z.norm();
        if m > best_mag + 1e-15 {
            best_mag = m;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return c(1.0, 0.0);
    }
    let z = col[best];
    let phase = z.conj() / z.norm();
    for entry in col.iter_mut() {
        *entry *= phase;
    }
    phase
}

/// Principal angles (radians, ascending) between the column spaces of two
/// matrices with orthonormal columns of equal count.
///
/// Small angles come from the sine route (SVD of the residual), which keeps
/// accuracy near zero where acos of a cosine saturates around sqrt(eps).
pub fn principal_angles(qa: &CMat, qb: &CMat) -> Result<Vec<f64>> {
    if qa.nrows() != qb.nrows() || qa.ncols() != qb.ncols() {
        return Err(EaiError::dim(format!(
            "principal angles need equal shapes, got {}x{} vs {}x{}",
            qa.nrows(),
            qa.ncols(),
            qb.nrows(),
            qb.ncols()
        )));
    }
    let k = qa.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let overlap = qa.adjoint() * qb;
    let cos = overlap.clone().singular_values();
    let residual = qb - qa * overlap;
    let sin = residual.singular_values();
    // cos descending <-> angles ascending; sin descending <-> angles descending.
    let mut angles = Vec::with_capacity(k);
    for i in 0..k {
        let cv = cos[i].clamp(0.0, 1.0);
        let sv = sin[k - 1 - i].clamp(0.0, 1.0);
        let theta = if cv * cv > 0.5 { sv.asin() } else { cv.acos() };
        angles.push(theta);
    }
    Ok(angles)
}

/// max |V^dagger V - I| over entries; 0 for an empty set.
pub fn gram_residual(vectors: &CMat) -> f64 {
    let k = vectors.ncols();
    if k == 0 {
        return 0.0;
    }
    let gram = vectors.adjoint() * vectors;
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            worst = worst.max((gram[(i, j)] - target).norm());
        }
    }
    worst
}

/// V diag(w) V^dagger for real weights; the Hermitian synthesis primitive.
pub fn weighted_outer_sum(vectors: &CMat, weights: &[f64]) -> Result<CMat> {
    if vectors.ncols() != weights.len() {
        return Err(EaiError::dim(format!(
            "{} vectors vs {} weights",
            vectors.ncols(),
            weights.len()
        )));
    }
    let n = vectors.nrows();
    let mut out = CMat::zeros(n, n);
    for (i, &w) in weights.iter().enumerate() {
        let col = vectors.column(i);
        for r in 0..n {
            for s in 0..n {
                out[(r, s)] += col[r] * col[s].conj() * c(w, 0.0);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(2.0, 0.0)]);
        let (vals, vecs) = hermitian_eigen_desc(&a).unwrap();
        // characteristic polynomial by hand: trace 3, det 0 -> {3, 0}
        assert_relative_eq!(vals[0], 3.0, max_relative = 1e-12);
        assert!(vals[1].abs() < 1e-12);
        let rebuilt = weighted_outer_sum(&vecs, &vals).unwrap();
        assert!(max_abs(&(&rebuilt - &a)) < 1e-12);
    }

    #[test]
    fn small_principal_angles_do_not_saturate() {
        let q = CMat::from_row_slice(3, 1, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let angles = principal_angles(&q, &q).unwrap();
        assert!(angles[0] < 1e-12, "same subspace must give ~0, got {}", angles[0]);

        let eps: f64 = 1e-6;
        let rotated = CMat::from_row_slice(
            3,
            1,
            &[c(eps.cos(), 0.0), c(eps.sin(), 0.0), c(0.0, 0.0)],
        );
        let angles = principal_angles(&q, &rotated).unwrap();
        assert_relative_eq!(angles[0], eps, max_relative = 1e-6);
    }

    #[test]
    fn phase_fix_makes_largest_entry_real_positive() {
        let mut v = CVec::from_vec(vec![c(0.0, 2.0), c(1.0, 0.0)]);
        phase_fix_column(&mut v);
        assert!(v[0].re > 0.0 && v[0].im.abs() < 1e-15);
        assert_relative_eq!(v[0].re, 2.0, max_relative = 1e-14);
    }
}
