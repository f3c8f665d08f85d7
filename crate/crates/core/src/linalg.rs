//! Small SVD-based subspace utilities shared by the spectral code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Iteration cap for iterative decompositions; exceeding it is reported as
/// non-convergence.
pub(crate) const MAX_ITER: usize = 1_000_000;

/// Singular values (descending) and the matching right singular vectors as
/// columns of `v`. Always returns `ncols` pairs, padding with zeros when the
/// matrix is wide.
pub(crate) struct RightSvd {
    pub values: Vec<f64>,
    pub v: DMatrix<C64>,
}

pub(crate) fn right_svd(a: &DMatrix<C64>) -> Result<RightSvd> {
    let k = a.ncols();
    if k == 0 {
        return Ok(RightSvd { values: vec![], v: DMatrix::zeros(0, 0) });
    }
    let padded;
    let a = if a.nrows() < k {
        padded = {
            let mut p = DMatrix::zeros(k, k);
            p.view_mut((0, 0), (a.nrows(), k)).copy_from(a);
            p
        };
        &padded
    } else {
        a
    };
    let svd = a
        .clone()
        .try_svd(false, true, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::Numeric(format!("SVD of {}x{} matrix did not converge", a.nrows(), a.ncols())))?;
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(k, k, |r, c| vt[(order[c], r)].conj());
    Ok(RightSvd { values, v })
}

/// Orthonormal basis of the numerical null space of `a`, together with the
/// smallest kept and largest discarded singular values.
pub(crate) struct NullSpace {
    pub basis: DMatrix<C64>,
    /// All singular values, descending.
    pub values: Vec<f64>,
    pub smallest_kept: Option<f64>,
    pub largest_dropped: Option<f64>,
}

impl NullSpace {
    /// Ratio between the smallest nonzero-side and largest null-side singular
    /// value; infinite when either side is empty or the null side is exact.
    pub fn gap_ratio(&self) -> f64 {
        match (self.smallest_kept, self.largest_dropped) {
            (Some(k), Some(d)) if d > 0.0 => k / d,
            _ => f64::INFINITY,
        }
    }
}

pub(crate) fn null_space(a: &DMatrix<C64>, threshold: f64) -> Result<NullSpace> {
    let k = a.ncols();
    let svd = right_svd(a)?;
    let rank = svd.values.iter().filter(|&&s| s >= threshold).count();
    let basis = svd.v.columns(rank, k - rank).into_owned();
    Ok(NullSpace {
        basis,
        smallest_kept: if rank > 0 { Some(svd.values[rank - 1]) } else { None },
        largest_dropped: if rank < k { Some(svd.values[rank]) } else { None },
        values: svd.values,
    })
}

/// Orthonormal basis of the column span of `a` (rank decided at `threshold`
/// relative to the largest singular value).
pub(crate) fn orthonormal_span(a: &DMatrix<C64>, threshold: f64) -> Result<DMatrix<C64>> {
    if a.ncols() == 0 {
        return Ok(DMatrix::zeros(a.nrows(), 0));
    }
    let svd = a
        .clone()
        .try_svd(true, false, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::Numeric(format!("SVD of {}x{} matrix did not converge", a.nrows(), a.ncols())))?;
    let u = svd.u.expect("requested left singular vectors");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<C64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| top > 0.0 && s > threshold * top)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    Ok(if cols.is_empty() { DMatrix::zeros(a.nrows(), 0) } else { DMatrix::from_columns(&cols) })
}

/// Sines of the principal angles between the spans of two matrices with
/// orthonormal columns, sorted descending. Returns `None` when the
/// dimensions differ.
pub fn principal_angle_sines(q1: &DMatrix<C64>, q2: &DMatrix<C64>) -> Option<Vec<f64>> {
    if q1.ncols() != q2.ncols() || q1.nrows() != q2.nrows() {
        return None;
    }
    if q2.ncols() == 0 {
        return Some(vec![]);
    }
    let residual = q2 - q1 * (q1.adjoint() * q2);
    let mut s: Vec<f64> = residual.singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Some(s)
}

/// Largest principal-angle sine, or `None` for mismatched dimensions.
pub fn max_principal_sine(q1: &DMatrix<C64>, q2: &DMatrix<C64>) -> Option<f64> {
    principal_angle_sines(q1, q2).map(|s| s.first().cloned().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(
            2,
            3,
            &[
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(2.0, 0.0),
                C64::new(2.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let ns = null_space(&a, 1e-10).unwrap();
        assert_eq!(ns.basis.ncols(), 2);
        assert!((&a * &ns.basis).norm() < 1e-12);
        assert!(ns.gap_ratio() > 1e10);
    }

    #[test]
    fn principal_angles_detect_equal_spans() {
        let q1 = DMatrix::from_row_slice(3, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let q2 = DMatrix::from_row_slice(3, 1, &[C64::new(0.0, 1.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(max_principal_sine(&q1, &q2).unwrap() < 1e-15);
        let q3 = DMatrix::from_row_slice(3, 1, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!((max_principal_sine(&q1, &q3).unwrap() - 1.0).abs() < 1e-15);
    }
}
