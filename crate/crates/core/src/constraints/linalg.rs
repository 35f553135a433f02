//! Small dense helpers shared by the classification and multiplier paths.
//! One tolerance policy throughout: singular values below `tol · σ_max`
//! count as zero.

use nalgebra::{DMatrix, DVector};

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().svd(false, false).singular_values
}

pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = singular_values(m);
    let smax = s.max();
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|v| **v > tol * smax).count()
}

/// `σ_max / σ_min`, infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    let (smax, smin) = (s.max(), s.min());
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Orthonormal basis of the right null space, each vector signed so its
/// largest-magnitude component is positive.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return (0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
    }
    // Pad to square so the SVD exposes all n right singular vectors.
    let mut padded = DMatrix::zeros(m.nrows().max(n), n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let smax = svd.singular_values.max();
    let mut out = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if smax == 0.0 || *s <= tol * smax {
            let mut v: DVector<f64> = v_t.row(i).transpose();
            let imax = v.iamax();
            if v[imax] < 0.0 {
                v = -v;
            }
            out.push(v);
        }
    }
    out.sort_by(|a, b| b.iamax().cmp(&a.iamax()).reverse());
    out
}

/// Minimum-norm least-squares solution of `a x = b` (truncated SVD).
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = if smax == 0.0 { 1.0 } else { tol * smax };
    svd.solve(b, eps).expect("u and v_t were requested")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let z = null_space(&m, 1e-9);
        assert_eq!(z.len(), 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((z[0][0] - s).abs() < 1e-12 && (z[0][1] - s).abs() < 1e-12);
        assert_eq!(rank(&m, 1e-9), 1);
    }

    #[test]
    fn zero_matrix_has_full_null_space() {
        assert_eq!(null_space(&DMatrix::zeros(3, 3), 1e-9).len(), 3);
        assert_eq!(rank(&DMatrix::zeros(3, 3), 1e-9), 0);
    }

    #[test]
    fn min_norm_solution() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = lstsq(&a, &DVector::from_vec(vec![2.0]), 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
