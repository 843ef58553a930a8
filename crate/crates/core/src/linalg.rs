//! Small dense linear algebra on jet-valued and real matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::fields::jet::Jet;

/// Inverse of a row-major `n×n` jet matrix by Gauss–Jordan elimination with
/// partial pivoting on the values. `None` if a pivot vanishes.
pub fn invert_jets(n: usize, m: &[Jet]) -> Option<Vec<Jet>> {
    assert_eq!(m.len(), n * n);
    let dim = m[0].dim();
    let order = m.iter().map(Jet::order).min().unwrap_or(0);
    let scale = m.iter().map(|j| j.value().abs()).fold(0.0, f64::max);
    let mut a: Vec<Jet> = m.iter().map(|j| j.truncate(order)).collect();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| Jet::constant(dim, order, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| {
                a[r * n + col]
                    .value()
                    .abs()
                    .total_cmp(&a[s * n + col].value().abs())
            })
            .unwrap();
        if a[piv * n + col].value().abs() <= 1e-300_f64.max(scale * 1e-15) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let p = a[col * n + col].recip();
        for k in 0..n {
            a[col * n + k] = &a[col * n + k] * &p;
            inv[col * n + k] = &inv[col * n + k] * &p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col].clone();
            if f.value() == 0.0 && f.gradient().iter().all(|x| *x == 0.0) {
                continue;
            }
            for k in 0..n {
                a[r * n + k] = &a[r * n + k] - &(&f * &a[col * n + k]);
                inv[r * n + k] = &inv[r * n + k] - &(&f * &inv[col * n + k]);
            }
        }
    }
    Some(inv)
}

/// Determinant of a row-major jet matrix by elimination with pivoting.
pub fn det_jets(n: usize, m: &[Jet]) -> Jet {
    assert_eq!(m.len(), n * n);
    let dim = m[0].dim();
    let order = m.iter().map(Jet::order).min().unwrap_or(0);
    let mut a: Vec<Jet> = m.iter().map(|j| j.truncate(order)).collect();
    let mut det = Jet::constant(dim, order, 1.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| {
                a[r * n + col]
                    .value()
                    .abs()
                    .total_cmp(&a[s * n + col].value().abs())
            })
            .unwrap();
        if a[piv * n + col].value() == 0.0 {
            return Jet::constant(dim, order, 0.0);
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        det = &det * &a[col * n + col];
        let p = a[col * n + col].recip();
        for r in col + 1..n {
            let f = &a[r * n + col] * &p;
            for k in col..n {
                a[r * n + k] = &a[r * n + k] - &(&f * &a[col * n + k]);
            }
        }
    }
    det
}

/// Symmetric eigenvalues in ascending order.
pub fn sym_eigenvalues(n: usize, m: &[f64]) -> Vec<f64> {
    let mat = symmetrized(n, m);
    let mut ev: Vec<f64> = SymmetricEigen::new(mat)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn symmetrized(n: usize, m: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| 0.5 * (m[i * n + j] + m[j * n + i]))
}

/// Rank and (positive, negative) counts with the relative threshold
/// `rel_tol · max|λ|`.
pub fn rank_signature(n: usize, m: &[f64], rel_tol: f64) -> (usize, (usize, usize)) {
    rank_signature_floor(n, m, rel_tol, 0.0)
}

/// As [`rank_signature`], also discarding eigenvalues below the absolute
/// `floor` (a roundoff estimate of the entries).
pub fn rank_signature_floor(
    n: usize,
    m: &[f64],
    rel_tol: f64,
    floor: f64,
) -> (usize, (usize, usize)) {
    let ev = sym_eigenvalues(n, m);
    let big = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if big == 0.0 {
        return (0, (0, 0));
    }
    let thr = (rel_tol * big).max(floor);
    let pos = ev.iter().filter(|&&x| x > thr).count();
    let neg = ev.iter().filter(|&&x| x < -thr).count();
    (pos + neg, (pos, neg))
}

/// Least-squares solution of `A x ≈ b` through the SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, smax * 1e-13).ok()
}

/// Orthonormal basis of the null space of the `rows×cols` matrix, as columns.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let cols = a.ncols();
    // Pad with zero rows so the SVD returns a full right basis.
    let mut full = DMatrix::zeros(a.nrows().max(cols), cols);
    full.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
    let svd = full.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    (0..cols)
        .filter(|&k| svd.singular_values[k] <= rel_tol * smax.max(f64::MIN_POSITIVE))
        .map(|k| v_t.row(k).transpose())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_inverse_matches_closed_form() {
        // m(x) = [[x, 1], [1, 2]], det = 2x - 1.
        let x = Jet::variable(1, 2, 0, 3.0);
        let one = Jet::constant(1, 2, 1.0);
        let two = Jet::constant(1, 2, 2.0);
        let inv = invert_jets(2, &[x.clone(), one.clone(), one, two]).unwrap();
        // inverse[0][0] = 2/(2x-1): value 0.4, derivative -4/(2x-1)^2 = -0.16
        assert!((inv[0].value() - 0.4).abs() < 1e-15);
        assert!((inv[0].d1(0) + 0.16).abs() < 1e-15);
        assert!((inv[0].d2(0, 0) - 16.0 / 125.0).abs() < 1e-14);
        let det = det_jets(
            2,
            &[
                x,
                Jet::constant(1, 2, 1.0),
                Jet::constant(1, 2, 1.0),
                Jet::constant(1, 2, 2.0),
            ],
        );
        assert_eq!((det.value(), det.d1(0)), (5.0, 2.0));
    }

    #[test]
    fn singular_matrix_rejected() {
        let c = |v| Jet::constant(1, 0, v);
        assert!(invert_jets(2, &[c(1.0), c(2.0), c(2.0), c(4.0)]).is_none());
    }

    #[test]
    fn rank_and_signature() {
        let m = [1.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(rank_signature(3, &m, 1e-10), (2, (1, 1)));
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        assert_eq!(null_space(&a, 1e-12).len(), 2);
    }
}
