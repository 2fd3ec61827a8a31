//! Closed-form 2×2 eigen and singular value formulas.
//!
//! These do not touch the general solvers and serve as an independent
//! cross-check for them.

use super::{DenseMatrix, C64};

fn entries(m: &DenseMatrix) -> [C64; 4] {
    assert!(m.rows() == 2 && m.cols() == 2, "expected a 2x2 matrix");
    [m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)]
}

/// Roots of `z² − tr·z + det`, `+` root first.
pub fn eigenvalues(m: &DenseMatrix) -> (C64, C64) {
    let [a, b, c, d] = entries(m);
    let half_tr = (a + d) / 2.0;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// `(σ_max, σ_min)` from the eigenvalues of `AᴴA`; the smaller one is
/// recovered as `|det A| / σ_max` to avoid cancellation.
pub fn singular_values(m: &DenseMatrix) -> (f64, f64) {
    let [a, b, c, d] = entries(m);
    // AᴴA = [[p, q], [q̄, r]]
    let p = a.norm_sqr() + c.norm_sqr();
    let r = b.norm_sqr() + d.norm_sqr();
    let q = a.conj() * b + c.conj() * d;
    let half_gap = 0.5 * (p - r);
    let s_max = (0.5 * (p + r) + half_gap.hypot(q.norm())).sqrt();
    let det = (a * d - b * c).norm();
    let s_min = if s_max > 0.0 { det / s_max } else { 0.0 };
    (s_max, s_min)
}

/// Unit right eigenvector for eigenvalue `lambda`.
pub fn eigenvector(m: &DenseMatrix, lambda: C64) -> [C64; 2] {
    let [a, b, c, d] = entries(m);
    let (x, y) = if b.norm() >= c.norm() && b.norm() > 0.0 {
        (b, lambda - a)
    } else if c.norm() > 0.0 {
        (lambda - d, c)
    } else if (a - lambda).norm() <= (d - lambda).norm() {
        (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    } else {
        (C64::new(0.0, 0.0), C64::new(1.0, 0.0))
    };
    let norm = (x.norm_sqr() + y.norm_sqr()).sqrt();
    [x / norm, y / norm]
}

/// `κ(V)` for the unit-column eigenvector matrix. Infinite when the two
/// eigenvectors are parallel.
pub fn kappa_unit_eigenvectors(m: &DenseMatrix) -> Option<f64> {
    let (l1, l2) = eigenvalues(m);
    let v1 = eigenvector(m, l1);
    let v2 = eigenvector(m, l2);
    let v = DenseMatrix::new(2, 2, vec![v1[0], v2[0], v1[1], v2[1]]).ok()?;
    let (s_max, s_min) = singular_values(&v);
    Some(if s_min > 0.0 { s_max / s_min } else { f64::INFINITY })
}
