//! Linearized optimizer update operators and normality tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, DenseMatrix, C64};

/// Relative symmetry tolerance for Hessian inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// A commutator `C` counts as zero when `‖C‖₂ ≤ COMMUTATOR_TOL·scale`.
pub const COMMUTATOR_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Hessian is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("preconditioner entry {index} is {value}, must be strictly positive")]
    NonPositivePreconditioner { index: usize, value: f64 },
    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    AdamFrozen,
    AdamAugmented,
    SgdMomentumAugmented,
    Scalar,
}

/// Construction inputs, kept alongside the matrix for reporting.
#[derive(Debug, Clone, Default)]
pub struct OperatorInputs {
    pub hessian: Option<DenseMatrix>,
    pub preconditioner: Option<Vec<f64>>,
    pub eta: f64,
    pub beta1: Option<f64>,
    pub beta: Option<f64>,
    pub curvature: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct UpdateOperator {
    pub kind: OperatorKind,
    pub matrix: DenseMatrix,
    pub inputs: OperatorInputs,
}

impl UpdateOperator {
    pub fn is_normal(&self) -> bool {
        is_normal(&self.matrix)
    }
}

fn check_hessian(h: &DenseMatrix) -> Result<usize, OperatorError> {
    if !h.is_square() {
        return Err(OperatorError::Dimension(format!(
            "Hessian is {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let n = h.rows();
    let scale = h.max_abs();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((h.get(i, j) - h.get(j, i)).norm());
        }
    }
    if scale > 0.0 && worst > SYMMETRY_TOL * scale {
        return Err(OperatorError::NotSymmetric(worst / scale));
    }
    Ok(n)
}

fn check_preconditioner(m: &[f64], n: usize) -> Result<(), OperatorError> {
    if m.len() != n {
        return Err(OperatorError::Dimension(format!(
            "preconditioner has {} entries, Hessian is {n}x{n}",
            m.len()
        )));
    }
    match m.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(index) => Err(OperatorError::NonPositivePreconditioner {
            index,
            value: m[index],
        }),
        None => Ok(()),
    }
}

fn check_eta(eta: f64) -> Result<(), OperatorError> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(OperatorError::Hyperparameter(format!("eta = {eta} must be positive")))
    }
}

fn check_momentum(name: &str, beta: f64) -> Result<(), OperatorError> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(OperatorError::Hyperparameter(format!("{name} = {beta} must lie in [0, 1)")))
    }
}

/// `scale · M⁻¹ H` as an `n×n` row-major real buffer; row `i` is divided by `m_i`.
fn precondition(h: &DenseMatrix, m: &[f64], scale: f64) -> Vec<f64> {
    let n = h.rows();
    let mut out = Vec::with_capacity(n * n);
    for (i, &mi) in m.iter().enumerate() {
        for j in 0..n {
            out.push(scale * h.re(i, j) / mi);
        }
    }
    out
}

fn real_matrix(n: usize, data: Vec<f64>) -> DenseMatrix {
    DenseMatrix::from_raw(n, n, data.into_iter().map(|x| C64::new(x, 0.0)).collect())
}

/// `J = I − η·M⁻¹H`.
pub fn build_adam_frozen(
    h: &DenseMatrix,
    m: &[f64],
    eta: f64,
) -> Result<UpdateOperator, OperatorError> {
    let n = check_hessian(h)?;
    check_preconditioner(m, n)?;
    check_eta(eta)?;
    let mut j = precondition(h, m, eta);
    for (k, x) in j.iter_mut().enumerate() {
        *x = if k / n == k % n { 1.0 - *x } else { -*x };
    }
    Ok(UpdateOperator {
        kind: OperatorKind::AdamFrozen,
        matrix: real_matrix(n, j),
        inputs: OperatorInputs {
            hessian: Some(h.clone()),
            preconditioner: Some(m.to_vec()),
            eta,
            ..Default::default()
        },
    })
}

/// Augmented `(θ, m)` Jacobian
/// `[[I − η(1−β₁)M⁻¹H, −ηβ₁M⁻¹], [(1−β₁)H, β₁I]]`.
pub fn build_adam_augmented(
    h: &DenseMatrix,
    m: &[f64],
    eta: f64,
    beta1: f64,
) -> Result<UpdateOperator, OperatorError> {
    let n = check_hessian(h)?;
    check_preconditioner(m, n)?;
    check_eta(eta)?;
    check_momentum("beta1", beta1)?;
    let top_left = precondition(h, m, eta * (1.0 - beta1));
    let size = 2 * n;
    let mut j = vec![0.0; size * size];
    for r in 0..n {
        for c in 0..n {
            let delta = if r == c { 1.0 } else { 0.0 };
            j[r * size + c] = delta - top_left[r * n + c];
            j[(n + r) * size + c] = (1.0 - beta1) * h.re(r, c);
        }
        j[r * size + n + r] = -eta * beta1 / m[r];
        j[(n + r) * size + n + r] = beta1;
    }
    Ok(UpdateOperator {
        kind: OperatorKind::AdamAugmented,
        matrix: real_matrix(size, j),
        inputs: OperatorInputs {
            hessian: Some(h.clone()),
            preconditioner: Some(m.to_vec()),
            eta,
            beta1: Some(beta1),
            ..Default::default()
        },
    })
}

/// Augmented `(θ, v)` Jacobian `[[I − ηH, −ηβI], [H, βI]]`.
pub fn build_sgdm_augmented(
    h: &DenseMatrix,
    eta: f64,
    beta: f64,
) -> Result<UpdateOperator, OperatorError> {
    let n = check_hessian(h)?;
    check_eta(eta)?;
    check_momentum("beta", beta)?;
    let size = 2 * n;
    let mut j = vec![0.0; size * size];
    for r in 0..n {
        for c in 0..n {
            let hrc = h.re(r, c);
            let delta = if r == c { 1.0 } else { 0.0 };
            j[r * size + c] = delta - eta * hrc;
            j[(n + r) * size + c] = hrc;
        }
        j[r * size + n + r] = -eta * beta;
        j[(n + r) * size + n + r] = beta;
    }
    Ok(UpdateOperator {
        kind: OperatorKind::SgdMomentumAugmented,
        matrix: real_matrix(size, j),
        inputs: OperatorInputs {
            hessian: Some(h.clone()),
            eta,
            beta: Some(beta),
            ..Default::default()
        },
    })
}

/// Momentum SGD on `L(θ) = λθ²/2`: `[[1 − ηλ, −ηβ], [λ, β]]`.
pub fn build_scalar_toy(
    curvature: f64,
    eta: f64,
    beta: f64,
) -> Result<UpdateOperator, OperatorError> {
    if !(curvature > 0.0 && curvature.is_finite()) {
        return Err(OperatorError::Hyperparameter(format!(
            "lambda = {curvature} must be positive"
        )));
    }
    check_eta(eta)?;
    check_momentum("beta", beta)?;
    let j = vec![1.0 - eta * curvature, -eta * beta, curvature, beta];
    Ok(UpdateOperator {
        kind: OperatorKind::Scalar,
        matrix: real_matrix(2, j),
        inputs: OperatorInputs {
            hessian: Some(DenseMatrix::from_diag(&[curvature])),
            eta,
            beta: Some(beta),
            curvature: Some(curvature),
            ..Default::default()
        },
    })
}

/// `J·J† − J†·J`.
pub fn normality_commutator(j: &DenseMatrix) -> DenseMatrix {
    assert!(j.is_square(), "normality commutator needs a square matrix");
    let adj = j.adjoint();
    &(j * &adj) - &(&adj * j)
}

/// `[H, M] = HM − MH` for diagonal `M`; entry `(i, j)` is `H_ij·(m_j − m_i)`.
pub fn hm_commutator(h: &DenseMatrix, m: &[f64]) -> Result<DenseMatrix, OperatorError> {
    if !h.is_square() || h.rows() != m.len() {
        return Err(OperatorError::Dimension(format!(
            "H is {}x{}, M has {} entries",
            h.rows(),
            h.cols(),
            m.len()
        )));
    }
    let n = m.len();
    Ok(DenseMatrix::from_raw(
        n,
        n,
        (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                h.get(i, j) * (m[j] - m[i])
            })
            .collect(),
    ))
}

/// Scale-aware normality test: `‖JJ† − J†J‖₂ ≤ COMMUTATOR_TOL·‖J‖₂²`.
pub fn is_normal(j: &DenseMatrix) -> bool {
    let scale = linalg::operator_norm_2(j).powi(2);
    linalg::operator_norm_2(&normality_commutator(j)) <= COMMUTATOR_TOL * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn adam_frozen_identity_hessian() {
        let op = build_adam_frozen(&DenseMatrix::identity(3), &[1.0; 3], 0.5).unwrap();
        assert!(close(&op.matrix, &DenseMatrix::identity(3).scale(0.5), 0.0));
    }

    #[test]
    fn adam_frozen_hand_example() {
        let h = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let op = build_adam_frozen(&h, &[1.0, 4.0], 0.1).unwrap();
        let expected = DenseMatrix::from_rows(&[vec![0.8, -0.1], vec![-0.025, 0.925]]).unwrap();
        assert!(close(&op.matrix, &expected, 1e-15));
        assert!(!op.is_normal());
    }

    #[test]
    fn scalar_preconditioner_gives_symmetric_operator() {
        let h = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let op = build_adam_frozen(&h, &[2.5, 2.5], 0.1).unwrap();
        assert_eq!(op.matrix, op.matrix.transpose());
        assert_eq!(normality_commutator(&op.matrix).max_abs(), 0.0);
    }

    #[test]
    fn adam_frozen_errors() {
        let h = DenseMatrix::identity(2);
        assert!(matches!(
            build_adam_frozen(&h, &[1.0], 0.1),
            Err(OperatorError::Dimension(_))
        ));
        assert_eq!(
            build_adam_frozen(&h, &[1.0, 0.0], 0.1).unwrap_err(),
            OperatorError::NonPositivePreconditioner { index: 1, value: 0.0 }
        );
        let asym = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            build_adam_frozen(&asym, &[1.0, 1.0], 0.1),
            Err(OperatorError::NotSymmetric(_))
        ));
    }

    #[test]
    fn adam_augmented_scalar_example() {
        let op = build_adam_augmented(&DenseMatrix::from_diag(&[2.0]), &[1.0], 0.1, 0.9).unwrap();
        let expected = DenseMatrix::from_rows(&[vec![0.98, -0.09], vec![0.2, 0.9]]).unwrap();
        assert!(close(&op.matrix, &expected, 1e-15));
        assert_eq!(op.matrix.rows(), 2);
    }

    #[test]
    fn adam_augmented_without_momentum() {
        let h = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let m = [1.0, 4.0];
        let aug = build_adam_augmented(&h, &m, 0.1, 0.0).unwrap().matrix;
        let frozen = build_adam_frozen(&h, &m, 0.1).unwrap().matrix;
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(aug.get(r, c), frozen.get(r, c));
                assert_eq!(aug.re(r, c + 2), 0.0);
                assert_eq!(aug.get(r + 2, c), h.get(r, c));
                assert_eq!(aug.re(r + 2, c + 2), 0.0);
            }
        }
        let mut got: Vec<f64> = linalg::eig(&aug).unwrap().eigenvalues.iter().map(|z| z.re).collect();
        let mut want: Vec<f64> = linalg::eig(&frozen).unwrap().eigenvalues.iter().map(|z| z.re).collect();
        want.extend([0.0, 0.0]);
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sgdm_scalar_matches_toy() {
        let sgdm = build_sgdm_augmented(&DenseMatrix::from_diag(&[5.0]), 0.18, 0.9).unwrap();
        let toy = build_scalar_toy(5.0, 0.18, 0.9).unwrap();
        assert_eq!(sgdm.matrix, toy.matrix);
        assert_eq!(sgdm.matrix.re(0, 0), 1.0 - 0.18 * 5.0);
        assert_eq!(sgdm.matrix.re(0, 1), -0.18 * 0.9);
    }

    #[test]
    fn sgdm_without_momentum_is_block_triangular() {
        let h = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let j = build_sgdm_augmented(&h, 0.1, 0.0).unwrap().matrix;
        for r in 0..4 {
            for c in 2..4 {
                assert_eq!(j.re(r, c), 0.0);
            }
        }
        let mut got: Vec<f64> = linalg::eig(&j).unwrap().eigenvalues.iter().map(|z| z.re).collect();
        got.sort_by(f64::total_cmp);
        // eigs of I − 0.1H: 1 − 0.1·(5 ± √5)/2
        let s5 = 5f64.sqrt();
        let want = [0.0, 0.0, 1.0 - 0.1 * (5.0 + s5) / 2.0, 1.0 - 0.1 * (5.0 - s5) / 2.0];
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn sgdm_diagonal_hessian_decouples() {
        let j = build_sgdm_augmented(&DenseMatrix::from_diag(&[1.0, 5.0]), 0.18, 0.9).unwrap().matrix;
        let mut want = Vec::new();
        for lambda in [1.0, 5.0] {
            let (a, b) = linalg::two_by_two::eigenvalues(&build_scalar_toy(lambda, 0.18, 0.9).unwrap().matrix);
            want.extend([a, b]);
        }
        let got = linalg::eig(&j).unwrap().eigenvalues;
        for w in &want {
            let nearest = got.iter().map(|g| (g - w).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-12);
        }
    }

    #[test]
    fn scalar_toy_commutator_diagonal() {
        let toy = build_scalar_toy(5.0, 0.18, 0.9).unwrap();
        let c = normality_commutator(&toy.matrix);
        let d = 0.162f64.powi(2) - 25.0;
        assert!((c.re(0, 0) - d).abs() < 1e-12);
        assert!((c.re(1, 1) + d).abs() < 1e-12);
        assert!((d + 24.973756).abs() < 1e-12);
        assert!(!toy.is_normal());
    }

    #[test]
    fn scalar_toy_commutator_vanishes_on_balance() {
        let (eta, beta) = (0.5, 0.8);
        let toy = build_scalar_toy(eta * beta, eta, beta).unwrap();
        let c = normality_commutator(&toy.matrix);
        assert!(c.re(0, 0).abs() < 1e-15 && c.re(1, 1).abs() < 1e-15);
    }

    #[test]
    fn scalar_toy_without_momentum_reduces_to_scalar_map() {
        // With β = 0 the buffer never feeds back into θ, so the θ-subsystem
        // of J^t is exactly (1 − ηλ)^t.
        let j = build_scalar_toy(5.0, 0.18, 0.0).unwrap().matrix;
        assert_eq!(j.re(0, 1), 0.0);
        let mut power = j.clone();
        for t in 1..=10 {
            assert!((power.re(0, 0) - 0.1f64.powi(t)).abs() < 1e-15);
            assert_eq!(power.re(0, 1), 0.0);
            power = &power * &j;
        }
    }

    #[test]
    fn hm_commutator_examples() {
        let h = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let c = hm_commutator(&h, &[1.0, 2.0]).unwrap();
        let expected = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(c, expected);
        let diag = DenseMatrix::from_diag(&[1.0, 2.0, 3.0]);
        assert_eq!(hm_commutator(&diag, &[0.1, 5.0, 2.0]).unwrap().max_abs(), 0.0);
        let full = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(hm_commutator(&full, &[3.0, 3.0]).unwrap().max_abs(), 0.0);
        assert!(hm_commutator(&full, &[1.0]).is_err());
    }

    #[test]
    fn adam_frozen_commuting_inputs_are_normal() {
        let h = DenseMatrix::from_diag(&[1.0, 4.0, -2.0]);
        let op = build_adam_frozen(&h, &[0.5, 2.0, 3.0], 0.1).unwrap();
        assert!(normality_commutator(&op.matrix).max_abs() < 1e-15);
    }
}
