//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use nonnormal_lab::linalg::{self, DenseMatrix};
use nonnormal_lab::model::{
    self, Dataset, GaussianSampler, MlpParams, HIDDEN_DIM, INPUT_DIM, PARAM_COUNT,
};

const W1: usize = 0;
const B1: usize = HIDDEN_DIM * INPUT_DIM;

pub fn real(n: usize, data: &[f64]) -> DenseMatrix {
    DenseMatrix::from_real(n, n, data).unwrap()
}

pub fn gaussian_vec(g: &mut GaussianSampler, len: usize) -> Vec<f64> {
    (0..len).map(|_| g.next()).collect()
}

pub fn unit_vec(g: &mut GaussianSampler, len: usize) -> Vec<f64> {
    let v = gaussian_vec(g, len);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// `(A + Aᵀ)/2` of a row-major square buffer.
pub fn symmetrize(n: usize, a: &[f64]) -> Vec<f64> {
    (0..n * n)
        .map(|k| 0.5 * (a[k] + a[(k % n) * n + k / n]))
        .collect()
}

/// `a` rescaled so that its spectral radius equals `radius`.
pub fn with_spectral_radius(n: usize, a: &[f64], radius: f64) -> DenseMatrix {
    let rho = linalg::eig(&real(n, a)).unwrap().spectral_radius;
    let s = radius / rho;
    let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
    real(n, &scaled)
}

/// Largest `s` such that no preactivation changes sign on `θ ± s·v`.
pub fn kink_free_radius(theta: &[f64], data: &Dataset, v: &[f64]) -> f64 {
    let mut radius = f64::INFINITY;
    for i in 0..data.len() {
        let x = data.input(i);
        for j in 0..HIDDEN_DIM {
            let row = W1 + j * INPUT_DIM..W1 + (j + 1) * INPUT_DIM;
            let z = theta[B1 + j] + dot(&theta[row.clone()], x);
            let dz = v[B1 + j] + dot(&v[row], x);
            if dz != 0.0 {
                radius = radius.min(z.abs() / dz.abs());
            }
        }
    }
    radius
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn shifted(theta: &[f64], v: &[f64], s: f64) -> MlpParams {
    MlpParams::from_flat(theta.iter().zip(v).map(|(t, d)| t + s * d).collect()).unwrap()
}

/// Relative error of the analytic gradient against central differences of
/// the loss, one entry per coordinate.
pub fn gradient_fd_errors(params: &MlpParams, data: &Dataset, coords: &[usize]) -> Vec<f64> {
    let theta = params.as_slice();
    let grad = model::gradient(params, data);
    coords
        .iter()
        .map(|&c| {
            let mut e = vec![0.0; PARAM_COUNT];
            e[c] = 1.0;
            let h = (0.5 * kink_free_radius(theta, data, &e)).min(1e-5);
            let fd = (model::loss(&shifted(theta, &e, h), data)
                - model::loss(&shifted(theta, &e, -h), data))
                / (2.0 * h);
            (fd - grad[c]).abs() / grad[c].abs().max(1e-10)
        })
        .collect()
}

/// `vᵀHv` for a dense symmetric `H`.
pub fn quadratic_form(h: &DenseMatrix, v: &[f64]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|r| v[r] * (0..n).map(|c| h.re(r, c) * v[c]).sum::<f64>())
        .sum()
}

/// Unevaluated sum `hi + lo` carrying about 106 significant bits.
#[derive(Debug, Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }

    fn quick(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Dd(s, lo - (s - hi))
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.0 + o.0;
        let bb = s - self.0;
        let err = (self.0 - (s - bb)) + (o.0 - bb);
        Dd::quick(s, err + self.1 + o.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let err = self.0.mul_add(o.0, -p) + (self.0 * o.1 + self.1 * o.0);
        Dd::quick(p, err)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }
}

/// Loss at `θ + s·v` with the shifted parameters and every sum held in
/// double-double precision. `N·L` is returned to avoid a division.
fn scaled_loss_dd(theta: &[f64], v: &[f64], s: f64, data: &Dataset) -> Dd {
    let p: Vec<Dd> = theta
        .iter()
        .zip(v)
        .map(|(t, d)| Dd::from(*t).add(Dd::from(s).mul(Dd::from(*d))))
        .collect();
    let w2 = B1 + HIDDEN_DIM;
    let b2 = w2 + HIDDEN_DIM;
    let mut total = Dd::from(0.0);
    for i in 0..data.len() {
        let x = data.input(i);
        let mut f = p[b2];
        for j in 0..HIDDEN_DIM {
            let mut z = p[B1 + j];
            for k in 0..INPUT_DIM {
                z = z.add(p[W1 + j * INPUT_DIM + k].mul(Dd::from(x[k])));
            }
            if z.0 > 0.0 {
                f = f.add(p[w2 + j].mul(z));
            }
        }
        let r = f.add(Dd::from(-data.y[i]));
        total = total.add(r.mul(r));
    }
    total
}

/// Second difference of the loss along `v`. The step stays inside the
/// region where the activation pattern is fixed, where the loss is a quartic
/// in the step, and the loss is evaluated in double-double precision so the
/// difference does not cancel.
pub fn second_difference(params: &MlpParams, data: &Dataset, v: &[f64]) -> f64 {
    let theta = params.as_slice();
    let s = (0.5 * kink_free_radius(theta, data, v)).min(1e-3);
    let l0 = scaled_loss_dd(theta, v, 0.0, data);
    let lp = scaled_loss_dd(theta, v, s, data);
    let lm = scaled_loss_dd(theta, v, -s, data);
    let d = lp.add(lm).add(l0.add(l0).neg());
    (d.0 + d.1) / (s * s) / data.len() as f64
}
