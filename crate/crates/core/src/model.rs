//! Two-layer ReLU regression network `R^10 → R^20 → R^1`, its synthetic
//! dataset, MSE loss, analytic gradient and finite-difference Hessian.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseMatrix;

pub const INPUT_DIM: usize = 10;
pub const HIDDEN_DIM: usize = 20;
/// `20·10 + 20 + 20 + 1`.
pub const PARAM_COUNT: usize = HIDDEN_DIM * INPUT_DIM + HIDDEN_DIM + HIDDEN_DIM + 1;
pub const DEFAULT_DATA_SIZE: usize = 500;
pub const NOISE_SCALE: f64 = 0.1;
/// Relative asymmetry of the raw finite-difference Hessian above which a
/// warning is logged; usually an activation crossing inside the stencil.
pub const ASYMMETRY_WARN: f64 = 1e-3;

const W1: usize = 0;
const B1: usize = HIDDEN_DIM * INPUT_DIM;
const W2: usize = B1 + HIDDEN_DIM;
const B2: usize = W2 + HIDDEN_DIM;

// Independent ChaCha streams for the dataset and the initial weights.
const DATA_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter vector has length {0}, expected {PARAM_COUNT}")]
    ParamLength(usize),
    #[error("dataset shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed dataset value: {0}")]
    Parse(String),
}

/// Standard normal draws: Box–Muller over ChaCha20 uniforms.
///
/// Each pair of 53-bit uniforms `(u1, u2)` with `u1 ∈ (0, 1]` yields
/// `√(−2 ln u1)·cos(2πu2)` followed by `√(−2 ln u1)·sin(2πu2)`.
pub struct GaussianSampler {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianSampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on `(0, 1]` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Sidecar metadata for an exported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub n_data: usize,
    pub w_star: Vec<f64>,
    pub noise_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n_data × 10`, row-major.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// `X ~ N(0, I₁₀)`, `w* ~ N(0, I₁₀)`, `Y = Xw* + 0.1·N(0, 1)`.
    ///
    /// Draw order: `w*`, then `X` row by row, then the noise.
    pub fn generate(seed: u64, n_data: usize) -> Self {
        let mut g = GaussianSampler::new(seed, DATA_STREAM);
        let w_star: Vec<f64> = (0..INPUT_DIM).map(|_| g.next()).collect();
        let x: Vec<f64> = (0..n_data * INPUT_DIM).map(|_| g.next()).collect();
        let y = x
            .chunks_exact(INPUT_DIM)
            .map(|row| dot(row, &w_star) + NOISE_SCALE * g.next())
            .collect();
        Self {
            x,
            y,
            meta: DatasetMeta {
                seed,
                n_data,
                w_star,
                noise_scale: NOISE_SCALE,
            },
        }
    }

    /// Dataset from explicit arrays; `meta` records only the shape.
    pub fn from_arrays(x: Vec<f64>, y: Vec<f64>) -> Result<Self, ModelError> {
        if x.len() != y.len() * INPUT_DIM || y.is_empty() {
            return Err(ModelError::Shape(format!(
                "{} inputs for {} targets",
                x.len(),
                y.len()
            )));
        }
        let n_data = y.len();
        Ok(Self {
            x,
            y,
            meta: DatasetMeta {
                seed: 0,
                n_data,
                w_star: vec![0.0; INPUT_DIM],
                noise_scale: 0.0,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.x[i * INPUT_DIM..(i + 1) * INPUT_DIM]
    }

    /// CSV with header `x1,…,x10,y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ModelError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=INPUT_DIM).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.input(i).iter().map(f64::to_string).collect();
            row.push(self.y[i].to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, meta: DatasetMeta) -> Result<Self, ModelError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.len() != INPUT_DIM + 1 {
            return Err(ModelError::Shape(format!("{} columns", header.len())));
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for record in r.records() {
            let record = record?;
            for (k, field) in record.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| ModelError::Parse(field.to_string()))?;
                if k < INPUT_DIM {
                    x.push(v);
                } else {
                    y.push(v);
                }
            }
        }
        if y.len() != meta.n_data {
            return Err(ModelError::Shape(format!(
                "{} rows, metadata says {}",
                y.len(),
                meta.n_data
            )));
        }
        Ok(Self { x, y, meta })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Initial-parameter distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Weights `~ N(0, 1/fan_in)`, biases zero.
    #[default]
    Gaussian,
    /// Weights and biases `~ U(−1/√fan_in, 1/√fan_in)`.
    Uniform,
}

/// Flattened network parameters: `W1` (20×10 row-major), `b1`, `W2`, `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams(Vec<f64>);

impl MlpParams {
    pub fn zeros() -> Self {
        Self(vec![0.0; PARAM_COUNT])
    }

    /// [`InitScheme::Gaussian`] initialization.
    pub fn init(seed: u64) -> Self {
        Self::init_with(seed, InitScheme::Gaussian)
    }

    pub fn init_with(seed: u64, scheme: InitScheme) -> Self {
        let mut g = GaussianSampler::new(seed, INIT_STREAM);
        let mut p = Self::zeros();
        let b1 = 1.0 / (INPUT_DIM as f64).sqrt();
        let b2 = 1.0 / (HIDDEN_DIM as f64).sqrt();
        match scheme {
            InitScheme::Gaussian => {
                for w in p.w1_mut() {
                    *w = b1 * g.next();
                }
                for w in p.w2_mut() {
                    *w = b2 * g.next();
                }
            }
            InitScheme::Uniform => {
                // Weights, then biases, layer by layer.
                let mut u = |bound: f64| bound * (2.0 * g.uniform() - 1.0);
                for w in p.w1_mut() {
                    *w = u(b1);
                }
                for b in p.b1_mut() {
                    *b = u(b1);
                }
                for w in p.w2_mut() {
                    *w = u(b2);
                }
                let bias = u(b2);
                p.set_b2(bias);
            }
        }
        p
    }

    pub fn from_flat(flat: Vec<f64>) -> Result<Self, ModelError> {
        if flat.len() == PARAM_COUNT {
            Ok(Self(flat))
        } else {
            Err(ModelError::ParamLength(flat.len()))
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.0
    }

    pub fn w1(&self) -> &[f64] {
        &self.0[W1..B1]
    }
    pub fn b1(&self) -> &[f64] {
        &self.0[B1..W2]
    }
    pub fn w2(&self) -> &[f64] {
        &self.0[W2..B2]
    }
    pub fn b2(&self) -> f64 {
        self.0[B2]
    }
    pub fn w1_mut(&mut self) -> &mut [f64] {
        &mut self.0[W1..B1]
    }
    pub fn b1_mut(&mut self) -> &mut [f64] {
        &mut self.0[B1..W2]
    }
    pub fn w2_mut(&mut self) -> &mut [f64] {
        &mut self.0[W2..B2]
    }
    pub fn set_b2(&mut self, v: f64) {
        self.0[B2] = v;
    }

    /// Network output for one input.
    pub fn forward(&self, x: &[f64]) -> f64 {
        forward_flat(&self.0, x)
    }
}

fn forward_flat(theta: &[f64], x: &[f64]) -> f64 {
    let (w1, b1, w2) = (&theta[W1..B1], &theta[B1..W2], &theta[W2..B2]);
    let mut f = theta[B2];
    for j in 0..HIDDEN_DIM {
        let z = b1[j] + dot(&w1[j * INPUT_DIM..(j + 1) * INPUT_DIM], x);
        if z > 0.0 {
            f += w2[j] * z;
        }
    }
    f
}

fn loss_flat(theta: &[f64], data: &Dataset) -> f64 {
    let sum: f64 = (0..data.len())
        .map(|i| (forward_flat(theta, data.input(i)) - data.y[i]).powi(2))
        .sum();
    sum / data.len() as f64
}

/// Mean squared error `(1/N)·Σ (f(x_i) − y_i)²`.
pub fn loss(params: &MlpParams, data: &Dataset) -> f64 {
    loss_flat(&params.0, data)
}

/// Loss and gradient into `grad` (overwritten). ReLU subgradient is 0 at 0.
///
/// With `mask`, unit `j` on sample `i` is treated as active iff
/// `mask[i·20 + j]`, regardless of the sign of its preactivation.
fn loss_and_gradient_flat(
    theta: &[f64],
    data: &Dataset,
    mask: Option<&[bool]>,
    grad: &mut [f64],
) -> f64 {
    grad.fill(0.0);
    let (w1, b1, w2) = (&theta[W1..B1], &theta[B1..W2], &theta[W2..B2]);
    let n = data.len() as f64;
    let mut z = [0.0; HIDDEN_DIM];
    let mut active = [false; HIDDEN_DIM];
    let mut total = 0.0;
    for i in 0..data.len() {
        let x = data.input(i);
        let mut f = theta[B2];
        for j in 0..HIDDEN_DIM {
            z[j] = b1[j] + dot(&w1[j * INPUT_DIM..(j + 1) * INPUT_DIM], x);
            active[j] = mask.map_or(z[j] > 0.0, |m| m[i * HIDDEN_DIM + j]);
            if active[j] {
                f += w2[j] * z[j];
            }
        }
        let r = f - data.y[i];
        total += r * r;
        let coef = 2.0 * r / n;
        grad[B2] += coef;
        for j in 0..HIDDEN_DIM {
            if active[j] {
                grad[W2 + j] += coef * z[j];
                let d = coef * w2[j];
                grad[B1 + j] += d;
                let row = &mut grad[W1 + j * INPUT_DIM..W1 + (j + 1) * INPUT_DIM];
                for (g, xk) in row.iter_mut().zip(x) {
                    *g += d * xk;
                }
            }
        }
    }
    total / n
}

pub fn loss_and_gradient(params: &MlpParams, data: &Dataset) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; PARAM_COUNT];
    let l = loss_and_gradient_flat(&params.0, data, None, &mut grad);
    (l, grad)
}

pub fn gradient(params: &MlpParams, data: &Dataset) -> Vec<f64> {
    loss_and_gradient(params, data).1
}

#[derive(Debug, Clone)]
pub struct Hessian {
    /// Symmetrized `(H + Hᵀ)/2`.
    pub matrix: DenseMatrix,
    /// `‖H − Hᵀ‖_F / ‖H‖_F` of the raw finite-difference matrix.
    pub asymmetry: f64,
    /// Preactivations close enough to zero that some stencil point would
    /// flip their sign without the frozen mask.
    pub kink_crossings: usize,
}

fn fd_step(theta_j: f64) -> f64 {
    1e-5 * theta_j.abs().max(1.0)
}

/// Activation pattern at `theta`, and how many preactivations lie within
/// one finite-difference step of the kink.
fn activation_mask(theta: &[f64], data: &Dataset) -> (Vec<bool>, usize) {
    let (w1, b1) = (&theta[W1..B1], &theta[B1..W2]);
    let mut mask = Vec::with_capacity(data.len() * HIDDEN_DIM);
    let mut crossings = 0;
    for i in 0..data.len() {
        let x = data.input(i);
        for j in 0..HIDDEN_DIM {
            let row = &w1[j * INPUT_DIM..(j + 1) * INPUT_DIM];
            let z = b1[j] + dot(row, x);
            let reach = row
                .iter()
                .zip(x)
                .map(|(w, xk)| fd_step(*w) * xk.abs())
                .fold(fd_step(b1[j]), f64::max);
            if z.abs() <= reach {
                crossings += 1;
            }
            mask.push(z > 0.0);
        }
    }
    (mask, crossings)
}

/// Central differences of the analytic gradient, column by column, with
/// step `1e-5·max(1, |θ_j|)`, then symmetrized.
///
/// Stencil gradients keep the activation pattern of `params`, so the
/// result is the Hessian of the piecewise-quadratic region containing
/// `params` even when a preactivation sits within one step of zero.
pub fn hessian(params: &MlpParams, data: &Dataset) -> Hessian {
    let n = PARAM_COUNT;
    let mut theta = params.0.clone();
    let (mask, kink_crossings) = activation_mask(&theta, data);
    let mut g_plus = vec![0.0; n];
    let mut g_minus = vec![0.0; n];
    // raw[j * n + i] = ∂g_i/∂θ_j, i.e. column j stored contiguously.
    let mut raw = vec![0.0; n * n];
    for j in 0..n {
        let orig = theta[j];
        let h = fd_step(orig);
        theta[j] = orig + h;
        loss_and_gradient_flat(&theta, data, Some(&mask), &mut g_plus);
        theta[j] = orig - h;
        loss_and_gradient_flat(&theta, data, Some(&mask), &mut g_minus);
        theta[j] = orig;
        let col = &mut raw[j * n..(j + 1) * n];
        for i in 0..n {
            col[i] = (g_plus[i] - g_minus[i]) / (2.0 * h);
        }
    }
    let mut diff = 0.0;
    let mut total = 0.0;
    let mut sym = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // H_ij = raw[j * n + i]
            let hij = raw[j * n + i];
            let hji = raw[i * n + j];
            diff += (hij - hji).powi(2);
            total += hij * hij;
            sym[i * n + j] = 0.5 * (hij + hji);
        }
    }
    let asymmetry = if total > 0.0 { (diff / total).sqrt() } else { 0.0 };
    if asymmetry > ASYMMETRY_WARN {
        log::warn!("finite-difference Hessian asymmetry {asymmetry:.3e}");
    }
    if kink_crossings > 0 {
        log::debug!("{kink_crossings} preactivations within one difference step of the ReLU kink");
    }
    Hessian {
        matrix: DenseMatrix::from_real(n, n, &sym).expect("finite Hessian from finite gradients"),
        asymmetry,
        kink_crossings,
    }
}
