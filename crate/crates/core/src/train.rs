//! Full-batch optimizers, the training loop with sampled spectral
//! diagnostics, the loss-spike detector and lead-time analysis.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, EigenDecomposition, LinalgError};
use crate::model::{self, Dataset, InitScheme, MlpParams, DEFAULT_DATA_SIZE, PARAM_COUNT};
use crate::operators::{self, OperatorError, UpdateOperator};
use crate::pseudospec;

/// A step is a spike when its loss exceeds this multiple of the minimum
/// over the preceding [`SPIKE_WINDOW`] steps.
pub const SPIKE_FACTOR: f64 = 1.15;
pub const SPIKE_WINDOW: usize = 10;
/// Minimum number of earlier records before a κ(V) baseline is trusted.
pub const MIN_BASELINE_RECORDS: usize = 3;
/// Sampled records added after the last spike to close the unstable window.
pub const PHASE_MARGIN_SAMPLES: u64 = 5;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamHyper {
    pub eta: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdmHyper {
    pub eta: f64,
    pub beta: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Adam(AdamHyper),
    Sgdm(SgdmHyper),
}

impl OptimizerConfig {
    pub fn eta(&self) -> f64 {
        match self {
            Self::Adam(h) => h.eta,
            Self::Sgdm(h) => h.eta,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        match &mut self {
            Self::Adam(h) => h.eta = eta,
            Self::Sgdm(h) => h.eta = eta,
        }
        self
    }

    /// `2/((1+β)η)` for momentum SGD, `2/η` for Adam.
    pub fn sharpness_threshold(&self) -> f64 {
        match self {
            Self::Adam(h) => 2.0 / h.eta,
            Self::Sgdm(h) => 2.0 / ((1.0 + h.beta) * h.eta),
        }
    }

    /// Plain gradient-descent threshold `2/η`.
    pub fn reference_threshold(&self) -> f64 {
        2.0 / self.eta()
    }

    fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: &str, v: f64| TrainError::Config(format!("{what} = {v}"));
        let eta = self.eta();
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(bad("eta", eta));
        }
        match self {
            Self::Adam(h) => {
                for (name, b) in [("beta1", h.beta1), ("beta2", h.beta2)] {
                    if !(0.0..1.0).contains(&b) {
                        return Err(bad(name, b));
                    }
                }
                if !(h.eps > 0.0 && h.eps.is_finite()) {
                    return Err(bad("eps", h.eps));
                }
            }
            Self::Sgdm(h) => {
                if !(0.0..1.0).contains(&h.beta) {
                    return Err(bad("beta", h.beta));
                }
            }
        }
        Ok(())
    }
}

/// Adam moments. `t` counts completed updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub m: Vec<f64>,
    pub s: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(hyper: AdamHyper, n: usize) -> Self {
        Self {
            hyper,
            m: vec![0.0; n],
            s: vec![0.0; n],
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `params`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len(), "parameter/gradient length");
        assert_eq!(params.len(), self.m.len(), "state length");
        let AdamHyper {
            eta,
            beta1,
            beta2,
            eps,
        } = self.hyper;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.s[i] = beta2 * self.s[i] + (1.0 - beta2) * g * g;
            let precond = (self.s[i] / c2).sqrt() + eps;
            params[i] -= eta * (self.m[i] / c1) / precond;
        }
    }

    /// Diagonal of `M_t = diag(√(s_t/(1−β₂ᵗ)) + ε)`; `None` before the first update.
    pub fn preconditioner(&self) -> Option<Vec<f64>> {
        if self.t == 0 {
            return None;
        }
        let c2 = 1.0 - self.hyper.beta2.powi(self.t as i32);
        Some(self.s.iter().map(|s| (s / c2).sqrt() + self.hyper.eps).collect())
    }
}

/// Heavy-ball buffer `v_{t+1} = βv_t + g`, `θ_{t+1} = θ_t − ηv_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdmState {
    pub hyper: SgdmHyper,
    pub v: Vec<f64>,
    pub t: u64,
}

impl SgdmState {
    pub fn new(hyper: SgdmHyper, n: usize) -> Self {
        Self {
            hyper,
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len(), "parameter/gradient length");
        assert_eq!(params.len(), self.v.len(), "state length");
        let SgdmHyper { eta, beta } = self.hyper;
        self.t += 1;
        for i in 0..params.len() {
            self.v[i] = beta * self.v[i] + grad[i];
            params[i] -= eta * self.v[i];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Adam(AdamState),
    Sgdm(SgdmState),
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, n: usize) -> Self {
        match config {
            OptimizerConfig::Adam(h) => Self::Adam(AdamState::new(h, n)),
            OptimizerConfig::Sgdm(h) => Self::Sgdm(SgdmState::new(h, n)),
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Self::Adam(s) => s.step(params, grad),
            Self::Sgdm(s) => s.step(params, grad),
        }
    }

    pub fn set_eta(&mut self, eta: f64) {
        match self {
            Self::Adam(s) => s.hyper.eta = eta,
            Self::Sgdm(s) => s.hyper.eta = eta,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        match self {
            Self::Adam(s) => s.t,
            Self::Sgdm(s) => s.t,
        }
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64]) {
    state.step(params, grad);
}

pub fn sgdm_step(state: &mut SgdmState, params: &mut [f64], grad: &[f64]) {
    state.step(params, grad);
}

/// Indices `t ≥ 10` with `L(t) > 1.15·min L[t−10..t)`.
pub fn detect_spikes(losses: &[f64]) -> Vec<usize> {
    (SPIKE_WINDOW..losses.len())
        .filter(|&t| {
            let floor = losses[t - SPIKE_WINDOW..t]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            losses[t] > SPIKE_FACTOR * floor
        })
        .collect()
}

/// `η·‖M_t − M_prev‖₂ / ‖M_t‖₂` for diagonal preconditioners.
pub fn quasistatic_ratio(m_t: &[f64], m_prev: &[f64], eta: f64) -> f64 {
    assert_eq!(m_t.len(), m_prev.len(), "preconditioner length");
    let num = m_t
        .iter()
        .zip(m_prev)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let den = m_t.iter().map(|a| a.abs()).fold(0.0, f64::max);
    eta * num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmStart {
    pub steps: u64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    /// Steps at the main learning rate, after any warm start.
    pub steps: u64,
    #[serde(default = "default_stride")]
    pub sample_stride: u64,
    /// Seeds the initial weights, and the dataset unless `data_seed` is set.
    pub seed: u64,
    #[serde(default)]
    pub data_seed: Option<u64>,
    #[serde(default = "default_n_data")]
    pub n_data: usize,
    #[serde(default)]
    pub init: InitScheme,
    #[serde(default)]
    pub warm_start: Option<WarmStart>,
    #[serde(default = "default_kappa_multiplier")]
    pub kappa_multiplier: f64,
    #[serde(default = "default_baseline_window")]
    pub baseline_window: usize,
}

fn default_stride() -> u64 {
    5
}
fn default_n_data() -> usize {
    DEFAULT_DATA_SIZE
}
fn default_kappa_multiplier() -> f64 {
    5.0
}
fn default_baseline_window() -> usize {
    20
}

impl TrainConfig {
    pub fn new(optimizer: OptimizerConfig, steps: u64, seed: u64) -> Self {
        Self {
            optimizer,
            steps,
            sample_stride: default_stride(),
            seed,
            data_seed: None,
            n_data: default_n_data(),
            init: InitScheme::default(),
            warm_start: None,
            kappa_multiplier: default_kappa_multiplier(),
            baseline_window: default_baseline_window(),
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.steps + self.warm_start.map_or(0, |w| w.steps)
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.optimizer.validate()?;
        if let Some(w) = self.warm_start {
            self.optimizer.with_eta(w.eta).validate()?;
        }
        if self.sample_stride == 0 {
            return Err(TrainError::Config("sample_stride must be positive".into()));
        }
        if self.n_data == 0 {
            return Err(TrainError::Config("n_data must be positive".into()));
        }
        if !(self.kappa_multiplier > 1.0) {
            return Err(TrainError::Config(format!(
                "kappa_multiplier = {} must exceed 1",
                self.kappa_multiplier
            )));
        }
        if self.baseline_window == 0 {
            return Err(TrainError::Config("baseline_window must be positive".into()));
        }
        Ok(())
    }

    fn eta_at(&self, step: u64) -> f64 {
        match self.warm_start {
            Some(w) if step <= w.steps => w.eta,
            _ => self.optimizer.eta(),
        }
    }
}

/// Spectral diagnostics at one sampled step. Step `t` refers to the state
/// after `t` updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub loss: f64,
    pub rho_j: f64,
    pub kappa_v: f64,
    pub lambda_max_h: f64,
    pub spike: bool,
    /// Adam only.
    pub quasistatic_ratio: Option<f64>,
    pub sharpness_threshold: f64,
    pub t_c: Option<u64>,
    pub hessian_asymmetry: f64,
    pub kink_crossings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub first: u64,
    pub last: u64,
}

impl Window {
    pub fn contains(&self, step: u64) -> bool {
        (self.first..=self.last).contains(&step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Phases {
    pub unstable: Option<Window>,
    pub stable: Option<Window>,
}

impl Phases {
    /// Unstable window runs from step 1 to the last spike plus
    /// [`PHASE_MARGIN_SAMPLES`] strides; the rest is stable.
    pub fn from_spikes(spikes: &[u64], stride: u64, total: u64) -> Self {
        let Some(&last) = spikes.last() else {
            return Self {
                unstable: None,
                stable: (total > 0).then_some(Window {
                    first: 1,
                    last: total,
                }),
            };
        };
        let boundary = (last + PHASE_MARGIN_SAMPLES * stride).min(total);
        Self {
            unstable: Some(Window {
                first: 1,
                last: boundary,
            }),
            stable: (boundary < total).then_some(Window {
                first: boundary + 1,
                last: total,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub step: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub config: TrainConfig,
    /// `L(θ_0)`, before any update.
    pub initial_loss: f64,
    /// `losses[k]` is the loss after `k + 1` updates.
    pub losses: Vec<f64>,
    pub records: Vec<DiagnosticsRecord>,
    pub spikes: Vec<u64>,
    pub phases: Phases,
    pub abort: Option<Abort>,
}

impl TrainTrace {
    pub fn loss_at(&self, step: u64) -> Option<f64> {
        step.checked_sub(1)
            .and_then(|k| self.losses.get(k as usize).copied())
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }

    pub fn record_at(&self, step: u64) -> Option<&DiagnosticsRecord> {
        self.records.iter().find(|r| r.step == step)
    }

    /// Trace CSV with columns
    /// `step,loss,rho_J,kappa_V,lambda_max_H,spike,quasistatic_ratio,t_c`;
    /// unsampled steps leave the diagnostic fields empty.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "step",
            "loss",
            "rho_J",
            "kappa_V",
            "lambda_max_H",
            "spike",
            "quasistatic_ratio",
            "t_c",
        ])?;
        let mut records = self.records.iter().peekable();
        for (k, loss) in self.losses.iter().enumerate() {
            let step = k as u64 + 1;
            let spike = if self.spikes.binary_search(&step).is_ok() {
                "1"
            } else {
                "0"
            };
            let mut row = vec![step.to_string(), loss.to_string()];
            match records.next_if(|r| r.step == step) {
                Some(r) => {
                    row.push(r.rho_j.to_string());
                    row.push(r.kappa_v.to_string());
                    row.push(r.lambda_max_h.to_string());
                    row.push(spike.into());
                    row.push(r.quasistatic_ratio.map_or(String::new(), |q| q.to_string()));
                    row.push(r.t_c.map_or(String::new(), |t| t.to_string()));
                }
                None => {
                    row.extend(["", "", ""].map(String::from));
                    row.push(spike.into());
                    row.extend(["", ""].map(String::from));
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-step operator access for callers that need more than the record.
pub trait Observer {
    fn sampled(&mut self, step: u64, operator: &UpdateOperator, eig: &EigenDecomposition);
}

impl Observer for () {
    fn sampled(&mut self, _: u64, _: &UpdateOperator, _: &EigenDecomposition) {}
}

impl<F: FnMut(u64, &UpdateOperator, &EigenDecomposition)> Observer for F {
    fn sampled(&mut self, step: u64, operator: &UpdateOperator, eig: &EigenDecomposition) {
        self(step, operator, eig)
    }
}

pub fn run_training(config: &TrainConfig) -> Result<TrainTrace, TrainError> {
    run_training_observed(config, &mut ())
}

/// Full-batch training with diagnostics every `sample_stride` steps.
///
/// Adam is diagnosed through the frozen operator `I − ηM_t⁻¹H`, momentum
/// SGD through the augmented `(θ, v)` operator. A non-finite loss or a
/// failed decomposition ends the run early and is recorded in
/// [`TrainTrace::abort`]; the trace collected so far is kept.
pub fn run_training_observed(
    config: &TrainConfig,
    observer: &mut dyn Observer,
) -> Result<TrainTrace, TrainError> {
    config.validate()?;
    let data = Dataset::generate(config.data_seed(), config.n_data);
    let mut params = MlpParams::init_with(config.seed, config.init);
    let mut state = OptimizerState::new(config.optimizer, PARAM_COUNT);
    let total = config.total_steps();

    let mut trace = TrainTrace {
        config: config.clone(),
        initial_loss: f64::NAN,
        losses: Vec::with_capacity(total as usize),
        records: Vec::new(),
        spikes: Vec::new(),
        phases: Phases::default(),
        abort: None,
    };
    let mut prev_precond: Option<Vec<f64>> = None;

    for step in 0..=total {
        let (loss, grad) = model::loss_and_gradient(&params, &data);
        if step == 0 {
            trace.initial_loss = loss;
        } else {
            trace.losses.push(loss);
        }
        if !loss.is_finite() {
            trace.abort = Some(Abort {
                step,
                reason: format!("non-finite loss {loss}"),
            });
            break;
        }
        let eta = config.eta_at(step.max(1));
        let precond = match &state {
            OptimizerState::Adam(s) => s.preconditioner(),
            OptimizerState::Sgdm(_) => None,
        };
        if step > 0 && step % config.sample_stride == 0 {
            match diagnose(config, &state, &params, &data, eta, loss, step, &precond, &prev_precond, observer) {
                Ok(record) => trace.records.push(record),
                Err(e) => {
                    trace.abort = Some(Abort {
                        step,
                        reason: e.to_string(),
                    });
                    break;
                }
            }
        }
        if step == total {
            break;
        }
        prev_precond = precond;
        state.set_eta(config.eta_at(step + 1));
        state.step(params.as_mut_slice(), &grad);
    }

    trace.spikes = detect_spikes(&trace.losses)
        .into_iter()
        .map(|k| k as u64 + 1)
        .collect();
    for r in &mut trace.records {
        r.spike = trace.spikes.binary_search(&r.step).is_ok();
    }
    trace.phases = Phases::from_spikes(&trace.spikes, config.sample_stride, trace.losses.len() as u64);
    Ok(trace)
}

#[allow(clippy::too_many_arguments)]
fn diagnose(
    config: &TrainConfig,
    state: &OptimizerState,
    params: &MlpParams,
    data: &Dataset,
    eta: f64,
    loss: f64,
    step: u64,
    precond: &Option<Vec<f64>>,
    prev_precond: &Option<Vec<f64>>,
    observer: &mut dyn Observer,
) -> Result<DiagnosticsRecord, TrainError> {
    let hess = model::hessian(params, data);
    let lambda_max_h = *linalg::symmetric_eigenvalues(&hess.matrix)?
        .last()
        .expect("non-empty Hessian");
    let optimizer = config.optimizer.with_eta(eta);
    let (operator, quasistatic_ratio) = match state {
        OptimizerState::Adam(_) => {
            let m = precond.as_ref().expect("Adam has updated at least once");
            let op = operators::build_adam_frozen(&hess.matrix, m, eta)?;
            let q = prev_precond.as_ref().map(|p| quasistatic_ratio(m, p, eta));
            (op, q)
        }
        OptimizerState::Sgdm(s) => (
            operators::build_sgdm_augmented(&hess.matrix, eta, s.hyper.beta)?,
            None,
        ),
    };
    let eig = linalg::eig(&operator.matrix)?;
    observer.sampled(step, &operator, &eig);
    let pre = pseudospec::precursor(&eig);
    Ok(DiagnosticsRecord {
        step,
        loss,
        rho_j: eig.spectral_radius,
        kappa_v: eig.kappa_v,
        lambda_max_h,
        spike: false,
        quasistatic_ratio,
        sharpness_threshold: optimizer.sharpness_threshold(),
        t_c: pre.t_c,
        hessian_asymmetry: hess.asymmetry,
        kink_crossings: hess.kink_crossings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeLead {
    pub step: u64,
    /// Steps since the persistent sharpness crossing; `None` if it had not
    /// happened by the spike.
    pub sharpness_lead: Option<u64>,
    /// Steps since κ(V) first exceeded its trailing-median baseline.
    pub kappa_lead: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadTimeReport {
    pub sharpness_threshold: f64,
    pub reference_threshold: f64,
    pub sharpness_crossing: Option<u64>,
    pub kappa_multiplier: f64,
    pub kappa_crossing: Option<u64>,
    pub spikes: Vec<SpikeLead>,
    /// `median κ(V)` over the unstable window divided by the stable one.
    pub separation_ratio: Option<f64>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// First sampled step where `λ_max(H)` exceeds `threshold` and is still
/// above it at the next sample (or is the last sample).
pub fn persistent_crossing(records: &[DiagnosticsRecord], threshold: f64) -> Option<u64> {
    (0..records.len())
        .find(|&k| {
            records[k].lambda_max_h > threshold
                && records.get(k + 1).is_none_or(|r| r.lambda_max_h > threshold)
        })
        .map(|k| records[k].step)
}

/// First sampled step whose κ(V) exceeds `multiplier` times the median of
/// up to `window` preceding records, once at least
/// [`MIN_BASELINE_RECORDS`] are available.
pub fn kappa_crossing(records: &[DiagnosticsRecord], multiplier: f64, window: usize) -> Option<u64> {
    (MIN_BASELINE_RECORDS..records.len())
        .find(|&k| {
            let mut base: Vec<f64> = records[k.saturating_sub(window)..k]
                .iter()
                .map(|r| r.kappa_v)
                .collect();
            median(&mut base).is_some_and(|m| records[k].kappa_v > multiplier * m)
        })
        .map(|k| records[k].step)
}

pub fn separation_ratio(trace: &TrainTrace) -> Option<f64> {
    let (unstable, stable) = (trace.phases.unstable?, trace.phases.stable?);
    let mut a: Vec<f64> = trace
        .records
        .iter()
        .filter(|r| unstable.contains(r.step))
        .map(|r| r.kappa_v)
        .collect();
    let mut b: Vec<f64> = trace
        .records
        .iter()
        .filter(|r| stable.contains(r.step))
        .map(|r| r.kappa_v)
        .collect();
    Some(median(&mut a)? / median(&mut b)?)
}

pub fn lead_time(trace: &TrainTrace) -> LeadTimeReport {
    let opt = trace.config.optimizer;
    let threshold = opt.sharpness_threshold();
    let sharp = persistent_crossing(&trace.records, threshold);
    let kappa = kappa_crossing(
        &trace.records,
        trace.config.kappa_multiplier,
        trace.config.baseline_window,
    );
    let lead = |crossing: Option<u64>, spike: u64| crossing.filter(|&c| c <= spike).map(|c| spike - c);
    LeadTimeReport {
        sharpness_threshold: threshold,
        reference_threshold: opt.reference_threshold(),
        sharpness_crossing: sharp,
        kappa_multiplier: trace.config.kappa_multiplier,
        kappa_crossing: kappa,
        spikes: trace
            .spikes
            .iter()
            .map(|&s| SpikeLead {
                step: s,
                sharpness_lead: lead(sharp, s),
                kappa_lead: lead(kappa, s),
            })
            .collect(),
        separation_ratio: separation_ratio(trace),
    }
}
