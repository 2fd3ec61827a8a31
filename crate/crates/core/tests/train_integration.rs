use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use nonnormal_lab::linalg::{self, EigenDecomposition};
use nonnormal_lab::operators::{OperatorKind, UpdateOperator};
use nonnormal_lab::train::{
    self, AdamHyper, OptimizerConfig, SgdmHyper, TrainConfig,
};

fn sgdm(eta: f64, beta: f64, steps: u64, seed: u64) -> TrainConfig {
    TrainConfig::new(OptimizerConfig::Sgdm(SgdmHyper { eta, beta }), steps, seed)
}

#[test]
fn identical_config_gives_bit_identical_trace() {
    for cfg in [
        sgdm(0.18, 0.9, 30, 2),
        TrainConfig::new(
            OptimizerConfig::Adam(AdamHyper { eta: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 }),
            30,
            2,
        ),
    ] {
        let a = train::run_training(&cfg).unwrap();
        let b = train::run_training(&cfg).unwrap();
        assert_eq!(a, b);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
    }
}

#[test]
fn momentum_trace_obeys_transient_bound_chain() {
    // Five of the eight sampled steps, chosen once at random.
    let checked = [5u64, 15, 25, 30, 40];
    let mut failures = Vec::new();
    let mut seen = 0;
    let mut observer = |step: u64, op: &UpdateOperator, eig: &EigenDecomposition| {
        assert_eq!(op.kind, OperatorKind::SgdMomentumAugmented);
        if !checked.contains(&step) {
            return;
        }
        seen += 1;
        let norms = linalg::matrix_power_norms(&op.matrix, 20).unwrap();
        for (t, norm) in norms.iter().enumerate() {
            let bound = eig.kappa_v * eig.spectral_radius.powi(t as i32);
            if *norm > bound * (1.0 + 1e-6) + 1e-6 {
                failures.push((step, t, *norm, bound));
            }
        }
    };
    let trace = train::run_training_observed(&sgdm(0.18, 0.9, 40, 1), &mut observer).unwrap();
    assert!(trace.abort.is_none());
    assert_eq!(seen, checked.len());
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn small_step_gradient_descent_has_no_spikes() {
    let trace = train::run_training(&sgdm(0.02, 0.0, 100, 0)).unwrap();
    assert!(trace.spikes.is_empty(), "{:?}", trace.spikes);
    assert!(trace.final_loss().unwrap() < 0.5 * trace.initial_loss);
    assert_eq!(trace.records.len(), 20);
    assert!(trace.records.iter().all(|r| r.quasistatic_ratio.is_none()));
    assert!(trace.phases.unstable.is_none());
    let lead = train::lead_time(&trace);
    assert!(lead.spikes.is_empty());
}

#[test]
fn adam_records_carry_quasistatic_ratio() {
    let cfg = TrainConfig::new(
        OptimizerConfig::Adam(AdamHyper { eta: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 }),
        20,
        0,
    );
    let trace = train::run_training(&cfg).unwrap();
    assert!(trace.records.iter().all(|r| r.quasistatic_ratio.is_some()));
    // The frozen operator at an unsampled step is never computed.
    assert!(trace.record_at(7).is_none());
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nonnormal-lab"))
}

/// File contents keyed by relative path, with the timestamp lines removed.
fn snapshot(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let text = fs::read_to_string(&path).unwrap();
                let kept: Vec<&str> = text.lines().filter(|l| !l.contains("generated_unix")).collect();
                out.insert(path.strip_prefix(dir).unwrap().display().to_string(), kept.join("\n"));
            }
        }
    }
    out
}

#[test]
fn rerunning_an_emitted_config_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    for (sub, args) in [
        ("toy", vec!["toy"]),
        ("pseudo", vec!["pseudo", "pseudo.grid.resolution=[21, 21]", "pseudo.grid.re_range=[-2.0, 2.0]", "pseudo.grid.im_range=[-2.0, 2.0]"]),
        ("train", vec!["train", "train.steps=15"]),
    ] {
        let out = tmp.path().join(sub);
        let status = bin().args(&args).arg("--out").arg(&out).status().unwrap();
        assert!(status.success(), "{sub}");
        let first = snapshot(&out);
        assert!(first.contains_key("config.toml"));
        let status = bin()
            .args([args[0], "--config"])
            .arg(out.join("config.toml"))
            .status()
            .unwrap();
        assert!(status.success(), "{sub} rerun");
        assert_eq!(snapshot(&out), first, "{sub}");
    }
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| bin().args(args).arg("--out").arg(tmp.path().join("x")).status().unwrap().code();
    assert_eq!(code(&["toy"]), Some(0));
    assert_eq!(code(&["toy", "toy.colour=1"]), Some(2));
    assert_eq!(code(&["train", "--preset", "no-such-preset"]), Some(2));
    assert_eq!(code(&["train", "train.optimizer.eta=-1"]), Some(2));
    let diverging = tmp.path().join("div");
    let status = bin()
        .args(["train", "train.optimizer.eta=3.0", "train.steps=60", "--out"])
        .arg(&diverging)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    assert!(diverging.join("trace.csv").exists());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(diverging.join("trace.json")).unwrap()).unwrap();
    assert!(!json["abort"].is_null());
}
