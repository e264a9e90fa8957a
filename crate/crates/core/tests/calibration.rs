use std::path::PathBuf;
use std::time::Instant;

use glr_adapt_core::calibration::{self, monte_carlo, CalibrationReport};
use glr_adapt_core::design::Calibration;
use glr_adapt_core::{Design, DesignSpec};

fn fixture(name: &str) -> DesignSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn run(spec: DesignSpec) -> CalibrationReport {
    let t = Instant::now();
    let r = calibration::calibrate(&Design::new(spec).unwrap()).unwrap();
    eprintln!("{:?} in {:.2?}: {:?}", r.method, t.elapsed(), r.thresholds);
    r
}

#[test]
fn normal_approx_hits_its_targets() {
    let r = run(fixture("table5_adapt.json"));
    for (a, t) in [
        (r.achieved.futility, r.targets.futility),
        (r.achieved.early_rejection, r.targets.early_rejection),
        (r.achieved.final_rejection, r.targets.final_rejection),
    ] {
        assert!((a - t).abs() < 1e-6, "{a} vs {t}");
    }
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
}

#[test]
fn four_stage_normal_approx() {
    let r = run(fixture("four_stage_adapt.json"));
    let th = r.thresholds;
    assert!((th.b - 3.48).abs() < 0.08, "{th:?}");
    assert!((th.b_tilde - 2.1).abs() < 0.08, "{th:?}");
    assert!((th.c - 2.31).abs() < 0.08, "{th:?}");
}

#[test]
fn monte_carlo_agrees_with_normal_approx_for_normal_data() {
    let mut spec = fixture("table5_adapt.json");
    let na = run(spec.clone()).thresholds;
    spec.calibration = Calibration::MonteCarlo { reps: 200_000, seed: 7 };
    let mc = run(spec).thresholds;
    assert!((na.b_tilde - mc.b_tilde).abs() < 0.1, "{na:?} {mc:?}");
    assert!((na.b - mc.b).abs() < 0.15, "{na:?} {mc:?}");
    assert!((na.c - mc.c).abs() < 0.15, "{na:?} {mc:?}");
}

#[test]
fn monte_carlo_refuses_unresolvable_targets() {
    let mut spec = fixture("table5_adapt.json");
    spec.alpha = 0.001;
    let design = Design::new(spec).unwrap();
    let err = monte_carlo::calibrate(&design, 1000, 0, None).unwrap_err();
    assert_eq!(err.code(), "precision");
}

#[test]
fn exact_calibration_of_binomial_design() {
    let r = run(fixture("table1a_adapt.json"));
    assert!(r.achieved.early_rejection <= r.targets.early_rejection + 1e-12);
    assert!(r.achieved.final_rejection <= r.targets.final_rejection + 1e-12);
    eprintln!("{r:#?}");
}
