use chemolab_web::demo::{self, DemoParams};

fn params(json: &str) -> DemoParams {
    DemoParams::from_json(json).unwrap()
}

#[test]
fn simulate_converges_inside_the_envelope() {
    let p = params(r#"{"points": 41, "t_end": 6.0, "frames": 20}"#);
    let view = demo::simulate(&p).unwrap();
    assert_eq!(view.x.len(), 41);
    assert!(view.frames.len() >= 20 && view.frames.len() <= 23, "{}", view.frames.len());
    assert!(view.failure.is_none());
    assert!(view.audit_passed && view.passed, "{:?}", view.checks);
    let last = view.frames.last().unwrap();
    assert_eq!(last.t, 6.0);
    assert!(last.u.iter().all(|u| (u - 1.0).abs() < 0.05));
    let (lo, hi) = (*view.envelope.lo.last().unwrap(), *view.envelope.hi.last().unwrap());
    assert!(lo < 1.0 && hi > 1.0);
    assert!(view.range.lo.last().unwrap() + 1e-3 >= lo && view.range.hi.last().unwrap() - 1e-3 <= hi);
}

#[test]
fn simulate_json_round_trips() {
    let view = demo::simulate(&params(r#"{"points": 21, "t_end": 1.0, "frames": 5}"#)).unwrap();
    let text = demo::to_json(&view).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["x"].as_array().unwrap().len(), 21);
    assert!(v["checks"].as_array().unwrap().iter().any(|c| c["name"] == "sandwich"));
}

#[test]
fn motility_curves_stay_below_audit_maxima() {
    let view = demo::motility(&params(r#"{"alpha": 0.1}"#), 20.0).unwrap();
    assert!(view.passed && view.sign_checks.iter().all(|&b| b));
    assert!((view.mu0_hat - 0.2).abs() < 1e-3);
    assert!(view.growth.iter().all(|&g| g <= view.mu0_hat + 1e-12));
    assert!(view.ratio.iter().all(|&r| r <= view.c_gamma_hat + 1e-12));
    assert_eq!(view.gamma[0], 1.0);

    let low = demo::motility(&params(r#"{"alpha": 0.1, "mu": 0.1}"#), 20.0).unwrap();
    assert!(!low.passed);
    assert!(demo::motility(&params(""), -1.0).is_err());
}

#[test]
fn closed_envelope_sits_under_the_conservative_bound() {
    let view = demo::closed_envelope(&params(r#"{"t_end": 20.0}"#)).unwrap();
    assert!(!view.left_rectangle);
    assert_eq!(view.bound_conservative.len(), view.t.len());
    for (g, b) in view.log_gap.iter().zip(&view.bound_conservative) {
        assert!(*g <= b * (1.0 + 1e-3), "{g} > {b}");
    }
    assert!(view.log_gap.last().unwrap() < &view.log_gap[0]);
}

#[test]
fn closed_envelope_omits_bounds_without_growth_dominance() {
    let view = demo::closed_envelope(&params(r#"{"mu": 0.1, "t_end": 2.0}"#)).unwrap();
    assert!(view.bound_fast.is_empty() && view.bound_conservative.is_empty());
}
