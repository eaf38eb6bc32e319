use serde_json::Value;
use trgppo_web::{exploration_curves_json, range_profile_json, solve_range_json};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn solve_reports_both_roots_and_truncation() {
    let p = 0.2f64;
    let delta = (1.0 - p) * ((1.0 - p) / (1.0 - p * 1.2)).ln() - p * 1.2f64.ln();
    let v = parse(solve_range_json(p, delta, 0.2).unwrap());
    assert!((v["upper"].as_f64().unwrap() - 1.2).abs() < 1e-9);
    assert_eq!(v["truncated_lower"].as_f64().unwrap(), 0.8);
    assert!(v["residual_lower"].as_f64().unwrap().abs() <= 1e-10);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(solve_range_json(1.5, 0.1, 0.2).is_err());
    assert!(solve_range_json(0.5, 0.0, 0.2).is_err());
    assert!(range_profile_json(0.95, 0.2, 10).is_err());
    assert!(exploration_curves_json("1,0.5", "0.2,0.6,0.2", 0.2, 0.02, 2).is_err());
    assert!(exploration_curves_json("1,0.5,-1", "0.2,0.6,0.2", 0.2, 0.02, 20).is_err());
    assert!(exploration_curves_json("1,x,-1", "0.2,0.6,0.2", 0.2, 0.02, 2).is_err());
}

#[test]
fn profile_is_monotone() {
    let v = parse(range_profile_json(0.3, 0.2, 50).unwrap());
    let (lower, upper) = (floats(&v["lower"]), floats(&v["upper"]));
    assert_eq!(upper.len(), 50);
    assert!(upper.windows(2).all(|w| w[0] > w[1]));
    assert!(lower.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn curves_start_at_the_initial_gap() {
    let v = parse(exploration_curves_json("1,0.5,-1", "0.2,0.6,0.2", 0.2, 0.02, 3).unwrap());
    let (ppo, trg) = (floats(&v["ppo"]), floats(&v["trgppo"]));
    assert_eq!(ppo.len(), 4);
    assert_eq!(ppo[0], 0.8);
    assert_eq!(trg[0], 0.8);
    assert!((ppo[1] - 0.824).abs() < 5e-4);
}
