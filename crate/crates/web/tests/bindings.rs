use l0rls_web::{attraction_value, learning_curves_value, theory_value, Scenario};

fn scenario() -> Scenario {
    Scenario {
        large: 2,
        small: 1,
        zero: 5,
        lambda: 0.99,
        gamma: 1e-4,
        alpha: 50.0,
        sigma_x2: 1.0,
        sigma_v2: 1e-3,
        seed: 11,
    }
}

#[test]
fn attraction_curve_is_odd_and_vanishes_outside_range() {
    let v = attraction_value(50.0, 0.04, 81).unwrap();
    let g: Vec<f64> = serde_json::from_value(v["g"].clone()).unwrap();
    let t: Vec<f64> = serde_json::from_value(v["t"].clone()).unwrap();
    for i in 0..g.len() {
        assert_eq!(g[i], -g[g.len() - 1 - i]);
        if t[i].abs() > 1.0 / 50.0 {
            assert_eq!(g[i], 0.0);
        }
    }
    assert_eq!(g[40], 0.0);
    assert!(attraction_value(50.0, 0.0, 10).is_err());
}

#[test]
fn theory_reports_prediction_for_generated_system() {
    let v = theory_value(&scenario()).unwrap();
    assert_eq!(v["w0"].as_array().unwrap().len(), 8);
    assert_eq!(v["prediction"]["stable"], true);
    assert!(v["prediction"]["d_total"].as_f64().unwrap() > 0.0);

    let mut unstable = scenario();
    unstable.gamma = 0.05;
    let v = theory_value(&unstable).unwrap();
    assert_eq!(v["prediction"]["stable"], false);
    assert!(v["prediction"].get("d_total").is_none());
}

#[test]
fn learning_curves_are_downsampled_and_deterministic() {
    let a = learning_curves_value(&scenario(), 1000, 4, 100).unwrap();
    let b = learning_curves_value(&scenario(), 1000, 4, 100).unwrap();
    assert_eq!(a, b);
    assert_eq!(a["iter"].as_array().unwrap().len(), 100);
    assert_eq!(a["rls"].as_array().unwrap().len(), 100);
    let rls = a["theory_rls"].as_f64().unwrap();
    assert!((rls - 8.0 * 0.01 * 1e-3 / 1.99).abs() < 1e-15);
}

#[test]
fn invalid_scenario_is_an_error() {
    let mut s = scenario();
    s.lambda = 1.5;
    assert!(theory_value(&s).is_err());
}
