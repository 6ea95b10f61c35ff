use deepwell_web::Demo;
use serde_json::Value;

fn demo() -> Demo {
    Demo::new(651).unwrap_or_else(|_| panic!("reference model"))
}

#[test]
fn limit_view_reports_the_morse_index() {
    let v: Value = serde_json::from_str(&demo().solve_limit_view("1,0").unwrap()).unwrap();
    assert_eq!(v["morse_index"], 3);
    assert_eq!(v["x"].as_array().unwrap().len(), 651);
    assert!(v["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn continuation_view_lands_on_the_requested_depth() {
    let v: Value = serde_json::from_str(&demo().continue_view("0,0", 1e4).unwrap()).unwrap();
    assert!((v["lambda"].as_f64().unwrap() - 1e4).abs() < 1e-6);
    let mass: Vec<f64> = v["mass_by_lambda"].as_array().unwrap().iter().map(|p| p[1].as_f64().unwrap()).collect();
    assert!(mass.windows(2).all(|w| w[1] <= w[0]), "exterior mass should shrink as the well deepens: {mass:?}");
    assert!(v["residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn decay_view_has_six_decades() {
    let rows: Vec<Value> = serde_json::from_str(&demo().decay_view("0,0", 3, 1).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    let f: Vec<f64> = rows.iter().map(|r| r["f_residual"].as_f64().unwrap()).collect();
    assert!(f.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn bad_signature_is_an_error() {
    assert!(demo().solve_limit_view("1").is_err());
    assert!(demo().solve_limit_view("a,b").is_err());
}
