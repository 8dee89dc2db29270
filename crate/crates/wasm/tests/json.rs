use dkcf_wasm::{cluster_json, simulate_json, weights_json};
use serde_json::Value;

#[test]
fn simulate_returns_frames_and_scores() {
    let v: Value = serde_json::from_str(&simulate_json("adaptive", 1.0, 5, 2, 3.0).unwrap()).unwrap();
    assert_eq!(v["frames"].as_array().unwrap().len(), 15);
    assert_eq!(v["scores"].as_array().unwrap().len(), 2);
    assert_eq!(v["frames"][0]["targets"].as_array().unwrap().len(), 4);
}

#[test]
fn simulate_rejects_unknown_mode() {
    assert!(simulate_json("median", 1.0, 0, 1, 1.0).is_err());
}

#[test]
fn weights_match_inverse_sigma() {
    let w: Vec<f64> = serde_json::from_str(&weights_json(&[1.0, 3.0]).unwrap()).unwrap();
    assert!((w[0] - 0.75).abs() < 1e-12 && (w[1] - 0.25).abs() < 1e-12);
    assert!(weights_json(&[1.0, 0.0]).is_err());
}

#[test]
fn cluster_labels_every_point() {
    let v: Value = serde_json::from_str(&cluster_json(0, 1, 0.3, 3).unwrap()).unwrap();
    let pts = v["points"].as_array().unwrap();
    assert!(!pts.is_empty());
    assert!(!v["detections"].as_array().unwrap().is_empty());
    assert!(cluster_json(9, 1, 0.3, 3).is_err());
}
