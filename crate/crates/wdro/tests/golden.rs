//! The seeded pipeline must reproduce the committed outputs byte for byte.
//! Regenerate with `wdro pipeline --dir crates/wdro/tests/golden` after an
//! intentional format change.

use std::path::Path;

use wdro::harness::{run_pipeline, ExperimentConfig};
use wdro::report::pipeline_artifacts;

#[test]
fn seeded_pipeline_matches_golden_files() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let cfg = ExperimentConfig::toy(10);
    let run = run_pipeline(&cfg).unwrap();
    for art in pipeline_artifacts(&run, &cfg).unwrap() {
        let expected = std::fs::read_to_string(dir.join(art.name)).unwrap();
        assert!(expected == art.contents, "{} differs from the golden copy", art.name);
    }
}

#[test]
fn golden_certificate_is_consistent() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let text = std::fs::read_to_string(dir.join("certificate.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let upper = v["L_upper"].as_f64().unwrap();
    let lower = v["l_lower"].as_f64().unwrap();
    let ln = v["l_N"].as_f64().unwrap();
    assert!(ln <= lower + 1e-9 && lower <= upper + 1e-9);
    let sw = &v["sandwich"];
    let wc = sw["worst_case_loss"].as_f64().unwrap();
    assert!(sw["lower"].as_f64().unwrap() - 1e-6 <= wc && wc <= sw["upper"].as_f64().unwrap() + 1e-6);
    let eps = sw["epsilon"].as_f64().unwrap();
    assert!((sw["canonical_cost"].as_f64().unwrap() - eps).abs() < 1e-9);
}
