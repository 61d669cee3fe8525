use std::path::PathBuf;

use gmc::experiment::{parse_config, parse_config_str, ExperimentKind};

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_validate() {
    let mut kinds = vec![];
    for entry in std::fs::read_dir(config_dir()).unwrap() {
        let path = entry.unwrap().path();
        let c = parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        c.validate().unwrap();
        kinds.push(c.kind);
    }
    for k in ExperimentKind::ALL {
        assert!(kinds.contains(&k), "no config for {k:?}");
    }
}

#[test]
fn configs_round_trip() {
    let c = parse_config(config_dir().join("kahane.json")).unwrap();
    let text = serde_json::to_string(&c).unwrap();
    let back = parse_config_str(&text).unwrap();
    assert_eq!(serde_json::to_value(&c).unwrap(), serde_json::to_value(&back).unwrap());
}

#[test]
fn out_of_range_values_are_rejected() {
    for bad in [
        r#"{"kind": "ZepsBounds", "m": 100}"#,
        r#"{"kind": "ZepsBounds", "m": 8192}"#,
        r#"{"kind": "MeanNormalization", "beta": 1.5}"#,
        r#"{"kind": "MeanNormalization", "betas": [0.5, 0.0]}"#,
        r#"{"kind": "ZepsBounds", "replicas": 99}"#,
        r#"{"kind": "ZepsBounds", "tolerances": {"no_such_key": 1.0}}"#,
        r#"{"kind": "NotAKind"}"#,
    ] {
        assert!(parse_config_str(bad).is_err(), "accepted {bad}");
    }
}
