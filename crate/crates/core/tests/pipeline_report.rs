use std::fs;

use qbcap::photonics::NoiseModel;
use qbcap::pipeline::{analyze_state, run_pipeline, PipelineConfig, ReportBundle, ReportFormat, StateQuantities};
use qbcap::report::{emit_report, StatesFile, FIGURES};
use serde_json::Value;

fn quick_config() -> PipelineConfig {
    PipelineConfig {
        bootstrap_resamples: 10,
        ..PipelineConfig::default()
    }
}

fn names(paths: &[std::path::PathBuf]) -> Vec<String> {
    let mut v: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn default_config_writes_five_files() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_pipeline(&quick_config()).unwrap();
    let files = emit_report(&bundle, ReportFormat::Json, dir.path()).unwrap();
    assert_eq!(
        names(&files),
        ["fig3.json", "fig4.json", "fig5.json", "manifest.json", "states.json"]
    );
    let fig3: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fig3.json")).unwrap()).unwrap();
    assert_eq!(fig3["capacity"].as_array().unwrap().len(), 4);
    assert_eq!(fig3["capacity"][0]["theta_deg"].as_f64(), Some(15.0));
}

#[test]
fn csv_files_have_exact_header() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_pipeline(&quick_config()).unwrap();
    let files = emit_report(&bundle, ReportFormat::Csv, dir.path()).unwrap();
    let expected: usize = FIGURES.iter().map(|(_, q)| q.len()).sum();
    let csvs: Vec<_> = files.iter().filter(|p| p.extension().unwrap() == "csv").collect();
    assert_eq!(csvs.len(), expected);
    for path in csvs {
        let text = fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("theta_deg,value,err"));
        assert_eq!(lines.count(), 4);
    }
}

#[test]
fn empty_bundle_writes_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        thetas: vec![],
        ..PipelineConfig::default()
    };
    let files = emit_report(&ReportBundle::empty(config), ReportFormat::Json, dir.path()).unwrap();
    assert_eq!(names(&files), ["manifest.json"]);
}

#[test]
fn quantities_recompute_from_states_file() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_pipeline(&quick_config()).unwrap();
    emit_report(&bundle, ReportFormat::Json, dir.path()).unwrap();
    let states = StatesFile::read(&dir.path().join("states.json")).unwrap();
    assert_eq!(states.states.len(), bundle.rows.len());
    for entry in &states.states {
        let again = analyze_state(&entry.density().unwrap(), states.unit_energy, states.tsallis_q).unwrap();
        assert!((again.capacity_gap - entry.quantities.capacity_gap).abs() <= 1e-9);
        for (a, b) in again.values().iter().zip(entry.quantities.values()) {
            assert!((a - b).abs() <= 1e-9, "theta {}: {a} vs {b}", entry.theta_deg);
        }
    }
}

#[test]
fn more_noise_never_raises_fidelity_to_ideal() {
    let mut previous = [f64::INFINITY; 4];
    for s in [0.0, 0.05, 0.15] {
        let config = PipelineConfig {
            noise_model: NoiseModel::White,
            noise_strength: s,
            ..quick_config()
        };
        let bundle = run_pipeline(&config).unwrap();
        for (row, prev) in bundle.rows.iter().zip(previous.iter_mut()) {
            assert!(row.fidelity_to_ideal <= *prev + 1e-12, "theta {} s {s}", row.theta);
            *prev = row.fidelity_to_ideal;
        }
    }
}

#[test]
fn pipeline_is_deterministic() {
    let a = run_pipeline(&quick_config()).unwrap();
    let b = run_pipeline(&quick_config()).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.values, y.values);
        assert_eq!(x.errors, y.errors);
        assert_eq!(x.rho.matrix(), y.rho.matrix());
    }
    assert_eq!(a.metadata, b.metadata);
    let other = run_pipeline(&PipelineConfig {
        seed: 1,
        ..quick_config()
    })
    .unwrap();
    assert_ne!(a.rows[0].values, other.rows[0].values);
}

#[test]
fn invalid_configs_are_rejected() {
    for config in [
        PipelineConfig { thetas: vec![], ..quick_config() },
        PipelineConfig { thetas: vec![91.0], ..quick_config() },
        PipelineConfig { noise_strength: 1.5, ..quick_config() },
        PipelineConfig { tsallis_q: 1.5, ..quick_config() },
        PipelineConfig { bootstrap_resamples: 1, ..quick_config() },
    ] {
        assert!(run_pipeline(&config).is_err());
    }
    assert!(serde_json::from_str::<PipelineConfig>(r#"{"thetaz": [1]}"#).is_err());
    let partial: PipelineConfig = serde_json::from_str(r#"{"seed": 5}"#).unwrap();
    assert_eq!(partial.seed, 5);
    assert_eq!(partial.thetas.len(), 4);
}

#[test]
fn relations_hold_on_reconstructed_states() {
    let bundle = run_pipeline(&quick_config()).unwrap();
    for row in &bundle.rows {
        let report = row.values.relations(0.02);
        assert!(report.all_hold(), "theta {}: {report:?}", row.theta);
        assert_eq!(StateQuantities::NAMES.len(), row.values.values().len());
    }
}
