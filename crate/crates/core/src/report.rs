//! Writes a [`ReportBundle`] to disk.
//!
//! Figure tables and the manifest are canonical JSON: object keys sorted and
//! every float printed with 12 significant digits, so identical bundles give
//! byte-identical files. `states.json` keeps full round-trip precision so the
//! reported quantities can be recomputed exactly from it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::pipeline::{ReportBundle, ReportFormat, StateQuantities, ThetaRow};
use crate::state::{matrix_from_json, matrix_to_json, DensityMatrix, MatrixJson};

/// Quantities shown in each figure table.
pub const FIGURES: [(&str, &[&str]); 3] = [
    ("fig3", &["capacity", "von_neumann", "l1_coherence"]),
    ("fig4", &["csu", "ctu", "clu", "ccu"]),
    ("fig5", &["capacity_gap", "concurrence", "eof", "geometric"]),
];

/// Formats a float with 12 significant digits.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return "0.00000000000e0".into();
    }
    format!("{x:.11e}")
}

/// Pretty-printed JSON with sorted keys and [`format_float`] numbers.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*key], indent + 1);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

fn row_entry(row: &ThetaRow, name: &str) -> Value {
    json!({
        "theta_deg": row.theta,
        "value": row.values.get(name).unwrap(),
        "err": row.errors.get(name).unwrap(),
    })
}

fn figure_json(bundle: &ReportBundle, quantities: &[&str]) -> Value {
    let mut map = serde_json::Map::new();
    for name in quantities {
        let entries = bundle.rows.iter().map(|r| row_entry(r, name)).collect();
        map.insert((*name).to_string(), Value::Array(entries));
    }
    Value::Object(map)
}

fn figure_csv(bundle: &ReportBundle, name: &str) -> String {
    let mut out = String::from("theta_deg,value,err\n");
    for row in &bundle.rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_float(row.theta),
            format_float(row.values.get(name).unwrap()),
            format_float(row.errors.get(name).unwrap())
        );
    }
    out
}

/// One reconstructed state in `states.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEntry {
    pub theta_deg: f64,
    pub rho: MatrixJson,
    pub fidelity_to_ideal: f64,
    pub fidelity_to_target: f64,
    pub log_likelihood: f64,
    pub mle_iterations: usize,
    pub mle_converged: bool,
    pub quantities: StateQuantities,
    pub bootstrap_means: StateQuantities,
}

/// Contents of `states.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatesFile {
    pub unit_energy: f64,
    pub tsallis_q: f64,
    pub states: Vec<StateEntry>,
}

impl StatesFile {
    pub fn from_bundle(bundle: &ReportBundle) -> Self {
        Self {
            unit_energy: bundle.config.unit_energy,
            tsallis_q: bundle.config.tsallis_q,
            states: bundle
                .rows
                .iter()
                .map(|row| StateEntry {
                    theta_deg: row.theta,
                    rho: matrix_to_json(row.rho.matrix()),
                    fidelity_to_ideal: row.fidelity_to_ideal,
                    fidelity_to_target: row.fidelity_to_target,
                    log_likelihood: row.log_likelihood,
                    mle_iterations: row.mle_iterations,
                    mle_converged: row.mle_converged,
                    quantities: row.values,
                    bootstrap_means: row.bootstrap_means,
                })
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

impl StateEntry {
    pub fn density(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(matrix_from_json(&self.rho)?)
    }
}

/// Writes the report files and returns their paths. A bundle without rows
/// produces only `manifest.json`.
pub fn emit_report(bundle: &ReportBundle, format: ReportFormat, output_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(output_dir)?;
    let mut written = Vec::new();
    let mut write = |name: String, contents: String| -> Result<()> {
        let path = output_dir.join(&name);
        fs::write(&path, contents).map_err(Error::from)?;
        written.push(path);
        Ok(())
    };

    let mut files: Vec<String> = Vec::new();
    if !bundle.rows.is_empty() {
        for (figure, quantities) in FIGURES {
            match format {
                ReportFormat::Json => {
                    let name = format!("{figure}.json");
                    write(name.clone(), canonical_json(&figure_json(bundle, quantities)))?;
                    files.push(name);
                }
                ReportFormat::Csv => {
                    for quantity in quantities {
                        let name = format!("{figure}_{quantity}.csv");
                        write(name.clone(), figure_csv(bundle, quantity))?;
                        files.push(name);
                    }
                }
            }
        }
        let states = serde_json::to_value(StatesFile::from_bundle(bundle))?;
        let mut text = serde_json::to_string_pretty(&states)?;
        text.push('\n');
        write("states.json".into(), text)?;
        files.push("states.json".into());
    }

    let manifest = json!({
        "config": serde_json::to_value(&bundle.config)?,
        "seed": bundle.metadata.seed,
        "config_hash": bundle.metadata.config_hash,
        "version": bundle.metadata.version,
        "files": files,
        "rows": bundle.rows.len(),
    });
    write("manifest.json".into(), canonical_json(&manifest))?;
    Ok(written)
}
