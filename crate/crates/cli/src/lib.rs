//! Library side of the `dyadic` command-line tool: instance files, the
//! `eval`/`check` evaluators and the randomized suite runner.

pub mod commands;
pub mod instance;

use std::path::Path;

use dyadic_core::suite::{run_suite, SuiteSizes, SuiteSummary, SuiteTables};

use crate::commands::CliError;

/// Deterministic text report of a suite run: one line per gate followed by
/// the JSON summary.
pub fn suite_report(summary: &SuiteSummary) -> String {
    let mut text = String::new();
    for gate in &summary.gates {
        text.push_str(&gate.line());
        text.push('\n');
    }
    text.push_str(&serde_json::to_string_pretty(summary).expect("summary serializes"));
    text.push('\n');
    text
}

/// Runs the suite and writes `summary.json`, `bands.csv` and `wolff.csv`
/// into `out_dir` when given.
pub fn run_suite_to(
    seed: u64,
    sizes: &SuiteSizes,
    out_dir: Option<&Path>,
) -> Result<(SuiteSummary, SuiteTables), CliError> {
    let (summary, tables) = run_suite(seed, sizes);
    if let Some(dir) = out_dir {
        let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(dir.join("summary.json"), json + "\n").map_err(io)?;
        write_rows(&dir.join("bands.csv"), &tables.bands)?;
        write_rows(&dir.join("wolff.csv"), &tables.wolff)?;
    }
    Ok((summary, tables))
}

/// One CSV row per gate.
pub fn write_gate_csv(path: &Path, summary: &SuiteSummary) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(err)?;
    writer
        .write_record(["criterion", "name", "passed", "instances", "worst", "bound"])
        .map_err(err)?;
    for g in &summary.gates {
        writer
            .write_record([
                g.criterion.to_string(),
                g.name.clone(),
                g.passed.to_string(),
                g.instances.to_string(),
                g.worst.to_string(),
                g.bound.to_string(),
            ])
            .map_err(err)?;
    }
    writer.flush().map_err(|e| CliError::Output(e.to_string()))
}

fn write_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(err)?;
    for row in rows {
        writer.serialize(row).map_err(err)?;
    }
    writer.flush().map_err(|e| CliError::Output(e.to_string()))
}
