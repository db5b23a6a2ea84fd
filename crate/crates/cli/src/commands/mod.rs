pub mod converge;
pub mod holder;
pub mod kernel;
pub mod simulate;
pub mod verify;

use std::path::PathBuf;

use islt::estimates::verify::SuiteReport;

use crate::error::CliError;
use crate::run::Run;

/// Prints one line per verdict.
pub fn print_suite(report: &SuiteReport) {
    for v in &report.verdicts {
        say!("[{}] {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
}

/// Writes the suite into the run directory and records its files.
pub fn write_suite(run: &mut Run, report: &SuiteReport) -> Result<Vec<PathBuf>, CliError> {
    let paths = report.write(run.dir())?;
    run.record_all(&paths);
    Ok(paths)
}
