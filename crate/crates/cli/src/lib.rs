//! Scenario files and commands behind the `conereach` binary.

pub mod commands;
pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

use anyhow::Result;

use commands::{Command, Outcome, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK};
use scenario::{Overrides, Scenario};

/// Load, override, run and write the outputs of one scenario. Returns the
/// outcome and the paths written.
pub fn run_file(cmd: Command, path: &Path, overrides: Overrides, out_dir: &Path) -> Result<(Outcome, Vec<PathBuf>)> {
    let mut sc = Scenario::load(path)?;
    sc.apply(overrides)?;
    let outcome = commands::run(cmd, &sc)?;
    let mut written = Vec::new();
    let report = out_dir.join(cmd.report_file(&sc.name));
    output::write_atomic(&report, &output::to_json(&outcome.report))?;
    written.push(report);
    if let Some(csv) = &outcome.csv {
        let p = out_dir.join(format!("{}.control.csv", sc.name));
        output::write_atomic(&p, csv)?;
        written.push(p);
    }
    Ok((outcome, written))
}

/// Combined exit code of a batch: any error wins, then any infeasibility.
pub fn combine_exit_codes(codes: &[i32]) -> i32 {
    if codes.iter().any(|c| *c != EXIT_OK && *c != EXIT_INFEASIBLE) {
        EXIT_ERROR
    } else if codes.contains(&EXIT_INFEASIBLE) {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_exit_codes() {
        assert_eq!(combine_exit_codes(&[]), 0);
        assert_eq!(combine_exit_codes(&[0, 2, 0]), 2);
        assert_eq!(combine_exit_codes(&[2, 1, 0]), 1);
    }
}
