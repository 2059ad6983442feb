use causens_core::cvae::{gradcheck_suite, SuiteReport};
use causens_core::ndcompute::Fault;

use crate::error::{CliError, CliResult, StageExt};

pub fn run_gradcheck(instances: usize, seed: u64, fault: Fault) -> CliResult<SuiteReport> {
    gradcheck_suite(instances, seed, fault).stage("gradcheck")
}

pub fn render(report: &SuiteReport) -> String {
    let mut s = format!("{:<16} {:>9} {:>14}  result\n", "check", "instances", "max_rel_error");
    for e in &report.entries {
        s.push_str(&format!(
            "{:<16} {:>9} {:>14.3e}  {}\n",
            e.name,
            e.instances,
            e.max_rel_error,
            if e.passed { "PASS" } else { "FAIL" }
        ));
    }
    s.push_str(&format!("tolerance {:e}\n", report.tolerance));
    s
}

/// Fails (nonzero exit) when any check exceeds the tolerance.
pub fn verdict(report: &SuiteReport) -> CliResult<()> {
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.entries.iter().filter(|e| !e.passed).map(|e| e.name.as_str()).collect();
        Err(CliError::Failed(format!("gradient check failed: {}", failed.join(", "))))
    }
}
