use std::process::{Command, ExitCode};

use linregions_core::verify::{run_criterion, CriterionResult, CRITERIA, WITNESS_SEED};

fn verify_all(global: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_linregions"))
        .args(global)
        .args(["verify-all", "--seed", "0"])
        .output()
        .map_err(|e| e.to_string())?;
    match out.status.code() {
        Some(0 | 1) => Ok(out.stdout),
        code => Err(format!("verify-all exited with {code:?}")),
    }
}

/// Byte equality of the `verify-all` report across repeated runs and worker counts.
fn cli_determinism() -> Result<(), String> {
    let runs = [
        verify_all(&[])?,
        verify_all(&[])?,
        verify_all(&["--workers", "1"])?,
        verify_all(&["--workers", "8"])?,
    ];
    if runs.iter().all(|r| *r == runs[0]) {
        Ok(())
    } else {
        Err("verify-all reports differ".into())
    }
}

fn main() -> ExitCode {
    let mut failed = 0;
    for id in 1..=CRITERIA {
        let mut r: CriterionResult = run_criterion(id, WITNESS_SEED);
        if id == CRITERIA {
            match cli_determinism() {
                Ok(()) => r.detail.push_str("; verify-all bytes identical"),
                Err(e) => {
                    r.passed = false;
                    r.detail.push_str(&format!("; {e}"));
                }
            }
        }
        if !r.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {}: {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    println!("{}/{CRITERIA} criteria passed", CRITERIA - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
