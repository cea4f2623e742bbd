//! Reporting for the acceptance suite.
//!
//! Each criterion runs in isolation (panics are caught) and prints one
//! line: `<id> PASS|FAIL <title>: <detail> [<seconds>s]`. Set
//! `RALIGN_ACCEPT=C1,C7` to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

/// `Ok(detail)` passes, `Err(detail)` fails.
pub type Outcome = Result<String, String>;

pub struct Suite {
    only: Option<Vec<String>>,
    passed: usize,
    failed: Vec<String>,
}

impl Default for Suite {
    fn default() -> Self {
        Self::new()
    }
}

impl Suite {
    pub fn new() -> Self {
        let only = std::env::var("RALIGN_ACCEPT")
            .ok()
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
        Suite {
            only,
            passed: 0,
            failed: Vec::new(),
        }
    }

    pub fn run(&mut self, id: &str, title: &str, f: impl FnOnce() -> Outcome) {
        if let Some(only) = &self.only {
            if !only.iter().any(|o| id.starts_with(o.as_str())) {
                return;
            }
        }
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(p) => Err(format!(
                "panicked: {}",
                p.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            )),
        };
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{id} {tag} {title}: {detail} [{secs:.1}s]");
        match outcome {
            Ok(_) => self.passed += 1,
            Err(_) => self.failed.push(id.to_string()),
        }
    }

    /// Print the summary and return the process exit code.
    pub fn finish(self) -> i32 {
        println!(
            "acceptance: {} passed, {} failed{}",
            self.passed,
            self.failed.len(),
            if self.failed.is_empty() {
                String::new()
            } else {
                format!(" ({})", self.failed.join(", "))
            }
        );
        i32::from(!self.failed.is_empty())
    }
}

/// Path of `file` under `RALIGN_DATA_ROOT`, or a `BLOCKED` reason.
pub fn dataset(file: &str) -> Result<PathBuf, String> {
    let Some(root) = std::env::var_os("RALIGN_DATA_ROOT") else {
        return Err(format!("BLOCKED: dataset not found ({file}; RALIGN_DATA_ROOT is not set)"));
    };
    let path = PathBuf::from(root).join(file);
    if path.is_file() {
        Ok(path)
    } else {
        Err(format!("BLOCKED: dataset not found ({})", path.display()))
    }
}

/// `Ok` when `cond` holds, carrying `detail` either way.
pub fn verdict(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}
