//! Named pass/fail tallies shared by the structural and statistical suites.

use serde::Serialize;

const KEPT_FAILURES: usize = 20;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub checked: usize,
    pub failed: usize,
    /// The first few failure descriptions.
    pub failures: Vec<String>,
    /// Diagnostic checks are reported but never fail a run.
    pub asserted: bool,
}

impl Check {
    pub fn new(name: &str) -> Check {
        Check { name: name.to_string(), checked: 0, failed: 0, failures: Vec::new(), asserted: true }
    }

    pub fn diagnostic(name: &str) -> Check {
        Check { asserted: false, ..Check::new(name) }
    }

    pub fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < KEPT_FAILURES {
                self.failures.push(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    pub fn merge(&mut self, other: &Check) {
        self.checked += other.checked;
        self.failed += other.failed;
        for f in &other.failures {
            if self.failures.len() < KEPT_FAILURES {
                self.failures.push(f.clone());
            }
        }
    }
}

/// True when every asserted check passed.
pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| !c.asserted || c.passed())
}
