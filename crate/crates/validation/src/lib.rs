//! Shared plumbing for the acceptance suite: one `PASS`/`FAIL` line per
//! criterion, with its measured runtime against its budget.

use std::time::Duration;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: &'static str,
    pub title: &'static str,
    pub numeric_pass: bool,
    pub elapsed: Duration,
    pub budget: Duration,
    pub detail: String,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.numeric_pass && self.elapsed <= self.budget
    }

    /// Prints the verdict line.
    pub fn report(&self) -> bool {
        let tag = if self.pass() { "PASS" } else { "FAIL" };
        println!(
            "criterion {:<3} {tag}  {} | {} | runtime {:.2}s (budget {}s)",
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        );
        self.pass()
    }
}
