//! Runner for the end-to-end acceptance checks. Each check prints exactly one
//! pass/fail line; the process fails if any check fails.

use std::time::Instant;

/// Outcome of one check with a one-line summary of what was measured.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Verdict { passed, detail: detail.into() }
    }
}

pub struct Check {
    pub id: u32,
    pub title: &'static str,
    pub run: fn() -> fjsync::Result<Verdict>,
}

/// Runs the checks whose ids are in `only` (all when empty), printing one line
/// each. Returns the number of failures; an error counts as a failure.
pub fn run_checks(checks: &[Check], only: &[u32]) -> usize {
    let mut failures = 0;
    let mut ran = 0;
    for check in checks.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let verdict = (check.run)().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let tag = if verdict.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {:<28} {:>7.1}s  {}", check.id, check.title, secs, verdict.detail);
        ran += 1;
        if !verdict.passed {
            failures += 1;
        }
    }
    println!("{} of {ran} checks passed", ran - failures);
    failures
}

/// Check ids given as plain numeric arguments; anything else is ignored.
pub fn selected_ids(args: impl IntoIterator<Item = String>) -> Vec<u32> {
    args.into_iter().filter_map(|a| a.parse().ok()).collect()
}
