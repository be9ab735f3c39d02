//! Support for the `acceptance` test target: criterion selection and the
//! one-line verdicts it prints.
//!
//! `SNOWV_ACCEPTANCE=1,4,8` runs a subset; unset runs everything.

use std::fmt;
use std::time::Duration;

pub const SELECT_VAR: &str = "SNOWV_ACCEPTANCE";

/// Whether criterion `id` is selected by `spec` (the value of
/// [`SELECT_VAR`], if set).
pub fn selected(spec: Option<&str>, id: u8) -> bool {
    match spec {
        None => true,
        Some(s) if s.trim().is_empty() => true,
        Some(s) => s.split(',').any(|p| p.trim().parse() == Ok(id)),
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<5} {} [{:.1} s] {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Collects failed conditions with their explanations.
#[derive(Default, Debug)]
pub struct Conditions {
    notes: Vec<String>,
    failed: Vec<String>,
}

impl Conditions {
    pub fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failed.push(what);
        }
    }

    pub fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }

    /// Failures first, then everything that held.
    pub fn detail(&self) -> String {
        let mut parts: Vec<String> = self.failed.iter().map(|f| format!("FAILED {f}")).collect();
        parts.extend(self.notes.iter().cloned());
        parts.join("; ")
    }
}
