//! Outcome records for sampled property checks.

use crate::grid::GridFunction;

/// How a measured quantity is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// `measured <= bound + tolerance`
    AtMost,
    /// `measured >= bound - tolerance`
    AtLeast,
    /// `measured > bound + tolerance`
    Exceeds,
}

impl Comparison {
    pub fn holds(&self, measured: f64, bound: f64, tolerance: f64) -> bool {
        match self {
            Self::AtMost => measured <= bound + tolerance,
            Self::AtLeast => measured >= bound - tolerance,
            Self::Exceeds => measured > bound + tolerance,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Self::AtMost => "<=",
            Self::AtLeast => ">=",
            Self::Exceeds => ">",
        }
    }
}

/// Evidence attached to a failing (or, for refutation checks, firing) result.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub description: String,
    pub function: Option<GridFunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub property: String,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
    pub trials: usize,
    pub witness: Option<Witness>,
    pub note: Option<String>,
}

impl CheckResult {
    pub fn new(
        name: impl Into<String>,
        property: impl Into<String>,
        measured: f64,
        bound: f64,
        tolerance: f64,
        comparison: Comparison,
    ) -> Self {
        Self {
            name: name.into(),
            property: property.into(),
            measured,
            bound,
            tolerance,
            comparison,
            passed: comparison.holds(measured, bound, tolerance),
            trials: 0,
            witness: None,
            note: None,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_witness(mut self, description: impl Into<String>, f: Option<GridFunction>) -> Self {
        self.witness = Some(Witness {
            description: description.into(),
            function: f,
        });
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}
