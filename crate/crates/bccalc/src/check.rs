//! Per-identity check outcomes, merged into suite reports.

use crate::bundle::EndForm;
use crate::form::Form;
use crate::scalar::Scalar;
use crate::superconn::describe_defect;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Largest offending coefficient magnitude (0 when passed in exact mode).
    pub max_defect: f64,
    /// Where the worst defect sits (block/entry/monomial), or `—`.
    pub location: String,
    /// Jet order the comparison was valid to; `None` means the check never
    /// produced a nonzero-order object (treat as vacuous).
    pub valid_order: Option<u32>,
}

impl CheckOutcome {
    pub fn from_form<S: Scalar>(name: &str, defect: &Form<S>, order: Option<u32>) -> Self {
        let passed = defect.is_zero();
        let (location, max_defect) = match defect.worst_term() {
            Some((mono, jm, mag)) => (
                format!("form ({},{},{}) jet {jm}", mono.p(), mono.q(), mono.m()),
                mag,
            ),
            None => ("—".to_string(), 0.0),
        };
        CheckOutcome {
            name: name.to_string(),
            passed,
            max_defect,
            location,
            valid_order: order,
        }
    }

    pub fn from_end<S: Scalar>(name: &str, defect: &EndForm<S>, order: Option<u32>) -> Self {
        let passed = defect.is_zero();
        let (max_defect, location) = describe_defect(defect);
        CheckOutcome {
            name: name.to_string(),
            passed,
            max_defect,
            location: if passed { "—".into() } else { location },
            valid_order: order,
        }
    }

    pub fn numeric(name: &str, value: f64, tol: f64) -> Self {
        CheckOutcome {
            name: name.to_string(),
            passed: value.abs() <= tol,
            max_defect: value.abs(),
            location: format!("tolerance {tol:.1e}"),
            valid_order: None,
        }
    }

    pub fn named(mut self, name: String) -> Self {
        self.name = name;
        self
    }
}

/// Merges sub-reports deterministically by insertion order; names must be
/// unique within a suite.
pub fn merge(reports: impl IntoIterator<Item = Vec<CheckOutcome>>) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for r in reports {
        out.extend(r);
    }
    out
}
