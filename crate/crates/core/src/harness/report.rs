use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, HarnessError, EXIT_CLAIM_FAILURE, EXIT_PASS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimResult {
    pub id: String,
    /// Short label of the result the claim checks.
    pub paper_ref: String,
    pub pass: bool,
    /// Signed distance to the threshold; positive means slack. `None` for
    /// qualitative claims.
    pub margin: Option<f64>,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<f64>,
}

impl ClaimResult {
    pub fn new(
        id: impl Into<String>,
        paper_ref: &str,
        pass: bool,
        detail: impl Into<String>,
    ) -> Self {
        ClaimResult {
            id: id.into(),
            paper_ref: paper_ref.to_string(),
            pass,
            margin: None,
            detail: detail.into(),
            first_violation: None,
        }
    }

    /// Claim `value <= tol`, margin `tol - value`.
    pub fn at_most(
        id: impl Into<String>,
        paper_ref: &str,
        what: &str,
        value: f64,
        tol: f64,
    ) -> Self {
        let pass = value <= tol;
        ClaimResult {
            margin: finite(tol - value),
            ..ClaimResult::new(
                id,
                paper_ref,
                pass,
                format!("{what} = {value:.3e} (tolerance {tol:.0e})"),
            )
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = finite(margin);
        self
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    /// Content hash of the resolved config.
    pub fingerprint: String,
    pub suite: String,
    pub claims: Vec<ClaimResult>,
    pub artifacts: Vec<String>,
    /// Hash of scenario, fingerprint, suite and claims; independent of
    /// timing and output location.
    pub report_hash: String,
    pub wall_clock_ms: u64,
}

impl RunReport {
    pub fn new(scenario: &str, fingerprint: &str, suite: &str, claims: Vec<ClaimResult>) -> Self {
        let mut r = RunReport {
            scenario: scenario.to_string(),
            fingerprint: fingerprint.to_string(),
            suite: suite.to_string(),
            claims,
            artifacts: Vec::new(),
            report_hash: String::new(),
            wall_clock_ms: 0,
        };
        r.report_hash = r.compute_hash();
        r
    }

    pub fn compute_hash(&self) -> String {
        let body = serde_json::json!({
            "scenario": self.scenario,
            "fingerprint": self.fingerprint,
            "suite": self.suite,
            "claims": self.claims,
        });
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }

    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_CLAIM_FAILURE
        }
    }

    pub fn claim(&self, id: &str) -> Option<&ClaimResult> {
        self.claims.iter().find(|c| c.id == id)
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let json =
            serde_json::to_string_pretty(self).map_err(|e| HarnessError::Trace(e.to_string()))?;
        std::fs::write(path, json).map_err(io_err(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_timing_and_artifacts() {
        let claims = vec![ClaimResult::at_most(
            "a",
            "Theorem 1",
            "diameter",
            1e-6,
            1e-4,
        )];
        let mut a = RunReport::new("s", "f", "simulate", claims.clone());
        let b = RunReport::new("s", "f", "simulate", claims);
        a.wall_clock_ms = 99;
        a.artifacts.push("/tmp/x.csv".into());
        assert_eq!(a.compute_hash(), b.report_hash);
        assert!(a.passed());
        assert_eq!(a.exit_code(), 0);
    }

    #[test]
    fn failing_claim_sets_exit_code() {
        let c = ClaimResult::at_most("a", "Lemma 6", "spread", 1.0, 1e-3);
        assert!(!c.pass);
        assert!(c.margin.unwrap() < 0.0);
        assert_eq!(RunReport::new("s", "f", "x", vec![c]).exit_code(), 3);
    }

    #[test]
    fn non_finite_margin_serializes_as_null() {
        let c = ClaimResult::new("a", "x", false, "").with_margin(f64::NAN);
        assert_eq!(
            serde_json::to_value(&c).unwrap()["margin"],
            serde_json::Value::Null
        );
    }
}
