use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// FAIL dominates INCONCLUSIVE, which dominates PASS.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Outcome of a certificate: verdict plus the statistics it was based on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub name: String,
    pub verdict: Verdict,
    pub stats: BTreeMap<String, f64>,
    pub samples: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DiagnosticReport {
    pub fn new(name: impl Into<String>, verdict: Verdict, samples: u64, seed: u64) -> Self {
        DiagnosticReport { name: name.into(), verdict, stats: BTreeMap::new(), samples, seed, notes: Vec::new() }
    }

    pub fn with_stat(mut self, key: &str, value: f64) -> Self {
        self.stats.insert(key.to_string(), value);
        self
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.stats.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn stat(&self, key: &str) -> Option<f64> {
        self.stats.get(key).copied()
    }

    pub fn passed(&self) -> bool {
        self.verdict.is_pass()
    }
}

impl fmt::Display for DiagnosticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} (samples={}, seed={})", self.name, self.verdict, self.samples, self.seed)?;
        for (k, v) in &self.stats {
            write!(f, " {k}={v:.6e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_order() {
        assert_eq!(Verdict::Pass.combine(Verdict::Inconclusive), Verdict::Inconclusive);
        assert_eq!(Verdict::Inconclusive.combine(Verdict::Fail), Verdict::Fail);
        assert_eq!(Verdict::Pass.combine(Verdict::Pass), Verdict::Pass);
    }

    #[test]
    fn serializes_verdict_uppercase() {
        let r = DiagnosticReport::new("x", Verdict::Inconclusive, 3, 4).with_stat("a", 1.5);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"INCONCLUSIVE\""));
        let back: DiagnosticReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
