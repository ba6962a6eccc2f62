//! Machine-readable run reports. Reports are deterministic given the
//! instance bytes, command, and seed; wall time is deliberately kept out
//! (callers may log it separately).

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub pass: bool,
    /// Values behind the check, as exact strings where possible.
    pub lhs: String,
    pub rhs: String,
}

impl BoundCheck {
    pub fn new(name: &str, pass: bool, lhs: impl ToString, rhs: impl ToString) -> Self {
        BoundCheck {
            name: name.to_string(),
            pass,
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub report_version: u32,
    pub command: String,
    pub instance_digest: String,
    pub seed: u64,
    /// Objective as an exact "num/den" string when the run produced one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    pub checks: Vec<BoundCheck>,
    /// Command-specific numbers, sorted by key for byte determinism.
    pub details: std::collections::BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<serde_json::Value>,
}

impl RunReport {
    pub fn new(command: &str, instance_bytes: &[u8], seed: u64) -> Self {
        RunReport {
            report_version: 1,
            command: command.to_string(),
            instance_digest: format!("{:016x}", fnv1a64(instance_bytes)),
            seed,
            objective: None,
            checks: vec![],
            details: Default::default(),
            schedule: None,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
