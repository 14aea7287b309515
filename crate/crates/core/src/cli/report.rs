//! Run reports and their JSON / CSV renderings.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::inequalities::CheckReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Envelope printed by every command.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: &'static str,
    /// SHA-256 over the instance bytes and the effective flags.
    pub inputs_digest: String,
    /// SHA-256 over the serialized results payload.
    pub results_digest: String,
    pub seed: u64,
    pub results: Value,
    pub wall_time_ms: f64,
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

impl RunReport {
    pub fn new(command: &str, inputs_digest: String, seed: u64, results: Value, wall_time_ms: f64) -> Self {
        let canonical = serde_json::to_vec(&results).expect("JSON values always serialize");
        Self {
            command: command.to_string(),
            version: VERSION,
            inputs_digest,
            results_digest: sha256_hex(&[&canonical]),
            seed,
            results,
            wall_time_ms,
        }
    }
}

pub const CSV_COLUMNS: &str = "functional,space,trials,violations,worst_slack,seeds";

/// Fixed-column CSV for fuzz reports, preceded by one `#` comment line with
/// the tool version and run parameters. Contains no timing, so reruns are
/// byte-identical.
pub fn fuzz_csv(reports: &[CheckReport], header: &str) -> String {
    let mut out = format!("# npcmaj {VERSION} {header}\n{CSV_COLUMNS}\n");
    for r in reports {
        let worst = r.worst_slack.map(|w| format!("{w:e}")).unwrap_or_default();
        let seeds: Vec<String> = r.instances.iter().map(u64::to_string).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.name(),
            r.space,
            r.trials,
            r.violations,
            worst,
            seeds.join(";")
        ));
    }
    out
}
