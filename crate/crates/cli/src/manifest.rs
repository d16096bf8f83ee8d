//! Provenance block embedded in every output: tool version, effective
//! seed, and a truncated digest of the input bytes. CSV comments carry
//! exactly those three, never the timestamp, so reruns of the same
//! config are byte-identical; the JSON mirror adds the timestamp.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize, Clone)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub config_path: String,
    pub output_paths: Vec<String>,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub timestamp: String,
}

/// First 8 bytes of the SHA-256 digest, hex-encoded.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(
        command: &'static str,
        config_path: String,
        seed: Option<u64>,
        config_bytes: &[u8],
    ) -> Self {
        RunManifest {
            command,
            version: TOOL_VERSION,
            config_path,
            output_paths: Vec::new(),
            config_sha256: short_hash(config_bytes),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    /// Leading `#` lines for CSV outputs. `extra` rows (for example the
    /// family) appear between the title and the seed.
    pub fn csv_comments(&self, extra: &[(&str, String)]) -> String {
        let mut out = format!("# mumle {} v{}\n", self.command, self.version);
        for (key, value) in extra {
            out.push_str(&format!("# {key}: {value}\n"));
        }
        match self.seed {
            Some(seed) => out.push_str(&format!("# seed: {seed}\n")),
            None => out.push_str("# seed: none\n"),
        }
        out.push_str(&format!("# config-sha256: {}\n", self.config_sha256));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_comments_have_no_timestamp() {
        let manifest = RunManifest::new("simulate", "x.conf".into(), Some(7), b"abc");
        let block = manifest.csv_comments(&[("family", "normal".into())]);
        assert!(block.contains("# seed: 7\n"));
        assert!(block.contains("# family: normal\n"));
        assert!(!block.contains(&manifest.timestamp));
    }

    #[test]
    fn digest_is_stable_and_short() {
        assert_eq!(short_hash(b"abc"), "ba7816bf8f01cfea");
    }
}
