//! Serialized artifacts: the simulate CSV and its JSON mirror, and the
//! merged comparison CSV. Column sets are frozen; tests byte-compare
//! golden files against them.

use mumle::{ComparisonSummary, ExperimentResult};
use serde::{Deserialize, Serialize};

use crate::failure::{CmdResult, Failure};
use crate::manifest::RunManifest;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn simulate_csv(manifest: &RunManifest, result: &ExperimentResult) -> String {
    let mut out = manifest.csv_comments(&[("family", result.config.family.name().into())]);
    out.push_str("estimator,n,replicates,mean,bias,bias_se,variance,variance_se,mse,failures\n");
    for s in &result.stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.estimator,
            result.config.n,
            result.config.replicates,
            s.mean,
            s.bias,
            opt(s.bias_se),
            opt(s.variance),
            opt(s.variance_se),
            s.mse,
            result.replicate_failures,
        ));
    }
    out
}

#[derive(Serialize)]
pub struct SimulateDocument<'a> {
    pub manifest: &'a RunManifest,
    #[serde(flatten)]
    pub result: &'a ExperimentResult,
    pub comparison: &'a ComparisonSummary,
}

/// The slice of a simulate JSON mirror that `report` consumes. Unknown
/// fields are ignored so older outputs keep merging.
#[derive(Deserialize)]
struct MirrorDocument {
    config: MirrorConfig,
    stats: Vec<MirrorStat>,
}

#[derive(Deserialize)]
struct MirrorConfig {
    family: String,
    n: usize,
}

#[derive(Deserialize)]
struct MirrorStat {
    estimator: String,
    bias: f64,
    bias_se: Option<f64>,
    variance: Option<f64>,
    mse: f64,
}

#[derive(Debug)]
pub struct MergedRow {
    pub family: String,
    pub estimator: String,
    pub n: usize,
    pub bias: f64,
    pub bias_se: Option<f64>,
    pub variance: Option<f64>,
    pub mse: f64,
}

pub fn merge_mirrors(inputs: &[(String, Vec<u8>)], allow_mixed: bool) -> CmdResult<Vec<MergedRow>> {
    let mut rows = Vec::new();
    for (name, bytes) in inputs {
        let doc: MirrorDocument = serde_json::from_slice(bytes)
            .map_err(|e| Failure::config(format!("{name}: not a simulate JSON output: {e}")))?;
        for s in doc.stats {
            rows.push(MergedRow {
                family: doc.config.family.clone(),
                estimator: s.estimator,
                n: doc.config.n,
                bias: s.bias,
                bias_se: s.bias_se,
                variance: s.variance,
                mse: s.mse,
            });
        }
    }
    if rows.is_empty() {
        return Err(Failure::config("inputs contain no estimator rows"));
    }

    let mut families: Vec<&str> = rows.iter().map(|r| r.family.as_str()).collect();
    families.sort();
    families.dedup();
    if families.len() > 1 && !allow_mixed {
        return Err(Failure::config(format!(
            "inputs span multiple families ({}); pass --allow-mixed to merge them",
            families.join(", ")
        )));
    }

    rows.sort_by(|a, b| {
        (a.family.as_str(), a.estimator.as_str(), a.n)
            .cmp(&(b.family.as_str(), b.estimator.as_str(), b.n))
    });
    Ok(rows)
}

pub fn report_csv(manifest: &RunManifest, rows: &[MergedRow]) -> String {
    let mut out = manifest.csv_comments(&[("rows", rows.len().to_string())]);
    out.push_str("family,estimator,n,bias,bias_se,variance,mse\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.family,
            r.estimator,
            r.n,
            r.bias,
            opt(r.bias_se),
            opt(r.variance),
            r.mse,
        ));
    }
    out
}
