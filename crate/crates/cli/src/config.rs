//! Flat `key = value` experiment configs. Keys: family, theta, psi, n,
//! m (grouped family only), replicates, seed, estimators. `#` starts a
//! comment anywhere on a line.

use std::collections::BTreeMap;

use mumle::{EstimatorSelection, Family, PriorSpec};

use crate::datafile::parse_family;
use crate::failure::{CmdResult, Failure};

const KNOWN_KEYS: [&str; 8] =
    ["family", "theta", "psi", "n", "m", "replicates", "seed", "estimators"];

#[derive(Debug)]
pub struct SimulateSpec {
    pub family: Family,
    pub theta: f64,
    pub psi: f64,
    pub n: usize,
    pub m: Option<usize>,
    pub replicates: u64,
    pub seed: u64,
    pub estimators: Vec<EstimatorSelection>,
}

pub fn parse_simulate_config(text: &str) -> CmdResult<SimulateSpec> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Failure::config(format!("config line {}: expected key = value", idx + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let known = KNOWN_KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| Failure::config(format!("config: unknown key {key:?}")))?;
        if entries.insert(known, (idx + 1, value)).is_some() {
            return Err(Failure::config(format!(
                "config line {}: duplicate key {key:?}",
                idx + 1
            )));
        }
    }

    let take = |key: &str| -> CmdResult<(usize, &str)> {
        entries
            .get(key)
            .copied()
            .ok_or_else(|| Failure::config(format!("config: missing key {key:?}")))
    };
    fn parse_as<T: std::str::FromStr>(key: &str, line: usize, value: &str) -> CmdResult<T> {
        value.parse().map_err(|_| {
            Failure::config(format!(
                "config line {line}: key {key:?} expects a {}, got {value:?}",
                std::any::type_name::<T>()
            ))
        })
    }

    let (line, value) = take("family")?;
    let family = parse_family(value)
        .map_err(|f| Failure::config(format!("config line {line}: {}", f.message)))?;
    let (line, value) = take("theta")?;
    let theta: f64 = parse_as("theta", line, value)?;
    let (line, value) = take("psi")?;
    let psi: f64 = parse_as("psi", line, value)?;
    let (line, value) = take("n")?;
    let n: usize = parse_as("n", line, value)?;
    let (line, value) = take("replicates")?;
    let replicates: u64 = parse_as("replicates", line, value)?;
    let (line, value) = take("seed")?;
    let seed: u64 = parse_as("seed", line, value)?;

    let m = match entries.get("m") {
        Some((line, value)) => {
            if !family.is_grouped() {
                return Err(Failure::config(format!(
                    "config line {line}: key \"m\" only applies to grouped families"
                )));
            }
            Some(parse_as::<usize>("m", *line, value)?)
        }
        None if family.is_grouped() => {
            return Err(Failure::config(format!(
                "config: family {} needs key \"m\" (observations per group)",
                family.name()
            )))
        }
        None => None,
    };

    if replicates == 0 {
        return Err(Failure::config("config: replicates must be at least 1"));
    }
    if n == 0 {
        return Err(Failure::config("config: n must be at least 1"));
    }

    let (_, value) = take("estimators")?;
    let estimators = parse_estimator_list(value)?;

    Ok(SimulateSpec { family, theta, psi, n, m, replicates, seed, estimators })
}

/// One estimator token: mle | mumle | firth | mml87 | mml87:<exponent>.
/// Bare mml87 uses the reciprocal-square-root prior.
pub fn parse_estimator_token(token: &str) -> CmdResult<EstimatorSelection> {
    match token {
        "mle" => Ok(EstimatorSelection::Mle),
        "mumle" => Ok(EstimatorSelection::Mumle),
        "firth" => Ok(EstimatorSelection::Firth),
        "mml87" => Ok(EstimatorSelection::Mml87(PriorSpec::PsiPowerLaw(-0.5))),
        _ => match token.strip_prefix("mml87:") {
            Some(exp) => {
                let e: f64 = exp.parse().map_err(|_| {
                    Failure::config(format!(
                        "estimator token {token:?}: exponent {exp:?} is not a number"
                    ))
                })?;
                if !e.is_finite() {
                    return Err(Failure::config(format!(
                        "estimator token {token:?}: exponent must be finite"
                    )));
                }
                Ok(EstimatorSelection::Mml87(PriorSpec::PsiPowerLaw(e)))
            }
            None => Err(Failure::config(format!(
                "unknown estimator token {token:?}; expected mle, mumle, mml87, mml87:<exponent>, or firth"
            ))),
        },
    }
}

pub fn parse_estimator_list(value: &str) -> CmdResult<Vec<EstimatorSelection>> {
    let mut selections = Vec::new();
    for token in value.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        selections.push(parse_estimator_token(token)?);
    }
    if selections.is_empty() {
        return Err(Failure::config("no estimators requested"));
    }
    for (i, a) in selections.iter().enumerate() {
        if selections[..i].iter().any(|b| b.label() == a.label()) {
            return Err(Failure::config(format!(
                "duplicate estimator {:?}",
                a.label()
            )));
        }
    }
    Ok(selections)
}
