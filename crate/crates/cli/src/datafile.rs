//! Plain-text observation files: one number per line, `#` starts a
//! comment, blank lines separate groups for the grouped family.

use mumle::{DataLayout, Family};

use crate::failure::{CmdResult, Failure};

pub fn parse_observations(text: &str, family: Family) -> CmdResult<DataLayout> {
    let mut groups: Vec<Vec<f64>> = vec![Vec::new()];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            // Only a line that was blank before comment stripping separates
            // groups; a comment-only line is skipped.
            if raw.trim().is_empty() && !groups.last().unwrap().is_empty() {
                groups.push(Vec::new());
            }
            continue;
        }
        let value: f64 = line.parse().map_err(|_| {
            Failure::config(format!(
                "line {}: expected a number, got {:?}",
                idx + 1,
                line
            ))
        })?;
        groups.last_mut().unwrap().push(value);
    }
    if groups.last().map_or(false, Vec::is_empty) {
        groups.pop();
    }
    if groups.is_empty() {
        return Err(Failure::config("data file contains no observations"));
    }

    if family.is_grouped() {
        Ok(DataLayout::Grouped(groups))
    } else if groups.len() > 1 {
        Err(Failure::config(format!(
            "family {} takes one flat sample, but the file has {} blank-line-separated groups",
            family.name(),
            groups.len()
        )))
    } else {
        Ok(DataLayout::Flat(groups.pop().unwrap()))
    }
}

pub fn parse_family(name: &str) -> CmdResult<Family> {
    Family::parse(name).ok_or_else(|| {
        let known: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
        Failure::config(format!(
            "unknown family {:?}; expected one of {}",
            name,
            known.join(", ")
        ))
    })
}
