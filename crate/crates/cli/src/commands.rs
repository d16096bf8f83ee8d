use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mumle::{
    check_pathology, check_regularity, compare_estimators, firth_corrected_estimate, mle_report,
    mumle_report, run_experiment, DataSet, EstimateReport, EstimatorSelection, ExperimentConfig,
    Family, ParameterPoint, PriorSpec,
};
use serde::Serialize;

use crate::args::{EstimateArgs, PathologyArgs, ReportArgs, SimulateArgs};
use crate::config::{parse_estimator_token, parse_simulate_config};
use crate::datafile::parse_family;
use crate::failure::{CmdResult, Failure};
use crate::manifest::RunManifest;
use crate::report;

fn write_output(path: &Path, contents: &str) -> CmdResult<()> {
    fs::write(path, contents)
        .map_err(|e| Failure::io(&format!("cannot write {}", path.display()), e))
}

/// JSON goes to the named file, or to stdout when no path was given.
fn emit_json<T: Serialize>(output: Option<&Path>, document: &T) -> CmdResult<()> {
    let text = serde_json::to_string_pretty(document)
        .map_err(|e| Failure { code: 1, message: format!("serialization failed: {e}") })?;
    match output {
        Some(path) => write_output(path, &format!("{text}\n")),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| Failure::io("stdout", e))
        }
    }
}

/// Runs `f` on a dedicated pool when a thread count was requested.
/// Results never depend on the pool size; this only bounds parallelism.
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CmdResult<T> {
    match threads {
        None => Ok(f()),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure { code: 1, message: format!("thread pool: {e}") })
            .map(|pool| pool.install(f)),
    }
}

fn seed_from_env() -> CmdResult<Option<u64>> {
    match std::env::var("MU_SEED") {
        Ok(raw) => raw
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Failure::config(format!("MU_SEED must be an unsigned integer, got {raw:?}"))),
        Err(_) => Ok(None),
    }
}

fn point_for(family: Family, theta: f64, psi: f64, n: usize) -> ParameterPoint {
    if family.is_grouped() {
        ParameterPoint::new(vec![theta; n], psi)
    } else {
        ParameterPoint::scalar(theta, psi)
    }
}

// ---------------------------------------------------------------- estimate

#[derive(Serialize)]
struct EstimateEntry {
    #[serde(flatten)]
    report: EstimateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior: Option<String>,
}

#[derive(Serialize)]
struct EstimateDocument {
    manifest: RunManifest,
    family: &'static str,
    n: usize,
    estimates: Vec<EstimateEntry>,
}

fn resolve_estimators(
    family: Family,
    tokens: &[String],
    all: bool,
) -> CmdResult<Vec<EstimatorSelection>> {
    if all {
        // the closed-form pair only exists where the family table does
        let mut set = Vec::new();
        if family.has_closed_forms() {
            set.push(EstimatorSelection::Mle);
            set.push(EstimatorSelection::Mumle);
        }
        set.push(EstimatorSelection::Mml87(PriorSpec::PsiPowerLaw(-0.5)));
        set.push(EstimatorSelection::Firth);
        return Ok(set);
    }
    if tokens.is_empty() {
        return Ok(vec![EstimatorSelection::Mle, EstimatorSelection::Mumle]);
    }
    let mut selections = Vec::new();
    for token in tokens {
        let sel = parse_estimator_token(token)?;
        if selections.iter().any(|s: &EstimatorSelection| s.label() == sel.label()) {
            return Err(Failure::config(format!("duplicate estimator {:?}", sel.label())));
        }
        selections.push(sel);
    }
    Ok(selections)
}

fn run_selection(data: &DataSet, sel: &EstimatorSelection) -> CmdResult<EstimateEntry> {
    let (report, prior) = match sel {
        EstimatorSelection::Mle => (mle_report(data)?, None),
        EstimatorSelection::Mumle => (mumle_report(data)?, None),
        EstimatorSelection::Mml87(prior) => {
            (mumle::mml87_estimate(data, prior)?, Some(prior.describe()))
        }
        EstimatorSelection::Firth => {
            (firth_corrected_estimate(data)?, Some(PriorSpec::FirthInformation.describe()))
        }
    };
    Ok(EstimateEntry { report, prior })
}

pub fn cmd_estimate(args: &EstimateArgs) -> CmdResult<()> {
    let family = parse_family(&args.family)?;
    let text =
        fs::read_to_string(&args.data).map_err(|e| Failure::read_input(&args.data, e))?;
    let layout = crate::datafile::parse_observations(&text, family)?;
    let data = DataSet::new(family, layout)?;
    let selections = resolve_estimators(family, &args.estimators, args.all)?;

    let mut estimates = Vec::with_capacity(selections.len());
    for sel in &selections {
        estimates.push(run_selection(&data, sel)?);
    }

    let mut manifest =
        RunManifest::new("estimate", args.data.display().to_string(), None, text.as_bytes());
    if let Some(path) = &args.output {
        manifest.output_paths.push(path.display().to_string());
    }
    let document = EstimateDocument {
        manifest,
        family: family.name(),
        n: data.n(),
        estimates,
    };
    emit_json(args.output.as_deref(), &document)
}

// ---------------------------------------------------------------- simulate

pub fn cmd_simulate(args: &SimulateArgs) -> CmdResult<()> {
    let bytes = fs::read(&args.config).map_err(|e| Failure::read_input(&args.config, e))?;
    let text = String::from_utf8_lossy(&bytes);
    let spec = parse_simulate_config(&text)?;
    let seed = match args.seed {
        Some(s) => s,
        None => seed_from_env()?.unwrap_or(spec.seed),
    };

    let config = ExperimentConfig {
        family: spec.family,
        true_params: point_for(spec.family, spec.theta, spec.psi, spec.n),
        n: spec.n,
        m: spec.m,
        replicates: spec.replicates,
        seed,
        estimators: spec.estimators,
    };
    let result = with_threads(args.threads, || run_experiment(&config))??;
    let comparison = compare_estimators(&result);

    let csv_path = args.output.clone().unwrap_or_else(|| {
        let stem = args
            .config
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "simulate".into());
        PathBuf::from(format!("{stem}-results.csv"))
    });
    let json_path = csv_path.with_extension("json");

    let mut manifest =
        RunManifest::new("simulate", args.config.display().to_string(), Some(seed), &bytes);
    manifest.output_paths =
        vec![csv_path.display().to_string(), json_path.display().to_string()];

    write_output(&csv_path, &report::simulate_csv(&manifest, &result))?;
    let document = report::SimulateDocument {
        manifest: &manifest,
        result: &result,
        comparison: &comparison,
    };
    emit_json(Some(&json_path), &document)?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    Ok(())
}

// ---------------------------------------------------------- pathology-check

#[derive(Serialize)]
struct PathologyDocument {
    manifest: RunManifest,
    family: &'static str,
    theta: f64,
    psi: f64,
    n: usize,
    m: Option<usize>,
    replicates: u64,
    known_theta: bool,
    /// Sign the plug-in shift takes in this family's score convention;
    /// absent when the nuisance is treated as known.
    expected_sign: Option<&'static str>,
    report: mumle::PathologyReport,
}

pub fn cmd_pathology(args: &PathologyArgs) -> CmdResult<()> {
    let family = parse_family(&args.family)?;
    if !family.has_closed_forms() {
        return Err(Failure::unsupported(format!(
            "family {} has no score diagnostics",
            family.name()
        )));
    }
    let floor = mumle::pathology::MIN_CHECK_REPLICATES;
    if args.replicates < floor {
        return Err(Failure::config(format!(
            "replicates must be at least {floor} for a trustworthy 4-SE verdict, got {}",
            args.replicates
        )));
    }
    if args.m.is_some() && !family.is_grouped() {
        return Err(Failure::config(format!(
            "--m only applies to grouped families, not {}",
            family.name()
        )));
    }
    if family.is_grouped() && args.m.is_none() {
        return Err(Failure::config(format!(
            "family {} needs --m (observations per group)",
            family.name()
        )));
    }

    let seed = match args.seed {
        Some(s) => s,
        None => seed_from_env()?.unwrap_or(0),
    };
    let params = point_for(family, args.theta, args.psi, args.n);
    let report = with_threads(args.threads, || {
        if args.known_theta {
            check_regularity(family, &params, args.n, args.m, args.replicates, seed)
        } else {
            check_pathology(family, &params, args.n, args.m, args.replicates, seed)
        }
    })??;

    let expected_sign = (!args.known_theta).then(|| match family {
        Family::ParetoRate => "positive",
        _ => "negative",
    });

    let at_true = &report.mean_score_at_true_theta;
    println!(
        "regularity at true theta: {} (mean score {} +/- {})",
        if report.regularity_pass { "PASS" } else { "FAIL" },
        at_true.mean,
        at_true.se
    );
    match (&report.mean_score_at_theta_hat, expected_sign) {
        (Some(at_hat), Some(sign)) => println!(
            "plug-in shift: {} (mean score {} +/- {}, expected sign {sign})",
            if report.pathology_detected { "DETECTED" } else { "NOT DETECTED" },
            at_hat.mean,
            at_hat.se
        ),
        _ => println!("plug-in shift: NOT DETECTED (nuisance known, no plug-in step)"),
    }

    let mut manifest = RunManifest::new(
        "pathology-check",
        format!("{} n={} replicates={}", family.name(), args.n, args.replicates),
        Some(seed),
        format!("{} {} {} {} {:?}", family.name(), args.theta, args.psi, args.n, args.m)
            .as_bytes(),
    );
    if let Some(path) = &args.output {
        manifest.output_paths.push(path.display().to_string());
    }
    let document = PathologyDocument {
        manifest,
        family: family.name(),
        theta: args.theta,
        psi: args.psi,
        n: args.n,
        m: args.m,
        replicates: args.replicates,
        known_theta: args.known_theta,
        expected_sign,
        report,
    };
    match &args.output {
        Some(path) => emit_json(Some(path.as_path()), &document),
        // PASS/FAIL lines already went to stdout; keep it JSON-free
        None => Ok(()),
    }
}

// ------------------------------------------------------------------ report

pub fn cmd_report(args: &ReportArgs) -> CmdResult<()> {
    let mut inputs = Vec::with_capacity(args.inputs.len());
    let mut all_bytes = Vec::new();
    for path in &args.inputs {
        let bytes = fs::read(path).map_err(|e| Failure::read_input(path, e))?;
        all_bytes.extend_from_slice(&bytes);
        inputs.push((path.display().to_string(), bytes));
    }
    let rows = report::merge_mirrors(&inputs, args.allow_mixed)?;

    let mut manifest = RunManifest::new(
        "report",
        args.inputs
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
        None,
        &all_bytes,
    );
    if let Some(path) = &args.output {
        manifest.output_paths.push(path.display().to_string());
    }
    let csv = report::report_csv(&manifest, &rows);
    match &args.output {
        Some(path) => write_output(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
