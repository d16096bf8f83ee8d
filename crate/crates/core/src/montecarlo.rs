//! Replicated sampling experiments.
//!
//! Reproducibility contract: a run is a pure function of `(seed, config)`.
//! Each replicate draws from its own counter-derived generator stream, and
//! per-replicate results are reduced sequentially in replicate order with
//! compensated summation, so the number of worker threads never changes any
//! reported number, bit for bit.

use crate::accum::{central_moments, compensated_sum};
use crate::error::{Error, Result};
use crate::estimators::{firth_corrected_estimate, mml87_estimate, PriorSpec};
use crate::models::{self, DataSet, Family, ParameterPoint};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, OpenClosed01, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Generator for one replicate: the seed keys the cipher, the replicate
/// index selects an independent stream. Identical regardless of which
/// worker thread runs the replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// `theta − psi·log U` for `U ∈ (0, 1]`.
pub fn shifted_exponential_from_uniform(u: f64, theta: f64, psi: f64) -> f64 {
    theta - psi * u.ln()
}

/// `theta · U^(−1/psi)` for `U ∈ (0, 1]` (shape-`psi` Pareto above `theta`).
pub fn pareto_rate_from_uniform(u: f64, theta: f64, psi: f64) -> f64 {
    theta * u.powf(-1.0 / psi)
}

/// `theta · U^(−psi*)` for `U ∈ (0, 1]` (Pareto with shape `1/psi*`).
pub fn pareto_scale_from_uniform(u: f64, theta: f64, psi_star: f64) -> f64 {
    theta * u.powf(-psi_star)
}

/// Draws one dataset of `n` observations (or `n` groups of `m` for the
/// grouped family) at the given parameter point. Exact inverse-CDF samplers
/// for the support-bounded families, normal transform for the normal
/// families, and a transformation sampler for the Gamma family; all
/// deterministic given the generator state.
pub fn sample<R: Rng + ?Sized>(
    family: Family,
    params: &ParameterPoint,
    n: usize,
    m: Option<usize>,
    rng: &mut R,
) -> Result<DataSet> {
    models::validate_family_params(family, &params.theta, params.psi, n)?;
    let psi = params.psi;
    match family {
        Family::NormalMeanVar => {
            let sd = psi.sqrt();
            let theta = params.theta[0];
            let obs = (0..n)
                .map(|_| theta + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            DataSet::flat(family, obs)
        }
        Family::NeymanScott => {
            let m = m.ok_or_else(|| {
                Error::DataShape("grouped sampling needs a group size m".into())
            })?;
            if m < 2 {
                return Err(Error::DataShape("group size m must be at least 2".into()));
            }
            let sd = psi.sqrt();
            let groups = params
                .theta
                .iter()
                .map(|&t| {
                    (0..m)
                        .map(|_| t + sd * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            DataSet::grouped(family, groups)
        }
        Family::ShiftedExponential => {
            let theta = params.theta[0];
            let obs = (0..n)
                .map(|_| shifted_exponential_from_uniform(rng.sample(OpenClosed01), theta, psi))
                .collect();
            DataSet::flat(family, obs)
        }
        Family::ParetoRate => {
            let theta = params.theta[0];
            let obs = (0..n)
                .map(|_| pareto_rate_from_uniform(rng.sample(OpenClosed01), theta, psi))
                .collect();
            DataSet::flat(family, obs)
        }
        Family::ParetoScaleParam => {
            let theta = params.theta[0];
            let obs = (0..n)
                .map(|_| pareto_scale_from_uniform(rng.sample(OpenClosed01), theta, psi))
                .collect();
            DataSet::flat(family, obs)
        }
        Family::GammaTwoParam => {
            let gamma = rand_distr::Gamma::new(psi, params.theta[0]).map_err(|e| {
                Error::ParameterDomain(format!("gamma sampler rejected parameters: {e}"))
            })?;
            let obs = (0..n).map(|_| gamma.sample(rng)).collect();
            DataSet::flat(family, obs)
        }
    }
}

/// Which estimators an experiment evaluates on each replicate.
#[derive(Debug, Clone)]
pub enum EstimatorSelection {
    Mle,
    Mumle,
    Mml87(PriorSpec),
    Firth,
}

impl EstimatorSelection {
    /// Short stable label used in CSV output and rankings.
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorSelection::Mle => "mle",
            EstimatorSelection::Mumle => "mumle",
            EstimatorSelection::Mml87(_) => "mml87",
            EstimatorSelection::Firth => "firth",
        }
    }

    /// Longer form carried in config echoes.
    pub fn describe(&self) -> String {
        match self {
            EstimatorSelection::Mml87(prior) => format!("mml87[{}]", prior.describe()),
            other => other.label().to_string(),
        }
    }

    fn evaluate(&self, data: &DataSet) -> Result<f64> {
        match self {
            EstimatorSelection::Mle => models::psi_mle(data),
            EstimatorSelection::Mumle => models::psi_mumle(data),
            EstimatorSelection::Mml87(prior) => {
                let report = mml87_estimate(data, prior)?;
                if !report.converged {
                    return Err(Error::Convergence("penalized estimate did not converge".into()));
                }
                Ok(report.value)
            }
            EstimatorSelection::Firth => {
                let report = firth_corrected_estimate(data)?;
                if !report.converged {
                    return Err(Error::Convergence("penalized estimate did not converge".into()));
                }
                Ok(report.value)
            }
        }
    }
}

const MAX_ESTIMATORS: usize = 4;

/// Immutable description of one experiment. The seed is explicit: there is
/// no entropy default at this level.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub family: Family,
    pub true_params: ParameterPoint,
    pub n: usize,
    pub m: Option<usize>,
    pub replicates: u64,
    pub seed: u64,
    pub estimators: Vec<EstimatorSelection>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::DataShape("replicates must be at least 1".into()));
        }
        if self.family.is_grouped() {
            match self.m {
                Some(m) if m >= 2 => {}
                Some(m) => {
                    return Err(Error::DataShape(format!(
                        "group size m must be at least 2, got {m}"
                    )))
                }
                None => return Err(Error::DataShape("grouped family needs m".into())),
            }
            if self.n < 1 {
                return Err(Error::DataShape("need at least one group".into()));
            }
        } else if self.n < self.family.min_n() {
            return Err(Error::DataShape(format!(
                "family {} needs n ≥ {}, got {}",
                self.family,
                self.family.min_n(),
                self.n
            )));
        }
        models::validate_family_params(self.family, &self.true_params.theta, self.true_params.psi, self.n)?;
        if self.estimators.is_empty() {
            return Err(Error::DataShape("no estimators requested".into()));
        }
        if self.estimators.len() > MAX_ESTIMATORS {
            return Err(Error::DataShape(format!(
                "at most {MAX_ESTIMATORS} estimators per experiment"
            )));
        }
        for (i, a) in self.estimators.iter().enumerate() {
            for b in &self.estimators[..i] {
                if a.label() == b.label() {
                    return Err(Error::DataShape(format!(
                        "estimator {} requested twice",
                        a.label()
                    )));
                }
            }
            if matches!(a, EstimatorSelection::Mle | EstimatorSelection::Mumle)
                && !self.family.has_closed_forms()
            {
                return Err(Error::Unsupported(format!(
                    "family {} has no closed-form {}",
                    self.family,
                    a.label()
                )));
            }
        }
        Ok(())
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            family: self.family,
            theta: self.true_params.theta.clone(),
            psi: self.true_params.psi,
            n: self.n,
            m: self.m,
            replicates: self.replicates,
            seed: self.seed,
            estimators: self.estimators.iter().map(|e| e.describe()).collect(),
        }
    }
}

/// Serializable restatement of the config an experiment actually ran with.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub family: Family,
    pub theta: Vec<f64>,
    pub psi: f64,
    pub n: usize,
    pub m: Option<usize>,
    pub replicates: u64,
    pub seed: u64,
    pub estimators: Vec<String>,
}

/// Moment summary for one estimator over the successful replicates.
///
/// Standard errors are absent (not zero) when they are undefined, i.e. with
/// a single successful replicate. `mse` is the mean of squared errors
/// against the true `psi`, computed directly rather than as `bias² + var`.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorStats {
    pub estimator: String,
    pub mean: f64,
    pub bias: f64,
    pub bias_se: Option<f64>,
    pub variance: Option<f64>,
    pub variance_se: Option<f64>,
    pub mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub stats: Vec<EstimatorStats>,
    pub replicate_failures: u64,
    pub config: ConfigEcho,
}

#[derive(Clone, Copy)]
struct ReplicateRow {
    values: [f64; MAX_ESTIMATORS],
    failed: bool,
}

fn run_replicate(config: &ExperimentConfig, rep: u64) -> ReplicateRow {
    let mut row = ReplicateRow { values: [f64::NAN; MAX_ESTIMATORS], failed: false };
    let mut rng = replicate_rng(config.seed, rep);
    let data = match sample(config.family, &config.true_params, config.n, config.m, &mut rng) {
        Ok(d) => d,
        Err(_) => {
            row.failed = true;
            return row;
        }
    };
    for (j, sel) in config.estimators.iter().enumerate() {
        match sel.evaluate(&data) {
            Ok(v) if v.is_finite() => row.values[j] = v,
            _ => {
                row.failed = true;
                return row;
            }
        }
    }
    row
}

/// Runs the experiment. Deterministic for a fixed `(seed, config)`; a
/// replicate that fails to produce every requested estimate is excluded
/// from all summaries and counted. More than 1% failures aborts the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let rows: Vec<ReplicateRow> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| run_replicate(config, rep))
        .collect();

    let failures = rows.iter().filter(|r| r.failed).count() as u64;
    if failures as f64 > 0.01 * config.replicates as f64 {
        return Err(Error::ExperimentIntegrity(format!(
            "{failures} of {} replicates failed (more than 1%)",
            config.replicates
        )));
    }
    if failures == config.replicates {
        return Err(Error::ExperimentIntegrity("every replicate failed".into()));
    }

    let psi_true = config.true_params.psi;
    let mut stats = Vec::with_capacity(config.estimators.len());
    for (j, sel) in config.estimators.iter().enumerate() {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| !r.failed)
            .map(|r| r.values[j])
            .collect();
        let moments = central_moments(&values);
        let mse = compensated_sum(values.iter().map(|v| (v - psi_true).powi(2)))
            / values.len() as f64;
        stats.push(EstimatorStats {
            estimator: sel.label().to_string(),
            mean: moments.mean,
            bias: moments.mean - psi_true,
            bias_se: moments.mean_se(),
            variance: moments.sample_variance(),
            variance_se: moments.variance_se(),
            mse,
        });
    }

    Ok(ExperimentResult { stats, replicate_failures: failures, config: config.echo() })
}

/// A strict-dominance claim: `winner` has both smaller |bias| and smaller
/// variance than `loser`.
#[derive(Debug, Clone, Serialize)]
pub struct Dominance {
    pub winner: String,
    pub loser: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    /// Estimator labels ordered by |bias|, smallest first.
    pub by_abs_bias: Vec<String>,
    /// Estimator labels ordered by MSE, smallest first.
    pub by_mse: Vec<String>,
    pub dominances: Vec<Dominance>,
}

pub fn compare_estimators(result: &ExperimentResult) -> ComparisonSummary {
    let mut by_abs_bias: Vec<&EstimatorStats> = result.stats.iter().collect();
    by_abs_bias.sort_by(|a, b| a.bias.abs().total_cmp(&b.bias.abs()));
    let mut by_mse: Vec<&EstimatorStats> = result.stats.iter().collect();
    by_mse.sort_by(|a, b| a.mse.total_cmp(&b.mse));

    let mut dominances = Vec::new();
    for w in &result.stats {
        for l in &result.stats {
            if w.estimator == l.estimator {
                continue;
            }
            if let (Some(vw), Some(vl)) = (w.variance, l.variance) {
                if w.bias.abs() < l.bias.abs() && vw < vl {
                    dominances.push(Dominance {
                        winner: w.estimator.clone(),
                        loser: l.estimator.clone(),
                    });
                }
            }
        }
    }

    ComparisonSummary {
        by_abs_bias: by_abs_bias.iter().map(|s| s.estimator.clone()).collect(),
        by_mse: by_mse.iter().map(|s| s.estimator.clone()).collect(),
        dominances,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_cdf_helpers_frozen_points() {
        assert_eq!(pareto_rate_from_uniform(0.25, 1.0, 2.0), 2.0);
        assert_relative_eq!(
            shifted_exponential_from_uniform((-1.0_f64).exp(), 3.0, 2.0),
            5.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(pareto_scale_from_uniform(0.25, 1.0, 0.5), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn shifted_exponential_sample_mean_matches_moment() {
        let mut rng = replicate_rng(11, 0);
        let params = ParameterPoint::scalar(0.0, 1.0);
        let total = 1_000_000;
        let data = sample(Family::ShiftedExponential, &params, total, None, &mut rng).unwrap();
        let sum: f64 = match data.layout() {
            crate::models::DataLayout::Flat(obs) => obs.iter().sum(),
            _ => unreachable!(),
        };
        let mean = sum / total as f64;
        // E X = theta + psi = 1, sd = psi; 4 standard errors
        assert!((mean - 1.0).abs() < 4.0 / (total as f64).sqrt());
    }

    #[test]
    fn replicate_streams_are_independent_of_order() {
        let a: Vec<f64> = {
            let mut r = replicate_rng(7, 3);
            (0..4).map(|_| r.sample(OpenClosed01)).collect()
        };
        let b: Vec<f64> = {
            let mut r0 = replicate_rng(7, 0);
            let _ = r0.sample::<f64, _>(OpenClosed01);
            let mut r = replicate_rng(7, 3);
            (0..4).map(|_| r.sample(OpenClosed01)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn experiment_is_bitwise_identical_across_worker_counts() {
        let config = ExperimentConfig {
            family: Family::ParetoRate,
            true_params: ParameterPoint::scalar(1.0, 1.0),
            n: 8,
            m: None,
            replicates: 4000,
            seed: 99,
            estimators: vec![EstimatorSelection::Mle, EstimatorSelection::Mumle],
        };
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let r1 = single.install(|| run_experiment(&config)).unwrap();
        let r8 = many.install(|| run_experiment(&config)).unwrap();
        for (a, b) in r1.stats.iter().zip(&r8.stats) {
            assert_eq!(a.mean.to_bits(), b.mean.to_bits());
            assert_eq!(a.bias.to_bits(), b.bias.to_bits());
            assert_eq!(a.variance.unwrap().to_bits(), b.variance.unwrap().to_bits());
            assert_eq!(a.mse.to_bits(), b.mse.to_bits());
        }
    }

    #[test]
    fn mse_decomposes_into_bias_and_variance() {
        let config = ExperimentConfig {
            family: Family::NormalMeanVar,
            true_params: ParameterPoint::scalar(0.0, 2.0),
            n: 6,
            m: None,
            replicates: 5000,
            seed: 5,
            estimators: vec![EstimatorSelection::Mle],
        };
        let result = run_experiment(&config).unwrap();
        let s = &result.stats[0];
        let r = (config.replicates - result.replicate_failures) as f64;
        let expected = s.bias * s.bias + s.variance.unwrap() * (r - 1.0) / r;
        assert_relative_eq!(s.mse, expected, max_relative = 1e-12);
    }

    #[test]
    fn single_replicate_reports_no_standard_errors() {
        let config = ExperimentConfig {
            family: Family::NormalMeanVar,
            true_params: ParameterPoint::scalar(0.0, 1.0),
            n: 5,
            m: None,
            replicates: 1,
            seed: 1,
            estimators: vec![EstimatorSelection::Mle],
        };
        let result = run_experiment(&config).unwrap();
        let s = &result.stats[0];
        assert!(s.bias_se.is_none());
        assert!(s.variance.is_none());
        assert!(s.variance_se.is_none());
        assert!(s.mse.is_finite());
    }

    #[test]
    fn config_validation_rejects_bad_requests() {
        let base = ExperimentConfig {
            family: Family::NormalMeanVar,
            true_params: ParameterPoint::scalar(0.0, 1.0),
            n: 5,
            m: None,
            replicates: 10,
            seed: 1,
            estimators: vec![EstimatorSelection::Mle],
        };
        let mut c = base.clone();
        c.replicates = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.estimators = vec![];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.estimators = vec![EstimatorSelection::Mle, EstimatorSelection::Mle];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.family = Family::GammaTwoParam;
        c.true_params = ParameterPoint::scalar(2.0, 3.0);
        assert!(matches!(c.validate(), Err(Error::Unsupported(_))));
        let mut c = base;
        c.family = Family::NeymanScott;
        assert!(c.validate().is_err()); // no m, wrong theta length
    }

    #[test]
    fn neyman_scott_sampling_respects_group_shape() {
        let mut rng = replicate_rng(3, 0);
        let params = ParameterPoint::new(vec![0.0; 4], 1.0);
        let data = sample(Family::NeymanScott, &params, 4, Some(3), &mut rng).unwrap();
        assert_eq!(data.n(), 4);
        assert_eq!(data.group_size(), Some(3));
    }
}
