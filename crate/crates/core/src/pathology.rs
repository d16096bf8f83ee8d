//! Score-based diagnostics. The central fact being checked: the mean of
//! the psi-score vanishes at the true parameters, but plugging the
//! nuisance estimate into the same score shifts its mean away from zero,
//! which is exactly the mechanism behind the plug-in estimate's bias.
//! Alongside the Monte Carlo checks, a catalogue of closed-form bias and
//! variance values for the families where the estimators have exact
//! sampling moments.

use crate::accum::central_moments;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::models::{self, Family, ParameterPoint};
use crate::montecarlo::{replicate_rng, sample};
use rayon::prelude::*;
use serde::Serialize;

/// Monte Carlo checks refuse to run below this replicate count; the 4
/// standard error decision rule is only trustworthy with the standard
/// error itself pinned down.
pub const MIN_CHECK_REPLICATES: u64 = 10_000;

/// Exact sampling moments of an estimator, from the catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasVariance {
    pub bias: f64,
    pub variance: f64,
}

/// A Monte Carlo estimate of a score mean with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScoreMoment {
    pub mean: f64,
    pub se: f64,
}

/// Outcome of the regularity / plug-in diagnostics. `mean_score_at_theta_hat`
/// is absent when only the regularity side was evaluated, and
/// `pathology_detected` is false in that case by construction.
#[derive(Debug, Clone, Serialize)]
pub struct PathologyReport {
    pub mean_score_at_true_theta: ScoreMoment,
    pub mean_score_at_theta_hat: Option<ScoreMoment>,
    pub regularity_pass: bool,
    pub pathology_detected: bool,
    pub replicates: u64,
}

/// Closed-form bias and variance of the catalogued estimators under the
/// true parameter `psi`, for samples of `n` observations (`n` groups of
/// `m` for the grouped family).
///
/// The heavy-tail rate family needs `n ≥ 3` for the bias (first inverse
/// moment of Y) and `n ≥ 4` for the variance (second inverse moment);
/// below those the request is a domain error naming the missing moment.
pub fn analytic_bias_variance(
    family: Family,
    estimator: EstimatorKind,
    n: usize,
    m: Option<usize>,
    psi: f64,
) -> Result<BiasVariance> {
    if !(psi > 0.0) || !psi.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "psi must be a positive finite real, got {psi}"
        )));
    }
    if !matches!(estimator, EstimatorKind::Mle | EstimatorKind::Mumle) {
        return Err(Error::Unsupported(format!(
            "no catalogued moments for estimator {estimator}"
        )));
    }
    let mle = estimator == EstimatorKind::Mle;
    let nf = n as f64;
    match family {
        Family::NeymanScott => {
            let m = m.ok_or_else(|| Error::DataShape("grouped family needs m".into()))?;
            if m < 2 || n < 1 {
                return Err(Error::DataShape(format!(
                    "need n ≥ 1 groups of m ≥ 2, got n={n}, m={m}"
                )));
            }
            let mf = m as f64;
            Ok(if mle {
                BiasVariance {
                    bias: -psi / mf,
                    variance: 2.0 * (mf - 1.0) * psi * psi / (nf * mf * mf),
                }
            } else {
                BiasVariance { bias: 0.0, variance: 2.0 * psi * psi / (nf * (mf - 1.0)) }
            })
        }
        _ if n < 2 => Err(Error::DataShape(format!(
            "catalogued moments need n ≥ 2, got {n}"
        ))),
        Family::NormalMeanVar => Ok(if mle {
            BiasVariance {
                bias: -psi / nf,
                variance: 2.0 * (nf - 1.0) * psi * psi / (nf * nf),
            }
        } else {
            BiasVariance { bias: 0.0, variance: 2.0 * psi * psi / (nf - 1.0) }
        }),
        Family::ShiftedExponential | Family::ParetoScaleParam => Ok(if mle {
            BiasVariance {
                bias: -psi / nf,
                variance: (nf - 1.0) * psi * psi / (nf * nf),
            }
        } else {
            BiasVariance { bias: 0.0, variance: psi * psi / (nf - 1.0) }
        }),
        Family::ParetoRate => {
            if n < 3 {
                return Err(Error::ParameterDomain(format!(
                    "the first inverse moment of Y is undefined for n = {n} < 3"
                )));
            }
            if n < 4 {
                return Err(Error::ParameterDomain(format!(
                    "the second inverse moment of Y is undefined for n = {n} < 4"
                )));
            }
            let d = (nf - 2.0) * (nf - 2.0) * (nf - 3.0);
            Ok(if mle {
                BiasVariance {
                    bias: 2.0 * psi / (nf - 2.0),
                    variance: nf * nf * psi * psi / d,
                }
            } else {
                BiasVariance {
                    bias: psi / (nf - 2.0),
                    variance: (nf - 1.0) * (nf - 1.0) * psi * psi / d,
                }
            })
        }
        Family::GammaTwoParam => Err(Error::Unsupported(
            "no catalogued moments for the two-parameter family".into(),
        )),
    }
}

fn score_moment(values: &[f64]) -> Result<ScoreMoment> {
    let moments = central_moments(values);
    let se = moments
        .mean_se()
        .filter(|se| *se > 0.0)
        .ok_or_else(|| Error::ExperimentIntegrity("degenerate score sample".into()))?;
    Ok(ScoreMoment { mean: moments.mean, se })
}

fn run_score_checks(
    family: Family,
    params: &ParameterPoint,
    n: usize,
    m: Option<usize>,
    replicates: u64,
    seed: u64,
    at_theta_hat: bool,
) -> Result<PathologyReport> {
    if replicates < MIN_CHECK_REPLICATES {
        return Err(Error::DataShape(format!(
            "need at least {MIN_CHECK_REPLICATES} replicates, got {replicates}"
        )));
    }
    if at_theta_hat && family == Family::GammaTwoParam {
        return Err(Error::Unsupported(
            "no closed-form nuisance estimate for the two-parameter family".into(),
        ));
    }
    models::validate_family_params(family, &params.theta, params.psi, n)?;

    let rows: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let data = match sample(family, params, n, m, &mut rng) {
                Ok(d) => d,
                Err(_) => return (f64::NAN, f64::NAN),
            };
            let at_true = models::psi_score(&data, params).unwrap_or(f64::NAN);
            let at_hat = if at_theta_hat {
                models::nuisance_mle(&data)
                    .and_then(|theta| {
                        models::psi_score(&data, &ParameterPoint::new(theta, params.psi))
                    })
                    .unwrap_or(f64::NAN)
            } else {
                0.0
            };
            (at_true, at_hat)
        })
        .collect();

    let ok = |row: &&(f64, f64)| row.0.is_finite() && row.1.is_finite();
    let failures = replicates - rows.iter().filter(ok).count() as u64;
    if failures as f64 > 0.01 * replicates as f64 {
        return Err(Error::ExperimentIntegrity(format!(
            "{failures} of {replicates} replicates failed (more than 1%)"
        )));
    }

    let true_scores: Vec<f64> = rows.iter().filter(ok).map(|r| r.0).collect();
    let true_side = score_moment(&true_scores)?;
    let regularity_pass = true_side.mean.abs() <= 4.0 * true_side.se;

    let (hat_side, pathology_detected) = if at_theta_hat {
        let hat_scores: Vec<f64> = rows.iter().filter(ok).map(|r| r.1).collect();
        let moment = score_moment(&hat_scores)?;
        let detected = moment.mean.abs() > 4.0 * moment.se;
        (Some(moment), detected)
    } else {
        (None, false)
    };

    Ok(PathologyReport {
        mean_score_at_true_theta: true_side,
        mean_score_at_theta_hat: hat_side,
        regularity_pass,
        pathology_detected,
        replicates,
    })
}

/// Monte Carlo mean of the psi-score at the true parameter point. The
/// check passes when the mean is within 4 standard errors of zero.
pub fn check_regularity(
    family: Family,
    params: &ParameterPoint,
    n: usize,
    m: Option<usize>,
    replicates: u64,
    seed: u64,
) -> Result<PathologyReport> {
    run_score_checks(family, params, n, m, replicates, seed, false)
}

/// Monte Carlo mean of the psi-score with the nuisance estimate plugged
/// in, sharing draws with the true-parameter mean. The plug-in pathology
/// is flagged when that mean sits more than 4 standard errors from zero.
pub fn check_pathology(
    family: Family,
    params: &ParameterPoint,
    n: usize,
    m: Option<usize>,
    replicates: u64,
    seed: u64,
) -> Result<PathologyReport> {
    run_score_checks(family, params, n, m, replicates, seed, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn heavy_tail_catalogue_values() {
        let mle =
            analytic_bias_variance(Family::ParetoRate, EstimatorKind::Mle, 10, None, 2.0).unwrap();
        assert_relative_eq!(mle.bias, 0.5, max_relative = 1e-14);
        assert_relative_eq!(mle.variance, 400.0 / 448.0, max_relative = 1e-14);

        let mumle =
            analytic_bias_variance(Family::ParetoRate, EstimatorKind::Mumle, 10, None, 2.0)
                .unwrap();
        assert_relative_eq!(mumle.bias, 0.25, max_relative = 1e-14);
        assert_relative_eq!(mumle.variance, 324.0 / 448.0, max_relative = 1e-14);
    }

    #[test]
    fn the_updated_estimate_is_exactly_unbiased_where_catalogued() {
        for (family, m) in [
            (Family::NormalMeanVar, None),
            (Family::NeymanScott, Some(4)),
            (Family::ShiftedExponential, None),
            (Family::ParetoScaleParam, None),
        ] {
            let bv = analytic_bias_variance(family, EstimatorKind::Mumle, 12, m, 1.7).unwrap();
            assert_eq!(bv.bias, 0.0);
            assert!(bv.variance > 0.0);
        }
    }

    #[test]
    fn heavy_tail_improvement_is_an_exact_ratio() {
        for n in [4usize, 5, 10, 20, 100] {
            let psi = 2.5;
            let mle =
                analytic_bias_variance(Family::ParetoRate, EstimatorKind::Mle, n, None, psi)
                    .unwrap();
            let mumle =
                analytic_bias_variance(Family::ParetoRate, EstimatorKind::Mumle, n, None, psi)
                    .unwrap();
            assert_eq!(mumle.bias, 0.5 * mle.bias);
            let nf = n as f64;
            assert_relative_eq!(
                mumle.variance / mle.variance,
                (nf - 1.0) * (nf - 1.0) / (nf * nf),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn moment_thresholds_are_named() {
        let err = analytic_bias_variance(Family::ParetoRate, EstimatorKind::Mle, 3, None, 1.0)
            .unwrap_err();
        match err {
            Error::ParameterDomain(msg) => assert!(msg.contains("second inverse moment")),
            other => panic!("unexpected error {other:?}"),
        }
        let err = analytic_bias_variance(Family::ParetoRate, EstimatorKind::Mle, 2, None, 1.0)
            .unwrap_err();
        match err {
            Error::ParameterDomain(msg) => assert!(msg.contains("first inverse moment")),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(analytic_bias_variance(
            Family::GammaTwoParam,
            EstimatorKind::Mle,
            10,
            None,
            1.0
        )
        .is_err());
        assert!(analytic_bias_variance(
            Family::NormalMeanVar,
            EstimatorKind::Mml87,
            10,
            None,
            1.0
        )
        .is_err());
    }

    #[test]
    fn plug_in_score_mean_sits_near_its_exact_value() {
        // E U(x, theta_hat, psi) = −1/(2 psi) for the normal family
        let report = check_pathology(
            Family::NormalMeanVar,
            &ParameterPoint::scalar(0.0, 1.0),
            10,
            None,
            MIN_CHECK_REPLICATES,
            31,
        )
        .unwrap();
        assert!(report.regularity_pass);
        assert!(report.pathology_detected);
        let hat = report.mean_score_at_theta_hat.unwrap();
        assert!(hat.mean < 0.0);
        assert!((hat.mean + 0.5).abs() < 5.0 * hat.se);
    }

    #[test]
    fn known_nuisance_scores_stay_regular() {
        let report = check_regularity(
            Family::ParetoRate,
            &ParameterPoint::scalar(1.0, 2.0),
            10,
            None,
            MIN_CHECK_REPLICATES,
            17,
        )
        .unwrap();
        assert!(report.regularity_pass);
        assert!(report.mean_score_at_theta_hat.is_none());
        assert!(!report.pathology_detected);

        let report = check_regularity(
            Family::GammaTwoParam,
            &ParameterPoint::scalar(2.0, 3.0),
            10,
            None,
            MIN_CHECK_REPLICATES,
            19,
        )
        .unwrap();
        assert!(report.regularity_pass);
    }

    #[test]
    fn replicate_floor_and_unsupported_family_are_rejected() {
        let err = check_regularity(
            Family::NormalMeanVar,
            &ParameterPoint::scalar(0.0, 1.0),
            10,
            None,
            100,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DataShape(_)));

        let err = check_pathology(
            Family::GammaTwoParam,
            &ParameterPoint::scalar(2.0, 3.0),
            10,
            None,
            MIN_CHECK_REPLICATES,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }
}
