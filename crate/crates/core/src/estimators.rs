//! Estimation machinery shared by every family: a deterministic 1-D root
//! solver for score equations, penalized-likelihood estimates (a prior term
//! plus a half-log-information penalty), the information-prior corrected
//! estimate, and Fisher information determinants in closed form or by
//! seeded finite differences.

use crate::accum::compensated_sum;
use crate::error::{Error, Result};
use crate::models::{self, DataLayout, DataSet, Family, ParameterPoint, LN_2PI};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
use statrs::function::gamma::{gamma_lr, ln_gamma};
use std::fmt;
use std::sync::Arc;

/// Root tolerance for the penalized score equations.
const PENALIZED_ROOT_TOL: f64 = 1e-12;
/// Width tolerance for the derivative-free search route.
const SEARCH_TOL: f64 = 1e-12;
/// Draw count for a standalone finite-difference information estimate.
const DEFAULT_INFO_DRAWS: usize = 1 << 16;
/// Cheaper draw count used inside the penalized objective, where the
/// penalty term only needs a few correct digits.
const OBJECTIVE_INFO_DRAWS: usize = 8192;
/// Fixed seed for information estimates embedded in objectives, so the
/// objective stays a deterministic, smooth function of psi.
const OBJECTIVE_INFO_SEED: u64 = 0x1f05eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Mle,
    Mumle,
    Mml87,
    Firth,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::Mumle => "mumle",
            EstimatorKind::Mml87 => "mml87",
            EstimatorKind::Firth => "firth",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Prior weight for the penalized objective, as a log density over
/// `(theta, psi)` up to an additive constant. The information prior makes
/// the penalized objective `log f + ½ log |I|`.
#[derive(Clone)]
pub enum PriorSpec {
    Flat,
    /// `h(psi) ∝ psi^e` for the given exponent `e`.
    PsiPowerLaw(f64),
    /// `h ∝ |I(theta, psi)|`.
    FirthInformation,
    /// Arbitrary log-prior `(theta, psi) → log h`; must be finite on the
    /// interior of the parameter domain.
    Custom(Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>),
}

impl PriorSpec {
    pub fn describe(&self) -> String {
        match self {
            PriorSpec::Flat => "flat".into(),
            PriorSpec::PsiPowerLaw(e) => format!("psi^{e}"),
            PriorSpec::FirthInformation => "firth-information".into(),
            PriorSpec::Custom(_) => "custom".into(),
        }
    }
}

impl fmt::Debug for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Custom(_) => f.write_str("PriorSpec::Custom(..)"),
            other => write!(f, "PriorSpec::{}", other.describe()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub value: f64,
    pub iterations: u32,
    /// True only when the solver met its declared tolerance; estimates
    /// that fail to converge are reported as errors, never as values.
    pub converged: bool,
    pub objective_at_solution: f64,
}

/// Finds the root of a continuous scalar score on `(0, ∞)`. A sign change
/// is located by doubling/halving away from `bracket_hint` (up to 60 steps
/// each way), then bisected until the bracket width is at most
/// `tol·(1+|psi|)` and `|score| ≤ tol`.
pub fn solve_score_root<F: Fn(f64) -> f64>(score: F, bracket_hint: f64, tol: f64) -> Result<f64> {
    solve_score_root_detailed(&score, bracket_hint, tol).map(|(value, _)| value)
}

fn solve_score_root_detailed<F: Fn(f64) -> f64>(
    score: &F,
    bracket_hint: f64,
    tol: f64,
) -> Result<(f64, u32)> {
    if !(bracket_hint > 0.0) || !bracket_hint.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "bracket hint must be a positive finite real, got {bracket_hint}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::ParameterDomain("tolerance must be positive".into()));
    }
    let mut evals: u32 = 0;
    let mut eval = |x: f64| -> Result<f64> {
        evals += 1;
        let v = score(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("score({x}) is not finite")))
        }
    };

    let f0 = eval(bracket_hint)?;
    if f0 == 0.0 {
        return Ok((bracket_hint, evals));
    }

    let mut bracket: Option<(f64, f64, f64)> = None;
    let mut prev = bracket_hint;
    let mut fprev = f0;
    for _ in 0..60 {
        let cur = prev * 2.0;
        let fc = eval(cur)?;
        if fc == 0.0 {
            return Ok((cur, evals));
        }
        if fprev.signum() != fc.signum() {
            bracket = Some((prev, cur, fprev));
            break;
        }
        prev = cur;
        fprev = fc;
    }
    if bracket.is_none() {
        let mut prev = bracket_hint;
        let mut fprev = f0;
        for _ in 0..60 {
            let cur = prev * 0.5;
            let fc = eval(cur)?;
            if fc == 0.0 {
                return Ok((cur, evals));
            }
            if fprev.signum() != fc.signum() {
                bracket = Some((cur, prev, fc));
                break;
            }
            prev = cur;
            fprev = fc;
        }
    }
    let (mut lo, mut hi, mut flo) = bracket.ok_or_else(|| {
        Error::Bracketing(format!(
            "no sign change within a factor of 2^60 of the hint {bracket_hint}"
        ))
    })?;

    for _ in 0..256 {
        let mid = 0.5 * (lo + hi);
        let fm = eval(mid)?;
        if fm == 0.0 {
            return Ok((mid, evals));
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo) <= tol * (1.0 + mid.abs()) && fm.abs() <= tol {
            return Ok((mid, evals));
        }
    }
    Err(Error::Convergence(format!(
        "bisection stalled on [{lo}, {hi}] without driving the score below {tol}"
    )))
}

/// Maximizes a scalar function over `(0, ∞)` by golden-section search after
/// geometric bracketing from `hint`. Returns the maximizer and the number
/// of objective evaluations. Deterministic.
pub fn maximize_scalar<F: Fn(f64) -> f64>(objective: F, hint: f64, tol: f64) -> Result<(f64, u32)> {
    golden_max(
        &|x| {
            let v = objective(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("objective({x}) is not finite")))
            }
        },
        hint,
        tol,
    )
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: &F, hint: f64, tol: f64) -> Result<(f64, u32)> {
    if !(hint > 0.0) || !hint.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "search hint must be a positive finite real, got {hint}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::ParameterDomain("tolerance must be positive".into()));
    }
    let mut evals: u32 = 0;
    let mut eval = |x: f64| -> Result<f64> {
        evals += 1;
        f(x)
    };

    let mut a = hint * 0.5;
    let mut b = hint;
    let mut c = hint * 2.0;
    let mut fa = eval(a)?;
    let mut fb = eval(b)?;
    let mut fc = eval(c)?;
    let mut bracketed = fb >= fa && fb >= fc;
    for _ in 0..60 {
        if bracketed {
            break;
        }
        if fa > fb {
            c = b;
            fc = fb;
            b = a;
            fb = fa;
            a *= 0.5;
            fa = eval(a)?;
        } else {
            a = b;
            fa = fb;
            b = c;
            fb = fc;
            c *= 2.0;
            fc = eval(c)?;
        }
        bracketed = fb >= fa && fb >= fc;
    }
    if !bracketed {
        return Err(Error::Bracketing(
            "no interior maximum within a factor of 2^60 of the hint".into(),
        ));
    }

    const INVPHI: f64 = 0.618_033_988_749_894_9;
    const INVPHI2: f64 = 1.0 - INVPHI;
    let mut lo = a;
    let mut hi = c;
    let mut x1 = lo + INVPHI2 * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..300 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + INVPHI2 * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = eval(x2)?;
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * (1.0 + mid.abs()) {
            return Ok((mid, evals));
        }
    }
    Err(Error::Convergence(
        "golden-section search did not reach its width tolerance".into(),
    ))
}

/// Sample dimensions for information computations that take counts rather
/// than data: `n` observations, or `n` groups of `m` for the grouped family.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleShape {
    pub n: usize,
    pub m: Option<usize>,
}

impl SampleShape {
    pub fn flat(n: usize) -> Self {
        SampleShape { n, m: None }
    }

    pub fn grouped(n: usize, m: usize) -> Self {
        SampleShape { n, m: Some(m) }
    }

    pub fn of(data: &DataSet) -> Self {
        SampleShape { n: data.n(), m: data.group_size() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InfoSource {
    ClosedForm,
    FiniteDifference,
}

/// Determinant of the Fisher information for the full parameter vector.
///
/// `log_determinant` is authoritative: for the grouped family the
/// determinant grows like `m^(n+1)` and overflows `f64` near n ≈ 1000
/// while its logarithm stays representable.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FisherInfo {
    pub determinant: f64,
    pub log_determinant: f64,
    pub source: InfoSource,
}

fn log_info_det_closed(family: Family, n: f64, m: Option<f64>, psi: f64) -> Option<f64> {
    match family {
        Family::NormalMeanVar => Some((2.0 * n * n).ln() - 2.0 * psi.ln()),
        Family::NeymanScott => {
            let m = m?;
            Some((2.0 * n).ln() + (n + 1.0) * (m.ln() - psi.ln()))
        }
        Family::ShiftedExponential | Family::ParetoRate | Family::ParetoScaleParam => {
            Some(n.ln() - 2.0 * psi.ln())
        }
        Family::GammaTwoParam => None,
    }
}

/// `d log|I| / d psi` for the families with closed-form determinants; the
/// determinant is `const · psi^(-2)` everywhere except the grouped family,
/// where the power is `-(n+1)`.
fn info_log_slope(family: Family, n: f64, psi: f64) -> f64 {
    match family {
        Family::NeymanScott => -(n + 1.0) / psi,
        _ => -2.0 / psi,
    }
}

/// Fisher information determinant at `params` for a sample of the given
/// shape: closed form for the five analytic families, seeded
/// finite-difference estimate for the two-parameter Gamma family. The seed
/// only matters on the finite-difference path.
pub fn fisher_information_determinant(
    family: Family,
    shape: SampleShape,
    params: &ParameterPoint,
    seed: u64,
) -> Result<FisherInfo> {
    if shape.n == 0 {
        return Err(Error::DataShape("need at least one observation".into()));
    }
    models::validate_family_params(family, &params.theta, params.psi, shape.n)?;
    if family == Family::GammaTwoParam {
        return fisher_information_fd(family, shape, params, DEFAULT_INFO_DRAWS, seed);
    }
    let n = shape.n as f64;
    let m = match family {
        Family::NeymanScott => {
            let m = shape
                .m
                .ok_or_else(|| Error::DataShape("grouped family needs a group size m".into()))?;
            if m < 2 {
                return Err(Error::DataShape(format!(
                    "group size m must be at least 2, got {m}"
                )));
            }
            Some(m as f64)
        }
        _ => None,
    };
    let log_determinant =
        log_info_det_closed(family, n, m, params.psi).expect("analytic family has a closed form");
    if !log_determinant.is_finite() {
        return Err(Error::SingularInformation(format!(
            "log-determinant {log_determinant} at psi={}",
            params.psi
        )));
    }
    Ok(FisherInfo {
        determinant: log_determinant.exp(),
        log_determinant,
        source: InfoSource::ClosedForm,
    })
}

/// Stratified uniforms with a seeded jitter confined to the middle of each
/// stratum; the confinement bounds any single stratum's influence on the
/// moment estimates, which keeps tail strata from dominating the error.
fn stratified_uniforms(draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / draws as f64;
    (0..draws)
        .map(|j| {
            let jitter: f64 = 0.3 + 0.4 * rng.gen::<f64>();
            ((j as f64 + jitter) * scale).clamp(1e-12, 1.0 - 1e-12)
        })
        .collect()
}

/// Quantile of the unit-scale Gamma(shape) distribution by bracketed
/// Newton iteration on the regularized incomplete gamma function.
fn gamma_quantile(shape: f64, u: f64) -> f64 {
    let ln_g = ln_gamma(shape);
    // Wilson-Hilferty start, with a small-quantile fallback from the
    // leading term of the CDF near zero.
    let z = StdNormal::new(0.0, 1.0).unwrap().inverse_cdf(u);
    let c = 1.0 / (9.0 * shape);
    let mut x = shape * (1.0 - c + z * c.sqrt()).powi(3);
    if !(x > 0.0) || !x.is_finite() || shape < 1.0 {
        x = ((u.ln() + shape.ln() + ln_g) / shape).exp();
        if !(x > 0.0) || !x.is_finite() {
            x = shape;
        }
    }
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for _ in 0..64 {
        let p = gamma_lr(shape, x);
        if p > u {
            hi = x;
        } else {
            lo = x;
        }
        let pdf = ((shape - 1.0) * x.ln() - x - ln_g).exp();
        let mut next = if pdf > 0.0 { x - (p - u) / pdf } else { f64::NAN };
        if !next.is_finite() || next <= lo || next >= hi {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { x * 2.0 };
        }
        if (next - x).abs() <= 1e-13 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

fn hessian_det(g: impl Fn(f64, f64) -> f64, p: f64, q: f64, hp: f64, hq: f64, n: f64) -> f64 {
    let g0 = g(p, q);
    let gpp = (g(p + hp, q) - 2.0 * g0 + g(p - hp, q)) / (hp * hp);
    let gqq = (g(p, q + hq) - 2.0 * g0 + g(p, q - hq)) / (hq * hq);
    let gpq = (g(p + hp, q + hq) - g(p + hp, q - hq) - g(p - hp, q + hq) + g(p - hp, q - hq))
        / (4.0 * hp * hq);
    let ipp = -n * gpp;
    let iqq = -n * gqq;
    let ipq = -n * gpq;
    ipp * iqq - ipq * ipq
}

/// Finite-difference information determinant: the expected log-likelihood
/// is estimated once from stratified quantile draws at `params`, reduced to
/// its sufficient statistics, and a central-difference Hessian is taken in
/// the parameters (common random numbers across stencil points). Available
/// for the normal family, differentiated in `(mean, standard deviation)`
/// to match the closed form, and for the Gamma family in `(scale, shape)`.
pub fn fisher_information_fd(
    family: Family,
    shape: SampleShape,
    params: &ParameterPoint,
    draws: usize,
    seed: u64,
) -> Result<FisherInfo> {
    if shape.n == 0 {
        return Err(Error::DataShape("need at least one observation".into()));
    }
    if draws < 16 {
        return Err(Error::DataShape("need at least 16 draws".into()));
    }
    models::validate_family_params(family, &params.theta, params.psi, shape.n)?;
    let n = shape.n as f64;
    let us = stratified_uniforms(draws, seed);
    let det = match family {
        Family::NormalMeanVar => {
            let mu = params.theta[0];
            let sigma = params.psi.sqrt();
            let normal = StdNormal::new(0.0, 1.0).unwrap();
            let xs: Vec<f64> = us.iter().map(|&u| mu + sigma * normal.inverse_cdf(u)).collect();
            let s1 = compensated_sum(xs.iter().copied()) / draws as f64;
            let s2 = compensated_sum(xs.iter().map(|x| x * x)) / draws as f64;
            let g = |m: f64, s: f64| {
                -0.5 * LN_2PI - s.ln() - (s2 - 2.0 * m * s1 + m * m) / (2.0 * s * s)
            };
            let hm = 1e-4 * (1.0 + mu.abs());
            let hs = (1e-4 * (1.0 + sigma)).min(0.5 * sigma);
            hessian_det(g, mu, sigma, hm, hs, n)
        }
        Family::GammaTwoParam => {
            let scale = params.theta[0];
            let a = params.psi;
            let xs: Vec<f64> = us.iter().map(|&u| scale * gamma_quantile(a, u)).collect();
            let t1 = compensated_sum(xs.iter().copied()) / draws as f64;
            let t2 = compensated_sum(xs.iter().map(|x| x.ln())) / draws as f64;
            let g = |s: f64, aa: f64| (aa - 1.0) * t2 - t1 / s - aa * s.ln() - ln_gamma(aa);
            let hs = (1e-4 * (1.0 + scale)).min(0.5 * scale);
            let ha = (1e-4 * (1.0 + a)).min(0.5 * a);
            hessian_det(g, scale, a, hs, ha, n)
        }
        other => {
            return Err(Error::Unsupported(format!(
                "no finite-difference information for family {other}"
            )))
        }
    };
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::SingularInformation(format!(
            "estimated information determinant {det} at psi={}",
            params.psi
        )));
    }
    Ok(FisherInfo {
        determinant: det,
        log_determinant: det.ln(),
        source: InfoSource::FiniteDifference,
    })
}

fn flat_obs(data: &DataSet) -> &[f64] {
    match data.layout() {
        DataLayout::Flat(obs) => obs,
        DataLayout::Grouped(_) => unreachable!("flat accessor on grouped data"),
    }
}

fn moment_shape_hint(data: &DataSet) -> f64 {
    let obs = flat_obs(data);
    let n = obs.len() as f64;
    let mean = compensated_sum(obs.iter().copied()) / n;
    let var = compensated_sum(obs.iter().map(|x| (x - mean) * (x - mean))) / n;
    mean * mean / var
}

/// The penalized objective `log h(theta, psi) + log f(x | theta, psi)
/// − ½ log |I(theta, psi)|` evaluated at the profile nuisance value: the
/// nuisance MLE for the five analytic families (where it does not depend
/// on psi), and `x̄/psi` for the Gamma family, whose scale profile does.
/// The Gamma information penalty uses a fixed-seed finite-difference
/// estimate, so the objective is still a deterministic function of psi.
pub fn mml87_objective(data: &DataSet, prior: &PriorSpec, psi: f64) -> Result<f64> {
    if !(psi > 0.0) || !psi.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "psi must be a positive finite real, got {psi}"
        )));
    }
    let family = data.family();
    let (theta, log_det) = if family == Family::GammaTwoParam {
        let obs = flat_obs(data);
        let xbar = compensated_sum(obs.iter().copied()) / obs.len() as f64;
        let scale = xbar / psi;
        let info = fisher_information_fd(
            family,
            SampleShape::flat(data.n()),
            &ParameterPoint::scalar(scale, psi),
            OBJECTIVE_INFO_DRAWS,
            OBJECTIVE_INFO_SEED,
        )?;
        (vec![scale], info.log_determinant)
    } else {
        let theta_hat = models::nuisance_mle(data)?;
        let m = data.group_size().map(|m| m as f64);
        let log_det = log_info_det_closed(family, data.n() as f64, m, psi)
            .expect("analytic family has a closed form");
        (theta_hat, log_det)
    };
    let log_h = match prior {
        PriorSpec::Flat => 0.0,
        PriorSpec::PsiPowerLaw(e) => e * psi.ln(),
        PriorSpec::FirthInformation => log_det,
        PriorSpec::Custom(f) => {
            let v = f(&theta, psi);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("custom log-prior at psi={psi}")));
            }
            v
        }
    };
    let loglik = models::log_likelihood(data, &ParameterPoint::new(theta, psi))?;
    Ok(log_h + loglik - 0.5 * log_det)
}

/// Maximizes the penalized objective over psi.
///
/// For the five analytic families with non-custom priors the stationarity
/// condition is an explicit score equation (prior slope + score − half the
/// information slope) solved by bracketed bisection to tolerance 1e−12.
/// The Gamma family and custom priors go through golden-section search on
/// the objective itself.
pub fn mml87_estimate(data: &DataSet, prior: &PriorSpec) -> Result<EstimateReport> {
    penalized_estimate(data, prior, EstimatorKind::Mml87)
}

/// The information-prior corrected estimate: maximizes `log f + ½ log |I|`,
/// identical by construction to [`mml87_estimate`] with
/// [`PriorSpec::FirthInformation`].
pub fn firth_corrected_estimate(data: &DataSet) -> Result<EstimateReport> {
    penalized_estimate(data, &PriorSpec::FirthInformation, EstimatorKind::Firth)
}

fn penalized_estimate(
    data: &DataSet,
    prior: &PriorSpec,
    kind: EstimatorKind,
) -> Result<EstimateReport> {
    let family = data.family();
    let analytic = family.has_closed_forms() && !matches!(prior, PriorSpec::Custom(_));
    let (value, iterations) = if analytic {
        let theta_hat = models::nuisance_mle(data)?;
        let n = data.n() as f64;
        let u: Box<dyn Fn(f64) -> f64> = match models::linear_score_form(data, &theta_hat)? {
            Some(form) => Box::new(move |psi| form.score(psi)),
            None => {
                let y = models::updated_statistic(data)?.y;
                Box::new(move |psi| n / psi - y)
            }
        };
        let prior_slope: Box<dyn Fn(f64) -> f64> = match prior {
            PriorSpec::Flat => Box::new(|_| 0.0),
            PriorSpec::PsiPowerLaw(e) => {
                let e = *e;
                Box::new(move |psi| e / psi)
            }
            PriorSpec::FirthInformation => Box::new(move |psi| info_log_slope(family, n, psi)),
            PriorSpec::Custom(_) => unreachable!(),
        };
        let score =
            move |psi: f64| prior_slope(psi) + u(psi) - 0.5 * info_log_slope(family, n, psi);
        let hint = models::psi_mle(data)?;
        solve_score_root_detailed(&score, hint, PENALIZED_ROOT_TOL)?
    } else {
        let hint = if family == Family::GammaTwoParam {
            moment_shape_hint(data)
        } else {
            models::psi_mle(data)?
        };
        golden_max(&|psi| mml87_objective(data, prior, psi), hint, SEARCH_TOL)?
    };
    let objective_at_solution = mml87_objective(data, prior, value)?;
    Ok(EstimateReport {
        estimator: kind,
        value,
        iterations,
        converged: true,
        objective_at_solution,
    })
}

/// Closed-form maximum likelihood estimate packaged as a report; the
/// objective is the log-likelihood at `(theta_hat, psi_hat)`.
pub fn mle_report(data: &DataSet) -> Result<EstimateReport> {
    let value = models::psi_mle(data)?;
    let theta = models::nuisance_mle(data)?;
    let objective_at_solution = models::log_likelihood(data, &ParameterPoint::new(theta, value))?;
    Ok(EstimateReport {
        estimator: EstimatorKind::Mle,
        value,
        iterations: 0,
        converged: true,
        objective_at_solution,
    })
}

/// Closed-form updated estimate packaged as a report; the objective is the
/// log-likelihood of the updated statistic's own model at the solution.
pub fn mumle_report(data: &DataSet) -> Result<EstimateReport> {
    let stat = models::updated_statistic(data)?;
    let value = models::psi_mumle(data)?;
    let objective_at_solution = models::y_log_likelihood(&stat, value)?;
    Ok(EstimateReport {
        estimator: EstimatorKind::Mumle,
        value,
        iterations: 0,
        converged: true,
        objective_at_solution,
    })
}

/// Max−min over the grid of
/// `log f(x | theta_hat, psi) − log g_Y(y | psi) − e·log psi`,
/// where `e` is the declared exponent of the family's scale factor. A
/// spread near zero certifies that the gap between the full likelihood at
/// the profile point and the updated statistic's likelihood depends on the
/// data only, not on psi.
pub fn decomposition_residual_spread(data: &DataSet, psi_grid: &[f64]) -> Result<f64> {
    let e = data.family().phi_log_psi_exponent().ok_or_else(|| {
        Error::Unsupported(format!(
            "family {} declares no scale-factor exponent",
            data.family()
        ))
    })?;
    decomposition_residual_spread_with_exponent(data, psi_grid, e)
}

/// Same residual with an explicit exponent, for probing wrong declarations.
pub fn decomposition_residual_spread_with_exponent(
    data: &DataSet,
    psi_grid: &[f64],
    exponent: f64,
) -> Result<f64> {
    if psi_grid.len() < 3 {
        return Err(Error::DataShape(format!(
            "need at least 3 grid points, got {}",
            psi_grid.len()
        )));
    }
    for &p in psi_grid {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "grid point {p} is not a positive finite real"
            )));
        }
    }
    let theta_hat = models::nuisance_mle(data)?;
    let stat = models::updated_statistic(data)?;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &psi in psi_grid {
        let r = models::log_likelihood(data, &ParameterPoint::new(theta_hat.clone(), psi))?
            - models::y_log_likelihood(&stat, psi)?
            - exponent * psi.ln();
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("residual at psi={psi}")));
        }
        min = min.min(r);
        max = max.max(r);
    }
    Ok(max - min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn normal_data(obs: Vec<f64>) -> DataSet {
        DataSet::flat(Family::NormalMeanVar, obs).unwrap()
    }

    #[test]
    fn root_solver_handles_scaled_linear_score() {
        // (−n·psi + y) / (2 psi²) with n = 2, y = 2 has its root at 1
        let score = |psi: f64| (-2.0 * psi + 2.0) / (2.0 * psi * psi);
        for hint in [3.0, 1e-3, 1e3] {
            let root = solve_score_root(score, hint, 1e-12).unwrap();
            assert_relative_eq!(root, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn root_solver_agrees_with_closed_form_on_heavy_tail_data() {
        let data = DataSet::flat(Family::ParetoRate, vec![1.0, 2.0, 4.0]).unwrap();
        let y = models::updated_statistic(&data).unwrap().y;
        let solved = solve_score_root(|psi| 3.0 / psi - y, 1.0, 1e-12).unwrap();
        let closed = models::psi_mle(&data).unwrap();
        assert!((solved - closed).abs() < 1e-10);
        assert_relative_eq!(closed, 3.0 / 8.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn root_solver_reports_missing_sign_change() {
        let err = solve_score_root(|_| 1.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::Bracketing(_)));
    }

    #[test]
    fn root_solver_rejects_non_finite_scores() {
        let err = solve_score_root(|psi| (psi - 2.0).ln(), 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn maximizer_finds_quadratic_peak() {
        let (x, evals) = maximize_scalar(|x| -(x - 3.0) * (x - 3.0), 0.1, 1e-10).unwrap();
        assert!((x - 3.0).abs() < 1e-6);
        assert!(evals > 10);
    }

    #[test]
    fn power_half_prior_reproduces_updated_estimate() {
        let data = normal_data(vec![0.0, 2.0]);
        let report = mml87_estimate(&data, &PriorSpec::PsiPowerLaw(-0.5)).unwrap();
        assert!((report.value - 2.0).abs() < 1e-10);
        assert!(report.converged);

        let data = normal_data(vec![0.4, 1.9, -0.3, 2.6, 1.1, 0.2, 3.0]);
        let report = mml87_estimate(&data, &PriorSpec::PsiPowerLaw(-0.5)).unwrap();
        let mumle = models::psi_mumle(&data).unwrap();
        assert_relative_eq!(report.value, mumle, max_relative = 1e-10);
    }

    #[test]
    fn information_prior_solutions_frozen() {
        // normal: objective log f − log psi + const, root y/(n+2)
        let data = normal_data(vec![0.0, 2.0]);
        let report = firth_corrected_estimate(&data).unwrap();
        assert_relative_eq!(report.value, 0.5, max_relative = 1e-10);

        // grouped: root y/(n·m + n + 1)
        let data =
            DataSet::grouped(Family::NeymanScott, vec![vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        let report = firth_corrected_estimate(&data).unwrap();
        assert!(report.value.is_finite() && report.value > 0.0);
        assert_relative_eq!(report.value, 2.5 / 7.0, max_relative = 1e-10);

        // heavy-tail rate: penalized root lands on the updated estimate
        let data = DataSet::flat(Family::ParetoRate, vec![1.0, 2.0, 4.0, 8.0]).unwrap();
        let report = firth_corrected_estimate(&data).unwrap();
        let mumle = models::psi_mumle(&data).unwrap();
        assert_relative_eq!(report.value, mumle, max_relative = 1e-10);
    }

    #[test]
    fn corrected_estimate_is_the_information_prior_case() {
        let data = normal_data(vec![0.3, 1.8, 2.4, -0.9, 1.1]);
        let firth = firth_corrected_estimate(&data).unwrap();
        let mml = mml87_estimate(&data, &PriorSpec::FirthInformation).unwrap();
        assert_eq!(firth.value.to_bits(), mml.value.to_bits());
        assert_eq!(
            firth.objective_at_solution.to_bits(),
            mml.objective_at_solution.to_bits()
        );
        for psi in [0.5, 1.0, 2.0, 4.0] {
            let a = mml87_objective(&data, &PriorSpec::FirthInformation, psi).unwrap();
            let b = mml87_objective(&data, &PriorSpec::FirthInformation, psi).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn flat_prior_solutions_follow_penalty_algebra() {
        let data = DataSet::flat(Family::ShiftedExponential, vec![1.0, 2.0, 4.0, 5.0]).unwrap();
        let report = mml87_estimate(&data, &PriorSpec::Flat).unwrap();
        let mumle = models::psi_mumle(&data).unwrap();
        assert_relative_eq!(report.value, mumle, max_relative = 1e-10);

        // deviations from the mean 2 are −2, −1, 1, 2, so y = 10
        let data = normal_data(vec![0.0, 1.0, 3.0, 4.0]);
        let report = mml87_estimate(&data, &PriorSpec::Flat).unwrap();
        assert_relative_eq!(report.value, 10.0 / 2.0, max_relative = 1e-10);

        let data = DataSet::flat(Family::ParetoRate, vec![1.0, 2.0, 4.0]).unwrap();
        let y = 8.0_f64.ln();
        let report = mml87_estimate(&data, &PriorSpec::Flat).unwrap();
        assert_relative_eq!(report.value, 4.0 / y, max_relative = 1e-10);
    }

    #[test]
    fn custom_prior_goes_through_the_search_route() {
        let data = normal_data(vec![0.4, 1.9, -0.3, 2.6, 1.1, 0.2]);
        let custom = PriorSpec::Custom(Arc::new(|_, psi: f64| -psi.ln()));
        let report = mml87_estimate(&data, &custom).unwrap();
        // psi^(−1) prior: penalized root is y/n, same as the plain MLE
        let mle = models::psi_mle(&data).unwrap();
        assert_relative_eq!(report.value, mle, max_relative = 1e-6);
        assert!(report.iterations > 10);
    }

    #[test]
    fn closed_form_information_values() {
        let info = fisher_information_determinant(
            Family::NormalMeanVar,
            SampleShape::flat(10),
            &ParameterPoint::scalar(0.0, 2.0),
            0,
        )
        .unwrap();
        assert_relative_eq!(info.determinant, 50.0, max_relative = 1e-12);
        assert_eq!(info.source, InfoSource::ClosedForm);

        let info = fisher_information_determinant(
            Family::NormalMeanVar,
            SampleShape::flat(1),
            &ParameterPoint::scalar(0.0, 1.0),
            0,
        )
        .unwrap();
        assert_relative_eq!(info.determinant, 2.0, max_relative = 1e-12);

        let info = fisher_information_determinant(
            Family::NeymanScott,
            SampleShape::grouped(3, 2),
            &ParameterPoint::new(vec![0.0; 3], 1.0),
            0,
        )
        .unwrap();
        assert_relative_eq!(info.determinant, 96.0, max_relative = 1e-12);
        assert_relative_eq!(info.log_determinant, 96.0_f64.ln(), max_relative = 1e-12);

        let info = fisher_information_determinant(
            Family::ShiftedExponential,
            SampleShape::flat(5),
            &ParameterPoint::scalar(0.0, 2.0),
            0,
        )
        .unwrap();
        assert_relative_eq!(info.determinant, 1.25, max_relative = 1e-12);
    }

    #[test]
    fn grouped_information_stays_usable_in_log_space() {
        let info = fisher_information_determinant(
            Family::NeymanScott,
            SampleShape::grouped(2000, 2),
            &ParameterPoint::new(vec![0.0; 2000], 1.0),
            0,
        )
        .unwrap();
        assert!(info.determinant.is_infinite());
        assert!(info.log_determinant.is_finite());
        assert_relative_eq!(
            info.log_determinant,
            4000.0_f64.ln() + 2001.0 * 2.0_f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn finite_difference_information_matches_closed_form() {
        let closed = fisher_information_determinant(
            Family::NormalMeanVar,
            SampleShape::flat(10),
            &ParameterPoint::scalar(0.3, 2.0),
            0,
        )
        .unwrap();
        let fd = fisher_information_fd(
            Family::NormalMeanVar,
            SampleShape::flat(10),
            &ParameterPoint::scalar(0.3, 2.0),
            1 << 16,
            1234,
        )
        .unwrap();
        assert_eq!(fd.source, InfoSource::FiniteDifference);
        assert_relative_eq!(fd.determinant, closed.determinant, max_relative = 1e-4);
    }

    #[test]
    fn finite_difference_information_matches_shape_scale_oracle() {
        // trigamma(3) = pi²/6 − 5/4 exactly; per-sample determinant
        // n²·(a·trigamma(a) − 1)/scale²
        let trigamma_3 = PI * PI / 6.0 - 1.25;
        let oracle = 2500.0 * (3.0 * trigamma_3 - 1.0) / 4.0;
        let fd = fisher_information_determinant(
            Family::GammaTwoParam,
            SampleShape::flat(50),
            &ParameterPoint::scalar(2.0, 3.0),
            7,
        )
        .unwrap();
        assert_eq!(fd.source, InfoSource::FiniteDifference);
        assert_relative_eq!(fd.determinant, oracle, max_relative = 1e-3);
    }

    #[test]
    fn gamma_estimate_converges_through_search_route() {
        let mut rng = crate::montecarlo::replicate_rng(21, 0);
        let data = crate::montecarlo::sample(
            Family::GammaTwoParam,
            &ParameterPoint::scalar(2.0, 3.0),
            40,
            None,
            &mut rng,
        )
        .unwrap();
        let report = mml87_estimate(&data, &PriorSpec::Flat).unwrap();
        assert!(report.converged);
        assert!(report.value > 0.5 && report.value < 20.0);
        assert!(report.iterations > 10);
    }

    #[test]
    fn residual_spread_detects_the_declared_scale_exponent() {
        let data = normal_data(vec![0.4, 1.3, 2.2, 3.1]);
        let grid = [0.5, 1.0, 2.0, 4.0];
        let spread = decomposition_residual_spread(&data, &grid).unwrap();
        assert!(spread < 1e-10, "spread {spread}");

        let wrong =
            decomposition_residual_spread_with_exponent(&data, &grid, -1.0).unwrap();
        assert!(wrong > 0.1);
        // |−1/2 − (−1)| · (ln 4 − ln 0.5) = ln(8)/2
        assert_relative_eq!(wrong, 0.5 * 8.0_f64.ln(), max_relative = 1e-9);

        let constant = decomposition_residual_spread(&data, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(constant, 0.0);

        let err = decomposition_residual_spread(&data, &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::DataShape(_)));

        let se = DataSet::flat(Family::ShiftedExponential, vec![1.0, 2.0, 4.0]).unwrap();
        let err = decomposition_residual_spread(&se, &grid).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn closed_form_reports_carry_their_objectives() {
        let data = normal_data(vec![0.0, 2.0]);
        let mle = mle_report(&data).unwrap();
        assert_relative_eq!(mle.value, 1.0, max_relative = 1e-12);
        assert!(mle.converged && mle.objective_at_solution.is_finite());
        let mumle = mumle_report(&data).unwrap();
        assert_relative_eq!(mumle.value, 2.0, max_relative = 1e-12);
        assert!(mumle.converged && mumle.objective_at_solution.is_finite());
    }

    #[test]
    fn penalized_optimum_dominates_the_mle_point_at_its_own_objective() {
        let data = normal_data(vec![0.4, 1.9, -0.3, 2.6, 1.1]);
        let prior = PriorSpec::PsiPowerLaw(-0.5);
        let report = mml87_estimate(&data, &prior).unwrap();
        let at_mle = mml87_objective(&data, &prior, models::psi_mle(&data).unwrap()).unwrap();
        assert!(report.objective_at_solution >= at_mle);
    }
}
