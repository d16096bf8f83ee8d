//! Model families with a scalar interest parameter `psi` and nuisance
//! parameters `theta`.
//!
//! Every family here has the same shape: the nuisance MLE `theta_hat` is
//! available in closed form, and plugging it into the `psi`-score leaves a
//! one-dimensional estimation problem. For all families except
//! `GammaTwoParam` that plug-in problem collapses onto a single statistic
//! `Y` whose distribution depends on `psi` alone, which is what makes the
//! model-updated estimate (`psi_mumle`) well defined: maximize the
//! likelihood of `Y` under its own exact model instead of the plug-in
//! likelihood of the full sample.
//!
//! Catalogue (observation model, `Y`, `Y`-model, first/second stage estimates):
//!
//! | family              | model                         | Y                        | Y-model             | MLE     | MUMLE      |
//! |---------------------|-------------------------------|--------------------------|---------------------|---------|------------|
//! | `NormalMeanVar`     | N(θ, ψ)                       | Σ(Xi−X̄)²                | ψ·χ²(n−1)           | Y/n     | Y/(n−1)    |
//! | `NeymanScott`       | N(θi, ψ), n groups of m       | ΣΣ(Xij−X̄i)²             | ψ·χ²(n(m−1))        | Y/(nm)  | Y/(n(m−1)) |
//! | `ShiftedExponential`| ψ⁻¹e^{−(w−θ)/ψ}, w ≥ θ        | Σ(Xi−X₍₁₎)               | Gamma(n−1, scale ψ) | Y/n     | Y/(n−1)    |
//! | `ParetoRate`        | ψθ^ψ w^{−(ψ+1)}, w ≥ θ        | Σ log(Xi/X₍₁₎)           | Gamma(n−1, rate ψ)  | n/Y     | (n−1)/Y    |
//! | `ParetoScaleParam`  | (1/ψ*)θ^{1/ψ*}w^{−(1/ψ*+1)}   | Σ log(Xi/X₍₁₎)           | Gamma(n−1, scale ψ*)| Y/n     | Y/(n−1)    |
//! | `GammaTwoParam`     | Gamma(shape ψ, scale θ)       | (none)                   | (none)              | numeric | (none)     |
//!
//! Log-likelihoods keep their full normalizing constants so penalized
//! objectives and decomposition residuals are well defined up to data-only
//! terms.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// The implemented model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "normal")]
    NormalMeanVar,
    #[serde(rename = "neyman-scott")]
    NeymanScott,
    #[serde(rename = "shifted-exponential")]
    ShiftedExponential,
    #[serde(rename = "pareto-rate")]
    ParetoRate,
    #[serde(rename = "pareto-scale")]
    ParetoScaleParam,
    #[serde(rename = "gamma-two-param")]
    GammaTwoParam,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::NormalMeanVar,
        Family::NeymanScott,
        Family::ShiftedExponential,
        Family::ParetoRate,
        Family::ParetoScaleParam,
        Family::GammaTwoParam,
    ];

    /// Stable identifier used in the CLI and in serialized reports.
    pub fn name(self) -> &'static str {
        match self {
            Family::NormalMeanVar => "normal",
            Family::NeymanScott => "neyman-scott",
            Family::ShiftedExponential => "shifted-exponential",
            Family::ParetoRate => "pareto-rate",
            Family::ParetoScaleParam => "pareto-scale",
            Family::GammaTwoParam => "gamma-two-param",
        }
    }

    pub fn parse(name: &str) -> Option<Family> {
        Family::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// Smallest flat sample size (or smallest group count) accepted.
    pub fn min_n(self) -> usize {
        match self {
            Family::NeymanScott => 1,
            _ => 2,
        }
    }

    /// Grouped families take `Grouped` data, all others take `Flat`.
    pub fn is_grouped(self) -> bool {
        matches!(self, Family::NeymanScott)
    }

    /// Whether the closed-form estimation table (nuisance MLE, Y, Y-model,
    /// psi MLE/MUMLE) applies. `GammaTwoParam` is numeric-only.
    pub fn has_closed_forms(self) -> bool {
        !matches!(self, Family::GammaTwoParam)
    }

    /// Nuisance dimension for a dataset with `n_groups` groups (flat data
    /// counts as one group of size n).
    pub fn nuisance_dim(self, n_groups: usize) -> usize {
        match self {
            Family::NeymanScott => n_groups,
            _ => 1,
        }
    }

    /// Exponent `e` such that the plug-in log-likelihood minus the Y
    /// log-likelihood equals `e·log ψ` plus a data-only term. Declared only
    /// where that factorization has been worked out.
    pub fn phi_log_psi_exponent(self) -> Option<f64> {
        match self {
            Family::NormalMeanVar => Some(-0.5),
            _ => None,
        }
    }

    fn rejects_negative_observations(self) -> bool {
        matches!(
            self,
            Family::ShiftedExponential
                | Family::ParetoRate
                | Family::ParetoScaleParam
                | Family::GammaTwoParam
        )
    }

    fn requires_positive_observations(self) -> bool {
        matches!(
            self,
            Family::ParetoRate | Family::ParetoScaleParam | Family::GammaTwoParam
        )
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A full parameter point: nuisance vector plus the scalar interest
/// parameter. `psi` is a variance (`NormalMeanVar`, `NeymanScott`), a scale
/// (`ShiftedExponential`, `ParetoScaleParam`), a rate-like shape
/// (`ParetoRate`) or a Gamma shape (`GammaTwoParam`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterPoint {
    pub theta: Vec<f64>,
    pub psi: f64,
}

impl ParameterPoint {
    pub fn new(theta: Vec<f64>, psi: f64) -> Self {
        ParameterPoint { theta, psi }
    }

    /// Single-nuisance convenience constructor.
    pub fn scalar(theta: f64, psi: f64) -> Self {
        ParameterPoint { theta: vec![theta], psi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DataLayout {
    Flat(Vec<f64>),
    Grouped(Vec<Vec<f64>>),
}

/// Validated observations for one family.
///
/// Construction enforces layout (flat vs grouped), minimum sizes, support
/// (nonnegative for shifted-exponential, strictly positive for Pareto and
/// Gamma data), finiteness, and non-degeneracy (a sample whose spread
/// statistic Y would be exactly zero is rejected).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSet {
    family: Family,
    layout: DataLayout,
}

impl DataSet {
    pub fn new(family: Family, layout: DataLayout) -> Result<Self> {
        match (&layout, family.is_grouped()) {
            (DataLayout::Flat(_), true) => {
                return Err(Error::DataShape(format!(
                    "family {family} takes grouped data"
                )))
            }
            (DataLayout::Grouped(_), false) => {
                return Err(Error::DataShape(format!(
                    "family {family} takes flat data"
                )))
            }
            _ => {}
        }
        match &layout {
            DataLayout::Flat(obs) => {
                if obs.len() < family.min_n() {
                    return Err(Error::DataShape(format!(
                        "family {family} needs at least {} observations, got {}",
                        family.min_n(),
                        obs.len()
                    )));
                }
                check_support(family, obs)?;
                if all_equal(obs) {
                    return Err(Error::DegenerateSample(
                        "all observations equal; spread statistic would be zero".into(),
                    ));
                }
            }
            DataLayout::Grouped(groups) => {
                if groups.is_empty() {
                    return Err(Error::DataShape("no groups".into()));
                }
                let m = groups[0].len();
                if m < 2 {
                    return Err(Error::DataShape(
                        "grouped data needs at least 2 observations per group".into(),
                    ));
                }
                for (i, g) in groups.iter().enumerate() {
                    if g.len() != m {
                        return Err(Error::DataShape(format!(
                            "group {} has {} observations, expected constant group size {m}",
                            i,
                            g.len()
                        )));
                    }
                    check_support(family, g)?;
                }
                if groups.iter().all(|g| all_equal(g)) {
                    return Err(Error::DegenerateSample(
                        "every group is constant; spread statistic would be zero".into(),
                    ));
                }
            }
        }
        Ok(DataSet { family, layout })
    }

    pub fn flat(family: Family, observations: Vec<f64>) -> Result<Self> {
        DataSet::new(family, DataLayout::Flat(observations))
    }

    pub fn grouped(family: Family, groups: Vec<Vec<f64>>) -> Result<Self> {
        DataSet::new(family, DataLayout::Grouped(groups))
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn layout(&self) -> &DataLayout {
        &self.layout
    }

    /// Number of observations for flat data, number of groups for grouped.
    pub fn n(&self) -> usize {
        match &self.layout {
            DataLayout::Flat(obs) => obs.len(),
            DataLayout::Grouped(groups) => groups.len(),
        }
    }

    /// Constant group size, if grouped.
    pub fn group_size(&self) -> Option<usize> {
        match &self.layout {
            DataLayout::Flat(_) => None,
            DataLayout::Grouped(groups) => Some(groups[0].len()),
        }
    }

    pub fn total_observations(&self) -> usize {
        match &self.layout {
            DataLayout::Flat(obs) => obs.len(),
            DataLayout::Grouped(groups) => groups.len() * groups[0].len(),
        }
    }

    fn flat_obs(&self) -> Result<&[f64]> {
        match &self.layout {
            DataLayout::Flat(obs) => Ok(obs),
            DataLayout::Grouped(_) => Err(Error::DataShape("expected flat data".into())),
        }
    }

    fn groups(&self) -> Result<&[Vec<f64>]> {
        match &self.layout {
            DataLayout::Grouped(groups) => Ok(groups),
            DataLayout::Flat(_) => Err(Error::DataShape("expected grouped data".into())),
        }
    }
}

fn check_support(family: Family, obs: &[f64]) -> Result<()> {
    for (i, &x) in obs.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::DataShape(format!(
                "observation {i} is not finite ({x})"
            )));
        }
        if family.requires_positive_observations() && x <= 0.0 {
            return Err(Error::ParameterDomain(format!(
                "family {family} needs strictly positive observations, got {x}"
            )));
        }
        if family.rejects_negative_observations() && x < 0.0 {
            return Err(Error::ParameterDomain(format!(
                "family {family} needs nonnegative observations, got {x}"
            )));
        }
    }
    Ok(())
}

fn all_equal(obs: &[f64]) -> bool {
    obs.windows(2).all(|w| w[0] == w[1])
}

/// Validates `params` against `data`'s family: `psi > 0` everywhere, theta
/// dimension matching the nuisance dimension, and per-family theta domains.
pub fn validate_params(data: &DataSet, params: &ParameterPoint) -> Result<()> {
    validate_family_params(data.family(), &params.theta, params.psi, data.n())
}

/// Same checks without a dataset in hand; `n_groups` supplies the nuisance
/// dimension for the grouped family and is ignored otherwise.
pub fn validate_family_params(
    family: Family,
    theta: &[f64],
    psi: f64,
    n_groups: usize,
) -> Result<()> {
    if !(psi > 0.0) || !psi.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "psi must be a positive finite real, got {psi}"
        )));
    }
    let want = family.nuisance_dim(n_groups);
    if theta.len() != want {
        return Err(Error::ParameterDomain(format!(
            "family {family} needs {want} nuisance component(s), got {}",
            theta.len()
        )));
    }
    for &t in theta {
        if !t.is_finite() {
            return Err(Error::ParameterDomain(format!("theta not finite ({t})")));
        }
        match family {
            Family::ShiftedExponential if t < 0.0 => {
                return Err(Error::ParameterDomain(format!(
                    "shifted-exponential location must be nonnegative, got {t}"
                )))
            }
            Family::ParetoRate | Family::ParetoScaleParam | Family::GammaTwoParam
                if t <= 0.0 =>
            {
                return Err(Error::ParameterDomain(format!(
                    "family {family} scale must be strictly positive, got {t}"
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

/// The common shape shared by the score of four of the families:
/// `U(psi) = (c·psi + d) / (a·psi²)` with `a > 0`, `c = −n` (or `−n·m`) and
/// `d = D(x, theta) ≥ 0`. The data-only remainder `g(x)` of the
/// log-likelihood never enters estimation and is not carried here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearScoreForm {
    pub a: f64,
    pub c: f64,
    pub d: f64,
}

impl LinearScoreForm {
    /// Score evaluated through the form.
    pub fn score(&self, psi: f64) -> f64 {
        (self.c * psi + self.d) / (self.a * psi * psi)
    }

    /// Root of the form's score: `−d/c`.
    pub fn root(&self) -> f64 {
        -self.d / self.c
    }
}

/// Instantiates the linear score form at `(data, theta)` for the families
/// that have one (`NormalMeanVar`, `NeymanScott`, `ShiftedExponential`,
/// `ParetoScaleParam`). Returns `Ok(None)` for the other families.
pub fn linear_score_form(data: &DataSet, theta: &[f64]) -> Result<Option<LinearScoreForm>> {
    let n = data.n() as f64;
    let form = match data.family() {
        Family::NormalMeanVar => {
            let obs = data.flat_obs()?;
            let d = obs.iter().map(|x| (x - theta[0]).powi(2)).sum();
            Some(LinearScoreForm { a: 2.0, c: -n, d })
        }
        Family::NeymanScott => {
            let groups = data.groups()?;
            let m = groups[0].len() as f64;
            let d = groups
                .iter()
                .zip(theta)
                .map(|(g, t)| g.iter().map(|x| (x - t).powi(2)).sum::<f64>())
                .sum();
            Some(LinearScoreForm { a: 2.0, c: -n * m, d })
        }
        Family::ShiftedExponential => {
            let obs = data.flat_obs()?;
            if obs.iter().any(|&x| x < theta[0]) {
                return Err(Error::NonFinite(
                    "observation below the location; density is zero".into(),
                ));
            }
            let d = obs.iter().map(|x| x - theta[0]).sum();
            Some(LinearScoreForm { a: 1.0, c: -n, d })
        }
        Family::ParetoScaleParam => {
            let obs = data.flat_obs()?;
            if obs.iter().any(|&x| x < theta[0]) {
                return Err(Error::NonFinite(
                    "observation below the scale; density is zero".into(),
                ));
            }
            let d = obs.iter().map(|x| (x / theta[0]).ln()).sum();
            Some(LinearScoreForm { a: 1.0, c: -n, d })
        }
        Family::ParetoRate | Family::GammaTwoParam => None,
    };
    Ok(form)
}

/// One-parameter model for the updated statistic `Y`. The scale or rate is
/// `psi` itself, supplied at evaluation time; only the shape is stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum YModel {
    /// `Y = psi · W` with `W ~ χ²(k)`.
    ScaledChiSquare { k: f64 },
    /// `Y ~ Gamma(shape, scale = psi)`.
    GammaShapeScale { shape: f64 },
    /// `Y ~ Gamma(shape, rate = psi)`.
    GammaShapeRate { shape: f64 },
}

impl YModel {
    /// Mean of Y at a given `psi`.
    pub fn mean(&self, psi: f64) -> f64 {
        match *self {
            YModel::ScaledChiSquare { k } => k * psi,
            YModel::GammaShapeScale { shape } => shape * psi,
            YModel::GammaShapeRate { shape } => shape / psi,
        }
    }

    /// Variance of Y at a given `psi`.
    pub fn variance(&self, psi: f64) -> f64 {
        match *self {
            YModel::ScaledChiSquare { k } => 2.0 * k * psi * psi,
            YModel::GammaShapeScale { shape } => shape * psi * psi,
            YModel::GammaShapeRate { shape } => shape / (psi * psi),
        }
    }
}

/// The updated statistic `Y` together with its exact one-parameter model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdatedStatistic {
    pub y: f64,
    pub dof_or_shape: f64,
    pub model: YModel,
}

/// Exact log-density of the full sample, including support indicators:
/// returns `-inf` (not an error) when an observation falls outside the
/// support implied by `theta`.
pub fn log_likelihood(data: &DataSet, params: &ParameterPoint) -> Result<f64> {
    validate_params(data, params)?;
    let psi = params.psi;
    let n = data.n() as f64;
    let value = match data.family() {
        Family::NormalMeanVar => {
            let obs = data.flat_obs()?;
            let ss: f64 = obs.iter().map(|x| (x - params.theta[0]).powi(2)).sum();
            -0.5 * n * (LN_2PI + psi.ln()) - ss / (2.0 * psi)
        }
        Family::NeymanScott => {
            let groups = data.groups()?;
            let m = groups[0].len() as f64;
            let ss: f64 = groups
                .iter()
                .zip(&params.theta)
                .map(|(g, t)| g.iter().map(|x| (x - t).powi(2)).sum::<f64>())
                .sum();
            -0.5 * n * m * (LN_2PI + psi.ln()) - ss / (2.0 * psi)
        }
        Family::ShiftedExponential => {
            let obs = data.flat_obs()?;
            let theta = params.theta[0];
            if obs.iter().any(|&x| x < theta) {
                return Ok(f64::NEG_INFINITY);
            }
            let dev: f64 = obs.iter().map(|x| x - theta).sum();
            -n * psi.ln() - dev / psi
        }
        Family::ParetoRate => {
            let obs = data.flat_obs()?;
            let theta = params.theta[0];
            if obs.iter().any(|&x| x < theta) {
                return Ok(f64::NEG_INFINITY);
            }
            let sum_log: f64 = obs.iter().map(|x| x.ln()).sum();
            n * psi.ln() + n * psi * theta.ln() - (psi + 1.0) * sum_log
        }
        Family::ParetoScaleParam => {
            let obs = data.flat_obs()?;
            let theta = params.theta[0];
            if obs.iter().any(|&x| x < theta) {
                return Ok(f64::NEG_INFINITY);
            }
            let sum_log: f64 = obs.iter().map(|x| x.ln()).sum();
            let dev: f64 = obs.iter().map(|x| (x / theta).ln()).sum();
            -n * psi.ln() - dev / psi - sum_log
        }
        Family::GammaTwoParam => {
            // theta = scale, psi = shape.
            let obs = data.flat_obs()?;
            let scale = params.theta[0];
            let shape = psi;
            let sum_log: f64 = obs.iter().map(|x| x.ln()).sum();
            let sum: f64 = obs.iter().sum();
            (shape - 1.0) * sum_log - sum / scale - n * (shape * scale.ln() + ln_gamma(shape))
        }
    };
    Ok(value)
}

/// `∂ log f / ∂ psi` at `params`. Closed form for all families except
/// `GammaTwoParam`, which uses a central difference of [`log_likelihood`].
///
/// For the families with a [`LinearScoreForm`] this equals
/// `(c·psi + d)/(a·psi²)` exactly. For `ParetoRate` the derivative is
/// `n/psi − Σ log(Xi/theta)`.
pub fn psi_score(data: &DataSet, params: &ParameterPoint) -> Result<f64> {
    validate_params(data, params)?;
    let psi = params.psi;
    let n = data.n() as f64;
    match data.family() {
        Family::NormalMeanVar
        | Family::NeymanScott
        | Family::ShiftedExponential
        | Family::ParetoScaleParam => {
            let form = linear_score_form(data, &params.theta)?.expect("family has a score form");
            Ok(form.score(psi))
        }
        Family::ParetoRate => {
            let obs = data.flat_obs()?;
            let theta = params.theta[0];
            if obs.iter().any(|&x| x < theta) {
                return Err(Error::NonFinite(
                    "observation below the scale; score undefined".into(),
                ));
            }
            let y: f64 = obs.iter().map(|x| (x / theta).ln()).sum();
            Ok(n / psi - y)
        }
        Family::GammaTwoParam => {
            let h = (1e-5 * (1.0 + psi.abs())).min(psi / 2.0);
            let up = log_likelihood(data, &ParameterPoint::new(params.theta.clone(), psi + h))?;
            let down = log_likelihood(data, &ParameterPoint::new(params.theta.clone(), psi - h))?;
            let d = (up - down) / (2.0 * h);
            if d.is_finite() {
                Ok(d)
            } else {
                Err(Error::NonFinite("numeric score not finite".into()))
            }
        }
    }
}

/// Closed-form nuisance MLE: the sample mean (`NormalMeanVar`), per-group
/// means (`NeymanScott`) or the smallest observation (the support-bounded
/// families). `GammaTwoParam` has no psi-free nuisance MLE.
pub fn nuisance_mle(data: &DataSet) -> Result<Vec<f64>> {
    match data.family() {
        Family::NormalMeanVar => {
            let obs = data.flat_obs()?;
            Ok(vec![mean(obs)])
        }
        Family::NeymanScott => {
            let groups = data.groups()?;
            Ok(groups.iter().map(|g| mean(g)).collect())
        }
        Family::ShiftedExponential | Family::ParetoRate | Family::ParetoScaleParam => {
            let obs = data.flat_obs()?;
            Ok(vec![min(obs)])
        }
        Family::GammaTwoParam => Err(Error::Unsupported(
            "gamma-two-param has no closed-form nuisance MLE; its scale profile depends on psi"
                .into(),
        )),
    }
}

/// The updated statistic `Y = −D(x, theta_hat)/C` with its exact model.
pub fn updated_statistic(data: &DataSet) -> Result<UpdatedStatistic> {
    let n = data.n() as f64;
    let stat = match data.family() {
        Family::NormalMeanVar => {
            let obs = data.flat_obs()?;
            let xbar = mean(obs);
            let y: f64 = obs.iter().map(|x| (x - xbar).powi(2)).sum();
            let k = n - 1.0;
            UpdatedStatistic { y, dof_or_shape: k, model: YModel::ScaledChiSquare { k } }
        }
        Family::NeymanScott => {
            let groups = data.groups()?;
            let m = groups[0].len() as f64;
            let y: f64 = groups
                .iter()
                .map(|g| {
                    let gm = mean(g);
                    g.iter().map(|x| (x - gm).powi(2)).sum::<f64>()
                })
                .sum();
            let k = n * (m - 1.0);
            UpdatedStatistic { y, dof_or_shape: k, model: YModel::ScaledChiSquare { k } }
        }
        Family::ShiftedExponential => {
            let obs = data.flat_obs()?;
            let lo = min(obs);
            let y: f64 = obs.iter().map(|x| x - lo).sum();
            let shape = n - 1.0;
            UpdatedStatistic { y, dof_or_shape: shape, model: YModel::GammaShapeScale { shape } }
        }
        Family::ParetoRate => {
            let obs = data.flat_obs()?;
            let lo = min(obs);
            let y: f64 = obs.iter().map(|x| (x / lo).ln()).sum();
            let shape = n - 1.0;
            UpdatedStatistic { y, dof_or_shape: shape, model: YModel::GammaShapeRate { shape } }
        }
        Family::ParetoScaleParam => {
            let obs = data.flat_obs()?;
            let lo = min(obs);
            let y: f64 = obs.iter().map(|x| (x / lo).ln()).sum();
            let shape = n - 1.0;
            UpdatedStatistic { y, dof_or_shape: shape, model: YModel::GammaShapeScale { shape } }
        }
        Family::GammaTwoParam => {
            return Err(Error::Unsupported(
                "gamma-two-param has no one-parameter updated statistic".into(),
            ))
        }
    };
    if !(stat.y > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "updated statistic is {} (data carries no spread)",
            stat.y
        )));
    }
    Ok(stat)
}

/// Exact log-density of `Y` under its one-parameter model, full constants
/// included.
pub fn y_log_likelihood(stat: &UpdatedStatistic, psi: f64) -> Result<f64> {
    if !(psi > 0.0) || !psi.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "psi must be a positive finite real, got {psi}"
        )));
    }
    if !(stat.y > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "updated statistic must be positive, got {}",
            stat.y
        )));
    }
    let y = stat.y;
    let value = match stat.model {
        YModel::ScaledChiSquare { k } => {
            -0.5 * k * (psi.ln() + std::f64::consts::LN_2) - ln_gamma(0.5 * k)
                + (0.5 * k - 1.0) * y.ln()
                - y / (2.0 * psi)
        }
        YModel::GammaShapeScale { shape } => {
            -shape * psi.ln() - ln_gamma(shape) + (shape - 1.0) * y.ln() - y / psi
        }
        YModel::GammaShapeRate { shape } => {
            shape * psi.ln() - ln_gamma(shape) + (shape - 1.0) * y.ln() - psi * y
        }
    };
    Ok(value)
}

/// First-stage (plug-in) MLE of `psi`.
pub fn psi_mle(data: &DataSet) -> Result<f64> {
    let stat = updated_statistic(data)?;
    let n = data.n() as f64;
    Ok(match data.family() {
        Family::NormalMeanVar | Family::ShiftedExponential | Family::ParetoScaleParam => {
            stat.y / n
        }
        Family::NeymanScott => stat.y / (n * data.group_size().unwrap() as f64),
        Family::ParetoRate => n / stat.y,
        Family::GammaTwoParam => unreachable!("updated_statistic rejects gamma-two-param"),
    })
}

/// Second-stage estimate: the maximizer of the `Y`-model likelihood.
pub fn psi_mumle(data: &DataSet) -> Result<f64> {
    let stat = updated_statistic(data)?;
    Ok(match stat.model {
        YModel::ScaledChiSquare { k } => stat.y / k,
        YModel::GammaShapeScale { shape } => stat.y / shape,
        YModel::GammaShapeRate { shape } => shape / stat.y,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat(family: Family, obs: &[f64]) -> DataSet {
        DataSet::flat(family, obs.to_vec()).unwrap()
    }

    #[test]
    fn normal_log_likelihood_matches_direct_substitution() {
        let data = flat(Family::NormalMeanVar, &[0.0, 2.0]);
        let ll = log_likelihood(&data, &ParameterPoint::scalar(1.0, 1.0)).unwrap();
        assert_relative_eq!(ll, -(2.0 * std::f64::consts::PI).ln() - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn normal_score_vanishes_at_its_mle() {
        let data = flat(Family::NormalMeanVar, &[0.0, 2.0]);
        let s = psi_score(&data, &ParameterPoint::scalar(1.0, 1.0)).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn shifted_exponential_log_likelihood_sums_deviations() {
        // deviations from theta = 1 are 0, 1, 3
        let data = flat(Family::ShiftedExponential, &[1.0, 2.0, 4.0]);
        let ll = log_likelihood(&data, &ParameterPoint::scalar(1.0, 1.0)).unwrap();
        assert_relative_eq!(ll, -4.0, epsilon = 1e-14);
    }

    #[test]
    fn support_violation_gives_minus_infinity() {
        let data = flat(Family::ParetoScaleParam, &[2.0, 5.0]);
        let ll = log_likelihood(&data, &ParameterPoint::scalar(3.0, 1.0)).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
        let data = flat(Family::ShiftedExponential, &[1.0, 2.0, 4.0]);
        let ll = log_likelihood(&data, &ParameterPoint::scalar(1.5, 1.0)).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn pareto_rate_score_at_unit_psi() {
        let data = flat(Family::ParetoRate, &[1.0, 2.0, 4.0]);
        let s = psi_score(&data, &ParameterPoint::scalar(1.0, 1.0)).unwrap();
        assert_relative_eq!(s, 3.0 - 3.0 * std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn neyman_scott_score_vanishes_at_its_mle() {
        let data =
            DataSet::grouped(Family::NeymanScott, vec![vec![0.0, 2.0], vec![1.0, 3.0]]).unwrap();
        let s = psi_score(&data, &ParameterPoint::new(vec![1.0, 2.0], 1.0)).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn nuisance_mle_examples() {
        let data = flat(Family::NormalMeanVar, &[0.0, 2.0]);
        assert_eq!(nuisance_mle(&data).unwrap(), vec![1.0]);
        let data = flat(Family::ShiftedExponential, &[1.0, 2.0, 4.0]);
        assert_eq!(nuisance_mle(&data).unwrap(), vec![1.0]);
        let data =
            DataSet::grouped(Family::NeymanScott, vec![vec![0.0, 2.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(nuisance_mle(&data).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn updated_statistic_examples() {
        let stat = updated_statistic(&flat(Family::NormalMeanVar, &[0.0, 2.0])).unwrap();
        assert_eq!(stat.y, 2.0);
        assert_eq!(stat.dof_or_shape, 1.0);
        assert!(matches!(stat.model, YModel::ScaledChiSquare { k } if k == 1.0));

        let stat = updated_statistic(&flat(Family::ShiftedExponential, &[1.0, 2.0, 4.0])).unwrap();
        assert_eq!(stat.y, 4.0);
        assert_eq!(stat.dof_or_shape, 2.0);
        assert!(matches!(stat.model, YModel::GammaShapeScale { shape } if shape == 2.0));

        let stat = updated_statistic(&flat(Family::ParetoRate, &[1.0, 2.0, 4.0])).unwrap();
        assert_relative_eq!(stat.y, 3.0 * std::f64::consts::LN_2, epsilon = 1e-14);
        assert!(matches!(stat.model, YModel::GammaShapeRate { shape } if shape == 2.0));
    }

    #[test]
    fn y_log_likelihood_frozen_values() {
        // scaled chi-square, k = 2: density (1/2) exp(-y/2) at y = 2, psi = 1
        let stat = UpdatedStatistic {
            y: 2.0,
            dof_or_shape: 2.0,
            model: YModel::ScaledChiSquare { k: 2.0 },
        };
        assert_relative_eq!(
            y_log_likelihood(&stat, 1.0).unwrap(),
            -std::f64::consts::LN_2 - 1.0,
            epsilon = 1e-14
        );

        // Gamma(shape 2, scale 2) at y = 4: log[(1/4)·4·e^{-2}] = -2
        let stat = UpdatedStatistic {
            y: 4.0,
            dof_or_shape: 2.0,
            model: YModel::GammaShapeScale { shape: 2.0 },
        };
        assert_relative_eq!(y_log_likelihood(&stat, 2.0).unwrap(), -2.0, epsilon = 1e-14);
    }

    #[test]
    fn psi_estimates_closed_forms() {
        let data = flat(Family::NormalMeanVar, &[0.0, 2.0]);
        assert_eq!(psi_mle(&data).unwrap(), 1.0);
        assert_eq!(psi_mumle(&data).unwrap(), 2.0);

        let data = flat(Family::ShiftedExponential, &[1.0, 2.0, 4.0]);
        assert_eq!(psi_mumle(&data).unwrap(), 2.0);

        let y = 3.0 * std::f64::consts::LN_2;
        let data = flat(Family::ParetoRate, &[1.0, 2.0, 4.0]);
        assert_relative_eq!(psi_mle(&data).unwrap(), 3.0 / y, epsilon = 1e-14);
        assert_relative_eq!(psi_mumle(&data).unwrap(), 2.0 / y, epsilon = 1e-14);

        let data =
            DataSet::grouped(Family::NeymanScott, vec![vec![0.0, 2.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(psi_mle(&data).unwrap(), 1.0);
        assert_eq!(psi_mumle(&data).unwrap(), 2.0);
    }

    #[test]
    fn degenerate_samples_rejected() {
        assert!(matches!(
            DataSet::flat(Family::NormalMeanVar, vec![5.0, 5.0]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(matches!(
            DataSet::grouped(Family::NeymanScott, vec![vec![1.0, 1.0], vec![2.0, 2.0]]),
            Err(Error::DegenerateSample(_))
        ));
        // one non-constant group is enough spread
        assert!(DataSet::grouped(Family::NeymanScott, vec![vec![1.0, 1.0], vec![2.0, 3.0]]).is_ok());
    }

    #[test]
    fn shape_and_support_rejections() {
        assert!(matches!(
            DataSet::flat(Family::NormalMeanVar, vec![1.0]),
            Err(Error::DataShape(_))
        ));
        assert!(matches!(
            DataSet::grouped(Family::NeymanScott, vec![vec![0.0, 2.0], vec![1.0]]),
            Err(Error::DataShape(_))
        ));
        assert!(matches!(
            DataSet::flat(Family::NeymanScott, vec![0.0, 2.0]),
            Err(Error::DataShape(_))
        ));
        assert!(matches!(
            DataSet::grouped(Family::NormalMeanVar, vec![vec![0.0, 2.0]]),
            Err(Error::DataShape(_))
        ));
        assert!(matches!(
            DataSet::flat(Family::ParetoRate, vec![-1.0, 2.0]),
            Err(Error::ParameterDomain(_))
        ));
        assert!(matches!(
            DataSet::flat(Family::ParetoRate, vec![0.0, 2.0]),
            Err(Error::ParameterDomain(_))
        ));
        assert!(matches!(
            DataSet::flat(Family::ShiftedExponential, vec![-0.5, 2.0]),
            Err(Error::ParameterDomain(_))
        ));
        assert!(DataSet::flat(Family::ShiftedExponential, vec![0.0, 2.0]).is_ok());
    }

    #[test]
    fn parameter_domain_rejections() {
        let data = flat(Family::NormalMeanVar, &[0.0, 2.0]);
        assert!(log_likelihood(&data, &ParameterPoint::scalar(0.0, 0.0)).is_err());
        assert!(log_likelihood(&data, &ParameterPoint::scalar(0.0, -1.0)).is_err());
        assert!(log_likelihood(&data, &ParameterPoint::new(vec![0.0, 1.0], 1.0)).is_err());
        let data = flat(Family::ParetoRate, &[1.0, 2.0]);
        assert!(log_likelihood(&data, &ParameterPoint::scalar(0.0, 1.0)).is_err());
        let data = flat(Family::ShiftedExponential, &[1.0, 2.0]);
        assert!(log_likelihood(&data, &ParameterPoint::scalar(-1.0, 1.0)).is_err());
    }

    #[test]
    fn gamma_two_param_has_no_closed_forms() {
        let data = flat(Family::GammaTwoParam, &[1.0, 2.0, 3.0]);
        assert!(matches!(nuisance_mle(&data), Err(Error::Unsupported(_))));
        assert!(matches!(updated_statistic(&data), Err(Error::Unsupported(_))));
        assert!(matches!(psi_mle(&data), Err(Error::Unsupported(_))));
        assert!(matches!(psi_mumle(&data), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gamma_two_param_numeric_score_tracks_shape_derivative() {
        // d/dshape log f = Σ log x − n·log scale − n·digamma(shape);
        // at shape 1 digamma = −EulerGamma.
        let data = flat(Family::GammaTwoParam, &[1.0, 2.0, 3.0]);
        let s = psi_score(&data, &ParameterPoint::scalar(1.0, 1.0)).unwrap();
        let expected = 6.0_f64.ln() + 3.0 * 0.5772156649015329;
        assert_relative_eq!(s, expected, max_relative = 1e-8);
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(Family::parse(f.name()), Some(f));
        }
        assert_eq!(Family::parse("no-such-family"), None);
    }
}
