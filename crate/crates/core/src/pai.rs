//! Monte Carlo inference from PASS samples: empirical null distributions,
//! p-values, the FID / feature-significance / coherence tests and pivotal
//! inference.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::generators::{pass_sample, GaussianTransport, GeneratorModel, PassConfig, PassSession};
use crate::matrix::Matrix;
use crate::metrics::{fid, gaussian_summary, GaussianSummary};
use crate::special::{mean, quantile_sorted, sample_sd, sorted_copy};

/// The sorted values `T^(1) ≤ … ≤ T^(D)` of a simulated statistic.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for EmpiricalDistribution {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        EmpiricalDistribution::new(values)
    }
}

impl From<EmpiricalDistribution> for Vec<f64> {
    fn from(d: EmpiricalDistribution) -> Self {
        d.values
    }
}

impl EmpiricalDistribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "an empirical distribution needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteStatistic { replicate: k as u64 });
        }
        Ok(EmpiricalDistribution {
            values: sorted_copy(&values),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `#{T^(k) ≤ x}`.
    pub fn count_le(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }

    /// `#{T^(k) ≥ x}`.
    pub fn count_ge(&self, x: f64) -> usize {
        self.values.len() - self.values.partition_point(|&v| v < x)
    }

    /// `F_D(x) = D⁻¹ #{T^(k) ≤ x}`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.len() as f64
    }

    /// Linearly interpolated order statistic.
    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.values, p)
    }
}

pub fn cdf_eval(dist: &EmpiricalDistribution, x: f64) -> f64 {
    dist.cdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sidedness {
    TwoSided,
    UpperTail,
    LowerTail,
}

/// `Raw` uses `F_D` directly; `PlusOne` counts the observed statistic among the draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Correction {
    Raw,
    #[default]
    PlusOne,
}

pub fn p_value(dist: &EmpiricalDistribution, t: f64, sidedness: Sidedness, correction: Correction) -> f64 {
    match correction {
        Correction::Raw => {
            let f = dist.cdf(t);
            match sidedness {
                Sidedness::TwoSided => 2.0 * f.min(1.0 - f),
                Sidedness::UpperTail => 1.0 - f,
                Sidedness::LowerTail => f,
            }
        }
        Correction::PlusOne => {
            let d1 = (dist.len() + 1) as f64;
            let upper = (1 + dist.count_ge(t)) as f64 / d1;
            let lower = (1 + dist.count_le(t)) as f64 / d1;
            match sidedness {
                Sidedness::TwoSided => (2.0 * upper.min(lower)).min(1.0),
                Sidedness::UpperTail => upper,
                Sidedness::LowerTail => lower,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TestKind {
    TwoSampleFid,
    FeatureSignificance,
    ConditionalCoherence,
    Pivotal,
}

impl TestKind {
    pub fn default_sidedness(self) -> Sidedness {
        match self {
            TestKind::TwoSampleFid | TestKind::Pivotal => Sidedness::TwoSided,
            TestKind::FeatureSignificance => Sidedness::LowerTail,
            TestKind::ConditionalCoherence => Sidedness::UpperTail,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestKind::TwoSampleFid => "two-sample FID test",
            TestKind::FeatureSignificance => "feature-significance test",
            TestKind::ConditionalCoherence => "conditional-coherence test",
            TestKind::Pivotal => "pivotal test",
        }
    }
}

/// Settings shared by every test: synthesis, Monte Carlo size and p-value convention.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestConfig {
    pub pass: PassConfig,
    /// Monte Carlo size `D`.
    pub draws: usize,
    pub correction: Correction,
    /// `None` selects the test's own default.
    pub sidedness: Option<Sidedness>,
}

impl TestConfig {
    pub fn new(mc_seed: u64, draws: usize) -> Self {
        TestConfig {
            pass: PassConfig::new(mc_seed),
            draws,
            correction: Correction::PlusOne,
            sidedness: None,
        }
    }

    pub fn with_correction(mut self, correction: Correction) -> Self {
        self.correction = correction;
        self
    }

    pub fn with_sidedness(mut self, sidedness: Sidedness) -> Self {
        self.sidedness = Some(sidedness);
        self
    }

    fn check(&self) -> Result<()> {
        if self.draws < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 Monte Carlo draws, got {}",
                self.draws
            )));
        }
        self.pass.perturbation.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestReport {
    pub test: TestKind,
    pub statistic: f64,
    pub null_draws: EmpiricalDistribution,
    pub p_value: f64,
    pub sidedness: Sidedness,
    pub correction: Correction,
    pub config: TestConfig,
    /// Set when the statistic is degenerate by construction; the p-value is then 1.
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl TestReport {
    fn build(test: TestKind, statistic: f64, null_draws: EmpiricalDistribution, config: &TestConfig) -> Self {
        let sidedness = config.sidedness.unwrap_or(test.default_sidedness());
        let p = p_value(&null_draws, statistic, sidedness, config.correction);
        TestReport {
            test,
            statistic,
            null_draws,
            p_value: p,
            sidedness,
            correction: config.correction,
            config: *config,
            degenerate: false,
            notes: Vec::new(),
        }
    }

    /// Recomputes the p-value from the stored draws and compares bit for bit.
    pub fn verify(&self) -> bool {
        let p = if self.degenerate {
            1.0
        } else {
            p_value(&self.null_draws, self.statistic, self.sidedness, self.correction)
        };
        p.to_bits() == self.p_value.to_bits() && self.null_draws.len() == self.config.draws
    }
}

fn null_draws(
    draws: usize,
    first_replicate: u64,
    mut one: impl FnMut(u64) -> Result<f64>,
) -> Result<EmpiricalDistribution> {
    let mut values = Vec::with_capacity(draws);
    for k in 0..draws as u64 {
        let replicate = first_replicate + k;
        let t = one(replicate)?;
        if !t.is_finite() {
            return Err(Error::NonFiniteStatistic { replicate });
        }
        values.push(t);
    }
    EmpiricalDistribution::new(values)
}

fn summary_for(sample: &Matrix, what: &str) -> Result<GaussianSummary> {
    let d = sample.cols();
    if sample.rows() < d + 2 {
        return Err(Error::invalid(format!(
            "{what} needs at least {} rows, got {}",
            d + 2,
            sample.rows()
        )));
    }
    gaussian_summary(sample)
}

/// Tests `FID(P₀, P) = 0` with `P₀` represented by `model`.
///
/// `model` must be fitted on data independent of `reference`.
pub fn test_two_sample_fid(
    reference: &Matrix,
    candidate: &Matrix,
    model: &GeneratorModel,
    cfg: &TestConfig,
) -> Result<TestReport> {
    cfg.check()?;
    reference.check_finite()?;
    candidate.check_finite()?;
    if reference.cols() != candidate.cols() || reference.cols() != model.dim() {
        return Err(Error::shape(
            format!("{} columns", model.dim()),
            format!("{} and {}", reference.cols(), candidate.cols()),
        ));
    }
    let ref_summary = summary_for(reference, "reference")?;
    let cand_summary = summary_for(candidate, "candidate")?;
    let t = fid(&ref_summary, &cand_summary)?;
    let n = candidate.rows();
    let mut session = PassSession::new(model, cfg.pass);
    let draws = null_draws(cfg.draws, 0, |k| {
        let z = session.sample(n, k)?;
        fid(&ref_summary, &gaussian_summary(&z)?)
    })?;
    let mut report = TestReport::build(TestKind::TwoSampleFid, t, draws, cfg);
    report
        .notes
        .push("generator must be fitted on data independent of the reference sample".into());
    Ok(report)
}

/// Binary-labelled data; labels are 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl LabeledData {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::shape(format!("{} labels", x.rows()), format!("{}", y.len())));
        }
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!("label {} at row {i} is not 0 or 1", y[i])));
        }
        x.check_finite()?;
        Ok(LabeledData { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Splits a joint sample whose column 0 is the label; labels are `1` where the value exceeds 0.5.
    pub fn from_joint(joint: &Matrix) -> Result<Self> {
        if joint.cols() < 2 {
            return Err(Error::invalid(
                "joint sample needs a label column and at least one feature",
            ));
        }
        let y = joint.iter_rows().map(|r| if r[0] > 0.5 { 1.0 } else { 0.0 }).collect();
        let cols: Vec<usize> = (1..joint.cols()).collect();
        LabeledData::new(joint.select_cols(&cols), y)
    }

    /// The joint matrix `(Y, X)` used to fit a generator.
    pub fn to_joint(&self) -> Matrix {
        Matrix::column_vector(&self.y)
            .hstack(&self.x)
            .expect("row counts agree")
    }
}

/// Full-batch gradient descent settings for the built-in logistic classifier.
pub const LOGISTIC_ITERATIONS: usize = 500;
pub const LOGISTIC_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    center: Vec<f64>,
    /// Zero marks a column treated as constant.
    inv_scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let mut center = Vec::with_capacity(x.cols());
        let mut inv_scale = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let c = x.column(j);
            let m = mean(&c);
            let sd = if c.len() > 1 { sample_sd(&c) } else { 0.0 };
            let size = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            center.push(m);
            inv_scale.push(if sd > 1e-9 * (1.0 + size) { 1.0 / sd } else { 0.0 });
        }
        Standardizer { center, inv_scale }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        x.map_rows(x.cols(), |r, o| {
            for j in 0..r.len() {
                o[j] = (r[j] - self.center[j]) * self.inv_scale[j];
            }
        })
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Logistic regression with intercept, weights initialised at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl LogisticModel {
    pub fn fit(x: &Matrix, y: &[f64]) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut grad = vec![0.0; d];
        let scale = LOGISTIC_STEP / n.max(1) as f64;
        for _ in 0..LOGISTIC_ITERATIONS {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (row, &yi) in x.iter_rows().zip(y) {
                let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let r = sigmoid(z) - yi;
                gb += r;
                grad.iter_mut().zip(row).for_each(|(g, a)| *g += r * a);
            }
            b -= scale * gb;
            w.iter_mut().zip(&grad).for_each(|(wj, g)| *wj -= scale * g);
        }
        LogisticModel {
            intercept: b,
            weights: w,
        }
    }

    pub fn logit(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>()
    }

    /// Per-example log-loss.
    pub fn losses(&self, x: &Matrix, y: &[f64]) -> Vec<f64> {
        x.iter_rows()
            .zip(y)
            .map(|(r, &yi)| {
                let z = self.logit(r);
                softplus(z) - yi * z
            })
            .collect()
    }
}

fn zero_columns(x: &Matrix, masked: &[usize]) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        for &j in masked {
            row[j] = 0.0;
        }
    }
    out
}

/// Studentized paired risk difference `mean(d)/(sd(d)/√n)`, `d_i = loss_i(f̂) − loss_i(f̂_M)`.
/// Returns `None` when every `d_i` is zero.
pub fn feature_statistic(train: &LabeledData, inference: &LabeledData, masked: &[usize]) -> Option<f64> {
    let st = Standardizer::fit(&train.x);
    let xt = st.apply(&train.x);
    let xi = st.apply(&inference.x);
    let xt_m = zero_columns(&xt, masked);
    let xi_m = zero_columns(&xi, masked);
    let full = LogisticModel::fit(&xt, &train.y);
    let reduced = LogisticModel::fit(&xt_m, &train.y);
    let diffs: Vec<f64> = full
        .losses(&xi, &inference.y)
        .into_iter()
        .zip(reduced.losses(&xi_m, &inference.y))
        .map(|(a, b)| a - b)
        .collect();
    if diffs.iter().all(|&v| v == 0.0) {
        return None;
    }
    let se = sample_sd(&diffs) / libm::sqrt(diffs.len() as f64);
    Some(mean(&diffs) / se)
}

/// Tests whether the masked features lower the risk of a logistic classifier.
///
/// `model` is a joint generator over `(Y, X)` with the label in column 0.
pub fn test_feature_significance(
    train: &LabeledData,
    inference: &LabeledData,
    masked_features: &[usize],
    model: &GeneratorModel,
    cfg: &TestConfig,
) -> Result<TestReport> {
    cfg.check()?;
    let d = train.x.cols();
    if inference.x.cols() != d || model.dim() != d + 1 {
        return Err(Error::shape(
            format!("{d} features and a {}-dimensional joint model", d + 1),
            format!(
                "{} features and a {}-dimensional model",
                inference.x.cols(),
                model.dim()
            ),
        ));
    }
    if masked_features.is_empty() {
        return Err(Error::invalid("mask is empty"));
    }
    if let Some(&j) = masked_features.iter().find(|&&j| j >= d) {
        return Err(Error::invalid(format!(
            "masked feature {j} out of range for {d} features"
        )));
    }
    let ones = train.y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == train.len() {
        return Err(Error::invalid("training labels contain a single class"));
    }
    if inference.len() < 2 {
        return Err(Error::invalid("inference sample needs at least 2 rows"));
    }

    let observed = feature_statistic(train, inference, masked_features);
    let (n_train, n_inf) = (train.len(), inference.len());
    let mut session = PassSession::new(model, cfg.pass);
    let draws = null_draws(cfg.draws, 0, |k| {
        let joint = session.sample(n_train + n_inf, k)?;
        let syn_train = LabeledData::from_joint(&joint.slice_rows(0, n_train))?;
        let syn_inf = LabeledData::from_joint(&joint.slice_rows(n_train, n_train + n_inf))?;
        Ok(feature_statistic(&syn_train, &syn_inf, masked_features).unwrap_or(0.0))
    })?;
    let mut report = TestReport::build(TestKind::FeatureSignificance, observed.unwrap_or(0.0), draws, cfg);
    if observed.is_none() {
        report.degenerate = true;
        report.p_value = 1.0;
        report.notes.push("paired loss differences are identically zero".into());
    }
    report
        .notes
        .push("classifier: logistic regression, 500 gradient steps of size 0.1 on standardized features".into());
    Ok(report)
}

/// Tests whether two groups are as close as two groups drawn from their conditional generators.
///
/// Null draws: for each generator `k` and replicate `d`, `n₁ + n₂` rows are drawn from
/// generator `k` (replicate index `k·D + d`), split into sizes `n₁, n₂` and compared by FID.
pub fn test_conditional_coherence(
    group1: &Matrix,
    group2: &Matrix,
    model1: &GeneratorModel,
    model2: &GeneratorModel,
    cfg: &TestConfig,
) -> Result<TestReport> {
    cfg.check()?;
    let d = group1.cols();
    if group2.cols() != d || model1.dim() != d || model2.dim() != d {
        return Err(Error::shape(
            format!("{d} columns throughout"),
            format!("{} and models of {} and {}", group2.cols(), model1.dim(), model2.dim()),
        ));
    }
    group1.check_finite()?;
    group2.check_finite()?;
    let t = fid(&summary_for(group1, "group 1")?, &summary_for(group2, "group 2")?)?;
    let (n1, n2) = (group1.rows(), group2.rows());
    let dd = cfg.draws as u64;
    let mut values = Vec::with_capacity(2 * cfg.draws);
    for (k, model) in [model1, model2].into_iter().enumerate() {
        let dist = null_draws(cfg.draws, k as u64 * dd, |rep| {
            let z = pass_sample(
                model,
                n1 + n2,
                &PassConfig {
                    rank_match: false,
                    ..cfg.pass
                },
                rep,
            )?;
            fid(
                &gaussian_summary(&z.slice_rows(0, n1))?,
                &gaussian_summary(&z.slice_rows(n1, n1 + n2))?,
            )
        })?;
        values.extend_from_slice(dist.values());
    }
    let mut echo = *cfg;
    echo.draws = 2 * cfg.draws;
    Ok(TestReport::build(
        TestKind::ConditionalCoherence,
        t,
        EmpiricalDistribution::new(values)?,
        &echo,
    ))
}

/// How the generating parameter `θ̃` is estimated from the inference sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PivotEstimator {
    /// Maximum likelihood: sample mean and `√((n−1)/n)`·sd.
    #[default]
    MaximumLikelihood,
    /// `(mean + shift, sd·scale)`; a deliberately wrong plug-in.
    Biased { shift: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Pivot {
    /// `√n (θ̂ − θ)/σ̂` for a Gaussian mean.
    StudentizedMean,
    /// `√n (θ̂ − θ)/σ` with `σ` known.
    KnownSigmaMean { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PivotalOptions {
    pub pivot: Pivot,
    pub estimator: PivotEstimator,
    /// Confidence level of the interval is `1 − alpha`.
    pub alpha: f64,
    /// Null value of a test of `H₀: θ = θ₀`.
    pub theta0: Option<f64>,
}

impl Default for PivotalOptions {
    fn default() -> Self {
        PivotalOptions {
            pivot: Pivot::StudentizedMean,
            estimator: PivotEstimator::MaximumLikelihood,
            alpha: 0.05,
            theta0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PivotalResult {
    pub estimate: f64,
    /// `σ̂` (or the known `σ`) used to scale the pivot.
    pub scale: f64,
    pub interval: ConfidenceInterval,
    pub pivot_draws: EmpiricalDistribution,
    pub report: Option<TestReport>,
}

/// Simulates the pivot from PASS samples of a Gaussian fitted to the inference sample itself.
pub fn pivotal_inference(inference: &Matrix, opts: &PivotalOptions, cfg: &TestConfig) -> Result<PivotalResult> {
    cfg.check()?;
    if inference.cols() != 1 {
        return Err(Error::UnsupportedDimension {
            dim: inference.cols(),
            max: 1,
        });
    }
    let n = inference.rows();
    if n < 3 {
        return Err(Error::invalid(format!(
            "pivotal inference needs at least 3 rows, got {n}"
        )));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    inference.check_finite()?;
    let x = inference.as_slice();
    let theta_hat = mean(x);
    let sd = sample_sd(x);
    let (scale, known) = match opts.pivot {
        Pivot::StudentizedMean => (sd, None),
        Pivot::KnownSigmaMean { sigma } => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::invalid(format!("known sigma must be positive, got {sigma}")));
            }
            (sigma, Some(sigma))
        }
    };
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::numeric("inference sample has zero spread"));
    }
    let (mu_tilde, sigma_tilde) = match (known, opts.estimator) {
        (Some(s), PivotEstimator::MaximumLikelihood) => (theta_hat, s),
        (Some(s), PivotEstimator::Biased { shift, .. }) => (theta_hat + shift, s),
        (None, PivotEstimator::MaximumLikelihood) => (theta_hat, sd * libm::sqrt((n - 1) as f64 / n as f64)),
        (None, PivotEstimator::Biased { shift, scale }) => (theta_hat + shift, sd * scale),
    };
    if !(sigma_tilde > 0.0 && sigma_tilde.is_finite() && mu_tilde.is_finite()) {
        return Err(Error::invalid(
            "plug-in estimate must have a finite mean and positive scale",
        ));
    }
    let model = GeneratorModel::from(GaussianTransport::new(vec![mu_tilde], &[sigma_tilde * sigma_tilde])?);
    let root_n = libm::sqrt(n as f64);
    let mut session = PassSession::new(&model, cfg.pass);
    let draws = null_draws(cfg.draws, 0, |k| {
        let z = session.sample(n, k)?;
        let v = z.as_slice();
        let s = known.unwrap_or_else(|| sample_sd(v));
        Ok(root_n * (mean(v) - mu_tilde) / s)
    })?;
    let a = opts.alpha;
    let half = scale / root_n;
    let interval = ConfidenceInterval {
        lower: theta_hat - draws.quantile(1.0 - a / 2.0) * half,
        upper: theta_hat - draws.quantile(a / 2.0) * half,
        level: 1.0 - a,
    };
    let report = opts
        .theta0
        .map(|theta0| TestReport::build(TestKind::Pivotal, (theta_hat - theta0) / half, draws.clone(), cfg));
    Ok(PivotalResult {
        estimate: theta_hat,
        scale,
        interval,
        pivot_draws: draws,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cdf_counting() {
        let d = dist(&[3.0, 1.0, 2.0]);
        assert_eq!(d.values(), &[1.0, 2.0, 3.0]);
        assert!((cdf_eval(&d, 2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.cdf(0.5), 0.0);
        assert_eq!(d.cdf(3.0), 1.0);
        assert_eq!(dist(&[1.0, 2.0, 2.0, 3.0]).cdf(2.0), 0.75);
        assert!(EmpiricalDistribution::new(vec![1.0]).is_err());
        assert!(EmpiricalDistribution::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn p_value_examples() {
        let d = dist(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p_value(&d, 2.5, Sidedness::UpperTail, Correction::Raw), 0.5);
        assert_eq!(p_value(&d, 2.5, Sidedness::TwoSided, Correction::Raw), 1.0);
        assert_eq!(p_value(&d, 9.0, Sidedness::UpperTail, Correction::PlusOne), 0.2);
        assert_eq!(p_value(&d, 9.0, Sidedness::UpperTail, Correction::Raw), 0.0);
        assert_eq!(p_value(&d, 0.0, Sidedness::LowerTail, Correction::PlusOne), 0.2);
        assert_eq!(p_value(&d, 9.0, Sidedness::TwoSided, Correction::PlusOne), 0.4);
        let odd = dist(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        // ties at the median count on both sides under PlusOne
        assert_eq!(p_value(&odd, 3.0, Sidedness::TwoSided, Correction::PlusOne), 1.0);
    }

    #[test]
    fn upper_p_is_monotone_and_bounded() {
        let d = dist(&[0.3, -1.0, 2.0, 2.0, 5.0, 0.0]);
        let mut prev = f64::INFINITY;
        for k in -30..=30 {
            let p = p_value(&d, k as f64 * 0.25, Sidedness::UpperTail, Correction::PlusOne);
            assert!(p <= prev);
            assert!((1.0 / 7.0..=1.0).contains(&p));
            prev = p;
        }
    }

    fn gaussian(n: usize, d: usize, seed: u64, shift: f64) -> Matrix {
        let mut rng = stream(seed, Purpose::User, 0);
        let mut m = GeneratorModel::from(GaussianTransport::standard(d)).sample(n, &mut rng);
        for i in 0..n {
            m.row_mut(i)[0] += shift;
        }
        m
    }

    #[test]
    fn fid_test_extremes() {
        let model = GeneratorModel::from(GaussianTransport::standard(2));
        let reference = gaussian(100, 2, 1, 0.0);
        let far = gaussian(100, 2, 2, 10.0);
        let cfg = TestConfig::new(7, 50);
        let r = test_two_sample_fid(&reference, &far, &model, &cfg).unwrap();
        assert_eq!(r.p_value, 2.0 / 51.0);
        assert!(r.verify());
        let up = test_two_sample_fid(&reference, &far, &model, &cfg.with_sidedness(Sidedness::UpperTail)).unwrap();
        assert_eq!(up.p_value, 1.0 / 51.0);

        let tiny = TestConfig::new(7, 2);
        let r = test_two_sample_fid(&reference, &gaussian(100, 2, 3, 0.0), &model, &tiny).unwrap();
        assert!([1.0 / 3.0, 2.0 / 3.0, 1.0].contains(&r.p_value));
        assert!(test_two_sample_fid(&reference.slice_rows(0, 3), &far, &model, &cfg).is_err());
        assert!(test_two_sample_fid(&reference, &far, &model, &TestConfig::new(7, 1)).is_err());
    }

    #[test]
    fn fid_test_is_reproducible() {
        let model = GeneratorModel::from(GaussianTransport::standard(2));
        let a = gaussian(60, 2, 4, 0.0);
        let b = gaussian(60, 2, 5, 0.0);
        let cfg = TestConfig::new(3, 20);
        assert_eq!(
            test_two_sample_fid(&a, &b, &model, &cfg).unwrap(),
            test_two_sample_fid(&a, &b, &model, &cfg).unwrap()
        );
    }

    #[test]
    fn coherence_extremes_and_unequal_sizes() {
        let m1 = GeneratorModel::from(GaussianTransport::standard(2));
        let m2 = GeneratorModel::from(GaussianTransport::new(vec![5.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap());
        let g1 = gaussian(80, 2, 6, 0.0);
        let g2 = gaussian(50, 2, 7, 5.0);
        let cfg = TestConfig::new(1, 30);
        let r = test_conditional_coherence(&g1, &g2, &m1, &m2, &cfg).unwrap();
        assert_eq!(r.null_draws.len(), 60);
        assert_eq!(r.p_value, 1.0 / 61.0);
        assert!(r.verify());
        assert!(test_conditional_coherence(&g1.slice_rows(0, 3), &g2, &m1, &m2, &cfg).is_err());
    }

    fn logistic_data(n: usize, seed: u64, coef: f64) -> LabeledData {
        let x = gaussian(n, 2, seed, 0.0);
        let mut rng = stream(seed, Purpose::User, 1);
        let y = x
            .iter_rows()
            .map(|r| {
                if crate::rng::open_unit(&mut rng) < sigmoid(coef * r[0]) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        LabeledData::new(x, y).unwrap()
    }

    #[test]
    fn logistic_fit_recovers_direction() {
        let d = logistic_data(2000, 8, 2.0);
        let m = LogisticModel::fit(&Standardizer::fit(&d.x).apply(&d.x), &d.y);
        assert!(m.weights[0] > 1.0 && m.weights[1].abs() < 0.2, "{:?}", m.weights);
    }

    #[test]
    fn feature_test_preconditions_and_degenerate_mask() {
        let train = logistic_data(100, 9, 1.5);
        let inf = logistic_data(100, 10, 1.5);
        let model = crate::generators::fit_gaussian(&train.to_joint(), 1e-6).unwrap();
        let cfg = TestConfig::new(2, 10);
        assert!(test_feature_significance(&train, &inf, &[], &model, &cfg).is_err());
        assert!(test_feature_significance(&train, &inf, &[2], &model, &cfg).is_err());
        let single = LabeledData::new(train.x.clone(), vec![1.0; 100]).unwrap();
        assert!(test_feature_significance(&single, &inf, &[0], &model, &cfg).is_err());

        let zero = |d: &LabeledData| LabeledData::new(zero_columns(&d.x, &[1]), d.y.clone()).unwrap();
        let (zt, zi) = (zero(&train), zero(&inf));
        let r = test_feature_significance(&zt, &zi, &[1], &model, &cfg).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.verify());

        let r = test_feature_significance(&train, &inf, &[0], &model, &cfg).unwrap();
        assert!(r.statistic < -2.0, "{}", r.statistic);
        assert_eq!(r.sidedness, Sidedness::LowerTail);
        assert!(r.verify());
    }

    #[test]
    fn pivotal_interval_and_test() {
        let x = gaussian(20, 1, 11, 3.0);
        let cfg = TestConfig::new(4, 999);
        let opts = PivotalOptions {
            theta0: Some(3.0),
            ..Default::default()
        };
        let r = pivotal_inference(&x, &opts, &cfg).unwrap();
        let ci = r.interval;
        assert!(ci.lower < r.estimate && r.estimate < ci.upper);
        assert_eq!(ci.level, 0.95);
        let rep = r.report.unwrap();
        assert!(rep.verify());
        assert!(rep.p_value > 0.0 && rep.p_value <= 1.0);

        let known = PivotalOptions {
            pivot: Pivot::KnownSigmaMean { sigma: 1.0 },
            ..Default::default()
        };
        let cfg = TestConfig::new(4, 20_000);
        let r = pivotal_inference(&x, &known, &cfg).unwrap();
        let z = 1.959_963_984_540_054 / libm::sqrt(20.0);
        assert!((r.interval.lower - (r.estimate - z)).abs() < 0.03);
        assert!((r.interval.upper - (r.estimate + z)).abs() < 0.03);

        assert!(pivotal_inference(&x.slice_rows(0, 2), &opts, &cfg).is_err());
        assert!(pivotal_inference(&gaussian(10, 2, 1, 0.0), &opts, &cfg).is_err());
    }
}
