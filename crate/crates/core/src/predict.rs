//! Prediction intervals from conditional PASS draws, a split-conformal
//! baseline, and per-point coverage evaluation against a known regression law.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::generators::{fit_copula, fit_gaussian, GeneratorModel, TransportKind, DEFAULT_RIDGE};
use crate::matrix::Matrix;
use crate::pai::Standardizer;
use crate::rng::{open_unit, permutation, standard_normal, stream, Purpose};
use crate::special::{mean, quantile_sorted, sorted_copy};

/// Number of covariates in the simulation model.
pub const N_FEATURES: usize = 7;

/// Continuous responses with covariates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegressionData {
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl RegressionData {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::shape(format!("{} responses", x.rows()), format!("{}", y.len())));
        }
        x.check_finite()?;
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        Ok(RegressionData { x, y })
    }

    /// Splits a matrix whose column 0 is the response.
    pub fn from_joint(joint: &Matrix) -> Result<Self> {
        if joint.cols() < 2 {
            return Err(Error::invalid("joint data needs a response and at least one covariate"));
        }
        let cols: Vec<usize> = (1..joint.cols()).collect();
        RegressionData::new(joint.select_cols(&cols), joint.column(0))
    }

    /// `(Y, X_1, …, X_p)`.
    pub fn to_joint(&self) -> Matrix {
        Matrix::column_vector(&self.y)
            .hstack(&self.x)
            .expect("row counts agree")
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> RegressionData {
        RegressionData {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// `E[Y | X = x] = 8 + x₁² + x₂x₃ + cos x₄ + exp(x₅x₆) + 0.1x₇`.
pub fn response_mean(x: &[f64]) -> f64 {
    8.0 + x[0] * x[0] + x[1] * x[2] + libm::cos(x[3]) + libm::exp(x[4] * x[5]) + 0.1 * x[6]
}

/// `sd(Y | X = x) = 0.4 x₁`.
pub fn noise_sd(x: &[f64]) -> f64 {
    0.4 * x[0]
}

pub fn draw_response<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> f64 {
    response_mean(x) + noise_sd(x) * standard_normal(rng)
}

/// `X ~ Uniform(0, 1)⁷`, `Y = response_mean(X) + 0.4X₁ε`.
pub fn simulate_regression_data(n: usize, seed: u64) -> Result<RegressionData> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut rng = stream(seed, Purpose::Simulation, 0);
    let mut x = Matrix::zeros(n, N_FEATURES);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row_mut(i);
        row.iter_mut().for_each(|v| *v = open_unit(&mut rng));
        y.push(draw_response(row, &mut rng));
    }
    Ok(RegressionData { x, y })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 − α`.
    pub level: f64,
    pub center_estimate: f64,
    pub mc_draws_used: usize,
}

impl PredictionInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// `m` draws of `Y | X = x` from a joint model over `(Y, X)`; the stream is `(mc_seed, point)`.
pub fn conditional_sample(model: &GeneratorModel, x: &[f64], m: usize, mc_seed: u64, point: u64) -> Result<Vec<f64>> {
    let cond = model.condition_first(x)?;
    let mut rng = stream(mc_seed, Purpose::Conditional, point);
    Ok((0..m).map(|_| cond.draw(&mut rng)).collect())
}

/// Empirical `α/2` and `1 − α/2` quantiles of `m` conditional draws.
pub fn pai_interval(
    model: &GeneratorModel,
    x: &[f64],
    alpha: f64,
    m: usize,
    mc_seed: u64,
    point: u64,
) -> Result<PredictionInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let min_draws = libm::ceil(4.0 / alpha) as usize;
    if m < min_draws {
        return Err(Error::invalid(format!(
            "need at least {min_draws} draws at alpha = {alpha}, got {m}"
        )));
    }
    let draws = sorted_copy(&conditional_sample(model, x, m, mc_seed, point)?);
    Ok(PredictionInterval {
        lower: quantile_sorted(&draws, alpha / 2.0),
        upper: quantile_sorted(&draws, 1.0 - alpha / 2.0),
        level: 1.0 - alpha,
        center_estimate: quantile_sorted(&draws, 0.5),
        mc_draws_used: m,
    })
}

/// Mean response of the `k` nearest rows, Euclidean distance on standardized covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnRegressor {
    k: usize,
    scaler: Standardizer,
    x: Matrix,
    y: Vec<f64>,
}

impl KnnRegressor {
    pub fn fit(x: &Matrix, y: &[f64], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if x.rows() < k || x.rows() != y.len() {
            return Err(Error::invalid(format!(
                "k-NN needs at least k = {k} rows with responses, got {}",
                x.rows()
            )));
        }
        let scaler = Standardizer::fit(x);
        Ok(KnnRegressor {
            k,
            x: scaler.apply(x),
            y: y.to_vec(),
            scaler,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn with_responses(&self, y: Vec<f64>) -> Self {
        KnnRegressor {
            k: self.k,
            scaler: self.scaler.clone(),
            x: self.x.clone(),
            y,
        }
    }

    fn scaled(&self, q: &[f64]) -> Vec<f64> {
        self.scaler
            .apply(&Matrix::from_vec(1, q.len(), q.to_vec()).expect("one row"))
            .into_vec()
    }

    fn neighbour_mean(&self, q: &[f64], skip: Option<usize>) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .filter(|&(i, _)| Some(i) != skip)
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        dist[..k].iter().map(|&(_, i)| self.y[i]).sum::<f64>() / k as f64
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.neighbour_mean(&self.scaled(x), None)
    }

    /// Prediction at training row `i` with that row left out.
    pub fn predict_loo(&self, i: usize) -> f64 {
        self.neighbour_mean(self.x.row(i), Some(i))
    }
}

/// Lower bound on `σ̂(x)` in the conformal score.
pub const SCORE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalModel {
    pub point_model: KnnRegressor,
    /// k-NN regression of leave-one-out absolute residuals on the modelling split.
    pub scale_model: KnnRegressor,
    pub calibration_scores: Vec<f64>,
    pub alpha: f64,
    pub q_hat: f64,
}

/// Split conformal with normalized scores `|y − ŷ(x)| / max(σ̂(x), 1e−6)`.
pub fn conformal_fit(
    train: &RegressionData,
    calibration_fraction: f64,
    alpha: f64,
    k: usize,
    seed: u64,
) -> Result<ConformalModel> {
    if !(calibration_fraction > 0.0 && calibration_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "calibration fraction must lie in (0, 1), got {calibration_fraction}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let n = train.len();
    let n_cal = libm::round(n as f64 * calibration_fraction) as usize;
    if n_cal < 20 {
        return Err(Error::invalid(format!(
            "calibration split has {n_cal} rows, need at least 20"
        )));
    }
    if n - n_cal < k + 1 {
        return Err(Error::invalid(format!(
            "modelling split has {} rows, need at least k + 1 = {}",
            n - n_cal,
            k + 1
        )));
    }
    let order = permutation(&mut stream(seed, Purpose::Split, 0), n);
    let model_part = train.select(&order[n_cal..]);
    let cal_part = train.select(&order[..n_cal]);

    let point_model = KnnRegressor::fit(&model_part.x, &model_part.y, k)?;
    let residuals: Vec<f64> = (0..model_part.len())
        .map(|i| libm::fabs(model_part.y[i] - point_model.predict_loo(i)))
        .collect();
    let scale_model = point_model.with_responses(residuals);

    let scores: Vec<f64> = cal_part
        .x
        .iter_rows()
        .zip(&cal_part.y)
        .map(|(x, &y)| {
            let xs = point_model.scaled(x);
            let fit = point_model.neighbour_mean(&xs, None);
            let scale = scale_model.neighbour_mean(&xs, None).max(SCORE_FLOOR);
            libm::fabs(y - fit) / scale
        })
        .collect();
    let scores = sorted_copy(&scores);
    let rank = (libm::ceil((n_cal + 1) as f64 * (1.0 - alpha)) as usize).clamp(1, n_cal);
    let q_hat = scores[rank - 1];
    Ok(ConformalModel {
        point_model,
        scale_model,
        calibration_scores: scores,
        alpha,
        q_hat,
    })
}

/// `ŷ(x) ± q̂ σ̂(x)`.
pub fn conformal_interval(model: &ConformalModel, x: &[f64]) -> PredictionInterval {
    let xs = model.point_model.scaled(x);
    let fit = model.point_model.neighbour_mean(&xs, None);
    let half = model.q_hat * model.scale_model.neighbour_mean(&xs, None).max(SCORE_FLOOR);
    PredictionInterval {
        lower: fit - half,
        upper: fit + half,
        level: 1.0 - model.alpha,
        center_estimate: fit,
        mc_draws_used: 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageReport {
    pub per_point: Vec<f64>,
    pub mean_coverage: f64,
    pub median_coverage: f64,
    pub mean_length: f64,
    pub median_length: f64,
}

/// Fraction of each point's truth draws that fall inside its interval.
pub fn coverage_report(intervals: &[PredictionInterval], truths: &[Vec<f64>]) -> Result<CoverageReport> {
    if intervals.len() != truths.len() || intervals.is_empty() {
        return Err(Error::shape(
            format!("{} truth sets", intervals.len()),
            format!("{}", truths.len()),
        ));
    }
    let mut per_point = Vec::with_capacity(intervals.len());
    for (iv, t) in intervals.iter().zip(truths) {
        if t.is_empty() {
            return Err(Error::invalid("every point needs truth draws"));
        }
        per_point.push(t.iter().filter(|&&y| iv.contains(y)).count() as f64 / t.len() as f64);
    }
    let lengths: Vec<f64> = intervals.iter().map(|iv| iv.length()).collect();
    Ok(CoverageReport {
        mean_coverage: mean(&per_point),
        median_coverage: quantile_sorted(&sorted_copy(&per_point), 0.5),
        mean_length: mean(&lengths),
        median_length: quantile_sorted(&sorted_copy(&lengths), 0.5),
        per_point,
    })
}

/// Fraction of points where interval `a` is strictly shorter than interval `b`.
pub fn shorter_fraction(a: &[PredictionInterval], b: &[PredictionInterval]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(format!("{} intervals", a.len()), format!("{}", b.len())));
    }
    Ok(a.iter().zip(b).filter(|(p, q)| p.length() < q.length()).count() as f64 / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub alpha: f64,
    pub kind: TransportKind,
    /// Conditional draws per PAI interval.
    pub mc_draws: usize,
    /// Response draws per test point for coverage.
    pub truth_draws: usize,
    pub knn_k: usize,
    pub calibration_fraction: f64,
}

impl StudyConfig {
    pub fn new(seed: u64) -> Self {
        StudyConfig {
            seed,
            n_train: 3000,
            n_test: 200,
            alpha: 0.05,
            kind: TransportKind::CopulaTransport,
            mc_draws: 4000,
            truth_draws: 2000,
            knn_k: 25,
            calibration_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub test: RegressionData,
    pub pai: Vec<PredictionInterval>,
    pub conformal: Vec<PredictionInterval>,
    pub pai_coverage: CoverageReport,
    pub conformal_coverage: CoverageReport,
    /// Fraction of test points where the PAI interval is shorter.
    pub pai_shorter_fraction: f64,
}

pub fn fit_joint(train: &RegressionData, kind: TransportKind) -> Result<GeneratorModel> {
    let joint = train.to_joint();
    match kind {
        TransportKind::GaussianTransport => fit_gaussian(&joint, DEFAULT_RIDGE),
        TransportKind::CopulaTransport => fit_copula(&joint),
    }
}

/// Simulates `n_train + n_test` rows, fits both methods on the training rows
/// and evaluates per-point coverage on the test rows.
pub fn run_prediction_study(cfg: &StudyConfig) -> Result<StudyResult> {
    let data = simulate_regression_data(cfg.n_train + cfg.n_test, cfg.seed)?;
    let train_rows: Vec<usize> = (0..cfg.n_train).collect();
    let test_rows: Vec<usize> = (cfg.n_train..cfg.n_train + cfg.n_test).collect();
    let train = data.select(&train_rows);
    let test = data.select(&test_rows);

    let model = fit_joint(&train, cfg.kind)?;
    let conformal = conformal_fit(&train, cfg.calibration_fraction, cfg.alpha, cfg.knn_k, cfg.seed)?;

    let mut pai = Vec::with_capacity(cfg.n_test);
    let mut conf = Vec::with_capacity(cfg.n_test);
    let mut truths = Vec::with_capacity(cfg.n_test);
    for (i, x) in test.x.iter_rows().enumerate() {
        pai.push(pai_interval(&model, x, cfg.alpha, cfg.mc_draws, cfg.seed, i as u64)?);
        conf.push(conformal_interval(&conformal, x));
        let mut rng = stream(cfg.seed, Purpose::Truth, i as u64);
        truths.push(
            (0..cfg.truth_draws)
                .map(|_| draw_response(x, &mut rng))
                .collect::<Vec<_>>(),
        );
    }
    Ok(StudyResult {
        config: *cfg,
        pai_coverage: coverage_report(&pai, &truths)?,
        conformal_coverage: coverage_report(&conf, &truths)?,
        pai_shorter_fraction: shorter_fraction(&pai, &conf)?,
        test,
        pai,
        conformal: conf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GaussianTransport;
    use crate::special::{normal_quantile, sample_sd};
    use alloc::vec;

    #[test]
    fn response_examples() {
        assert_eq!(response_mean(&[0.0; 7]), 10.0);
        assert_eq!(noise_sd(&[0.0; 7]), 0.0);
        let x = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(response_mean(&x), 11.0);
        assert_eq!(noise_sd(&x), 0.4);
    }

    #[test]
    fn simulation_shape_and_determinism() {
        let a = simulate_regression_data(50, 3).unwrap();
        assert_eq!((a.x.rows(), a.x.cols(), a.y.len()), (50, 7, 50));
        assert!(a.x.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(a, simulate_regression_data(50, 3).unwrap());
        assert!(simulate_regression_data(0, 3).is_err());
        assert_eq!(RegressionData::from_joint(&a.to_joint()).unwrap(), a);
    }

    fn bivariate(rho: f64) -> GeneratorModel {
        GeneratorModel::from(GaussianTransport::new(vec![0.0, 0.0], &[1.0, rho, rho, 1.0]).unwrap())
    }

    #[test]
    fn conditional_moments_of_bivariate_normal() {
        let rho = 0.7;
        let draws = conditional_sample(&bivariate(rho), &[1.5], 100_000, 1, 0).unwrap();
        let m = mean(&draws);
        let s = sample_sd(&draws);
        let sd = libm::sqrt(1.0 - rho * rho);
        assert!((m - rho * 1.5).abs() < 4.0 * sd / libm::sqrt(1e5));
        assert!((s - sd).abs() < 0.01);
        assert_eq!(conditional_sample(&bivariate(rho), &[1.5], 1, 1, 0).unwrap().len(), 1);
    }

    #[test]
    fn independent_conditional_is_marginal() {
        let draws = conditional_sample(&bivariate(0.0), &[2.0], 10_000, 2, 0).unwrap();
        let (ks, _) = crate::metrics::ks_test_standard_gaussian(&draws).unwrap();
        assert!(ks < 0.02, "{ks}");
    }

    #[test]
    fn pai_interval_matches_conditional_quantiles() {
        let rho = 0.5;
        let m = 20_000;
        let iv = pai_interval(&bivariate(rho), &[-1.0], 0.05, m, 3, 7).unwrap();
        let (mu, sd) = (-rho, libm::sqrt(1.0 - rho * rho));
        let q = normal_quantile(0.975);
        // SE of a sample quantile: √(p(1−p)/m)/f(q)
        let se = libm::sqrt(0.025 * 0.975 / m as f64) / (crate::special::normal_pdf(q) / sd);
        assert!((iv.lower - (mu - q * sd)).abs() < 3.0 * se);
        assert!((iv.upper - (mu + q * sd)).abs() < 3.0 * se);
        assert!((iv.center_estimate - mu).abs() < 0.03);
        let narrow = pai_interval(&bivariate(rho), &[-1.0], 0.5, m, 3, 7).unwrap();
        assert!(narrow.length() < iv.length());
        assert!(pai_interval(&bivariate(rho), &[0.0], 0.05, 79, 3, 7).is_err());
        assert!(pai_interval(&bivariate(rho), &[0.0], 0.0, 1000, 3, 7).is_err());
    }

    #[test]
    fn near_degenerate_conditional_collapses() {
        let m = GeneratorModel::from(GaussianTransport::new(vec![1.0, 0.0], &[1.0, 1.0, 1.0, 1.0 + 1e-12]).unwrap());
        let iv = pai_interval(&m, &[0.5], 0.05, 200, 1, 0).unwrap();
        assert!((iv.lower - 1.5).abs() < 1e-4 && (iv.upper - 1.5).abs() < 1e-4);
    }

    #[test]
    fn conformal_on_noiseless_data() {
        let n = 200;
        let x = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let y: Vec<f64> = (0..n).map(|i| 2.0 * i as f64).collect();
        let data = RegressionData::new(x, y).unwrap();
        let m = conformal_fit(&data, 0.25, 0.1, 1, 4).unwrap();
        let iv = conformal_interval(&m, &[10.0]);
        assert!(iv.contains(iv.center_estimate));
        assert!(m.calibration_scores.windows(2).all(|w| w[0] <= w[1]));
        assert!(m.calibration_scores.iter().all(|&s| s >= 0.0));
        assert_eq!(iv.center_estimate, 20.0);
        assert!(conformal_fit(&data, 0.05, 0.1, 1, 4).is_err());
        assert!(conformal_fit(&data, 1.0, 0.1, 1, 4).is_err());
    }

    #[test]
    fn conformal_interval_scales_with_q_hat() {
        let data = simulate_regression_data(400, 5).unwrap();
        let mut m = conformal_fit(&data, 0.25, 0.1, 10, 5).unwrap();
        let x = data.x.row(0).to_vec();
        let iv = conformal_interval(&m, &x);
        m.q_hat = 0.0;
        let point = conformal_interval(&m, &x);
        assert_eq!(point.lower, point.upper);
        assert_eq!(point.center_estimate, iv.center_estimate);
        m.q_hat = 2.0;
        let a = conformal_interval(&m, &x);
        m.q_hat = 4.0;
        let b = conformal_interval(&m, &x);
        assert!((b.length() - 2.0 * a.length()).abs() < 1e-12);
    }

    #[test]
    fn coverage_examples() {
        let truth: Vec<f64> = {
            let mut rng = stream(1, Purpose::User, 0);
            (0..20_000).map(|_| 3.0 + 2.0 * standard_normal(&mut rng)).collect()
        };
        let q = normal_quantile(0.975);
        let iv = PredictionInterval {
            lower: 3.0 - 2.0 * q,
            upper: 3.0 + 2.0 * q,
            level: 0.95,
            center_estimate: 3.0,
            mc_draws_used: 0,
        };
        let wide = PredictionInterval {
            lower: -100.0,
            upper: 100.0,
            ..iv
        };
        let point = PredictionInterval {
            lower: 3.1,
            upper: 3.1,
            ..iv
        };
        let r = coverage_report(&[iv, wide, point], &[truth.clone(), truth.clone(), truth]).unwrap();
        assert!((r.per_point[0] - 0.95).abs() < 0.02);
        assert_eq!(r.per_point[1], 1.0);
        assert_eq!(r.per_point[2], 0.0);
        assert_eq!(shorter_fraction(&[iv, point], &[wide, wide]).unwrap(), 1.0);
        assert!(coverage_report(&[iv], &[]).is_err());
    }

    #[test]
    fn small_study_runs() {
        let cfg = StudyConfig {
            n_train: 300,
            n_test: 10,
            mc_draws: 400,
            truth_draws: 200,
            ..StudyConfig::new(1)
        };
        let r = run_prediction_study(&cfg).unwrap();
        assert_eq!(r.pai.len(), 10);
        assert!(r
            .pai
            .iter()
            .chain(&r.conformal)
            .all(|iv| iv.lower <= iv.upper && iv.level == 0.95));
        assert!(r.pai_coverage.median_coverage > 0.5);
    }
}
