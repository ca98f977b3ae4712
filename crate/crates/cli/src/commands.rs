//! Subcommand arguments and their implementations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pai_core::generators::{fit_copula, fit_gaussian, pass_sample, pass_synthesize, PassConfig, TransportKind};
use pai_core::pai::{
    pivotal_inference, test_conditional_coherence, test_feature_significance, test_two_sample_fid, Correction,
    LabeledData, Pivot, PivotEstimator, PivotalOptions, Sidedness, TestConfig,
};
use pai_core::perturb::BaseDistribution;
use pai_core::predict::{
    conformal_fit, conformal_interval, pai_interval, run_prediction_study, simulate_regression_data, RegressionData,
    StudyConfig, N_FEATURES,
};
use pai_core::Matrix;
use serde::Serialize;

use crate::csv_io::{format_value, read_matrix, write_matrix_file};
use crate::error::{usage, CliError, CliResult, Context};
use crate::files::{
    read_model, read_report, write_json, CoverageFile, CoverageSummary, IntervalRecord, IntervalsFile, ModelFile,
    PivotalSection, ReportFile, COVERAGE_SCHEMA, INTERVALS_SCHEMA, MODEL_SCHEMA, REPORT_SCHEMA, SCHEMA_VERSION,
};

#[derive(Debug, Parser)]
#[command(name = "pai", version, about = "Perturbation-assisted synthesis and inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fit a generator to a holdout CSV.
    Fit(FitArgs),
    /// Draw a PASS sample from a fitted generator.
    Synthesize(SynthesizeArgs),
    /// Two-sample FID test of a candidate sample against a reference sample.
    TestFid(TestFidArgs),
    /// Test whether masked features lower a classifier's risk.
    TestFeature(TestFeatureArgs),
    /// Test whether two groups are as coherent as their conditional generators predict.
    TestCoherence(TestCoherenceArgs),
    /// Confidence interval and test for a Gaussian mean from its studentized pivot.
    TestPivotal(TestPivotalArgs),
    /// Prediction intervals for covariate rows.
    Predict(PredictArgs),
    /// Simulate the benchmark regression data (columns Y, X1..X7).
    Simulate(SimulateArgs),
    /// End-to-end prediction-interval study with coverage evaluation.
    Coverage(CoverageArgs),
    /// Recompute a report's p-value from its stored null draws.
    VerifyReport(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Gaussian,
    Copula,
}

impl From<KindArg> for TransportKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Gaussian => TransportKind::GaussianTransport,
            KindArg::Copula => TransportKind::CopulaTransport,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseArg {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionArg {
    Raw,
    PlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SidedArg {
    Two,
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Pai,
    Conformal,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Holdout CSV, one row per observation.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kind: KindArg,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Recorded in the model file; fitting itself is deterministic.
    #[arg(long)]
    pub seed: u64,
    /// Relative ridge added to the covariance (Gaussian kind).
    #[arg(long, default_value_t = pai_core::generators::DEFAULT_RIDGE)]
    pub ridge: f64,
    /// Skip one header line of the input.
    #[arg(long)]
    pub header: bool,
}

/// Monte Carlo settings shared by the tests.
#[derive(Debug, Clone, Args, Serialize)]
pub struct McArgs {
    #[arg(long)]
    pub seed: u64,
    /// Monte Carlo size D.
    #[arg(long, default_value_t = 200)]
    pub mc: usize,
    /// Perturbation size.
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub base: BaseArg,
    #[arg(long, value_enum, default_value = "plus-one")]
    pub correction: CorrectionArg,
    /// Defaults to the test's own sidedness.
    #[arg(long, value_enum)]
    pub sided: Option<SidedArg>,
    /// Skip one header line of every input CSV.
    #[arg(long)]
    pub header: bool,
}

impl McArgs {
    fn config(&self) -> CliResult<TestConfig> {
        if self.mc < 2 {
            return Err(usage(format!("--mc must be at least 2, got {}", self.mc)));
        }
        let mut cfg = TestConfig::new(self.seed, self.mc).with_correction(match self.correction {
            CorrectionArg::Raw => Correction::Raw,
            CorrectionArg::PlusOne => Correction::PlusOne,
        });
        cfg.pass = pass_config(self.seed, self.tau, self.base, false)?;
        if let Some(s) = self.sided {
            cfg = cfg.with_sidedness(match s {
                SidedArg::Two => Sidedness::TwoSided,
                SidedArg::Upper => Sidedness::UpperTail,
                SidedArg::Lower => Sidedness::LowerTail,
            });
        }
        Ok(cfg)
    }
}

fn pass_config(seed: u64, tau: f64, base: BaseArg, rank_match: bool) -> CliResult<PassConfig> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(usage(format!("--tau must be finite and non-negative, got {tau}")));
    }
    let mut cfg = PassConfig::new(seed).with_tau(tau).with_rank_match(rank_match);
    cfg.perturbation.base = match base {
        BaseArg::Gaussian => BaseDistribution::StandardGaussian,
        BaseArg::Uniform => BaseDistribution::UniformCube,
    };
    Ok(cfg)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Inference sample; its size sets n and, with --rank-match, its ranks are reproduced.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Sample size when no --input is given.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Perturbation size; 0 by default.
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub base: BaseArg,
    #[arg(long)]
    pub rank_match: bool,
    /// Replicate index selecting the random stream.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestFidArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    /// Generator fitted on data independent of the reference sample.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestFeatureArgs {
    /// Training CSV: label (0/1) in column 1, features after it.
    #[arg(long)]
    pub train: PathBuf,
    /// Inference CSV in the same layout.
    #[arg(long)]
    pub inference: PathBuf,
    /// Zero-based feature indices to mask, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub mask: Vec<usize>,
    /// Joint generator over (label, features).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestCoherenceArgs {
    #[arg(long)]
    pub group1: PathBuf,
    #[arg(long)]
    pub group2: PathBuf,
    #[arg(long)]
    pub model1: PathBuf,
    #[arg(long)]
    pub model2: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestPivotalArgs {
    /// Single-column CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Null value; adds a test of H0: mean = theta0.
    #[arg(long)]
    pub theta0: Option<f64>,
    /// Known standard deviation; switches to the z pivot.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Shift added to the fitted mean of the simulating generator.
    #[arg(long, default_value_t = 0.0)]
    pub bias_shift: f64,
    /// Factor applied to the fitted scale of the simulating generator.
    #[arg(long, default_value_t = 1.0)]
    pub bias_scale: f64,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    /// Covariate CSV, X1..Xp per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Joint generator over (Y, X1..Xp); required for --method pai.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training CSV (Y, X1..Xp); required for --method conformal.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pai")]
    pub method: MethodArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Conditional draws per interval.
    #[arg(long, default_value_t = 4000)]
    pub mc: usize,
    /// Neighbours for the conformal baseline.
    #[arg(long, default_value_t = 25)]
    pub k: usize,
    #[arg(long, default_value_t = 0.2)]
    pub calibration_fraction: f64,
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CoverageArgs {
    #[arg(long)]
    pub seed: u64,
    /// Output directory for data.csv, intervals.csv and coverage.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Conditional draws per PAI interval.
    #[arg(long, default_value_t = 4000)]
    pub mc: usize,
    #[arg(long, value_enum, default_value = "copula")]
    pub kind: KindArg,
    /// Test points.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 3000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 2000)]
    pub truth_draws: usize,
    #[arg(long, default_value_t = 25)]
    pub k: usize,
    #[arg(long, default_value_t = 0.2)]
    pub calibration_fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Report file written by one of the test subcommands.
    #[arg(long)]
    pub input: PathBuf,
}

fn echo<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(usage(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

pub fn run(command: &Command) -> CliResult<String> {
    match command {
        Command::Fit(a) => fit(a),
        Command::Synthesize(a) => synthesize(a),
        Command::TestFid(a) => test_fid(a),
        Command::TestFeature(a) => test_feature(a),
        Command::TestCoherence(a) => test_coherence(a),
        Command::TestPivotal(a) => test_pivotal(a),
        Command::Predict(a) => predict(a),
        Command::Simulate(a) => simulate(a),
        Command::Coverage(a) => coverage(a),
        Command::VerifyReport(a) => verify_report(a),
    }
}

pub fn fit(a: &FitArgs) -> CliResult<String> {
    let holdout = read_matrix(&a.input, a.header)?;
    let model = match a.kind {
        KindArg::Gaussian => fit_gaussian(&holdout, a.ridge),
        KindArg::Copula => fit_copula(&holdout),
    }
    .context(format!("fitting {}", display(&a.input)))?;
    let file = ModelFile {
        schema: MODEL_SCHEMA.into(),
        schema_version: SCHEMA_VERSION,
        config: echo(a),
        dim: model.dim(),
        model,
    };
    write_json(&a.out, &file)?;
    Ok(format!(
        "fitted {:?} model: d = {}, n_h = {}",
        a.kind,
        file.dim,
        holdout.rows()
    ))
}

pub fn synthesize(a: &SynthesizeArgs) -> CliResult<String> {
    if a.rank_match && a.input.is_none() {
        return Err(usage("--rank-match needs an --input inference sample"));
    }
    let model = read_model(&a.model)?;
    let cfg = pass_config(a.seed, a.tau, a.base, a.rank_match)?;
    let out = match &a.input {
        Some(path) => {
            let z = read_matrix(path, a.header)?;
            if let Some(n) = a.n {
                if n != z.rows() {
                    return Err(usage(format!(
                        "--n {n} disagrees with the {} rows of {}",
                        z.rows(),
                        display(path)
                    )));
                }
            }
            pass_synthesize(&model, &z, &cfg, a.replicate).context("synthesis")?
        }
        None => {
            let n = a.n.ok_or_else(|| usage("give --n or an --input sample"))?;
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            pass_sample(&model, n, &cfg, a.replicate).context("synthesis")?
        }
    };
    write_matrix_file(&a.out, &out)?;
    Ok(format!(
        "wrote {} x {} synthetic rows to {}",
        out.rows(),
        out.cols(),
        display(&a.out)
    ))
}

fn write_report(
    out: &Path,
    command: &str,
    config: serde_json::Value,
    report: Option<pai_core::TestReport>,
    pivotal: Option<PivotalSection>,
) -> CliResult<String> {
    let summary = match (&report, &pivotal) {
        (Some(r), _) => format!(
            "{}: T = {}, p = {}",
            r.test.name(),
            format_value(r.statistic),
            format_value(r.p_value)
        ),
        (None, Some(p)) => format!(
            "{}% interval [{}, {}]",
            format_value(100.0 * p.interval.level),
            format_value(p.interval.lower),
            format_value(p.interval.upper)
        ),
        (None, None) => String::new(),
    };
    let file = ReportFile {
        schema: REPORT_SCHEMA.into(),
        schema_version: SCHEMA_VERSION,
        command: command.into(),
        config,
        report,
        pivotal,
    };
    write_json(out, &file)?;
    Ok(summary)
}

pub fn test_fid(a: &TestFidArgs) -> CliResult<String> {
    let cfg = a.mc.config()?;
    let reference = read_matrix(&a.reference, a.mc.header)?;
    let candidate = read_matrix(&a.candidate, a.mc.header)?;
    let model = read_model(&a.model)?;
    let report = test_two_sample_fid(&reference, &candidate, &model, &cfg).context("test-fid")?;
    write_report(&a.out, "test-fid", echo(a), Some(report), None)
}

fn read_labeled(path: &Path, header: bool) -> CliResult<LabeledData> {
    let m = read_matrix(path, header)?;
    LabeledData::from_joint(&m)
        .and_then(|d| {
            if d.y.iter().zip(m.iter_rows()).any(|(y, r)| *y != r[0]) {
                Err(pai_core::Error::InvalidInput("labels must be 0 or 1".into()))
            } else {
                Ok(d)
            }
        })
        .context(display(path))
}

pub fn test_feature(a: &TestFeatureArgs) -> CliResult<String> {
    let cfg = a.mc.config()?;
    let train = read_labeled(&a.train, a.mc.header)?;
    let inference = read_labeled(&a.inference, a.mc.header)?;
    let model = read_model(&a.model)?;
    let report = test_feature_significance(&train, &inference, &a.mask, &model, &cfg).context("test-feature")?;
    write_report(&a.out, "test-feature", echo(a), Some(report), None)
}

pub fn test_coherence(a: &TestCoherenceArgs) -> CliResult<String> {
    let cfg = a.mc.config()?;
    let g1 = read_matrix(&a.group1, a.mc.header)?;
    let g2 = read_matrix(&a.group2, a.mc.header)?;
    let m1 = read_model(&a.model1)?;
    let m2 = read_model(&a.model2)?;
    let report = test_conditional_coherence(&g1, &g2, &m1, &m2, &cfg).context("test-coherence")?;
    write_report(&a.out, "test-coherence", echo(a), Some(report), None)
}

pub fn test_pivotal(a: &TestPivotalArgs) -> CliResult<String> {
    let cfg = a.mc.config()?;
    check_alpha(a.alpha)?;
    let x = read_matrix(&a.input, a.mc.header)?;
    let opts = PivotalOptions {
        pivot: match a.sigma {
            Some(sigma) => Pivot::KnownSigmaMean { sigma },
            None => Pivot::StudentizedMean,
        },
        estimator: if a.bias_shift == 0.0 && a.bias_scale == 1.0 {
            PivotEstimator::MaximumLikelihood
        } else {
            PivotEstimator::Biased {
                shift: a.bias_shift,
                scale: a.bias_scale,
            }
        },
        alpha: a.alpha,
        theta0: a.theta0,
    };
    let r = pivotal_inference(&x, &opts, &cfg).context("test-pivotal")?;
    let section = PivotalSection {
        estimate: r.estimate,
        scale: r.scale,
        interval: r.interval,
        pivot_draws: r.pivot_draws.values().to_vec(),
    };
    write_report(&a.out, "test-pivotal", echo(a), r.report, Some(section))
}

pub fn predict(a: &PredictArgs) -> CliResult<String> {
    check_alpha(a.alpha)?;
    let x = read_matrix(&a.input, a.header)?;
    let intervals: Vec<IntervalRecord> = match a.method {
        MethodArg::Pai => {
            let path = a.model.as_ref().ok_or_else(|| usage("--method pai needs --model"))?;
            let model = read_model(path)?;
            if model.dim() != x.cols() + 1 {
                return Err(CliError::Data(format!(
                    "{} has {} covariates but the model expects {}",
                    display(&a.input),
                    x.cols(),
                    model.dim().saturating_sub(1)
                )));
            }
            x.iter_rows()
                .enumerate()
                .map(|(i, row)| {
                    pai_interval(&model, row, a.alpha, a.mc, a.seed, i as u64).map(|interval| IntervalRecord {
                        point: i,
                        method: "pai".into(),
                        interval,
                    })
                })
                .collect::<pai_core::Result<_>>()
                .context("predict")?
        }
        MethodArg::Conformal => {
            let path = a
                .train
                .as_ref()
                .ok_or_else(|| usage("--method conformal needs --train"))?;
            let train = RegressionData::from_joint(&read_matrix(path, a.header)?).context(display(path))?;
            if train.x.cols() != x.cols() {
                return Err(CliError::Data(format!(
                    "{} and {} have different covariate counts",
                    display(path),
                    display(&a.input)
                )));
            }
            let model = conformal_fit(&train, a.calibration_fraction, a.alpha, a.k, a.seed).context("conformal fit")?;
            x.iter_rows()
                .enumerate()
                .map(|(i, row)| IntervalRecord {
                    point: i,
                    method: "conformal".into(),
                    interval: conformal_interval(&model, row),
                })
                .collect()
        }
    };
    let n = intervals.len();
    write_json(
        &a.out,
        &IntervalsFile {
            schema: INTERVALS_SCHEMA.into(),
            schema_version: SCHEMA_VERSION,
            config: echo(a),
            intervals,
        },
    )?;
    Ok(format!("wrote {n} intervals to {}", display(&a.out)))
}

fn regression_matrix(data: &RegressionData) -> Matrix {
    data.to_joint()
}

pub fn simulate(a: &SimulateArgs) -> CliResult<String> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let data = simulate_regression_data(a.n, a.seed).context("simulate")?;
    write_matrix_file(&a.out, &regression_matrix(&data))?;
    Ok(format!(
        "wrote {} rows (Y, X1..X{N_FEATURES}) to {}",
        a.n,
        display(&a.out)
    ))
}

pub fn coverage(a: &CoverageArgs) -> CliResult<String> {
    check_alpha(a.alpha)?;
    if a.n == 0 || a.n_train == 0 || a.truth_draws == 0 {
        return Err(usage("--n, --n-train and --truth-draws must be positive"));
    }
    let cfg = StudyConfig {
        seed: a.seed,
        n_train: a.n_train,
        n_test: a.n,
        alpha: a.alpha,
        kind: a.kind.into(),
        mc_draws: a.mc,
        truth_draws: a.truth_draws,
        knn_k: a.k,
        calibration_fraction: a.calibration_fraction,
    };
    let study = run_prediction_study(&cfg).context("coverage study")?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;

    let all = simulate_regression_data(a.n_train + a.n, a.seed).context("simulate")?;
    write_matrix_file(&a.out.join("data.csv"), &regression_matrix(&all))?;

    let path = a.out.join("intervals.csv");
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header: Vec<String> = ["point", "y"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=N_FEATURES).map(|j| format!("x{j}")));
    header.extend(
        [
            "level",
            "pai_lower",
            "pai_upper",
            "pai_coverage",
            "conformal_lower",
            "conformal_upper",
            "conformal_coverage",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..study.pai.len() {
        let (p, c) = (&study.pai[i], &study.conformal[i]);
        let mut rec = vec![i.to_string(), format_value(study.test.y[i])];
        rec.extend(study.test.x.row(i).iter().map(|&v| format_value(v)));
        rec.extend(
            [
                p.level,
                p.lower,
                p.upper,
                study.pai_coverage.per_point[i],
                c.lower,
                c.upper,
                study.conformal_coverage.per_point[i],
            ]
            .iter()
            .map(|&v| format_value(v)),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let summary = CoverageFile {
        schema: COVERAGE_SCHEMA.into(),
        schema_version: SCHEMA_VERSION,
        config: echo(a),
        alpha: a.alpha,
        generator: format!("{:?}", cfg.kind),
        conformal_baseline: format!(
            "split conformal, {}-nearest-neighbour regression with normalized scores",
            a.k
        ),
        pai: CoverageSummary::from(&study.pai_coverage),
        conformal: CoverageSummary::from(&study.conformal_coverage),
        pai_shorter_fraction: study.pai_shorter_fraction,
    };
    write_json(&a.out.join("coverage.json"), &summary)?;
    Ok(format!(
        "PAI coverage median {} mean {}; conformal mean {}; PAI shorter at {} of points",
        format_value(summary.pai.median),
        format_value(summary.pai.mean),
        format_value(summary.conformal.mean),
        format_value(summary.pai_shorter_fraction)
    ))
}

pub fn verify_report(a: &VerifyArgs) -> CliResult<String> {
    let file = read_report(&a.input)?;
    let report = file
        .report
        .ok_or_else(|| CliError::Data(format!("{}: no test section to verify", display(&a.input))))?;
    if !report.verify() {
        return Err(CliError::Data(format!(
            "{}: stored p-value {} does not match the stored null draws",
            display(&a.input),
            format_value(report.p_value)
        )));
    }
    Ok(format!(
        "verified: p = {} from {} null draws",
        format_value(report.p_value),
        report.null_draws.len()
    ))
}
