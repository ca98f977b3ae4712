use pai_core::generators::{fit_copula, pass_synthesize, GaussianTransport, GeneratorModel, PassConfig};
use pai_core::matrix::Matrix;
use pai_core::metrics::{fid, gaussian_summary, ks_test_standard_gaussian, wasserstein_exact};
use pai_core::perturb::{perturb, PerturbationSpec};
use pai_core::predict::{conformal_fit, conformal_interval, pai_interval, simulate_regression_data};
use pai_core::rng::{fill_standard_normal, stream, Purpose};
use pai_core::special::{mean, sample_sd};

fn normals(n: usize, d: usize, seed: u64, index: u64) -> Matrix {
    let mut rng = stream(seed, Purpose::User, index);
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        fill_standard_normal(&mut rng, m.row_mut(i));
    }
    m
}

#[test]
fn perturbation_preserves_the_gaussian_base() {
    let (n, d) = (5000, 5);
    for tau in [0.0, 0.2, 0.5, 1.0] {
        let mut passes = 0;
        for run in 0..100 {
            let u = normals(n, d, 1, run);
            let mut rng = stream(2, Purpose::User, run);
            let v = perturb(&u, &PerturbationSpec::gaussian(tau), &mut rng).unwrap();
            if (0..d).all(|j| ks_test_standard_gaussian(&v.column(j)).unwrap().1 > 0.001) {
                passes += 1;
            }
        }
        assert!(passes >= 95, "tau {tau}: {passes}/100");
    }
}

#[test]
fn pass_rows_are_pairwise_uncorrelated() {
    // standardized mean of ⟨v_i, v_j⟩/√d over pairs has variance 1/#pairs under independence
    let model = GeneratorModel::from(
        GaussianTransport::new(vec![1.0, -1.0, 0.5], &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 1.5]).unwrap(),
    );
    let n = 200;
    let z = model.sample(n, &mut stream(3, Purpose::User, 0));
    let cfg = PassConfig::new(4).with_tau(0.5).with_rank_match(true);
    for rep in 0..5 {
        let zp = pass_synthesize(&model, &z, &cfg, rep).unwrap();
        let v = model.inverse(&zp).unwrap();
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                total += v.row(i).iter().zip(v.row(j)).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let pairs = (n * (n - 1) / 2) as f64;
        let stat = total / pairs / 3f64.sqrt();
        assert!(stat.abs() < 4.0 / pairs.sqrt(), "replicate {rep}: {stat}");
    }
}

#[test]
fn fid_is_bounded_by_empirical_w2() {
    let n = 1000;
    let a = normals(n, 2, 5, 0);
    let b = normals(n, 2, 5, 1).map_rows(2, |r, o| {
        o[0] = 2.0 + 1.4 * r[0];
        o[1] = 0.7 * r[1];
    });
    let f = fid(&gaussian_summary(&a).unwrap(), &gaussian_summary(&b).unwrap()).unwrap();
    let w2 = wasserstein_exact(&a, &b, 2).unwrap();
    assert!(f <= 1.15 * w2 * w2, "fid {f}, w2² {}", w2 * w2);
}

#[test]
fn copula_round_trip_on_fitted_support() {
    let h = normals(500, 3, 6, 0).map_rows(3, |r, o| {
        o[0] = r[0].exp();
        o[1] = r[1] + r[0];
        o[2] = r[2].abs();
    });
    let model = fit_copula(&h).unwrap();
    let back = model.forward(&model.inverse(&h).unwrap()).unwrap();
    for (a, b) in h.as_slice().iter().zip(back.as_slice()) {
        assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
    }
}

#[test]
fn simulated_response_mean_matches_series_oracle() {
    // E exp(XY) for independent uniforms = Σ_k 1/(k·k!) ; E cos U = sin 1
    let mut series = 0.0;
    let mut fact = 1.0;
    for k in 1..30 {
        fact *= k as f64;
        series += 1.0 / (k as f64 * fact);
    }
    let expected = 8.0 + 1.0 / 3.0 + 0.25 + 1f64.sin() + series + 0.05;
    let data = simulate_regression_data(100_000, 7).unwrap();
    let se = sample_sd(&data.y) / (data.len() as f64).sqrt();
    assert!(
        (mean(&data.y) - expected).abs() < 3.0 * se,
        "{} vs {expected}",
        mean(&data.y)
    );
}

#[test]
fn conformal_marginal_coverage() {
    let alpha = 0.05;
    let mut covered = 0usize;
    let mut total = 0usize;
    for seed in 0..20 {
        let data = simulate_regression_data(1200, 100 + seed).unwrap();
        let train = data.select(&(0..1000).collect::<Vec<_>>());
        let model = conformal_fit(&train, 0.25, alpha, 25, seed).unwrap();
        for i in 1000..1200 {
            if conformal_interval(&model, data.x.row(i)).contains(data.y[i]) {
                covered += 1;
            }
            total += 1;
        }
    }
    let coverage = covered as f64 / total as f64;
    assert!(coverage >= 1.0 - alpha - 0.03, "{coverage}");
}

#[test]
fn pai_interval_width_shrinks_with_alpha() {
    let data = simulate_regression_data(1000, 9).unwrap();
    let model = fit_copula(&data.to_joint()).unwrap();
    let x = data.x.row(0);
    let mut prev = f64::INFINITY;
    for alpha in [0.01, 0.05, 0.1, 0.2, 0.5] {
        let w = pai_interval(&model, x, alpha, 4000, 3, 0).unwrap().length();
        assert!(w <= prev);
        prev = w;
    }
}
