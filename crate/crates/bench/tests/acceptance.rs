//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on
//! any failure.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use renet_bench::bench::run_benchmark;
use renet_bench::cli::bench;
use renet_bench::estimator::{FitContext, Registry};
use renet_bench::report::{aggregate_report, Metric};
use renet_core::config::BenchConfig;
use renet_core::cv::{
    build_grid, default_theta_grid, enet_cv_surface, fit_final_with, fit_renet_cv, relax_path, run_cv_with, select,
    GridSpec, RenetOptions, SelectionRule,
};
use renet_core::model::mean_squared_error;
use renet_core::oracles::{closed_form_renet, grouping_bound, recovery_ratio, OrthogonalFixture};
use renet_core::preprocess::{shuffled_folds, standardize_fit_transform, PreprocessMode, Preprocessor};
use renet_core::relax::{effective_theta, relax_solve, theta_floor, Branch, RelaxProblem};
use renet_core::solver::{
    check_kkt, default_min_ratio, enet_objective, enet_path, enet_path_prefix, fit_enet, lambda_grid, lambda_max,
};
use renet_core::synthetic::{sample_scenario, ScenarioSpec};
use renet_core::{CoefVector, Dataset, Hyperparams, SolverConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

/// Centered uniform design with a shared factor of weight `factor`.
fn factor_design(rng: &mut ChaCha8Rng, n: usize, p: usize, factor: f64) -> DMatrix<f64> {
    let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut x = DMatrix::from_fn(n, p, |i, _| factor * z[i] + rng.random_range(-1.0..1.0));
    for j in 0..p {
        let m = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-m);
    }
    x
}

fn sparse_response(rng: &mut ChaCha8Rng, x: &DMatrix<f64>, s: usize, sigma: f64) -> DVector<f64> {
    let n = x.nrows();
    let mut y = DVector::from_fn(n, |i, _| {
        (0..s.min(x.ncols())).map(|j| (1.0 + j as f64 * 0.5) * x[(i, j)]).sum::<f64>()
            + sigma * rng.random_range(-1.0..1.0)
    });
    let m = y.mean();
    y.add_scalar_mut(-m);
    y
}

/// Restriction of a dense coefficient vector to `active`.
fn restrict(beta: &CoefVector, active: &[usize]) -> CoefVector {
    let dense = beta.to_dense();
    CoefVector::dense(DVector::from_iterator(active.len(), active.iter().map(|&j| dense[j])), 0.0)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (n, p) = (64, 8);
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let thetas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let scales = [0.05, 0.15, 0.3, 0.5, 0.8];
    let mut worst: f64 = 0.0;
    let mut blend_dev: f64 = 0.0;
    let mut cells = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for f_idx in 0..50 {
        let beta = DVector::from_fn(p, |j, _| {
            if j % 3 == 2 {
                0.0
            } else {
                rng.random_range(0.5..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 }
            }
        });
        let f = OrthogonalFixture::generate(n, beta, 0.5, 100 + f_idx);
        let ols = f.beta_ols();
        let top = ols.amax();
        for &scale in &scales {
            let lambda = scale * top;
            for &alpha in &alphas {
                let hp = Hyperparams::enet(lambda, alpha).unwrap();
                let en = fit_enet(&f.q, &f.y, &hp, None, &cfg()).unwrap();
                let active = en.coef.nonzero_support();
                let x_a = f.q.select_columns(&active);
                let beta_en = CoefVector::restricted(
                    DVector::from_iterator(active.len(), active.iter().map(|&j| en.coef.values[j])),
                    0.0,
                    active.clone(),
                    p,
                )
                .unwrap();
                let prob = RelaxProblem::new(&x_a, &f.y, &beta_en, lambda, alpha, &cfg()).unwrap();
                for &theta in &thetas {
                    // The dispatching path is exact at α = 1 and at the θ
                    // endpoints; otherwise the exact estimator is the
                    // penalized refit and the blend is measured separately.
                    let exact = alpha == 1.0 || theta == 0.0 || theta == 1.0 || active.is_empty();
                    let fit = if exact { prob.solve(theta) } else { prob.refit(theta) }.unwrap();
                    let got = fit.coef.to_dense();
                    for j in 0..p {
                        let want = if active.contains(&j) {
                            closed_form_renet(ols[j], lambda, alpha, theta)
                        } else {
                            0.0
                        };
                        worst = worst.max((got[j] - want).abs());
                    }
                    if !exact && prob.sign_consistent().unwrap() {
                        let b = prob.blend(theta).unwrap().coef.to_dense();
                        for &j in &active {
                            blend_dev = blend_dev.max((b[j] - closed_form_renet(ols[j], lambda, alpha, theta)).abs());
                        }
                    }
                    cells += 1;
                }
            }
        }
    }
    let t = secs(start.elapsed());
    outcome(
        worst <= 1e-6 && t < 10.0,
        format!("{cells} cells, max |Δ| = {worst:.2e}, blend deviation at α<1 up to {blend_dev:.2e}, {t:.2}s"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_path: f64 = 0.0;
    let mut worst_refit: f64 = 0.0;
    let (mut n_path, mut n_refit, mut n_dispatched) = (0, 0, 0);
    for _ in 0..20 {
        let n = rng.random_range(40..=200);
        let p = rng.random_range(5..=50);
        let alpha = [0.3, 0.7, 0.95, 1.0][rng.random_range(0..4)];
        let factor = rng.random_range(0.0..1.5);
        let raw = factor_design(&mut rng, n, p, factor);
        let y = sparse_response(&mut rng, &raw, 5, 0.5);
        let (d, _) = standardize_fit_transform(&Dataset::new(raw, y)).unwrap();
        let (x, y) = (&d.x, &d.y);
        let lmax = lambda_max(x, y, alpha).unwrap();
        let grid = lambda_grid(lmax, 40, default_min_ratio(n, p)).unwrap();
        let path = enet_path(x, y, alpha, &grid, &cfg()).unwrap();
        for i in 0..path.len() {
            if path.converged[i] {
                let hp = Hyperparams::enet(grid[i], alpha).unwrap();
                worst_path = worst_path.max(check_kkt(x, y, &path.coef(i), &hp));
                n_path += 1;
            }
        }
        let thetas = default_theta_grid();
        let check = |i: usize, theta: f64, coef: &CoefVector| {
            let active = &path.active_sets[i];
            let x_a = x.select_columns(active);
            let hp = Hyperparams::enet(theta * grid[i], alpha).unwrap();
            check_kkt(&x_a, y, &restrict(coef, active), &hp)
        };
        relax_path(x, y, &path, &thetas, &cfg(), |i, _, fit| {
            if fit.branch == Branch::Refit && fit.converged {
                worst_refit = worst_refit.max(check(i, fit.theta_effective, &fit.coef));
                n_dispatched += 1;
            }
        })
        .unwrap();
        for i in 0..path.len() {
            let active = &path.active_sets[i];
            if active.is_empty() || active.len() >= n {
                continue;
            }
            let x_a = x.select_columns(active);
            let beta_en = path.active_coef(i);
            let prob = RelaxProblem::new(&x_a, y, &beta_en, grid[i], alpha, &cfg()).unwrap();
            for &theta in &thetas {
                let fit = prob.refit(theta).unwrap();
                if fit.converged {
                    worst_refit = worst_refit.max(check(i, theta, &fit.coef));
                    n_refit += 1;
                }
            }
        }
    }
    let t = secs(start.elapsed());
    outcome(
        worst_path <= 1e-4 && worst_refit <= 1e-4 && n_dispatched > 0 && t < 30.0,
        format!(
            "{n_path} path points max {worst_path:.2e}; {} refits ({n_dispatched} via dispatch) max {worst_refit:.2e}; {t:.2}s",
            n_refit + n_dispatched
        ),
    )
}

/// Exact minimizer for `p ≤ 3` by enumerating sign patterns: for each
/// pattern the stationarity equations are linear on its support.
fn brute_force(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, alpha: f64) -> DVector<f64> {
    let (n, p) = x.shape();
    let hp = Hyperparams::enet(lambda, alpha).unwrap();
    let mut best = (enet_objective(x, y, &vec![0.0; p], lambda, alpha), DVector::zeros(p));
    for code in 0..3usize.pow(p as u32) {
        let signs: Vec<f64> = (0..p).map(|j| (code / 3usize.pow(j as u32)) % 3).map(|s| s as f64 - 1.0).collect();
        let support: Vec<usize> = (0..p).filter(|&j| signs[j] != 0.0).collect();
        if support.is_empty() {
            continue;
        }
        let xs = x.select_columns(&support);
        let g = xs.tr_mul(&xs) / n as f64 + DMatrix::identity(support.len(), support.len()) * hp.l2();
        let rhs = xs.tr_mul(y) / n as f64 - DVector::from_iterator(support.len(), support.iter().map(|&j| hp.l1() * signs[j]));
        let Some(sol) = g.lu().solve(&rhs) else { continue };
        let mut beta = DVector::zeros(p);
        for (k, &j) in support.iter().enumerate() {
            beta[j] = sol[k];
        }
        let obj = enet_objective(x, y, beta.as_slice(), lambda, alpha);
        if obj < best.0 {
            best = (obj, beta);
        }
    }
    best.1
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_en, mut worst_refit): (f64, f64) = (0.0, 0.0);
    let mut refits = 0;
    for _ in 0..100 {
        let p = rng.random_range(1..=3);
        let n = rng.random_range(6..=30);
        let factor = rng.random_range(0.0..1.0);
        let x = factor_design(&mut rng, n, p, factor);
        let y = sparse_response(&mut rng, &x, 2, 0.5);
        let alpha = rng.random_range(0.05..=1.0);
        let lambda = rng.random_range(0.02..1.1) * lambda_max(&x, &y, alpha).unwrap();
        let hp = Hyperparams::enet(lambda, alpha).unwrap();
        let en = fit_enet(&x, &y, &hp, None, &cfg()).unwrap();
        let bf = brute_force(&x, &y, lambda, alpha);
        worst_en = worst_en.max((&en.coef.values - &bf).amax());

        let active = en.coef.nonzero_support();
        if active.is_empty() {
            continue;
        }
        let x_a = x.select_columns(&active);
        let beta_en = restrict(&en.coef, &active);
        let theta = rng.random_range(0.05..0.95);
        let prob = RelaxProblem::new(&x_a, &y, &beta_en, lambda, alpha, &cfg()).unwrap();
        let fit = prob.refit(theta).unwrap();
        let bf = brute_force(&x_a, &y, theta * lambda, alpha);
        worst_refit = worst_refit.max((&fit.coef.values - &bf).amax());
        refits += 1;
    }
    outcome(
        worst_en <= 1e-4 && worst_refit <= 1e-4,
        format!(
            "100 Elastic Net fits max {worst_en:.2e}; {refits} refits max {worst_refit:.2e}; {:.2}s",
            secs(start.elapsed())
        ),
    )
}

fn criterion_4() -> Outcome {
    let pairs: [(usize, usize); 20] = [
        (4, 1_000_000),
        (10, 11),
        (10, 1000),
        (16, 10_000),
        (25, 26),
        (50, 100),
        (64, 4096),
        (90, 4000),
        (100, 101),
        (100, 5000),
        (200, 220),
        (250, 100_000),
        (300, 301),
        (300, 3000),
        (400, 20_000),
        (1000, 2000),
        (1000, 1_000_000),
        (5000, 5001),
        (10_000, 50_000),
        (2, 3),
    ];
    let floor_err = pairs
        .iter()
        .map(|&(n, p)| (theta_floor(n, p) - ((p as f64).ln() / (2.0 * (n as f64).sqrt())).min(1.0)).abs())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut fixtures = 0;
    let mut identical = true;
    while fixtures < 20 {
        let n = rng.random_range(5..=15);
        let p = rng.random_range(n + 5..=3 * n + 5);
        let x = factor_design(&mut rng, n, p, 0.5);
        let y = sparse_response(&mut rng, &x, 4, 0.5);
        let alpha = rng.random_range(0.05..0.5);
        let lambda = 1e-3 * lambda_max(&x, &y, alpha).unwrap();
        let en = fit_enet(&x, &y, &Hyperparams::enet(lambda, alpha).unwrap(), None, &cfg()).unwrap();
        let active = en.coef.nonzero_support();
        if active.len() < n {
            continue;
        }
        let x_a = x.select_columns(&active);
        let beta_en = CoefVector::restricted(
            DVector::from_iterator(active.len(), active.iter().map(|&j| en.coef.values[j])),
            0.0,
            active.clone(),
            p,
        )
        .unwrap();
        let floor = theta_floor(n, p);
        for theta in default_theta_grid() {
            let eff = effective_theta(theta, active.len(), n, floor);
            let fit = relax_solve(&x_a, &y, lambda, alpha, eff, &beta_en, &cfg()).unwrap();
            identical &= fit.branch == Branch::Saturated && fit.coef == beta_en && eff == 1.0;
        }
        fixtures += 1;
    }
    outcome(
        floor_err <= 1e-12 && identical,
        format!("20 floor pairs max error {floor_err:.1e}; {fixtures} saturated fixtures untouched: {identical}"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let thetas: Vec<f64> = (1..=200).map(|k| k as f64 / 200.0).collect();
    let (mut monotone, mut limit_err, mut closed_err): (bool, f64, f64) = (true, 0.0, 0.0);
    for _ in 0..200 {
        let lambda = rng.random_range(0.01..2.0);
        let alpha = rng.random_range(0.0..=1.0);
        let b = lambda * alpha * rng.random_range(1.01..5.0) + rng.random_range(0.001..1.0);
        let r: Vec<f64> = thetas.iter().map(|&t| recovery_ratio(t, lambda, alpha, b).unwrap()).collect();
        monotone &= r.windows(2).all(|w| w[1] < w[0]);
        monotone &= recovery_ratio(thetas[0], lambda, alpha, b).unwrap() < recovery_ratio(0.0, lambda, alpha, b).unwrap();
        limit_err = limit_err.max((recovery_ratio(1e-12, lambda, alpha, b).unwrap() - 1.0).abs());
        for (&t, &rt) in thetas.iter().zip(&r) {
            closed_err = closed_err.max((closed_form_renet(b, lambda, alpha, t) / b - rt).abs());
        }
    }
    outcome(
        monotone && limit_err <= 1e-9 && closed_err <= 1e-12,
        format!(
            "200 draws strictly decreasing: {monotone}; |R(θ→0) − 1| ≤ {limit_err:.1e}; agreement with closed form {closed_err:.1e}"
        ),
    )
}

/// Exactly duplicated columns have a zero bound, which the computed
/// difference can only meet up to rounding.
const ROUNDING: f64 = 1e-12;

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut min_slack = f64::INFINITY;
    let mut pairs = 0;
    let mut scaling_err: f64 = 0.0;
    for f in 0..30 {
        let n = rng.random_range(60..=150);
        let p = 6;
        let mut raw = factor_design(&mut rng, n, p, 0.3);
        // Column 1 duplicates column 0 or is a small perturbation of it.
        let jitter = if f % 2 == 0 { 0.0 } else { rng.random_range(0.05..0.25) };
        for i in 0..n {
            raw[(i, 1)] = raw[(i, 0)] + jitter * rng.random_range(-1.0..1.0);
        }
        let y = sparse_response(&mut rng, &raw, 3, 0.5);
        let (d, _) = standardize_fit_transform(&Dataset::new(raw, y)).unwrap();
        let (x, y) = (&d.x, &d.y);
        let col_norm = |j: usize| x.column(j).norm();
        let alpha = [0.3, 0.5, 0.8, 0.95][f % 4];
        let lambda = rng.random_range(0.02..0.3) * lambda_max(x, y, alpha).unwrap();
        let en = fit_enet(x, y, &Hyperparams::enet(lambda, alpha).unwrap(), None, &cfg()).unwrap();
        let active = en.coef.nonzero_support();
        let x_a = x.select_columns(&active);
        let beta_en = restrict(&en.coef, &active);
        let prob = RelaxProblem::new(&x_a, y, &beta_en, lambda, alpha, &cfg()).unwrap();
        for theta in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            let beta = prob.refit(theta).unwrap().coef.to_dense();
            for (a, &i) in active.iter().enumerate() {
                for &j in active.iter().skip(a + 1) {
                    let rho = x.column(i).dot(&x.column(j)) / (col_norm(i) * col_norm(j));
                    if rho < 0.9 {
                        continue;
                    }
                    let bound = grouping_bound(theta, lambda, alpha, y.norm(), rho.min(1.0)).unwrap();
                    min_slack = min_slack.min(bound - (beta[i] - beta[j]).abs());
                    pairs += 1;
                }
            }
        }
        let base = grouping_bound(1.0, lambda, alpha, y.norm(), 0.95).unwrap();
        for theta in [0.05, 0.2, 0.5, 0.8] {
            let scaled = grouping_bound(theta, lambda, alpha, y.norm(), 0.95).unwrap() * theta;
            scaling_err = scaling_err.max((scaled - base).abs() / base);
        }
    }
    outcome(
        pairs > 0 && min_slack >= -ROUNDING && scaling_err <= 1e-9,
        format!(
            "{pairs} correlated pairs, min slack {min_slack:.3e} (rounding allowance {ROUNDING:.0e}); 1/θ scaling error {scaling_err:.1e}; {:.2}s",
            secs(start.elapsed())
        ),
    )
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let solver = cfg();
    let mut ok = true;
    let mut cases = 0;
    let mut datasets = Vec::new();
    for k in 0..4 {
        let (n, p) = [(80, 10), (60, 40), (50, 80), (120, 6)][k];
        let x = factor_design(&mut rng, n, p, 0.8);
        let y = sparse_response(&mut rng, &x, 4, 1.0).add_scalar(2.0);
        datasets.push(Dataset::new(x, y));
    }
    datasets.push(sample_scenario(&ScenarioSpec::preset("S6").unwrap(), 7).unwrap().data);

    for (k, d) in datasets.iter().enumerate() {
        let seed = 10 + k as u64;
        let mode = PreprocessMode::Standardize { k_inner: 5, seed };
        let grid = build_grid(d, 0.95, vec![1.0], 50, mode).unwrap();
        let opts = renet_core::cv::CvOptions {
            folds: 5,
            seed,
            mode,
            solver,
        };
        let relaxed = run_cv_with(d, &grid, &opts).unwrap();
        let plain = enet_cv_surface(d, &grid.lambda_grid, 0.95, &opts).unwrap();
        ok &= same_bits(&relaxed.mse, &plain.mse)
            && same_bits(relaxed.mean_mse.as_slice(), plain.mean_mse.as_slice())
            && same_bits(relaxed.se_mse.as_slice(), plain.se_mse.as_slice());

        for rule in [SelectionRule::CvMin, SelectionRule::OneSe] {
            let sr = select(&relaxed, rule, 1.0).unwrap();
            let sp = select(&plain, rule, 1.0).unwrap();
            ok &= sr == sp;
            let fin = fit_final_with(d, &sr, &grid, mode, &solver).unwrap();
            // Plain Elastic Net final fit: path to λ*, intercept restored.
            let (std, pre) = Preprocessor::fit(d, mode).unwrap();
            let path = enet_path_prefix(&std.x, &std.y, 0.95, &grid.lambda_grid, sp.lambda_index + 1, &solver).unwrap();
            let en = path.coef(sp.lambda_index);
            ok &= same_bits(fin.model.coef.to_dense().as_slice(), en.values.as_slice())
                && fin.model.coef.intercept.to_bits() == (en.intercept + pre.y_mean()).to_bits();
            cases += 1;
        }

        // The registered estimators agree exactly when relaxation is off.
        let reg = Registry::builtin();
        let mut ctx = FitContext::from_config(&BenchConfig::default(), seed);
        ctx.theta_grid = vec![1.0];
        ctx.folds = 5;
        ctx.n_lambda = 50;
        for (a, b) in [("en", "renet"), ("en1se", "renet1se")] {
            let pa = reg.get(a).unwrap().fit(d, &ctx).unwrap().predict(d).unwrap();
            let pb = reg.get(b).unwrap().fit(d, &ctx).unwrap().predict(d).unwrap();
            ok &= same_bits(pa.as_slice(), pb.as_slice());
        }
    }
    outcome(
        ok,
        format!(
            "{} datasets, {cases} selections: surfaces, selections and final fits bit-identical: {ok}; {:.2}s",
            datasets.len(),
            secs(start.elapsed())
        ),
    )
}

fn bench_config(dataset: &str, models: &[&str], seeds: &[u64]) -> BenchConfig {
    BenchConfig {
        datasets: vec![dataset.to_string()],
        models: models.iter().map(|m| m.to_string()).collect(),
        seeds: seeds.to_vec(),
        preset: Some("desk".into()),
        ..BenchConfig::default()
    }
}

fn s1_surrogate() -> (bool, String) {
    let start = Instant::now();
    let spec = ScenarioSpec::preset("S1").unwrap().desk();
    let truth: BTreeSet<usize> = spec.support().into_iter().collect();
    let est = Registry::builtin();
    let est = est.get("renet1se").unwrap();
    let (mut exact, mut runs) = (0, 0);
    for seed in [42u64, 123, 321] {
        let d = sample_scenario(&spec, seed).unwrap().data;
        let ctx = FitContext::from_config(&BenchConfig::default(), seed);
        for fold in shuffled_folds(d.n(), 10, seed) {
            let test: BTreeSet<usize> = fold.into_iter().collect();
            let train: Vec<usize> = (0..d.n()).filter(|i| !test.contains(i)).collect();
            let fit = est.fit(&d.select_rows(&train), &ctx).unwrap();
            let support: BTreeSet<usize> = fit.support().into_iter().collect();
            exact += usize::from(support == truth);
            runs += 1;
        }
    }
    let t = secs(start.elapsed());
    (
        exact * 10 >= runs * 9 && t < 300.0,
        format!("S1 exact support {exact}/{runs} ({t:.0}s)"),
    )
}

fn mean_of(report: &renet_bench::report::Report, ds: &str, model: &str, m: Metric) -> f64 {
    report.get(ds, model, m).map(|c| c.mean).unwrap_or(f64::NAN)
}

fn s6_surrogate() -> (bool, String) {
    let start = Instant::now();
    let cfg = bench_config("S6", &["en1se", "renet1se"], &[42, 123, 321]);
    let out = run_benchmark(&cfg, &Registry::builtin()).unwrap();
    let r = aggregate_report(&out.rows);
    let support = mean_of(&r, "S6", "renet1se", Metric::NCoef);
    let (r2, r2_en) = (mean_of(&r, "S6", "renet1se", Metric::R2), mean_of(&r, "S6", "en1se", Metric::R2));
    let t = secs(start.elapsed());
    (
        out.dataset_errors == 0 && support <= 3.0 && r2 >= r2_en - 0.01 && t < 300.0,
        format!("S6 support {support:.1}, R² {r2:.3} vs EN-1SE {r2_en:.3} ({t:.0}s)"),
    )
}

fn s7_surrogate() -> (bool, String) {
    let start = Instant::now();
    let cfg = bench_config("S7", &["en", "en1se", "renet", "renet1se"], &[42]);
    let out = run_benchmark(&cfg, &Registry::builtin()).unwrap();
    let r = aggregate_report(&out.rows);
    let (s_renet, s_en) = (mean_of(&r, "S7", "renet1se", Metric::NCoef), mean_of(&r, "S7", "en1se", Metric::NCoef));
    let (r2, r2_en) = (mean_of(&r, "S7", "renet", Metric::R2), mean_of(&r, "S7", "en", Metric::R2));
    let t = secs(start.elapsed());
    (
        out.dataset_errors == 0 && s_renet < s_en && r2 >= r2_en - 0.01 && t < 300.0,
        format!("S7 1-SE support {s_renet:.1} vs EN {s_en:.1}, R² {r2:.3} vs EN {r2_en:.3} ({t:.0}s)"),
    )
}

fn criterion_8() -> Outcome {
    let parts = [s1_surrogate(), s6_surrogate(), s7_surrogate()];
    outcome(
        parts.iter().all(|(ok, _)| *ok),
        parts.iter().map(|(_, s)| s.as_str()).collect::<Vec<_>>().join("; "),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let spec = ScenarioSpec {
        n: 1000,
        ..ScenarioSpec::preset("S6").unwrap()
    };
    let solver = cfg();
    let (mut v1, mut v2) = (0, 0);
    let (mut m_r1, mut m_en, mut m_en1) = (0.0, 0.0, 0.0);
    let draws = 30;
    for seed in 0..draws {
        let all = sample_scenario(&spec, 1000 + seed).unwrap().data;
        let train = all.select_rows(&(0..500).collect::<Vec<_>>());
        let test = all.select_rows(&(500..1000).collect::<Vec<_>>());
        let opts = RenetOptions {
            seed,
            rule: SelectionRule::OneSe,
            ..RenetOptions::default()
        };
        let cv = fit_renet_cv(&train, &opts).unwrap();
        let j1 = cv.grid.theta_grid.iter().position(|&t| t == 1.0).unwrap();
        let en_surface = cv.surface.theta_column(j1).unwrap();
        let en_grid: GridSpec = cv.grid.enet_only();
        let mse = |fit: &renet_core::cv::FittedModel| mean_squared_error(&test.y, &fit.predict(&test).unwrap());
        let r1 = mse(&cv.fit.model);
        let en_fit = |rule| {
            let sel = select(&en_surface, rule, 1.0).unwrap();
            fit_final_with(&train, &sel, &en_grid, opts.mode(), &solver).unwrap()
        };
        let en = mse(&en_fit(SelectionRule::CvMin).model);
        let en1 = mse(&en_fit(SelectionRule::OneSe).model);
        v1 += usize::from(r1 > en);
        v2 += usize::from(en > en1);
        m_r1 += r1 / draws as f64;
        m_en += en / draws as f64;
        m_en1 += en1 / draws as f64;
    }
    let limit = draws as usize / 5;
    outcome(
        m_r1 <= m_en && m_en <= m_en1 && v1 <= limit && v2 <= limit,
        format!(
            "mean test MSE {m_r1:.4} ≤ {m_en:.4} ≤ {m_en1:.4}; violations {v1}/{draws} and {v2}/{draws}; {:.0}s",
            secs(start.elapsed())
        ),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = bench_config("S6", &["en", "en1se", "aen", "renet", "renet1se"], &[42, 7]);
        cfg.folds = 5;
        cfg.output_dir = dir.path().join(run).display().to_string();
        let code = bench(&cfg).unwrap();
        let read = |name: &str| std::fs::read(dir.path().join(run).join(name)).unwrap();
        files.push((code, read("rows.csv"), read("summary.csv")));
    }
    let same = files[0] == files[1] && files[0].0 == 0;
    outcome(
        same,
        format!("rows.csv {} bytes and summary.csv {} bytes identical across runs: {same}", files[0].1.len(), files[0].2.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("orthogonal closed form", criterion_1),
        ("KKT conditions", criterion_2),
        ("brute-force minimizer", criterion_3),
        ("floor and saturation safeguards", criterion_4),
        ("recovery ratio", criterion_5),
        ("grouping bound", criterion_6),
        ("ablation identity", criterion_7),
        ("scenario surrogates", criterion_8),
        ("1-SE hierarchy", criterion_9),
        ("determinism", criterion_10),
    ];
    let only: Option<usize> = std::env::var("RENET_CRITERION").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let o = run();
        println!("criterion {}: {} {name}: {}", k + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
