//! Acceptance suite. Runs every criterion at its stated tolerance and
//! prints one PASS/FAIL line each. `ACCEPTANCE=1,4` limits the run to the
//! listed criteria.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use tempfile::TempDir;

use common::cli::{path_str, read_tree, run_ok, write_file};
use common::{
    coverage_replicate, dense_oracle, fixtures, geweke_test, inverse_gamma_cdf, ks_one_sample,
    mean_and_se, small_instance,
};
use survey_fda::basis::{center_curves, reconstruct_eta, BasisExpansion, CurveGrid};
use survey_fda::binomial::{
    conditional_b, conditional_beta, fit, log_pseudo_likelihood, step_lambda2, step_nu, step_tau2,
    BinomialModelData, ModelState, SamplerConfig,
};
use survey_fda::dataset::CovariateScaling;
use survey_fda::distributions::{sample_polya_gamma, PolyaGammaParams};
use survey_fda::evaluation::{run_simulation_study_detailed, summarize_bce, ModelTag, StudyConfig};
use survey_fda::harness::config::{DataSection, Mode};
use survey_fda::harness::ingest::ingest;
use survey_fda::multinomial::{
    compose_category_probs, cumulative_probs, fit_multinomial, predict_category_probs, CategoricalData,
};
use survey_fda::rng::RngStream;
use survey_fda::survey::scale_weights;
use survey_fda::synthetic::{generate, SyntheticConfig};

/// Collects failed checks of one criterion.
#[derive(Default)]
struct Report {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Report {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn(&mut Report),
}

const fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "PG moment suite", limit: minutes(2), run: pg_moments },
        Criterion { id: 2, name: "conditional-distribution oracles", limit: minutes(1), run: conditional_oracles },
        Criterion { id: 3, name: "Geweke stationarity", limit: minutes(10), run: geweke },
        Criterion { id: 4, name: "coverage", limit: minutes(30), run: coverage },
        Criterion { id: 5, name: "weighted vs unweighted BCE ordering", limit: minutes(45), run: simulation_ordering },
        Criterion { id: 6, name: "pseudo-likelihood identity and unit weights", limit: minutes(5), run: pseudo_likelihood },
        Criterion { id: 7, name: "multinomial suite", limit: minutes(5), run: multinomial },
        Criterion { id: 8, name: "basis suite", limit: minutes(5), run: basis },
        Criterion { id: 9, name: "determinism of every command", limit: minutes(10), run: determinism },
    ]
}

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for c in criteria() {
        if only.as_ref().is_some_and(|ids| !ids.contains(&c.id)) {
            continue;
        }
        let start = Instant::now();
        let mut report = Report::default();
        let outcome = catch_unwind(AssertUnwindSafe(|| (c.run)(&mut report)));
        let elapsed = start.elapsed();
        if let Err(panic) = outcome {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            report.failures.push(msg);
        }
        if elapsed > c.limit {
            report.failures.push(format!("runtime {elapsed:.1?} exceeds {:?}", c.limit));
        }
        let verdict = if report.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{verdict} [{}] {} ({:.1} s)", c.id, c.name, elapsed.as_secs_f64());
        for note in &report.notes {
            println!("     {note}");
        }
        for failure in &report.failures {
            println!("     failed: {failure}");
        }
        if !report.failures.is_empty() {
            failed.push(c.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn pg_moments(r: &mut Report) {
    let draws = 1_000_000;
    let mut worst: f64 = 0.0;
    let mut point = 0;
    for &b in &[0.3, 1.0, 2.5, 7.8] {
        for &c in &[0.0, 0.5, -0.5, 3.0, -3.0, 10.0, -10.0] {
            let params = PolyaGammaParams::new(b, c).unwrap();
            let mut rng = RngStream::new(1, point);
            point += 1;
            let sample: Vec<f64> = (0..draws).map(|_| sample_polya_gamma(params, &mut rng)).collect();
            let (mean, se) = mean_and_se(&sample);
            let expected = if c == 0.0 { b / 4.0 } else { b / (2.0 * c) * (c / 2.0).tanh() };
            let z = (mean - expected).abs() / se;
            worst = worst.max(z);
            r.check(z <= 3.0, format!("PG({b}, {c}): mean {mean}, expected {expected}, {z:.2} se"));
        }
    }
    r.note(format!("28 points, largest deviation {worst:.2} se"));
}

fn scale_state(k: usize) -> ModelState {
    ModelState {
        omega: DVector::from_element(1, 1.0),
        beta: DVector::zeros(1),
        b: DVector::zeros(k),
        lambda2: DVector::from_element(k, 1.0),
        tau2: 1.0,
        nu: DVector::from_element(k, 1.0),
        nu_tau: 1.0,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn conditional_oracles(r: &mut Report) {
    type Step = fn(&mut ModelState, &mut RngStream) -> survey_fda::error::Result<()>;
    type Read = fn(&ModelState) -> f64;
    let lambda2: Step = step_lambda2;
    let tau2: Step = step_tau2;
    let nu: Step = step_nu;

    let mut general = scale_state(2);
    general.b[1] = 1.3;
    general.tau2 = 0.7;
    general.nu[1] = 2.0;
    let mut large_b = scale_state(1);
    large_b.b[0] = 2f64.sqrt();
    large_b.nu[0] = 1e300;
    let mut four_scale = scale_state(3);
    four_scale.b.fill(1.0);
    four_scale.lambda2.fill(0.5);
    let mut flat_tau = scale_state(1);
    flat_tau.tau2 = 1e300;
    let mut half_tau = scale_state(1);
    half_tau.tau2 = 0.5;

    let cases: Vec<(&str, ModelState, Step, Read, f64, f64)> = vec![
        ("lambda2, b = 0", scale_state(1), lambda2, |s| s.lambda2[0], 1.0, 1.0),
        ("lambda2, b² = 2τ²", large_b, lambda2, |s| s.lambda2[0], 1.0, 1.0),
        ("lambda2, general", general, lambda2, |s| s.lambda2[1], 1.0, 0.5 + 1.3 * 1.3 / 1.4),
        ("tau2, K = 1", scale_state(1), tau2, |s| s.tau2, 1.0, 1.0),
        ("tau2, K = 3", four_scale, tau2, |s| s.tau2, 2.0, 4.0),
        ("nu", scale_state(1), nu, |s| s.nu[0], 1.0, 2.0),
        ("nu_tau, flat", flat_tau, nu, |s| s.nu_tau, 1.0, 1.0),
        ("nu_tau, τ² = 0.5", half_tau, nu, |s| s.nu_tau, 1.0, 3.0),
    ];
    for (i, (name, mut state, step, read, shape, scale)) in cases.into_iter().enumerate() {
        let mut rng = RngStream::new(2, i as u64);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| {
                step(&mut state, &mut rng).unwrap();
                read(&state)
            })
            .collect();
        let (d, p) = ks_one_sample(&draws, inverse_gamma_cdf(shape, scale));
        r.check(p > 0.01, format!("{name}: IG({shape}, {scale}), D = {d:.4}, p = {p:.4}"));
    }

    let (data, state) = small_instance();
    let prior_b = DVector::from_fn(2, |k, _| 1.0 / (state.tau2 * state.lambda2[k]));
    let (mean, cov) = dense_oracle(data.xi(), &prior_b, &(data.x() * &state.beta), &data, &state.omega);
    let cond = conditional_b(&state, &data);
    let dm = max_abs_diff(cond.mean().unwrap().as_slice(), mean.as_slice());
    let dc = max_abs_diff(cond.covariance().unwrap().as_slice(), cov.as_slice());
    r.check(dm < 1e-10 && dc < 1e-10, format!("b conditional off by {dm:e} / {dc:e}"));

    let sigma2 = 10.0;
    let prior_beta = DVector::from_element(2, 1.0 / sigma2);
    let (mean, cov) = dense_oracle(data.x(), &prior_beta, &(data.xi() * &state.b), &data, &state.omega);
    let cond = conditional_beta(&state, &data, sigma2);
    let dm = max_abs_diff(cond.mean().unwrap().as_slice(), mean.as_slice());
    let dc = max_abs_diff(cond.covariance().unwrap().as_slice(), cov.as_slice());
    r.check(dm < 1e-10 && dc < 1e-10, format!("beta conditional off by {dm:e} / {dc:e}"));
    r.note("8 KS tests at α = 0.01, 2 dense oracles at 1e-10");
}

fn geweke(r: &mut Report) {
    let outcome = geweke_test(10_000, 3);
    let mut line = String::from("10⁴ cycles:");
    for (name, p) in outcome.tests {
        write!(line, " {name} p = {p:.3}").unwrap();
        r.check(p > 0.005, format!("{name}: p = {p}"));
    }
    r.note(line);
}

fn coverage(r: &mut Report) {
    let config = SamplerConfig { iterations: 5000, burn_in: 1000, seed: 4, ..Default::default() };
    let mut covered = [0usize; 5];
    for rep in 0..20 {
        for (j, hit) in coverage_replicate(2000, &config, rep).into_iter().enumerate() {
            covered[j] += usize::from(hit);
        }
    }
    let names = ["intercept", "slope", "b(1)", "b(2)", "b(3)"];
    for (name, &c) in names.iter().zip(&covered) {
        r.check(c >= 14, format!("{name} covered in {c}/20"));
    }
    r.note(format!("covered out of 20: {covered:?}"));
}

fn simulation_ordering(r: &mut Report) {
    let population = generate(&SyntheticConfig { units: 2000, seed: 11, ..Default::default() }).unwrap();
    let study = StudyConfig { replicates: 20, expected_n: 300.0, seed: 1, ..Default::default() };
    let outcome = run_simulation_study_detailed(&population.dataset, &study).unwrap();
    r.check(outcome.failures.is_empty(), format!("{} failed replicates", outcome.failures.len()));
    let mean = |tag| summarize_bce(&outcome.reports, tag).map(|(m, _)| m).unwrap_or(f64::NAN);
    let fm_w = mean(ModelTag::FunctionalWeighted);
    let fm_uw = mean(ModelTag::FunctionalUnweighted);
    let sm_w = mean(ModelTag::ScalarWeighted);
    let sm_uw = mean(ModelTag::ScalarUnweighted);
    r.note(format!("mean BCE: FM-W {fm_w:.4}, FM-UW {fm_uw:.4}, SM-W {sm_w:.4}, SM-UW {sm_uw:.4}"));
    r.check(fm_w < fm_uw, "FM-W not below FM-UW");
    r.check(sm_w < sm_uw, "SM-W not below SM-UW");
    r.check(fm_w < sm_w, "FM-W not below SM-W");
}

/// Direct Σ [w̃ Z ψ − w̃ n log(1 + e^ψ)].
fn direct_pseudo_likelihood(data: &BinomialModelData, beta: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let psi = data.linear_predictor(beta, b);
    (0..psi.len())
        .map(|i| {
            let w = data.w_tilde()[i];
            w * f64::from(data.successes()[i]) * psi[i] - w * f64::from(data.trials()[i]) * psi[i].exp().ln_1p()
        })
        .sum()
}

fn fixture_data(dir: &str, response: &str) -> BinomialModelData {
    let root = fixtures().join(dir);
    let section = DataSection {
        response: Some(response.into()),
        covariates: vec!["age".into()],
        ..Default::default()
    };
    let ds = ingest(&root.join("curves.csv"), &root.join("scalars.csv"), &section, Mode::Binomial).unwrap();
    let basis = BasisExpansion::from_curves(&ds.curves, &ds.grid, 0.95).unwrap();
    let scaling = CovariateScaling::standardizing(&ds.covariate_names, &ds.covariates).unwrap();
    let x = scaling.design(&ds.covariates).unwrap();
    let w = scale_weights(&ds.raw_weights).unwrap().scaled_weights;
    BinomialModelData::new(ds.successes, ds.trials, x, basis.scores, w).unwrap()
}

fn pseudo_likelihood(r: &mut Report) {
    let mut rng = RngStream::new(6, 0);
    let mut worst: f64 = 0.0;
    let mut check_pl = |data: &BinomialModelData, rng: &mut RngStream, r: &mut Report| {
        let beta = DVector::from_fn(data.x().ncols(), |_, _| rng.random_range(-3.0..3.0));
        let b = DVector::from_fn(data.xi().ncols(), |_, _| rng.random_range(-3.0..3.0));
        let pl = log_pseudo_likelihood(data, &beta, &b);
        let direct = direct_pseudo_likelihood(data, &beta, &b);
        let rel = (pl - direct).abs() / direct.abs().max(1.0);
        worst = worst.max(rel);
        r.check(rel <= 1e-8, format!("pseudo-likelihood {pl} vs {direct}"));
    };
    for _ in 0..200 {
        let n = rng.random_range(1..60);
        let k = rng.random_range(0..5);
        let trials: Vec<u32> = (0..n).map(|_| rng.random_range(1..6)).collect();
        let successes = trials.iter().map(|&t| rng.random_range(0..=t)).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
        let w = scale_weights(&raw).unwrap().scaled_weights;
        let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
        let xi = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
        let data = BinomialModelData::new(successes, trials, x, xi, w).unwrap();
        check_pl(&data, &mut rng, r);
    }
    let toy = fixture_data("toy", "died");
    let synthetic = fixture_data("synthetic", "response");
    for data in [&toy, &synthetic] {
        for _ in 0..20 {
            check_pl(data, &mut rng, r);
        }
    }
    r.note(format!("200 random states + 40 fixture states, largest relative error {worst:e}"));

    // Equal raw weights scale to exactly 1 and reproduce the unweighted chain.
    let config = SamplerConfig { iterations: 1000, burn_in: 200, seed: 6, ..Default::default() };
    for (name, data) in [("toy", &toy), ("synthetic", &synthetic)] {
        let unit = data.unweighted();
        let equal = scale_weights(&vec![123.4; unit.x().nrows()]).unwrap().scaled_weights;
        r.check(equal.iter().all(|&w| w == 1.0), format!("{name}: equal weights do not scale to 1"));
        let weighted = BinomialModelData::new(
            unit.successes().to_vec(),
            unit.trials().to_vec(),
            unit.x().clone(),
            unit.xi().clone(),
            equal,
        )
        .unwrap();
        let a = fit(&weighted, &config).unwrap();
        let b = fit(&unit, &config).unwrap();
        r.check(a == b, format!("{name}: unit-weight chain differs from the unweighted chain"));
    }
}

fn multinomial(r: &mut Report) {
    let mut rng = RngStream::new(7, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = rng.random_range(1..8);
        let ptilde = DMatrix::from_fn(5, c, |_, _| rng.random_range(1e-6..1.0 - 1e-6));
        let probs = compose_category_probs(&ptilde).unwrap();
        for row in probs.row_iter() {
            worst = worst.max((row.sum() - 1.0).abs());
        }
    }
    r.check(worst < 1e-12, format!("composed probabilities sum off by {worst:e}"));

    // C = 2 against the direct binomial fit.
    let n = 80;
    let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let xi = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let w = scale_weights(&raw).unwrap().scaled_weights;
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(1..=2)).collect();
    let config = SamplerConfig { iterations: 1000, burn_in: 200, seed: 7, ..Default::default() };
    let cat = CategoricalData::from_labels(&labels, 2, x.clone(), xi.clone(), w.clone()).unwrap();
    let sliced = fit_multinomial(&cat, &config).unwrap();
    let z = labels.iter().map(|&l| u32::from(l == 1)).collect();
    let direct = fit(&BinomialModelData::new(z, vec![1; n], x, xi, w).unwrap(), &config).unwrap();
    r.check(sliced.len() == 1 && sliced[0] == direct, "C = 2 fit differs from the binomial fit");

    // C = 6 end to end on the synthetic fixture.
    let root = fixtures().join("synthetic");
    let section = DataSection {
        category: Some("category".into()),
        category_order: ["year1", "year2", "year3", "year4", "year5", "survived"].map(String::from).to_vec(),
        covariates: vec!["age".into()],
        ..Default::default()
    };
    let ds = ingest(&root.join("curves.csv"), &root.join("scalars.csv"), &section, Mode::Multinomial).unwrap();
    let basis = BasisExpansion::from_curves(&ds.curves, &ds.grid, 0.95).unwrap();
    let scaling = CovariateScaling::standardizing(&ds.covariate_names, &ds.covariates).unwrap();
    let x = scaling.design(&ds.covariates).unwrap();
    let w = scale_weights(&ds.raw_weights).unwrap().scaled_weights;
    let data = CategoricalData::from_labels(ds.categories.as_ref().unwrap(), 6, x.clone(), basis.scores.clone(), w).unwrap();
    let slices = fit_multinomial(&data, &SamplerConfig { iterations: 1500, burn_in: 500, seed: 11, ..Default::default() }).unwrap();
    let pred = predict_category_probs(&slices, &x, &basis.scores).unwrap();
    let mut violations = 0;
    let mut draws = 0;
    for probs in &pred.per_unit {
        let cumulative = cumulative_probs(probs);
        for s in 0..cumulative.nrows() {
            draws += 1;
            let monotone = (1..6).all(|c| cumulative[(s, c)] >= cumulative[(s, c - 1)]);
            if !monotone || (cumulative[(s, 5)] - 1.0).abs() > 1e-12 {
                violations += 1;
            }
        }
    }
    r.check(violations == 0, format!("{violations} non-monotone cumulative draws"));
    r.note(format!("simplex error {worst:e}; C = 6 run: {} units × {} draws checked", pred.per_unit.len(), draws / pred.per_unit.len().max(1)));
}

fn basis(r: &mut Report) {
    let mut rng = RngStream::new(8, 0);
    let normal = |rows, cols, rng: &mut RngStream| DMatrix::<f64>::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));

    // Orthonormality on arbitrary curves.
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(3..40);
        let t = rng.random_range(2..200);
        let curves = normal(n, t, &mut rng);
        let fpca = BasisExpansion::from_curves(&curves, &CurveGrid::unit(t).unwrap(), 0.95).unwrap();
        worst = worst.max(fpca.orthonormality_error());
    }
    r.check(worst < 1e-8, format!("orthonormality error {worst:e}"));

    // Curves built from known orthonormal functions and orthogonal scores.
    let (n, t) = (60, 120);
    let variances = [2.0, 1.0, 0.5, 0.25];
    let grid = CurveGrid::unit(t).unwrap();
    let phi = normal(t, 4, &mut rng).qr().q() / grid.step().sqrt();
    let mut raw = normal(n, 5, &mut rng);
    raw.set_column(0, &DVector::from_element(n, 1.0));
    let q = raw.qr().q();
    let scores = DMatrix::from_fn(n, 4, |i, k| q[(i, k + 1)] * (variances[k] * (n - 1) as f64).sqrt());
    let mean = DVector::from_fn(t, |j, _| (j as f64 / t as f64 * 6.0).sin());
    let mut curves = &scores * phi.transpose();
    for mut row in curves.row_iter_mut() {
        row += mean.transpose();
    }
    let fpca = BasisExpansion::from_curves(&curves, &grid, 1.0).unwrap();
    r.check(fpca.k() == 4, format!("recovered K = {}", fpca.k()));
    let mut score_err: f64 = 0.0;
    for k in 0..fpca.k().min(4) {
        let sign = fpca.scores.column(k).dot(&scores.column(k)).signum();
        score_err = score_err.max((fpca.scores.column(k) - sign * scores.column(k)).amax());
    }
    r.check(score_err < 1e-8, format!("recovered scores off by {score_err:e}"));

    // ∫η(t)κᵢ(t)dt equals Σ b(k)ξᵢ(k) for in-span curves.
    let b = normal(1, 4, &mut rng);
    let eta = reconstruct_eta(&b, &fpca).unwrap();
    let (_, centered) = center_curves(&curves).unwrap();
    let mut logit_err: f64 = 0.0;
    for i in 0..n {
        let integral: f64 = (0..t).map(|j| eta[(0, j)] * centered[(i, j)]).sum::<f64>() * grid.step();
        let series: f64 = (0..4).map(|k| b[(0, k)] * fpca.scores[(i, k)]).sum();
        logit_err = logit_err.max((integral - series).abs());
    }
    r.check(logit_err < 1e-8, format!("logit equivalence off by {logit_err:e}"));
    r.note(format!("orthonormality {worst:e}, scores {score_err:e}, logit {logit_err:e}"));
}

fn rerun_identical(r: &mut Report, label: &str, dir: &Path, args: &[&str]) -> bool {
    let mut trees = Vec::new();
    for (i, threads) in ["1", "1", "4"].into_iter().enumerate() {
        let out = dir.join(format!("{label}_{i}"));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", path_str(&out), "--threads", threads]);
        run_ok(&full);
        trees.push(read_tree(&out));
    }
    let same = trees.iter().all(|t| *t == trees[0]) && !trees[0].is_empty();
    r.check(same, format!("{label}: outputs differ between runs"));
    same
}

fn determinism(r: &mut Report) {
    let dir = TempDir::new().unwrap();
    let tmp = dir.path();
    let synthetic = fixtures().join("synthetic");
    let toy = fixtures().join("toy");

    let generate_cfg = synthetic.join("generate.toml");
    rerun_identical(r, "generate", tmp, &["generate", "--config", path_str(&generate_cfg)]);

    let toy_cfg = toy.join("fit.toml");
    rerun_identical(r, "fit", tmp, &["fit", "--config", path_str(&toy_cfg)]);

    let text = fs::read_to_string(synthetic.join("multinomial.toml"))
        .unwrap()
        .replace("iterations = 1500", "iterations = 400")
        .replace("burn_in = 500", "burn_in = 100")
        .replace("\"curves.csv\"", &format!("{:?}", synthetic.join("curves.csv")))
        .replace("\"scalars.csv\"", &format!("{:?}", synthetic.join("scalars.csv")));
    let multi_cfg = write_file(tmp, "multinomial.toml", &text);
    rerun_identical(r, "fit_multinomial", tmp, &["fit", "--config", path_str(&multi_cfg)]);

    let fitted = tmp.join("fit_0");
    let predict_cfg = write_file(
        tmp,
        "predict.toml",
        &format!(
            "[predict]\nartifact = {:?}\ncurves = {:?}\nscalars = {:?}\n",
            fitted,
            toy.join("curves.csv"),
            toy.join("scalars.csv")
        ),
    );
    rerun_identical(r, "predict", tmp, &["predict", "--config", path_str(&predict_cfg)]);
    rerun_identical(r, "summarize", tmp, &["summarize", "--artifact", path_str(&fitted)]);
    rerun_identical(r, "summarize_multinomial", tmp, &["summarize", "--artifact", path_str(&tmp.join("fit_multinomial_0"))]);

    let simulate_cfg = write_file(
        tmp,
        "simulate.toml",
        "seed = 5\n[sampler]\niterations = 600\nburn_in = 100\n\
         [simulation]\nreplicates = 3\nexpected_n = 120\nsynthetic = true\n\
         [synthetic]\nunits = 600\ngrid_points = 96\nseed = 9\n",
    );
    rerun_identical(r, "simulate", tmp, &["simulate", "--config", path_str(&simulate_cfg)]);

    // A different seed must change the draws.
    let other = tmp.join("fit_seed");
    run_ok(&["fit", "--config", path_str(&toy_cfg), "--seed", "99", "--out", path_str(&other)]);
    let same_draws = fs::read(other.join("draws.csv")).unwrap() == fs::read(fitted.join("draws.csv")).unwrap();
    r.check(!same_draws, "a different --seed gave the same draws");
    r.note("generate, fit (binomial, multinomial), predict, summarize, simulate: 2 reruns + 4 threads each");
}
