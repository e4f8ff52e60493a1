//! The `fit`, `predict`, `simulate`, `summarize` and `generate` commands.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{reconstruct_eta, BasisExpansion};
use crate::binomial::{fit, predict_probabilities, BinomialModelData, PosteriorDraws};
use crate::dataset::{CovariateScaling, FunctionalDataset};
use crate::diagnostics::summarize_chains;
use crate::error::{Error, Result};
use crate::evaluation::{
    pointwise_credible_band, quantile, run_simulation_study_detailed, summarize_bce, ModelTag,
};
use crate::harness::artifact::{
    write_basis, write_draws, BasisMetadata, FitArtifact, FitMetadata, SliceMetadata, FORMAT,
    VERSION,
};
use crate::harness::config::{LoadedConfig, Mode, RunConfig};
use crate::harness::ingest::{ingest, read_curves, write_dataset, ScalarTable};
use crate::harness::output::{create_dir, fmt_f64, write_json, write_text, CsvOut};
use crate::multinomial::{cumulative_probs, fit_multinomial, predict_category_probs, CategoricalData};
use crate::survey::scale_weights;
use crate::synthetic::generate;

const WEIGHT_SCALING: &str = "w̃ = n·w/Σw over the analysis sample";

fn required(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| Error::Config(format!("missing `{key}`")))
}

fn with_seed(config: &RunConfig, seed: Option<u64>) -> RunConfig {
    let mut config = config.clone();
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config
}

/// Quantile bounds of an equal-tailed interval at `level`.
fn interval(values: &[f64], level: f64) -> (f64, f64) {
    let alpha = (1.0 - level) / 2.0;
    (quantile(values, alpha), quantile(values, 1.0 - alpha))
}

pub struct FitOutcome {
    pub meta: FitMetadata,
    pub basis: BasisExpansion,
    /// Per draw set, per chain.
    pub chains: Vec<Vec<PosteriorDraws>>,
}

pub fn cmd_fit(loaded: &LoadedConfig, seed: Option<u64>, out: &Path) -> Result<FitOutcome> {
    let config = with_seed(&loaded.config, seed);
    config.validate()?;
    let curves = loaded.resolve(&required(&config.data.curves, "data.curves")?);
    let scalars = loaded.resolve(&required(&config.data.scalars, "data.scalars")?);
    let dataset = ingest(&curves, &scalars, &config.data, config.mode).map_err(|e| e.at_stage("ingest"))?;

    let weights = scale_weights(&dataset.raw_weights).map_err(|e| e.at_stage("survey weights"))?;
    let basis = BasisExpansion::from_curves(&dataset.curves, &dataset.grid, config.basis.threshold)
        .map_err(|e| e.at_stage("basis"))?;
    let scaling = if config.data.standardize {
        CovariateScaling::standardizing(&dataset.covariate_names, &dataset.covariates)
    } else {
        Ok(CovariateScaling::identity(&dataset.covariate_names))
    }
    .map_err(|e| e.at_stage("covariates"))?;
    let x = scaling.design(&dataset.covariates)?;
    let chain_count = config.sampler.chains;
    let chain_seeds: Vec<u64> = (0..chain_count as u64).map(|j| config.seed.wrapping_add(j)).collect();

    let (chains, slices) = match config.mode {
        Mode::Binomial => {
            let data = BinomialModelData::new(
                dataset.successes.clone(),
                dataset.trials.clone(),
                x.clone(),
                basis.scores.clone(),
                weights.scaled_weights.clone(),
            )
            .map_err(|e| e.at_stage("model data"))?;
            let runs = chain_seeds
                .par_iter()
                .map(|&s| fit(&data, &config.sampler.sampler(s)))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_stage("sampler"))?;
            (vec![runs], Vec::new())
        }
        Mode::Multinomial => {
            let labels = dataset.categories.as_ref().expect("multinomial ingest sets labels");
            let data = CategoricalData::from_labels(
                labels,
                dataset.category_names.len(),
                x.clone(),
                basis.scores.clone(),
                weights.scaled_weights.clone(),
            )
            .map_err(|e| e.at_stage("model data"))?;
            let runs = chain_seeds
                .par_iter()
                .map(|&s| fit_multinomial(&data, &config.sampler.sampler(s)))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_stage("sampler"))?;
            let slice_count = dataset.category_names.len() - 1;
            let per_slice: Vec<Vec<PosteriorDraws>> = (0..slice_count)
                .map(|c| runs.iter().map(|chain| chain[c].clone()).collect())
                .collect();
            let slices = (0..slice_count)
                .map(|c| SliceMetadata {
                    category: dataset.category_names[c].clone(),
                    dir: format!("slice_{}", c + 1),
                    units: per_slice[c][0].meta.n,
                })
                .collect();
            (per_slice, slices)
        }
    };

    let meta = FitMetadata {
        format: FORMAT.to_string(),
        version: VERSION.to_string(),
        mode: config.mode,
        seed: config.seed,
        config: config.clone(),
        n: dataset.n(),
        coefficient_names: scaling.coefficient_names(),
        covariate_scaling: scaling,
        weight_scaling: WEIGHT_SCALING.to_string(),
        basis: BasisMetadata::new(&basis, &dataset.raw_times),
        chains: chain_count,
        draws_per_chain: config.sampler.sampler(config.seed).retained(),
        categories: dataset.category_names.clone(),
        slices,
    };

    let write = || -> Result<()> {
        create_dir(out)?;
        write_text(&out.join("config.toml"), &loaded.text)?;
        write_json(&out.join("metadata.json"), &meta)?;
        write_basis(&out.join("basis.csv"), &basis, &dataset.raw_times)?;
        let names = meta.parameter_names();
        for (dir, runs) in meta.draw_dirs().iter().zip(&chains) {
            let dir = out.join(dir);
            create_dir(&dir)?;
            write_draws(&dir.join("draws.csv"), &names, runs)?;
            let pooled = PosteriorDraws::concat(runs)?;
            write_coefficient_summary(&dir.join("beta_summary.csv"), &names, &pooled, config.level)?;
            write_eta_band(&dir.join("eta_band.csv"), &pooled, &basis, &dataset.raw_times, config.level)?;
        }
        let pooled = chains.iter().map(|c| PosteriorDraws::concat(c)).collect::<Result<Vec<_>>>()?;
        match config.mode {
            Mode::Binomial => write_binomial_predictions(
                &out.join("fitted.csv"),
                &dataset.unit_ids,
                &pooled[0],
                &x,
                &basis.scores,
                config.level,
            ),
            Mode::Multinomial => write_category_predictions(
                &out.join("category_probs.csv"),
                &dataset.unit_ids,
                &dataset.category_names,
                &pooled,
                &x,
                &basis.scores,
                config.level,
            ),
        }
    };
    write().map_err(|e| e.at_stage("write artifact"))?;
    Ok(FitOutcome { meta, basis, chains })
}

fn write_coefficient_summary(path: &Path, names: &[String], draws: &PosteriorDraws, level: f64) -> Result<()> {
    let mut out = CsvOut::create(path)?;
    out.row(&["parameter", "mean", "sd", "lower", "median", "upper"])?;
    let columns = draws.beta_draws.column_iter().chain(draws.b_draws.column_iter());
    for (name, col) in names.iter().zip(columns) {
        let values: Vec<f64> = col.iter().copied().collect();
        let s = summarize_chains(&[&values]);
        let (lo, hi) = interval(&values, level);
        out.row(&[
            name.clone(),
            fmt_f64(s.mean),
            fmt_f64(s.sd),
            fmt_f64(lo),
            fmt_f64(s.q50),
            fmt_f64(hi),
        ])?;
    }
    out.finish()
}

fn write_eta_band(
    path: &Path,
    draws: &PosteriorDraws,
    basis: &BasisExpansion,
    raw_times: &[f64],
    level: f64,
) -> Result<()> {
    let eta = reconstruct_eta(&draws.b_draws, basis)?;
    let band = pointwise_credible_band(&eta, basis.grid.times(), level)?;
    if let Some(w) = &band.warning {
        eprintln!("warning: {w}");
    }
    let mut out = CsvOut::create(path)?;
    out.row(&["t", "raw_time", "lower", "mean", "upper"])?;
    for t in 0..band.grid.len() {
        out.row(&[
            fmt_f64(band.grid[t]),
            fmt_f64(raw_times[t]),
            fmt_f64(band.lower[t]),
            fmt_f64(band.mean[t]),
            fmt_f64(band.upper[t]),
        ])?;
    }
    out.finish()
}

fn write_binomial_predictions(
    path: &Path,
    ids: &[String],
    draws: &PosteriorDraws,
    x: &DMatrix<f64>,
    xi: &DMatrix<f64>,
    level: f64,
) -> Result<()> {
    let pred = predict_probabilities(draws, x, xi)?;
    let mut out = CsvOut::create(path)?;
    out.row(&["id", "mean", "lower", "upper"])?;
    for (i, id) in ids.iter().enumerate() {
        let row: Vec<f64> = pred.draws.row(i).iter().copied().collect();
        let (lo, hi) = interval(&row, level);
        out.row(&[id.clone(), fmt_f64(pred.mean[i]), fmt_f64(lo), fmt_f64(hi)])?;
    }
    out.finish()
}

fn write_category_predictions(
    path: &Path,
    ids: &[String],
    categories: &[String],
    slices: &[PosteriorDraws],
    x: &DMatrix<f64>,
    xi: &DMatrix<f64>,
    level: f64,
) -> Result<()> {
    let pred = predict_category_probs(slices, x, xi)?;
    let mut out = CsvOut::create(path)?;
    out.row(&["id", "category", "mean", "lower", "upper", "cumulative_mean"])?;
    for (i, id) in ids.iter().enumerate() {
        let probs = &pred.per_unit[i];
        let cumulative = cumulative_probs(probs).row_mean();
        for (c, name) in categories.iter().enumerate() {
            let col: Vec<f64> = probs.column(c).iter().copied().collect();
            let (lo, hi) = interval(&col, level);
            out.row(&[
                id.clone(),
                name.clone(),
                fmt_f64(pred.mean[(i, c)]),
                fmt_f64(lo),
                fmt_f64(hi),
                fmt_f64(cumulative[c]),
            ])?;
        }
    }
    out.finish()
}

#[derive(Debug, Clone, Serialize)]
struct DerivedMetadata<'a> {
    format: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    basis: Option<&'a BasisMetadata>,
    #[serde(skip_serializing_if = "Option::is_none")]
    artifact: Option<&'a FitMetadata>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<&'static str>,
}

fn artifact_path(loaded: Option<&LoadedConfig>, flag: Option<&Path>, key: fn(&RunConfig) -> &Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.to_path_buf());
    }
    let loaded = loaded.ok_or_else(|| Error::Config("give --artifact or a config naming one".into()))?;
    let p = key(&loaded.config)
        .as_ref()
        .ok_or_else(|| Error::Config("no artifact directory configured; give --artifact".into()))?;
    Ok(loaded.resolve(p))
}

pub fn cmd_predict(loaded: &LoadedConfig, artifact: Option<&Path>, out: &Path) -> Result<()> {
    let dir = artifact_path(Some(loaded), artifact, |c| &c.predict.artifact)?;
    let fit = FitArtifact::read(&dir).map_err(|e| e.at_stage("read artifact"))?;
    let predict = &loaded.config.predict;
    let curves_path = loaded.resolve(&required(&predict.curves, "predict.curves")?);
    let scalars_path = loaded.resolve(&required(&predict.scalars, "predict.scalars")?);
    let data = &fit.meta.config.data;

    let table = read_curves(&curves_path, data.log1p).map_err(|e| e.at_stage("ingest"))?;
    let same_grid = table.raw_times.len() == fit.raw_times.len()
        && table
            .raw_times
            .iter()
            .zip(&fit.raw_times)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
    if !same_grid {
        return Err(Error::validation(format!(
            "{}: time grid differs from the fitted grid ({} points from {} to {})",
            curves_path.display(),
            fit.meta.basis.grid_points,
            fit.meta.basis.raw_time_first,
            fit.meta.basis.raw_time_last
        )));
    }
    let scalars = ScalarTable::read(&scalars_path, &data.id_column)?;
    scalars.check_ids(&table.ids)?;
    let covariates = scalars.covariates(&table.ids, &fit.meta.covariate_scaling.names)?;
    let x = fit.meta.covariate_scaling.design(&covariates)?;
    let xi = fit.basis.project_curves(&table.values)?;
    let pooled = fit.pooled()?;

    create_dir(out)?;
    let path = out.join("predictions.csv");
    match fit.meta.mode {
        Mode::Binomial => write_binomial_predictions(&path, &table.ids, &pooled[0], &x, &xi, predict.level)?,
        Mode::Multinomial => write_category_predictions(
            &path,
            &table.ids,
            &fit.meta.categories,
            &pooled,
            &x,
            &xi,
            predict.level,
        )?,
    }
    write_json(
        &out.join("metadata.json"),
        &DerivedMetadata {
            format: "survey-fda/predict/1",
            version: VERSION,
            command: "predict",
            seed: fit.meta.seed,
            config: &loaded.config,
            basis: Some(&fit.meta.basis),
            artifact: Some(&fit.meta),
            notes: Vec::new(),
        },
    )
}

pub fn cmd_simulate(loaded: &LoadedConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = with_seed(&loaded.config, seed);
    config.validate()?;
    let population: FunctionalDataset = if config.simulation.synthetic {
        generate(&config.synthetic)?.dataset
    } else {
        let curves = loaded.resolve(&required(&config.data.curves, "data.curves")?);
        let scalars = loaded.resolve(&required(&config.data.scalars, "data.scalars")?);
        ingest(&curves, &scalars, &config.data, Mode::Binomial).map_err(|e| e.at_stage("ingest"))?
    };
    let study = config.study();
    let outcome = run_simulation_study_detailed(&population, &study).map_err(|e| e.at_stage("simulation"))?;

    create_dir(out)?;
    write_text(&out.join("config.toml"), &loaded.text)?;
    let mut table = CsvOut::create(&out.join("bce.csv"))?;
    table.row(&["replicate", "model", "bce", "sample_size", "k"])?;
    for r in &outcome.reports {
        table.row(&[
            r.replicate.to_string(),
            r.model_tag.to_string(),
            fmt_f64(r.bce),
            r.sample_size.to_string(),
            r.k.to_string(),
        ])?;
    }
    table.finish()?;

    let mut summary = CsvOut::create(&out.join("bce_summary.csv"))?;
    summary.row(&["model", "replicates", "mean", "se"])?;
    for tag in ModelTag::ALL {
        if let Some((mean, se)) = summarize_bce(&outcome.reports, tag) {
            let count = outcome.reports.iter().filter(|r| r.model_tag == tag).count();
            summary.row(&[tag.to_string(), count.to_string(), fmt_f64(mean), fmt_f64(se)])?;
        }
    }
    summary.finish()?;

    let mut failures = CsvOut::create(&out.join("failures.csv"))?;
    failures.row(&["replicate", "error"])?;
    for (r, e) in &outcome.failures {
        failures.row(&[r.to_string(), e.to_string()])?;
    }
    failures.finish()?;

    write_json(
        &out.join("metadata.json"),
        &DerivedMetadata {
            format: "survey-fda/simulate/1",
            version: VERSION,
            command: "simulate",
            seed: config.seed,
            config: &config,
            basis: None,
            artifact: None,
            notes: vec![
                "each replicate computes one unweighted FPCA on its subsample, shared by FM-W and FM-UW",
                "subsample inverse-probability weights are rescaled to sum to the subsample size",
                "covariates are standardized with the subsample mean and standard deviation",
            ],
        },
    )?;

    let failed = outcome.failures.len();
    if failed as f64 > study.max_failure_rate * study.replicates as f64 {
        let last = outcome
            .failures
            .last()
            .map(|(r, e)| format!("replicate {r}: {e}"))
            .unwrap_or_default();
        return Err(Error::TooManyFailures {
            failed,
            total: study.replicates,
            last,
        });
    }
    Ok(())
}

pub fn cmd_summarize(loaded: Option<&LoadedConfig>, artifact: Option<&Path>, out: &Path) -> Result<()> {
    let dir = artifact_path(loaded, artifact, |c| &c.summarize.artifact)?;
    let fit = FitArtifact::read(&dir).map_err(|e| e.at_stage("read artifact"))?;
    let names = fit.meta.parameter_names();
    let q = fit.meta.coefficient_names.len();
    let sets: Vec<String> = match fit.meta.mode {
        Mode::Binomial => vec!["binomial".to_string()],
        Mode::Multinomial => fit.meta.slices.iter().map(|s| s.dir.clone()).collect(),
    };

    create_dir(out)?;
    let mut diag = CsvOut::create(&out.join("diagnostics.csv"))?;
    diag.row(&["set", "parameter", "mean", "sd", "q05", "q50", "q95", "ess", "rhat", "degenerate"])?;
    let mut trace = CsvOut::create(&out.join("trace.csv"))?;
    let mut header = vec!["set".to_string(), "chain".into(), "iter".into()];
    header.extend(names.iter().cloned());
    trace.row(&header)?;

    for (set, chains) in sets.iter().zip(&fit.chains) {
        for (j, name) in names.iter().enumerate() {
            let columns: Vec<Vec<f64>> = chains
                .iter()
                .map(|c| {
                    if j < q {
                        c.beta_draws.column(j).iter().copied().collect()
                    } else {
                        c.b_draws.column(j - q).iter().copied().collect()
                    }
                })
                .collect();
            let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
            let s = summarize_chains(&refs);
            diag.row(&[
                set.clone(),
                name.clone(),
                fmt_f64(s.mean),
                fmt_f64(s.sd),
                fmt_f64(s.q05),
                fmt_f64(s.q50),
                fmt_f64(s.q95),
                fmt_f64(s.ess),
                fmt_f64(s.rhat),
                s.degenerate.to_string(),
            ])?;
        }
        for (c, draws) in chains.iter().enumerate() {
            let cfg = draws.meta.config;
            for s in 0..draws.len() {
                let mut row = vec![set.clone(), c.to_string(), (cfg.burn_in + (s + 1) * cfg.thin).to_string()];
                row.extend(draws.beta_draws.row(s).iter().map(|&v| fmt_f64(v)));
                row.extend(draws.b_draws.row(s).iter().map(|&v| fmt_f64(v)));
                trace.row(&row)?;
            }
        }
    }
    diag.finish()?;
    trace.finish()?;
    write_json(
        &out.join("metadata.json"),
        &DerivedMetadata {
            format: "survey-fda/summarize/1",
            version: VERSION,
            command: "summarize",
            seed: fit.meta.seed,
            config: &fit.meta.config,
            basis: Some(&fit.meta.basis),
            artifact: None,
            notes: Vec::new(),
        },
    )
}

/// Writes a synthetic data set (`curves.csv`, `scalars.csv`, `truth.csv`).
pub fn cmd_generate(loaded: Option<&LoadedConfig>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut config = loaded.map(|l| l.config.clone()).unwrap_or_default();
    if let Some(seed) = seed {
        config.synthetic.seed = seed;
    }
    let population = generate(&config.synthetic)?;
    create_dir(out)?;
    write_dataset(&population.dataset, &out.join("curves.csv"), &out.join("scalars.csv"))?;
    let mut truth = CsvOut::create(&out.join("truth.csv"))?;
    truth.row(&["t", "raw_time", "eta"])?;
    let d = &population.dataset;
    for (t, eta) in population.eta.iter().enumerate() {
        truth.row(&[fmt_f64(d.grid.times()[t]), fmt_f64(d.raw_times[t]), fmt_f64(*eta)])?;
    }
    truth.finish()?;
    write_json(
        &out.join("metadata.json"),
        &DerivedMetadata {
            format: "survey-fda/generate/1",
            version: VERSION,
            command: "generate",
            seed: config.synthetic.seed,
            config: &config,
            basis: None,
            artifact: None,
            notes: Vec::new(),
        },
    )
}
