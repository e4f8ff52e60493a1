//! On-disk layout of a fit artifact.
//!
//! ```text
//! <out>/config.toml        the configuration file, copied verbatim
//! <out>/metadata.json      FitMetadata
//! <out>/basis.csv          t, raw_time, mean, phi_1..phi_K
//! <out>/draws.csv          chain, iter, <coefficients>, b_1..b_K   (binomial)
//! <out>/slice_<c>/draws.csv                                       (multinomial)
//! ```
//!
//! Every number is written in the shortest form that parses back to the
//! same `f64`, so reading an artifact restores the draws exactly.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisExpansion, CurveGrid, SIGN_CONVENTION};
use crate::binomial::{DrawsMeta, PosteriorDraws, SamplerConfig};
use crate::dataset::CovariateScaling;
use crate::error::{Error, Result};
use crate::harness::config::{Mode, RunConfig};
use crate::harness::output::{fmt_f64, CsvOut};

pub const FORMAT: &str = "survey-fda/fit/1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TIME_RESCALING: &str = "raw time labels mapped affinely onto [0, 1]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMetadata {
    pub k: usize,
    pub threshold: f64,
    pub eigenvalues: Vec<f64>,
    pub var_explained: Vec<f64>,
    pub total_variance: f64,
    pub sign_convention: String,
    pub grid_points: usize,
    pub raw_time_first: f64,
    pub raw_time_last: f64,
    pub time_rescaling: String,
    pub centering: String,
}

impl BasisMetadata {
    pub fn new(basis: &BasisExpansion, raw_times: &[f64]) -> Self {
        Self {
            k: basis.k(),
            threshold: basis.threshold,
            eigenvalues: basis.eigenvalues.clone(),
            var_explained: basis.var_explained.clone(),
            total_variance: basis.total_variance,
            sign_convention: SIGN_CONVENTION.to_string(),
            grid_points: basis.grid.len(),
            raw_time_first: raw_times[0],
            raw_time_last: raw_times[raw_times.len() - 1],
            time_rescaling: TIME_RESCALING.to_string(),
            centering: "unweighted sample mean; unweighted eigendecomposition".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMetadata {
    pub category: String,
    pub dir: String,
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub format: String,
    pub version: String,
    pub mode: Mode,
    pub seed: u64,
    pub config: RunConfig,
    pub n: usize,
    pub coefficient_names: Vec<String>,
    pub covariate_scaling: CovariateScaling,
    pub weight_scaling: String,
    pub basis: BasisMetadata,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub categories: Vec<String>,
    pub slices: Vec<SliceMetadata>,
}

impl FitMetadata {
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = self.coefficient_names.clone();
        names.extend((1..=self.basis.k).map(|k| format!("b_{k}")));
        names
    }

    pub fn draw_dirs(&self) -> Vec<String> {
        match self.mode {
            Mode::Binomial => vec![String::new()],
            Mode::Multinomial => self.slices.iter().map(|s| s.dir.clone()).collect(),
        }
    }
}

pub fn write_basis(path: &Path, basis: &BasisExpansion, raw_times: &[f64]) -> Result<()> {
    let mut out = CsvOut::create(path)?;
    let mut header = vec!["t".to_string(), "raw_time".into(), "mean".into()];
    header.extend((1..=basis.k()).map(|k| format!("phi_{k}")));
    out.row(&header)?;
    for (t, &time) in basis.grid.times().iter().enumerate() {
        let mut row = vec![fmt_f64(time), fmt_f64(raw_times[t]), fmt_f64(basis.mean_curve[t])];
        row.extend(basis.basis.row(t).iter().map(|&v| fmt_f64(v)));
        out.row(&row)?;
    }
    out.finish()
}

/// Writes retained draws of one or more chains.
pub fn write_draws(path: &Path, names: &[String], chains: &[PosteriorDraws]) -> Result<()> {
    let mut out = CsvOut::create(path)?;
    let mut header = vec!["chain".to_string(), "iter".into()];
    header.extend(names.iter().cloned());
    out.row(&header)?;
    for (c, draws) in chains.iter().enumerate() {
        let cfg = draws.meta.config;
        for s in 0..draws.len() {
            let iter = cfg.burn_in + (s + 1) * cfg.thin;
            let mut row = vec![c.to_string(), iter.to_string()];
            row.extend(draws.beta_draws.row(s).iter().map(|&v| fmt_f64(v)));
            row.extend(draws.b_draws.row(s).iter().map(|&v| fmt_f64(v)));
            out.row(&row)?;
        }
    }
    out.finish()
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| Error::parse(path, format!("line {line}: `{cell}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// One [`PosteriorDraws`] per chain.
pub fn read_draws(path: &Path, meta: &FitMetadata, units: usize) -> Result<Vec<PosteriorDraws>> {
    let (header, rows) = read_table(path)?;
    let names = meta.parameter_names();
    if header.len() != names.len() + 2 || header[2..] != names[..] {
        return Err(Error::parse(path, "draw columns do not match the metadata"));
    }
    let q = meta.coefficient_names.len();
    let k = meta.basis.k;
    let config = meta.config.sampler.sampler(meta.seed);
    let mut chains = Vec::with_capacity(meta.chains);
    for c in 0..meta.chains {
        let mine: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] == c as f64).collect();
        if mine.len() != meta.draws_per_chain {
            return Err(Error::parse(
                path,
                format!("chain {c} has {} draws, expected {}", mine.len(), meta.draws_per_chain),
            ));
        }
        let m = mine.len();
        chains.push(PosteriorDraws {
            beta_draws: DMatrix::from_fn(m, q, |s, j| mine[s][2 + j]),
            b_draws: DMatrix::from_fn(m, k, |s, j| mine[s][2 + q + j]),
            meta: DrawsMeta {
                config: SamplerConfig {
                    seed: config.seed + c as u64,
                    ..config
                },
                n: units,
                q,
                k,
            },
        });
    }
    Ok(chains)
}

pub struct FitArtifact {
    pub dir: PathBuf,
    pub meta: FitMetadata,
    pub basis: BasisExpansion,
    pub raw_times: Vec<f64>,
    /// Per draw set (one for binomial, one per slice otherwise), per chain.
    pub chains: Vec<Vec<PosteriorDraws>>,
}

impl FitArtifact {
    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("metadata.json");
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: FitMetadata =
            serde_json::from_str(&text).map_err(|e| Error::parse(&meta_path, e.to_string()))?;
        if meta.format != FORMAT {
            return Err(Error::parse(
                &meta_path,
                format!("unsupported artifact format `{}`", meta.format),
            ));
        }

        let basis_path = dir.join("basis.csv");
        let (header, rows) = read_table(&basis_path)?;
        let k = meta.basis.k;
        if header.len() != 3 + k || rows.len() != meta.basis.grid_points {
            return Err(Error::parse(&basis_path, "basis table does not match the metadata"));
        }
        let t_len = rows.len();
        let grid = CurveGrid::new(rows.iter().map(|r| r[0]).collect())?;
        let raw_times = rows.iter().map(|r| r[1]).collect();
        let basis = BasisExpansion {
            grid,
            mean_curve: DVector::from_fn(t_len, |t, _| rows[t][2]),
            basis: DMatrix::from_fn(t_len, k, |t, j| rows[t][3 + j]),
            scores: DMatrix::zeros(0, k),
            eigenvalues: meta.basis.eigenvalues.clone(),
            var_explained: meta.basis.var_explained.clone(),
            total_variance: meta.basis.total_variance,
            threshold: meta.basis.threshold,
        };

        let units: Vec<usize> = match meta.mode {
            Mode::Binomial => vec![meta.n],
            Mode::Multinomial => meta.slices.iter().map(|s| s.units).collect(),
        };
        let chains = meta
            .draw_dirs()
            .iter()
            .zip(units)
            .map(|(sub, units)| read_draws(&dir.join(sub).join("draws.csv"), &meta, units))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
            basis,
            raw_times,
            chains,
        })
    }

    /// All chains of each draw set stacked.
    pub fn pooled(&self) -> Result<Vec<PosteriorDraws>> {
        self.chains.iter().map(|c| PosteriorDraws::concat(c)).collect()
    }
}
