//! Reading and writing the delimited-text data layout.
//!
//! Curves file: a header `id,<t1>,<t2>,…` whose time labels parse as
//! numbers, then one row per unit with its id and T values.
//!
//! Scalars file: a header naming every column, then one row per unit. The
//! id column, weight column, response or category column and covariates are
//! chosen in the `[data]` section of the configuration.
//!
//! Units appear in curves-file order. Both files must list the same ids.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::basis::CurveGrid;
use crate::dataset::FunctionalDataset;
use crate::error::{Error, Result};
use crate::harness::config::{DataSection, Mode};
use crate::harness::output::{fmt_f64, CsvOut};

#[derive(Debug, Clone)]
pub struct CurveTable {
    pub ids: Vec<String>,
    pub raw_times: Vec<f64>,
    /// n×T
    pub values: DMatrix<f64>,
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_number(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| {
        Error::validation(format!(
            "{}:{line}: column `{column}`: `{cell}` is not a number",
            path.display()
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::validation(format!(
            "{}:{line}: column `{column}`: value `{cell}` is not finite",
            path.display()
        )));
    }
    Ok(v)
}

fn parse_count(path: &Path, line: u64, column: &str, cell: &str) -> Result<u32> {
    cell.parse().map_err(|_| {
        Error::validation(format!(
            "{}:{line}: column `{column}`: `{cell}` is not a nonnegative integer",
            path.display()
        ))
    })
}

pub fn read_curves(path: &Path, log1p: bool) -> Result<CurveTable> {
    let mut reader = open(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 3 {
        return Err(Error::validation(format!(
            "{}:1: header needs an id column and at least 2 time labels",
            path.display()
        )));
    }
    let raw_times = header
        .iter()
        .skip(1)
        .map(|label| parse_number(path, 1, "header", label))
        .collect::<Result<Vec<_>>>()?;
    let t_len = raw_times.len();

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = line_of(&record);
        if record.len() != t_len + 1 {
            return Err(Error::validation(format!(
                "{}:{line}: expected {} fields, found {}",
                path.display(),
                t_len + 1,
                record.len()
            )));
        }
        ids.push(record[0].to_string());
        for (j, cell) in record.iter().skip(1).enumerate() {
            let v = parse_number(path, line, &header[j + 1], cell)?;
            if log1p {
                if v <= -1.0 {
                    return Err(Error::validation(format!(
                        "{}:{line}: column `{}`: log(1 + x) needs x > -1, got {v}",
                        path.display(),
                        &header[j + 1]
                    )));
                }
                values.push(v.ln_1p());
            } else {
                values.push(v);
            }
        }
    }
    if ids.is_empty() {
        return Err(Error::validation(format!("{}: no data rows", path.display())));
    }
    let n = ids.len();
    Ok(CurveTable {
        ids,
        raw_times,
        values: DMatrix::from_row_slice(n, t_len, &values),
    })
}

/// Named columns of the scalars file, keyed by unit id.
pub struct ScalarTable {
    pub path: std::path::PathBuf,
    pub columns: Vec<String>,
    rows: HashMap<String, (u64, Vec<String>)>,
}

impl ScalarTable {
    pub fn read(path: &Path, id_column: &str) -> Result<Self> {
        let mut reader = open(path)?;
        let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let columns: Vec<String> = header.iter().map(str::to_string).collect();
        let id_idx = columns.iter().position(|c| c == id_column).ok_or_else(|| {
            Error::validation(format!(
                "{}:1: missing id column `{id_column}`",
                path.display()
            ))
        })?;
        let mut rows = HashMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let line = line_of(&record);
            if record.len() != columns.len() {
                return Err(Error::validation(format!(
                    "{}:{line}: expected {} fields, found {}",
                    path.display(),
                    columns.len(),
                    record.len()
                )));
            }
            let id = record[id_idx].to_string();
            let cells = record.iter().map(str::to_string).collect();
            if rows.insert(id.clone(), (line, cells)).is_some() {
                return Err(Error::validation(format!(
                    "{}:{line}: duplicate unit id `{id}`",
                    path.display()
                )));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| {
            Error::validation(format!("{}:1: missing column `{name}`", self.path.display()))
        })
    }

    fn row(&self, id: &str) -> Result<&(u64, Vec<String>)> {
        self.rows.get(id).ok_or_else(|| {
            Error::validation(format!(
                "{}: no row for unit id `{id}` from the curves file",
                self.path.display()
            ))
        })
    }

    pub fn numbers(&self, ids: &[String], column: &str) -> Result<Vec<f64>> {
        let j = self.column_index(column)?;
        ids.iter()
            .map(|id| {
                let (line, cells) = self.row(id)?;
                parse_number(&self.path, *line, column, &cells[j])
            })
            .collect()
    }

    pub fn counts(&self, ids: &[String], column: &str) -> Result<Vec<u32>> {
        let j = self.column_index(column)?;
        ids.iter()
            .map(|id| {
                let (line, cells) = self.row(id)?;
                parse_count(&self.path, *line, column, &cells[j])
            })
            .collect()
    }

    pub fn labels(&self, ids: &[String], column: &str) -> Result<Vec<(u64, String)>> {
        let j = self.column_index(column)?;
        ids.iter()
            .map(|id| {
                let (line, cells) = self.row(id)?;
                Ok((*line, cells[j].clone()))
            })
            .collect()
    }

    pub fn covariates(&self, ids: &[String], names: &[String]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(ids.len(), names.len());
        for (j, name) in names.iter().enumerate() {
            let col = self.numbers(ids, name)?;
            out.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        Ok(out)
    }

    /// Fails unless the table covers exactly `ids`.
    pub fn check_ids(&self, ids: &[String]) -> Result<()> {
        if self.rows.len() != ids.len() {
            return Err(Error::validation(format!(
                "{} lists {} units, the curves file {}",
                self.path.display(),
                self.rows.len(),
                ids.len()
            )));
        }
        for id in ids {
            self.row(id)?;
        }
        Ok(())
    }
}

fn check_unique(path: &Path, ids: &[String]) -> Result<()> {
    let mut seen = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if let Some(prev) = seen.insert(id.as_str(), i) {
            return Err(Error::validation(format!(
                "{}: unit id `{id}` appears on data rows {} and {}",
                path.display(),
                prev + 1,
                i + 1
            )));
        }
    }
    Ok(())
}

/// Builds a validated data set from the two files.
pub fn ingest(curves: &Path, scalars: &Path, data: &DataSection, mode: Mode) -> Result<FunctionalDataset> {
    let table = read_curves(curves, data.log1p)?;
    check_unique(curves, &table.ids)?;
    let grid = CurveGrid::rescaled_to_unit(&table.raw_times)
        .map_err(|e| Error::validation(format!("{}: {e}", curves.display())))?;
    let sc = ScalarTable::read(scalars, &data.id_column)?;
    sc.check_ids(&table.ids)?;
    let ids = table.ids;
    let n = ids.len();

    let raw_weights = sc.numbers(&ids, &data.weight)?;
    let covariates = sc.covariates(&ids, &data.covariates)?;

    let (successes, trials, categories, category_names) = match mode {
        Mode::Binomial => {
            let response = data.response.as_deref().ok_or_else(|| {
                Error::Config("binomial mode needs data.response".into())
            })?;
            let successes = sc.counts(&ids, response)?;
            let trials = match data.trials.as_deref() {
                Some(col) => sc.counts(&ids, col)?,
                None => vec![1; n],
            };
            (successes, trials, None, Vec::new())
        }
        Mode::Multinomial => {
            let column = data.category.as_deref().ok_or_else(|| {
                Error::Config("multinomial mode needs data.category".into())
            })?;
            let order = &data.category_order;
            let labels = sc
                .labels(&ids, column)?
                .into_iter()
                .map(|(line, label)| {
                    order.iter().position(|c| *c == label).map(|i| i + 1).ok_or_else(|| {
                        Error::validation(format!(
                            "{}:{line}: category `{label}` is not in data.category_order",
                            scalars.display()
                        ))
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            // Binary indicator of the first category, kept for reference.
            let successes = labels.iter().map(|&l| u32::from(l == 1)).collect();
            (successes, vec![1; n], Some(labels), order.clone())
        }
    };

    let dataset = FunctionalDataset {
        unit_ids: ids,
        successes,
        trials,
        covariate_names: data.covariates.clone(),
        covariates,
        curves: table.values,
        raw_times: table.raw_times,
        grid,
        raw_weights,
        categories,
        category_names,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Writes a data set in the layout [`ingest`] reads: curves with `id` and
/// the raw time labels, scalars with `id`, `weight`, `response` (binomial
/// data), `trials` when any unit has more than one, `category` when present,
/// then the covariates.
pub fn write_dataset(dataset: &FunctionalDataset, curves: &Path, scalars: &Path) -> Result<()> {
    let mut out = CsvOut::create(curves)?;
    let mut header = vec!["id".to_string()];
    header.extend(dataset.raw_times.iter().map(|&t| fmt_f64(t)));
    out.row(&header)?;
    for i in 0..dataset.n() {
        let mut row = vec![dataset.unit_ids[i].clone()];
        row.extend(dataset.curves.row(i).iter().map(|&v| fmt_f64(v)));
        out.row(&row)?;
    }
    out.finish()?;

    let with_trials = dataset.trials.iter().any(|&t| t != 1);
    let mut out = CsvOut::create(scalars)?;
    let mut header = vec!["id".to_string(), "weight".into(), "response".into()];
    if with_trials {
        header.push("trials".into());
    }
    if dataset.categories.is_some() {
        header.push("category".into());
    }
    header.extend(dataset.covariate_names.iter().cloned());
    out.row(&header)?;
    for i in 0..dataset.n() {
        let mut row = vec![
            dataset.unit_ids[i].clone(),
            fmt_f64(dataset.raw_weights[i]),
            dataset.successes[i].to_string(),
        ];
        if with_trials {
            row.push(dataset.trials[i].to_string());
        }
        if let Some(c) = &dataset.categories {
            row.push(dataset.category_names[c[i] - 1].clone());
        }
        row.extend(dataset.covariates.row(i).iter().map(|&v| fmt_f64(v)));
        out.row(&row)?;
    }
    out.finish()
}
