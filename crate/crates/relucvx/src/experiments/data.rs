//! Toy dataset generators, CSV ingestion, and dataset CSV round-trips.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Dataset, Task};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyName {
    Toy1d,
    Toy2d,
    Staircase,
}

impl ToyName {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "toy1d" => Ok(Self::Toy1d),
            "toy2d" => Ok(Self::Toy2d),
            "staircase" => Ok(Self::Staircase),
            other => Err(Error::InvalidArgument(format!("unknown toy dataset {other:?}"))),
        }
    }
}

pub const TOY1D_POINTS: usize = 15;
pub const TOY2D_POINTS: usize = 34;
pub const TOY2D_FLIP_RATE: f64 = 0.1;
pub const STAIRCASE_TRAIN: usize = 8;
pub const STAIRCASE_TEST: usize = 100;
pub const STAIRCASE_STEPS: usize = 4;

fn uniform(r: &mut rng::StreamRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

/// Four equal-width steps on [0, 1] with unit rises.
pub fn staircase_target(x: f64) -> f64 {
    ((x * STAIRCASE_STEPS as f64).floor()).clamp(0.0, (STAIRCASE_STEPS - 1) as f64)
}

fn staircase_sample(seed: u64, index: u64, n: usize) -> Result<Dataset> {
    let mut r = rng::substream(seed, rng::DATA, index);
    let xs: Vec<f64> = (0..n).map(|_| uniform(&mut r, 0.0, 1.0)).collect();
    let y = xs.iter().map(|&x| staircase_target(x)).collect();
    Dataset::new(Matrix::from_vec(n, 1, xs)?, y, Task::Regression)
}

/// Training set (8 points) and test set (100 points) of the staircase regression
/// problem, drawn from the same uniform distribution.
pub fn gen_staircase(seed: u64) -> Result<(Dataset, Dataset)> {
    Ok((
        staircase_sample(seed, 0, STAIRCASE_TRAIN)?,
        staircase_sample(seed, 1, STAIRCASE_TEST)?,
    ))
}

/// `n` uniform points in [−2, 2]² labeled by sign(x₁x₂ + 0.3) with 10% flips.
pub fn gen_toy2d_sized(n: usize, seed: u64) -> Result<Dataset> {
    let mut r = rng::substream(seed, rng::DATA, 0);
    let mut data = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a = uniform(&mut r, -2.0, 2.0);
        let b = uniform(&mut r, -2.0, 2.0);
        let mut label = if a * b + 0.3 >= 0.0 { 1.0 } else { -1.0 };
        if r.random::<f64>() < TOY2D_FLIP_RATE {
            label = -label;
        }
        data.extend([a, b]);
        y.push(label);
    }
    Dataset::new(Matrix::from_vec(n, 2, data)?, y, Task::Binary)
}

/// Toy dataset without a bias column. Staircase returns its training set.
pub fn gen_toy(name: ToyName, seed: u64) -> Result<Dataset> {
    let mut r = rng::substream(seed, rng::DATA, 0);
    match name {
        ToyName::Toy1d => {
            let xs: Vec<f64> = (0..TOY1D_POINTS).map(|_| uniform(&mut r, -1.0, 1.0)).collect();
            let y = (0..TOY1D_POINTS)
                .map(|_| if r.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            Dataset::new(Matrix::from_vec(TOY1D_POINTS, 1, xs)?, y, Task::Binary)
        }
        ToyName::Toy2d => gen_toy2d_sized(TOY2D_POINTS, seed),
        ToyName::Staircase => Ok(gen_staircase(seed)?.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// Rows discarded for missing or non-finite fields.
    pub dropped: usize,
    pub standardization: Option<Standardization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub label_col: String,
    pub train_frac: f64,
    pub standardize: bool,
    pub seed: u64,
    pub task: Task,
}

fn is_missing(field: &str) -> bool {
    matches!(
        field.trim().to_ascii_lowercase().as_str(),
        "" | "?" | "na" | "nan" | "null"
    )
}

/// Maps labels to ±1: values already in {−1, 1} are kept, {0, 1} maps 0 to −1,
/// and any other two-valued column maps its smaller value to −1.
fn binary_labels(raw: &[f64]) -> Result<Vec<f64>> {
    let mut values: Vec<f64> = raw.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let low = if values.iter().all(|&v| v == -1.0 || v == 1.0) {
        -1.0
    } else if values.iter().all(|&v| v == 0.0 || v == 1.0) {
        0.0
    } else if values.len() == 2 {
        values[0]
    } else {
        return Err(Error::InvalidData(format!(
            "binary label column has {} distinct values",
            values.len()
        )));
    };
    Ok(raw.iter().map(|&v| if v == low { -1.0 } else { 1.0 }).collect())
}

/// Parses a numeric CSV with a header, drops rows with missing or non-finite
/// fields, shuffles with the seed, splits, and optionally z-scores features
/// with statistics fitted on the training part.
pub fn ingest_csv_reader(reader: impl Read, options: &IngestOptions) -> Result<Split> {
    if !(options.train_frac > 0.0 && options.train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {}",
            options.train_frac
        )));
    }
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers()?.clone();
    let label = header
        .iter()
        .position(|h| h == options.label_col)
        .ok_or_else(|| Error::InvalidData(format!("no column named {:?}", options.label_col)))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for (line, record) in csv.records().enumerate() {
        let record = record?;
        let mut values = Vec::with_capacity(record.len());
        let mut missing = false;
        for field in record.iter() {
            if is_missing(field) {
                missing = true;
                break;
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidData(format!("row {}: cannot parse {field:?} as a number", line + 2))
            })?;
            if !v.is_finite() {
                missing = true;
                break;
            }
            values.push(v);
        }
        if missing {
            dropped += 1;
            continue;
        }
        labels.push(values.remove(label));
        rows.push(values);
    }
    let total = rows.len();
    let n_train = (options.train_frac * total as f64).round() as usize;
    if n_train == 0 || n_train == total {
        return Err(Error::InvalidData(format!(
            "{total} usable rows cannot be split with fraction {}",
            options.train_frac
        )));
    }
    let labels = match options.task {
        Task::Binary => binary_labels(&labels)?,
        Task::Regression => labels,
    };
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng::substream(options.seed, rng::SPLIT, 0));
    let d = rows[0].len();
    let mut take = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = idx.iter().map(|&k| std::mem::take(&mut rows[k])).collect();
        (x, idx.iter().map(|&k| labels[k]).collect())
    };
    let (mut train_x, train_y) = take(&order[..n_train]);
    let (mut test_x, test_y) = take(&order[n_train..]);
    let standardization = if options.standardize {
        let stats = fit_standardization(&train_x, d);
        for row in train_x.iter_mut().chain(test_x.iter_mut()) {
            for j in 0..d {
                row[j] = (row[j] - stats.mean[j]) / stats.std[j];
            }
        }
        Some(stats)
    } else {
        None
    };
    Ok(Split {
        train: Dataset::new(Matrix::from_rows(&train_x)?, train_y, options.task)?,
        test: Dataset::new(Matrix::from_rows(&test_x)?, test_y, options.task)?,
        dropped,
        standardization,
    })
}

pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<Split> {
    ingest_csv_reader(std::fs::File::open(path)?, options)
}

/// Population mean and standard deviation per column; constant columns keep scale 1.
fn fit_standardization(rows: &[Vec<f64>], d: usize) -> Standardization {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for row in rows {
        for j in 0..d {
            mean[j] += row[j];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![0.0; d];
    for row in rows {
        for j in 0..d {
            std[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Standardization { mean, std }
}

const BIAS_HEADER: &str = "bias";
const FROZEN_BIAS_HEADER: &str = "bias_frozen";
const BINARY_HEADER: &str = "label";
const REGRESSION_HEADER: &str = "target";

/// Writes features, an optional bias column and the labels. The header records
/// the task and bias flags so [`read_dataset_csv`] restores the dataset exactly.
pub fn write_dataset_csv(data: &Dataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.feature_dim()).map(|j| format!("x{j}")).collect();
    if data.bias_appended() {
        header.push(if data.bias_frozen() { FROZEN_BIAS_HEADER } else { BIAS_HEADER }.into());
    }
    header.push(match data.task() {
        Task::Binary => BINARY_HEADER.into(),
        Task::Regression => REGRESSION_HEADER.into(),
    });
    w.write_record(&header)?;
    for (row, y) in data.x().iter_rows().zip(data.y()) {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(y.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(input: impl Read) -> Result<Dataset> {
    let mut csv = csv::Reader::from_reader(input);
    let header = csv.headers()?.clone();
    let columns = header.len();
    let task = match header.get(columns.saturating_sub(1)) {
        Some(BINARY_HEADER) => Task::Binary,
        Some(REGRESSION_HEADER) => Task::Regression,
        other => {
            return Err(Error::InvalidData(format!(
                "last column must be {BINARY_HEADER:?} or {REGRESSION_HEADER:?}, found {other:?}"
            )))
        }
    };
    let bias = match header.get(columns.saturating_sub(2)) {
        Some(BIAS_HEADER) => Some(false),
        Some(FROZEN_BIAS_HEADER) => Some(true),
        _ => None,
    };
    let features = columns - 1 - usize::from(bias.is_some());
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in csv.records() {
        let record = record?;
        let values: Vec<f64> = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::InvalidData(format!("cannot parse {f:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != columns {
            return Err(Error::InvalidData("ragged dataset row".into()));
        }
        x.push(values[..features].to_vec());
        y.push(values[columns - 1]);
    }
    let data = Dataset::new(Matrix::from_rows(&x)?, y, task)?;
    Ok(match bias {
        Some(frozen) => data.with_bias(frozen),
        None => data,
    })
}

/// Rows and missing-value rows of the bundled mammographic-masses stand-in.
pub const MASSES_ROWS: usize = 961;
pub const MASSES_MISSING_ROWS: usize = 131;
pub const MASSES_SEED: u64 = 20_230_607;

/// The bundled stand-in CSV, generated by [`masses_standin_csv`].
pub const MASSES_STANDIN: &str = include_str!("../../data/masses_standin.csv");

fn categorical(r: &mut rng::StreamRng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = r.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Synthetic stand-in for the UCI mammographic-masses table: five ordinal or
/// integer features (assessment 1–5, age, shape 1–4, margin 1–5, density 1–4)
/// and a binary severity, with class-conditional distributions and 131 rows
/// carrying a missing field marked `?`.
pub fn masses_standin_csv() -> String {
    let mut r = rng::substream(MASSES_SEED, rng::DATA, 0);
    let mut out = String::from("assessment,age,shape,margin,density,severity\n");
    let mut missing: Vec<usize> = (0..MASSES_ROWS).collect();
    missing.shuffle(&mut r);
    missing.truncate(MASSES_MISSING_ROWS);
    for k in 0..MASSES_ROWS {
        let malignant = r.random::<f64>() < 0.46;
        let (assessment, age_mean, shape, margin, density) = if malignant {
            (
                [0.0, 0.01, 0.04, 0.30, 0.65],
                62.0,
                [0.08, 0.08, 0.20, 0.64],
                [0.10, 0.03, 0.22, 0.38, 0.27],
                [0.02, 0.06, 0.88, 0.04],
            )
        } else {
            (
                [0.01, 0.03, 0.12, 0.74, 0.10],
                51.0,
                [0.42, 0.38, 0.08, 0.12],
                [0.62, 0.03, 0.12, 0.16, 0.07],
                [0.03, 0.07, 0.86, 0.04],
            )
        };
        let z: f64 = r.sample(StandardNormal);
        let mut fields = [
            (categorical(&mut r, &assessment) + 1).to_string(),
            ((age_mean + 14.0 * z).round().clamp(18.0, 96.0) as i64).to_string(),
            (categorical(&mut r, &shape) + 1).to_string(),
            (categorical(&mut r, &margin) + 1).to_string(),
            (categorical(&mut r, &density) + 1).to_string(),
            u8::from(malignant).to_string(),
        ];
        if missing.contains(&k) {
            fields[categorical(&mut r, &[0.02, 0.04, 0.22, 0.33, 0.39])] = "?".into();
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_shapes_and_ranges() {
        let t1 = gen_toy(ToyName::Toy1d, 3).unwrap();
        assert_eq!((t1.n(), t1.d()), (15, 1));
        let t2 = gen_toy(ToyName::Toy2d, 3).unwrap();
        assert_eq!((t2.n(), t2.d()), (34, 2));
        assert!(t2.x().as_slice().iter().all(|v| (-2.0..=2.0).contains(v)));
        let (train, test) = gen_staircase(3).unwrap();
        assert_eq!((train.n(), test.n()), (8, 100));
        assert_eq!(staircase_target(0.0), 0.0);
        assert_eq!(staircase_target(0.26), 1.0);
        assert_eq!(staircase_target(1.0), 3.0);
    }

    #[test]
    fn binary_label_mapping() {
        assert_eq!(binary_labels(&[0.0, 1.0, 1.0]).unwrap(), vec![-1.0, 1.0, 1.0]);
        assert_eq!(binary_labels(&[-1.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(binary_labels(&[2.0, 4.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(binary_labels(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert!(binary_labels(&[0.0, 1.0, 2.0]).is_err());
    }
}
