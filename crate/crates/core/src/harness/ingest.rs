use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{ObservationSeries, Support};

/// Which CSV columns feed the outcome and the covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub outcome: OutcomeColumn,
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeColumn {
    /// Integer-coded categories or counts.
    Coded(String),
    /// A continuous change cut into ordered classes at `thresholds`.
    Discretized { column: String, thresholds: Vec<f64> },
}

/// The four-class coding of rate changes: `< -0.25`, `[-0.25, 0)`, `[0, 0.25)`, `>= 0.25`.
pub const RATE_THRESHOLDS: [f64; 3] = [-0.25, 0.0, 0.25];

/// Class `1 + #{c : c <= value}` for increasing cut points.
pub fn discretize(value: f64, thresholds: &[f64]) -> u32 {
    1 + thresholds.iter().filter(|&&c| c <= value).count() as u32
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub series: ObservationSeries,
    /// `(raw value, category)` pairs of the recoding, for finite supports.
    pub mapping: Vec<(String, u32)>,
}

impl Ingested {
    /// The recoding table as CSV text.
    pub fn mapping_csv(&self) -> String {
        let mut out = String::from("raw,category\n");
        for (raw, code) in &self.mapping {
            out.push_str(&format!("{raw},{code}\n"));
        }
        out
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Data(format!("column `{name}` not found in header")))
}

fn cell<'a>(record: &'a csv::StringRecord, idx: usize, row: usize, name: &str) -> Result<&'a str> {
    let v = record.get(idx).map(str::trim).unwrap_or("");
    if v.is_empty() || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan") {
        return Err(Error::Data(format!("row {row}: missing value in column `{name}`")));
    }
    Ok(v)
}

fn number(record: &csv::StringRecord, idx: usize, row: usize, name: &str) -> Result<f64> {
    let v = cell(record, idx, row, name)?;
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Data(format!("row {row}: `{v}` in column `{name}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::Data(format!("row {row}: non-finite value in column `{name}`")));
    }
    Ok(x)
}

/// Read a CSV with a header into a validated series.
///
/// Finite supports recode the distinct observed values, in increasing order,
/// to `1..=n` (`n <= categories`). Counts are shifted by one. With
/// `presample`, the first data row is held back as the lagged outcome of the
/// second. Rows are numbered from 1, excluding the header.
pub fn ingest_csv(path: &Path, map: &ColumnMap, support: Support, presample: bool) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let (out_name, out_idx) = match &map.outcome {
        OutcomeColumn::Coded(c) | OutcomeColumn::Discretized { column: c, .. } => (c.clone(), column_index(&headers, c)?),
    };
    let cov_idx: Vec<usize> = map.covariates.iter().map(|c| column_index(&headers, c)).collect::<Result<_>>()?;

    let mut raw_y: Vec<i64> = Vec::new();
    let mut x: Vec<f64> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let v = number(&rec, out_idx, row, &out_name)?;
        let code = match &map.outcome {
            OutcomeColumn::Coded(_) => {
                if v.fract() != 0.0 {
                    return Err(Error::Data(format!("row {row}: outcome `{v}` is not an integer")));
                }
                v as i64
            }
            OutcomeColumn::Discretized { thresholds, .. } => i64::from(discretize(v, thresholds)),
        };
        raw_y.push(code);
        for (&j, name) in cov_idx.iter().zip(&map.covariates) {
            x.push(number(&rec, j, row, name)?);
        }
    }
    if raw_y.is_empty() {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }

    let (codes, mapping) = match support {
        Support::Finite(k) => {
            let distinct: BTreeMap<i64, u32> = raw_y.iter().map(|&v| (v, 0)).collect();
            if distinct.len() > k as usize {
                return Err(Error::Data(format!("{} distinct outcomes but the model has {k} categories", distinct.len())));
            }
            let table: BTreeMap<i64, u32> = distinct.keys().enumerate().map(|(i, &v)| (v, i as u32 + 1)).collect();
            let mapping = table.iter().map(|(v, c)| (v.to_string(), *c)).collect();
            (raw_y.iter().map(|v| table[v]).collect::<Vec<u32>>(), mapping)
        }
        Support::CountablyInfinite => {
            let mut out = Vec::with_capacity(raw_y.len());
            for (i, &v) in raw_y.iter().enumerate() {
                if v < 0 {
                    return Err(Error::Data(format!("row {}: negative count {v}", i + 1)));
                }
                out.push(u32::try_from(v + 1).map_err(|_| Error::Data(format!("row {}: count too large", i + 1)))?);
            }
            (out, Vec::new())
        }
    };

    let p = map.covariates.len();
    let skip = usize::from(presample);
    let n = codes.len().saturating_sub(skip);
    let xm = DMatrix::from_fn(n, p, |t, j| x[(t + skip) * p + j]);
    let series = ObservationSeries::new(codes[skip..].to_vec(), xm, support)?;
    let series = if presample { series.with_presample(codes[0])? } else { series };
    Ok(Ingested { series, mapping })
}
