//! Actigraphy preprocessing and dataset I/O: log transform, smoothing,
//! downsampling, pooled standardization, and the CSV formats for raw counts,
//! model-ready series and covariates.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::CompensatedSum;
use crate::model::{CovariateMatrix, SubjectSeries};

/// Raw minutes required for a subject to enter the analysis (six full days).
pub const MIN_RAW_MINUTES: usize = 6 * 24 * 60;

/// Per-minute activity counts of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct RawActigraphy {
    pub subject_id: String,
    /// Minutes since midnight of the first recording day.
    pub minutes: Vec<u32>,
    pub counts: Vec<f64>,
}

impl RawActigraphy {
    pub fn validate(&self) -> Result<()> {
        if self.minutes.len() != self.counts.len() {
            return Err(Error::DimensionMismatch(format!(
                "subject {}: {} minutes but {} counts",
                self.subject_id,
                self.minutes.len(),
                self.counts.len()
            )));
        }
        if self.counts.is_empty() {
            return Err(Error::InvalidArgument(format!("subject {} has no counts", self.subject_id)));
        }
        if let Some(c) = self.counts.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "subject {}: counts must be finite and non-negative, found {c}",
                self.subject_id
            )));
        }
        if let Some(w) = self.minutes.windows(2).find(|w| w[1] != w[0] + 1) {
            return Err(Error::InvalidArgument(format!(
                "subject {}: gap in the minute grid between {} and {}",
                self.subject_id, w[0], w[1]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    #[default]
    Pooled,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub smooth_span: usize,
    pub downsample_factor: usize,
    pub standardize: Standardize,
    /// `y = ln(log_offset + count)`.
    pub log_offset: f64,
    /// Keep subjects with fewer than six days of raw minutes.
    pub allow_short: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            smooth_span: 15,
            downsample_factor: 5,
            standardize: Standardize::Pooled,
            log_offset: 1.0,
            allow_short: false,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smooth_span == 0 || self.smooth_span.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("smooth_span must be odd, got {}", self.smooth_span)));
        }
        if self.downsample_factor == 0 || 60 % self.downsample_factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "downsample_factor must be a positive divisor of 60, got {}",
                self.downsample_factor
            )));
        }
        if !(self.log_offset > 0.0 && self.log_offset.is_finite()) {
            return Err(Error::InvalidArgument("log_offset must be positive".into()));
        }
        Ok(())
    }

    /// Epochs per hour after downsampling one-minute data.
    pub fn epochs_per_hour(&self) -> u32 {
        (60 / self.downsample_factor) as u32
    }
}

/// `ln(1 + c)` per element, accurate for small counts.
pub fn log_transform(counts: &[f64]) -> Result<Vec<f64>> {
    log_transform_offset(counts, 1.0)
}

fn log_transform_offset(counts: &[f64], offset: f64) -> Result<Vec<f64>> {
    counts
        .iter()
        .map(|&c| {
            if !(c >= 0.0) {
                return Err(Error::InvalidArgument(format!("counts must be non-negative, found {c}")));
            }
            Ok(if offset == 1.0 { c.ln_1p() } else { (offset + c).ln() })
        })
        .collect()
}

/// Centred moving average of odd `span`; near the edges the window is
/// truncated to the available points.
pub fn moving_average(y: &[f64], span: usize) -> Result<Vec<f64>> {
    if span == 0 || span.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("span must be odd, got {span}")));
    }
    if span > y.len() {
        return Err(Error::InvalidArgument(format!(
            "span {span} exceeds the series length {}",
            y.len()
        )));
    }
    let h = span / 2;
    Ok((0..y.len())
        .map(|t| {
            let lo = t.saturating_sub(h);
            let hi = (t + h + 1).min(y.len());
            let mut s = CompensatedSum::new();
            for v in &y[lo..hi] {
                s.add(*v);
            }
            s.value() / (hi - lo) as f64
        })
        .collect())
}

/// Means of consecutive non-overlapping blocks; a trailing partial block is dropped.
pub fn downsample(y: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(Error::InvalidArgument("downsample factor must be at least 1".into()));
    }
    Ok(y.chunks_exact(factor).map(|b| b.iter().sum::<f64>() / factor as f64).collect())
}

/// Pooled location and scale applied to every subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledScaling {
    pub mean: f64,
    pub sd: f64,
}

impl PooledScaling {
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.sd + self.mean
    }
}

/// Standardizes all subjects with the mean and sample sd of the combined values.
pub fn standardize_pooled(series: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, PooledScaling)> {
    let n: usize = series.iter().map(|s| s.len()).sum();
    if n < 2 {
        return Err(Error::InvalidArgument("pooled standardization needs at least two values".into()));
    }
    let mut sum = CompensatedSum::new();
    series.iter().flatten().for_each(|v| sum.add(*v));
    let mean = sum.value() / n as f64;
    let mut ss = CompensatedSum::new();
    series.iter().flatten().for_each(|v| ss.add((v - mean) * (v - mean)));
    let sd = (ss.value() / (n - 1) as f64).sqrt();
    if !(sd > 0.0) {
        return Err(Error::InvalidArgument("pooled standard deviation is zero".into()));
    }
    let scaling = PooledScaling { mean, sd };
    let out = series.iter().map(|s| s.iter().map(|v| scaling.apply(*v)).collect()).collect();
    Ok((out, scaling))
}

/// Standardizes non-binary, non-intercept covariate columns.
pub fn standardize_covariates(x: &CovariateMatrix) -> Result<CovariateMatrix> {
    x.standardized()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub series: Vec<SubjectSeries>,
    pub scaling: Option<PooledScaling>,
    /// Subjects left out for having too few raw minutes.
    pub excluded: Vec<String>,
}

/// log -> moving average -> block means -> pooled standardization.
///
/// Block `k` of a subject whose first minute is `m0` starts at minute
/// `m0 + k * factor` and is stored with epoch index `(m0 + k * factor) / factor + 1`.
pub fn preprocess(raw: &[RawActigraphy], config: &PreprocessConfig) -> Result<Preprocessed> {
    config.validate()?;
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for r in raw {
        r.validate()?;
        if r.counts.len() < MIN_RAW_MINUTES && !config.allow_short {
            excluded.push(r.subject_id.clone());
        } else {
            kept.push(r);
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no subject has the required {MIN_RAW_MINUTES} raw minutes"
        )));
    }
    let f = config.downsample_factor;
    let reduced: Vec<(Vec<u32>, Vec<f64>)> = kept
        .par_iter()
        .map(|r| {
            let y = log_transform_offset(&r.counts, config.log_offset)?;
            let y = moving_average(&y, config.smooth_span)?;
            let y = downsample(&y, f)?;
            if y.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "subject {} has fewer minutes than one downsampling block",
                    r.subject_id
                )));
            }
            let m0 = r.minutes[0] as usize;
            let t = (0..y.len()).map(|k| ((m0 + k * f) / f + 1) as u32).collect();
            Ok((t, y))
        })
        .collect::<Result<_>>()?;
    let (values, scaling) = match config.standardize {
        Standardize::Pooled => {
            let ys: Vec<Vec<f64>> = reduced.iter().map(|r| r.1.clone()).collect();
            let (v, s) = standardize_pooled(&ys)?;
            (v, Some(s))
        }
        Standardize::None => (reduced.iter().map(|r| r.1.clone()).collect(), None),
    };
    let series = kept
        .iter()
        .zip(reduced)
        .zip(values)
        .map(|((r, (t, _)), y)| SubjectSeries::new(r.subject_id.clone(), t, y))
        .collect::<Result<_>>()?;
    Ok(Preprocessed { series, scaling, excluded })
}

fn parse_err(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &str, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("{what} '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{what} '{field}' is not finite")));
    }
    Ok(v)
}

fn check_header(path: &str, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
    if got != expected {
        return Err(parse_err(path, 1, format!("expected header '{}', found '{}'", expected.join(","), got.join(","))));
    }
    Ok(())
}

/// Rows grouped by subject in order of first appearance.
fn read_grouped<R: Read, T>(
    reader: R,
    path: &str,
    header: &[&str],
    mut parse: impl FnMut(&csv::StringRecord, usize) -> Result<T>,
) -> Result<Vec<(String, Vec<T>)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(path, rdr.headers()?, header)?;
    let mut groups: Vec<(String, Vec<T>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(parse_err(path, line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let id = rec[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(path, line, "empty subject_id"));
        }
        let item = parse(&rec, line)?;
        let g = *index.entry(id.clone()).or_insert_with(|| {
            groups.push((id, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(item);
    }
    Ok(groups)
}

/// Reads `subject_id,minute,count` rows.
pub fn read_raw_csv(path: &Path) -> Result<Vec<RawActigraphy>> {
    let p = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let groups = read_grouped(file, &p, &["subject_id", "minute", "count"], |rec, line| {
        let minute: u32 = rec[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(&p, line, format!("minute '{}' is not a non-negative integer", &rec[1])))?;
        let count = parse_f64(&p, line, &rec[2], "count")?;
        if count < 0.0 {
            return Err(parse_err(&p, line, format!("negative count {count}")));
        }
        Ok((minute, count))
    })?;
    groups
        .into_iter()
        .map(|(id, rows)| {
            let raw = RawActigraphy {
                subject_id: id,
                minutes: rows.iter().map(|r| r.0).collect(),
                counts: rows.iter().map(|r| r.1).collect(),
            };
            raw.validate()?;
            Ok(raw)
        })
        .collect()
}

pub fn write_raw_csv<W: Write>(out: W, raw: &[RawActigraphy]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "minute", "count"])?;
    for r in raw {
        for (m, c) in r.minutes.iter().zip(&r.counts) {
            w.write_record([r.subject_id.clone(), m.to_string(), c.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `subject_id,t_index,value` rows.
pub fn read_series_csv(path: &Path) -> Result<Vec<SubjectSeries>> {
    let p = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let groups = read_grouped(file, &p, &["subject_id", "t_index", "value"], |rec, line| {
        let t: u32 = rec[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(&p, line, format!("t_index '{}' is not a non-negative integer", &rec[1])))?;
        Ok((t, parse_f64(&p, line, &rec[2], "value")?))
    })?;
    groups
        .into_iter()
        .map(|(id, rows)| SubjectSeries::new(id, rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()))
        .collect()
}

/// Writes series rows; `decimals` fixes the number of digits after the
/// point, otherwise the shortest round-trip representation is used.
pub fn write_series_csv<W: Write>(out: W, series: &[SubjectSeries], decimals: Option<usize>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "t_index", "value"])?;
    for s in series {
        for (t, y) in s.t_index.iter().zip(&s.y) {
            let v = match decimals {
                Some(d) => format!("{y:.d$}"),
                None => y.to_string(),
            };
            w.write_record([s.subject_id.clone(), t.to_string(), v])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Covariates keyed by subject, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub subject_ids: Vec<String>,
    pub matrix: CovariateMatrix,
}

impl CovariateTable {
    /// Rows reordered to follow `series`; every subject must be present.
    pub fn aligned_to(&self, series: &[SubjectSeries]) -> Result<CovariateMatrix> {
        let rows = series
            .iter()
            .map(|s| {
                let i = self
                    .subject_ids
                    .iter()
                    .position(|id| *id == s.subject_id)
                    .ok_or_else(|| Error::InvalidArgument(format!("no covariates for subject {}", s.subject_id)))?;
                Ok(self.matrix.row(i).to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = CovariateMatrix::from_rows(&rows, self.matrix.column_names.clone())?;
        m.standardization = self.matrix.standardization.clone();
        Ok(m)
    }
}

/// Reads `subject_id,<name1>,...` rows. Empty or non-numeric cells are errors.
pub fn read_covariates_csv(path: &Path) -> Result<CovariateTable> {
    let p = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || headers[0].trim() != "subject_id" {
        return Err(parse_err(&p, 1, "expected header 'subject_id,<covariate names>'"));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(parse_err(&p, line, format!("expected {} fields, found {}", headers.len(), rec.len())));
        }
        let id = rec[0].trim().to_string();
        if ids.contains(&id) {
            return Err(parse_err(&p, line, format!("duplicate subject_id {id}")));
        }
        let row = rec
            .iter()
            .skip(1)
            .zip(&names)
            .map(|(f, n)| {
                if f.trim().is_empty() {
                    Err(parse_err(&p, line, format!("missing value for covariate {n}")))
                } else {
                    parse_f64(&p, line, f, n)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        ids.push(id);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(&p, 1, "no covariate rows"));
    }
    Ok(CovariateTable {
        subject_ids: ids,
        matrix: CovariateMatrix::from_rows(&rows, names)?,
    })
}

pub fn write_covariates_csv<W: Write>(out: W, subject_ids: &[String], x: &CovariateMatrix) -> Result<()> {
    if subject_ids.len() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} subject ids for {} covariate rows",
            subject_ids.len(),
            x.rows()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["subject_id".to_string()];
    header.extend(x.column_names.iter().cloned());
    w.write_record(&header)?;
    for (i, id) in subject_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(x.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
