use std::path::{Path, PathBuf};

use calc_core::model::{CovariateMatrix, SubjectSeries};
use calc_core::pipeline::{
    downsample, moving_average, preprocess, read_covariates_csv, read_raw_csv, read_series_csv, standardize_pooled,
    write_covariates_csv, write_raw_csv, write_series_csv, PreprocessConfig, RawActigraphy,
};
use calc_core::Error;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn short_config() -> PreprocessConfig {
    PreprocessConfig {
        allow_short: true,
        ..PreprocessConfig::default()
    }
}

#[test]
fn fixture_matches_golden_output() {
    let raw = read_raw_csv(&fixture("raw_small.csv")).unwrap();
    let out = preprocess(&raw, &short_config()).unwrap();
    let mut buf = Vec::new();
    write_series_csv(&mut buf, &out.series, Some(10)).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), std::fs::read_to_string(fixture("series_golden.csv")).unwrap());
}

#[test]
fn short_subjects_are_excluded_by_default() {
    let raw = read_raw_csv(&fixture("raw_small.csv")).unwrap();
    let err = preprocess(&raw, &PreprocessConfig::default()).unwrap_err();
    assert!(err.is_invalid_input(), "{err}");

    let mut long = raw[0].clone();
    long.minutes = (0..9000).collect();
    long.counts = (0..9000).map(|m| (m % 97) as f64).collect();
    let mut inputs = raw.clone();
    inputs.push(RawActigraphy {
        subject_id: "long".into(),
        ..long
    });
    let out = preprocess(&inputs, &PreprocessConfig::default()).unwrap();
    assert_eq!(out.series.len(), 1);
    assert_eq!(out.series[0].subject_id, "long");
    assert_eq!(out.excluded, vec!["p01", "p02", "p03"]);
    assert_eq!(out.series[0].len(), 9000 / 5);
}

#[test]
fn raw_csv_round_trip() {
    let raw = read_raw_csv(&fixture("raw_small.csv")).unwrap();
    let mut buf = Vec::new();
    write_raw_csv(&mut buf, &raw).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("raw.csv");
    std::fs::write(&p, &buf).unwrap();
    assert_eq!(read_raw_csv(&p).unwrap(), raw);
}

#[test]
fn series_and_covariates_round_trip() {
    let series = vec![
        SubjectSeries::new("a", vec![1, 2, 3], vec![0.1, -1.0 / 3.0, 2.5e-8]).unwrap(),
        SubjectSeries::new("b", vec![5, 6], vec![7.0, f64::MIN_POSITIVE]).unwrap(),
    ];
    let x = CovariateMatrix::from_rows(&[vec![1.0, 0.25], vec![0.0, -3.5]], vec!["sex".into(), "age".into()]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sp = dir.path().join("series.csv");
    let cp = dir.path().join("cov.csv");
    write_series_csv(std::fs::File::create(&sp).unwrap(), &series, None).unwrap();
    write_covariates_csv(std::fs::File::create(&cp).unwrap(), &["a".into(), "b".into()], &x).unwrap();
    let back = read_series_csv(&sp).unwrap();
    assert_eq!(back, series);
    let table = read_covariates_csv(&cp).unwrap();
    assert_eq!(table.subject_ids, vec!["a", "b"]);
    assert_eq!(table.matrix.values(), x.values());
    assert_eq!(table.matrix.column_names, x.column_names);
    // Reordering follows the series.
    let flipped = table.aligned_to(&[back[1].clone(), back[0].clone()]).unwrap();
    assert_eq!(flipped.row(0), x.row(1));
}

fn parse_error_line(content: &str, read: fn(&Path) -> calc_core::Result<()>) -> usize {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("in.csv");
    std::fs::write(&p, content).unwrap();
    match read(&p).unwrap_err() {
        Error::Parse { line, .. } => line,
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn schema_violations_report_line_numbers() {
    let series = |p: &Path| read_series_csv(p).map(|_| ());
    let covs = |p: &Path| read_covariates_csv(p).map(|_| ());
    let raw = |p: &Path| read_raw_csv(p).map(|_| ());
    assert_eq!(parse_error_line("subject_id,t_index,value\na,1,0.5\na,x,1\n", series), 3);
    assert_eq!(parse_error_line("subject,t_index,value\na,1,0.5\n", series), 1);
    assert_eq!(parse_error_line("subject_id,age,sex\na,1,0\nb,,1\n", covs), 3);
    assert_eq!(parse_error_line("subject_id,age\na,1\na,2\n", covs), 3);
    assert_eq!(parse_error_line("subject_id,minute,count\na,0,5\na,1,-2\n", raw), 3);
}

#[test]
fn minute_gaps_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("raw.csv");
    std::fs::write(&p, "subject_id,minute,count\na,0,1\na,1,2\na,3,4\n").unwrap();
    let err = read_raw_csv(&p).unwrap_err();
    assert!(err.is_invalid_input(), "{err}");
}

proptest! {
    #[test]
    fn moving_average_preserves_constants(c in -50.0f64..50.0, len in 15usize..200) {
        let y = vec![c; len];
        for v in moving_average(&y, 15).unwrap() {
            prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn moving_average_stays_within_range(y in prop::collection::vec(-10.0f64..10.0, 15..100)) {
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in moving_average(&y, 15).unwrap() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn downsample_drops_partial_block(y in prop::collection::vec(-10.0f64..10.0, 0..60), f in 1usize..7) {
        let d = downsample(&y, f).unwrap();
        prop_assert_eq!(d.len(), y.len() / f);
        let total: f64 = y[..d.len() * f].iter().sum();
        let recovered: f64 = d.iter().map(|v| v * f as f64).sum();
        prop_assert!((total - recovered).abs() <= 1e-9);
    }

    #[test]
    fn pooled_standardization_has_unit_scale(
        a in prop::collection::vec(-10.0f64..10.0, 2..40),
        b in prop::collection::vec(-10.0f64..10.0, 2..40),
    ) {
        prop_assume!(a.iter().chain(&b).any(|v| (v - a[0]).abs() > 1e-6));
        let (z, scaling) = standardize_pooled(&[a.clone(), b.clone()]).unwrap();
        let all: Vec<f64> = z.iter().flatten().copied().collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var - 1.0).abs() < 1e-9);
        prop_assert!((scaling.invert(z[1][0]) - b[0]).abs() < 1e-9);
    }
}
