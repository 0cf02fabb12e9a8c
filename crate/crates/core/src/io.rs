//! File formats: label/prediction lists, sparse marginal rows, classifier
//! JSON, reports, traces, and small discrete distributions.
//!
//! The text formats share one shape: a header line `n m`, then exactly `n`
//! body rows. Label rows hold comma-separated label indices (possibly
//! empty), optionally followed by whitespace-separated `feature:value`
//! tokens, which are ignored — so the common sparse classification dump
//! format can be read directly. Marginal rows hold whitespace-separated
//! `label:probability` pairs. Parse errors report 1-based line numbers.

use crate::classifier::{AffineTopK, RandomizedClassifier};
use crate::dataset::{LabelMatrix, MarginalMatrix, PredictionMatrix};
use crate::error::{Error, Result};
use crate::fw::FWTrace;
use crate::oracle::DiscreteDistribution;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn parse_header(line: Option<&str>) -> Result<(usize, usize)> {
    let line = line.ok_or_else(|| Error::parse(1, "missing `n m` header"))?;
    let mut it = line.split_whitespace();
    let n = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(1, "header must start with the instance count"))?;
    let m = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(1, "header must contain the label count"))?;
    if it.next().is_some() {
        return Err(Error::parse(1, "header must be exactly `n m`"));
    }
    Ok((n, m))
}

/// Collects exactly `n` body rows, tolerating trailing blank lines.
fn body_rows<'a>(lines: &mut std::str::Lines<'a>, n: usize) -> Result<Vec<(usize, &'a str)>> {
    let mut rows = Vec::with_capacity(n);
    for (i, line) in lines.by_ref().enumerate() {
        let lineno = i + 2;
        if rows.len() == n {
            if !line.trim().is_empty() {
                return Err(Error::parse(
                    lineno,
                    "unexpected content after the last row",
                ));
            }
            continue;
        }
        rows.push((lineno, line));
    }
    if rows.len() < n {
        return Err(Error::Parse {
            line: rows.len() + 2,
            msg: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    Ok(rows)
}

fn parse_label_row(lineno: usize, line: &str, m: usize) -> Result<Vec<u32>> {
    let Some(first) = line.split_whitespace().next() else {
        return Ok(vec![]);
    };
    // A `feature:value` token in first position means the row has no labels.
    if first.contains(':') {
        return Ok(vec![]);
    }
    let mut out = Vec::new();
    for piece in first.split(',') {
        let j: u32 = piece
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad label index {piece:?}")))?;
        if j as usize >= m {
            return Err(Error::parse(
                lineno,
                format!("label index {j} out of range for m={m}"),
            ));
        }
        out.push(j);
    }
    Ok(out)
}

fn load_label_like(path: &Path) -> Result<(usize, Vec<Vec<u32>>)> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let (n, m) = parse_header(lines.next())?;
    let rows = body_rows(&mut lines, n)?;
    let parsed = rows
        .into_iter()
        .map(|(lineno, line)| parse_label_row(lineno, line, m))
        .collect::<Result<Vec<_>>>()?;
    Ok((m, parsed))
}

/// Reads ground-truth labels: header `n m`, then one comma-separated label
/// list per row (duplicates are merged, order is normalized).
pub fn load_labels(path: &Path) -> Result<LabelMatrix> {
    let (m, rows) = load_label_like(path)?;
    LabelMatrix::from_rows(m, rows)
}

/// Reads predictions in the same grammar as [`load_labels`].
pub fn load_predictions(path: &Path) -> Result<PredictionMatrix> {
    let (m, rows) = load_label_like(path)?;
    PredictionMatrix::from_rows(m, rows)
}

fn write_label_like(n: usize, m: usize, rows: impl Iterator<Item = Vec<u32>>) -> String {
    let mut out = format!("{n} {m}\n");
    for row in rows {
        let line = row
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Writes labels in the grammar read by [`load_labels`].
pub fn save_labels(labels: &LabelMatrix, path: &Path) -> Result<()> {
    let text = write_label_like(
        labels.n(),
        labels.m(),
        (0..labels.n()).map(|i| labels.row(i).to_vec()),
    );
    write_file(path, &text)?;
    Ok(())
}

/// Writes predictions in the grammar read by [`load_predictions`].
pub fn save_predictions(preds: &PredictionMatrix, path: &Path) -> Result<()> {
    let text = write_label_like(
        preds.n(),
        preds.m(),
        (0..preds.n()).map(|i| preds.row(i).to_vec()),
    );
    write_file(path, &text)?;
    Ok(())
}

/// Reads sparse marginals: header `n m`, then whitespace-separated
/// `label:probability` pairs per row. Duplicate labels within a row and
/// probabilities outside `[0, 1]` are rejected with their line number.
/// `keep_top` optionally truncates each row to its largest entries.
pub fn load_marginals(path: &Path, keep_top: Option<usize>) -> Result<MarginalMatrix> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let (n, m) = parse_header(lines.next())?;
    let body = body_rows(&mut lines, n)?;
    let mut rows = Vec::with_capacity(n);
    for (lineno, line) in body {
        let mut row: Vec<(u32, f64)> = Vec::new();
        for token in line.split_whitespace() {
            let (j, p) = token.split_once(':').ok_or_else(|| {
                Error::parse(lineno, format!("expected label:prob, got {token:?}"))
            })?;
            let j: u32 = j
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad label index {j:?}")))?;
            let p: f64 = p
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad probability {p:?}")))?;
            if j as usize >= m {
                return Err(Error::parse(
                    lineno,
                    format!("label index {j} out of range for m={m}"),
                ));
            }
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::parse(
                    lineno,
                    format!("probability {p} outside [0, 1]"),
                ));
            }
            if row.iter().any(|&(seen, _)| seen == j) {
                return Err(Error::parse(lineno, format!("duplicate label index {j}")));
            }
            row.push((j, p));
        }
        rows.push(row);
    }
    let mut mm = MarginalMatrix::from_rows(m, rows)?;
    if let Some(kp) = keep_top {
        mm = mm.truncate_top(kp)?;
    }
    Ok(mm)
}

/// Writes marginals in the grammar read by [`load_marginals`].
pub fn save_marginals(mm: &MarginalMatrix, path: &Path) -> Result<()> {
    let mut out = format!("{} {}\n", mm.n(), mm.m());
    for i in 0..mm.n() {
        let (idx, val) = mm.row(i);
        let line = idx
            .iter()
            .zip(val)
            .map(|(j, p)| format!("{j}:{p}"))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&line);
        out.push('\n');
    }
    write_file(path, &out)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    a: Vec<f64>,
    b: Vec<f64>,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct ClassifierFile {
    m: usize,
    k: usize,
    components: Vec<ComponentFile>,
}

/// Writes a randomized classifier as JSON.
pub fn save_classifier(rclf: &RandomizedClassifier, path: &Path) -> Result<()> {
    let file = ClassifierFile {
        m: rclf.m(),
        k: rclf.k(),
        components: rclf
            .components()
            .iter()
            .zip(rclf.weights())
            .map(|(c, &w)| ComponentFile {
                a: c.slopes().to_vec(),
                b: c.offsets().to_vec(),
                weight: w,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    write_file(path, &text)?;
    Ok(())
}

/// Reads a classifier back, revalidating shapes, budget, and weights
/// (weights must sum to one within `1e-9` and are renormalized).
pub fn load_classifier(path: &Path) -> Result<RandomizedClassifier> {
    let text = read_file(path)?;
    let file: ClassifierFile = serde_json::from_str(&text)?;
    let mut components = Vec::with_capacity(file.components.len());
    let mut weights = Vec::with_capacity(file.components.len());
    for comp in file.components {
        if comp.a.len() != file.m {
            return Err(Error::InvalidClassifier(format!(
                "component has {} slopes, header says m={}",
                comp.a.len(),
                file.m
            )));
        }
        components.push(AffineTopK::new(comp.a, comp.b, file.k)?);
        weights.push(comp.weight);
    }
    RandomizedClassifier::new(components, weights)
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub strategy: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// A results table, written as TSV plus a JSON mirror.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn push(&mut self, strategy: &str, metric: &str, mean: f64, std: f64) {
        self.rows.push(ReportRow {
            strategy: strategy.to_string(),
            metric: metric.to_string(),
            mean,
            std,
        });
    }
}

/// Writes `{base}.tsv` and `{base}.json`; returns both paths.
pub fn save_report(report: &Report, base: &Path) -> Result<(PathBuf, PathBuf)> {
    let tsv_path = PathBuf::from(format!("{}.tsv", base.display()));
    let json_path = PathBuf::from(format!("{}.json", base.display()));
    let mut tsv = String::from("strategy\tmetric\tmean\tstd\n");
    for row in &report.rows {
        tsv.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\n",
            row.strategy, row.metric, row.mean, row.std
        ));
    }
    write_file(&tsv_path, &tsv)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(&json_path, &json)?;
    Ok((tsv_path, json_path))
}

/// Reads back a JSON report.
pub fn load_report(path: &Path) -> Result<Report> {
    let text = read_file(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes an optimization trace as TSV.
pub fn save_trace(trace: &FWTrace, path: &Path) -> Result<()> {
    let mut out = String::from("iteration\tobjective\talpha\n");
    for row in &trace.rows {
        out.push_str(&format!(
            "{}\t{:.12}\t{:.12}\n",
            row.iteration, row.objective, row.alpha
        ));
    }
    write_file(path, &out)?;
    Ok(())
}

/// Reads a discrete distribution: header `n m`, then one row per support
/// point holding the point's weight followed by its `m` label marginals.
pub fn load_distribution(path: &Path) -> Result<DiscreteDistribution> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let (n, m) = parse_header(lines.next())?;
    let body = body_rows(&mut lines, n)?;
    let mut weights = Vec::with_capacity(n);
    let mut marginals = Vec::with_capacity(n);
    for (lineno, line) in body {
        let nums = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("bad number {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() != m + 1 {
            return Err(Error::parse(
                lineno,
                format!(
                    "expected weight plus {m} marginals, found {} numbers",
                    nums.len()
                ),
            ));
        }
        weights.push(nums[0]);
        marginals.push(nums[1..].to_vec());
    }
    DiscreteDistribution::new(weights, marginals)
}

/// Writes a distribution in the grammar read by [`load_distribution`].
pub fn save_distribution(dist: &DiscreteDistribution, path: &Path) -> Result<()> {
    let mut out = format!("{} {}\n", dist.len(), dist.m());
    for p in 0..dist.len() {
        let mut line = dist.weight(p).to_string();
        for v in dist.marginals(p) {
            line.push(' ');
            line.push_str(&v.to_string());
        }
        out.push_str(&line);
        out.push('\n');
    }
    write_file(path, &out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fw::{StopReason, TraceRow};
    use tempfile::tempdir;

    #[test]
    fn labels_round_trip_with_feature_tokens() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        fs::write(&path, "4 5\n0,2 17:0.5 23:1.0\n\n3:0.25 9:0.75\n4,1\n").unwrap();
        let labels = load_labels(&path).unwrap();
        assert_eq!(labels.n(), 4);
        assert_eq!(labels.row(0), &[0, 2]);
        assert_eq!(labels.row(1), &[] as &[u32]);
        assert_eq!(labels.row(2), &[] as &[u32]); // features only
        assert_eq!(labels.row(3), &[1, 4]); // normalized order

        let out = dir.path().join("copy.txt");
        save_labels(&labels, &out).unwrap();
        let again = load_labels(&out).unwrap();
        for i in 0..labels.n() {
            assert_eq!(labels.row(i), again.row(i));
        }
    }

    #[test]
    fn label_parse_errors_carry_line_numbers() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.txt");

        fs::write(&path, "2 3\n0,7\n1\n").unwrap();
        match load_labels(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        fs::write(&path, "2 3\n0,\n1\n").unwrap();
        assert!(matches!(
            load_labels(&path),
            Err(Error::Parse { line: 2, .. })
        ));

        fs::write(&path, "3 3\n0\n1\n").unwrap();
        assert!(matches!(load_labels(&path), Err(Error::Parse { .. })));

        fs::write(&path, "1 3\n0\n2\n").unwrap();
        assert!(matches!(
            load_labels(&path),
            Err(Error::Parse { line: 3, .. })
        ));

        fs::write(&path, "nope\n").unwrap();
        assert!(matches!(
            load_labels(&path),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn marginals_parse_validate_and_truncate() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("marg.txt");
        fs::write(&path, "2 4\n0:0.9 3:0.2 1:0.5\n\n").unwrap();
        let mm = load_marginals(&path, None).unwrap();
        assert_eq!(mm.n(), 2);
        let (idx, val) = mm.row(0);
        assert_eq!(idx, &[0, 1, 3]);
        assert_eq!(val, &[0.9, 0.5, 0.2]);
        assert_eq!(mm.row(1).0.len(), 0);

        let trunc = load_marginals(&path, Some(2)).unwrap();
        let (idx, val) = trunc.row(0);
        assert_eq!(idx, &[0, 1]);
        assert_eq!(val, &[0.9, 0.5]);

        fs::write(&path, "1 4\n0:0.9 0:0.5\n").unwrap();
        assert!(matches!(
            load_marginals(&path, None),
            Err(Error::Parse { line: 2, .. })
        ));

        fs::write(&path, "1 4\n0:1.5\n").unwrap();
        assert!(matches!(
            load_marginals(&path, None),
            Err(Error::Parse { line: 2, .. })
        ));

        fs::write(&path, "1 4\n0=0.5\n").unwrap();
        assert!(load_marginals(&path, None).is_err());
    }

    #[test]
    fn marginals_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("marg.txt");
        let mm =
            MarginalMatrix::from_rows(3, vec![vec![(0, 0.25), (2, 0.125)], vec![], vec![(1, 1.0)]])
                .unwrap();
        save_marginals(&mm, &path).unwrap();
        let again = load_marginals(&path, None).unwrap();
        for i in 0..mm.n() {
            assert_eq!(mm.row(i), again.row(i));
        }
    }

    #[test]
    fn classifier_json_round_trips_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("clf.json");
        let c1 = AffineTopK::new(vec![1.0, 2.5, 0.1], vec![0.0, -0.5, 0.25], 2).unwrap();
        let c2 = AffineTopK::new(vec![0.3, 0.7, 1.9], vec![0.5, 0.0, 0.0], 2).unwrap();
        let rclf = RandomizedClassifier::new(vec![c1, c2], vec![0.375, 0.625]).unwrap();
        save_classifier(&rclf, &path).unwrap();
        let again = load_classifier(&path).unwrap();
        assert_eq!(again.weights(), rclf.weights());
        for (a, b) in again.components().iter().zip(rclf.components()) {
            assert_eq!(a.slopes(), b.slopes());
            assert_eq!(a.offsets(), b.offsets());
        }
    }

    #[test]
    fn classifier_load_rejects_bad_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("clf.json");

        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(load_classifier(&path), Err(Error::Json(_))));

        // Weights off by more than the tolerance.
        fs::write(
            &path,
            r#"{"m":2,"k":1,"components":[{"a":[1.0,1.0],"b":[0.0,0.0],"weight":0.9}]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_classifier(&path),
            Err(Error::InvalidWeights(_))
        ));

        // Slope vector disagrees with the header.
        fs::write(
            &path,
            r#"{"m":3,"k":1,"components":[{"a":[1.0,1.0],"b":[0.0,0.0],"weight":1.0}]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_classifier(&path),
            Err(Error::InvalidClassifier(_))
        ));
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("preds.txt");
        let preds =
            PredictionMatrix::from_rows(4, vec![vec![0, 3], vec![1, 2], vec![0, 1]]).unwrap();
        save_predictions(&preds, &path).unwrap();
        let again = load_predictions(&path).unwrap();
        for i in 0..preds.n() {
            assert_eq!(preds.row(i), again.row(i));
        }
    }

    #[test]
    fn report_writes_tsv_and_json_mirror() {
        let dir = tempdir().unwrap();
        let base = dir.path().join("report");
        let mut report = Report::default();
        report.push("topk", "instp@3", 0.8125, 0.0);
        report.push("macro-recall", "recall@3", 0.5, 0.015625);
        let (tsv, json) = save_report(&report, &base).unwrap();
        let tsv_text = fs::read_to_string(&tsv).unwrap();
        assert!(tsv_text.starts_with("strategy\tmetric\tmean\tstd\n"));
        assert!(tsv_text.contains("topk\tinstp@3\t0.812500\t0.000000\n"));
        let again = load_report(&json).unwrap();
        assert_eq!(again, report);
    }

    #[test]
    fn trace_tsv_has_one_row_per_iteration() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trace.tsv");
        let trace = FWTrace {
            rows: vec![
                TraceRow {
                    iteration: 0,
                    objective: 0.25,
                    alpha: 1.0,
                },
                TraceRow {
                    iteration: 1,
                    objective: 0.5,
                    alpha: 0.75,
                },
            ],
            stop: StopReason::MaxIterations,
            confusion: crate::confusion::ConfusionTensor::from_raw_unchecked(
                vec![crate::confusion::BinaryConfusion::from_array([
                    0.25, 0.25, 0.25, 0.25,
                ])],
                1,
            ),
        };
        save_trace(&trace, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "iteration\tobjective\talpha");
        assert!(lines[1].starts_with("0\t0.25"));
    }

    #[test]
    fn distribution_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dist.tsv");
        let d = DiscreteDistribution::coupling_example_a();
        save_distribution(&d, &path).unwrap();
        let again = load_distribution(&path).unwrap();
        assert_eq!(d, again);

        fs::write(&path, "1 3\n0.5 0.4 0.2\n").unwrap();
        assert!(load_distribution(&path).is_err()); // row too short
    }
}
