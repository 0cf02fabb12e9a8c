//! End-to-end tests that drive the compiled binary through temp files:
//! reproducibility, exit codes, audit, and cross-command consistency.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn budgetk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_budgetk"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Deterministic pseudo-random value in [0, 1) from instance/label indices.
fn hash01(i: usize, j: usize) -> f64 {
    let x = (i as u64)
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((j as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f));
    let x = (x ^ (x >> 29)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    ((x >> 11) as f64) / ((1u64 << 53) as f64)
}

/// Writes a synthetic labels/marginals pair where marginals correlate with
/// the true labels; returns the two paths.
fn write_dataset(dir: &Path, n: usize, m: usize) -> (PathBuf, PathBuf) {
    let mut labels = format!("{n} {m}\n");
    let mut marginals = format!("{n} {m}\n");
    for i in 0..n {
        let mut row = Vec::new();
        let mut pairs = Vec::new();
        for j in 0..m {
            let present = hash01(i, j) > 0.6;
            if present {
                row.push(j.to_string());
            }
            let noise = hash01(i + 7919, j);
            let p = (0.15 + 0.55 * (present as u8 as f64) + 0.25 * noise).clamp(0.01, 0.99);
            pairs.push(format!("{j}:{p:.4}"));
        }
        labels.push_str(&row.join(","));
        labels.push('\n');
        marginals.push_str(&pairs.join(" "));
        marginals.push('\n');
    }
    let lp = dir.join("labels.txt");
    let mp = dir.join("marginals.txt");
    std::fs::write(&lp, labels).unwrap();
    std::fs::write(&mp, marginals).unwrap();
    (lp, mp)
}

/// Hand-written two-component mixture (uniform weights): plain top-k and a
/// tilted variant, so repeated sampling genuinely varies.
fn write_mixture(dir: &Path, m: usize, k: usize) -> PathBuf {
    let ones = vec![1.0f64; m];
    let zeros = vec![0.0f64; m];
    let mut tilt = zeros.clone();
    tilt[0] = 0.4;
    tilt[m - 1] = -0.4;
    let json = serde_json::json!({
        "m": m,
        "k": k,
        "components": [
            {"a": ones, "b": zeros, "weight": 0.5},
            {"a": ones, "b": tilt, "weight": 0.5},
        ],
    });
    let path = dir.join("mix.json");
    std::fs::write(&path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
    path
}

#[test]
fn help_and_usage_errors_exit_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let ok = budgetk(dir.path(), &["--help"]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).contains("infer"));

    let unknown = budgetk(dir.path(), &["defer"]);
    assert_eq!(code(&unknown), 2);

    let missing = budgetk(dir.path(), &["infer", "--k", "2"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("labels.txt"), "2 3\n0\n1\n").unwrap();
    std::fs::write(dir.path().join("bad.txt"), "2 3\n0:0.9 1:1.7\n1:0.5\n").unwrap();
    let out = budgetk(
        dir.path(),
        &[
            "infer",
            "--labels",
            "labels.txt",
            "--marginals",
            "bad.txt",
            "--k",
            "1",
        ],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("line 2"));

    let gone = budgetk(
        dir.path(),
        &[
            "infer",
            "--labels",
            "labels.txt",
            "--marginals",
            "nope.txt",
            "--k",
            "1",
        ],
    );
    assert_eq!(code(&gone), 2);
    assert!(stderr(&gone).contains("nope.txt"));
}

#[test]
fn contract_violations_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, marginals) = write_dataset(dir.path(), 4, 3);
    let out = budgetk(
        dir.path(),
        &[
            "infer",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "9",
        ],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    // Fractional rows summing to 2 cannot satisfy --k 3.
    std::fs::write(dir.path().join("pi.txt"), "1 4\n0:0.5 1:0.5 2:0.5 3:0.5\n").unwrap();
    let out = budgetk(
        dir.path(),
        &[
            "sample", "--pi", "pi.txt", "--k", "3", "--seed", "1", "--out", "s.txt",
        ],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn oversized_search_space_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // C(12,6)^3 = 924^3 ~ 7.9e8 assignments > the default 1e6 cap.
    let mut dist = String::from("3 12\n");
    let marginals = (0..12)
        .map(|j| format!("0.{}", 30 + j))
        .collect::<Vec<_>>()
        .join(" ");
    for w in ["0.4", "0.3", "0.3"] {
        dist.push_str(&format!("{w} {marginals}\n"));
    }
    std::fs::write(dir.path().join("dist.txt"), dist).unwrap();
    let out = budgetk(
        dir.path(),
        &["oracle", "--metric", "f1", "--k", "6", "--dist", "dist.txt"],
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("exceeds the limit"));
}

#[test]
fn builtin_coupling_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = budgetk(dir.path(), &["oracle", "--check-appendix-e"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("first-point decision flip: yes"), "{text}");
    assert!(text.contains("reference values reproduced within 1e-6: yes"));
}

#[test]
fn oracle_builtin_distributions_resolve() {
    let dir = tempfile::tempdir().unwrap();
    for (name, expect) in [
        ("builtin:appendixE-A", "point 0: 0,2"),
        ("builtin:appendixE-B", "point 0: 1,2"),
    ] {
        let out = budgetk(
            dir.path(),
            &[
                "oracle",
                "--metric",
                "jaccard",
                "--k",
                "2",
                "--dist",
                name,
                "--smoothing",
                "0",
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains(expect), "{name}: {}", stdout(&out));
    }
}

#[test]
fn infer_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, marginals) = write_dataset(dir.path(), 40, 6);
    let mix = write_mixture(dir.path(), 6, 2);
    let run = |tag: &str, seed: &str| {
        let out_base = format!("rep-{tag}");
        let out = budgetk(
            dir.path(),
            &[
                "infer",
                "--labels",
                labels.to_str().unwrap(),
                "--marginals",
                marginals.to_str().unwrap(),
                "--k",
                "2",
                "--strategy",
                "topk,macro-recall",
                "--classifier",
                mix.to_str().unwrap(),
                "--repeats",
                "6",
                "--seed",
                seed,
                "--out",
                &out_base,
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        (
            stdout(&out),
            std::fs::read(dir.path().join(format!("{out_base}.tsv"))).unwrap(),
            std::fs::read(dir.path().join(format!("{out_base}.json"))).unwrap(),
        )
    };
    let (stdout_a, tsv_a, json_a) = run("a", "42");
    let (stdout_b, tsv_b, json_b) = run("b", "42");
    assert_eq!(stdout_a, stdout_b);
    assert_eq!(tsv_a, tsv_b);
    assert_eq!(json_a, json_b);

    // A different seed must change at least the randomized-strategy rows.
    let (stdout_c, _, _) = run("c", "43");
    assert_ne!(stdout_a, stdout_c);

    // Deterministic strategies report exactly zero deviation.
    for line in stdout_a.lines().filter(|l| l.starts_with("topk\t")) {
        assert!(line.ends_with("\t0.000000"), "{line}");
    }
}

#[test]
fn audit_verifies_emitted_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, marginals) = write_dataset(dir.path(), 25, 5);
    let mix = write_mixture(dir.path(), 5, 2);
    let out = budgetk(
        dir.path(),
        &[
            "infer",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "2",
            "--strategy",
            "topk",
            "--classifier",
            mix.to_str().unwrap(),
            "--repeats",
            "4",
            "--seed",
            "9",
            "--out",
            "audited",
            "--audit",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("recomputed from emitted predictions and matched"));
    // One file for the deterministic strategy, one per repeat for the mixture.
    assert!(dir.path().join("audited.preds.topk.r0.txt").exists());
    assert!(!dir.path().join("audited.preds.topk.r1.txt").exists());
    for r in 0..4 {
        assert!(dir
            .path()
            .join(format!("audited.preds.mix.r{r}.txt"))
            .exists());
    }

    // --audit without --out is a usage error.
    let out = budgetk(
        dir.path(),
        &[
            "infer",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "2",
            "--audit",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn report_command_reproduces_infer_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, marginals) = write_dataset(dir.path(), 30, 5);
    let infer = budgetk(
        dir.path(),
        &[
            "infer",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "2",
            "--strategy",
            "topk",
            "--out",
            "base",
        ],
    );
    assert_eq!(code(&infer), 0, "{}", stderr(&infer));
    let report = budgetk(
        dir.path(),
        &[
            "report",
            "--labels",
            labels.to_str().unwrap(),
            "--predictions",
            "base.preds.topk.r0.txt",
            "--k",
            "2",
            "--name",
            "topk",
        ],
    );
    assert_eq!(code(&report), 0, "{}", stderr(&report));
    // Identical rows: same strategy name, metrics, and formatted numbers.
    let body = |s: &str| s.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(body(&stdout(&infer)), body(&stdout(&report)));
}

#[test]
fn sample_is_seed_deterministic_and_respects_budget() {
    let dir = tempfile::tempdir().unwrap();
    let (_, marginals) = write_dataset(dir.path(), 12, 6);
    let mix = write_mixture(dir.path(), 6, 3);
    let run = |seed: &str, out: &str| {
        let res = budgetk(
            dir.path(),
            &[
                "sample",
                "--classifier",
                mix.to_str().unwrap(),
                "--marginals",
                marginals.to_str().unwrap(),
                "--k",
                "3",
                "--seed",
                seed,
                "--out",
                out,
            ],
        );
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        std::fs::read_to_string(dir.path().join(out)).unwrap()
    };
    let a = run("5", "a.txt");
    let b = run("5", "b.txt");
    let c = run("6", "c.txt");
    assert_eq!(a, b);
    assert_ne!(a, c);
    for line in a.lines().skip(1) {
        assert_eq!(
            line.split(',').count(),
            3,
            "row must carry exactly k labels: {line}"
        );
    }
}

#[test]
fn plain_topk_strategy_matches_single_component_classifier() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, marginals) = write_dataset(dir.path(), 20, 5);
    let single = serde_json::json!({
        "m": 5,
        "k": 2,
        "components": [{"a": vec![1.0; 5], "b": vec![0.0; 5], "weight": 1.0}],
    });
    std::fs::write(
        dir.path().join("single.json"),
        serde_json::to_string(&single).unwrap(),
    )
    .unwrap();
    let out = budgetk(
        dir.path(),
        &[
            "infer",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "2",
            "--strategy",
            "topk",
            "--classifier",
            "single.json",
            "--out",
            "same",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let a = std::fs::read_to_string(dir.path().join("same.preds.topk.r0.txt")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("same.preds.single.r0.txt")).unwrap();
    assert_eq!(a, b);
    // Both rows must also report identical numbers.
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').collect())
        .collect();
    for metric in ["instp@2", "f1@2"] {
        let vals: Vec<&str> = rows
            .iter()
            .filter(|r| r[1] == metric)
            .map(|r| r[2])
            .collect();
        assert_eq!(vals.len(), 2);
        assert_eq!(vals[0], vals[1], "{metric}");
    }
}

#[test]
fn topk_maximizes_instance_precision_among_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, marginals) = write_dataset(dir.path(), 60, 8);
    let out = budgetk(
        dir.path(),
        &[
            "infer",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "3",
            "--strategy",
            "topk,macro-recall,bacc,pow:0.5,pow:1,log",
            "--add-count",
            "1",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut topk_instp = None;
    let mut others = Vec::new();
    for line in stdout(&out).lines().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols[1] != "instp@3" {
            continue;
        }
        let v: f64 = cols[2].parse().unwrap();
        if cols[0] == "topk" {
            topk_instp = Some(v);
        } else {
            others.push((cols[0].to_owned(), v));
        }
    }
    let topk_instp = topk_instp.expect("topk row present");
    for (name, v) in others {
        assert!(
            topk_instp >= v - 1e-12,
            "{name} beat topk on instance precision: {v} > {topk_instp}"
        );
    }
}

#[test]
fn fw_train_then_infer_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, marginals) = write_dataset(dir.path(), 50, 6);
    let train = budgetk(
        dir.path(),
        &[
            "fw-train",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "2",
            "--metric",
            "f1",
            "--split",
            "50",
            "--seed",
            "11",
            "--out",
            "model",
        ],
    );
    assert_eq!(code(&train), 0, "{}", stderr(&train));
    assert!(stdout(&train).contains("final f1 ="));
    let trace = std::fs::read_to_string(dir.path().join("model.trace.tsv")).unwrap();
    assert!(trace.starts_with("iteration\tobjective\talpha\n"));
    assert!(trace.lines().count() >= 2);

    let infer = budgetk(
        dir.path(),
        &[
            "infer",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "2",
            "--classifier",
            "model.classifier.json",
            "--repeats",
            "3",
        ],
    );
    assert_eq!(code(&infer), 0, "{}", stderr(&infer));
    assert!(stdout(&infer).contains("model.classifier\tf1@2"));
}

#[test]
fn mixed_sweep_outputs_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, marginals) = write_dataset(dir.path(), 40, 6);
    let out = budgetk(
        dir.path(),
        &[
            "mixed-sweep",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "2",
            "--lambdas",
            "0,0.5,1",
            "--inner",
            "f1",
            "--out",
            "sweep",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let tsv = std::fs::read_to_string(dir.path().join("sweep.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.starts_with("lambda\tinstp@2\tf1@2\n"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    assert_eq!(json["inner"], "f1");

    // A blend weight outside [0, 1] violates the metric contract.
    let bad = budgetk(
        dir.path(),
        &[
            "mixed-sweep",
            "--labels",
            labels.to_str().unwrap(),
            "--marginals",
            marginals.to_str().unwrap(),
            "--k",
            "2",
            "--lambdas",
            "1.5",
            "--out",
            "bad",
        ],
    );
    assert_eq!(code(&bad), 3, "{}", stderr(&bad));
}
