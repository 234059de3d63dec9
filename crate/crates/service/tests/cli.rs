use std::path::Path;
use std::process::{Command, Output};

use imgspec_core::corpus::write_dataset;
use imgspec_core::lexsim::write_lexicon;
use imgspec_core::retrieval::read_params;
use imgspec_core::specificity::read_scores;
use imgspec_core::synthetic::{retrieval_dataset, RetrievalDesign};

fn imgspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imgspec"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = imgspec(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(dir: &Path) -> (String, String) {
    let design = RetrievalDesign {
        n_specific: 5,
        n_ambiguous: 5,
        pool_size: 6,
        ..RetrievalDesign::default()
    };
    let (mut db, lex) = retrieval_dataset(&design, 2).unwrap();
    for (i, img) in db.images.iter_mut().enumerate() {
        img.features = Some(vec![
            i as f64,
            (i % 3) as f64,
            if i < 5 { 1.0 } else { -1.0 },
        ]);
    }
    db.feature_dim = Some(3);
    let (d, l) = (dir.join("d.jsonl"), dir.join("lex.jsonl"));
    write_dataset(&db, &d).unwrap();
    write_lexicon(&lex, &l).unwrap();
    (d.display().to_string(), l.display().to_string())
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (d, l) = fixture(dir.path());
    let p = |name: &str| dir.path().join(name).display().to_string();

    assert!(ok(&["ingest", "--input", &d, "--out", &p("norm.jsonl")])
        .contains("10 images, 6 descriptions each"));

    ok(&[
        "specificity",
        "--dataset",
        &d,
        "--lexicon",
        &l,
        "--out",
        &p("spec.csv"),
    ]);
    let scores = read_scores(p("spec.csv")).unwrap();
    assert_eq!(scores.len(), 10);

    ok(&[
        "train",
        "--dataset",
        &d,
        "--lexicon",
        &l,
        "--out",
        &p("gt.csv"),
        "--seed",
        "4",
    ]);
    let gt = read_params(p("gt.csv")).unwrap();
    assert_eq!(gt.len(), 10);
    ok(&[
        "train",
        "--dataset",
        &d,
        "--lexicon",
        &l,
        "--out",
        &p("gt2.csv"),
        "--seed",
        "4",
    ]);
    assert_eq!(read_params(p("gt2.csv")).unwrap(), gt);

    ok(&[
        "predict",
        "--dataset",
        &d,
        "--params",
        &p("gt.csv"),
        "--out",
        &p("pred.csv"),
        "--model",
        &p("m.json"),
    ]);
    assert_eq!(read_params(p("pred.csv")).unwrap().len(), 10);
    assert!(dir.path().join("m.json").exists());

    let ranked = ok(&[
        "rank",
        "--dataset",
        &d,
        "--lexicon",
        &l,
        "--query",
        "g0w0 g0w1 g0w2",
        "--method",
        "gt",
        "--params",
        &p("gt.csv"),
    ]);
    let lines: Vec<&str> = ranked.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[0].starts_with("1\tspec0\t"));
    let top = ok(&[
        "rank",
        "--dataset",
        &d,
        "--lexicon",
        &l,
        "--query",
        "g0w0 g0w1",
        "--limit",
        "3",
    ]);
    assert_eq!(top.lines().count(), 3);

    let report = ok(&[
        "evaluate",
        "--dataset",
        &d,
        "--lexicon",
        &l,
        "--method",
        "pred",
        "--n-train",
        "4",
        "--ranks-out",
        &p("ranks"),
    ]);
    assert!(report.contains("pred_spec"), "{report}");
    let compared = ok(&[
        "evaluate",
        "--method",
        "gt",
        "--baseline",
        &p("ranks/baseline.csv"),
        "--ranks",
        &p("ranks/gt_spec.csv"),
    ]);
    assert!(
        compared.contains("gt_spec") && compared.contains("mean_rank"),
        "{compared}"
    );
}

#[test]
fn failures_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let (d, l) = fixture(dir.path());
    let missing = imgspec(&["specificity", "--dataset", &d]);
    assert!(!missing.status.success());
    assert!(!imgspec(&["frobnicate"]).status.success());

    let bad = imgspec(&[
        "rank",
        "--dataset",
        &d,
        "--lexicon",
        &l,
        "--query",
        "dog",
        "--method",
        "pred",
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("--params"));

    let absent = imgspec(&["ingest", "--input", "/nonexistent/d.jsonl"]);
    assert_eq!(absent.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&absent.stderr).contains("/nonexistent/d.jsonl"));
}
