use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn xcdtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xcdtl"))
        .args(args)
        .env("XCDTL_THREADS", "2")
        .output()
        .expect("spawn xcdtl")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(xcdtl(&[]).status.code(), Some(1));
    assert_eq!(xcdtl(&["generate", "--domain", "Social"]).status.code(), Some(1));
    assert_eq!(xcdtl(&["transfer", "--out", "x", "--features", "top3"]).status.code(), Some(1));
    assert_eq!(xcdtl(&["transfer", "--out", "x", "--pairs", "Social-Proteins"]).status.code(), Some(1));
    assert_eq!(xcdtl(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = xcdtl(&["report", "--results", p(dir.path()), "--out", p(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("results.csv") && err.contains("iit_tables.csv"), "{err}");

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0 1\n1 x\n").unwrap();
    let out = xcdtl(&["features", "--in", p(&bad), "--out", p(&dir.path().join("f.csv")), "--domain", "Social"]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"alphas": [1.5]}"#).unwrap();
    assert_eq!(xcdtl(&["transfer", "--config", p(&cfg), "--out", p(dir.path())]).status.code(), Some(2));
    fs::write(&cfg, r#"{"typo": 1}"#).unwrap();
    assert_eq!(xcdtl(&["transfer", "--config", p(&cfg), "--out", p(dir.path())]).status.code(), Some(2));
}

#[test]
fn edge_list_features() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    fs::write(&g, "# paw\n10 20\n20 30\n10 30\n10 40\n10 10\n").unwrap();
    let out = dir.path().join("g.csv");
    let res = xcdtl(&["features", "--in", p(&g), "--out", p(&out), "--domain", "ling"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |name: &str| row[header.iter().position(|h| h == name).unwrap()].to_string();
    assert_eq!(get("domain"), "Linguistic");
    assert_eq!(get("n_edges"), "4");
    assert_eq!(get("transitivity").parse::<f64>().unwrap(), 0.6);
}

#[test]
fn pipeline_generate_features_classify_rank() {
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("features");
    fs::create_dir(&feats).unwrap();
    for d in ["Social", "Molecular", "Proteins", "Linguistic"] {
        let ens = dir.path().join(format!("{d}.jsonl"));
        let res = xcdtl(&["generate", "--domain", d, "--count", "60", "--seed", "4", "--out", p(&ens)]);
        assert!(res.status.success());
        let again = dir.path().join(format!("{d}-again.jsonl"));
        xcdtl(&["generate", "--domain", d, "--count", "60", "--seed", "4", "--out", p(&again)]);
        assert_eq!(fs::read(&ens).unwrap(), fs::read(&again).unwrap());
        let res = xcdtl(&["features", "--in", p(&ens), "--out", p(&feats.join(format!("{d}.csv")))]);
        assert!(res.status.success());
    }
    let cls = dir.path().join("classify");
    let res = xcdtl(&["classify", "--features", p(&feats), "--seeds", "1,2", "--out", p(&cls), "--per-domain", "60"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let metrics = fs::read_to_string(cls.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 6);
    let borda = fs::read_to_string(cls.join("borda.csv")).unwrap();
    assert_eq!(borda.lines().count(), 1 + 12);

    let rank = dir.path().join("rank");
    let res = xcdtl(&["rank", "--features", p(&feats), "--borda", p(&cls.join("borda.csv")), "--out", p(&rank)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(rank.join("iit_tables.csv").is_file());
    assert_eq!(fs::read_to_string(rank.join("iit_global.csv")).unwrap().lines().count(), 1 + 12);
}

#[test]
fn small_transfer_then_report_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"seeds": [1, 2], "alphas": [0.1, 0.9], "etas": [0.1, 0.9], "master_pool": 400, "train_pool": 200, "test_size": 100}"#,
    )
    .unwrap();
    let run = dir.path().join("run");
    let res = xcdtl(&["transfer", "--config", p(&cfg), "--out", p(&run), "--pairs", "Social:Proteins,Proteins:Social"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let results = fs::read_to_string(run.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 4);
    assert!(results.lines().skip(1).all(|l| l.ends_with(",ok")));

    // a second invocation resumes and leaves the file unchanged
    let res = xcdtl(&["transfer", "--config", p(&cfg), "--out", p(&run), "--pairs", "Social:Proteins,Proteins:Social"]);
    assert!(res.status.success());
    assert_eq!(fs::read_to_string(run.join("results.csv")).unwrap(), results);

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(xcdtl(&["report", "--results", p(&run), "--out", p(&a)]).status.success());
    assert!(xcdtl(&["report", "--results", p(&run), "--out", p(&b)]).status.success());
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}
