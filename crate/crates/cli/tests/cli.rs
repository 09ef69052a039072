use std::path::Path;
use std::process::{Command, Output};

fn genhop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genhop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn distinguish_fixture() {
    let s = stdout(&genhop(&["distinguish", "--fixture", "triangles_vs_hexagon"]));
    assert!(s.contains("first separating: closed-walks"), "{s}");
    let s = stdout(&genhop(&["distinguish", "--json", "fixture:fig3_pair:0", "fixture:fig3_pair:1"]));
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["verdicts"][0]["invariant"], "1-wl");
    assert_eq!(v["verdicts"][0]["separates"], false);
}

#[test]
fn wl_test_and_featurize() {
    let s = stdout(&genhop(&["wl-test", "csl:41:2", "csl:41:3"]));
    assert!(s.starts_with("verdict: indistinguishable"));
    let s = stdout(&genhop(&["featurize", "g6:Bw", "--hops", "3", "--pe-dim", "2"]));
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    // triangle: two closed 2-walks and two closed 3-walks per node
    assert_eq!(v["closed_walks"]["counts"][0], serde_json::json!([2, 2]));
    assert_eq!(v["nodes"], 3);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = genhop(&["featurize", "g6:C"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("graph6"));
    let out = genhop(&["distinguish", "--fixture", "nope"]);
    assert!(!out.status.success());
}

#[test]
fn gen_parse_pretrain_embed_probe() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("csl.json");
    let g6 = d.join("csl.g6");
    let s = stdout(&genhop(&["gen-csl", "--nodes", "13", "--copies", "4", "--out", path(&data), "--graph6", path(&g6)]));
    assert!(s.starts_with("3 classes"), "{s}");
    let s = stdout(&genhop(&["parse-g6", path(&g6)]));
    assert_eq!(s.lines().count(), 4);

    let cfg = d.join("cfg.json");
    std::fs::write(&cfg, r#"{"model":{"layers":1,"hidden_dim":8,"pe_dim":2},"train":{"batch_size":6}}"#).unwrap();
    let ckpt = d.join("m.ckpt");
    let trace = d.join("loss.csv");
    stdout(&genhop(&[
        "--config", path(&cfg), "--threads", "1", "pretrain", "--data", path(&data), "--out", path(&ckpt),
        "--epochs", "2", "--loss-trace", path(&trace),
    ]));
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 3);
    let emb = d.join("z.csv");
    stdout(&genhop(&["embed", "--data", path(&data), "--checkpoint", path(&ckpt), "--out", path(&emb)]));
    let s = stdout(&genhop(&["probe", path(&emb), "--folds", "2"]));
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["fold_accuracies"].as_array().unwrap().len(), 2);
}

#[test]
fn run_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"name":"smoke","dataset":{"source":"csl","nodes":11,"copies":2},
            "model":{"layers":1,"hidden_dim":4,"pe_dim":2},"train":{"epochs":1,"batch_size":4},
            "variants":[{"name":"full"},{"name":"nt_xent_only"}],"folds":2}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let s = stdout(&genhop(&["--seed", "3", "run", path(&spec), "--out", path(&out)]));
    assert!(s.starts_with("run_id,dataset,variant,seed,fold,accuracy,mean,std"));
    assert_eq!(s.lines().count(), 1 + 2 * 2);
    assert!(out.join("smoke-full-s0.ckpt").exists());
}

#[test]
fn profile_search_report() {
    let s = stdout(&genhop(&["profile-search", "--max-nodes", "4", "--max-len", "4"]));
    assert!(s.starts_with("cycle_equal,walk_equal,pairs"));
}
