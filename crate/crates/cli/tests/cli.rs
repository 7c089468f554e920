use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn rbgp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbgp"))
        .args(args)
        .current_dir(dir)
        .env_remove("RBGP_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rbgp(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn gen_graph_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let args = ["gen-graph", "--dims", "64x64", "--sparsity", "0.75", "--seed", "5", "--out"];
    let first = ok(d, &[&args[..], &["a.txt"]].concat());
    ok(d, &[&args[..], &["b.txt"]].concat());
    assert_eq!(fs::read(d.join("a.txt")).unwrap(), fs::read(d.join("b.txt")).unwrap());

    let sidecar: Value = serde_json::from_str(&fs::read_to_string(d.join("a.txt.json")).unwrap()).unwrap();
    assert_eq!(sidecar, json(&first));
    assert!(sidecar["lambda2"].as_f64().unwrap() <= sidecar["bound"].as_f64().unwrap() + 1e-7);
    assert!((sidecar["lambda1"].as_f64().unwrap() - 16.0).abs() < 1e-9);
    assert!(sidecar["attempts"].as_u64().unwrap() <= 1000);
    assert_eq!(sidecar["seed"], 5);
    assert_eq!(sidecar["config"]["max_attempts"], 1000);
}

#[test]
fn gen_graph_dense_and_exhausted() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(d, &["gen-graph", "--dims", "3,5", "--sparsity", "0", "--out", "k.txt"]);
    let text = fs::read_to_string(d.join("k.txt")).unwrap();
    assert_eq!(text, "3 5\n0 1 2 3 4\n0 1 2 3 4\n0 1 2 3 4\n");

    // A 1-regular graph can never meet the bound of 0.
    let out = rbgp(d, &["gen-graph", "--dims", "8x8", "--sparsity", "0.875", "--max-attempts", "5", "--out", "m.txt"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("5 attempts"));
    assert!(!d.join("m.txt").exists());

    assert_eq!(code(&rbgp(d, &["gen-graph", "--dims", "8x8", "--sparsity", "0.6", "--out", "x.txt"])), 2);
    assert_eq!(code(&rbgp(d, &["gen-graph", "--dims", "8", "--sparsity", "0.5", "--out", "x.txt"])), 2);
}

#[test]
fn check_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "k.txt", "2 3\n0 1 2\n0 1 2\n");
    let out = ok(d, &["check", "k.txt"]);
    assert_eq!(json(&out)["report"]["is_ramanujan"], true);
    assert_eq!(json(&out)["report"]["sigma2"], 0.0);

    // Two disjoint K_{3,3}: sigma2 = 3 exceeds 2·√2.
    write(d, "two.txt", "6 6\n0 1 2\n0 1 2\n0 1 2\n3 4 5\n3 4 5\n3 4 5\n");
    let out = rbgp(d, &["check", "two.txt"]);
    assert_eq!(code(&out), 1);
    assert!((json(&out)["report"]["sigma2"].as_f64().unwrap() - 3.0).abs() < 1e-9);

    write(d, "bad.txt", "2 2\n0 7\n");
    assert_eq!(code(&rbgp(d, &["check", "bad.txt"])), 2);
    assert_eq!(code(&rbgp(d, &["check", "missing.txt"])), 2);
    write(d, "irregular.txt", "2 2\n0 1\n1\n");
    assert_eq!(code(&rbgp(d, &["check", "irregular.txt"])), 1);
}

fn write_mixed_chain(d: &Path) {
    write(d, "g1.txt", "4 4\n0 1\n1 2\n2 3\n0 3\n");
    write(d, "g2.txt", "2 2\n0\n1\n");
    write(d, "g3.txt", "4 4\n0 3\n0 1\n1 2\n2 3\n");
    write(d, "chain.txt", "graph g1.txt\ngraph g2.txt\ngraph g3.txt\ncomplete 2 2\n");
}

#[test]
fn build_chain_summary() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_mixed_chain(d);
    // The perfect matching factor has lambda2 = 1 against a bound of 0.
    assert_eq!(code(&rbgp(d, &["build-chain", "--chain", "chain.txt", "--out", "w.rbgp"])), 1);

    let out = ok(d, &["build-chain", "--chain", "chain.txt", "--out", "w.rbgp", "--no-certify"]);
    let s = json(&out);
    assert_eq!(s["levels"], serde_json::json!([[16, 16], [8, 8], [2, 2]]));
    assert_eq!(s["compression"]["full_edges"], 512);
    assert_eq!(s["compression"]["stored_edges"], 22);
    assert!(s["compression"]["ratio"].as_f64().unwrap() >= 23.0);
    assert_eq!(s["config"]["certify"], false);
    assert_eq!(s["config"]["precision"], "f32");

    ok(d, &["build-chain", "--chain", "chain.txt", "--out", "w2.rbgp", "--no-certify"]);
    assert_eq!(fs::read(d.join("w.rbgp")).unwrap(), fs::read(d.join("w2.rbgp")).unwrap());

    write(d, "single.txt", "complete 3 5\n");
    let s = json(&ok(d, &["build-chain", "--chain", "single.txt", "--out", "s.rbgp", "--precision", "f64"]));
    assert_eq!(s["footprint"]["index_reduction"], 1.0);
    assert_eq!(s["config"]["precision"], "f64");

    write(d, "broken.txt", "complete 3\n");
    assert_eq!(code(&rbgp(d, &["build-chain", "--chain", "broken.txt", "--out", "b.rbgp"])), 2);
}

#[test]
fn build_chain_full_scale_sizes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(
        d,
        "chain.txt",
        "ramanujan 32 128 sparsity=0.5\ncomplete 4 1\nramanujan 32 32 sparsity=0.5\ncomplete 1 1\n",
    );
    let s = json(&ok(d, &["build-chain", "--chain", "chain.txt", "--out", "w.rbgp", "--seed", "1"]));
    assert_eq!((s["rows"].as_u64(), s["cols"].as_u64()), (Some(4096), Some(4096)));
    assert_eq!(s["sparsity"], 0.75);
    assert!(s["factors"][0]["spectral"]["is_ramanujan"].as_bool().unwrap());
}

#[test]
fn multiply_verify_and_small_tiling() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "m.txt", "2 2\n0\n1\n");
    write(d, "chain.txt", "graph m.txt\ncomplete 2 1\ngraph m.txt\ncomplete 2 2\n");
    ok(d, &["build-chain", "--chain", "chain.txt", "--out", "w.rbgp", "--no-certify", "--precision", "f64"]);
    let args = ["multiply", "--matrix", "w.rbgp", "--random", "4", "--tn", "4", "--rn", "1", "--bn", "2", "--verify"];
    let r = json(&ok(d, &args));
    assert_eq!((r["rows"].as_u64(), r["inner"].as_u64()), (Some(16), Some(8)));
    assert_eq!(r["work"]["outer_steps_per_tile"], 1);
    assert_eq!(r["work"]["outer_steps_skipped_per_tile_row"], 1);
    // 16 rows with 2 values each, times 4 columns.
    assert_eq!(r["work"]["fma_count"], 16 * 2 * 4);
    assert_eq!(r["verify"]["passed"], true);
    assert!(r["verify"]["max_rel_error"].as_f64().unwrap() <= 1e-12);

    let csv = ok(d, &[&args[..], &["--format", "csv"]].concat());
    assert!(String::from_utf8_lossy(&csv.stdout).contains("work.outer_steps_per_tile,1\n"));

    // TN = 8 does not divide 4 columns.
    assert_eq!(code(&rbgp(d, &["multiply", "--matrix", "w.rbgp", "--random", "4", "--tn", "8"])), 1);
    write(d, "i.csv", "1,2\n3,4\n");
    assert_eq!(code(&rbgp(d, &["multiply", "--matrix", "w.rbgp", "--input", "i.csv", "--tn", "2", "--rn", "1", "--bn", "2"])), 1);
    assert_eq!(code(&rbgp(d, &["multiply", "--matrix", "w.rbgp"])), 2);
}

#[test]
fn identity_pattern_passes_input_through() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let text = d.join("id");
    fs::create_dir(&text).unwrap();
    write(&text, "g.txt", "4 4\n0\n1\n2\n3\n");
    write(&text, "chain.txt", "precision f64\ngraph g.txt\ncomplete 1 1\ncomplete 1 1\ncomplete 1 1\n");
    write(&text, "values.csv", "1.0\n1.0\n1.0\n1.0\n");
    ok(d, &["convert", "id", "--to", "binary", "--out", "id.rbgp"]);
    let input = "0.5,-1.25,3.0,7.0\n2.0,0.0,-0.0625,1.0\n1e-3,4.0,5.5,6.0\n-2.0,8.0,9.0,10.0\n";
    write(d, "in.csv", input);
    ok(d, &["multiply", "--matrix", "id.rbgp", "--input", "in.csv", "--tn", "4", "--rn", "1", "--bn", "4", "--out", "out.csv"]);
    let read = |p: &str| -> Vec<f64> {
        fs::read_to_string(d.join(p)).unwrap().split([',', '\n']).filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect()
    };
    assert_eq!(read("out.csv"), read("in.csv"));
}

#[test]
fn workers_env_and_flag() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "chain.txt", "complete 2 2\ncomplete 1 1\ncomplete 2 2\ncomplete 1 1\n");
    ok(d, &["build-chain", "--chain", "chain.txt", "--out", "w.rbgp"]);
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_rbgp"));
        cmd.args(["multiply", "--matrix", "w.rbgp", "--random", "8", "--tn", "8"]).args(extra).current_dir(d);
        match env {
            Some(v) => cmd.env("RBGP_WORKERS", v),
            None => cmd.env_remove("RBGP_WORKERS"),
        };
        let out = cmd.output().unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        json(&out)["config"]["tiling"]["workers"].as_u64().unwrap()
    };
    assert_eq!(run(Some("3"), &[]), 3);
    assert_eq!(run(Some("3"), &["--workers", "5"]), 5);
    assert!(run(None, &[]) >= 1);
}

#[test]
fn convert_round_trips() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "chain.txt", "ramanujan 8 16 sparsity=0.5\ncomplete 2 1\nramanujan 8 8 sparsity=0.5\n");
    for precision in ["f32", "f64"] {
        ok(d, &["build-chain", "--chain", "chain.txt", "--out", "w.rbgp", "--precision", precision, "--seed", "4"]);
        ok(d, &["convert", "w.rbgp", "--to", "text", "--out", "txt"]);
        ok(d, &["convert", "txt", "--to", "binary", "--out", "back.rbgp"]);
        assert_eq!(fs::read(d.join("w.rbgp")).unwrap(), fs::read(d.join("back.rbgp")).unwrap());
        ok(d, &["convert", "w.rbgp", "--to", "csr", "--out", "w.json"]);
        let csr: Value = serde_json::from_str(&fs::read_to_string(d.join("w.json")).unwrap()).unwrap();
        // 128 rows, row_nnz = 8 · 1 · 4.
        assert_eq!(csr["col_indices"].as_array().unwrap().len(), 128 * 32);
        assert_eq!(csr["row_offsets"].as_array().unwrap().len(), 129);
        assert_eq!(csr["precision"], precision);
    }
    fs::write(d.join("junk.rbgp"), b"NOPE").unwrap();
    assert_eq!(code(&rbgp(d, &["convert", "junk.rbgp", "--to", "csr", "--out", "j.json"])), 2);
}

#[test]
fn bench_tables() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "empty.json", r#"{"name": "empty", "n_cols": 128}"#);
    let out = ok(d, &["bench", "--sweep", "empty.json"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);

    write(
        d,
        "small.json",
        r#"{"name": "small", "n_cols": 16, "tn": 8, "rn": 1, "bn": 4, "workers": 2, "configs": [
            {"id": "a", "g_o": [4, 4], "g_r": [2, 1], "g_i": [8, 8], "g_b": [1, 1], "sp_o": 50.0, "sp_i": 50.0},
            {"id": "b", "g_o": [4, 4], "g_r": [2, 1], "g_i": [8, 8], "g_b": [1, 1], "sp_o": 30.0, "sp_i": 50.0}
        ]}"#,
    );
    ok(d, &["bench", "--sweep", "small.json", "--out", "res", "--no-baselines"]);
    let csv = fs::read_to_string(d.join("res.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("config_id,rows,cols,inner,sp_total"));
    assert!(lines[1].starts_with("a,64,16,32,75.00,50.00,50.00,2,1,8,1,4,2,"));
    assert!(lines[2].contains("power of two"));
    let table: Value = serde_json::from_str(&fs::read_to_string(d.join("res.json")).unwrap()).unwrap();
    assert_eq!(table["spec"]["baselines"], false);
    assert_eq!(table["rows"][0]["fma_count"], 64 * 8 * 16);

    let spec = json(&ok(d, &["bench", "--preset", "sparsity-full", "--dump-spec", "--workers", "6"]));
    assert_eq!(spec["configs"].as_array().unwrap().len(), 9);
    assert_eq!(spec["n_cols"], 4096);
    assert_eq!(spec["workers"], 6);
    let spec = json(&ok(d, &["bench", "--preset", "repetition-desk", "--dump-spec"]));
    assert_eq!(spec["configs"].as_array().unwrap().len(), 18);

    write(d, "bad.json", "{");
    assert_eq!(code(&rbgp(d, &["bench", "--sweep", "bad.json"])), 2);
    assert_eq!(code(&rbgp(d, &["bench", "--sweep", "empty.json", "--runs", "2"])), 2);
}
