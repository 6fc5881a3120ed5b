use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dissim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dissim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_graph_decompose_verify() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ds.csv");
    let cfg = dir.path().join("cfg.toml");
    let out = dissim(&[
        "gen", "--n", "300", "--d", "2", "--r-n", "0.1", "--p0", "0.1", "--cat-size", "3", "--seed", "5",
        "--out", p(&data), "--write-config", p(&cfg),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("\"frac_corrupted\""));

    // The written config reproduces the dataset byte for byte.
    let again = dir.path().join("again.csv");
    assert_eq!(code(&dissim(&["gen", "--config", p(&cfg), "--out", p(&again)])), 0);
    assert_eq!(fs::read(&data).unwrap(), fs::read(&again).unwrap());

    let edges = dir.path().join("edges.csv");
    let out = dissim(&["graph", "--data", p(&data), "--r-n", "0.1", "--edges", p(&edges)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("\"max_degree\""));
    assert!(fs::read_to_string(&edges).unwrap().starts_with("u,v\n"));

    for algo in ["greedy", "lll"] {
        let dec = dir.path().join(format!("{algo}.csv"));
        let out = dissim(&[
            "decompose", "--data", p(&data), "--r-n", "0.1", "--k", "2", "--algo", algo, "--seed", "3",
            "--out", p(&dec),
        ]);
        assert_eq!(code(&out), 0, "{algo}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("\"valid\": true"));
        let out = dissim(&["verify", "--data", p(&data), "--r-n", "0.1", "--decomposition", p(&dec), "--k", "2"]);
        assert_eq!(code(&out), 0);
        assert!(stdout(&out).starts_with("valid: true"));
        // Judged with a stricter budget the same batches fail.
        let out = dissim(&["verify", "--data", p(&data), "--r-n", "0.1", "--decomposition", p(&dec), "--k", "1"]);
        assert_eq!(code(&out), 1);
        assert!(stdout(&out).contains("violation kind=similarity-budget"));
    }
}

#[test]
fn subsets_and_upper_bound() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ds.csv");
    assert_eq!(code(&dissim(&["gen", "--n", "200", "--r-n", "0.1", "--seed", "1", "--out", p(&data)])), 0);
    let mut sizes = Vec::new();
    for algo in ["direct", "kway"] {
        let sub = dir.path().join(format!("{algo}.csv"));
        let out = dissim(&["subset", "--data", p(&data), "--r-n", "0.1", "--k", "2", "--algo", algo, "--out", p(&sub)]);
        assert_eq!(code(&out), 0);
        let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        sizes.push(v["size"].as_u64().unwrap());
        let out = dissim(&["verify", "--data", p(&data), "--r-n", "0.1", "--subset", p(&sub)]);
        assert_eq!(code(&out), 0);
        assert!(stdout(&out).contains("within_budget=true"));
    }
    let out = dissim(&["subset", "--data", p(&data), "--r-n", "0.1", "--k", "2", "--algo", "upper"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let bound = v["bound"].as_u64().unwrap();
    assert!(sizes.iter().all(|&s| s <= bound));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ds.csv");

    // Every point corrupted: no batch can hold an uncorrupted point.
    fs::write(&data, "idx,corrupted,y,x0\n0,1,0,\n1,1,0,\n").unwrap();
    let out = dissim(&["decompose", "--data", p(&data), "--r-n", "0.1", "--k", "1"]);
    assert_eq!(code(&out), 1);

    // A clique of ten points with a one-round budget.
    let rows: String = (0..10).map(|i| format!("{i},0,0,0.5\n")).collect();
    fs::write(&data, format!("idx,corrupted,y,x0\n{rows}")).unwrap();
    let out = dissim(&[
        "decompose", "--data", p(&data), "--r-n", "0.1", "--k", "1", "--algo", "lll", "--theta", "1",
        "--max-rounds", "1",
    ]);
    assert_eq!(code(&out), 3);

    fs::write(&data, "idx,corrupted,y,x0,x1\n0,0,0,0.1,0.2\n1,0,0,0.3\n").unwrap();
    let out = dissim(&["graph", "--data", p(&data), "--r-n", "0.1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    assert_eq!(code(&dissim(&["decompose", "--data", "/nonexistent.csv", "--r-n", "0.1", "--k", "1"])), 2);
    assert_eq!(code(&dissim(&["experiment", "--preset", "nope", "--out", p(dir.path())])), 2);
}

#[test]
fn experiment_is_reproducible_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.toml");
    fs::write(&cfg, "[plan]\nns = [60]\nks = [1, 2]\ntrials = 4\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let res = dissim(&[
            "experiment", "--preset", "lll-termination", "--config", p(&cfg), "--out", p(out), "--jobs", jobs,
            "--seed", "17",
        ]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    }
    let ra = fs::read(a.join("records.jsonl")).unwrap();
    assert_eq!(ra, fs::read(b.join("records.jsonl")).unwrap());
    assert_eq!(String::from_utf8(ra).unwrap().lines().count(), 8);
    assert!(a.join("timings.jsonl").exists());

    let out = dissim(&["report", "--in", p(&a)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("PASS lll-termination"));
    for f in ["summary.txt", "summary.csv", "verdicts.csv"] {
        assert!(a.join(f).exists(), "{f}");
    }
}
