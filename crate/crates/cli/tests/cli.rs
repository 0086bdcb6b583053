use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

const SMALL: &str = "[generator]
n_communities = 60
n_transactions = 600
n_pois = 400
n_stations = 40
n_checkins = 2000
n_trips = 1000
n_users = 600

[train]
max_epochs = 2
";

fn mugrep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mugrep")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mugrep(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn config(&self) -> PathBuf {
        self.root.join("small.toml")
    }
    fn city(&self) -> PathBuf {
        self.root.join("city")
    }
    fn run(&self) -> PathBuf {
        self.root.join("run")
    }
}

/// Generated small city with one trained run, shared by the tests below.
fn workspace() -> &'static Workspace {
    static W: OnceLock<Workspace> = OnceLock::new();
    W.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace {
            root: dir.path().to_path_buf(),
            _dir: dir,
        };
        std::fs::write(ws.config(), SMALL).unwrap();
        let cfg = ws.config();
        ok(&["generate", "--seed", "7", "--config", s(&cfg), "--out", s(&ws.city())]);
        ok(&["train", s(&ws.city()), "--config", s(&cfg), "--out", s(&ws.run())]);
        ws
    })
}

#[test]
fn generate_then_describe_prints_counts() {
    let ws = workspace();
    let v: Value = serde_json::from_str(&ok(&["describe", s(&ws.city())])).unwrap();
    assert_eq!(v["n_transactions"], 600);
    assert_eq!(v["n_communities"], 60);
}

#[test]
fn train_writes_checkpoint_and_log() {
    let ws = workspace();
    assert!(ws.run().join("model.ckpt.json").is_file());
    let log = std::fs::read_to_string(ws.run().join("train_log.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_loss"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn evaluate_writes_metrics_and_community_table() {
    let ws = workspace();
    let out = ws.root.join("eval");
    ok(&[
        "evaluate",
        s(&ws.city()),
        "--config",
        s(&ws.config()),
        "--checkpoint",
        s(&ws.run().join("model.ckpt.json")),
        "--out",
        s(&out),
    ]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(v["rmse"].as_f64().unwrap() >= v["mae"].as_f64().unwrap());
    let csv = std::fs::read_to_string(out.join("community_mape.csv")).unwrap();
    assert!(csv.starts_with("community_id,n_test,n_train,mape"));
}

#[test]
fn ablate_rows_are_variants_times_seeds() {
    let ws = workspace();
    let out = ws.root.join("ablate");
    ok(&[
        "ablate",
        s(&ws.city()),
        "--config",
        s(&ws.config()),
        "--variants",
        "full,noEvt",
        "--seeds",
        "0,1,2",
        "--out",
        s(&out),
    ]);
    let table = std::fs::read_to_string(out.join("ablation_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 6);
}

#[test]
fn features_and_graphs_write_artifacts() {
    let ws = workspace();
    let out = ws.root.join("artifacts");
    ok(&["features", s(&ws.city()), "--out", s(&out)]);
    ok(&["graphs", s(&ws.city()), "--out", s(&out)]);
    for f in [
        "features.json",
        "features.csv",
        "event_graph.bin",
        "intra_index.bin",
        "community_edges.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let rows = std::fs::read_to_string(out.join("features.csv")).unwrap();
    assert_eq!(rows.lines().count(), 601);
}

#[test]
fn appraise_flags_and_request_file_agree() {
    let ws = workspace();
    let ckpt = ws.run().join("model.ckpt.json");
    let body = r#"{"community_id": 3, "attributes": {"rooms": 3, "area": 90.0, "decoration": "simple",
        "orientation": "south", "structure": "flat", "heating": "central", "floor_type": "medium",
        "free_of_tax": "yes", "ownership": "commercial", "floor_number": 6, "building_type": "slab",
        "elevator_ratio": 0.5}}"#;
    let req = ws.root.join("req.json");
    std::fs::write(&req, body).unwrap();
    let from_file = ok(&[
        "appraise",
        s(&ws.city()),
        "--checkpoint",
        s(&ckpt),
        "--request",
        s(&req),
    ]);

    let request: Value = serde_json::from_str(body).unwrap();
    let mut args: Vec<String> = ["appraise", s(&ws.city()), "--checkpoint", s(&ckpt), "--community", "3"]
        .map(String::from)
        .to_vec();
    for (k, v) in request["attributes"].as_object().unwrap() {
        let v = v.as_str().map(String::from).unwrap_or_else(|| v.to_string());
        args.extend(["--attr".to_string(), format!("{k}={v}")]);
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(from_file, ok(&args));
    let v: Value = serde_json::from_str(&from_file).unwrap();
    assert!(v["unit_price_estimate"].as_f64().unwrap().is_finite());
}

#[test]
fn exit_codes() {
    assert_eq!(mugrep(&["--help"]).status.code(), Some(0));
    assert_eq!(mugrep(&["bogus"]).status.code(), Some(1));
    assert_eq!(mugrep(&["describe", "x", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(mugrep(&["train", "x", "--variant", "nope"]).status.code(), Some(1));
    let missing = mugrep(&["describe", "/definitely/not/here"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("schema.json"));
}

#[test]
fn bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nlearning_rate = 3\n").unwrap();
    let out = mugrep(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(1));
}
