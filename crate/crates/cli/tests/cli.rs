use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn gz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gzhybrid"))
        .args(args)
        .env("GZHYBRID_THREADS", "1")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = gz(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, seed: &str) {
    ok(&[
        "gen-data", "--labelled", "80", "--unlabelled", "60", "--rings", "160", "--seed", seed, "--size", "32",
        "--out", s(dir),
    ]);
}

/// Shared dataset and three short training runs.
struct Fixture {
    _dir: tempfile::TempDir,
    data: PathBuf,
    ckpts: Vec<(String, PathBuf)>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        gen(&data, "5");
        let ckpts = ["hybrid", "contrastive", "pretrain"]
            .iter()
            .map(|mode| {
                let out = dir.path().join(mode);
                ok(&[
                    "train", "--data", s(&data), "--mode", mode, "--max-steps", "6", "--batch-size", "8", "--seed", "1",
                    "--out", s(&out),
                ]);
                (mode.to_string(), out.join("model.ckpt"))
            })
            .collect();
        Fixture { _dir: dir, data, ckpts }
    })
}

#[test]
fn gen_data_writes_a_reproducible_catalog() {
    let dir = tempfile::tempdir().unwrap();
    gen(&dir.path().join("a"), "9");
    gen(&dir.path().join("b"), "9");
    let a = std::fs::read_to_string(dir.path().join("a/catalog.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/catalog.csv")).unwrap();
    assert_eq!(a.lines().count(), 1 + 80 + 60 + 160);
    assert_eq!(a, b);
    let images = std::fs::read_dir(dir.path().join("a/images")).unwrap().count();
    assert_eq!(images, 300);
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = gz(&["gen-data", "--labelled", "1", "--unlabelled", "1", "--rings", "1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn print_config_reflects_overrides() {
    let text = ok(&["train", "--lambda", "0.25", "--max-steps", "17", "--print-config"]);
    let doc: toml::Table = text.parse().unwrap();
    assert_eq!(doc["objective"]["lambda"].as_float(), Some(0.25));
    assert_eq!(doc["training"]["max_steps"].as_integer(), Some(17));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "seed = 1\nlearning_rate_typo = 3\n").unwrap();
    let out = gz(&["train", s(&path), "--print-config"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn negative_lambda_is_rejected() {
    let out = gz(&["train", "--lambda=-1", "--print-config"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_checkpoint_is_a_usage_error() {
    let f = fixture();
    let out = gz(&["probe", "--data", s(&f.data), "--checkpoint", "/nonexistent/model.ckpt", "--budgets", "20"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn training_writes_metrics_and_a_checkpoint() {
    let f = fixture();
    let run = f.ckpts[0].1.parent().unwrap();
    for name in ["metrics.csv", "validation.csv", "model.ckpt", "model.ckpt.meta.toml", "config.toml"] {
        assert!(run.join(name).is_file(), "{name}");
    }
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 6);
    assert!(metrics.starts_with("step,contrastive,supervised,combined,labelled_count,wall_ms"));
}

#[test]
fn sweep_covers_every_method_and_budget() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = ["sweep", "--data", s(&f.data), "--seed", "2", "--out", s(dir.path())]
        .iter()
        .map(|a| a.to_string())
        .collect();
    for (name, ckpt) in &f.ckpts {
        args.push("--method".into());
        args.push(format!("{name}={}", ckpt.display()));
    }
    args.extend(["--budgets".into(), "20,30,40,50".into()]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let table = ok(&refs);
    assert!(table.contains("spearman(budget, mean accuracy)"), "{table}");

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 12);
    let svg = std::fs::read_to_string(dir.path().join("accuracy_vs_budget.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="series""#).count(), 3);

    // redraw from the table alone
    let again = dir.path().join("again");
    ok(&["plot", s(&dir.path().join("summary.csv")), "--out", s(&again)]);
    let redrawn = std::fs::read_to_string(again.join("accuracy_vs_budget.svg")).unwrap();
    for (name, _) in &f.ckpts {
        assert!(redrawn.contains(&format!(r#"data-name="{name}""#)), "{name}");
    }
    assert!(again.join("contrastive_vs_accuracy.svg").is_file());
}

#[test]
fn plot_of_an_empty_table_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    std::fs::write(&path, "method,budget,mean,std,folds,error\n").unwrap();
    let out = gz(&["plot", s(&path), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = gz(&["plot", s(&dir.path().join("missing.csv")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
