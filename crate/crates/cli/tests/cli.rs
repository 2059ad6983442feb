use std::path::Path;
use std::process::{Command, Output};

use causens_core::bayesnet::{Assignment, BayesNet};

fn causens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causens")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

const SMALL_ASIA: &str = r#"
task = "asia"
seed = 1
[data]
n_train = 300
n_test = 150
[train]
epochs = 20
batch_size = 0
[counterfactual]
conditioning = ["either", "bronc"]
alterations = [
  { target_feature = "bronc", rule = { kind = "set_constant", value = 1 }, applies_to = "test" },
]
[identify]
conditioning_sets = [["either", "bronc"]]
intervention = { target_feature = "either", rule = { kind = "mutilate_bn_node", value = 1 }, applies_to = "train" }
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    path(&p)
}

#[test]
fn sample_bn_is_reproducible_and_matches_marginals() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    for out in [&a, &b] {
        let o = causens(&["sample-bn", "--n", "20000", "--seed", "9", "--out", &path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<u32>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 20000);
    let net = BayesNet::asia();
    for (j, name) in header.iter().enumerate() {
        let mean = rows.iter().map(|r| f64::from(r[j])).sum::<f64>() / rows.len() as f64;
        let exact = net.conditional(name, 1, &Assignment::new()).unwrap();
        assert!((mean - exact).abs() < 0.02, "{name}: {mean} vs {exact}");
    }
}

#[test]
fn counterfactual_dumps_one_latent_row_per_test_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_ASIA);
    let out = tmp.path().join("run");
    let o = causens(&["counterfactual", "--config", &cfg, "--out", &path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["latent/z_factual.csv", "latent/z_cf0_bronc.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().count(), 1 + 150, "{f}");
    }
    let table = std::fs::read_to_string(out.join("counterfactual.csv")).unwrap();
    assert!(table.starts_with("feature,factual_acc,cf_acc,delta\n"));
    assert!(out.join("models/gp_f.model").exists());
}

#[test]
fn seed_override_changes_results_and_report_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_ASIA);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(causens(&["identify", "--config", &cfg, "--out", &path(&a)]).status.success());
    assert!(causens(&["identify", "--config", &cfg, "--seed", "2", "--out", &path(&b)]).status.success());
    let read = |d: &Path| std::fs::read(d.join("models/set0_factual.model")).unwrap();
    assert_ne!(read(&a), read(&b));

    let o = causens(&["report", "--out", &path(&a)]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("== identify.csv ==") && text.contains("all checksums verified"));

    std::fs::write(a.join("identify.csv"), "tampered\n").unwrap();
    let o = causens(&["report", "--out", &path(&a)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("identify.csv: checksum mismatch"));
}

#[test]
fn invalid_configs_fail_without_leaving_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (SMALL_ASIA.replace(r#"[["either", "bronc"]]"#, "[]"), "empty"),
        (SMALL_ASIA.replace(r#"[["either", "bronc"]]"#, r#"[["either", "nope"]]"#), "nope"),
        (format!("{SMALL_ASIA}\nunknown_key = 1\n"), "unknown"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), text);
        let out = tmp.path().join(format!("run{i}"));
        let o = causens(&["identify", "--config", &cfg, "--out", &path(&out)]);
        assert!(!o.status.success(), "case {i} accepted");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "case {i}: {err}");
        assert!(!out.exists(), "case {i} left {}", out.display());
    }
}

#[test]
fn missing_section_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_ASIA);
    let out = tmp.path().join("run");
    let o = causens(&["gcsp", "--config", &cfg, "--out", &path(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("[gcsp]"));
    assert!(!out.exists());
}

#[test]
fn gradcheck_negative_control_exits_nonzero() {
    let ok = causens(&["gradcheck", "--instances", "2"]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));
    for fault in ["sigmoid", "tanh"] {
        let bad = causens(&["gradcheck", "--instances", "2", "--inject-fault", fault]);
        assert!(!bad.status.success(), "{fault}");
        assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
    }
}
