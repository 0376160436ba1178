use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn askme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_askme")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = askme(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small dataset and a one-epoch checkpoint in `dir`.
fn trained(dir: &Path, variant: &str) -> (String, String) {
    let data = dir.join("data");
    ok(&["synth", "--out", p(&data), "--users", "20", "--questions", "100", "--topics", "3", "--answers", "4"]);
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, format!(r#"{{"variant": "{variant}", "learned_dim": 4, "epochs": 1, "batch_size": 20}}"#)).unwrap();
    let ckpt = dir.join("m.ckpt");
    ok(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&ckpt)]);
    (p(&data).to_string(), p(&ckpt).to_string())
}

#[test]
fn unknown_config_key_is_named_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"epochs": 1, "dropout": 0.5}"#).unwrap();
    let out = askme(&["train", "--config", p(&cfg), "--data", p(dir.path()), "--out", p(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dropout"));
}

#[test]
fn corrupt_checkpoint_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = trained(dir.path(), "AskMe_A");
    ok(&["eval", "--ckpt", &ckpt, "--data", &data, "--negatives", "49"]);
    let mut bytes = fs::read(&ckpt).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&ckpt, bytes).unwrap();
    let out = askme(&["eval", "--ckpt", &ckpt, "--data", &data, "--negatives", "49"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn attn_dump_of_unknown_user_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = trained(dir.path(), "AskMe_B");
    let tsv = dir.path().join("attn.tsv");
    let out = askme(&["attn-dump", "--ckpt", &ckpt, "--data", &data, "--out", p(&tsv), "--user", "nobody"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nobody"));

    ok(&["attn-dump", "--ckpt", &ckpt, "--data", &data, "--out", p(&tsv), "--user", "u0000"]);
    let text = fs::read_to_string(&tsv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("user\tstep\talpha_ans\talpha_fol\talpha_vot"));
    // u0000 keeps three training answers, one row each
    let steps: Vec<&str> = lines.map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(steps, ["1", "2", "3"]);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(askme(&["--help"]).status.code(), Some(0));
    assert_eq!(askme(&["train"]).status.code(), Some(1));
    assert_eq!(askme(&["eval", "--data", "x", "--scorer", "nonsense"]).status.code(), Some(1));
    let out = askme(&["eval", "--data", "/nonexistent", "--scorer", "random"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corrupted_backward_pass_fails_gradcheck_with_four() {
    let out = askme(&["gradcheck", "--seeds", "1", "--variant", "MultiView", "--corrupt-backward"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
    let out = ok(&["gradcheck", "--seeds", "1", "--variant", "AskMe_P"]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("variant\ttensor\tmax_rel_err\tstatus\n"));
    assert!(table.lines().skip(1).all(|l| l.ends_with("\tpass")));
}

#[test]
fn eval_writes_its_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = trained(dir.path(), "AskMe");
    let out_dir = dir.path().join("report");
    let out = ok(&["eval", "--ckpt", &ckpt, "--data", &data, "--k", "5,10", "--negatives", "49", "--out", p(&out_dir)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, fs::read_to_string(out_dir.join("report.txt")).unwrap());
    let kv = fs::read_to_string(out_dir.join("report.kv")).unwrap();
    assert!(kv.contains("pool=50") && kv.contains("HR@5=") && kv.contains("NDCG@10="));
    assert_eq!(fs::read_to_string(out_dir.join("positions.tsv")).unwrap().lines().count(), 20);
    assert!(Path::new(&format!("{ckpt}.loss.csv")).exists());
}
