mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aesa_core::features::load_layer_stack;
use aesa_core::model::load_checkpoint;
use common::write_corpus;

const TINY_CONFIG: &str = "\
# small model so the smoke runs stay fast
learning_rate = 0.001
max_epochs = 5
patience = 10
seed = 3
adapter_dim = 8
lstm_hidden = 6
shared_dim = 8
attention_heads = 2
dropout = 0.3
";

fn aesa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aesa"))
        .args(args)
        .env_remove("AESA_SEED")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(clips: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), clips, 5).unwrap();
        fs::write(dir.path().join("run.conf"), TINY_CONFIG).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn extract(&self, out_dir: &str, seed: &str) -> Output {
        aesa(&[
            "extract-features",
            "--manifest",
            s(&self.path("manifest.csv")),
            "--out-dir",
            s(&self.path(out_dir)),
            "--layers",
            "3",
            "--dim",
            "12",
            "--seed",
            seed,
        ])
    }

    fn train(&self, config: &str, checkpoint: &str, extra: &[&str]) -> Output {
        let mut args: Vec<String> = vec!["train".into()];
        for (flag, name) in [
            ("--config", config),
            ("--manifest", "manifest.csv"),
            ("--features-dir", "features"),
            ("--checkpoint-out", checkpoint),
        ] {
            args.push(flag.into());
            args.push(s(&self.path(name)).into());
        }
        args.extend(extra.iter().map(|a| a.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        aesa(&refs)
    }

    fn predict(&self, checkpoint: &str, manifest: &str, out: &str) -> Output {
        aesa(&[
            "predict",
            "--checkpoint",
            s(&self.path(checkpoint)),
            "--manifest",
            s(&self.path(manifest)),
            "--features-dir",
            s(&self.path("features")),
            "--out",
            s(&self.path(out)),
        ])
    }
}

#[test]
fn extract_writes_one_stack_per_clip_and_is_repeatable() {
    let ws = Workspace::new(3);
    let out = ws.extract("features", "4");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let index = fs::read_to_string(ws.path("features/index.csv")).unwrap();
    assert_eq!(index.lines().count(), 4);
    for i in 0..3 {
        let stack = load_layer_stack(ws.path(&format!("features/c{i}.aesf"))).unwrap();
        assert_eq!((stack.layers(), stack.dims()), (3, 12));
        assert!(index.contains(&format!("c{i},c{i}.aesf")));
    }

    assert_eq!(code(&ws.extract("again", "4")), 0);
    for name in ["c0.aesf", "c1.aesf", "c2.aesf", "index.csv"] {
        let a = fs::read(ws.path("features").join(name)).unwrap();
        let b = fs::read(ws.path("again").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    assert_eq!(code(&ws.extract("other", "5")), 0);
    assert_ne!(
        fs::read(ws.path("features/c0.aesf")).unwrap(),
        fs::read(ws.path("other/c0.aesf")).unwrap()
    );
}

#[test]
fn missing_audio_is_a_partial_failure() {
    let ws = Workspace::new(3);
    fs::remove_file(ws.path("c1.wav")).unwrap();
    let out = ws.extract("features", "0");
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("c1"), "{}", stderr(&out));
    assert!(ws.path("features/c0.aesf").exists());
    assert!(ws.path("features/c2.aesf").exists());
    assert!(!ws.path("features/c1.aesf").exists());
    let index = fs::read_to_string(ws.path("features/index.csv")).unwrap();
    assert!(!index.contains("c1,"));
}

#[test]
fn train_smoke_writes_checkpoint_history_and_metadata() {
    let ws = Workspace::new(16);
    assert_eq!(code(&ws.extract("features", "3")), 0);
    let out = ws.train("run.conf", "model.aesc", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let ckpt = load_checkpoint(ws.path("model.aesc")).unwrap();
    assert_eq!(ckpt.params.config.input_dim, 12);
    assert_eq!(ckpt.params.config.layer_count, 3);
    let history = fs::read_to_string(ws.path("model.aesc.history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 5);
    for line in history.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(record["val_mse"].as_f64().unwrap().is_finite());
    }
    let meta = fs::read_to_string(ws.path("model.aesc.meta.txt")).unwrap();
    for key in [
        "seed = 3",
        "alpha = 0.2",
        "epsilon = 0.1",
        "margin = 0.5",
        "buffer_capacity = 256",
        "val_clips = 3",
    ] {
        assert!(meta.contains(key), "metadata lacks `{key}`:\n{meta}");
    }
}

#[test]
fn triplet_weight_changes_the_trained_model() {
    let ws = Workspace::new(16);
    assert_eq!(code(&ws.extract("features", "3")), 0);
    fs::write(ws.path("plain.conf"), format!("{TINY_CONFIG}alpha = 0\n")).unwrap();
    assert_eq!(code(&ws.train("run.conf", "with.aesc", &[])), 0);
    assert_eq!(code(&ws.train("plain.conf", "without.aesc", &[])), 0);
    assert_ne!(
        fs::read(ws.path("with.aesc")).unwrap(),
        fs::read(ws.path("without.aesc")).unwrap()
    );
}

#[test]
fn seed_flag_beats_environment_which_beats_config() {
    let ws = Workspace::new(8);
    assert_eq!(code(&ws.extract("features", "3")), 0);
    let run = |seed_env: Option<&str>, flag: &[&str], name: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_aesa"));
        cmd.args([
            "train",
            "--config",
            s(&ws.path("run.conf")),
            "--manifest",
            s(&ws.path("manifest.csv")),
            "--features-dir",
            s(&ws.path("features")),
            "--checkpoint-out",
            s(&ws.path(name)),
        ])
        .args(flag)
        .env_remove("AESA_SEED");
        if let Some(v) = seed_env {
            cmd.env("AESA_SEED", v);
        }
        let out = cmd.output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read_to_string(ws.path(&format!("{name}.meta.txt"))).unwrap()
    };
    assert!(run(None, &[], "a").contains("seed = 3\n"));
    assert!(run(Some("17"), &[], "b").contains("seed = 17\n"));
    assert!(run(Some("17"), &["--seed", "23"], "c").contains("seed = 23\n"));
}

#[test]
fn config_errors_are_validation_failures() {
    let ws = Workspace::new(4);
    fs::write(ws.path("bad.conf"), "learning_rat = 0.1\n").unwrap();
    let out = ws.train("bad.conf", "model.aesc", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("learning_rat"));
    assert!(!ws.path("model.aesc").exists());

    let out = aesa(&[
        "evaluate",
        "--predictions",
        "/nonexistent.csv",
        "--gold",
        "/nonexistent.csv",
        "--out",
        "/tmp/x",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn predict_writes_four_rows_per_clip_deterministically() {
    let ws = Workspace::new(16);
    assert_eq!(code(&ws.extract("features", "3")), 0);
    assert_eq!(code(&ws.train("run.conf", "model.aesc", &[])), 0);
    let manifest = fs::read_to_string(ws.path("manifest.csv")).unwrap();
    let two: Vec<&str> = manifest.lines().take(3).collect();
    fs::write(ws.path("two.csv"), two.join("\n") + "\n").unwrap();

    let out = ws.predict("model.aesc", "two.csv", "pred.csv");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(ws.path("pred.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "clip_id,system_id,domain,axis,prediction");
    assert_eq!(lines.len(), 9);
    for row in &lines[1..] {
        let value: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((1.0..=10.0).contains(&value), "{row}");
    }
    assert!(lines[1].starts_with("c0,sys0,speech,PQ,"));

    assert_eq!(code(&ws.predict("model.aesc", "two.csv", "again.csv")), 0);
    assert_eq!(
        fs::read(ws.path("pred.csv")).unwrap(),
        fs::read(ws.path("again.csv")).unwrap()
    );
}

#[test]
fn predict_rejects_mismatched_features_before_writing() {
    let ws = Workspace::new(16);
    assert_eq!(code(&ws.extract("features", "3")), 0);
    assert_eq!(code(&ws.train("run.conf", "model.aesc", &[])), 0);
    // Replace one clip's features with a wider stack.
    let out = aesa(&[
        "extract-features",
        "--manifest",
        s(&ws.path("manifest.csv")),
        "--out-dir",
        s(&ws.path("wide")),
        "--layers",
        "3",
        "--dim",
        "16",
    ]);
    assert_eq!(code(&out), 0);
    fs::copy(ws.path("wide/c4.aesf"), ws.path("features/c4.aesf")).unwrap();
    let out = ws.predict("model.aesc", "manifest.csv", "pred.csv");
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("c4 (3x16)"), "{}", stderr(&out));
    assert!(!ws.path("pred.csv").exists());
}

fn write_eval_fixture(dir: &Path, reversed: bool) {
    let mut gold = String::from("clip_id,path,domain,system_id,split,pq,pc,ce,cu\n");
    let mut pred = String::from("clip_id,system_id,domain,axis,prediction\n");
    for domain in ["speech", "music", "audio"] {
        for i in 0..4 {
            let g = 2.0 + 1.5 * i as f64;
            gold.push_str(&format!(
                "{domain}{i},x.wav,{domain},sys{i},test,{g},{g},{g},{g}\n"
            ));
            let p = if reversed {
                2.0 + 1.5 * (3 - i) as f64
            } else {
                g
            };
            for axis in ["PQ", "PC", "CE", "CU"] {
                pred.push_str(&format!("{domain}{i},sys{i},{domain},{axis},{p}\n"));
            }
        }
    }
    fs::write(dir.join("gold.csv"), gold).unwrap();
    fs::write(dir.join("pred.csv"), pred).unwrap();
}

fn evaluate(dir: &Path, level: &str) -> Output {
    aesa(&[
        "evaluate",
        "--predictions",
        s(&dir.join("pred.csv")),
        "--gold",
        s(&dir.join("gold.csv")),
        "--level",
        level,
        "--out",
        s(&dir.join("report")),
    ])
}

#[test]
fn evaluate_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    write_eval_fixture(dir.path(), false);
    for level in ["utterance", "system"] {
        let out = evaluate(dir.path(), level);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "domain,axis,mse,lcc,srcc,ktau");
        assert_eq!(rows.len(), 13);
        for row in &rows[1..] {
            assert!(row.ends_with(",0.0000,1.0000,1.0000,1.0000"), "{row}");
        }
        let table = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert_eq!(String::from_utf8_lossy(&out.stdout), table);
    }
}

#[test]
fn evaluate_reversed_ranks() {
    let dir = tempfile::tempdir().unwrap();
    write_eval_fixture(dir.path(), true);
    assert_eq!(code(&evaluate(dir.path(), "utterance")), 0);
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[4], "-1.0000", "{row}");
        assert_eq!(fields[5], "-1.0000", "{row}");
    }
}

#[test]
fn evaluate_lists_unmatched_ids_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    write_eval_fixture(dir.path(), false);
    let mut pred = fs::read_to_string(dir.path().join("pred.csv")).unwrap();
    pred.push_str("ghost1,,music,PQ,5\nghost2,,audio,CU,5\n");
    fs::write(dir.path().join("pred.csv"), pred).unwrap();
    let out = evaluate(dir.path(), "system");
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("ghost1") && err.contains("ghost2"), "{err}");
    assert!(!dir.path().join("report.csv").exists());
    assert!(!dir.path().join("report.txt").exists());
}

#[test]
fn manifest_errors_exit_with_validation_code() {
    let ws = Workspace::new(3);
    let mut manifest = fs::read_to_string(ws.path("manifest.csv")).unwrap();
    manifest.push_str("c0,c0.wav,speech,,train,5,5,5,5\n");
    fs::write(ws.path("manifest.csv"), manifest).unwrap();
    let out = ws.extract("features", "0");
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("duplicate clip_id `c0`"),
        "{}",
        stderr(&out)
    );
    assert!(!ws.path("features").exists());
}
