#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn era(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_era"))
        .args(args)
        .env("ERA_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn ok(args: &[&str]) -> Output {
    let out = era(args);
    assert_eq!(code(&out), 0, "era {args:?} failed: {}", stderr(&out));
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

/// Four records, two of them gendered.
pub fn toy_corpus(dir: &Path) -> PathBuf {
    write(
        dir,
        "corpus.jsonl",
        concat!(
            "{\"id\": 1, \"text\": \"she is a nurse .\"}\n",
            "{\"id\": 2, \"text\": \"the sky is blue .\"}\n",
            "{\"id\": 3, \"text\": \"he is a pilot .\"}\n",
            "{\"id\": 4, \"text\": \"it rained all day .\"}\n",
        ),
    )
}

/// Records naming people from several groups.
pub fn race_corpus(dir: &Path) -> PathBuf {
    write(
        dir,
        "race.jsonl",
        concat!(
            "{\"id\": \"a\", \"text\": \"Vazquez and Yoder opened a Korean restaurant.\"}\n",
            "{\"id\": \"b\", \"text\": \"the weather was mild.\"}\n",
            "{\"id\": \"c\", \"text\": \"Washington met a Mexican-American chef.\"}\n",
        ),
    )
}

pub fn prompts(dir: &Path) -> PathBuf {
    write(
        dir,
        "prompts.jsonl",
        concat!(
            "{\"group\": \"nurse\", \"prompt\": \"the nurse\"}\n",
            "{\"group\": \"nurse\", \"prompt\": \"a nurse\"}\n",
            "{\"group\": \"pilot\", \"prompt\": \"the pilot\"}\n",
            "{\"group\": \"pilot\", \"prompt\": \"a pilot\"}\n",
        ),
    )
}

pub fn embeddings(dir: &Path) -> PathBuf {
    write(dir, "emb.txt", "she 1 0\nhe -1 0\nnurse 0.2 1\npilot -0.2 1\n")
}

/// Two contextual vectors per word of the shipped `ceat6` test.
pub fn ceat_contexts(dir: &Path) -> PathBuf {
    let test: serde_json::Value =
        serde_json::from_str(include_str!("../../../core/data/ceat/ceat6.json")).unwrap();
    let mut map = serde_json::Map::new();
    let mut state = 11u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    for set in ["x", "y", "a", "b"] {
        for w in test[set]["words"].as_array().unwrap() {
            let vs: Vec<Vec<f64>> = (0..2).map(|_| (0..4).map(|_| next()).collect()).collect();
            map.insert(w.as_str().unwrap().to_string(), serde_json::json!(vs));
        }
    }
    write(dir, "contexts.json", &serde_json::Value::Object(map).to_string())
}

/// Trains a small teacher into `dir/teacher` and returns its checkpoint.
pub fn teacher(dir: &Path, corpus: &Path) -> PathBuf {
    let out = dir.join("teacher");
    ok(&["train-teacher", "--corpus", p(corpus), "--epochs", "10", "--dim", "8", "--out-dir", p(&out), "--seed", "1"]);
    out.join("teacher.json")
}
