//! Drives the `lanlan` binary over the bundled mini-corpus.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const SEED: &str = "7";

/// The full pipeline in dependency order.
pub const STAGES: &[&[&str]] = &[
    &["ingest"],
    &["normalize"],
    &["cooccur"],
    &["train-embeddings", "--seed", SEED],
    &["featurize"],
    &["train-classifier", "--seed", SEED],
    &["cross-validate", "--seed", SEED],
    &["transfer", "--seed", SEED],
    &["predict"],
    &["baseline", "--seed", SEED],
    &["associate"],
    &["subsets"],
    &["fit-growth", "--seed", SEED],
    &["forecast", "--seed", SEED],
    &["compare-growth"],
    &["report"],
];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini").join(name)
}

pub fn lanlan(workspace: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanlan"))
        .arg("--config")
        .arg(fixture("config.json"))
        .args(args)
        .env("LANLAN_WORKSPACE", workspace)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn lanlan")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn run_stages(workspace: &Path, stages: &[&[&str]]) -> Result<(), String> {
    for args in stages {
        let out = lanlan(workspace, args);
        if !out.status.success() {
            return Err(format!("`{}` exited with {:?}: {}", args.join(" "), out.status.code(), stderr(&out)));
        }
    }
    Ok(())
}

/// Every file under `root`, keyed by its relative path.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn sha256(bytes: &[u8]) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(bytes))
}

/// Checks that each stage has a manifest, that every listed output exists
/// with the recorded hash, that every artifact in the workspace is listed by
/// some manifest, and that every workspace input was produced upstream with
/// the same hash.
pub fn check_manifest_chain(root: &Path) -> Result<usize, String> {
    let tree = read_tree(root);
    let mut produced: BTreeMap<String, (String, String)> = BTreeMap::new();
    let mut links = 0;
    for args in STAGES {
        let stage = args[0];
        let rel = format!("manifests/{stage}.json");
        let bytes = tree.get(&rel).ok_or_else(|| format!("no manifest for {stage}"))?;
        let m: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| format!("{rel}: {e}"))?;
        for input in m["inputs"].as_array().ok_or(format!("{rel}: no inputs"))? {
            let path = input["path"].as_str().unwrap();
            if Path::new(path).is_absolute() {
                continue;
            }
            let (producer, hash) = produced.get(path).ok_or_else(|| format!("{stage} reads {path}, which no earlier stage wrote"))?;
            if hash != input["sha256"].as_str().unwrap() {
                return Err(format!("{stage} read {path} with a different hash than {producer} wrote"));
            }
            links += 1;
        }
        let outputs = m["outputs"].as_array().ok_or(format!("{rel}: no outputs"))?;
        if outputs.is_empty() {
            return Err(format!("{stage} wrote nothing"));
        }
        for output in outputs {
            let path = output["path"].as_str().unwrap().to_string();
            let hash = output["sha256"].as_str().unwrap().to_string();
            let actual = tree.get(&path).ok_or_else(|| format!("{stage} lists missing output {path}"))?;
            if sha256(actual) != hash {
                return Err(format!("{path} does not match the hash in {rel}"));
            }
            produced.insert(path, (stage.to_string(), hash));
        }
    }
    for path in tree.keys().filter(|p| !p.starts_with("manifests/")) {
        if !produced.contains_key(path) {
            return Err(format!("{path} is not listed in any manifest"));
        }
    }
    Ok(links)
}
