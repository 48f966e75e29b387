#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use trp::harness::{gen_sparse_transfer, write_dataset, SparseTransferSpec};

pub fn run(args: &[&str]) -> i32 {
    let argv = std::iter::once("trp").chain(args.iter().copied());
    trp_cli::cli_main(argv)
}

/// Writes a small synthetic problem as CSVs plus a manifest; returns the manifest path.
pub fn write_manifest(dir: &Path, seed: u64, p: usize, k: usize) -> PathBuf {
    let spec = SparseTransferSpec {
        seed,
        p,
        k,
        n_target: 30,
        n_source_range: (40, 60),
        ..SparseTransferSpec::default()
    };
    let data = gen_sparse_transfer(&spec).unwrap();
    write_dataset(&dir.join("target.csv"), data.problem.target()).unwrap();
    let mut sources = Vec::new();
    for (j, s) in data.problem.sources().iter().enumerate() {
        let name = format!("source{}.csv", j + 1);
        write_dataset(&dir.join(&name), s).unwrap();
        sources.push(format!("\"{name}\""));
    }
    let path = dir.join("manifest.json");
    let text = format!(
        "{{\"target\": \"target.csv\", \"sources\": [{}], \"standardize\": false, \"seed\": {seed}}}",
        sources.join(", ")
    );
    fs::write(&path, text).unwrap();
    path
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}
