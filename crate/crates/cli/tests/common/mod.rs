#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use neurometry::commands::{self, EvaluateOptions, SynthConfig};
use neurometry::report::Aggregation;
use neurometry_core::masks::Connectivity;
use neurometry_core::synth::{PerturbSpec, SceneConfig};

pub fn small_scene(n_cells: usize, seed: u64) -> SceneConfig {
    SceneConfig {
        width: 96,
        height: 96,
        n_cells,
        soma_radius_range: [5.0, 8.0],
        neurites_per_cell: [1, 2],
        neurite_length_range: [10.0, 20.0],
        neurite_thickness: 2.0,
        seed,
        ..SceneConfig::default()
    }
}

pub fn make_corpus(
    dir: &Path,
    scenes: usize,
    scene: SceneConfig,
    perturb: Option<PerturbSpec>,
) -> PathBuf {
    let cfg = SynthConfig {
        scenes,
        scene,
        perturb,
    };
    commands::synth(&cfg, dir).unwrap();
    dir.to_path_buf()
}

pub fn eval_opts(
    corpus: &Path,
    pred: &Path,
    out: &Path,
    resize: Option<(usize, usize)>,
) -> EvaluateOptions {
    EvaluateOptions {
        gt: corpus.join("gt"),
        pred: pred.to_path_buf(),
        images: corpus.join("images"),
        out: out.to_path_buf(),
        threshold: 0.5,
        connectivity: Connectivity::Eight,
        resize,
        aggregation: Aggregation::Micro,
        jobs: 1,
    }
}

/// SHA-256 of every file under `dir`, keyed by relative path.
pub fn tree_hashes(dir: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let bytes = std::fs::read(&p).unwrap();
                let digest = Sha256::digest(&bytes);
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), hex);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// `metric -> value` rows of a two-column CSV report.
pub fn read_table(path: &Path) -> Vec<(String, String)> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}
