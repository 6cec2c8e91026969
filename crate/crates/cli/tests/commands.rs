mod common;

use common::*;
use neurometry::commands::{self, MeasureOptions, SynthConfig};
use neurometry::report::read_report_json;
use neurometry_core::annotations::serialize_rle_instances;
use neurometry_core::masks::{Connectivity, Instance};
use neurometry_core::synth::{generate_scene, PerturbSpec, SceneConfig};

#[test]
fn measure_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 1, small_scene(3, 4), None);
    let opts = MeasureOptions {
        images: corpus.join("images"),
        annotations: corpus.join("gt"),
        out: dir.path().join("out"),
        resize: Some((640, 640)),
        connectivity: Connectivity::Eight,
        jobs: 1,
    };
    let path = commands::measure(&opts).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "image_id,instance_id,source,length_px,width_px,area_px2,min_intensity,mean_intensity,max_intensity"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("scene_000,1,gt,"));

    let first = std::fs::read(&path).unwrap();
    commands::measure(&opts).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn measure_handles_empty_sets_and_missing_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 1, small_scene(0, 4), None);
    let mut opts = MeasureOptions {
        images: corpus.join("images"),
        annotations: corpus.join("gt"),
        out: dir.path().join("out"),
        resize: None,
        connectivity: Connectivity::Eight,
        jobs: 1,
    };
    let path = commands::measure(&opts).unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap().lines().count(), 1);

    std::fs::copy(
        corpus.join("gt/scene_000.json"),
        corpus.join("gt/orphan.json"),
    )
    .unwrap();
    let err = commands::measure(&opts).unwrap_err().to_string();
    assert!(err.contains("orphan"), "{err}");
    opts.annotations = corpus.join("missing");
    assert!(commands::measure(&opts).is_err());
}

#[test]
fn identity_evaluation_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 2, small_scene(4, 10), None);
    let out = dir.path().join("eval");
    let bundle = commands::evaluate(&eval_opts(&corpus, &corpus.join("gt"), &out, None)).unwrap();
    assert!(bundle.failures.is_empty());
    for (_, v) in read_table(&out.join("metrics.csv")) {
        assert_eq!(v, "100.00");
    }
    let acc = read_table(&out.join("accuracy.csv"));
    assert_eq!(acc.len(), 8);
    assert!(acc.iter().all(|(_, v)| v == "100.00"));
    assert!(out.join("overlays/scene_001.png").is_file());
}

#[test]
fn erosion_lowers_sq_but_not_rq() {
    let dir = tempfile::tempdir().unwrap();
    let mut scene = small_scene(3, 12);
    scene.neurites_per_cell = [0, 0];
    scene.soma_radius_range = [6.0, 9.0];
    let spec = PerturbSpec {
        erode_px: 1,
        ..PerturbSpec::default()
    };
    let corpus = make_corpus(dir.path(), 1, scene, Some(spec));
    let out = dir.path().join("eval");
    let bundle = commands::evaluate(&eval_opts(&corpus, &corpus.join("pred"), &out, None)).unwrap();
    assert!(bundle.dataset.sq < 1.0);
    assert_eq!(bundle.dataset.rq, 1.0);
    for pair in &bundle.per_image[0].matches.pairs {
        assert!(pair.iou > 0.5);
    }
}

#[test]
fn dropped_cell_gives_two_thirds_rq() {
    let dir = tempfile::tempdir().unwrap();
    let scene = small_scene(2, 3);
    let corpus = make_corpus(dir.path(), 1, scene.clone(), None);
    let (_, cells) = generate_scene(&scene).unwrap();
    let kept: Vec<Instance> = cells[..1].to_vec();
    std::fs::write(
        corpus.join("pred/scene_000.json"),
        serialize_rle_instances(scene.width, scene.height, &kept),
    )
    .unwrap();
    let out = dir.path().join("eval");
    let bundle = commands::evaluate(&eval_opts(
        &corpus,
        &corpus.join("pred"),
        &out,
        Some((640, 640)),
    ))
    .unwrap();
    let row = &bundle.per_image[0];
    assert_eq!((row.tally.tp, row.tally.fn_, row.tally.fp), (1, 1, 0));
    assert_eq!(row.metrics.rq, 1.0 / 1.5);
}

#[test]
fn bad_images_are_reported_and_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 3, small_scene(2, 30), None);
    std::fs::write(corpus.join("pred/scene_001.json"), "{broken").unwrap();
    std::fs::remove_file(corpus.join("gt/scene_002.json")).unwrap();
    let out = dir.path().join("eval");
    let bundle = commands::evaluate(&eval_opts(&corpus, &corpus.join("pred"), &out, None)).unwrap();
    assert_eq!(bundle.per_image.len(), 1);
    let failed: Vec<&str> = bundle
        .failures
        .iter()
        .map(|f| f.image_id.as_str())
        .collect();
    assert_eq!(failed, vec!["scene_001", "scene_002"]);
    assert!(bundle.failures[0].error.contains("scene_001.json"));
}

#[test]
fn image_annotation_size_mismatch_is_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 1, small_scene(1, 8), None);
    std::fs::write(
        corpus.join("images/scene_000.pgm"),
        b"P2 4 4 255\n0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0\n",
    )
    .unwrap();
    let out = dir.path().join("eval");
    let bundle = commands::evaluate(&eval_opts(&corpus, &corpus.join("pred"), &out, None)).unwrap();
    assert!(bundle.failures[0].error.contains("does not match"));
}

#[test]
fn report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PerturbSpec {
        dilate_px: 1,
        drop_prob: 0.3,
        spurious_count: 1,
        seed: 2,
        ..PerturbSpec::default()
    };
    let corpus = make_corpus(dir.path(), 2, small_scene(4, 40), Some(spec));
    let out = dir.path().join("eval");
    let bundle = commands::evaluate(&eval_opts(
        &corpus,
        &corpus.join("pred"),
        &out,
        Some((200, 150)),
    ))
    .unwrap();
    assert_eq!(read_report_json(&out.join("report.json")).unwrap(), bundle);
}

#[test]
fn synth_writes_every_tree() {
    let dir = tempfile::tempdir().unwrap();
    make_corpus(dir.path(), 2, small_scene(3, 1), None);
    for sub in ["images", "gt", "pred"] {
        assert_eq!(std::fs::read_dir(dir.path().join(sub)).unwrap().count(), 2);
    }
    // Without a perturbation the prediction decodes to the ground truth.
    let gt = std::fs::read_to_string(dir.path().join("gt/scene_000.json")).unwrap();
    let pred = std::fs::read_to_string(dir.path().join("pred/scene_000.json")).unwrap();
    let load = |t: &str| {
        neurometry_core::annotations::parse_document(t)
            .unwrap()
            .to_instances(None, Connectivity::Eight)
            .unwrap()
            .instances
    };
    assert_eq!(load(&gt), load(&pred));
}

#[test]
fn synth_config_file_parsing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"scenes": 1, "scene": {"width": 64}}"#).unwrap();
    let partial = commands::read_synth_config(&path).unwrap();
    assert_eq!(partial.scene.width, 64);
    assert_eq!(partial.scene.height, SceneConfig::default().height);
    std::fs::write(&path, r#"{"scenes": 1, "scene": {"hieght": 64}}"#).unwrap();
    let err = format!("{:#}", commands::read_synth_config(&path).unwrap_err());
    assert!(err.contains("hieght"), "{err}");
    let cfg = SynthConfig {
        scenes: 1,
        scene: small_scene(1, 1),
        perturb: None,
    };
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(commands::read_synth_config(&path).unwrap(), cfg);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path(), 2, small_scene(2, 5), None);
    let bin = env!("CARGO_BIN_EXE_neurometry");
    let run = |args: &[&str]| std::process::Command::new(bin).args(args).output().unwrap();
    let p = |s: &str| corpus.join(s).display().to_string();
    let ok = run(&[
        "evaluate",
        "--gt",
        &p("gt"),
        "--pred",
        &p("pred"),
        "--images",
        &p("images"),
        "--resize",
        "none",
        "--out",
        &p("ok"),
    ]);
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    std::fs::remove_file(corpus.join("pred/scene_001.json")).unwrap();
    let bad = run(&[
        "evaluate",
        "--gt",
        &p("gt"),
        "--pred",
        &p("pred"),
        "--images",
        &p("images"),
        "--out",
        &p("bad"),
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("scene_001"));
    // The surviving image is still reported.
    assert!(corpus.join("bad/overlays/scene_000.png").is_file());
    let flag = run(&[
        "measure",
        "--images",
        &p("images"),
        "--annotations",
        &p("gt"),
        "--connectivity",
        "5",
        "--out",
        &p("m"),
    ]);
    assert!(!flag.status.success());
}
