//! End-to-end pipeline behavior over synthetic days: staging, caching,
//! invalidation, and whole-tree determinism.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flowforge_core::capture::CaptureWriter;
use flowforge_core::synth;
use flowforge_core::table::read_parquet;
use flowforge_pipeline::{
    hash_file, ingest_manifest, preprocess, run_day, run_days, sample_days, stage_raw,
    stats_tree, Layout, PipelineConfig, StageAction, StageRegistry,
};

fn date(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2011, 1, d).unwrap()
}

/// Write a synthetic raw day (capture + CSV + ADMD annotations) into
/// `dir` and return (capture path, annotation paths).
fn make_raw_day(
    dir: &Path,
    date: NaiveDate,
    seed: u64,
    n_packets: usize,
    n_anomalies: usize,
    gzip: bool,
) -> (PathBuf, Vec<PathBuf>) {
    fs::create_dir_all(dir).unwrap();
    let packets = synth::traffic_day(date, seed, n_packets);
    let mut cap = dir.join(format!("{date}.pcap"));
    let mut w = CaptureWriter::create(&cap, 1).unwrap();
    for p in &packets {
        w.write(p).unwrap();
    }
    w.finish().unwrap();
    if gzip {
        let gz_path = dir.join(format!("{date}.pcap.gz"));
        let bytes = fs::read(&cap).unwrap();
        let mut enc = flate2::write::GzEncoder::new(
            fs::File::create(&gz_path).unwrap(),
            flate2::Compression::fast(),
        );
        enc.write_all(&bytes).unwrap();
        enc.finish().unwrap();
        fs::remove_file(&cap).unwrap();
        cap = gz_path;
    }
    let day = synth::annotations_day(date, seed, &packets, n_anomalies);
    let csv = dir.join(format!("{date}.csv"));
    synth::write_annotation_csv(&csv, &day.anomalies).unwrap();
    let xml = dir.join(format!("{date}.xml"));
    synth::write_annotation_admd(&xml, &day.anomalies).unwrap();
    (cap, vec![csv, xml])
}

fn write_manifest(path: &Path, rows: &[(NaiveDate, &PathBuf, &Vec<PathBuf>)]) {
    let mut text = String::from("date,capture,annotations\n");
    for (d, cap, anns) in rows {
        let anns: Vec<String> =
            anns.iter().map(|p| p.to_string_lossy().into_owned()).collect();
        text.push_str(&format!("{d},{},{}\n", cap.display(), anns.join(";")));
    }
    fs::write(path, text).unwrap();
}

/// Stage two synthetic days (one gzipped) from `source` into `root`.
fn build_root(source: &Path, root: &Path) -> (Layout, Vec<NaiveDate>) {
    let dates = vec![date(12), date(13)];
    let d1 = make_raw_day(&source.join("d1"), dates[0], 1, 600, 3, false);
    let d2 = make_raw_day(&source.join("d2"), dates[1], 2, 600, 3, true);
    let manifest_path = source.join("manifest.csv");
    write_manifest(
        &manifest_path,
        &[(dates[0], &d1.0, &d1.1), (dates[1], &d2.0, &d2.1)],
    );
    let manifest = ingest_manifest(&manifest_path).unwrap();
    assert_eq!(manifest.entries.len(), 2);
    let layout = Layout::new(root);
    stage_raw(&layout, &manifest).unwrap();
    (layout, dates)
}

fn tree_digest(root: &Path) -> BTreeMap<String, String> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, String>) {
        if !dir.is_dir() {
            return;
        }
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hash_file(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn actions(report: &flowforge_pipeline::DayReport) -> Vec<(&'static str, StageAction)> {
    report.stages.iter().map(|s| (s.stage, s.action)).collect()
}

#[test]
fn pipeline_runs_caches_and_invalidates() {
    let tmp = tempfile::tempdir().unwrap();
    let (layout, dates) = build_root(&tmp.path().join("src"), &tmp.path().join("data"));
    let cfg = PipelineConfig::default();
    let registry = StageRegistry::standard();
    assert_eq!(
        registry.names(),
        ["merge-annotations", "split", "flows", "label", "aggregate"]
    );

    // first run: everything executes
    let reports = run_days(&layout, &cfg, &registry, None, &dates, 2).unwrap();
    for r in &reports {
        assert!(
            r.stages.iter().all(|s| s.action == StageAction::Ran),
            "{:?}",
            actions(r)
        );
        assert_eq!(r.stages.len(), 5);
    }

    // daily outputs exist and carry both benign and anomaly labels
    let stats = stats_tree(&layout).unwrap();
    assert_eq!(stats.days.len(), 2);
    assert!(stats.total_rows > 0);
    assert!(stats.labels.contains_key("benign"), "{:?}", stats.labels);
    assert!(stats.labels.len() > 1, "expected anomaly labels: {:?}", stats.labels);
    assert!(stats.days.iter().all(|d| d.filters > 0));

    // second run: everything cached
    let reports = run_days(&layout, &cfg, &registry, None, &dates, 1).unwrap();
    for r in &reports {
        assert!(
            r.stages.iter().all(|s| s.action == StageAction::Skipped),
            "{:?}",
            actions(r)
        );
    }

    // corrupting a split output reruns split and everything downstream
    let split_dir = layout.interim_day(dates[0]).join("split");
    let victim = fs::read_dir(&split_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "pcap"))
        .expect("some partition pcap");
    let mut bytes = fs::read(&victim).unwrap();
    bytes.extend_from_slice(b"corruption");
    fs::write(&victim, &bytes).unwrap();

    let report = run_day(&layout, &cfg, &registry, None, dates[0]).unwrap();
    assert_eq!(
        actions(&report),
        [
            ("merge-annotations", StageAction::Skipped),
            ("split", StageAction::Ran),
            ("flows", StageAction::Ran),
            ("label", StageAction::Ran),
            ("aggregate", StageAction::Ran),
        ]
    );
    // the rerun restored the original bytes
    let again = run_day(&layout, &cfg, &registry, None, dates[0]).unwrap();
    assert!(again.stages.iter().all(|s| s.action == StageAction::Skipped));

    // editing a raw annotation file invalidates the whole day
    let ann_dir = layout.raw_day(dates[0]).join("annotations");
    let csv = fs::read_dir(&ann_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    let mut text = fs::read_to_string(&csv).unwrap();
    text.push('\n');
    fs::write(&csv, text).unwrap();
    let report = run_day(&layout, &cfg, &registry, None, dates[0]).unwrap();
    assert!(
        report.stages.iter().all(|s| s.action == StageAction::Ran),
        "{:?}",
        actions(&report)
    );

    // flow timeout participates in the cache key of flows and downstream
    let mut tweaked = cfg.clone();
    tweaked.flowmeter.flow_timeout_us /= 2;
    let report = run_day(&layout, &tweaked, &registry, None, dates[0]).unwrap();
    assert_eq!(
        actions(&report)[..3],
        [
            ("merge-annotations", StageAction::Skipped),
            ("split", StageAction::Skipped),
            ("flows", StageAction::Ran),
        ]
    );
}

#[test]
fn incomplete_raw_day_errors_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = Layout::new(tmp.path().join("data"));
    let d = date(12);

    // capture present, annotations absent
    let raw = layout.raw_day(d);
    fs::create_dir_all(&raw).unwrap();
    let packets = synth::traffic_day(d, 3, 50);
    let mut w = CaptureWriter::create(raw.join("capture.pcap"), 1).unwrap();
    for p in &packets {
        w.write(p).unwrap();
    }
    w.finish().unwrap();

    let cfg = PipelineConfig::default();
    let registry = StageRegistry::standard();
    let err = run_day(&layout, &cfg, &registry, None, d).err().expect("must fail");
    assert_eq!(err.category(), "validation");
    assert!(
        !layout.interim_day(d).exists(),
        "no output may exist after a pre-run failure"
    );
}

#[test]
fn stage_subsets_are_validated_and_ordered() {
    let tmp = tempfile::tempdir().unwrap();
    let (layout, dates) = build_root(&tmp.path().join("src"), &tmp.path().join("data"));
    let cfg = PipelineConfig::default();
    let registry = StageRegistry::standard();

    let unknown = vec!["flows".to_string(), "polish".to_string()];
    let err = run_day(&layout, &cfg, &registry, Some(&unknown), dates[0])
        .err()
        .expect("must fail");
    assert_eq!(err.category(), "validation");
    assert!(err.to_string().contains("merge-annotations"), "{err}");

    // downstream-only subset before upstream ever ran: missing inputs
    let subset = vec!["flows".to_string()];
    let err = run_day(&layout, &cfg, &registry, Some(&subset), dates[0])
        .err()
        .expect("must fail");
    assert_eq!(err.category(), "validation");
    assert!(err.to_string().contains("missing input"), "{err}");

    // run upstream first, then the subset alone works and is cached
    let head = vec!["merge-annotations".to_string(), "split".to_string()];
    run_day(&layout, &cfg, &registry, Some(&head), dates[0]).unwrap();
    let report = run_day(&layout, &cfg, &registry, Some(&subset), dates[0]).unwrap();
    assert_eq!(actions(&report), [("flows", StageAction::Ran)]);
    let report = run_day(&layout, &cfg, &registry, Some(&subset), dates[0]).unwrap();
    assert_eq!(actions(&report), [("flows", StageAction::Skipped)]);
}

#[test]
fn sample_and_preprocess_cache_and_reproduce() {
    let tmp = tempfile::tempdir().unwrap();
    let (layout, dates) = build_root(&tmp.path().join("src"), &tmp.path().join("data"));
    let cfg = PipelineConfig::default();
    let registry = StageRegistry::standard();
    run_days(&layout, &cfg, &registry, None, &dates, 0).unwrap();

    let outcome = sample_days(&layout, &dates, 40, 7).unwrap();
    assert_eq!(outcome.action, StageAction::Ran);
    let sample = read_parquet(layout.dataset_dir().join("sample.parquet")).unwrap();
    assert_eq!(sample.num_rows(), 40);

    let outcome = sample_days(&layout, &dates, 40, 7).unwrap();
    assert_eq!(outcome.action, StageAction::Skipped);
    // a different seed is a different stage parameterization
    let outcome = sample_days(&layout, &dates, 40, 8).unwrap();
    assert_eq!(outcome.action, StageAction::Ran);
    let outcome = sample_days(&layout, &dates, 40, 7).unwrap();
    assert_eq!(outcome.action, StageAction::Ran, "seed change must not poison the cache");

    let (outcome, report) = preprocess(&layout, None, 7, true).unwrap();
    assert_eq!(outcome.action, StageAction::Ran);
    assert_eq!(report.input_rows, 40);
    assert_eq!(
        report.train_rows + report.validation_rows + report.test_rows + report.dropped_rows,
        40
    );
    assert!(report.validation_rows > 0);
    for name in ["train.parquet", "validation.parquet", "test.parquet", "scaler.txt", "split-manifest.txt", "preprocess.json"] {
        assert!(layout.dataset_dir().join(name).exists(), "{name}");
    }

    let (outcome, cached_report) = preprocess(&layout, None, 7, true).unwrap();
    assert_eq!(outcome.action, StageAction::Skipped);
    assert_eq!(cached_report, report);

    // without validation the stale validation split disappears
    let (outcome, report) = preprocess(&layout, None, 7, false).unwrap();
    assert_eq!(outcome.action, StageAction::Ran);
    assert_eq!(report.validation_rows, 0);
    assert!(!layout.dataset_dir().join("validation.parquet").exists());
}

#[test]
fn identical_inputs_yield_byte_identical_trees() {
    let tmp = tempfile::tempdir().unwrap();
    let source = tmp.path().join("src");
    let run_all = |root: &Path| {
        let layout = Layout::new(root);
        let dates = vec![date(12), date(13)];
        // reuse the already-written source days for both roots
        let manifest = ingest_manifest(source.join("manifest.csv")).unwrap();
        stage_raw(&layout, &manifest).unwrap();
        let cfg = PipelineConfig::default();
        let registry = StageRegistry::standard();
        run_days(&layout, &cfg, &registry, None, &dates, 2).unwrap();
        sample_days(&layout, &dates, 50, 9).unwrap();
        preprocess(&layout, None, 9, true).unwrap();
    };
    build_root(&source, &tmp.path().join("a"));
    run_all(&tmp.path().join("a"));
    run_all(&tmp.path().join("b"));

    let a = tree_digest(&tmp.path().join("a"));
    let b = tree_digest(&tmp.path().join("b"));
    assert_eq!(a.len(), b.len());
    assert_eq!(a, b, "same inputs and seed must reproduce every byte");
    assert!(a.keys().all(|k| !k.contains(".tmp.")), "no temp residue");
}
