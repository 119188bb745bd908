use std::fs;
use std::path::Path;

use kws_core::audio::{build_split, write_wav, Partition, SplitRatios};
use kws_core::harness::{self, synth, CacheMeta, ExperimentConfig, SweepParam, SweepSpec};
use kws_core::tm::{load_model, save_model, KwsModel, LiteralSet};
use kws_core::{KwsError, OpCounters, TMHyperparams, TsetlinMachine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn keywords(spec: &str) -> Vec<String> {
    harness::resolve_keywords(spec)
}

fn config(corpus: &Path, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        corpus_root: corpus.to_path_buf(),
        output_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    };
    cfg.hyperparams.clauses_per_class = 20;
    cfg.hyperparams.epochs = 2;
    cfg
}

fn corpus(dir: &Path, per_class: usize) -> std::path::PathBuf {
    let root = dir.join("corpus");
    synth::write_synthetic_corpus(&root, &keywords("baseline4"), per_class, 11).unwrap();
    root
}

#[test]
fn split_test_fraction_on_full_sized_classes() {
    let dir = tempfile::tempdir().unwrap();
    let kws = keywords("baseline4");
    for kw in &kws {
        let d = dir.path().join(kw);
        fs::create_dir_all(&d).unwrap();
        for i in 0..3340 {
            fs::write(
                d.join(format!("{:08x}_nohash_{}.wav", i * 2654435761u64 % (1 << 32), i % 5)),
                b"",
            )
            .unwrap();
        }
    }
    let split = build_split(dir.path(), &kws, SplitRatios::default(), 42).unwrap();
    assert_eq!(split.len(), 4 * 3340);
    for label in 0..kws.len() {
        let count = |p: Partition| split.part(p).iter().filter(|c| c.label == label).count() as f64;
        let frac = count(Partition::Test) / 3340.0;
        assert!((0.07..=0.13).contains(&frac), "class {label} test fraction {frac}");
    }
    // no source id lands in two partitions
    let manifest = split.manifest();
    assert_eq!(manifest.assignments.len(), split.len());
}

#[test]
fn missing_class_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 3);
    let kws = vec!["yes".to_string(), "absent".to_string()];
    let err = build_split(&root, &kws, SplitRatios::default(), 1).unwrap_err();
    assert!(matches!(err, KwsError::MissingClass(ref k) if k == "absent"));
    assert_eq!(err.exit_code(), 2);

    let mut cfg = config(&root, &dir.path().join("run"));
    cfg.keywords = kws;
    assert!(matches!(harness::cmd_prepare(&cfg), Err(KwsError::MissingClass(_))));
    assert!(!cfg.cache_dir().exists(), "no partial cache after a failed prepare");
}

#[test]
fn corrupt_clip_fails_prepare_without_partial_cache() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 6);
    fs::write(root.join("no").join("zzzz_nohash_0.wav"), b"RIFF....WAVEjunk").unwrap();
    let cfg = config(&root, &dir.path().join("run"));
    let err = harness::cmd_prepare(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    assert!(!cfg.cache_dir().exists());
}

#[test]
fn prepare_is_idempotent_and_train_detects_stale_cache() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 20);
    let cfg = config(&root, &dir.path().join("run"));
    let first = harness::cmd_prepare(&cfg).unwrap();
    assert!(!first.reused);
    let stamp = fs::metadata(first.cache_dir.join("meta.json"))
        .unwrap()
        .modified()
        .unwrap();
    let second = harness::cmd_prepare(&cfg).unwrap();
    assert!(second.reused);
    assert_eq!(first.meta, second.meta);
    assert_eq!(
        stamp,
        fs::metadata(second.cache_dir.join("meta.json"))
            .unwrap()
            .modified()
            .unwrap()
    );

    let mut changed = cfg.clone();
    changed.n_bins = 4;
    assert!(matches!(harness::cmd_train(&changed), Err(KwsError::StaleCache(_))));
}

#[test]
fn two_bins_give_one_bit_per_feature() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 12);
    let cfg = config(&root, &dir.path().join("run"));
    let meta = harness::cmd_prepare(&cfg).unwrap().meta;
    assert_eq!(meta.n_features, 33 * 13);
    assert_eq!(meta.total_booleans, meta.n_features);

    let mut four = cfg.clone();
    four.n_bins = 4;
    four.output_dir = dir.path().join("run4");
    let meta4 = harness::cmd_prepare(&four).unwrap().meta;
    assert_eq!(meta4.total_booleans, 2 * meta4.n_features);
}

#[test]
fn train_and_eval_outputs_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 30);
    let cfg = config(&root, &dir.path().join("run"));
    harness::cmd_prepare(&cfg).unwrap();
    let metrics = harness::cmd_train(&cfg).unwrap();
    assert_eq!(metrics.trace.len(), 2);
    assert_eq!(
        metrics.overfit_gap,
        Some(metrics.train_acc.unwrap() - metrics.test_acc.unwrap())
    );
    assert!(metrics.op_counters.clause_evaluations > 0);
    assert_eq!(
        metrics.op_counters.feedback_events,
        metrics.op_counters.type_i_feedbacks + metrics.op_counters.type_ii_feedbacks
    );
    let trace = fs::read_to_string(cfg.output_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);

    let meta = CacheMeta::load(&cfg.cache_dir()).unwrap();
    let report = harness::cmd_eval(&cfg, &harness::model_path(&cfg), Partition::Test).unwrap();
    for (label, row) in report.confusion.iter().enumerate() {
        let expected = harness::read_bool(&harness::bool_path(&cfg.cache_dir(), Partition::Test))
            .unwrap()
            .labels
            .iter()
            .filter(|&&l| l as usize == label)
            .count() as u64;
        assert_eq!(row.iter().sum::<u64>(), expected);
    }
    assert_eq!(
        report.confusion.iter().flatten().sum::<u64>() as usize,
        meta.counts.test
    );
    assert!((report.accuracy.unwrap() - metrics.test_acc.unwrap()).abs() < 1e-9);
    assert!(cfg.output_dir.join("confusion_test.csv").exists());
}

#[test]
fn eval_with_other_keywords_is_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 12);
    let cfg = config(&root, &dir.path().join("run"));
    harness::cmd_prepare(&cfg).unwrap();
    harness::cmd_train(&cfg).unwrap();

    let mut other = config(&root, &dir.path().join("other"));
    other.keywords = keywords("baseline3");
    harness::cmd_prepare(&other).unwrap();
    let err = harness::cmd_eval(&other, &harness::model_path(&cfg), Partition::Test).unwrap_err();
    assert!(matches!(err, KwsError::ModelDataMismatch(_)), "{err}");
}

#[test]
fn zero_epochs_still_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 10);
    let mut cfg = config(&root, &dir.path().join("run"));
    cfg.hyperparams.epochs = 0;
    harness::cmd_prepare(&cfg).unwrap();
    let m = harness::cmd_train(&cfg).unwrap();
    assert!(m.trace.is_empty());
    assert!(m.test_acc.is_some());
    assert_eq!(m.op_counters, OpCounters::default());
    let text = fs::read_to_string(cfg.output_dir.join("metrics.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["trace"].as_array().unwrap().is_empty());
}

#[test]
fn sweep_keeps_a_row_for_a_failing_point() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 10);
    let mut cfg = config(&root, &dir.path().join("run"));
    cfg.hyperparams.epochs = 1;
    cfg.sweep = Some(SweepSpec {
        parameter: SweepParam::ClausesPerClass,
        values: vec!["10".into(), "7".into(), "4".into()],
    });
    let rows = harness::cmd_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 3);
    let values: Vec<&str> = rows.iter().map(|r| r.value.as_str()).collect();
    assert_eq!(values, ["4", "7", "10"]);
    assert!(
        rows[1].status.starts_with("error"),
        "odd clause count must fail: {}",
        rows[1].status
    );
    assert_eq!(rows[0].status, "ok");
    assert!(rows[2].clause_evaluations > rows[0].clause_evaluations);
    let csv = fs::read_to_string(cfg.output_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn window_sweep_rebuilds_features() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 8);
    let mut cfg = config(&root, &dir.path().join("run"));
    cfg.hyperparams.epochs = 1;
    cfg.sweep = Some(SweepSpec {
        parameter: SweepParam::WindowLengthS,
        values: vec!["0.04".into(), "0.1".into()],
    });
    cfg.parallel = true;
    let rows = harness::cmd_sweep(&cfg).unwrap();
    assert!(rows.iter().all(|r| r.status == "ok"), "{rows:?}");
    // 1 + floor((16000 - L) / 480) frames of 13 coefficients
    assert_eq!(rows[0].feature_count, Some(33 * 13));
    assert_eq!(rows[1].feature_count, Some(31 * 13));
}

#[test]
fn feature_stats_match_two_pass_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus(dir.path(), 15);
    let cfg = config(&root, &dir.path().join("run"));
    harness::cmd_prepare(&cfg).unwrap();
    let stats = harness::cmd_feature_stats(&cfg).unwrap();
    let raw = harness::read_raw(&harness::raw_path(&cfg.cache_dir(), Partition::Train)).unwrap();
    assert_eq!(stats.len(), raw.cols);
    let n = raw.rows() as f64;
    for (f, s) in stats.iter().enumerate() {
        let mean = (0..raw.rows()).map(|i| raw.row(i)[f]).sum::<f64>() / n;
        let var = (0..raw.rows()).map(|i| (raw.row(i)[f] - mean).powi(2)).sum::<f64>() / n;
        assert!((s.mean - mean).abs() < 1e-9, "feature {f} mean");
        assert!((s.variance - var).abs() < 1e-9 * var.max(1.0), "feature {f} variance");
        assert_eq!((s.frame, s.coeff), (f / 13, f % 13));
    }
    assert!(cfg.output_dir.join("feature_stats.csv").exists());
}

#[test]
fn saved_model_predicts_like_the_original() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = 24;
    let hyper = TMHyperparams {
        clauses_per_class: 10,
        threshold: 5,
        epochs: 0,
        ..TMHyperparams::default()
    };
    let mut tm = TsetlinMachine::new(3, f, hyper).unwrap();
    let mut c = OpCounters::default();
    let random_input = |rng: &mut ChaCha8Rng| {
        let x: Vec<u8> = (0..f).map(|_| rng.random_range(0..=1)).collect();
        LiteralSet::from_features(&x.into())
    };
    for _ in 0..300 {
        let x = random_input(&mut rng);
        let y = rng.random_range(0..3);
        tm.update(&x, y, &mut rng, &mut c);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let model = KwsModel {
        keywords: keywords("baseline3"),
        machine: tm,
        encoder: None,
    };
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    for _ in 0..100 {
        let x = random_input(&mut rng);
        assert_eq!(model.machine.predict(&x), loaded.machine.predict(&x));
    }
    assert_eq!(loaded, model);
}

#[test]
fn selection_rate_at_zero_vote_is_one_half() {
    // T = 1, m = 2, fresh machine: every clause is empty and outputs 1 in training,
    // so the target vote is 0 and each clause is selected with probability 1/2
    let hyper = TMHyperparams {
        threshold: 1,
        clauses_per_class: 2,
        states_per_action: 100,
        ..TMHyperparams::default()
    };
    let fresh = TsetlinMachine::new(1, 2, hyper).unwrap();
    let x = LiteralSet::from_features(&vec![1, 0].into());
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 20_000;
    let mut selected = 0u64;
    for _ in 0..trials {
        let mut tm = fresh.clone();
        let mut c = OpCounters::default();
        tm.update(&x, 0, &mut rng, &mut c);
        selected += c.feedback_events;
    }
    let rate = selected as f64 / (2 * trials) as f64;
    assert!((rate - 0.5).abs() <= 0.02, "selection rate {rate}");
}

#[test]
fn ragged_length_wavs_load() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    for kw in ["yes", "no"] {
        fs::create_dir_all(root.join(kw)).unwrap();
        for i in 0..12 {
            let len = 9000 + 1000 * i;
            let samples: Vec<f64> = (0..len).map(|n| ((n * (i + 1)) as f64 * 0.01).sin() * 0.3).collect();
            write_wav(root.join(kw).join(format!("s{i}_nohash_0.wav")), &samples, 16000).unwrap();
        }
    }
    let mut cfg = config(&root, &dir.path().join("run"));
    cfg.keywords = vec!["yes".into(), "no".into()];
    let meta = harness::cmd_prepare(&cfg).unwrap().meta;
    assert_eq!(meta.counts.train + meta.counts.test + meta.counts.validation, 24);
}
