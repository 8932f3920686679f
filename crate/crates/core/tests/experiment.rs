use microinsert::arm::ErrorModelConfig;
use microinsert::experiment::{needle, run_trial, run_with, ExperimentReport, Harness, ScenarioConfig, Strategy};
use microinsert::Error;

/// Needle scenario cut down to `n` initial conditions and one arm instance each.
fn small(n: usize) -> ScenarioConfig {
    let mut cfg = needle().unwrap();
    cfg.initial_configs.truncate(n);
    cfg.trials_per_condition = 1;
    cfg
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn perfect_arms_always_thread() {
    let mut cfg = needle().unwrap();
    cfg.trials_per_condition = 1;
    cfg.error_model = ErrorModelConfig::none();
    cfg.calibration.sensor_mount_offset = microinsert::Pose::identity();
    let report = run_with(&Harness::new(&cfg).unwrap()).unwrap();
    for s in &report.strategies {
        assert_eq!(s.trials, 10);
        assert_eq!(s.success_rate, 1.0, "{}", s.strategy);
        assert!(s.conditions.iter().all(|c| c.success_rate == 1.0));
    }
}

#[test]
fn report_counts_add_up() {
    let mut cfg = small(4);
    cfg.trials_per_condition = 2;
    cfg.strategies = vec![Strategy::ProprioIc1, Strategy::ProprioIc2];
    let report = run_with(&Harness::new(&cfg).unwrap()).unwrap();
    assert_eq!(report.records.len(), 2 * 4 * 2);
    for s in &report.strategies {
        let mine: Vec<_> = report.records.iter().filter(|r| r.strategy == s.strategy).collect();
        assert_eq!(s.trials, mine.len());
        assert_eq!(s.conditions.iter().map(|c| c.trials).sum::<usize>(), s.trials);
        assert_eq!(s.conditions.iter().map(|c| c.successes).sum::<usize>(), s.successes);
        let wins = mine.iter().filter(|r| r.success).count();
        assert_eq!(s.successes, wins);
        assert_eq!(s.success_rate, wins as f64 / mine.len() as f64);
    }
    // Aggregation only counts, so record order is irrelevant.
    let mut shuffled = report.records.clone();
    shuffled.reverse();
    assert_eq!(ExperimentReport::from_records(&cfg, shuffled).strategies, report.strategies);
}

#[test]
fn replay_is_bit_exact() {
    let cfg = small(3);
    let h = Harness::new(&cfg).unwrap();
    let report = run_with(&h).unwrap();
    let rec = report
        .records
        .iter()
        .find(|r| r.strategy == Strategy::LaserCorrected && r.scans > 0)
        .or_else(|| report.records.iter().find(|r| r.strategy == Strategy::LaserCorrected))
        .unwrap();
    let (again, trace) = h.run_trial_traced(rec.strategy, rec.initial_index, rec.seed).unwrap();
    assert_eq!(&again, rec);
    assert!(!trace.is_empty());
    // A fresh harness from the same config gives the same outcome.
    let fresh = run_trial(&cfg, rec.strategy, rec.initial_index, rec.seed).unwrap();
    assert_eq!(&fresh, rec);
    let bits = |r: &microinsert::experiment::TrialRecord| r.miss_margin.map(f64::to_bits);
    assert_eq!(bits(&fresh), bits(rec));
}

#[test]
fn thread_count_does_not_change_the_report() {
    let cfg = small(3);
    let h = Harness::new(&cfg).unwrap();
    let one = in_pool(1, || run_with(&h).unwrap());
    let three = in_pool(3, || run_with(&h).unwrap());
    assert_eq!(one, three);
    let json = |r: &ExperimentReport| {
        let mut v = Vec::new();
        r.write_json(&mut v).unwrap();
        v
    };
    assert_eq!(json(&one), json(&three));
}

#[test]
fn out_of_order_initial_conditions_are_rejected() {
    let mut cfg = small(10);
    cfg.initial_configs.swap(2, 5);
    match cfg.validate() {
        Err(Error::Config(m)) => assert!(m.contains("initial config"), "{m}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_round_trips_through_a_file() {
    let cfg = small(2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    let back = ScenarioConfig::load(&path).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn broken_configs_fail_to_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"name\": 3}").unwrap();
    assert!(matches!(ScenarioConfig::load(&path), Err(Error::Config(_))));
    assert!(matches!(ScenarioConfig::load(dir.path().join("missing.json")), Err(Error::Io(_))));

    let mut cfg = small(2);
    cfg.trials_per_condition = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = small(2);
    cfg.ic2 = cfg.ic2.rows(0, 6).into_owned();
    assert!(cfg.validate().is_err());
}

#[test]
fn reports_serialise_as_json_and_csv() {
    let mut cfg = small(2);
    cfg.strategies = vec![Strategy::ProprioIc1];
    let report = run_with(&Harness::new(&cfg).unwrap()).unwrap();
    let mut json = Vec::new();
    report.write_json(&mut json).unwrap();
    let back: ExperimentReport = serde_json::from_slice(&json).unwrap();
    assert_eq!(back, report);

    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("strategy,initial_index,seed,success"));
    assert_eq!(lines.count(), report.records.len());
}

#[test]
fn schema_lists_every_scenario_key() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/scenario.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let documented: std::collections::BTreeSet<_> = schema["properties"].as_object().unwrap().keys().cloned().collect();
    let dumped: serde_json::Value = serde_json::from_str(&needle().unwrap().to_json().unwrap()).unwrap();
    let actual: std::collections::BTreeSet<_> = dumped.as_object().unwrap().keys().cloned().collect();
    assert_eq!(documented, actual);
}
