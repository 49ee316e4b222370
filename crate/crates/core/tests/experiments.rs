use mmdrl::experiments::{run, ExperimentConfig, ExperimentKind};

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::Contraction);
    cfg.contraction.instances = 5;
    cfg.out_dir = Some(dir.path().into());
    let report = run(&cfg).unwrap();
    assert!(report.passed());
    let csv = std::fs::read_to_string(&report.csv_path).unwrap();
    assert!(csv.starts_with("suite,instance,kernel,"));
    // 6 kernels x (5 random + 1 gamma-zero) rows plus the header.
    assert_eq!(csv.lines().count(), 1 + 6 * 6);
    let summary = std::fs::read_to_string(&report.summary_path).unwrap();
    assert!(summary.ends_with("overall: PASS\n"));
    assert_eq!(summary, report.summary);
}

#[test]
fn config_json_roundtrip_and_hash() {
    for kind in ExperimentKind::ALL {
        let cfg = ExperimentConfig::for_kind(kind);
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg.config_hash().unwrap(), back.config_hash().unwrap());
        let moved = ExperimentConfig {
            out_dir: Some("/elsewhere".into()),
            workers: Some(4),
            ..cfg.clone()
        };
        assert_eq!(cfg.config_hash().unwrap(), moved.config_hash().unwrap());
        let reseeded = ExperimentConfig {
            seed: cfg.seed + 1,
            ..cfg
        };
        assert_ne!(back.config_hash().unwrap(), reseeded.config_hash().unwrap());
    }
}

#[test]
fn bad_configs_are_rejected() {
    assert!(ExperimentConfig::from_json(r#"{"experiment": "chain-eval", "seed": 0, "bogus": 1}"#).is_err());
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::ChainEval);
    cfg.seeds.clear();
    assert!(cfg.validate().is_err());
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::Herding);
    cfg.herding.ns = vec![4, 8];
    assert!(cfg.validate().is_err());
    let no_dir = ExperimentConfig::for_kind(ExperimentKind::Counterexample);
    assert!(run(&no_dir).is_err());
}

#[test]
fn chain_rows_have_every_cell() {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::ChainEval);
    cfg.seeds = vec![3];
    cfg.chain_lengths = vec![1, 3];
    cfg.mc_rollouts = 200;
    let out = mmdrl::experiments::run_chain_experiment(&cfg).unwrap();
    assert_eq!(out.rows.len(), 2 * cfg.methods.len() * cfg.max_order as usize);
    assert!(out
        .rows
        .iter()
        .filter(|r| r.k == 1)
        .all(|r| r.status == "degenerate" && r.estimate == 0.0));
    assert!(out
        .rows
        .iter()
        .filter(|r| r.k == 3)
        .all(|r| r.status == "ok" && r.estimate.is_finite()));
}
