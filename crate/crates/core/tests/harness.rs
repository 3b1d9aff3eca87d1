use perclab::harness::*;
use perclab::pmf::DistributionSpec;
use perclab::rng::derive_stream;

fn cfg(exp: Experiment, dir: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::with_experiment(exp);
    c.output_dir = dir.to_path_buf();
    c
}

fn with_workers<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}

#[test]
fn theta_at_zero() {
    let d = tempfile::tempdir().unwrap();
    let mut c = cfg(Experiment::Theta { p: 0.0, n: 16 }, d.path());
    c.trials = 100;
    let r = run(&c).unwrap();
    assert_eq!(r.metrics["theta_hat"].value, 0.0);
    assert!(d.path().join("theta.record.json").exists());
}

#[test]
fn sweep_reproducible_across_workers() {
    let exp = Experiment::Sweep { p_grid: vec![0.4, 0.5, 0.6], sizes: vec![12, 20] };
    let mut outs = Vec::new();
    for w in [1, 16, 1] {
        let d = tempfile::tempdir().unwrap();
        let mut c = cfg(exp.clone(), d.path());
        c.distribution = DistributionSpec::UniformRange { a: 1, b: 2 };
        c.trials = 300;
        let rec = with_workers(w, || run(&c)).unwrap();
        let csv = std::fs::read(d.path().join("sweep.csv")).unwrap();
        let svg = std::fs::read_to_string(d.path().join("sweep.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
        outs.push((csv, rec.metrics, rec.config_hash));
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn every_experiment_runs() {
    let d = tempfile::tempdir().unwrap();
    for tag in ["stationarity", "coupling", "c1", "scales", "labels", "pk", "decouple", "qk", "theta", "audits"] {
        let mut c = cfg(Experiment::default_for(tag).unwrap(), d.path());
        c.trials = 60;
        if tag == "qk" {
            c.experiment = Experiment::Qk { p: 0.9, k: 0, h0: 6 };
        }
        let r = run(&c).unwrap_or_else(|e| panic!("{tag}: {e}"));
        assert_eq!(r.experiment, tag);
        assert!(!r.metrics.is_empty(), "{tag}");
        for a in &r.artifacts {
            assert!(d.path().join(a).exists(), "{tag}: {a}");
        }
    }
    let (text, bad) = report(d.path()).unwrap();
    assert!(!bad);
    assert!(text.contains("0 violations"));
}

#[test]
fn proof_constants_record() {
    let d = tempfile::tempdir().unwrap();
    let mut c = cfg(Experiment::ProofConstants { k0_kmax: 12_000, horizon: 16, c1: Some(10.0), cap: 1 << 16 }, d.path());
    c.trials = 100;
    let r = run(&c).unwrap();
    for k in ["A", "alpha", "mu", "k0", "k4", "ln_tail_sum", "ladder_lower_bound", "c1_used"] {
        assert!(r.metrics.contains_key(k), "{k}");
    }
    assert_eq!(r.metrics["c1_used"].value, 10.0);
    assert!(r.metrics["ln_tail_sum"].value < -(2f64.ln()));
    assert!(r.metrics["ladder_lower_bound"].value > 0.5);
}

#[test]
fn report_contract() {
    let d = tempfile::tempdir().unwrap();
    assert!(matches!(report(d.path()), Err(perclab::Error::NoResults(_))));
    let mut c = cfg(Experiment::Audits { p_values: vec![0.9], level: 0, h0: 6 }, d.path());
    c.trials = 30;
    run(&c).unwrap();
    let (text, bad) = report(d.path()).unwrap();
    assert!(!bad && text.contains("0 violations"));
    let fake = ResultRecord {
        experiment: "audits".into(),
        config_hash: "f".repeat(64),
        timestamp: 0,
        metrics: Default::default(),
        artifacts: vec![],
        violations: Some(2),
    };
    std::fs::write(d.path().join("zz.record.json"), serde_json::to_string(&fake).unwrap()).unwrap();
    let (text, bad) = report(d.path()).unwrap();
    assert!(bad && text.contains("2 violations"));
}

#[test]
fn config_hash_and_roundtrip() {
    let d = tempfile::tempdir().unwrap();
    let c = cfg(Experiment::default_for("sweep").unwrap(), d.path());
    let text = serde_json::to_string_pretty(&c).unwrap();
    let back = ExperimentConfig::from_json(&text).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    let mut other = c.clone();
    other.master_seed += 1;
    assert_ne!(other.hash().unwrap(), c.hash().unwrap());
    let mut bad = c.clone();
    bad.experiment = Experiment::Sweep { p_grid: vec![0.5, 1.5], sizes: vec![8] };
    assert!(run(&bad).is_err());
    bad.experiment = Experiment::default_for("theta").unwrap();
    bad.distribution = DistributionSpec::Zeta { s: 1.5, cutoff: 2 };
    assert!(run(&bad).is_err());
    assert!(std::fs::read_dir(d.path()).map_or(true, |mut it| it.next().is_none()));
}

#[test]
fn record_roundtrip() {
    let d = tempfile::tempdir().unwrap();
    let mut c = cfg(Experiment::default_for("scales").unwrap(), d.path());
    c.trials = 1;
    let r = run(&c).unwrap();
    let text = std::fs::read_to_string(d.path().join("scales.record.json")).unwrap();
    let back: ResultRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
    let table: perclab::scales::ScaleTable = serde_json::from_str(&std::fs::read_to_string(d.path().join("scales.json")).unwrap()).unwrap();
    assert_eq!(table, perclab::scales::ScaleTable::new(3.0, 6).unwrap());
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn streams_uncorrelated() {
    let n = 10_000;
    let draw = |i| {
        let mut s = derive_stream(42, "serial", i);
        (0..n).map(|_| s.uniform()).collect::<Vec<f64>>()
    };
    let (a, b) = (draw(0), draw(1));
    let band = 4.0 / (n as f64).sqrt();
    assert!(corr(&a, &b).abs() < band);
    assert!(corr(&a[..n - 1], &a[1..]).abs() < band);
    assert!(corr(&b[..n - 1], &b[1..]).abs() < band);
    assert_eq!(draw(0), a);
}
