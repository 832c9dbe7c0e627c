use std::path::PathBuf;

use memc::bench::{run_suite, summarize, BenchmarkConfig};

fn config(name: &str) -> BenchmarkConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    BenchmarkConfig::load(path).unwrap()
}

#[test]
fn small_suite_annealing_hits_every_optimum() {
    let out = run_suite(&config("small-suite.toml")).unwrap();
    assert_eq!(out.records.len(), 20);
    for r in &out.records {
        assert_eq!(r.hit, Some(true), "{} gap {:?}", r.instance, r.gap);
        assert!(r.best_energy.unwrap() >= r.opt_energy.unwrap() - 1e-9);
    }
    let summary = summarize(&out.records).unwrap();
    assert_eq!(summary.len(), 7);
    assert!(summary.iter().all(|s| s.hit_rate == Some(1.0)));
}

#[test]
fn fixtures_through_every_backend() {
    let out = run_suite(&config("toy-all-backends.toml")).unwrap();
    assert_eq!(out.records.len(), 12);
    for r in &out.records {
        assert!(!r.is_skipped(), "{} {}", r.instance, r.backend);
        assert!(r.best_energy.unwrap() >= r.opt_energy.unwrap() - 1e-9);
        assert_eq!(r.gap, Some(0.0), "{} {}", r.instance, r.backend);
    }
}
