use thickening_lab::experiments::REGISTRY;
use thickening_lab::record::{read_jsonl, to_jsonl};
use thickening_lab::replay::replay;
use thickening_lab::{run_experiment, ExperimentConfig};

fn tiny(name: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "experiment = {name}\nfamily = gaussian, shifted_exp\nn = 4\np_list = 2, 4\n\
         trials = 3000\ndirections = 10\nrestarts = 1\nsteps = 3\npolygons = 20\nroot_seed = 11\n"
    ))
    .unwrap()
}

#[test]
fn every_experiment_runs_small_and_replays() {
    for entry in &REGISTRY {
        let cfg = tiny(entry.name);
        let records = run_experiment(&cfg).unwrap_or_else(|e| panic!("{}: {e}", entry.name));
        assert!(!records.is_empty(), "{}", entry.name);
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.index, i);
            assert_eq!(r.experiment, entry.name);
            assert!(r.estimate.is_finite());
            if let (Some(lo), Some(hi)) = (r.ci_low, r.ci_high) {
                assert!(lo <= hi, "{} {}", entry.name, r.metric);
            }
        }
        let text = to_jsonl(&records);
        assert_eq!(read_jsonl(text.as_bytes()).unwrap(), records);
        let report = replay(&records, None).unwrap();
        assert!(report.all_ok(), "{}", entry.name);
    }
}

#[test]
fn registry_statements_are_filled_in() {
    assert_eq!(REGISTRY.len(), 18);
    for e in &REGISTRY {
        assert!(!e.statement.is_empty());
        assert!(!e.name.contains(' '));
    }
}
