use std::process::Command;

use efpp_harness::{parse_cli, run_experiment, ExperimentSpec};

fn spec(args: &str) -> ExperimentSpec {
    parse_cli(std::iter::once("efpp").chain(args.split_whitespace())).unwrap()
}

fn lines(spec: &ExperimentSpec) -> Vec<String> {
    run_experiment(spec).unwrap().records.iter().map(|r| r.to_line()).collect()
}

#[test]
fn records_do_not_depend_on_worker_count() {
    for args in ["estimate-chi --seed 3 --replicates 4 --lengths 10,20", "oracle-suite --seed 3 --instances 12 --triples 20 --pairs 20", "msf --seed 3 --replicates 6"] {
        let mut a = spec(args);
        a.workers = Some(1);
        let mut b = a.clone();
        b.workers = Some(2);
        let (ra, rb) = (run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
        let la: Vec<String> = ra.records.iter().map(|r| r.to_line()).collect();
        let lb: Vec<String> = rb.records.iter().map(|r| r.to_line()).collect();
        assert_eq!(la, lb, "{args}");
        assert_eq!(ra.summary, rb.summary, "{args}");
    }
}

#[test]
fn every_record_carries_the_seed() {
    let s = spec("estimate-mu --seed 77 --replicates 3 --lengths 10,20");
    let out = run_experiment(&s).unwrap();
    assert_eq!(out.records.len(), 6);
    for r in &out.records {
        assert_eq!(r.seed, 77);
        assert_eq!(r.experiment, "estimate-mu/77");
        // no wall-clock fields
        assert!(!r.to_line().contains("elapsed"));
    }
}

#[test]
fn rerun_is_byte_identical() {
    let s = spec("geodesic --seed 5");
    assert_eq!(lines(&s), lines(&s));
}

#[test]
fn failures_are_recorded_and_abort_past_a_tenth() {
    // a time constant far too large makes every ball leave its core
    let s = spec("shape --seed 2 --replicates 3 --mu 50 --radii 2,4 --isotropy-replicates 2 --isotropy-length 10");
    let out = run_experiment(&s).unwrap();
    let failed: Vec<_> = out.records.iter().filter(|r| !r.ok()).collect();
    assert_eq!(failed.len(), 3);
    assert!(failed.iter().all(|r| r.error.as_deref().unwrap().contains("window policy")));
    assert!(out.summary.aborted);
    assert_eq!(out.summary.failures, 3);
}

fn efpp(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_efpp")).args(args).env_remove("EFPP_WORKERS").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn exit_codes() {
    let (code, stdout, stderr) = efpp(&["msf", "--replicates", "3"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout.lines().count(), 3);
    assert!(stderr.contains("warning: no --seed given"));
    assert_eq!(efpp(&["estimate-xi", "--lengths", "50,abc"]).0, 2);
    assert_eq!(efpp(&["estimate-xi", "--lengths", "100,50"]).0, 2);
    assert_eq!(efpp(&["unknown-kind"]).0, 2);
    // thirty replicates on the line cannot reach a 2% standard error
    assert_eq!(efpp(&["estimate-mu", "--d", "1", "--seed", "1", "--replicates", "30", "--lengths", "10,20"]).0, 1);
    let (code, _, stderr) = efpp(&["shape", "--seed", "2", "--replicates", "2", "--mu", "50", "--radii", "2,4", "--isotropy-replicates", "2", "--isotropy-length", "10"]);
    assert_eq!(code, 3, "{stderr}");
}

#[test]
fn outputs_land_next_to_the_records() {
    let dir = std::env::temp_dir().join(format!("efpp-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let rec = dir.join("runs.jsonl");
    let (code, stdout, _) = efpp(&["sample", "--seed", "4", "--replicates", "2", "--side", "5", "--out", rec.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&rec).unwrap().lines().count(), 2);
    let csv = std::fs::read_to_string(dir.join("runs.summary.csv")).unwrap();
    assert!(csv.starts_with("replicates,mean_particles,expected,variance\n"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("runs.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["spec"]["seed"], 4);
    let ps = efpp::PointSet::read_text(std::io::BufReader::new(std::fs::File::open(dir.join("runs.1.pointset")).unwrap())).unwrap();
    assert_eq!(ps.seed(), 4);
    assert!(std::fs::read_to_string(dir.join("runs.metrics.csv")).unwrap().contains("mean_particles,"));
    std::fs::remove_dir_all(&dir).unwrap();
}
