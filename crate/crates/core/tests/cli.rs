use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use polylat::harness::{read_records, write_records, ConvergenceRecord, Regime};

fn polylat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polylat")).current_dir(dir).args(args).output().expect("binary runs")
}

fn data_lines(text: &str) -> usize {
    text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count()
}

#[test]
fn fixed_sweep_writes_one_row_per_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylat(
        dir.path(),
        &[
            "sweep", "--regime", "fixed", "--alpha", "3", "--eps", "0.1", "--budget-list", "1024,4096,16384",
            "--reps", "32", "--seed", "7", "--out", "fix.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("fix.csv")).unwrap();
    assert_eq!(data_lines(&text), 4);
    let recs = read_records(text.as_bytes()).unwrap();
    assert_eq!(recs.iter().map(|r| r.budget).collect::<Vec<_>>(), vec![1024, 4096, 16384]);
    assert!(recs.iter().all(|r| r.cost <= r.budget && r.reps == 32 && r.seed == 7));
}

#[test]
fn construct_then_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = polylat(dir.path(), &["construct", "--m", "6", "--s", "16", "--alpha", "3", "--out", "g.txt"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let vector = fs::read_to_string(dir.path().join("g.txt")).unwrap();
    assert!(vector.starts_with("b=2\nm=6\np=0x"));
    assert_eq!(vector.lines().filter(|l| l.starts_with("q=")).count(), 16);
    let merit = fs::read_to_string(dir.path().join("g.txt.merit.csv")).unwrap();
    assert_eq!(merit.lines().count(), 17);

    let out = polylat(dir.path(), &["points", "--vector", "g.txt", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let pts = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(data_lines(&pts), 64);
    assert!(pts.lines().all(|l| l.split(',').count() == 16));

    let out = polylat(dir.path(), &["points", "--vector", "g.txt", "--scramble", "owen", "--seed", "3", "--replicate", "4"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# kind=owen\n# depth=31\n# seed=3\n# replicate_id=4\n"));
    assert_eq!(data_lines(&text), 64);
}

#[test]
fn slope_of_exact_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<ConvergenceRecord> = (10..=16)
        .map(|k| {
            let n = 1u64 << k;
            ConvergenceRecord {
                regime: Regime::Fixed,
                budget: n,
                cost: n,
                n_or_levels: n.to_string(),
                s_or_dims: "1".into(),
                rmse: (n as f64).powf(-1.5),
                stderr: 0.0,
                reps: 32,
                seed: 0,
                alpha: 3.0,
                eps: 0.1,
                anchor: 0.5,
                shape: "linear".into(),
            }
        })
        .collect();
    write_records(fs::File::create(dir.path().join("syn.csv")).unwrap(), &recs).unwrap();
    let out = polylat(dir.path(), &["slope", "--in", "syn.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("slope=-1.5000\n"), "{text}");
    assert!(text.contains("r2=1.000000"));
}

#[test]
fn plan_then_integrate() {
    let dir = tempfile::tempdir().unwrap();
    for (regime, budget) in [("fixed", "4096"), ("ml", "4096")] {
        let out = polylat(
            dir.path(),
            &["plan", "--regime", regime, "--budget", budget, "--alpha", "6", "--eps", "0.1", "--anchor", "0", "--out", "plan.txt"],
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let plan = fs::read_to_string(dir.path().join("plan.txt")).unwrap();
        assert!(plan.starts_with(&format!("type={regime}\nN={budget}\n")));
        let out = polylat(dir.path(), &["integrate", "--plan", "plan.txt", "--seed", "2"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        let value = |key: &str| -> f64 {
            text.lines().find_map(|l| l.strip_prefix(key)).unwrap().parse().unwrap()
        };
        let (est, trunc) = (value("estimate="), value("truncated_integral="));
        assert!((est - trunc).abs() < 1e-3, "{est} vs {trunc}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(polylat(dir.path(), &["sweep", "--frobnicate"]).status.code(), Some(2));
    let out = polylat(dir.path(), &["sweep", "--regime", "fixed", "--alpha", "2", "--budget-list", "1024,4096,16384"]);
    assert_eq!(out.status.code(), Some(3));
    let out = polylat(dir.path(), &["sweep", "--regime", "fixed", "--alpha", "3", "--budget-list", "1024,4096"]);
    assert_eq!(out.status.code(), Some(2));
    let out = polylat(dir.path(), &["points", "--vector", "missing.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(polylat(dir.path(), &["--help"]).status.code(), Some(0));
}
