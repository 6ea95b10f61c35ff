use std::path::{Path, PathBuf};

use deepwell::config::RunConfig;
use deepwell::pipeline::{exit_code, run_command, Command, RunOptions};

fn small_config() -> String {
    let mut cfg = RunConfig::reference();
    cfg.grid.n = 651;
    cfg.ladder.lambda_min = 1e3;
    cfg.verify.samples = 3;
    cfg.verify.fields = 5;
    serde_json::to_string_pretty(&cfg).unwrap()
}

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn run_all(threads: usize) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, small_config()).unwrap();
    let out = dir.path().join("out");
    let opts = RunOptions { config, out: out.clone(), plots: true, threads, seed: None };
    run_command(Command::All, &opts).unwrap();
    assert!(out.join("plots/checks.svg").exists());
    csv_files(&out)
}

#[test]
fn thread_count_does_not_change_outputs() {
    let one = run_all(1);
    let four = run_all(4);
    assert!(one.len() > 10);
    assert_eq!(one, four);
}

#[test]
fn every_row_carries_the_config_hash() {
    let files = run_all(2);
    let text = small_config();
    let hash = deepwell::verify::hex_digest(text.as_bytes());
    for (name, bytes) in files {
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        assert_eq!(&r.headers().unwrap()[0], "config_hash", "{name:?}");
        for rec in r.records() {
            assert_eq!(&rec.unwrap()[0], hash, "{name:?}");
        }
    }
}

#[test]
fn unreadable_config_maps_to_exit_2() {
    let opts =
        RunOptions { config: "/nonexistent/c.json".into(), out: std::env::temp_dir(), plots: false, threads: 1, seed: None };
    assert_eq!(exit_code(&run_command(Command::SolveLimit, &opts)), 2);
}
