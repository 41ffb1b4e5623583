use std::path::Path;
use std::process::{Command, Output};

use corpusclean::synth;

const BIN: &str = env!("CARGO_BIN_EXE_corpusclean");

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("DCAD_CONFIG");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn corpus(dir: &Path) -> String {
    let p = dir.join("in.jsonl");
    synth::write_jsonl(&synth::mixed_corpus(120, 12, 3), &p).unwrap();
    p.display().to_string()
}

fn outputs(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v = Vec::new();
    for sub in ["keep", "remove"] {
        for e in std::fs::read_dir(out.join(sub)).unwrap() {
            let p = e.unwrap().path();
            v.push((format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap()));
        }
    }
    v.sort();
    v.push(("report.tsv".into(), std::fs::read(out.join("report.tsv")).unwrap()));
    v
}

fn report_hash(out: &Path) -> String {
    let text = std::fs::read_to_string(out.join("report.tsv")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix("# config_hash="))
        .unwrap()
        .to_string()
}

#[test]
fn flags_config_file_and_environment_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[detector]\ncontamination = 0.1\nseed = 7\nalgorithm = \"lof\"\n").unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let (a_s, b_s, c_s) = (a.display().to_string(), b.display().to_string(), c.display().to_string());
    let flags = ["clean", "-i", &input, "-o", &a_s, "--contamination", "0.1", "--seed", "7", "--algorithm", "lof"];
    assert!(run(&flags, &[]).status.success());
    let file = ["clean", "-i", &input, "-o", &b_s, "--config", cfg.to_str().unwrap()];
    assert!(run(&file, &[]).status.success());
    let env = [("DCAD_DETECTOR_CONTAMINATION", "0.1"), ("DCAD_DETECTOR_SEED", "7"), ("DCAD_DETECTOR_ALGORITHM", "lof")];
    assert!(run(&["clean", "-i", &input, "-o", &c_s], &env).status.success());
    assert_eq!(outputs(&a), outputs(&b));
    assert_eq!(outputs(&a), outputs(&c));

    let version = run(&["clean", "-i", &input, "-o", &a_s, "--config", cfg.to_str().unwrap(), "--version"], &[]);
    let line = String::from_utf8(version.stdout).unwrap();
    assert_eq!(line.trim().rsplit(' ').next().unwrap(), report_hash(&a));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[detector]\ncontamination = 0.3\n").unwrap();
    let out = dir.path().join("o");
    let out_s = out.display().to_string();
    let args = ["clean", "-i", &input, "-o", &out_s, "--config", cfg.to_str().unwrap(), "--contamination", "0.1"];
    assert!(run(&args, &[("DCAD_DETECTOR_CONTAMINATION", "0.2")]).status.success());
    let text = std::fs::read_to_string(out.join("report.tsv")).unwrap();
    let total = text.lines().find(|l| l.starts_with("TOTAL")).unwrap();
    let cols: Vec<&str> = total.split('\t').collect();
    let (keep, remove): (u64, u64) = (cols[1].parse().unwrap(), cols[2].parse().unwrap());
    assert_eq!(keep + remove, 132);
    assert!((remove as f64 / 132.0 - 0.1).abs() < 0.02, "{remove}");
}

#[test]
fn usage_and_validation_exit_codes() {
    assert_eq!(run(&[], &[]).status.code(), Some(64));
    assert_eq!(run(&["clean", "--no-such-flag"], &[]).status.code(), Some(64));
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path());
    let out = dir.path().join("o").display().to_string();
    assert_eq!(run(&["clean", "-i", &input, "-o", &out, "--contamination", "1.5"], &[]).status.code(), Some(1));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[detector]\nno_such_key = 1\n").unwrap();
    assert_eq!(run(&["clean", "-i", &input, "-o", &out, "--config", cfg.to_str().unwrap()], &[]).status.code(), Some(1));
}

#[test]
fn version_hash_ignores_output_location() {
    let a = run(&["clean", "-o", "/tmp/x", "--version"], &[]);
    let b = run(&["clean", "-o", "/tmp/y", "--version"], &[]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["clean", "--seed", "1", "--version"], &[]);
    assert_ne!(a.stdout, c.stdout);
}
