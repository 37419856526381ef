use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binaural-ssl")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn check_passes() {
    let o = run(&["check"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().count(), 11);
    assert!(out.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let from_cfg = dir.path().join("cfg-out");
    fs::write(&cfg, format!(r#"{{"out": {:?}, "render": {{"azimuth": 30.0, "ego_noise": false}}}}"#, from_cfg)).unwrap();

    let o = run(&["render", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(from_cfg.join("spk00_az030_noisy.wav").exists());

    let flagged = dir.path().join("flag-out");
    let o = run(&["render", "--config", cfg.to_str().unwrap(), "--azimuth", "60", "--out", flagged.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names: Vec<String> = String::from_utf8(o.stdout).unwrap().lines().map(str::to_owned).collect();
    assert_eq!(names.len(), 3);
    for suffix in ["dry", "clean", "noisy"] {
        assert!(flagged.join(format!("spk00_az060_{suffix}.wav")).exists());
    }
    // ego noise off in the config: the noisy rendering is the clean one
    assert_eq!(fs::read(flagged.join("spk00_az060_clean.wav")).unwrap(), fs::read(flagged.join("spk00_az060_noisy.wav")).unwrap());
    let noisy = dir.path().join("noisy-out");
    let o = run(&["render", "--config", cfg.to_str().unwrap(), "--ego-noise", "on", "--out", noisy.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_ne!(fs::read(noisy.join("spk00_az030_clean.wav")).unwrap(), fs::read(noisy.join("spk00_az030_noisy.wav")).unwrap());
}

#[test]
fn static_asr_rows_follow_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["static-asr", "--out", out.to_str().unwrap(), "--trials", "1", "--downmix", "LCh,LRCh", "--snr", "30"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // header + 13 angles x 2 modes x 1 trial x 24 utterances
    assert_eq!(csv_rows(&out.join("static_asr_detail.csv")).len(), 1 + 13 * 2 * 24);
    assert_eq!(csv_rows(&out.join("static_asr_trials.csv")).len(), 1 + 13 * 2);
    let summary = csv_rows(&out.join("static_asr_summary.csv"));
    assert_eq!(summary.len(), 1 + 13 * 2);
    assert!(summary[1..].iter().all(|r| r.contains(",LCh,") || r.contains(",LRCh,")));
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["dynamic-ssl", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("model.json"), "{}", stderr(&o));

    let o = run(&["train", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("absent.json"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"sed": 3}"#).unwrap();
    let o = run(&["check", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("sed"), "{}", stderr(&o));

    let o = run(&["check", "--omega-e-mso", "1.5"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("omega"));

    let o = run(&["static-asr", "--downmix", "mono"]);
    assert!(!o.status.success());
}
