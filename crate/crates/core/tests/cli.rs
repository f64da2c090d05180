use std::process::Command;

fn irs_est() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irs-est"))
}

#[test]
fn min_duration_prints_table_values() {
    let out = irs_est().args(["min-duration", "--m", "32", "--n", "32", "--k", "8"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("tau1 = 32"));
    assert!(text.contains("tau2 = 7"));
    assert!(text.contains("tau_min = 39"));
    assert!(text.contains("benchmark_tau_min = 39"));
}

#[test]
fn verify_noiseless_passes() {
    for (m, n, k) in [("8", "4", "3"), ("2", "4", "2")] {
        let out = irs_est()
            .args(["verify-noiseless", "--m", m, "--n", n, "--k", k, "--seed", "5"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8(out.stdout).unwrap().contains("PASS"));
    }
}

#[test]
fn invalid_dimensions_are_reported() {
    let out = irs_est().args(["min-duration", "--m", "0", "--n", "4", "--k", "2"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("error"));
}

const CONFIG: &str = "m = 4\nn = 4\nk = 2\nirs_bs_gain = 1e-7\nuser_irs_gain = 1e-5\n\
                      pilot_lengths = [5, 7]\ntrials = 20\nmaster_seed = 42\n";

#[test]
fn sweep_output_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let csv = dir.path().join(format!("out{threads}.csv"));
        let status = irs_est()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&csv)
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("scheme,total_pilots,tau1,tau2,trials,nmse_mean,nmse_stderr,seed,wall_time_s\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn noiseless_debug_sweep_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = irs_est()
        .args(["sweep", "--noiseless-debug", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let nmse: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
        assert!(nmse < 1e-16, "{line}");
    }
}

#[test]
fn sweep_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, format!("{CONFIG}snr = 3\n")).unwrap();
    let out = irs_est().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
}
