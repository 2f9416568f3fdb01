use std::fs;
use std::process::Command;

fn cellfree() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellfree"))
}

#[test]
fn small_campaign_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = cellfree()
        .args(["--setups", "2", "--trials", "20", "--mode", "level2,level3-opt", "--power", "full,maxmin", "--R", "3", "--seed", "9"])
        .args(["--trace-convergence", "--export-positions", "--threads", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let per_ue = fs::read_to_string(out.join("per_ue.csv")).unwrap();
    assert_eq!(per_ue.lines().next(), Some("setup,ue,mode,power_mode,sinr,se_bits_per_hz"));
    // 2 setups x 10 UEs x 2 modes x 2 power rules
    assert_eq!(per_ue.lines().count(), 1 + 80);
    assert!(fs::read_to_string(out.join("cdf.csv")).unwrap().starts_with("mode,value,prob\n"));
    assert!(fs::read_to_string(out.join("accounting.csv")).unwrap().starts_with("mode,metric,per_ue,total\n"));
    assert!(fs::read_to_string(out.join("convergence.csv")).unwrap().lines().count() > 1);
    assert!(out.join("positions/setup_0001.csv").exists());

    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    for needle in ["\"seed\": 9", "\"R_design\": 3", "\"per_ue.csv\"", "\"version\""] {
        assert!(manifest.contains(needle), "{needle} missing from manifest");
    }
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.cfg");
    fs::write(&path, "# small\nL = 9\nK = 4\ntau_p = 2\ncombiner_kind = MR\n").unwrap();
    let out = cellfree().arg("--config").arg(&path).args(["--trials", "30", "--dry-run"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in ["L = 9", "K = 4", "tau_p = 2", "mc_trials = 30", "combiner_kind = MR"] {
        assert!(text.lines().any(|l| l == line), "{line} not in\n{text}");
    }
}

#[test]
fn invalid_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "L = 4\nbogus = 1\n").unwrap();
    let out = cellfree().arg("--config").arg(&path).arg("--dry-run").output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2") && err.contains("bogus"), "{err}");

    let out = cellfree().args(["--mode", "level4", "--dry-run"]).output().unwrap();
    assert!(!out.status.success());
}
