use std::fs;
use std::process::Command;

fn sbheom() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbheom"))
}

fn preset_toml(name: &str) -> String {
    let out = sbheom().args(["preset", name]).output().unwrap();
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn unknown_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = preset_toml("unbiased-nonadiabatic").replace("[bath]\n", "[bath]\nalpah = 0.3\n");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let out = sbheom().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));
}

#[test]
fn out_of_range_alpha_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = preset_toml("unbiased-nonadiabatic").replace("alpha = 0.3", "alpha = 3.0");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let out = sbheom().arg("scan").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_then_plots() {
    let dir = tempfile::tempdir().unwrap();
    let text = preset_toml("biased-nonadiabatic")
        .replace("l_max = 6", "l_max = 2")
        .replace("n_pade = 10", "n_pade = 3")
        .replace("t_final_omega_c = 50.0", "t_final_omega_c = 5.0");
    let path = dir.path().join("small.toml");
    fs::write(&path, text).unwrap();
    let out_dir = dir.path().join("out");
    let status = sbheom()
        .args(["run", "--no-scan", "--output"])
        .arg(&out_dir)
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let out = sbheom().arg("plots").arg(&out_dir).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}

#[test]
fn plots_on_empty_directory_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = sbheom().arg("plots").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("thermo.tsv"));
}

#[test]
fn quick_validation_passes() {
    let out = sbheom().args(["validate", "--quick"]).env("SBHEOM_THREADS", "1").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = sbheom().args(["plots", "."]).env("SBHEOM_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
