use std::fs;
use std::path::Path;

use sbheom::runner::validate::config;
use sbheom::runner::{
    config_hash, emit_plots, read_table, run_scenario, write_artifacts, write_failure, RunConfig,
    Stage, FAILURE_MARKER, KS_COLUMNS, PLOT_FILES, THERMO_COLUMNS, TRAJECTORY_COLUMNS,
};

fn small() -> RunConfig {
    config("small", (0.5, 0.2), (0.3, 25.0), (2, 3), 0.1, 10.0)
}

const GOLDEN: [(&str, &str); 3] = [
    (
        "trajectory.tsv",
        "time[1/wc]\trho_00[1]\trho_11[1]\tre_rho_01[1]\tim_rho_01[1]\tsigma_z[1]\tdrho_00[wc]\tdrho_11[wc]\tre_drho_01[wc]\tim_drho_01[wc]",
    ),
    (
        "effective_hamiltonian.tsv",
        "time[1/wc]\tre_k_00[wc]\tim_k_00[wc]\tre_k_01[wc]\tim_k_01[wc]\tre_k_10[wc]\tim_k_10[wc]\tre_k_11[wc]\tim_k_11[wc]\ttheta_1[wc]\ttheta_2[wc]\ttheta_3[wc]\ttheta_4[wc]\tsplit_residual[wc]\tkraus_constraint[wc]\tgibbs_residual[wc]\tcondition[1]",
    ),
    (
        "thermo.tsv",
        "time[1/wc]\tU_S[wc]\tW_S[wc]\tQ_S[wc]\tdS_S[1]\tSigma_S[1]\tsigma_S[wc]\tW_w[wc]\tQ_w[wc]\tsigma_w[wc]",
    ),
];

fn header_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .to_string()
}

#[test]
fn tables_match_golden_headers_and_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let a = run_scenario(&cfg).unwrap();
    write_artifacts(dir.path(), &a).unwrap();
    let hash = config_hash(&cfg);
    for (file, golden) in GOLDEN {
        let path = dir.path().join(file);
        assert_eq!(header_line(&path), golden, "{file}");
        let (comments, header, rows) = read_table(&path).unwrap();
        assert!(comments.iter().any(|c| c == &format!("config_sha256 {hash}")), "{file}");
        assert!(rows.iter().all(|r| r.len() == header.len()));
        assert!(rows.len() > 50);
    }
    assert_eq!(TRAJECTORY_COLUMNS.join("\t"), GOLDEN[0].1);
    assert_eq!(KS_COLUMNS.join("\t"), GOLDEN[1].1);
    assert_eq!(THERMO_COLUMNS.join("\t"), GOLDEN[2].1);
    let prov: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["config_sha256"], hash);
    assert_eq!(prov["initial_state"], "ground");
    assert!(prov["decomposition"]["terms"].as_array().unwrap().len() == 4);

    let plots = emit_plots(dir.path()).unwrap();
    assert_eq!(plots.len(), 3);
    for (p, name) in plots.iter().zip(PLOT_FILES) {
        assert!(p.ends_with(name));
        assert!(fs::read_to_string(p).unwrap().contains(&hash));
    }
}

#[test]
fn plots_need_tables() {
    let dir = tempfile::tempdir().unwrap();
    let err = emit_plots(dir.path()).unwrap_err().to_string();
    assert!(err.contains("effective_hamiltonian.tsv") && err.contains("thermo.tsv"), "{err}");
}

#[test]
fn equal_configs_give_identical_tables() {
    let (d1, d2, d3) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small();
    let mut par = cfg.clone();
    par.heom.parallel = true;
    write_artifacts(d1.path(), &run_scenario(&cfg).unwrap()).unwrap();
    write_artifacts(d2.path(), &run_scenario(&cfg).unwrap()).unwrap();
    write_artifacts(d3.path(), &run_scenario(&par).unwrap()).unwrap();
    for (file, _) in GOLDEN {
        let a = fs::read(d1.path().join(file)).unwrap();
        assert_eq!(a, fs::read(d2.path().join(file)).unwrap(), "{file}");
        // The parallel flag is part of the configuration, so only the data
        // rows are compared.
        let rows = |p: &Path| read_table(p).unwrap().2;
        assert_eq!(rows(&d1.path().join(file)), rows(&d3.path().join(file)), "{file}");
    }
}

#[test]
fn failed_stage_leaves_marker_and_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    // Every map after t = 0 exceeds this bound, leaving too few generator
    // points for the thermodynamics.
    cfg.heom.condition_bound = 1.0 + 1e-9;
    let failure = run_scenario(&cfg).unwrap_err();
    assert_eq!(failure.error.stage(), Stage::Thermo);
    assert_eq!(failure.error.exit_code(), 1);
    write_failure(dir.path(), &cfg, &failure).unwrap();
    let marker = fs::read_to_string(dir.path().join(FAILURE_MARKER)).unwrap();
    assert!(marker.contains("stage Thermo"), "{marker}");
    assert!(marker.contains(&config_hash(&cfg)));
    assert!(dir.path().join("trajectory.tsv").is_file());
    assert!(!dir.path().join("thermo.tsv").exists());
}

#[test]
fn invalid_configuration_is_a_config_error() {
    let mut cfg = small();
    cfg.bath.alpha = 2.5;
    let failure = run_scenario(&cfg).unwrap_err();
    assert_eq!(failure.error.stage(), Stage::Config);
    assert_eq!(failure.error.exit_code(), 2);
}
