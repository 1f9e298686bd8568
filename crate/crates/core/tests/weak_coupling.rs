use sbheom::runner::run_scenario;
use sbheom::runner::validate::config;

fn sup_shift(alpha: f64) -> f64 {
    let cfg = config("weak", (0.0, 0.2), (alpha, 25.0), (2, 10), 0.05, 50.0);
    let a = run_scenario(&cfg).map_err(|f| f.error).unwrap();
    let h = cfg.system().hamiltonian();
    a.snapshots.iter().fold(0.0f64, |m, s| m.max((s.k_s - h).norm()))
}

#[test]
fn effective_hamiltonian_approaches_bare_one() {
    let (strong, weak) = (sup_shift(1e-2), sup_shift(1e-3));
    assert!(weak < strong, "{weak} vs {strong}");
    // First order in α.
    assert!((strong / weak - 10.0).abs() < 2.0, "{}", strong / weak);
}
