//! Tab-separated output tables, provenance files and plot scripts.
//!
//! Every table starts with `#` provenance lines, followed by one header line
//! of `name[unit]` columns. Units: `wc` is `ω_c`, `1/wc` is `1/ω_c`, `1` is
//! dimensionless.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{config_hash, Artifacts, Provenance, RunConfig, RunFailure, StateSeries, SOFTWARE};
use crate::hierarchy::ScanReport;

pub const TRAJECTORY_COLUMNS: [&str; 10] = [
    "time[1/wc]",
    "rho_00[1]",
    "rho_11[1]",
    "re_rho_01[1]",
    "im_rho_01[1]",
    "sigma_z[1]",
    "drho_00[wc]",
    "drho_11[wc]",
    "re_drho_01[wc]",
    "im_drho_01[wc]",
];

pub const KS_COLUMNS: [&str; 17] = [
    "time[1/wc]",
    "re_k_00[wc]",
    "im_k_00[wc]",
    "re_k_01[wc]",
    "im_k_01[wc]",
    "re_k_10[wc]",
    "im_k_10[wc]",
    "re_k_11[wc]",
    "im_k_11[wc]",
    "theta_1[wc]",
    "theta_2[wc]",
    "theta_3[wc]",
    "theta_4[wc]",
    "split_residual[wc]",
    "kraus_constraint[wc]",
    "gibbs_residual[wc]",
    "condition[1]",
];

pub const THERMO_COLUMNS: [&str; 10] = [
    "time[1/wc]",
    "U_S[wc]",
    "W_S[wc]",
    "Q_S[wc]",
    "dS_S[1]",
    "Sigma_S[1]",
    "sigma_S[wc]",
    "W_w[wc]",
    "Q_w[wc]",
    "sigma_w[wc]",
];

pub const FAILURE_MARKER: &str = "FAILED";
pub const TRAJECTORY_FILE: &str = "trajectory.tsv";
pub const KS_FILE: &str = "effective_hamiltonian.tsv";
pub const THERMO_FILE: &str = "thermo.tsv";
pub const PLOT_FILES: [&str; 3] = [
    "plot_effective_hamiltonian.gp",
    "plot_work_heat.gp",
    "plot_entropy_production.gp",
];

fn provenance_lines(cfg: &RunConfig) -> String {
    format!(
        "# {SOFTWARE}\n# config_sha256 {}\n# name {} initial_state {}\n# units: time in 1/omega_c, energies in omega_c, entropies dimensionless, beta in 1/omega_c\n",
        config_hash(cfg),
        if cfg.name.is_empty() { "-" } else { &cfg.name },
        cfg.initial_state.label(),
    )
}

fn table(cfg: &RunConfig, columns: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = provenance_lines(cfg);
    s.push_str(&columns.join("\t"));
    s.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join("\t"));
        s.push('\n');
    }
    s
}

fn trajectory_table(cfg: &RunConfig, state: &StateSeries) -> String {
    let rows = (0..state.times.len()).map(|i| {
        let (r, d) = (&state.rho[i], &state.rho_dot[i]);
        vec![
            state.times[i],
            r[(0, 0)].re,
            r[(1, 1)].re,
            r[(0, 1)].re,
            r[(0, 1)].im,
            r[(0, 0)].re - r[(1, 1)].re,
            d[(0, 0)].re,
            d[(1, 1)].re,
            d[(0, 1)].re,
            d[(0, 1)].im,
        ]
    });
    table(cfg, &TRAJECTORY_COLUMNS, rows)
}

fn ks_table(a: &Artifacts) -> String {
    let rows = a.snapshots.iter().enumerate().map(|(i, s)| {
        let k = &s.k_s;
        let mut row = vec![s.time];
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            row.push(k[(r, c)].re);
            row.push(k[(r, c)].im);
        }
        for j in 0..4 {
            row.push(s.kraus.get(j).map_or(0.0, |t| t.theta));
        }
        row.extend([s.split_residual, s.kraus_constraint, a.gibbs_residual[i], a.condition[i]]);
        row
    });
    table(&a.provenance.config, &KS_COLUMNS, rows)
}

fn thermo_table(a: &Artifacts) -> String {
    let t = &a.thermo;
    let rows = (0..t.times.len()).map(|i| {
        vec![
            t.times[i],
            t.u[i],
            t.w[i],
            t.q[i],
            t.ds[i],
            t.sigma_total[i],
            t.sigma_rate[i],
            t.w_w[i],
            t.q_w[i],
            t.sigma_w[i],
        ]
    });
    table(&a.provenance.config, &THERMO_COLUMNS, rows)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Writes all tables plus `provenance.json` (and `scan.json` when a scan
/// ran) into `dir`. Returns the written paths.
pub fn write_artifacts(dir: &Path, a: &Artifacts) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let marker = dir.join(FAILURE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let cfg = &a.provenance.config;
    let mut written = Vec::new();
    for (name, text) in [
        (TRAJECTORY_FILE, trajectory_table(cfg, &a.state)),
        (KS_FILE, ks_table(a)),
        (THERMO_FILE, thermo_table(a)),
    ] {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
    }
    let path = dir.join("provenance.json");
    write_json::<Provenance>(&path, &a.provenance)?;
    written.push(path);
    if let Some(scan) = &a.provenance.scan {
        let path = dir.join("scan.json");
        write_json::<ScanReport>(&path, scan)?;
        written.push(path);
    }
    Ok(written)
}

/// Flushes what a failed run produced, plus a `FAILED` marker naming the
/// stage and error.
pub fn write_failure(dir: &Path, cfg: &RunConfig, failure: &RunFailure) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = provenance_lines(cfg);
    let _ = writeln!(text, "stage {:?}", failure.error.stage());
    let _ = writeln!(text, "error {}", failure.error);
    fs::write(dir.join(FAILURE_MARKER), text)?;
    if let Some(scan) = &failure.partial.scan {
        write_json(&dir.join("scan.json"), scan)?;
    }
    if let Some(state) = &failure.partial.state {
        fs::write(dir.join(TRAJECTORY_FILE), trajectory_table(cfg, state))?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("missing tables in {dir}: {missing:?}")]
    Missing { dir: PathBuf, missing: Vec<String> },
    #[error("{file}: header does not match the documented columns")]
    Schema { file: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parsed table: provenance lines, column names, rows.
pub type Table = (Vec<String>, Vec<String>, Vec<Vec<f64>>);

pub fn read_table(path: &Path) -> std::io::Result<Table> {
    let text = fs::read_to_string(path)?;
    let mut comments = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else if header.is_empty() {
            header = line.split('\t').map(str::to_string).collect();
        } else {
            let row = line
                .split('\t')
                .map(|v| v.parse::<f64>().map_err(std::io::Error::other))
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(row);
        }
    }
    Ok((comments, header, rows))
}

fn column(columns: &[&str], name: &str) -> usize {
    columns.iter().position(|c| *c == name).expect("documented column") + 1
}

fn gnuplot(
    provenance: &[String],
    output: &str,
    ylabel: &str,
    data: &str,
    columns: &[&str],
    series: &[(&str, &str)],
) -> String {
    let mut s = String::new();
    for p in provenance {
        let _ = writeln!(s, "# {p}");
    }
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{output}'");
    let _ = writeln!(s, "set datafile separator '\\t'");
    let _ = writeln!(s, "set key autotitle columnheader");
    let _ = writeln!(s, "set xlabel 't ω_c'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let plots: Vec<String> = series
        .iter()
        .map(|(col, title)| {
            format!(
                "'{data}' using {}:{} with lines title '{title}'",
                column(columns, "time[1/wc]"),
                column(columns, col)
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// Writes the three gnuplot scripts for a completed run directory:
/// `K_S` elements, work and heat against the weak-coupling heat, and the two
/// entropy production rates.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let missing: Vec<String> = [KS_FILE, THERMO_FILE]
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| f.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(PlotError::Missing {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    let (prov, ks_header, _) = read_table(&dir.join(KS_FILE))?;
    if ks_header != KS_COLUMNS {
        return Err(PlotError::Schema { file: KS_FILE.into() });
    }
    let (_, th_header, _) = read_table(&dir.join(THERMO_FILE))?;
    if th_header != THERMO_COLUMNS {
        return Err(PlotError::Schema { file: THERMO_FILE.into() });
    }
    let scripts = [
        gnuplot(
            &prov,
            "effective_hamiltonian.png",
            "K_S elements / ω_c",
            KS_FILE,
            &KS_COLUMNS,
            &[
                ("re_k_00[wc]", "Re K_00"),
                ("re_k_01[wc]", "Re K_01"),
                ("im_k_01[wc]", "Im K_01"),
                ("re_k_11[wc]", "Re K_11"),
            ],
        ),
        gnuplot(
            &prov,
            "work_heat.png",
            "energy / ω_c",
            THERMO_FILE,
            &THERMO_COLUMNS,
            &[("W_S[wc]", "W_S"), ("Q_S[wc]", "Q_S"), ("Q_w[wc]", "Q_w")],
        ),
        gnuplot(
            &prov,
            "entropy_production.png",
            "entropy production rate / ω_c",
            THERMO_FILE,
            &THERMO_COLUMNS,
            &[("sigma_S[wc]", "σ_S"), ("sigma_w[wc]", "σ_w")],
        ),
    ];
    let mut written = Vec::new();
    for (name, text) in PLOT_FILES.iter().zip(scripts) {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}
