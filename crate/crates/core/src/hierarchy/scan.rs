//! Successive-refinement convergence scan over (depth, Padé count, step).

use serde::{Deserialize, Serialize};

use super::{run_hierarchy, HeomSettings, HierarchyError, SystemSpec};
use crate::bath::BathSpec;
use crate::linalg::Op;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSetting {
    pub l_max: usize,
    pub n_pade: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub setting: ScanSetting,
    pub n_ados: usize,
    /// Wall-clock cost; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
    /// Sup-norm difference of `⟨σ_z⟩` to the next entry; `None` for the last.
    pub diff_to_next: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub tolerance: f64,
    pub t_final: f64,
    pub entries: Vec<ScanEntry>,
    /// First setting whose trajectory agrees with its successor.
    pub selected: ScanSetting,
}

impl ScanReport {
    pub fn apply(&self, base: &HeomSettings) -> HeomSettings {
        HeomSettings {
            l_max: self.selected.l_max,
            n_pade: self.selected.n_pade,
            ..*base
        }
    }
}

/// Runs every setting of `grid` (ordered coarse to fine) up to
/// `base.t_final`, compares `⟨σ_z⟩` on the grid of spacing
/// `output_interval`, and selects the first setting that differs from its
/// successor by less than `tolerance`. The step size of `base` is kept for
/// production runs; scan entries use their own `dt`.
pub fn convergence_scan(
    sys: &SystemSpec,
    spec: &BathSpec,
    base: &HeomSettings,
    grid: &[ScanSetting],
    rho0: Op,
    output_interval: f64,
    tolerance: f64,
) -> Result<ScanReport, HierarchyError> {
    if grid.is_empty() {
        return Err(HierarchyError::Invalid("empty scan grid".into()));
    }
    let mut runs = Vec::with_capacity(grid.len());
    for s in grid {
        let stride = (output_interval / s.dt).round() as usize;
        if stride == 0 || ((stride as f64) * s.dt - output_interval).abs() > 1e-9 * output_interval {
            return Err(HierarchyError::Invalid(format!(
                "dt = {} does not divide the output interval {output_interval}",
                s.dt
            )));
        }
        let settings = HeomSettings {
            l_max: s.l_max,
            n_pade: s.n_pade,
            dt: s.dt,
            stride,
            ..*base
        };
        let clock = std::time::Instant::now();
        let n_ados = settings.table(&settings.decomposition(spec)?)?.len();
        let traj = run_hierarchy(sys, spec, &settings, rho0)?;
        runs.push((traj.sigma_z(), n_ados, clock.elapsed().as_secs_f64()));
    }
    let entries: Vec<ScanEntry> = grid
        .iter()
        .enumerate()
        .map(|(i, s)| ScanEntry {
            setting: *s,
            n_ados: runs[i].1,
            seconds: runs[i].2,
            diff_to_next: runs.get(i + 1).map(|next| {
                runs[i]
                    .0
                    .iter()
                    .zip(&next.0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }),
        })
        .collect();
    let selected = entries
        .iter()
        .find(|e| e.diff_to_next.is_some_and(|d| d < tolerance))
        .map(|e| e.setting);
    match selected {
        Some(selected) => Ok(ScanReport {
            tolerance,
            t_final: base.t_final,
            entries,
            selected,
        }),
        None => Err(HierarchyError::NotConverged {
            best: entries
                .iter()
                .filter_map(|e| e.diff_to_next)
                .fold(f64::INFINITY, f64::min),
            tolerance,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::projector;

    fn base(t_final: f64) -> HeomSettings {
        HeomSettings {
            t_final,
            ..HeomSettings::default()
        }
    }

    #[test]
    fn decoupled_bath_converges_at_depth_zero() {
        let sys = SystemSpec::new(0.0, 0.2);
        let spec = BathSpec::new(0.0, 1.0, 25.0).unwrap();
        let grid = [
            ScanSetting { l_max: 0, n_pade: 2, dt: 0.05 },
            ScanSetting { l_max: 1, n_pade: 2, dt: 0.05 },
            ScanSetting { l_max: 2, n_pade: 3, dt: 0.025 },
        ];
        let report =
            convergence_scan(&sys, &spec, &base(10.0), &grid, projector("ground").unwrap(), 0.5, 1e-8)
                .unwrap();
        assert_eq!(report.selected.l_max, 0);
    }

    #[test]
    fn differences_shrink_for_the_nonadiabatic_regime() {
        let sys = SystemSpec::new(0.0, 0.2);
        let spec = BathSpec::new(0.3, 1.0, 25.0).unwrap();
        let grid = [
            ScanSetting { l_max: 2, n_pade: 2, dt: 0.1 },
            ScanSetting { l_max: 3, n_pade: 4, dt: 0.1 },
            ScanSetting { l_max: 4, n_pade: 6, dt: 0.1 },
            ScanSetting { l_max: 5, n_pade: 8, dt: 0.1 },
        ];
        let report =
            convergence_scan(&sys, &spec, &base(20.0), &grid, projector("ground").unwrap(), 0.5, 5e-3)
                .unwrap();
        let diffs: Vec<f64> = report.entries.iter().filter_map(|e| e.diff_to_next).collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    }

    #[test]
    fn empty_grid_is_an_error() {
        let sys = SystemSpec::new(0.0, 0.2);
        let spec = BathSpec::new(0.0, 1.0, 25.0).unwrap();
        let err = convergence_scan(&sys, &spec, &base(1.0), &[], projector("ground").unwrap(), 0.5, 1e-8)
            .unwrap_err();
        assert!(matches!(err, HierarchyError::Invalid(_)));
    }
}
