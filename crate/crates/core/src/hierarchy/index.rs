//! ADO index table: occupation vectors, dense offsets and tier links.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::HierarchyError;
use crate::bath::BathDecomposition;

/// One hierarchy mode: a bath exponential, or one member of a rotated pair
/// of nearly degenerate exponentials (see [`hierarchy_modes`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub eta: Complex64,
    /// Diagonal entry of the mode rate matrix.
    pub gamma: Complex64,
    /// `√|η|`, or 1 for a vanishing weight.
    pub scale: f64,
    /// Whether the bath coupling operator contains this mode; the difference
    /// member of a rotated pair is reached only through the rate matrix.
    pub coupled: bool,
}

/// Off-diagonal rate `M_jk`: occupation moves from mode `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mixing {
    pub from: usize,
    pub to: usize,
    pub rate: Complex64,
}

/// Same-tier link produced by a [`Mixing`] entry, with its full coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub target: u32,
    pub coef: Complex64,
}

/// Relative rate gap below which two real exponentials are rotated into a
/// sum/difference pair.
pub const DEFAULT_MERGE_GAP: f64 = 0.05;

fn mode(eta: Complex64, gamma: Complex64, coupled: bool) -> Mode {
    let mag = eta.norm();
    Mode {
        eta,
        gamma,
        scale: if mag > 0.0 { mag.sqrt() } else { 1.0 },
        coupled,
    }
}

/// Hierarchy modes for a decomposition.
///
/// Two real rates `γ_a ≈ γ_b` usually come with large weights of opposite
/// sign, which makes a plain hierarchy converge very slowly in depth. Such a
/// pair is replaced by `B₁ = B_a + B_b` and `B₂ = δ (B_a − B_b)` with
/// `γ̄ = (γ_a + γ_b)/2`, `δ = (γ_a − γ_b)/2`, which obey
/// `Ḃ₁ = −γ̄ B₁ − B₂`, `Ḃ₂ = −δ² B₁ − γ̄ B₂`. The correlation function is
/// reproduced exactly and both new weights are small.
pub fn hierarchy_modes(decomp: &BathDecomposition, merge_gap: f64) -> (Vec<Mode>, Vec<Mixing>) {
    let terms = &decomp.terms;
    let mut partner: Vec<Option<usize>> = vec![None; terms.len()];
    if merge_gap > 0.0 {
        // Closest pairs first, so the result does not depend on term order.
        let mut candidates = Vec::new();
        for a in 0..terms.len() {
            for b in a + 1..terms.len() {
                let (ga, gb) = (terms[a].gamma, terms[b].gamma);
                if ga.im != 0.0 || gb.im != 0.0 {
                    continue;
                }
                let gap = (ga.re - gb.re).abs() / ga.re.abs().max(gb.re.abs());
                if gap < merge_gap {
                    candidates.push((gap, a, b));
                }
            }
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        for (_, a, b) in candidates {
            if partner[a].is_none() && partner[b].is_none() {
                partner[a] = Some(b);
                partner[b] = Some(a);
            }
        }
    }
    let mut modes = Vec::with_capacity(terms.len());
    let mut mixing = Vec::new();
    for (i, t) in terms.iter().enumerate() {
        match partner[i] {
            None => modes.push(mode(t.eta, t.gamma, true)),
            Some(j) => {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                let (ta, tb) = (&terms[a], &terms[b]);
                let mean = (ta.gamma + tb.gamma) * 0.5;
                let half_gap = (ta.gamma - tb.gamma) * 0.5;
                if i == a {
                    modes.push(mode(ta.eta + tb.eta, mean, true));
                    mixing.push(Mixing { from: a, to: b, rate: Complex64::new(1.0, 0.0) });
                    mixing.push(Mixing { from: b, to: a, rate: half_gap * half_gap });
                } else {
                    modes.push(mode((ta.eta - tb.eta) * half_gap, mean, false));
                }
            }
        }
    }
    (modes, mixing)
}

/// Link to a neighbouring ADO one tier up or down along `mode`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub mode: u32,
    pub target: u32,
    /// `√(n_k + 1)` for up links and `√n_k` for down links.
    pub sqrt_occupation: f64,
}

/// Occupation vector of an ADO.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdoIndex {
    pub occupations: Vec<u16>,
}

impl AdoIndex {
    pub fn tier(&self) -> usize {
        self.occupations.iter().map(|&n| n as usize).sum()
    }
}

/// Enumerated hierarchy with precomputed neighbour links.
#[derive(Debug, Clone)]
pub struct HierarchyTable {
    pub modes: Vec<Mode>,
    pub mixing: Vec<Mixing>,
    pub l_max: usize,
    indices: Vec<AdoIndex>,
    /// `Σ_k n_k γ_k` per ADO.
    pub damping: Vec<Complex64>,
    up_start: Vec<u32>,
    up: Vec<Link>,
    down_start: Vec<u32>,
    down: Vec<Link>,
    transfer_start: Vec<u32>,
    transfer: Vec<Transfer>,
    lookup: HashMap<Vec<u16>, usize>,
}

/// `C(l_max + k, k)` in floating point, for budget checks before enumerating.
pub fn ado_count(n_modes: usize, l_max: usize) -> f64 {
    let (n, k) = ((l_max + n_modes) as f64, n_modes.min(l_max) as f64);
    let mut acc = 1.0;
    for i in 0..k as usize {
        acc *= (n - i as f64) / (i as f64 + 1.0);
    }
    acc.round()
}

pub const DEFAULT_MAX_ADOS: usize = 2_000_000;

/// How the retained set of ADOs is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// All occupation vectors with `Σ n_k ≤ L_max`.
    #[default]
    Tier,
    /// `Σ n_k c_k ≤ L_max` with per-mode costs from [`importance_costs`].
    Importance,
}

/// Options for [`HierarchyTable::build_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    pub max_ados: usize,
    /// See [`hierarchy_modes`]; 0 disables pair rotation.
    pub merge_gap: f64,
    pub truncation: Truncation,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            max_ados: DEFAULT_MAX_ADOS,
            merge_gap: DEFAULT_MERGE_GAP,
            truncation: Truncation::Tier,
        }
    }
}

/// Per-mode costs `c_k = max(1, ln s_k / ln s_max)` with the mode strength
/// `s_k = |η_k| / Re γ_k`: a mode that is `s_max^c` as strong as the
/// strongest one may carry `1/c` as many excitations. Strengths are capped
/// at 1/2 so the strongest mode always has cost 1.
pub fn importance_costs(modes: &[Mode]) -> Vec<f64> {
    let strength: Vec<f64> = modes
        .iter()
        .map(|m| (m.eta.norm() / m.gamma.re.abs()).min(0.5))
        .collect();
    let top = strength.iter().copied().fold(0.0, f64::max);
    strength
        .iter()
        .map(|&s| {
            if top == 0.0 || s == 0.0 {
                1.0
            } else {
                (s.ln() / top.ln()).max(1.0)
            }
        })
        .collect()
}

impl HierarchyTable {
    pub fn build(decomp: &BathDecomposition, l_max: usize) -> Result<Self, HierarchyError> {
        Self::build_with(decomp, l_max, &TableOptions::default())
    }

    pub fn build_with_budget(
        decomp: &BathDecomposition,
        l_max: usize,
        max_ados: usize,
    ) -> Result<Self, HierarchyError> {
        Self::build_with(
            decomp,
            l_max,
            &TableOptions {
                max_ados,
                ..TableOptions::default()
            },
        )
    }

    pub fn build_with(
        decomp: &BathDecomposition,
        l_max: usize,
        options: &TableOptions,
    ) -> Result<Self, HierarchyError> {
        let max_ados = options.max_ados;
        let (modes, mixing) = hierarchy_modes(decomp, options.merge_gap);
        let k = modes.len();
        let costs = match options.truncation {
            Truncation::Tier => vec![1.0; k],
            Truncation::Importance => importance_costs(&modes),
        };
        if options.truncation == Truncation::Tier {
            let count = ado_count(k, l_max);
            if count > max_ados as f64 {
                return Err(HierarchyError::Budget {
                    required: count,
                    budget: max_ados,
                });
            }
        }
        if l_max > u16::MAX as usize {
            return Err(HierarchyError::Budget {
                required: f64::INFINITY,
                budget: max_ados,
            });
        }
        let limit = l_max as f64 + 1e-9;

        // Tier by tier; within a tier, lexicographically descending
        // occupation vectors (mode 0 first).
        let mut indices = vec![AdoIndex {
            occupations: vec![0; k],
        }];
        let mut cost_of = vec![0.0];
        let mut tier_start = 0;
        for _tier in 1..=l_max {
            if k == 0 {
                break;
            }
            let tier_end = indices.len();
            let mut next: Vec<(Vec<u16>, f64)> = Vec::new();
            for (idx, &base) in indices[tier_start..tier_end].iter().zip(&cost_of[tier_start..tier_end]) {
                // Only raise modes at or after the last occupied one so each
                // vector is produced once.
                let last = idx.occupations.iter().rposition(|&n| n > 0).unwrap_or(0);
                for m in last..k {
                    if base + costs[m] > limit {
                        continue;
                    }
                    let mut occ = idx.occupations.clone();
                    occ[m] += 1;
                    next.push((occ, base + costs[m]));
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort_by(|a, b| b.0.cmp(&a.0));
            tier_start = tier_end;
            if indices.len() + next.len() > max_ados {
                return Err(HierarchyError::Budget {
                    required: (indices.len() + next.len()) as f64,
                    budget: max_ados,
                });
            }
            for (occupations, cost) in next {
                indices.push(AdoIndex { occupations });
                cost_of.push(cost);
            }
        }

        let lookup: HashMap<Vec<u16>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, idx)| (idx.occupations.clone(), i))
            .collect();

        let mut damping = Vec::with_capacity(indices.len());
        let mut up_start = Vec::with_capacity(indices.len() + 1);
        let mut down_start = Vec::with_capacity(indices.len() + 1);
        let mut transfer_start = Vec::with_capacity(indices.len() + 1);
        let mut up = Vec::new();
        let mut down = Vec::new();
        let mut transfer = Vec::new();
        for idx in &indices {
            up_start.push(up.len() as u32);
            down_start.push(down.len() as u32);
            transfer_start.push(transfer.len() as u32);
            let occ = &idx.occupations;
            damping.push(
                occ.iter()
                    .zip(&modes)
                    .map(|(&n, m)| m.gamma * n as f64)
                    .sum(),
            );
            let mut probe = occ.clone();
            for mx in &mixing {
                let nj = occ[mx.from];
                if nj == 0 {
                    continue;
                }
                probe[mx.from] -= 1;
                probe[mx.to] += 1;
                // −n_j M_jk ρ_{n−e_j+e_k}, in rescaled form; targets outside
                // the retained set are zero.
                if let Some(&target) = lookup.get(&probe) {
                    let f = (nj as f64).sqrt() * (probe[mx.to] as f64).sqrt() * modes[mx.to].scale
                        / modes[mx.from].scale;
                    transfer.push(Transfer {
                        target: target as u32,
                        coef: -mx.rate * f,
                    });
                }
                probe[mx.from] += 1;
                probe[mx.to] -= 1;
            }
            for m in 0..k {
                if modes[m].coupled {
                    probe[m] += 1;
                    if let Some(&target) = lookup.get(&probe) {
                        up.push(Link {
                            mode: m as u32,
                            target: target as u32,
                            sqrt_occupation: (probe[m] as f64).sqrt(),
                        });
                    }
                    probe[m] -= 1;
                }
                if occ[m] > 0 {
                    probe[m] -= 1;
                    down.push(Link {
                        mode: m as u32,
                        target: lookup[&probe] as u32,
                        sqrt_occupation: (occ[m] as f64).sqrt(),
                    });
                    probe[m] += 1;
                }
            }
        }
        up_start.push(up.len() as u32);
        down_start.push(down.len() as u32);
        transfer_start.push(transfer.len() as u32);

        Ok(Self {
            modes,
            mixing,
            l_max,
            indices,
            damping,
            up_start,
            up,
            down_start,
            down,
            transfer_start,
            transfer,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index(&self, offset: usize) -> &AdoIndex {
        &self.indices[offset]
    }

    pub fn offset_of(&self, occupations: &[u16]) -> Option<usize> {
        self.lookup.get(occupations).copied()
    }

    pub fn up_links(&self, offset: usize) -> &[Link] {
        &self.up[self.up_start[offset] as usize..self.up_start[offset + 1] as usize]
    }

    pub fn down_links(&self, offset: usize) -> &[Link] {
        &self.down[self.down_start[offset] as usize..self.down_start[offset + 1] as usize]
    }

    pub fn transfers(&self, offset: usize) -> &[Transfer] {
        &self.transfer[self.transfer_start[offset] as usize..self.transfer_start[offset + 1] as usize]
    }

    /// Factor relating a rescaled ADO to the physical one,
    /// `Π_k √(n_k!) |η_k|^{n_k/2}`.
    pub fn physical_scale(&self, offset: usize) -> f64 {
        self.indices[offset]
            .occupations
            .iter()
            .zip(&self.modes)
            .map(|(&n, m)| {
                let fact: f64 = (1..=n as u32).map(f64::from).product();
                fact.sqrt() * m.scale.powi(n as i32)
            })
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{pade_decomposition, BathSpec};
    use proptest::prelude::*;

    fn decomp(n_pade: usize) -> BathDecomposition {
        pade_decomposition(&BathSpec::new(0.3, 1.0, 25.0).unwrap(), n_pade).unwrap()
    }

    #[test]
    fn small_tables() {
        let t = HierarchyTable::build(&decomp(1), 1).unwrap();
        assert_eq!(t.len(), 3);
        let occ: Vec<_> = (0..3).map(|i| t.index(i).occupations.clone()).collect();
        assert_eq!(occ, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);

        let t = HierarchyTable::build(&decomp(2), 4).unwrap();
        assert_eq!(t.len(), 35);

        let t = HierarchyTable::build(&decomp(3), 0).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.up_links(0).is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let err = HierarchyTable::build_with_budget(&decomp(9), 8, 1000).unwrap_err();
        assert!(matches!(err, HierarchyError::Budget { .. }));
    }

    #[test]
    fn counts_match_binomial() {
        assert_eq!(ado_count(3, 4), 35.0);
        assert_eq!(ado_count(11, 6), 12376.0);
    }

    proptest! {
        #[test]
        fn links_are_consistent(n_pade in 1usize..5, l_max in 0usize..6) {
            let t = HierarchyTable::build(&decomp(n_pade), l_max).unwrap();
            prop_assert_eq!(t.len() as f64, ado_count(n_pade + 1, l_max));
            for i in 0..t.len() {
                let idx = t.index(i);
                prop_assert!(idx.tier() <= l_max);
                prop_assert_eq!(t.offset_of(&idx.occupations), Some(i));
                for l in t.up_links(i) {
                    let up = t.index(l.target as usize);
                    prop_assert_eq!(up.tier(), idx.tier() + 1);
                    // The down link of the target along the same mode returns here.
                    let back = t.down_links(l.target as usize).iter().find(|d| d.mode == l.mode).unwrap();
                    prop_assert_eq!(back.target as usize, i);
                    prop_assert_eq!(back.sqrt_occupation, l.sqrt_occupation);
                }
                for l in t.down_links(i) {
                    prop_assert_eq!(t.index(l.target as usize).tier() + 1, idx.tier());
                }
            }
        }
    }
}
