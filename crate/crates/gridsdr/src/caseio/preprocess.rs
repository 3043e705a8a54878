//! Normalization pass between parsing and model building.
//!
//! Removes out-of-service equipment and isolated buses, rejects networks
//! that split into islands, caps generator bounds that act as big-M
//! placeholders, flags generators whose injections are pinned by equal
//! bounds, and optionally floors branch resistances. The pass is a pure
//! function of its input and idempotent: applying it twice yields the same
//! case and an all-zero second summary.

use super::{BusKind, CaseData, CaseError};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    /// Generator bounds with magnitude above this (p.u.) are clamped to it.
    /// Such bounds are placeholders for "unlimited" and would otherwise
    /// poison the scaling of the model.
    pub bound_cap: f64,
    /// When set, raises every in-service branch resistance below the floor
    /// up to it. Off by default; some reduced network equivalents carry
    /// zero or negative resistances on purpose.
    pub min_resistance: Option<f64>,
    /// Mark generators with equal bounds as fixed so the model builder can
    /// fold them into constants instead of carrying degenerate variables.
    pub eliminate_fixed: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions { bound_cap: 50.0, min_resistance: None, eliminate_fixed: true }
    }
}

/// What the pass changed, for reporting.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PreprocessSummary {
    pub removed_buses: usize,
    pub removed_gens: usize,
    pub removed_branches: usize,
    pub clamped_bounds: usize,
    pub fixed_p: usize,
    pub fixed_q: usize,
    pub floored_resistances: usize,
}

pub fn preprocess(case: &CaseData, opts: &PreprocessOptions) -> Result<(CaseData, PreprocessSummary), CaseError> {
    let mut out = case.clone();
    let mut sum = PreprocessSummary::default();

    let isolated: std::collections::HashSet<u32> =
        out.buses.iter().filter(|b| b.kind == BusKind::Isolated).map(|b| b.id).collect();

    let before = out.gens.len();
    for g in &out.gens {
        if g.in_service && isolated.contains(&g.bus) {
            return Err(CaseError::InvalidData(format!("in-service generator at isolated bus {}", g.bus)));
        }
    }
    out.gens.retain(|g| g.in_service);
    sum.removed_gens = before - out.gens.len();

    let before = out.branches.len();
    for br in &out.branches {
        if br.in_service && (isolated.contains(&br.from) || isolated.contains(&br.to)) {
            return Err(CaseError::InvalidData(format!(
                "in-service branch {}-{} touches an isolated bus",
                br.from, br.to
            )));
        }
    }
    out.branches.retain(|br| br.in_service);
    sum.removed_branches = before - out.branches.len();

    let before = out.buses.len();
    out.buses.retain(|b| b.kind != BusKind::Isolated);
    sum.removed_buses = before - out.buses.len();
    if out.buses.is_empty() {
        return Err(CaseError::InvalidData("no buses remain after preprocessing".to_string()));
    }

    check_connected(&out)?;

    let cap = opts.bound_cap;
    for g in &mut out.gens {
        for b in [&mut g.pmin, &mut g.pmax, &mut g.qmin, &mut g.qmax] {
            if b.abs() > cap {
                *b = b.clamp(-cap, cap);
                sum.clamped_bounds += 1;
            }
        }
        if g.pmin > g.pmax || g.qmin > g.qmax {
            return Err(CaseError::InvalidData(format!(
                "generator at bus {} has inverted bounds",
                g.bus
            )));
        }
        if opts.eliminate_fixed {
            if g.pmin == g.pmax && !g.p_fixed {
                g.p_fixed = true;
                sum.fixed_p += 1;
            }
            if g.qmin == g.qmax && !g.q_fixed {
                g.q_fixed = true;
                sum.fixed_q += 1;
            }
        }
    }

    if let Some(floor) = opts.min_resistance {
        for br in &mut out.branches {
            if br.r < floor {
                br.r = floor;
                sum.floored_resistances += 1;
            }
        }
    }

    Ok((out, sum))
}

/// Union-find connectivity check over in-service branches.
fn check_connected(case: &CaseData) -> Result<(), CaseError> {
    let idx = case.bus_index();
    let n = case.buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for br in &case.branches {
        let a = find(&mut parent, idx[&br.from]);
        let b = find(&mut parent, idx[&br.to]);
        if a != b {
            parent[a] = b;
        }
    }
    let mut roots = std::collections::HashSet::new();
    for i in 0..n {
        roots.insert(find(&mut parent, i));
    }
    if roots.len() > 1 {
        return Err(CaseError::Disconnected { islands: roots.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caseio::parse_matpower;

    const CASE9: &str = include_str!("../../../../data/cases/case9.m");

    #[test]
    fn case9_is_already_clean() {
        let c = parse_matpower(CASE9).unwrap();
        let (p, sum) = preprocess(&c, &PreprocessOptions::default()).unwrap();
        assert_eq!(sum, PreprocessSummary::default());
        assert_eq!(p, c);
    }

    #[test]
    fn idempotent() {
        let mut c = parse_matpower(CASE9).unwrap();
        // Exercise every transformation: a big bound, a fixed generator, an
        // out-of-service branch that does not disconnect the ring.
        c.gens[0].qmax = 9999.0;
        c.gens[1].pmin = c.gens[1].pmax;
        c.branches[4].in_service = false;
        c.gens.push(crate::caseio::Gen { in_service: false, ..c.gens[0].clone() });
        let opts = PreprocessOptions { min_resistance: Some(1e-4), ..Default::default() };
        let (once, sum1) = preprocess(&c, &opts).unwrap();
        assert!(sum1.clamped_bounds == 1 && sum1.fixed_p == 1 && sum1.removed_branches == 1);
        assert_eq!(sum1.removed_gens, 1);
        assert!(sum1.floored_resistances > 0);
        let (twice, sum2) = preprocess(&once, &opts).unwrap();
        assert_eq!(once, twice);
        assert_eq!(sum2, PreprocessSummary::default());
    }

    #[test]
    fn bound_cap_clamps_infinities() {
        let txt = CASE9.replace("300\t-300", "Inf\t-Inf");
        let c = parse_matpower(&txt).unwrap();
        let (p, sum) = preprocess(&c, &PreprocessOptions::default()).unwrap();
        assert_eq!(sum.clamped_bounds, 6);
        assert!(p.gens.iter().all(|g| g.qmax == 50.0 && g.qmin == -50.0));
    }

    #[test]
    fn cap_never_widens_or_touches_interior_bounds() {
        let c = parse_matpower(CASE9).unwrap();
        let (p, _) = preprocess(&c, &PreprocessOptions::default()).unwrap();
        for (g, pg) in c.gens.iter().zip(&p.gens) {
            assert_eq!(g.pmin, pg.pmin);
            assert_eq!(g.pmax, pg.pmax);
            assert_eq!(g.qmin, pg.qmin);
            assert_eq!(g.qmax, pg.qmax);
        }
    }

    #[test]
    fn islands_rejected() {
        let mut c = parse_matpower(CASE9).unwrap();
        // Cutting branches 8-9 and 9-4 strands bus 9.
        for br in &mut c.branches {
            if br.from == 8 && br.to == 9 || br.from == 9 && br.to == 4 {
                br.in_service = false;
            }
        }
        match preprocess(&c, &PreprocessOptions::default()) {
            Err(CaseError::Disconnected { islands: 2 }) => {}
            other => panic!("expected two islands, got {other:?}"),
        }
    }

    #[test]
    fn isolated_bus_removed_with_dead_equipment() {
        let mut c = parse_matpower(CASE9).unwrap();
        // Make bus 9 isolated; its branches must already be out of service.
        c.buses[8].kind = BusKind::Isolated;
        for br in &mut c.branches {
            if br.from == 9 || br.to == 9 {
                br.in_service = false;
            }
        }
        // That disconnects nothing else in the ring? Bus 9 links 8 and 4;
        // the remaining ring stays connected through 1-4-5-6-7-8.
        let (p, sum) = preprocess(&c, &PreprocessOptions::default()).unwrap();
        assert_eq!(sum.removed_buses, 1);
        assert_eq!(sum.removed_branches, 2);
        assert_eq!(p.buses.len(), 8);
    }

    #[test]
    fn live_equipment_on_isolated_bus_is_an_error() {
        let mut c = parse_matpower(CASE9).unwrap();
        c.buses[8].kind = BusKind::Isolated;
        assert!(matches!(
            preprocess(&c, &PreprocessOptions::default()),
            Err(CaseError::InvalidData(_))
        ));
    }

    #[test]
    fn resistance_floor_only_raises() {
        let c = parse_matpower(CASE9).unwrap();
        let opts = PreprocessOptions { min_resistance: Some(0.01), ..Default::default() };
        let (p, sum) = preprocess(&c, &opts).unwrap();
        // case9 has three zero-resistance transformer branches, and branch
        // 7-8 sits at 0.0085 < 0.01; everything else is at or above the floor.
        assert_eq!(sum.floored_resistances, 4);
        for (b0, b1) in c.branches.iter().zip(&p.branches) {
            assert!(b1.r >= 0.01 - 1e-15);
            assert!(b1.r >= b0.r);
            if b0.r >= 0.01 {
                assert_eq!(b0.r, b1.r);
            }
        }
    }
}
