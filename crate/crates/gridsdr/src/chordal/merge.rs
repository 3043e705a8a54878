//! Greedy parent-child clique merging.
//!
//! Merging trades conversion overhead (coupling rows, many small blocks)
//! against projection cost (larger PSD blocks). Only tree-adjacent pairs
//! are merged: completing the union of two adjacent cliques keeps the
//! union graph chordal and keeps every untouched clique maximal unless it
//! became a subset of the merged one, so the result is again a valid
//! clique tree after absorbing subsets and rebuilding.

use super::eliminate::{build_tree, sorted_intersection_len};
use super::CliqueTree;

/// Merges cliques into their tree parents while a size or profitability
/// rule accepts the merge.
///
/// A child `c` with parent `p`, separator size `s`, and union size `r_m`
/// is merged when either rule fires:
///
/// * `max_block > 0` and `r_m <= max_block`;
/// * `fill_budget` is `Some(lambda)` and `s^2 > lambda * (r_m^2 - r_p^2 - r_c^2)`,
///   i.e. the squared coupling scalars saved outweigh the penalized growth
///   in block entries. Larger `lambda` merges less; `0.0` collapses each
///   connected component into one clique.
///
/// With `max_block == 0` and no budget the decomposition is returned
/// unchanged. Merging is deterministic: children are scanned in index
/// order, each clique participates in at most one merge per pass, and
/// passes repeat until no rule fires.
pub fn merge_cliques(dec: &CliqueTree, max_block: usize, fill_budget: Option<f64>) -> CliqueTree {
    let mut tree = dec.clone();
    if max_block == 0 && fill_budget.is_none() {
        return tree;
    }
    loop {
        let q = tree.cliques.len();
        let mut touched = vec![false; q];
        let mut dead = vec![false; q];
        let mut merged_any = false;
        for c in 0..q {
            let Some(p) = tree.parent[c] else { continue };
            if touched[c] || touched[p] {
                continue;
            }
            let r_c = tree.cliques[c].len();
            let r_p = tree.cliques[p].len();
            let s = tree.separator[c].len();
            let r_m = r_p + r_c - s;
            let by_size = max_block > 0 && r_m <= max_block;
            let by_budget = fill_budget.is_some_and(|lambda| {
                let grown = (r_m * r_m) as f64 - (r_p * r_p) as f64 - (r_c * r_c) as f64;
                (s * s) as f64 > lambda * grown
            });
            if by_size || by_budget {
                let union = sorted_union(&tree.cliques[p], &tree.cliques[c]);
                tree.cliques[p] = union;
                dead[c] = true;
                touched[c] = true;
                touched[p] = true;
                merged_any = true;
            }
        }
        if !merged_any {
            return tree;
        }
        let survivors: Vec<Vec<usize>> = (0..q).filter(|&i| !dead[i]).map(|i| tree.cliques[i].clone()).collect();
        tree = build_tree(drop_contained(survivors));
    }
}

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                out.push(x);
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                out.push(x);
                i += 1;
            }
            (Some(_), Some(&y)) => {
                out.push(y);
                j += 1;
            }
            (Some(&x), None) => {
                out.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                out.push(y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Removes cliques contained in another; among equal sets the earliest
/// survives.
fn drop_contained(cliques: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let q = cliques.len();
    let mut keep = vec![true; q];
    for i in 0..q {
        for j in 0..q {
            if i == j || !keep[i] || !keep[j] {
                continue;
            }
            let sub = sorted_intersection_len(&cliques[i], &cliques[j]) == cliques[i].len();
            if sub && (cliques[i].len() < cliques[j].len() || i > j) {
                keep[i] = false;
            }
        }
    }
    cliques.into_iter().zip(keep).filter_map(|(c, k)| k.then_some(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::{decompose, fill_reducing_order, EliminationOrder, SparsityPattern};
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn path4() -> (SparsityPattern, CliqueTree) {
        let p = SparsityPattern::from_edges(4, [(0, 1), (1, 2), (2, 3)]);
        let t = decompose(&p, &[0, 1, 2, 3]);
        (p, t)
    }

    #[test]
    fn size_rule_merges_path_prefix() {
        let (p, t) = path4();
        let m = merge_cliques(&t, 3, None);
        assert_eq!(m.cliques, vec![vec![0, 1, 2], vec![2, 3]]);
        m.verify(&p).unwrap();
    }

    #[test]
    fn disabled_merging_is_identity() {
        let (_, t) = path4();
        assert_eq!(merge_cliques(&t, 0, None), t);
    }

    #[test]
    fn zero_budget_collapses_each_component() {
        let (p, t) = path4();
        let m = merge_cliques(&t, 0, Some(0.0));
        assert_eq!(m.cliques, vec![vec![0, 1, 2, 3]]);
        m.verify(&p).unwrap();

        let p2 = SparsityPattern::from_edges(6, [(0, 1), (1, 2), (3, 4), (4, 5)]);
        let t2 = decompose(&p2, &fill_reducing_order(&p2, EliminationOrder::Natural));
        let m2 = merge_cliques(&t2, 0, Some(0.0));
        assert_eq!(m2.cliques.len(), 2);
        m2.verify(&p2).unwrap();
    }

    #[test]
    fn unit_budget_keeps_thin_path() {
        // Merging two 2-cliques with a 1-vertex separator saves one
        // coupled scalar but grows entries by the same amount, so the
        // strict inequality rejects it at lambda = 1.
        let (_, t) = path4();
        assert_eq!(merge_cliques(&t, 0, Some(1.0)), t);
    }

    #[test]
    fn merged_trees_stay_valid_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xab5);
        for trial in 0..40 {
            let n = rng.random_range(4..16);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.3) {
                        edges.push((i, j));
                    }
                }
            }
            let p = SparsityPattern::from_edges(n, edges);
            let t = decompose(&p, &fill_reducing_order(&p, EliminationOrder::Amd));
            let biggest = t.stats().max_size;
            for (max_block, budget) in [(3, None), (6, None), (0, Some(0.5)), (4, Some(2.0))] {
                let m = merge_cliques(&t, max_block, budget);
                m.verify(&p).unwrap_or_else(|e| panic!("trial {trial} ({max_block}, {budget:?}): {e}"));
                if budget.is_none() {
                    let cap = biggest.max(max_block);
                    assert!(m.stats().max_size <= cap, "trial {trial}: size rule exceeded cap");
                }
                assert!(m.stats().coupling_scalars <= t.stats().coupling_scalars);
                assert!(m.cliques.len() <= t.cliques.len());
            }
        }
    }

    #[test]
    fn merging_is_deterministic() {
        let p = SparsityPattern::from_edges(
            10,
            [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9), (0, 9), (2, 7)],
        );
        let t = decompose(&p, &fill_reducing_order(&p, EliminationOrder::Amd));
        let a = merge_cliques(&t, 4, Some(1.5));
        let b = merge_cliques(&t, 4, Some(1.5));
        assert_eq!(a, b);
    }
}
