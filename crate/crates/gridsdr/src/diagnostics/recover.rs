//! Voltage profile recovery from the solved matrix blocks.
//!
//! Each clique block is approximately rank one at a tight relaxation, so
//! its top eigenpair yields a candidate voltage segment. Segments are
//! only determined up to a phase each; walking the clique tree, every
//! child segment is rotated to best match the already-assigned values on
//! its separator, and finally the whole profile is rotated so the
//! reference bus has angle zero.

use crate::chordal::{herm_embed_dense, CliqueTree};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// Result of the rank-1 extraction.
#[derive(Debug, Clone, Serialize)]
pub struct Recovery {
    /// Recovered phasor per vertex.
    pub v: Vec<Complex64>,
    /// Second-to-first eigenvalue ratio per clique block; near zero means
    /// the block is numerically rank one.
    pub block_ratios: Vec<f64>,
    /// Worst ratio over all blocks.
    pub lambda_ratio: f64,
}

/// Extracts voltages from per-clique Hermitian blocks.
///
/// `blocks[t]` must be the solved matrix of clique `t` in `dec`, with
/// rows ordered like the clique's sorted vertex list. `n` is the number
/// of vertices; `ref_vertex` gets angle zero.
pub fn recover_voltages(
    dec: &CliqueTree,
    blocks: &[DMatrix<Complex64>],
    n: usize,
    ref_vertex: usize,
) -> Recovery {
    assert_eq!(blocks.len(), dec.cliques.len());
    let mut segments = Vec::with_capacity(blocks.len());
    let mut ratios = Vec::with_capacity(blocks.len());
    for (t, x) in blocks.iter().enumerate() {
        let r = dec.cliques[t].len();
        assert_eq!(x.nrows(), r, "block {t} order disagrees with its clique");
        let (u, ratio) = top_eigenpair(x);
        segments.push(u);
        ratios.push(ratio);
    }

    // Stitch segments over the tree, parents before children.
    let mut v = vec![Complex64::ZERO; n];
    let mut assigned = vec![false; n];
    let order = bfs_order(dec);
    for &t in &order {
        let clique = &dec.cliques[t];
        let seg = &segments[t];
        // Align to whatever overlap is already assigned (the separator
        // with the parent, for non-roots).
        let mut corr = Complex64::ZERO;
        for (a, &k) in clique.iter().enumerate() {
            if assigned[k] {
                corr += seg[a].conj() * v[k];
            }
        }
        let rot = if corr.norm() > 1e-300 { corr / corr.norm() } else { Complex64::ONE };
        for (a, &k) in clique.iter().enumerate() {
            if !assigned[k] {
                v[k] = rot * seg[a];
                assigned[k] = true;
            }
        }
    }

    // Anchor the reference angle.
    if ref_vertex < n && v[ref_vertex].norm() > 0.0 {
        let rot = v[ref_vertex].conj() / v[ref_vertex].norm();
        for val in v.iter_mut() {
            *val *= rot;
        }
        // Kill the rounding residue in the anchored phasor.
        v[ref_vertex] = Complex64::new(v[ref_vertex].re, 0.0);
    }

    let lambda_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Recovery { v, block_ratios: ratios, lambda_ratio }
}

/// Top eigenvector scaled by the root of its eigenvalue, plus the ratio
/// of the second eigenvalue to the first.
///
/// Works through the real embedding, where every Hermitian eigenvalue
/// appears twice; the second Hermitian eigenvalue is therefore the third
/// largest embedded one.
fn top_eigenpair(x: &DMatrix<Complex64>) -> (Vec<Complex64>, f64) {
    let r = x.nrows();
    let eig = nalgebra::SymmetricEigen::new(herm_embed_dense(x));
    let mut idx: Vec<usize> = (0..2 * r).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let lam1 = eig.eigenvalues[idx[0]];
    if lam1 <= 0.0 {
        return (vec![Complex64::ZERO; r], 0.0);
    }
    let lam2 = if 2 * r > 2 { eig.eigenvalues[idx[2]].max(0.0) } else { 0.0 };
    let w = eig.eigenvectors.column(idx[0]);
    let scale = lam1.sqrt();
    let u: Vec<Complex64> =
        (0..r).map(|k| Complex64::new(w[k], w[k + r]) * scale).collect();
    (u, lam2 / lam1)
}

/// Clique indices in breadth-first order, every parent before its
/// children, covering all components.
fn bfs_order(dec: &CliqueTree) -> Vec<usize> {
    let q = dec.cliques.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); q];
    let mut roots = Vec::new();
    for (i, &p) in dec.parent.iter().enumerate() {
        match p {
            Some(p) => children[p].push(i),
            None => roots.push(i),
        }
    }
    let mut order = Vec::with_capacity(q);
    let mut queue: std::collections::VecDeque<usize> = roots.into();
    while let Some(t) = queue.pop_front() {
        order.push(t);
        queue.extend(&children[t]);
    }
    debug_assert_eq!(order.len(), q);
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::{decompose, fill_reducing_order, EliminationOrder, SparsityPattern};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_profile(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(0.9..1.1), rng.random_range(-0.5..0.5)))
            .collect()
    }

    fn rank_one_blocks(dec: &CliqueTree, v: &[Complex64]) -> Vec<DMatrix<Complex64>> {
        dec.cliques
            .iter()
            .map(|c| {
                let seg = nalgebra::DVector::from_iterator(c.len(), c.iter().map(|&k| v[k]));
                // Each clique sees its own arbitrary phase.
                let phase = Complex64::from_polar(1.0, 0.7 * c[0] as f64);
                let seg = seg * phase;
                &seg * seg.adjoint()
            })
            .collect()
    }

    fn anchored(v: &[Complex64], r: usize) -> Vec<Complex64> {
        let rot = v[r].conj() / v[r].norm();
        v.iter().map(|x| x * rot).collect()
    }

    #[test]
    fn exact_rank_one_blocks_reproduce_the_profile() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let n = 12;
            let mut edges = vec![(0usize, 1usize)];
            for k in 2..n {
                // Random connected graph: attach to an earlier vertex.
                edges.push((rng.random_range(0..k), k));
                if rng.random_bool(0.4) {
                    edges.push((rng.random_range(0..k), k));
                }
            }
            let p = SparsityPattern::from_edges(n, edges);
            let dec = decompose(&p, &fill_reducing_order(&p, EliminationOrder::Amd));
            let truth = random_profile(&mut rng, n);
            let blocks = rank_one_blocks(&dec, &truth);
            let rec = recover_voltages(&dec, &blocks, n, 0);
            assert!(rec.lambda_ratio < 1e-10, "rank-1 input, ratio {}", rec.lambda_ratio);
            let want = anchored(&truth, 0);
            for k in 0..n {
                assert!(
                    (rec.v[k] - want[k]).norm() < 1e-8,
                    "vertex {k}: {:?} vs {:?}",
                    rec.v[k],
                    want[k]
                );
            }
        }
    }

    #[test]
    fn single_block_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 6;
        let truth = random_profile(&mut rng, n);
        let dec = CliqueTree {
            cliques: vec![(0..n).collect()],
            parent: vec![None],
            separator: vec![Vec::new()],
        };
        let blocks = rank_one_blocks(&dec, &truth);
        let rec = recover_voltages(&dec, &blocks, n, 2);
        let want = anchored(&truth, 2);
        for k in 0..n {
            assert!((rec.v[k] - want[k]).norm() < 1e-8);
        }
        assert!(rec.v[2].im.abs() < 1e-12, "reference angle is zero");
    }

    #[test]
    fn perturbation_shows_up_in_the_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 8;
        let p = SparsityPattern::from_edges(n, (0..n - 1).map(|k| (k, k + 1)));
        let dec = decompose(&p, &fill_reducing_order(&p, EliminationOrder::Natural));
        let truth = random_profile(&mut rng, n);
        let mut blocks = rank_one_blocks(&dec, &truth);
        let eps = 1e-3;
        for b in blocks.iter_mut() {
            let r = b.nrows();
            for k in 0..r {
                b[(k, k)] += Complex64::new(eps, 0.0);
            }
        }
        let rec = recover_voltages(&dec, &blocks, n, 0);
        // Adding eps * I shifts every eigenvalue by eps, so the ratio is
        // roughly eps over the top eigenvalue.
        assert!(rec.lambda_ratio > 1e-5 && rec.lambda_ratio < 1e-2, "{}", rec.lambda_ratio);
        let want = anchored(&truth, 0);
        for k in 0..n {
            assert!((rec.v[k] - want[k]).norm() < 0.05);
        }
    }

    #[test]
    fn zero_block_degenerates_gracefully() {
        let dec = CliqueTree {
            cliques: vec![vec![0, 1]],
            parent: vec![None],
            separator: vec![Vec::new()],
        };
        let rec = recover_voltages(&dec, &[DMatrix::zeros(2, 2)], 2, 0);
        assert_eq!(rec.v, vec![Complex64::ZERO; 2]);
        assert_eq!(rec.lambda_ratio, 0.0);
    }
}
