//! Real embedding of Hermitian PSD blocks.
//!
//! A Hermitian matrix `X = P + iQ` corresponds to the real symmetric
//! matrix `S = [[P, -Q], [Q, P]]` of twice the order; `X` is PSD exactly
//! when `S` is, and each eigenvalue of `X` appears twice in `S`. Working
//! in packed coordinates, every data coefficient on a Hermitian slot
//! splits into two half-weight coefficients on symmetric slots, chosen so
//! that for any symmetric point the rewritten rows equal the original
//! rows evaluated at the projected Hermitian point. The solver therefore
//! only ever sees real symmetric cones, and recovering the Hermitian
//! block from a solution is the orthogonal projection implemented here.

use crate::relax::hvec::{HvecCodec, SvecCodec};
use crate::relax::{ConeBlock, ConeLP};
use crate::sparse::CscMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Column bookkeeping for one block of the original problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymBlockMap {
    /// Block kept verbatim.
    Pass { old_start: usize, new_start: usize, len: usize },
    /// Hermitian block of the given order embedded as symmetric of twice
    /// the order.
    Herm { old_start: usize, new_start: usize, order: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymMap {
    pub blocks: Vec<SymBlockMap>,
    pub n_old: usize,
    pub n_new: usize,
}

impl SymMap {
    /// Exact image of an original point: both diagonal copies carry the
    /// real part, the off-diagonal blocks carry the imaginary part with
    /// opposite signs.
    pub fn embed(&self, x_old: &[f64]) -> Vec<f64> {
        assert_eq!(x_old.len(), self.n_old);
        let mut out = vec![0.0; self.n_new];
        for blk in &self.blocks {
            match *blk {
                SymBlockMap::Pass { old_start, new_start, len } => {
                    out[new_start..new_start + len].copy_from_slice(&x_old[old_start..old_start + len]);
                }
                SymBlockMap::Herm { old_start, new_start, order: r } => {
                    let h = HvecCodec::new(r);
                    let s = SvecCodec::new(2 * r);
                    for k in 0..r {
                        let d = x_old[old_start + h.idx_diag(k)];
                        out[new_start + s.idx(k, k)] = d;
                        out[new_start + s.idx(k + r, k + r)] = d;
                        for i in 0..k {
                            let re = x_old[old_start + h.idx_re(i, k)];
                            let im = x_old[old_start + h.idx_im(i, k)];
                            out[new_start + s.idx(i, k)] = re;
                            out[new_start + s.idx(i + r, k + r)] = re;
                            out[new_start + s.idx(k, i + r)] = im;
                            out[new_start + s.idx(i, k + r)] = -im;
                        }
                    }
                }
            }
        }
        out
    }

    /// Orthogonal projection back to the original coordinates; inverse of
    /// [`SymMap::embed`] on its image. For any symmetric-space point `y`
    /// the rewritten problem satisfies `A_new y = A_old project(y)`.
    pub fn project(&self, x_new: &[f64]) -> Vec<f64> {
        assert_eq!(x_new.len(), self.n_new);
        let mut out = vec![0.0; self.n_old];
        for blk in &self.blocks {
            match *blk {
                SymBlockMap::Pass { old_start, new_start, len } => {
                    out[old_start..old_start + len].copy_from_slice(&x_new[new_start..new_start + len]);
                }
                SymBlockMap::Herm { old_start, new_start, order: r } => {
                    let h = HvecCodec::new(r);
                    let s = SvecCodec::new(2 * r);
                    for k in 0..r {
                        out[old_start + h.idx_diag(k)] =
                            0.5 * (x_new[new_start + s.idx(k, k)] + x_new[new_start + s.idx(k + r, k + r)]);
                        for i in 0..k {
                            out[old_start + h.idx_re(i, k)] = 0.5
                                * (x_new[new_start + s.idx(i, k)] + x_new[new_start + s.idx(i + r, k + r)]);
                            out[old_start + h.idx_im(i, k)] = 0.5
                                * (x_new[new_start + s.idx(k, i + r)] - x_new[new_start + s.idx(i, k + r)]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Recovers the `which`-th Hermitian block of a symmetric-space point
    /// as a dense matrix.
    pub fn herm_matrix(&self, x_new: &[f64], which: usize) -> DMatrix<Complex64> {
        let herm: Vec<&SymBlockMap> =
            self.blocks.iter().filter(|b| matches!(b, SymBlockMap::Herm { .. })).collect();
        let SymBlockMap::Herm { new_start, order: r, .. } = *herm[which] else { unreachable!() };
        let s = SvecCodec::new(2 * r);
        let big = s.unpack(&x_new[new_start..new_start + s.len()]);
        herm_project_dense(&big)
    }
}

/// Rewrites every Hermitian PSD block of `lp` as a real symmetric block
/// of twice the order. Rows, right-hand side, and objective offset are
/// unchanged.
pub fn herm_to_sym(lp: &ConeLP) -> (ConeLP, SymMap) {
    let mut blocks_new = Vec::with_capacity(lp.blocks.len());
    let mut map_blocks = Vec::with_capacity(lp.blocks.len());
    let mut new_start = 0;
    let mut old_start = 0;
    for &blk in &lp.blocks {
        match blk {
            ConeBlock::PsdHerm(r) => {
                blocks_new.push(ConeBlock::PsdSym(2 * r));
                map_blocks.push(SymBlockMap::Herm { old_start, new_start, order: r });
                new_start += ConeBlock::PsdSym(2 * r).len();
            }
            other => {
                blocks_new.push(other);
                map_blocks.push(SymBlockMap::Pass { old_start, new_start, len: other.len() });
                new_start += other.len();
            }
        }
        old_start += blk.len();
    }
    let map = SymMap { blocks: map_blocks, n_old: old_start, n_new: new_start };

    // Per old column: list of (new column, factor).
    let mut col_map: Vec<Vec<(usize, f64)>> = vec![Vec::new(); map.n_old];
    for blk in &map.blocks {
        match *blk {
            SymBlockMap::Pass { old_start, new_start, len } => {
                for k in 0..len {
                    col_map[old_start + k].push((new_start + k, 1.0));
                }
            }
            SymBlockMap::Herm { old_start, new_start, order: r } => {
                let h = HvecCodec::new(r);
                let s = SvecCodec::new(2 * r);
                for k in 0..r {
                    col_map[old_start + h.idx_diag(k)] = vec![
                        (new_start + s.idx(k, k), 0.5),
                        (new_start + s.idx(k + r, k + r), 0.5),
                    ];
                    for i in 0..k {
                        col_map[old_start + h.idx_re(i, k)] = vec![
                            (new_start + s.idx(i, k), 0.5),
                            (new_start + s.idx(i + r, k + r), 0.5),
                        ];
                        col_map[old_start + h.idx_im(i, k)] = vec![
                            (new_start + s.idx(k, i + r), 0.5),
                            (new_start + s.idx(i, k + r), -0.5),
                        ];
                    }
                }
            }
        }
    }

    let mut triplets = Vec::with_capacity(2 * lp.a.nnz());
    for (row, col, val) in lp.a.iter() {
        for &(nc, f) in &col_map[col] {
            triplets.push((row, nc, f * val));
        }
    }
    let mut c = vec![0.0; map.n_new];
    for (col, &val) in lp.c.iter().enumerate() {
        for &(nc, f) in &col_map[col] {
            c[nc] += f * val;
        }
    }
    let out = ConeLP {
        a: CscMatrix::from_triplets(lp.n_row(), map.n_new, &triplets),
        b: lp.b.clone(),
        c,
        blocks: blocks_new,
        offset: lp.offset,
    };
    debug_assert!(out.validate().is_ok());
    (out, map)
}

/// Dense real embedding `[[P, -Q], [Q, P]]` of a Hermitian matrix.
pub fn herm_embed_dense(x: &DMatrix<Complex64>) -> DMatrix<f64> {
    let r = x.nrows();
    let mut s = DMatrix::zeros(2 * r, 2 * r);
    for i in 0..r {
        for j in 0..r {
            s[(i, j)] = x[(i, j)].re;
            s[(i + r, j + r)] = x[(i, j)].re;
            s[(i + r, j)] = x[(i, j)].im;
            s[(i, j + r)] = -x[(i, j)].im;
        }
    }
    s
}

/// Dense projection inverse to [`herm_embed_dense`]: averages the two
/// diagonal blocks and antisymmetrizes the off-diagonal block. Maps PSD
/// to PSD because it averages `S` with a rotation congruence of `S`.
pub fn herm_project_dense(s: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = s.nrows();
    assert!(n % 2 == 0, "embedded matrix must have even order");
    let r = n / 2;
    DMatrix::from_fn(r, r, |i, j| {
        Complex64::new(
            0.5 * (s[(i, j)] + s[(i + r, j + r)]),
            0.5 * (s[(i + r, j)] - s[(i, j + r)]),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relax::hvec::test_support::random_hermitian;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn toy_lp(rng: &mut ChaCha8Rng) -> ConeLP {
        // NonNeg(2) + SOC(3) + Herm(3) + Herm(2): 2 + 3 + 9 + 4 = 18 vars.
        let blocks =
            vec![ConeBlock::NonNeg(2), ConeBlock::Soc(3), ConeBlock::PsdHerm(3), ConeBlock::PsdHerm(2)];
        let n: usize = blocks.iter().map(|b| b.len()).sum();
        let m = 6;
        let mut triplets = Vec::new();
        for row in 0..m {
            for col in 0..n {
                if rng.random_bool(0.4) {
                    triplets.push((row, col, rng.random_range(-1.0..1.0)));
                }
            }
        }
        ConeLP {
            a: CscMatrix::from_triplets(m, n, &triplets),
            b: (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            c: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            blocks,
            offset: 0.25,
        }
    }

    fn random_old_point(rng: &mut ChaCha8Rng, lp: &ConeLP) -> Vec<f64> {
        (0..lp.n_var()).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn blocks_are_rewritten_in_place() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lp = toy_lp(&mut rng);
        let (sym, map) = herm_to_sym(&lp);
        assert_eq!(
            sym.blocks,
            vec![ConeBlock::NonNeg(2), ConeBlock::Soc(3), ConeBlock::PsdSym(6), ConeBlock::PsdSym(4)]
        );
        assert_eq!(sym.n_row(), lp.n_row());
        assert_eq!(sym.b, lp.b);
        assert_eq!(map.n_old, 18);
        assert_eq!(map.n_new, 2 + 3 + 21 + 10);
    }

    #[test]
    fn embed_preserves_rows_objective_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lp = toy_lp(&mut rng);
        let (sym, map) = herm_to_sym(&lp);
        for _ in 0..10 {
            let x = random_old_point(&mut rng, &lp);
            let xe = map.embed(&x);
            let back = map.project(&xe);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-13);
            }
            let ax = lp.a.mul_vec(&x);
            let axe = sym.a.mul_vec(&xe);
            for (a, b) in ax.iter().zip(&axe) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((lp.objective(&x) - sym.objective(&xe)).abs() < 1e-12);
        }
    }

    #[test]
    fn rewritten_rows_factor_through_the_projection() {
        // For arbitrary points of the symmetric space, not just embedded
        // ones: A_new y == A_old project(y).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lp = toy_lp(&mut rng);
        let (sym, map) = herm_to_sym(&lp);
        for _ in 0..10 {
            let y: Vec<f64> = (0..map.n_new).map(|_| rng.random_range(-2.0..2.0)).collect();
            let lhs = sym.a.mul_vec(&y);
            let rhs = lp.a.mul_vec(&map.project(&y));
            for (a, b) in lhs.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embed_doubles_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let a = random_hermitian(&mut rng, 4);
            let b = random_hermitian(&mut rng, 4);
            let (ea, eb) = (herm_embed_dense(&a), herm_embed_dense(&b));
            let want = (a.adjoint() * &b).trace().re;
            let got = (ea.transpose() * &eb).trace();
            assert!((got - 2.0 * want).abs() < 1e-10);
        }
    }

    #[test]
    fn embedding_doubles_each_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_hermitian(&mut rng, 5);
        let s = herm_embed_dense(&x);
        let mut eigs = nalgebra::SymmetricEigen::new(s.clone()).eigenvalues.as_slice().to_vec();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Pairs of equal values.
        for pair in eigs.chunks(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-9);
        }
        let back = herm_project_dense(&s);
        for i in 0..5 {
            for j in 0..5 {
                assert!((back[(i, j)] - x[(i, j)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn projection_of_any_psd_symmetric_matrix_is_psd_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let g = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
            let s = &g * g.transpose();
            let x = herm_project_dense(&s);
            // Hermitian by construction; PSD via the real embedding.
            let eigs = nalgebra::SymmetricEigen::new(herm_embed_dense(&x)).eigenvalues;
            let min = eigs.iter().fold(f64::INFINITY, |m, &e| m.min(e));
            assert!(min > -1e-10, "projection lost positive semidefiniteness: {min}");
            // Trace halves: tr X = (tr S) / 2.
            assert!((x.trace().re - 0.5 * s.trace()).abs() < 1e-10);
        }
    }
}
