//! Diagonal equilibration of the problem data.
//!
//! Rows get individual scalars; columns get one scalar per cone block so
//! the scaled cone equals the original (uniform positive scaling maps
//! every block onto itself, which per-column scaling would not for
//! second-order and semidefinite blocks). The right-hand side and cost
//! vector then get one scalar each bringing them to unit norm, which
//! keeps the homogeneous embedding balanced: without it the scaled
//! solution can dwarf the tau coordinate and convergence crawls. All of
//! it is undone before any convergence measure is reported.

use crate::linalg;
use crate::relax::ConeLP;

#[derive(Debug, Clone)]
pub struct Scaling {
    /// Row scalars: scaled A is `diag(d) A diag(e)`.
    pub d: Vec<f64>,
    /// Column scalars, constant within each cone block.
    pub e: Vec<f64>,
    /// Right-hand-side scalar: scaled b is `sigma_b * diag(d) b`.
    pub sigma_b: f64,
    /// Cost scalar: scaled c is `sigma_c * diag(e) c`.
    pub sigma_c: f64,
}

impl Scaling {
    pub fn identity(m: usize, n: usize) -> Self {
        Scaling { d: vec![1.0; m], e: vec![1.0; n], sigma_b: 1.0, sigma_c: 1.0 }
    }

    /// Original primal point from a scaled one: `x = E x~ / sigma_b`.
    pub fn unscale_x(&self, xt: &[f64]) -> Vec<f64> {
        xt.iter().zip(&self.e).map(|(x, e)| x * e / self.sigma_b).collect()
    }

    /// Original dual multipliers: `y = D y~ / sigma_c`.
    pub fn unscale_y(&self, yt: &[f64]) -> Vec<f64> {
        yt.iter().zip(&self.d).map(|(y, d)| y * d / self.sigma_c).collect()
    }

    /// Original dual slacks: `s = E^-1 s~ / sigma_c`.
    pub fn unscale_s(&self, st: &[f64]) -> Vec<f64> {
        st.iter().zip(&self.e).map(|(s, e)| s / (e * self.sigma_c)).collect()
    }
}

/// Ruiz-style equilibration: repeatedly divides rows and cone blocks by
/// the square root of their largest entry, then normalizes b and c.
/// Returns the scaled problem and the applied scaling.
pub fn equilibrate(lp: &ConeLP, iters: usize) -> (ConeLP, Scaling) {
    let (m, n) = (lp.n_row(), lp.n_var());
    let mut a = lp.a.clone();
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];

    let block_spans: Vec<(usize, usize)> =
        lp.block_ranges().map(|(start, blk)| (start, start + blk.len())).collect();

    for _ in 0..iters {
        // Geometric-mean row factors: brings each row's largest and
        // smallest magnitudes symmetrically around one, which handles
        // wide within-row spreads better than the max alone.  Cumulative
        // factors are clamped to [0.1, 10]; residuals are reported in the
        // original units, so extreme factors would amplify the scaled
        // iteration noise when unscaling.
        let (rmax, rmin) = a.row_norm_extremes();
        let mut dr = vec![1.0; m];
        for i in 0..m {
            if rmax[i] > 0.0 {
                let cur = (d[i] / (rmax[i] * rmin[i]).sqrt().sqrt()).clamp(0.1, 10.0);
                dr[i] = cur / d[i];
                d[i] = cur;
            }
        }
        a.scale_rows(&dr);

        let (cmax, cmin) = a.col_norm_extremes();
        let mut ec = vec![1.0; n];
        for &(start, end) in &block_spans {
            let hi = cmax[start..end].iter().copied().fold(0.0, f64::max);
            let lo = cmin[start..end]
                .iter()
                .copied()
                .filter(|&v| v > 0.0)
                .fold(f64::INFINITY, f64::min);
            if hi > 0.0 {
                let cur = (e[start] / (hi * lo).sqrt().sqrt()).clamp(0.1, 10.0);
                let s = cur / e[start];
                for k in start..end {
                    ec[k] = s;
                    e[k] = cur;
                }
            }
        }
        a.scale_cols(&ec);

        // Converged when every row's geometric mean of extremes is
        // within 10 percent of one.
        let (rmax, rmin) = a.row_norm_extremes();
        let worst = rmax
            .iter()
            .zip(&rmin)
            .filter(|(h, _)| **h > 0.0)
            .map(|(h, l)| (h * l).sqrt())
            .fold(1.0f64, |w, g| w.max(g.max(1.0 / g)));
        if worst < 1.1 {
            break;
        }
    }

    let ec: Vec<f64> = lp.c.iter().zip(&e).map(|(c, e)| c * e).collect();
    let cn = linalg::norm_inf(&ec);
    let sigma_c = if cn > 1e-6 { 1.0 / cn } else { 1.0 };
    let c: Vec<f64> = ec.iter().map(|v| v * sigma_c).collect();

    // b is brought to the same Euclidean norm as the scaled cost, which
    // keeps the two data columns of the homogeneous embedding balanced.
    let db: Vec<f64> = lp.b.iter().zip(&d).map(|(b, d)| b * d).collect();
    let bn = linalg::norm2(&db);
    let target = linalg::norm2(&c).max(1e-6);
    let sigma_b = if bn > 1e-6 { target / bn } else { 1.0 };
    let b: Vec<f64> = db.iter().map(|v| v * sigma_b).collect();

    let scaled = ConeLP { a, b, c, blocks: lp.blocks.clone(), offset: lp.offset };
    (scaled, Scaling { d, e, sigma_b, sigma_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relax::ConeBlock;
    use crate::sparse::CscMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_lp_with(rng: &mut ChaCha8Rng, exp_lo: i32, exp_hi: i32) -> ConeLP {
        let blocks = vec![ConeBlock::NonNeg(3), ConeBlock::Soc(3), ConeBlock::PsdSym(3)];
        let n: usize = blocks.iter().map(|b| b.len()).sum();
        let m = 5;
        let mut triplets = Vec::new();
        for row in 0..m {
            for col in 0..n {
                if rng.random_bool(0.5) {
                    // Badly scaled data on purpose; the entry magnitude is
                    // kept away from zero so each row's spread is governed
                    // by the exponent range alone.
                    let mag = 10f64.powi(rng.random_range(exp_lo..exp_hi));
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    triplets.push((row, col, mag * sign * rng.random_range(0.1..1.0)));
                }
            }
        }
        ConeLP {
            a: CscMatrix::from_triplets(m, n, &triplets),
            b: (0..m).map(|_| rng.random_range(-100.0..100.0)).collect(),
            c: (0..n).map(|_| rng.random_range(-0.01..0.01)).collect(),
            blocks,
            offset: 0.0,
        }
    }

    fn random_lp(rng: &mut ChaCha8Rng) -> ConeLP {
        random_lp_with(rng, -1, 2)
    }

    #[test]
    fn scaled_matrix_is_d_a_e_and_norms_improve() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let lp = random_lp(&mut rng);
            let (scaled, sc) = equilibrate(&lp, 10);
            // Entrywise agreement with diag(d) A diag(e).
            for (i, j, v) in lp.a.iter() {
                let got = scaled.a.get(i, j);
                assert!((got - v * sc.d[i] * sc.e[j]).abs() <= 1e-12 * v.abs().max(1.0));
            }
            for (i, (&sb, &b)) in scaled.b.iter().zip(&lp.b).enumerate() {
                assert!((sb - b * sc.d[i] * sc.sigma_b).abs() < 1e-12 * b.abs().max(1.0));
            }
            for (j, (&scj, &cj)) in scaled.c.iter().zip(&lp.c).enumerate() {
                assert!((scj - cj * sc.e[j] * sc.sigma_c).abs() < 1e-12);
            }
            // c peaks at one; b matches c's Euclidean norm.
            assert!((linalg::norm_inf(&scaled.c) - 1.0).abs() < 1e-12);
            assert!(
                (linalg::norm2(&scaled.b) - linalg::norm2(&scaled.c)).abs() < 1e-12
            );
            // Equilibration centers each row's magnitude range on one:
            // the geometric mean of its extreme entries lands near one
            // even when the spread itself is wide. Columns inside a
            // block share one scalar (the cone constrains them
            // together), so per-column norms are not individually
            // driven to one.
            let (rmax, rmin) = scaled.a.row_norm_extremes();
            for (h, l) in rmax.iter().zip(&rmin).filter(|(h, _)| **h > 0.0) {
                let g = (h * l).sqrt();
                assert!(g < 1.5 && g > 0.67, "row geometric mean {g}");
            }
        }
    }

    #[test]
    fn cumulative_factors_respect_the_clamp() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            // Spreads far beyond what [0.1, 10] factors can absorb.
            let lp = random_lp_with(&mut rng, -6, 7);
            let (scaled, sc) = equilibrate(&lp, 10);
            for f in sc.d.iter().chain(&sc.e) {
                assert!((0.1..=10.0).contains(f), "factor {f} escaped the clamp");
            }
            for (i, j, v) in lp.a.iter() {
                let got = scaled.a.get(i, j);
                assert!((got - v * sc.d[i] * sc.e[j]).abs() <= 1e-9 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn block_scalars_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let lp = random_lp(&mut rng);
        let (_, sc) = equilibrate(&lp, 10);
        for (start, blk) in lp.block_ranges() {
            let span = &sc.e[start..start + blk.len()];
            for v in span {
                assert_eq!(*v, span[0], "scaling differs within a block");
            }
        }
    }

    #[test]
    fn unscaling_restores_solution_relations() {
        // If (x~, y~, s~) satisfies the scaled KKT equalities, the
        // unscaled triple satisfies the original ones.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..5 {
            let lp = random_lp(&mut rng);
            let (scaled, sc) = equilibrate(&lp, 10);
            let n = lp.n_var();
            let xt: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let yt: Vec<f64> = (0..lp.n_row()).map(|_| rng.random_range(-1.0..1.0)).collect();
            // Scaled residuals, evaluated with the scaled data.
            let rp_t: Vec<f64> = scaled
                .a
                .mul_vec(&xt)
                .iter()
                .zip(&scaled.b)
                .map(|(ax, b)| ax - b)
                .collect();
            let mut st: Vec<f64> = scaled.c.clone();
            scaled.a.gemv_t(-1.0, &yt, &mut st);
            // s~ = c~ - A~' y~ makes the scaled dual residual zero.
            let x = sc.unscale_x(&xt);
            let y = sc.unscale_y(&yt);
            let s = sc.unscale_s(&st);
            // Original dual residual must vanish too.
            let mut dres: Vec<f64> = lp.c.iter().map(|v| -v).collect();
            lp.a.gemv_t(1.0, &y, &mut dres);
            for (k, v) in s.iter().enumerate() {
                dres[k] += v;
            }
            assert!(linalg::norm2(&dres) < 1e-9, "dual residual {}", linalg::norm2(&dres));
            // Original primal residual equals the unscaled version of the
            // scaled one: Ax - b = D^-1 (A~ x~ - b~) / sigma_b.
            let rp: Vec<f64> =
                lp.a.mul_vec(&x).iter().zip(&lp.b).map(|(ax, b)| ax - b).collect();
            for (i, v) in rp.iter().enumerate() {
                let want = rp_t[i] / (sc.d[i] * sc.sigma_b);
                assert!((v - want).abs() < 1e-9 * want.abs().max(1.0));
            }
        }
    }
}
