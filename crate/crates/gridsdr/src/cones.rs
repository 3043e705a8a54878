//! Euclidean projections onto the cone blocks and distances derived from
//! them.
//!
//! Every block type used here is self-dual, so the distance to the dual
//! cone equals the distance to the cone itself and one projection routine
//! serves both sides of the optimality conditions.

use crate::linalg;
use crate::relax::hvec::{HvecCodec, SvecCodec};
use crate::relax::ConeBlock;
use num_complex::Complex64;

/// Projects `x` onto the product cone described by `blocks`, in place.
pub fn project_into(blocks: &[ConeBlock], x: &mut [f64]) {
    let mut start = 0;
    for &blk in blocks {
        let end = start + blk.len();
        project_block(blk, &mut x[start..end]);
        start = end;
    }
    debug_assert_eq!(start, x.len(), "blocks must cover the vector");
}

/// Projection returning a fresh vector.
pub fn project(blocks: &[ConeBlock], x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    project_into(blocks, &mut out);
    out
}

/// Euclidean distance from `x` to the product cone.
pub fn distance(blocks: &[ConeBlock], x: &[f64]) -> f64 {
    let p = project(blocks, x);
    let mut sq = 0.0;
    for (a, b) in x.iter().zip(&p) {
        sq += (a - b) * (a - b);
    }
    sq.sqrt()
}

fn project_block(blk: ConeBlock, x: &mut [f64]) {
    match blk {
        ConeBlock::NonNeg(_) => {
            for v in x.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        ConeBlock::Soc(_) => project_soc(x),
        ConeBlock::PsdSym(m) => project_psd_sym(m, x),
        ConeBlock::PsdHerm(r) => project_psd_herm(r, x),
    }
}

/// Second-order cone `{(t, z) : |z|_2 <= t}`.
fn project_soc(x: &mut [f64]) {
    let (t, z) = x.split_first_mut().expect("SOC block is nonempty");
    let nz = linalg::norm2(z);
    if nz <= *t {
        return;
    }
    if nz <= -*t {
        *t = 0.0;
        z.fill(0.0);
        return;
    }
    let rho = 0.5 * (1.0 + *t / nz);
    *t = rho * nz;
    for v in z.iter_mut() {
        *v *= rho;
    }
}

fn project_psd_sym(m: usize, x: &mut [f64]) {
    let codec = SvecCodec::new(m);
    let mat = codec.unpack(x);
    let eig = nalgebra::SymmetricEigen::new(mat);
    let mut rebuilt = nalgebra::DMatrix::zeros(m, m);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let v = eig.eigenvectors.column(k);
            rebuilt.syger(lam, &v, &v, 1.0);
        }
    }
    // syger fills the lower triangle; mirror it.
    for i in 0..m {
        for j in i + 1..m {
            rebuilt[(i, j)] = rebuilt[(j, i)];
        }
    }
    x.copy_from_slice(&codec.pack(&rebuilt));
}

/// Hermitian PSD via a complex eigendecomposition: clamp negative
/// eigenvalues and rebuild `U diag(max(lam, 0)) U*`. Half the work of
/// going through the doubled real embedding.
fn project_psd_herm(r: usize, x: &mut [f64]) {
    let codec = HvecCodec::new(r);
    let eig = nalgebra::SymmetricEigen::new(codec.unpack(x));
    let mut rebuilt = nalgebra::DMatrix::<Complex64>::zeros(r, r);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let v = eig.eigenvectors.column(k);
            for j in 0..r {
                let w = v[j].conj() * lam;
                for i in 0..r {
                    rebuilt[(i, j)] += v[i] * w;
                }
            }
        }
    }
    // Rounding can leave stray imaginary parts on the diagonal; the
    // codec stores only the real part there, which is the projection
    // onto stored Hermitian form.
    x.copy_from_slice(&codec.pack(&rebuilt));
}
