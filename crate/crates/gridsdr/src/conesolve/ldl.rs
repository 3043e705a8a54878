//! Sparse LDL' factorization and the projection-step linear system.
//!
//! One factorization of the quasidefinite matrix
//! `K = [[I, A'], [A, -I]]` (with static regularization on the diagonal)
//! serves every iteration; solves refine against the unregularized
//! system. The factorization is the classic up-looking row algorithm:
//! the pattern of each row of `L` is found by walking the elimination
//! tree, then a sparse triangular solve produces its values.

use crate::sparse::CscMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdlError {
    #[error("zero pivot encountered at column {0}")]
    ZeroPivot(usize),
}

/// `P K P' = L D L'` with unit lower-triangular `L` and diagonal `D`.
pub struct LdlFactor {
    n: usize,
    /// `perm[k]` is the original index of the k-th pivot.
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    /// Factors a symmetric matrix given by its upper triangle (diagonal
    /// included) under the given pivot order.
    pub fn factor(upper: &CscMatrix, perm: &[usize]) -> Result<Self, LdlError> {
        let n = upper.ncols();
        assert_eq!(upper.nrows(), n, "matrix must be square");
        assert_eq!(perm.len(), n);
        let mut pinv = vec![0usize; n];
        for (k, &orig) in perm.iter().enumerate() {
            pinv[orig] = k;
        }
        // Permuted upper triangle.
        let mut triplets = Vec::with_capacity(upper.nnz());
        for (i, j, v) in upper.iter() {
            debug_assert!(i <= j, "input must be upper triangular");
            let (a, b) = (pinv[i], pinv[j]);
            triplets.push((a.min(b), a.max(b), v));
        }
        let c = CscMatrix::from_triplets(n, n, &triplets);

        // Symbolic: elimination tree and column counts.
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (mut i, _) in c.col(k) {
                while i < k && flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // Numeric pass.
        let nnz_l = lp[n];
        let mut li = vec![0usize; nnz_l];
        let mut lx = vec![0.0; nnz_l];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut fill = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for (i0, v) in c.col(k) {
                if i0 > k {
                    continue;
                }
                y[i0] += v;
                let mut len = 0;
                let mut i = i0;
                while i < k && flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for t in top..n {
                let i = pattern[t];
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + fill[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                fill[i] += 1;
            }
            if d[k] == 0.0 {
                return Err(LdlError::ZeroPivot(k));
            }
        }
        Ok(LdlFactor { n, perm: perm.to_vec(), lp, li, lx, d })
    }

    /// Solves `K z = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mut z = vec![0.0; self.n];
        for k in 0..self.n {
            z[k] = b[self.perm[k]];
        }
        // L w = z.
        for j in 0..self.n {
            let zj = z[j];
            for p in self.lp[j]..self.lp[j + 1] {
                z[self.li[p]] -= self.lx[p] * zj;
            }
        }
        for j in 0..self.n {
            z[j] /= self.d[j];
        }
        // L' out = w.
        for j in (0..self.n).rev() {
            let mut acc = z[j];
            for p in self.lp[j]..self.lp[j + 1] {
                acc -= self.lx[p] * z[self.li[p]];
            }
            z[j] = acc;
        }
        for k in 0..self.n {
            b[self.perm[k]] = z[k];
        }
    }

    pub fn nnz(&self) -> usize {
        self.lx.len()
    }
}

/// Fill-reducing order for a symmetric matrix given by its upper
/// triangle. Falls back to the natural order if the ordering code
/// rejects the pattern.
pub fn amd_order_upper(upper: &CscMatrix) -> Vec<usize> {
    let n = upper.ncols();
    // Full symmetric adjacency, diagonal included (harmless for AMD and
    // keeps the entry count at least n, which its debug build insists on).
    let mut triplets = Vec::with_capacity(2 * upper.nnz());
    for (i, j, _) in upper.iter() {
        triplets.push((i, j, 1.0));
        if i != j {
            triplets.push((j, i, 1.0));
        }
    }
    let full = CscMatrix::from_triplets(n, n, &triplets);
    let colptr: Vec<i32> = full.colptr().iter().map(|&p| p as i32).collect();
    let rowind: Vec<i32> = full.rowind().iter().map(|&r| r as i32).collect();
    match amd::order::<i32>(n as i32, &colptr, &rowind, &amd::Control::default()) {
        Ok((p, _, _)) => p.into_iter().map(|v| v as usize).collect(),
        Err(_) => (0..n).collect(),
    }
}

/// Factored projection-step system for a fixed constraint matrix.
pub struct KktSolver {
    n: usize,
    m: usize,
    a: CscMatrix,
    factor: LdlFactor,
    delta: f64,
    refine_steps: usize,
}

impl KktSolver {
    pub fn new(a: &CscMatrix, delta: f64, refine_steps: usize) -> Result<Self, LdlError> {
        let (m, n) = (a.nrows(), a.ncols());
        let dim = n + m;
        let mut triplets = Vec::with_capacity(a.nnz() + dim);
        for k in 0..n {
            triplets.push((k, k, 1.0 + delta));
        }
        for k in 0..m {
            triplets.push((n + k, n + k, -(1.0 + delta)));
        }
        // A sits in the lower-left block, so its entries land in the
        // upper triangle as A'.
        for (i, j, v) in a.iter() {
            triplets.push((j, n + i, v));
        }
        let upper = CscMatrix::from_triplets(dim, dim, &triplets);
        let perm = amd_order_upper(&upper);
        let factor = LdlFactor::factor(&upper, &perm)?;
        Ok(KktSolver { n, m, a: a.clone(), factor, delta, refine_steps })
    }

    /// Solves `x - A' y = wx`, `A x + y = wy`, overwriting the inputs
    /// with `(x, y)`.
    ///
    /// Internally this is the symmetric system `K (x, -y) = (wx, wy)`
    /// with iterative refinement against the unregularized `K`.
    pub fn solve_in_place(&self, wx: &mut [f64], wy: &mut [f64]) {
        assert_eq!(wx.len(), self.n);
        assert_eq!(wy.len(), self.m);
        let mut rhs = vec![0.0; self.n + self.m];
        rhs[..self.n].copy_from_slice(wx);
        rhs[self.n..].copy_from_slice(wy);
        let mut z = rhs.clone();
        self.factor.solve_in_place(&mut z);
        for _ in 0..self.refine_steps {
            // Residual of the unregularized system.
            let mut r = rhs.clone();
            let (zx, zy) = z.split_at(self.n);
            for (k, v) in r[..self.n].iter_mut().enumerate() {
                *v -= zx[k];
            }
            self.a.gemv_t(-1.0, zy, &mut r[..self.n]);
            for (k, v) in r[self.n..].iter_mut().enumerate() {
                *v += zy[k];
            }
            self.a.gemv(-1.0, zx, &mut r[self.n..]);
            let norm = crate::linalg::norm_inf(&r);
            if norm < 1e-14 {
                break;
            }
            self.factor.solve_in_place(&mut r);
            for (zv, rv) in z.iter_mut().zip(&r) {
                *zv += rv;
            }
        }
        wx.copy_from_slice(&z[..self.n]);
        for (k, v) in wy.iter_mut().enumerate() {
            *v = -z[self.n + k];
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}
