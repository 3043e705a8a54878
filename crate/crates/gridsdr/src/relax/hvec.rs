//! Vectorizations of Hermitian and real symmetric matrices.
//!
//! Both codecs store the upper triangle column by column and scale
//! off-diagonal entries by sqrt(2), which makes packing an isometry:
//! `<pack(A), pack(B)> = tr(A' B)`. A Hermitian matrix of order `r` packs
//! into exactly `r*r` reals (one slot per diagonal entry, a real and an
//! imaginary slot per off-diagonal pair). A real symmetric matrix of order
//! `m` packs into `m*(m+1)/2` reals, the layout expected by PSD-triangle
//! cone implementations.

use num_complex::Complex64;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Packing of Hermitian matrices of a fixed order into real vectors.
///
/// Column `j` occupies slots `j*j .. (j+1)*(j+1)`: pairs
/// `(sqrt(2)*Re X[i,j], sqrt(2)*Im X[i,j])` for `i = 0..j`, then the real
/// diagonal entry `X[j,j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HvecCodec {
    order: usize,
}

impl HvecCodec {
    pub fn new(order: usize) -> Self {
        HvecCodec { order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order * self.order
    }

    pub fn is_empty(&self) -> bool {
        self.order == 0
    }

    /// Slot of the diagonal entry `(k, k)`.
    pub fn idx_diag(&self, k: usize) -> usize {
        debug_assert!(k < self.order);
        k * k + 2 * k
    }

    /// Slot of `sqrt(2)*Re X[i,j]` for `i < j`.
    pub fn idx_re(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.order);
        j * j + 2 * i
    }

    /// Slot of `sqrt(2)*Im X[i,j]` for `i < j`.
    pub fn idx_im(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.order);
        j * j + 2 * i + 1
    }

    /// Coefficient slots representing a single Hermitian matrix entry.
    ///
    /// Given entry `D[i,j] = d` of a Hermitian coefficient matrix (the
    /// mirrored entry `D[j,i] = conj(d)` is implied and must not be passed
    /// separately), returns the `(slot, value)` pairs of `pack(D)` it
    /// produces. Row vectors built this way satisfy
    /// `row . pack(X) = tr(D X)` for Hermitian `X`.
    pub fn entry_slots(&self, i: usize, j: usize, d: Complex64) -> Vec<(usize, f64)> {
        if i == j {
            debug_assert!(d.im.abs() <= 1e-12 * (1.0 + d.re.abs()), "diagonal entry must be real");
            vec![(self.idx_diag(i), d.re)]
        } else {
            let (i, j, d) = if i < j { (i, j, d) } else { (j, i, d.conj()) };
            vec![(self.idx_re(i, j), SQRT2 * d.re), (self.idx_im(i, j), SQRT2 * d.im)]
        }
    }

    pub fn pack(&self, x: &nalgebra::DMatrix<Complex64>) -> Vec<f64> {
        let r = self.order;
        assert_eq!(x.nrows(), r);
        assert_eq!(x.ncols(), r);
        let mut v = vec![0.0; self.len()];
        for j in 0..r {
            for i in 0..j {
                v[self.idx_re(i, j)] = SQRT2 * x[(i, j)].re;
                v[self.idx_im(i, j)] = SQRT2 * x[(i, j)].im;
            }
            v[self.idx_diag(j)] = x[(j, j)].re;
        }
        v
    }

    pub fn unpack(&self, v: &[f64]) -> nalgebra::DMatrix<Complex64> {
        let r = self.order;
        assert_eq!(v.len(), self.len());
        let mut x = nalgebra::DMatrix::from_element(r, r, Complex64::new(0.0, 0.0));
        for j in 0..r {
            for i in 0..j {
                let e = Complex64::new(v[self.idx_re(i, j)], v[self.idx_im(i, j)]) / SQRT2;
                x[(i, j)] = e;
                x[(j, i)] = e.conj();
            }
            x[(j, j)] = Complex64::new(v[self.idx_diag(j)], 0.0);
        }
        x
    }
}

/// Packing of real symmetric matrices of a fixed order.
///
/// Upper triangle, column major: slot of `(i, j)` with `i <= j` is
/// `j*(j+1)/2 + i`. Off-diagonal slots hold `sqrt(2)*X[i,j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvecCodec {
    order: usize,
}

impl SvecCodec {
    pub fn new(order: usize) -> Self {
        SvecCodec { order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order * (self.order + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.order == 0
    }

    /// Slot of entry `(i, j)`; arguments may be given in either order.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(j < self.order);
        j * (j + 1) / 2 + i
    }

    pub fn pack(&self, x: &nalgebra::DMatrix<f64>) -> Vec<f64> {
        let m = self.order;
        assert_eq!(x.nrows(), m);
        assert_eq!(x.ncols(), m);
        let mut v = vec![0.0; self.len()];
        for j in 0..m {
            for i in 0..j {
                v[self.idx(i, j)] = SQRT2 * x[(i, j)];
            }
            v[self.idx(j, j)] = x[(j, j)];
        }
        v
    }

    pub fn unpack(&self, v: &[f64]) -> nalgebra::DMatrix<f64> {
        let m = self.order;
        assert_eq!(v.len(), self.len());
        let mut x = nalgebra::DMatrix::zeros(m, m);
        for j in 0..m {
            for i in 0..j {
                let e = v[self.idx(i, j)] / SQRT2;
                x[(i, j)] = e;
                x[(j, i)] = e;
            }
            x[(j, j)] = v[self.idx(j, j)];
        }
        x
    }
}

#[cfg(test)]
pub mod test_support {
    use super::Complex64;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub fn random_hermitian(rng: &mut ChaCha8Rng, r: usize) -> DMatrix<Complex64> {
        let a = DMatrix::from_fn(r, r, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::random_hermitian;
    use super::*;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    fn herm_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a.adjoint() * b).trace().re
    }

    #[test]
    fn hvec_lengths_and_slots_are_a_bijection() {
        for r in 0..8 {
            let c = HvecCodec::new(r);
            assert_eq!(c.len(), r * r);
            let mut seen = vec![false; c.len()];
            for j in 0..r {
                for i in 0..j {
                    for s in [c.idx_re(i, j), c.idx_im(i, j)] {
                        assert!(!seen[s]);
                        seen[s] = true;
                    }
                }
                assert!(!seen[c.idx_diag(j)]);
                seen[c.idx_diag(j)] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn hvec_round_trip_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r = rng.random_range(1..9);
            let c = HvecCodec::new(r);
            let a = random_hermitian(&mut rng, r);
            let b = random_hermitian(&mut rng, r);
            let va = c.pack(&a);
            let vb = c.pack(&b);
            let back = c.unpack(&va);
            assert!((&a - &back).norm() < 1e-13);
            let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
            assert!((dot - herm_inner(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn entry_slots_reproduce_trace_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let r = rng.random_range(2..7);
            let c = HvecCodec::new(r);
            let x = random_hermitian(&mut rng, r);
            let vx = c.pack(&x);
            // Sparse Hermitian coefficient matrix with a handful of entries.
            let mut d = DMatrix::from_element(r, r, Complex64::new(0.0, 0.0));
            let mut row = vec![0.0; c.len()];
            for _ in 0..3 {
                let i = rng.random_range(0..r);
                let j = rng.random_range(0..r);
                let e = if i == j {
                    Complex64::new(rng.random_range(-1.0..1.0), 0.0)
                } else {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                };
                d[(i, j)] += e;
                if i != j {
                    d[(j, i)] += e.conj();
                }
                for (slot, v) in c.entry_slots(i, j, e) {
                    row[slot] += v;
                }
            }
            let via_row: f64 = row.iter().zip(&vx).map(|(a, b)| a * b).sum();
            let direct = (&d * &x).trace().re;
            assert!((via_row - direct).abs() < 1e-12, "{via_row} vs {direct}");
        }
    }

    #[test]
    fn svec_round_trip_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let m = rng.random_range(1..10);
            let c = SvecCodec::new(m);
            assert_eq!(c.len(), m * (m + 1) / 2);
            let a = random_symmetric(&mut rng, m);
            let b = random_symmetric(&mut rng, m);
            let va = c.pack(&a);
            let vb = c.pack(&b);
            assert!((&a - c.unpack(&va)).norm() < 1e-13);
            let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
            assert!((dot - (&a * &b).trace()).abs() < 1e-12);
        }
    }

    #[test]
    fn svec_ordering_matches_column_major_upper_triangle() {
        let c = SvecCodec::new(3);
        assert_eq!(c.idx(0, 0), 0);
        assert_eq!(c.idx(0, 1), 1);
        assert_eq!(c.idx(1, 1), 2);
        assert_eq!(c.idx(0, 2), 3);
        assert_eq!(c.idx(1, 2), 4);
        assert_eq!(c.idx(2, 2), 5);
        assert_eq!(c.idx(2, 0), 3);
    }
}
