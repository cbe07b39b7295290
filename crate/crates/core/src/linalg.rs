//! Complex LU factorizations with partial pivoting: banded (for the
//! Crank–Nicolson systems) and dense (small systems and test oracles).

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored in the
/// LAPACK `gbtrf` layout with `kl` extra rows reserved for pivoting fill.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![ZERO; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && i <= j + self.kl);
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    /// Sets `A[i, j]`; panics if `(i, j)` is outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(
            j <= i + self.ku && i <= j + self.kl,
            "entry ({i}, {j}) outside band (kl = {}, ku = {})",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if j > i + self.ku || i > j + self.kl {
            ZERO
        } else {
            self.ab[self.idx(i, j)]
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        Array2::from_shape_fn((self.n, self.n), |(i, j)| self.get(i, j))
    }

    /// Gaussian elimination with partial pivoting (`gbtf2`).
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.ab[self.idx(j, j)].norm();
            for i in j + 1..=last {
                let m = self.ab[self.idx(i, j)].norm();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { row: j, pivot: best });
            }
            ipiv[j] = p;
            let cmax = (j + ku + kl).min(n - 1);
            if p != j {
                for c in j..=cmax {
                    let (a, b) = (self.idx(j, c), self.idx(p, c));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.idx(j, j)];
            for i in j + 1..=last {
                let li = self.idx(i, j);
                let l = self.ab[li] / pivot;
                self.ab[li] = l;
                if l == ZERO {
                    continue;
                }
                for c in j + 1..=cmax {
                    let (ti, si) = (self.idx(i, c), self.idx(j, c));
                    let s = self.ab[si];
                    self.ab[ti] -= l * s;
                }
            }
        }
        Ok(BandedLu { lu: self, ipiv })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let a = &self.lu;
        let n = a.n;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != ZERO {
                for i in j + 1..=(j + a.kl).min(n - 1) {
                    b[i] -= a.ab[a.idx(i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= a.ab[a.idx(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(a.kl + a.ku)..j {
                b[i] -= a.ab[a.idx(i, j)] * bj;
            }
        }
    }
}

/// Dense LU with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: Array2<Complex64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: Array2<Complex64>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "dense LU needs a square matrix");
        let mut perm: Vec<usize> = (0..n).collect();
        for j in 0..n {
            let (p, best) = (j..n)
                .map(|i| (i, a[[i, j]].norm()))
                .fold((j, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { row: j, pivot: best });
            }
            if p != j {
                for c in 0..n {
                    a.swap([j, c], [p, c]);
                }
                perm.swap(j, p);
            }
            let pivot = a[[j, j]];
            for i in j + 1..n {
                let l = a[[i, j]] / pivot;
                a[[i, j]] = l;
                if l == ZERO {
                    continue;
                }
                for c in j + 1..n {
                    let s = a[[j, c]];
                    a[[i, c]] -= l * s;
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.nrows();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s / self.lu[[i, i]];
        }
        x
    }
}

/// Factorization used by the time steppers: banded for production grids,
/// dense below 64 unknowns.
#[derive(Debug, Clone)]
pub enum LinearSolver {
    Banded(BandedLu),
    Dense(DenseLu),
}

impl LinearSolver {
    pub const DENSE_BELOW: usize = 64;

    pub fn factor(m: BandedMatrix) -> Result<Self> {
        if m.n() < Self::DENSE_BELOW {
            Ok(Self::Dense(DenseLu::factor(m.to_dense())?))
        } else {
            Ok(Self::Banded(m.factor()?))
        }
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        match self {
            Self::Banded(lu) => lu.solve_in_place(b),
            Self::Dense(lu) => {
                let x = lu.solve(b);
                b.copy_from_slice(&x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    #[test]
    fn banded_matches_dense_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(12usize, 2usize, 1usize), (80, 1, 1), (40, 2, 3)] {
            let mut m = BandedMatrix::zeros(n, kl, ku);
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    // weak diagonal forces row interchanges
                    let v = if i == j { rand_c(&mut rng) * 0.1 } else { rand_c(&mut rng) };
                    m.set(i, j, v);
                }
            }
            let x: Vec<Complex64> = (0..n).map(|_| rand_c(&mut rng)).collect();
            let b = m.matvec(&x);
            let dense = DenseLu::factor(m.to_dense()).unwrap().solve(&b);
            let mut banded = b.clone();
            m.clone().factor().unwrap().solve_in_place(&mut banded);
            for i in 0..n {
                assert!((banded[i] - x[i]).norm() < 1e-9, "banded {i}");
                assert!((dense[i] - x[i]).norm() < 1e-9, "dense {i}");
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandedMatrix::zeros(5, 1, 1);
        assert!(matches!(m.factor(), Err(Error::Singular { row: 0, .. })));
        let d = Array2::<Complex64>::zeros((3, 3));
        assert!(DenseLu::factor(d).is_err());
    }
}
