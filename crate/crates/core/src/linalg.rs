//! Small dense linear algebra for stationary distributions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, p: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for (i, &pi) in p.iter().enumerate() {
            if pi == T::zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += pi * m;
            }
        }
        out
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Returns the solution and the ratio of largest to smallest pivot magnitude,
/// a cheap conditioning indicator.
pub fn solve_dense<T: Scalar>(mut a: Matrix<T>, mut b: Vec<T>) -> Result<(Vec<T>, T)> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::invalid("right-hand side length mismatch"));
    }
    let mut pmax = T::zero();
    let mut pmin = T::infinity();
    for k in 0..n {
        let (piv, best) = (k..n)
            .map(|i| (i, a.get(i, k).abs()))
            .fold((k, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(best > T::zero()) || !best.is_finite() {
            return Err(Error::numeric(format!(
                "singular system: zero pivot in column {k}, pivot ratio so far {}",
                pmax / pmin
            )));
        }
        pmax = pmax.max(best);
        pmin = pmin.min(best);
        if piv != k {
            for j in 0..n {
                a.data.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let d = a.get(k, k);
        for i in k + 1..n {
            let f = a.get(i, k) / d;
            if f == T::zero() {
                continue;
            }
            a.set(i, k, T::zero());
            for j in k + 1..n {
                let v = a.get(k, j);
                a.add(i, j, -f * v);
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a.get(i, j) * x[j];
        }
        x[i] = s / a.get(i, i);
    }
    let cond = pmax / pmin;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "non-finite solution, pivot ratio {cond}"
        )));
    }
    Ok((x, cond))
}

/// Stationary row vector of a row-stochastic matrix: one balance equation is
/// replaced by the normalization constraint and the system solved directly.
pub fn stationary_direct<T: Scalar>(p: &Matrix<T>) -> Result<Vec<T>> {
    let n = p.dim();
    let mut a = Matrix::zeros(n);
    // (P^T - I) pi = 0 with the last equation swapped for sum(pi) = 1
    for i in 0..n {
        for j in 0..n {
            a.set(j, i, p.get(i, j));
        }
        a.add(i, i, -T::one());
    }
    for j in 0..n {
        a.set(n - 1, j, T::one());
    }
    let mut b = vec![T::zero(); n];
    b[n - 1] = T::one();
    Ok(solve_dense(a, b)?.0)
}

/// Stationary vector by power iteration from the uniform distribution.
pub fn stationary_power<T: Scalar>(p: &Matrix<T>, tol: T, max_sweeps: usize) -> Result<Vec<T>> {
    let n = p.dim();
    let mut pi = vec![T::one() / T::from_usize(n).unwrap(); n];
    for _ in 0..max_sweeps {
        let next = p.left_mul(&pi);
        let diff = next
            .iter()
            .zip(&pi)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        pi = next;
        if diff <= tol {
            let s: T = pi.iter().copied().sum();
            return Ok(pi.into_iter().map(|v| v / s).collect());
        }
    }
    Err(Error::numeric("power iteration did not converge"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let mut a = Matrix::<f64>::zeros(3);
        let rows = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                a.set(i, j, *v);
            }
        }
        let (x, _) = solve_dense(a, vec![8.0, -11.0, -3.0]).unwrap();
        for (got, want) in x.iter().zip([2.0, 3.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn two_state_chain() {
        let mut p = Matrix::<f64>::zeros(2);
        p.set(0, 0, 0.9);
        p.set(0, 1, 0.1);
        p.set(1, 0, 0.5);
        p.set(1, 1, 0.5);
        let d = stationary_direct(&p).unwrap();
        let w = stationary_power(&p, 1e-15, 10_000).unwrap();
        assert!((d[0] - 5.0 / 6.0).abs() < 1e-14);
        assert!((w[0] - 5.0 / 6.0).abs() < 1e-12);
    }
}
