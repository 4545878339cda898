//! Symmetric tridiagonal eigenproblems: Sturm-count bisection for selected
//! eigenvalues and inverse iteration for their vectors.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`
/// (`e.len() == d.len() - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Result<SymTridiag> {
        if d.is_empty() || e.len() + 1 != d.len() {
            return Err(Error::Convergence(
                "tridiagonal dimensions do not match".into(),
            ));
        }
        if d.iter().chain(&e).any(|v| !v.is_finite()) {
            return Err(Error::Convergence("non-finite matrix entry".into()));
        }
        Ok(SymTridiag { d, e })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let qq = if q.abs() < tiny { tiny.copysign(q) } else { q };
            q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / qq;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (zero-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(Error::Convergence(format!(
                "eigenvalue index {k} out of range"
            )));
        }
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Solves `(T - shift) x = rhs` by Gaussian elimination with partial
    /// pivoting. Exactly singular pivots are perturbed, as is customary for
    /// inverse iteration.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let perturb = f64::EPSILON * self.gershgorin().1.abs().max(1.0);
        if n == 1 {
            let p = self.d[0] - shift;
            return vec![rhs[0] / if p == 0.0 { perturb } else { p }];
        }
        // Each upper-triangular row has entries on columns i, i+1, i+2.
        let mut upper = vec![[0.0f64; 3]; n];
        let mut mult = vec![0.0; n - 1];
        let mut swap = vec![false; n - 1];
        let mut r = [self.d[0] - shift, self.e[0], 0.0];
        for i in 0..n - 1 {
            let next = [
                self.e[i],
                self.d[i + 1] - shift,
                if i + 2 < n { self.e[i + 1] } else { 0.0 },
            ];
            swap[i] = r[0].abs() < next[0].abs();
            let (pivot, other) = if swap[i] { (next, r) } else { (r, next) };
            let p0 = if pivot[0] == 0.0 { perturb } else { pivot[0] };
            let l = other[0] / p0;
            mult[i] = l;
            upper[i] = [p0, pivot[1], pivot[2]];
            r = [other[1] - l * pivot[1], other[2] - l * pivot[2], 0.0];
        }
        upper[n - 1] = [if r[0] == 0.0 { perturb } else { r[0] }, 0.0, 0.0];
        let mut x = rhs.to_vec();
        for i in 0..n - 1 {
            if swap[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= mult[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= upper[i][1] * x[i + 1];
            }
            if i + 2 < n {
                v -= upper[i][2] * x[i + 2];
            }
            x[i] = v / upper[i][0];
        }
        x
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.d[i] * v[i];
                if i > 0 {
                    s += self.e[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.e[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Unit eigenvector for `lambda` by inverse iteration, orthogonalized
    /// against `previous`.
    pub fn eigenvector(&self, lambda: f64, previous: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
            .collect();
        normalize(&mut v);
        for _ in 0..6 {
            let mut y = self.solve_shifted(lambda, &v);
            for p in previous {
                let proj = dot(p, &y);
                for (yi, pi) in y.iter_mut().zip(p) {
                    *yi -= proj * pi;
                }
            }
            if !normalize(&mut y) {
                return Err(Error::Convergence(format!(
                    "inverse iteration collapsed at λ = {lambda}"
                )));
            }
            let change = dot(&y, &v).abs();
            v = y;
            if (1.0 - change).abs() < 1e-15 {
                break;
            }
        }
        let resid: f64 = {
            let bv = self.matvec(&v);
            bv.iter()
                .zip(&v)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let (lo, hi) = self.gershgorin();
        if resid > 1e-6 * lo.abs().max(hi.abs()) {
            return Err(Error::Convergence(format!(
                "eigenvector residual {resid:e} at λ = {lambda}"
            )));
        }
        Ok(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> bool {
    let n = dot(v, v).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 50;
        let t = laplacian(n);
        for k in 0..n {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((t.eigenvalue(k).unwrap() - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn pivoted_solve() {
        let t = SymTridiag::new(vec![0.0, 1.0, 3.0, -2.0], vec![2.0, -1.0, 0.5]).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let b = t.matvec(&x);
        let y = t.solve_shifted(0.0, &b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let t = laplacian(40);
        let mut vs: Vec<Vec<f64>> = Vec::new();
        for k in 0..5 {
            let l = t.eigenvalue(k).unwrap();
            let v = t.eigenvector(l, &vs).unwrap();
            vs.push(v);
        }
        for i in 0..5 {
            for j in 0..5 {
                let d = dot(&vs[i], &vs[j]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
