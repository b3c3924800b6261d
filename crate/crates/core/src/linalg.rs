//! Small dense and tridiagonal linear algebra kernels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_BISECTION: usize = 256;
const INVERSE_ITERATIONS: usize = 4;

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::Shape(format!(
                "tridiagonal needs off.len() = diag.len() - 1, got {} and {}",
                off.len(),
                diag.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly less than `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let denom = if q.abs() < tiny { tiny.copysign(q) } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `rank`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, rank: usize) -> Result<f64> {
        let (mut lo, mut hi) = self.gershgorin();
        let span = hi - lo;
        lo -= 1e-12 * span.max(1.0);
        hi += 1e-12 * span.max(1.0);
        for _ in 0..MAX_BISECTION {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if self.count_below(mid) > rank {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            Ok(0.5 * (lo + hi))
        } else {
            Err(Error::Numerical {
                context: "tridiagonal bisection",
                iterations: MAX_BISECTION,
                detail: format!("bracket [{lo}, {hi}] did not collapse"),
            })
        }
    }

    /// Solves `(T - sigma I) x = b` by LU with partial pivoting.
    fn solve_shifted(&self, sigma: f64, b: &mut [f64]) {
        let n = self.len();
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let tiny = f64::EPSILON * scale;
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - sigma).collect();
        let mut dl = self.off.clone();
        let mut du = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        for i in 0..n.saturating_sub(1) {
            if swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - dl[i] * b[i];
            } else {
                b[i + 1] -= dl[i] * b[i];
            }
        }
        b[n - 1] /= d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
    }

    /// Eigenvector for eigenvalue `lambda` by inverse iteration, unit norm.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.len();
        // deterministic, non-symmetric start so no parity class is missed
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
            .collect();
        normalize(&mut x);
        for _ in 0..INVERSE_ITERATIONS {
            self.solve_shifted(lambda, &mut x);
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical {
                    context: "inverse iteration",
                    iterations: INVERSE_ITERATIONS,
                    detail: format!("non-finite iterate near eigenvalue {lambda}"),
                });
            }
            normalize(&mut x);
        }
        Ok(x)
    }

    /// The `count` largest eigenpairs, eigenvalues descending, vectors
    /// orthonormalized.
    pub fn top_eigenpairs(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.len();
        if count > n {
            return Err(Error::InvalidParameter(format!(
                "requested {count} eigenpairs of a {n}x{n} matrix"
            )));
        }
        let mut values = Vec::with_capacity(count);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        for j in 0..count {
            let lambda = self.eigenvalue(n - 1 - j)?;
            let mut v = self.eigenvector(lambda)?;
            for u in &vectors {
                let p = dot(u, &v);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
            normalize(&mut v);
            values.push(lambda);
            vectors.push(v);
        }
        Ok((values, vectors))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Least-squares solution with rank and conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// Ratio of extreme singular values of the column-equilibrated matrix.
    pub condition_number: f64,
    pub rank: usize,
    /// True when singular values were truncated; the solution is then the
    /// minimum-norm one in the equilibrated coordinates.
    pub rank_deficient: bool,
}

/// Minimizes `||a c - b||` through an SVD of the column-equilibrated matrix.
pub fn least_squares(a: &DMatrix<f64>, b: &[f64]) -> Result<LeastSquares> {
    let (rows, cols) = a.shape();
    if b.len() != rows {
        return Err(Error::Shape(format!(
            "design has {rows} rows but target has {} entries",
            b.len()
        )));
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("least-squares inputs".into()));
    }
    let scales: Vec<f64> = (0..cols)
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).iter_mut().for_each(|v| *v /= s);
    }
    let rhs = DVector::from_column_slice(b);
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = rows.max(cols) as f64 * f64::EPSILON * smax;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => {
            return Err(Error::Numerical {
                context: "least squares",
                iterations: 0,
                detail: "SVD factors unavailable".into(),
            })
        }
    };
    let utb = u.transpose() * &rhs;
    let mut y = DVector::zeros(sv.len());
    for i in 0..sv.len() {
        if sv[i] > tol {
            y[i] = utb[i] / sv[i];
        }
    }
    let x = vt.transpose() * y;
    let coefficients: Vec<f64> = x.iter().zip(&scales).map(|(v, s)| v / s).collect();
    let fitted = a * DVector::from_column_slice(&coefficients);
    let residual_norm = (rhs - fitted).norm();
    let condition_number = if smax == 0.0 { f64::INFINITY } else { smax / smin };
    Ok(LeastSquares {
        coefficients,
        residual_norm,
        condition_number,
        rank,
        rank_deficient: rank < cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(t: &SymTridiagonal) -> DMatrix<f64> {
        let n = t.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = t.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = t.off[i];
                m[(i + 1, i)] = t.off[i];
            }
        }
        m
    }

    #[test]
    fn tridiagonal_matches_dense_eigensolver() {
        let diag: Vec<f64> = (0..9).map(|i| (i as f64 - 3.7).powi(2)).collect();
        let off: Vec<f64> = (0..8).map(|i| 0.5 + i as f64 * 0.3).collect();
        let t = SymTridiagonal::new(diag, off).unwrap();
        let eig = dense(&t).symmetric_eigen();
        let mut reference: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        reference.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let (values, vectors) = t.top_eigenpairs(4).unwrap();
        for (j, (v, r)) in values.iter().zip(&reference).enumerate() {
            assert!((v - r).abs() < 1e-10, "eigenvalue {j}: {v} vs {r}");
            let x = DVector::from_column_slice(&vectors[j]);
            let resid = dense(&t) * &x - &x * *v;
            assert!(resid.norm() < 1e-9);
        }
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = [1.0, 3.0, 5.0, 7.0];
        let ls = least_squares(&a, &b).unwrap();
        assert!((ls.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((ls.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(ls.residual_norm < 1e-12);
        assert_eq!(ls.rank, 2);
        assert!(!ls.rank_deficient);
    }

    #[test]
    fn least_squares_flags_rank_deficiency() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let ls = least_squares(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert!(ls.rank_deficient);
        assert_eq!(ls.rank, 1);
        assert!(ls.residual_norm < 1e-10);
    }
}
