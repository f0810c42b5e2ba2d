//! Dense symmetric linear algebra: the [`SymMatrix`] type, eigendecomposition,
//! PSD projection and distance, and a tolerance-aware Cholesky.
//!
//! The eigensolver is a Householder tridiagonalization followed by implicit
//! QL sweeps, accumulating the orthogonal transforms. Matrices in this crate
//! stay at desk scale (n ≲ 300), so no sparse or blocked paths exist.

use crate::{Error, Result};

/// Maximum absolute asymmetry accepted before a matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative tolerance under which a matrix counts as PSD:
/// `min_eig >= -PSD_REL_TOL * (1 + fro_norm)`.
pub const PSD_REL_TOL: f64 = 1e-8;

/// Dense real symmetric matrix with explicit dimension.
///
/// Stored row-major with both triangles kept exactly equal; every mutation
/// goes through [`SymMatrix::set`], which writes both `(i,j)` and `(j,i)`.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl std::fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "SymMatrix {}x{} [", self.n, self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{:.6}", self.get(i, j))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl SymMatrix {
    /// Zero matrix of dimension `n`.
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    /// Build from dense row-major data, validating finiteness and symmetry.
    ///
    /// Asymmetry up to [`SYMMETRY_TOL`] is symmetrized away; anything larger
    /// is rejected.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite entry {v}")));
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((data[i * n + j] - data[j * n + i]).abs());
            }
        }
        if worst > SYMMETRY_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix asymmetry {worst:.3e} exceeds {SYMMETRY_TOL:.0e}"
            )));
        }
        let mut m = SymMatrix { n, data };
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m.data[i * n + j] + m.data[j * n + i]);
                m.data[i * n + j] = avg;
                m.data[j * n + i] = avg;
            }
        }
        Ok(m)
    }

    /// Build by evaluating `f(i, j)` on the upper triangle and mirroring.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Set entry `(i, j)` and its mirror.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Add `v` to entry `(i, j)` and its mirror.
    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Trace inner product `<self, other>`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.n, other.n);
        SymMatrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.n, other.n);
        SymMatrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn add_assign(&mut self, other: &SymMatrix) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self += s * other`
    pub fn add_assign_scaled(&mut self, other: &SymMatrix, s: f64) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Whether every entry is zero.
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    /// Principal submatrix on the given (distinct) row/column indices.
    pub fn principal_submatrix(&self, rows: &[usize]) -> SymMatrix {
        let k = rows.len();
        let mut out = SymMatrix::zeros(k);
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in rows.iter().enumerate() {
                out.data[a * k + b] = self.get(i, j);
            }
        }
        out
    }

    /// Add `sub` lifted onto the given rows/columns: `self += E^T sub E`.
    pub fn add_lifted(&mut self, sub: &SymMatrix, rows: &[usize]) {
        debug_assert_eq!(sub.n, rows.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in rows.iter().enumerate() {
                self.data[i * self.n + j] += sub.data[a * sub.n + b];
            }
        }
    }

    /// Congruence `D * self * D` for a diagonal scaling `d`.
    pub fn diag_congruence(&self, d: &[f64]) -> SymMatrix {
        debug_assert_eq!(d.len(), self.n);
        SymMatrix::from_fn(self.n, |i, j| d[i] * self.get(i, j) * d[j])
    }

    /// Minimum eigenvalue.
    pub fn min_eig(&self) -> Result<f64> {
        Ok(sym_eig(self)?.0[0])
    }

    /// PSD test at the crate relative tolerance, optionally overridden.
    pub fn is_psd(&self, tol: Option<f64>) -> Result<bool> {
        let scale = 1.0 + self.fro_norm();
        let t = tol.unwrap_or(PSD_REL_TOL) * scale;
        Ok(self.min_eig()? >= -t)
    }
}

fn hypot(a: f64, b: f64) -> f64 {
    let (a, b) = (a.abs(), b.abs());
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == 0.0 {
        0.0
    } else {
        let r = lo / hi;
        hi * (1.0 + r * r).sqrt()
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns: `A = V diag(vals) V^T`.
pub fn sym_eig(a: &SymMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.n;
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in eigendecomposition input".into()));
    }
    if n == 1 {
        return Ok((vec![a.get(0, 0)], vec![vec![1.0]]));
    }
    if n == 2 {
        return Ok(sym_eig2(a.get(0, 0), a.get(0, 1), a.get(1, 1)));
    }

    // Householder reduction to tridiagonal form, accumulating transforms in z.
    let mut z: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).collect()).collect();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..i {
                scale += z[i][k].abs();
            }
            if scale == 0.0 {
                e[i] = z[i][l];
            } else {
                for k in 0..i {
                    z[i][k] /= scale;
                    h += z[i][k] * z[i][k];
                }
                let f = z[i][l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[i][l] = f - g;
                let mut f_acc = 0.0;
                for j in 0..i {
                    z[j][i] = z[i][j] / h;
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += z[j][k] * z[i][k];
                    }
                    for k in (j + 1)..i {
                        g_acc += z[k][j] * z[i][k];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * z[i][j];
                }
                let hh = f_acc / (h + h);
                for j in 0..i {
                    let f = z[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[j][k] -= f * e[k] + g * z[i][k];
                    }
                }
            }
        } else {
            e[i] = z[i][l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[i][k] * z[k][j];
                }
                for k in 0..i {
                    z[k][j] -= g * z[k][i];
                }
            }
        }
        d[i] = z[i][i];
        z[i][i] = 1.0;
        for j in 0..i {
            z[j][i] = 0.0;
            z[i][j] = 0.0;
        }
    }

    // Implicit QL with shifts on the tridiagonal (d, e), rotating z along.
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numeric("eigensolver failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = hypot(g, 1.0);
            let sign_r = if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0;
            let mut i = m as isize - 1;
            let mut underflow = false;
            while i >= l as isize {
                let iu = i as usize;
                let f = s * e[iu];
                let b = c * e[iu];
                r = hypot(f, g);
                e[iu + 1] = r;
                if r == 0.0 {
                    d[iu + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[iu + 1] - p;
                let t = (d[iu] - g) * s + 2.0 * c * b;
                p = s * t;
                d[iu + 1] = g + p;
                g = c * t - b;
                for row in z.iter_mut() {
                    let f = row[iu + 1];
                    row[iu + 1] = s * row[iu] + c * f;
                    row[iu] = c * row[iu] - s * f;
                }
                i -= 1;
            }
            if underflow && i >= l as isize {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // Sort ascending, permuting eigenvector columns.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vecs: Vec<Vec<f64>> = order.iter().map(|&c| (0..n).map(|r| z[r][c]).collect()).collect();
    Ok((vals, vecs))
}

/// Closed-form 2x2 symmetric eigendecomposition.
fn sym_eig2(a: f64, b: f64, c: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    if b == 0.0 {
        return if a <= c {
            (vec![a, c], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
        } else {
            (vec![c, a], vec![vec![0.0, 1.0], vec![1.0, 0.0]])
        };
    }
    let mean = 0.5 * (a + c);
    let delta = hypot(0.5 * (a - c), b);
    let lo = mean - delta;
    let hi = mean + delta;
    // Eigenvector for the larger eigenvalue; pick the better-conditioned form.
    let (x, y) = if (hi - a).abs() > (hi - c).abs() { (b, hi - a) } else { (hi - c, b) };
    let nrm = hypot(x, y);
    let (x, y) = (x / nrm, y / nrm);
    (vec![lo, hi], vec![vec![-y, x], vec![x, y]])
}

/// Rebuild `V diag(vals) V^T` from an eigendecomposition.
pub fn reconstruct(vals: &[f64], vecs: &[Vec<f64>]) -> SymMatrix {
    let n = vals.len();
    SymMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| vals[k] * vecs[k][i] * vecs[k][j]).sum()
    })
}

/// Nearest PSD matrix in Frobenius norm (eigenvalue clipping).
pub fn project_psd(a: &SymMatrix) -> Result<SymMatrix> {
    let (vals, vecs) = sym_eig(a)?;
    if vals[0] >= 0.0 {
        return Ok(a.clone());
    }
    let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    Ok(reconstruct(&clipped, &vecs))
}

/// Frobenius distance to the PSD cone: `sqrt(sum min(eig, 0)^2)`.
pub fn dist_psd(a: &SymMatrix) -> Result<f64> {
    let (vals, _) = sym_eig(a)?;
    Ok(vals.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>().sqrt())
}

/// Cholesky factorization of a nearly-PSD matrix.
///
/// Returns the lower-triangular `F` with `F F^T = A + shift*I`, `shift <= tol`,
/// or `None` when the minimum eigenvalue is below `-tol` (the matrix is
/// indefinite beyond the tolerance). `None` is a result, not an error, so the
/// function doubles as a PSD test.
pub fn cholesky_psd(a: &SymMatrix, tol: f64) -> Result<Option<Vec<Vec<f64>>>> {
    if tol < 0.0 {
        return Err(Error::InvalidArgument("negative tolerance".into()));
    }
    let n = a.n;
    let min_eig = a.min_eig()?;
    if min_eig < -tol {
        return Ok(None);
    }
    let shift = if min_eig < 0.0 {
        (-min_eig * (1.0 + 1e-6) + f64::EPSILON * (1.0 + a.fro_norm())).min(tol)
    } else {
        0.0
    };
    let mut l = vec![vec![0.0f64; n]; n];
    for j in 0..n {
        let mut diag = a.get(j, j) + shift;
        for k in 0..j {
            diag -= l[j][k] * l[j][k];
        }
        // Tiny negative pivots from rounding get clamped; the eigenvalue gate
        // above already rejected genuinely indefinite inputs.
        let diag = diag.max(0.0);
        l[j][j] = diag.sqrt();
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            l[i][j] = if l[j][j] > 0.0 { v / l[j][j] } else { 0.0 };
        }
    }
    Ok(Some(l))
}
