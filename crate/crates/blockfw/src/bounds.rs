//! Approximation-quality bounds for the pair-block cone: the closed-form
//! upper and lower distance bounds, the `G(a, b, n)` witness family, and the
//! lift-of-submatrices construction whose residual realizes the upper bound.

use crate::cone::{dual_membership, FwDecomposition};
use crate::linalg::{SymMatrix, PSD_REL_TOL};
use crate::partition::Partition;
use crate::{Error, Result};
use num_rational::Rational64;

/// Upper bound `(p-2)/p` on the normalized distance between the cone (or its
/// dual) and the PSD cone, exact as a rational.
pub fn upper_bound_dist(p: usize) -> Result<Rational64> {
    if p < 2 {
        return Err(Error::InvalidArgument("the bound needs at least two blocks".into()));
    }
    Ok(Rational64::new(p as i64 - 2, p as i64))
}

/// Lower bound `((p-2)/p) / sqrt(4n/p^2 - 4/p + 1)` on the normalized
/// distance between the dual cone and the PSD cone. Tight for homogeneous
/// partitions; evaluable for any `n`, asserted only when `p | n`.
pub fn lower_bound_dist(n: usize, p: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidArgument("the bound needs at least two blocks".into()));
    }
    let (nf, pf) = (n as f64, p as f64);
    Ok((pf - 2.0) / pf / (4.0 * nf / (pf * pf) - 4.0 / pf + 1.0).sqrt())
}

/// The family `G(a, b, n) = (a+b) I - a * ones(n, n)`, with eigenvalues
/// `b - (n-1)a` (once) and `b + a` (n-1 times).
pub fn g_matrix(a: f64, b: f64, n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| if i == j { b } else { -a })
}

/// Worst-case dual-cone witness for a homogeneous partition.
#[derive(Debug, Clone)]
pub struct WorstCaseWitness {
    pub matrix: SymMatrix,
    /// Its PSD distance, equal to the lower bound.
    pub distance: f64,
}

/// Unit-Frobenius-norm member of the dual cone achieving the homogeneous
/// lower bound: `G(a-hat, b-hat, n)` with `a-hat = 1/sqrt((a_max-1)^2 n +
/// n(n-1))`, `b-hat = (a_max-1) a-hat`, `a_max = 2n/p`.
pub fn worst_case_witness(n: usize, p: usize) -> Result<WorstCaseWitness> {
    if p < 2 {
        return Err(Error::InvalidArgument("need at least two blocks".into()));
    }
    if n % p != 0 {
        return Err(Error::InvalidArgument(format!(
            "witness needs a homogeneous partition; {p} does not divide {n}"
        )));
    }
    let nf = n as f64;
    let alpha_max = 2.0 * nf / p as f64;
    let a_hat = 1.0 / ((alpha_max - 1.0).powi(2) * nf + nf * (nf - 1.0)).sqrt();
    let b_hat = (alpha_max - 1.0) * a_hat;
    Ok(WorstCaseWitness { matrix: g_matrix(a_hat, b_hat, n), distance: (nf - alpha_max) * a_hat })
}

/// Outcome of the [`dual_hat`] construction.
#[derive(Debug, Clone)]
pub struct DualHat {
    /// Sum of lifted pair principal submatrices of the (normalized) input:
    /// a cone member with diagonal blocks scaled by `p-1`.
    pub m_hat: SymMatrix,
    /// Decomposition realizing `m_hat`.
    pub decomposition: FwDecomposition,
    /// `||M - (2/p) m_hat||_F = ((p-2)/p) ||M||_F`, an upper bound on the
    /// distance from `M` to the cone.
    pub residual: f64,
}

/// Build the cone member `M-hat = sum of lifted pair submatrices` for a
/// unit-norm dual-cone member `M` (normalized internally otherwise) and
/// report the distance bound its scaled version certifies.
pub fn dual_hat(m: &SymMatrix, alpha: &Partition) -> Result<DualHat> {
    if m.n() != alpha.n() {
        return Err(Error::DimensionMismatch("matrix vs partition dimension".into()));
    }
    let p = alpha.block_count();
    if p < 2 {
        return Err(Error::InvalidArgument("need at least two blocks".into()));
    }
    let dm = dual_membership(m, alpha, PSD_REL_TOL)?;
    if !dm.is_member {
        return Err(Error::InvalidArgument(format!(
            "input is not in the dual cone (worst pair eigenvalue {:.3e})",
            dm.worst_min_eig
        )));
    }
    let norm = m.fro_norm();
    let normalized = if (norm - 1.0).abs() <= 1e-12 || norm == 0.0 {
        m.clone()
    } else {
        m.scaled(1.0 / norm)
    };
    let mut dec = FwDecomposition::new(alpha.clone());
    for (i, j) in alpha.pairs() {
        let idx = alpha.pair_indices(i, j);
        dec.insert_block(i, j, normalized.principal_submatrix(&idx))?;
    }
    let m_hat = dec.recompose();
    let residual = normalized.sub(&m_hat.scaled(2.0 / p as f64)).fro_norm();
    Ok(DualHat { m_hat, decomposition: dec, residual })
}
