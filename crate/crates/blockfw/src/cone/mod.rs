//! The block factor-width-two cone `FW_{α,2}` and its dual.
//!
//! A matrix belongs to `FW_{α,2}` when it is a sum of PSD matrices, each
//! lifted from one pair of partition blocks. The dual cone consists of the
//! matrices whose every pair principal submatrix is PSD. Membership of the
//! primal cone is decided by projection (see [`project_fw`]); the projection
//! residual doubles as a separating certificate for non-members.

mod coarsen;
mod forest;
mod project;
mod sdd;

pub use coarsen::coarsen_decomposition;
pub use forest::sparse_forest_decompose;
pub use project::{project_fw, Projection};
pub use sdd::{check_dd, check_sdd, sdd_scaling_from_z, SddOutcome};

use crate::linalg::{dist_psd, project_psd, sym_eig, SymMatrix, PSD_REL_TOL};
use crate::partition::Partition;
use crate::{Error, Result};
use std::collections::BTreeMap;

/// Default sweep cap for the projection-based membership test.
pub const DEFAULT_MAX_SWEEPS: usize = 20_000;

/// A partition together with the PSD pair blocks realizing a sum-of-lifts
/// representation. Pairs with zero blocks may be omitted.
#[derive(Debug, Clone)]
pub struct FwDecomposition {
    alpha: Partition,
    blocks: BTreeMap<(usize, usize), SymMatrix>,
}

impl FwDecomposition {
    pub fn new(alpha: Partition) -> Self {
        FwDecomposition { alpha, blocks: BTreeMap::new() }
    }

    pub fn alpha(&self) -> &Partition {
        &self.alpha
    }

    /// Insert the block for pair `(i, j)`, `i < j`. The block dimension must
    /// equal `k_i + k_j`.
    pub fn insert_block(&mut self, i: usize, j: usize, x: SymMatrix) -> Result<()> {
        let p = self.alpha.block_count();
        if i >= j || j >= p {
            return Err(Error::InvalidDecomposition(format!(
                "pair ({i}, {j}) out of range for {p} blocks"
            )));
        }
        let want = self.alpha.sizes()[i] + self.alpha.sizes()[j];
        if x.n() != want {
            return Err(Error::InvalidDecomposition(format!(
                "block ({i}, {j}) has dimension {}, expected {want}",
                x.n()
            )));
        }
        self.blocks.insert((i, j), x);
        Ok(())
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&SymMatrix> {
        self.blocks.get(&(i, j))
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&(usize, usize), &SymMatrix)> {
        self.blocks.iter()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Sum of lifted pair blocks: the matrix this decomposition represents.
    pub fn recompose(&self) -> SymMatrix {
        let mut out = SymMatrix::zeros(self.alpha.n());
        for (&(i, j), x) in &self.blocks {
            out.add_lifted(x, &self.alpha.pair_indices(i, j));
        }
        out
    }

    /// Per-block minimum eigenvalues and the recomposition residual against
    /// `target`. Passes when every block eigenvalue is at least `-tol` and
    /// the residual is at most `tol * (1 + ||target||_F)`.
    pub fn validate(&self, target: &SymMatrix, tol: f64) -> Result<ValidationReport> {
        if target.n() != self.alpha.n() {
            return Err(Error::DimensionMismatch(format!(
                "target dimension {} vs partition dimension {}",
                target.n(),
                self.alpha.n()
            )));
        }
        let mut block_min_eigs = Vec::with_capacity(self.blocks.len());
        let mut worst = f64::INFINITY;
        for (&(i, j), x) in &self.blocks {
            let me = x.min_eig()?;
            worst = worst.min(me);
            block_min_eigs.push(((i, j), me));
        }
        if self.blocks.is_empty() {
            worst = 0.0;
        }
        let residual = self.recompose().sub(target).fro_norm();
        let passes = worst >= -tol && residual <= tol * (1.0 + target.fro_norm());
        Ok(ValidationReport { block_min_eigs, residual, passes })
    }
}

/// Outcome of [`FwDecomposition::validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub block_min_eigs: Vec<((usize, usize), f64)>,
    pub residual: f64,
    pub passes: bool,
}

/// Result of a dual-cone membership test.
#[derive(Debug, Clone)]
pub struct DualMembership {
    pub is_member: bool,
    /// Pair with the most negative minimum eigenvalue (absent when `p = 1`).
    pub worst_pair: Option<(usize, usize)>,
    pub worst_min_eig: f64,
}

/// Test `A ∈ (FW_{α,2})*`: every pair principal submatrix must be PSD within
/// `tol * (1 + ||A||_F)`. A single-block partition falls back to a plain PSD
/// test.
pub fn dual_membership(a: &SymMatrix, alpha: &Partition, tol: f64) -> Result<DualMembership> {
    if a.n() != alpha.n() {
        return Err(Error::DimensionMismatch(format!(
            "matrix dimension {} vs partition dimension {}",
            a.n(),
            alpha.n()
        )));
    }
    let threshold = -tol * (1.0 + a.fro_norm());
    if alpha.block_count() == 1 {
        let me = a.min_eig()?;
        return Ok(DualMembership { is_member: me >= threshold, worst_pair: None, worst_min_eig: me });
    }
    let mut worst = f64::INFINITY;
    let mut worst_pair = None;
    for (i, j) in alpha.pairs() {
        let sub = a.principal_submatrix(&alpha.pair_indices(i, j));
        let me = sub.min_eig()?;
        if me < worst {
            worst = me;
            worst_pair = Some((i, j));
        }
    }
    Ok(DualMembership { is_member: worst >= threshold, worst_pair, worst_min_eig: worst })
}

/// Membership status of the projection-based test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipStatus {
    Member,
    NonMember,
    Inconclusive,
}

/// Outcome of [`certify_membership`].
#[derive(Debug, Clone)]
pub struct MembershipResult {
    pub status: MembershipStatus,
    /// Valid decomposition when `status == Member` and `p >= 2`.
    pub decomposition: Option<FwDecomposition>,
    /// Dual-cone separator with `<Y, A> < 0` when `status == NonMember`.
    pub separator: Option<SymMatrix>,
    /// Final projection distance estimate.
    pub gap: f64,
}

/// Decide membership of `FW_{α,2}` by projecting onto the cone.
///
/// Member when the projection distance is at most `tol * (1 + ||A||_F)`, with
/// the realizing decomposition attached. Non-member when a verified dual-cone
/// separator proves the distance exceeds the tolerance. Inconclusive when the
/// distance lands inside the tolerance band or iterations run out.
pub fn certify_membership(a: &SymMatrix, alpha: &Partition, tol: f64) -> Result<MembershipResult> {
    certify_membership_with(a, alpha, tol, DEFAULT_MAX_SWEEPS)
}

/// [`certify_membership`] with an explicit sweep cap.
pub fn certify_membership_with(
    a: &SymMatrix,
    alpha: &Partition,
    tol: f64,
    max_sweeps: usize,
) -> Result<MembershipResult> {
    if a.n() != alpha.n() {
        return Err(Error::DimensionMismatch(format!(
            "matrix dimension {} vs partition dimension {}",
            a.n(),
            alpha.n()
        )));
    }
    let scale = 1.0 + a.fro_norm();
    let eff = tol * scale;

    if alpha.block_count() == 1 {
        // Degenerate single-block case: the cone is the full PSD cone. No
        // pair decomposition exists; report the PSD projection data instead.
        let gap = dist_psd(a)?;
        if gap <= eff {
            return Ok(MembershipResult {
                status: MembershipStatus::Member,
                decomposition: None,
                separator: None,
                gap,
            });
        }
        let y = project_psd(a)?.sub(a);
        return Ok(MembershipResult {
            status: MembershipStatus::NonMember,
            decomposition: None,
            separator: Some(y),
            gap,
        });
    }

    let mut state = project::DykstraState::new(a, alpha)?;
    let incr_tol = (1e-11 * scale).min(eff * 1e-2).max(1e-14 * scale);
    let mut sweeps = 0usize;
    let mut converged = false;
    let member = |state: &project::DykstraState| -> Result<Option<MembershipResult>> {
        let dec = state.best_decomposition();
        let report = dec.validate(a, tol.max(PSD_REL_TOL) * scale)?;
        if report.passes {
            Ok(Some(MembershipResult {
                status: MembershipStatus::Member,
                decomposition: Some(dec),
                separator: None,
                gap: state.best_dist(),
            }))
        } else {
            Ok(None)
        }
    };
    while sweeps < max_sweeps {
        state.sweep()?;
        sweeps += 1;
        // Interior members keep shrinking the distance; waiting for a tenth
        // of the tolerance keeps extracted certificates well inside their
        // slack. Boundary members exit through the convergence branch below.
        if state.best_dist() <= 0.1 * eff {
            if let Some(res) = member(&state)? {
                return Ok(res);
            }
        }
        if sweeps % 10 == 0 {
            if let Some(res) = try_separator(a, alpha, &state, eff)? {
                return Ok(res);
            }
        }
        if state.last_increment() <= incr_tol {
            converged = true;
            break;
        }
    }
    if converged {
        if state.best_dist() <= eff {
            if let Some(res) = member(&state)? {
                return Ok(res);
            }
        }
        if let Some(res) = try_separator(a, alpha, &state, eff)? {
            return Ok(res);
        }
    }
    Ok(MembershipResult {
        status: MembershipStatus::Inconclusive,
        decomposition: None,
        separator: None,
        gap: state.best_dist(),
    })
}

/// Attempt to certify non-membership from the current projection residual.
fn try_separator(
    a: &SymMatrix,
    alpha: &Partition,
    state: &project::DykstraState,
    eff: f64,
) -> Result<Option<MembershipResult>> {
    let (y, lower_bound) = state.separator_estimate()?;
    if lower_bound <= eff {
        return Ok(None);
    }
    let dm = dual_membership(&y, alpha, PSD_REL_TOL)?;
    let inner = y.inner(a);
    if dm.is_member && inner < -1e-8 * y.fro_norm() * a.fro_norm() {
        return Ok(Some(MembershipResult {
            status: MembershipStatus::NonMember,
            decomposition: None,
            separator: Some(y),
            gap: state.best_dist(),
        }));
    }
    Ok(None)
}

/// The per-block certificate of the scaled-dominance characterization: PSD
/// matrices `Z_ij` (`i ≠ j`, `Z_ij` of size `k_i`) with
///
/// 1. `A_ii ⪰ Σ_{j≠i} Z_ij` for every block `i`, and
/// 2. `[[Z_ij, A_ij], [A_ij^T, Z_ji]] ⪰ 0` for every pair `i < j`.
#[derive(Debug, Clone)]
pub struct CertificateZ {
    alpha: Partition,
    z: BTreeMap<(usize, usize), SymMatrix>,
    /// Relative slack the certificate was verified at; downstream
    /// constructions re-verify against this level.
    slack_rel: f64,
}

impl CertificateZ {
    /// Assemble a certificate from explicit blocks, declaring the relative
    /// slack it is expected to satisfy.
    pub fn new(alpha: Partition, z: BTreeMap<(usize, usize), SymMatrix>, slack_rel: f64) -> Self {
        CertificateZ { alpha, z, slack_rel }
    }

    pub fn alpha(&self) -> &Partition {
        &self.alpha
    }

    /// `Z_ij` for an ordered pair `i ≠ j`; absent entries are zero.
    pub fn z(&self, i: usize, j: usize) -> Option<&SymMatrix> {
        self.z.get(&(i, j))
    }

    fn z_or_zero(&self, i: usize, j: usize) -> SymMatrix {
        self.z
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| SymMatrix::zeros(self.alpha.sizes()[i]))
    }

    /// Extract the certificate from a decomposition of `a`: `Z_ij` is the
    /// leading diagonal sub-block of `X_ij` for `i < j` and the trailing one
    /// for `i > j`. Both certificate conditions are verified against `a`
    /// within `tol * (1 + ||a||_F)`.
    pub fn from_decomposition(dec: &FwDecomposition, a: &SymMatrix, tol: f64) -> Result<Self> {
        let alpha = dec.alpha().clone();
        if a.n() != alpha.n() {
            return Err(Error::DimensionMismatch("certificate target dimension".into()));
        }
        let mut z = BTreeMap::new();
        for (&(i, j), x) in dec.blocks() {
            let ki = alpha.sizes()[i];
            let kj = alpha.sizes()[j];
            let rows_i: Vec<usize> = (0..ki).collect();
            let rows_j: Vec<usize> = (ki..ki + kj).collect();
            z.insert((i, j), x.principal_submatrix(&rows_i));
            z.insert((j, i), x.principal_submatrix(&rows_j));
        }
        let cert = CertificateZ { alpha, z, slack_rel: tol };
        cert.verify(a, tol)?;
        Ok(cert)
    }

    /// Check both certificate conditions against `a`.
    pub fn verify(&self, a: &SymMatrix, tol: f64) -> Result<()> {
        let alpha = &self.alpha;
        let eff = tol * (1.0 + a.fro_norm());
        let p = alpha.block_count();
        for i in 0..p {
            let range: Vec<usize> = alpha.block_range(i).collect();
            let mut slack = a.principal_submatrix(&range);
            for j in 0..p {
                if j != i {
                    if let Some(zij) = self.z.get(&(i, j)) {
                        slack.add_assign_scaled(zij, -1.0);
                    }
                }
            }
            let me = slack.min_eig()?;
            if me < -eff {
                return Err(Error::InvalidCertificate(format!(
                    "diagonal slack of block {i} has min eigenvalue {me:.3e}"
                )));
            }
        }
        for (i, j) in alpha.pairs() {
            let ki = alpha.sizes()[i];
            let kj = alpha.sizes()[j];
            let zij = self.z_or_zero(i, j);
            let zji = self.z_or_zero(j, i);
            let ri: Vec<usize> = alpha.block_range(i).collect();
            let rj: Vec<usize> = alpha.block_range(j).collect();
            let mut pair = SymMatrix::zeros(ki + kj);
            for r in 0..ki {
                for c in 0..ki {
                    pair.add_at(r, c, if r <= c { zij.get(r, c) } else { 0.0 });
                }
            }
            for r in 0..kj {
                for c in 0..kj {
                    pair.add_at(ki + r, ki + c, if r <= c { zji.get(r, c) } else { 0.0 });
                }
            }
            for r in 0..ki {
                for c in 0..kj {
                    pair.add_at(r, ki + c, a.get(ri[r], rj[c]));
                }
            }
            let me = pair.min_eig()?;
            if me < -eff {
                return Err(Error::InvalidCertificate(format!(
                    "pair ({i}, {j}) condition has min eigenvalue {me:.3e}"
                )));
            }
        }
        Ok(())
    }
}

/// Certify membership and return the scaled-dominance certificate, or `None`
/// for non-members (and inconclusive projections propagate as errors).
pub fn theorem3_certificate(
    a: &SymMatrix,
    alpha: &Partition,
    tol: f64,
) -> Result<Option<CertificateZ>> {
    let res = certify_membership(a, alpha, tol)?;
    match res.status {
        MembershipStatus::Member => {
            if alpha.block_count() == 1 {
                return Ok(Some(CertificateZ::new(alpha.clone(), BTreeMap::new(), tol)));
            }
            let dec = res.decomposition.expect("member carries a decomposition");
            Ok(Some(CertificateZ::from_decomposition(&dec, a, tol.max(PSD_REL_TOL))?))
        }
        MembershipStatus::NonMember => Ok(None),
        MembershipStatus::Inconclusive => Err(Error::Inconclusive(format!(
            "projection gap {:.3e} inside the tolerance band",
            res.gap
        ))),
    }
}

/// Rebuild a decomposition from a certificate via the constructive direction:
/// `X_ij = [[Z_ij + Q_ii/(p-1), A_ij], [A_ij^T, Z_ji + Q_jj/(p-1)]]` with
/// `Q_ii = A_ii - Σ_j Z_ij`.
pub fn certificate_to_decomposition(cert: &CertificateZ, a: &SymMatrix) -> Result<FwDecomposition> {
    let alpha = cert.alpha().clone();
    let p = alpha.block_count();
    if p < 2 {
        return Err(Error::InvalidArgument(
            "constructive decomposition needs at least two blocks".into(),
        ));
    }
    if a.n() != alpha.n() {
        return Err(Error::DimensionMismatch("certificate target dimension".into()));
    }
    let rel = cert.slack_rel.max(PSD_REL_TOL);
    cert.verify(a, rel)?;
    let scale = 1.0 + a.fro_norm();
    let share = 1.0 / (p as f64 - 1.0);
    let mut slacks = Vec::with_capacity(p);
    for i in 0..p {
        let range: Vec<usize> = alpha.block_range(i).collect();
        let mut q = a.principal_submatrix(&range);
        for j in 0..p {
            if j != i {
                if let Some(zij) = cert.z(i, j) {
                    q.add_assign_scaled(zij, -1.0);
                }
            }
        }
        if q.min_eig()? < -rel * scale {
            return Err(Error::InvalidCertificate(format!("negative diagonal slack at block {i}")));
        }
        slacks.push(q);
    }
    let mut dec = FwDecomposition::new(alpha.clone());
    for (i, j) in alpha.pairs() {
        let ki = alpha.sizes()[i];
        let kj = alpha.sizes()[j];
        let ri: Vec<usize> = alpha.block_range(i).collect();
        let rj: Vec<usize> = alpha.block_range(j).collect();
        let zij = cert.z_or_zero(i, j);
        let zji = cert.z_or_zero(j, i);
        let mut x = SymMatrix::zeros(ki + kj);
        for r in 0..ki {
            for c in r..ki {
                x.set(r, c, zij.get(r, c) + share * slacks[i].get(r, c));
            }
        }
        for r in 0..kj {
            for c in r..kj {
                x.set(ki + r, ki + c, zji.get(r, c) + share * slacks[j].get(r, c));
            }
        }
        for r in 0..ki {
            for c in 0..kj {
                x.set(r, ki + c, a.get(ri[r], rj[c]));
            }
        }
        dec.insert_block(i, j, x)?;
    }
    Ok(dec)
}

/// Split any symmetric `X` as a difference of two cone members
/// `X = A - B` with `A = X + λI`, `B = λI`, and `λ` large enough that both
/// carry explicit certificates.
pub fn dc_split(x: &SymMatrix, alpha: &Partition) -> Result<(FwDecomposition, FwDecomposition)> {
    let p = alpha.block_count();
    if p < 2 {
        return Err(Error::InvalidArgument("dc split needs at least two blocks".into()));
    }
    if x.n() != alpha.n() {
        return Err(Error::DimensionMismatch("matrix vs partition dimension".into()));
    }
    // Certificate ansatz Z_ij = σ_ij I with σ_ij the spectral norm of the
    // off-diagonal block; λ then has to cover the per-block dominance gap.
    let mut sigma = BTreeMap::new();
    for (i, j) in alpha.pairs() {
        let ri: Vec<usize> = alpha.block_range(i).collect();
        let rj: Vec<usize> = alpha.block_range(j).collect();
        let mut gram = SymMatrix::zeros(ri.len());
        for r in 0..ri.len() {
            for c in r..ri.len() {
                let v: f64 = rj
                    .iter()
                    .map(|&col| x.get(ri[r], col) * x.get(ri[c], col))
                    .sum();
                gram.set(r, c, v);
            }
        }
        let (vals, _) = sym_eig(&gram)?;
        let s = vals.last().unwrap().max(0.0).sqrt();
        sigma.insert((i, j), s * (1.0 + 1e-12) + 1e-14);
    }
    let mut lambda = 0.0f64;
    for i in 0..p {
        let range: Vec<usize> = alpha.block_range(i).collect();
        let xii = x.principal_submatrix(&range);
        let sum_sigma: f64 = (0..p)
            .filter(|&j| j != i)
            .map(|j| sigma[&(i.min(j), i.max(j))])
            .sum();
        lambda = lambda.max(sum_sigma - xii.min_eig()?);
    }
    let lambda = lambda.max(0.0);

    let shifted = {
        let mut s = x.clone();
        for i in 0..x.n() {
            s.add_at(i, i, lambda);
        }
        s
    };
    let mut z = BTreeMap::new();
    for (i, j) in alpha.pairs() {
        let s = sigma[&(i, j)];
        z.insert((i, j), SymMatrix::identity(alpha.sizes()[i]).scaled(s));
        z.insert((j, i), SymMatrix::identity(alpha.sizes()[j]).scaled(s));
    }
    let cert_a = CertificateZ::new(alpha.clone(), z, PSD_REL_TOL);
    let dec_a = certificate_to_decomposition(&cert_a, &shifted)?;

    let mut dec_b = FwDecomposition::new(alpha.clone());
    if lambda > 0.0 {
        let cert_b = CertificateZ::new(alpha.clone(), BTreeMap::new(), PSD_REL_TOL);
        dec_b = certificate_to_decomposition(&cert_b, &SymMatrix::identity(x.n()).scaled(lambda))?;
    }
    Ok((dec_a, dec_b))
}
