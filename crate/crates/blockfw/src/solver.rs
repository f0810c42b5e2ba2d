//! First-order operator-splitting solver for standard-primal conic programs
//! over products of PSD blocks:
//!
//! ```text
//! minimize    <C, X>
//! subject to  <A_i, X> = b_i,  i = 1..m
//!             X_b PSD for every block b
//! ```
//!
//! The splitting is over-relaxed ADMM between the affine subspace and the
//! cone: the affine step reuses a cached Cholesky factorization of the
//! constraint Gram matrix, the cone step is a per-block PSD projection, and
//! the penalty adapts on the primal/dual residual ratio. Constraint data is
//! Ruiz-equilibrated (per-constraint and per-block scalars, so cones are
//! preserved) before iterating and the scaling is undone on output.

use crate::linalg::{reconstruct, sym_eig, SymMatrix};
use crate::{Error, Result};
use rayon::prelude::*;

/// Standard-primal conic program data.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    block_sizes: Vec<usize>,
    objective: Vec<SymMatrix>,
    constraints: Vec<Constraint>,
}

/// One equality constraint: per-block data matrices and the right-hand side.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub data: Vec<SymMatrix>,
    pub rhs: f64,
}

impl ConicProgram {
    /// New program with the given PSD block sizes and per-block objective.
    pub fn new(block_sizes: Vec<usize>, objective: Vec<SymMatrix>) -> Result<Self> {
        if block_sizes.is_empty() || block_sizes.iter().any(|&d| d == 0) {
            return Err(Error::InvalidProgram("blocks must be nonempty and positive".into()));
        }
        if objective.len() != block_sizes.len()
            || objective.iter().zip(&block_sizes).any(|(c, &d)| c.n() != d)
        {
            return Err(Error::InvalidProgram("objective blocks do not match sizes".into()));
        }
        Ok(ConicProgram { block_sizes, objective, constraints: Vec::new() })
    }

    /// Feasibility program (zero objective).
    pub fn feasibility(block_sizes: Vec<usize>) -> Result<Self> {
        let objective = block_sizes.iter().map(|&d| SymMatrix::zeros(d)).collect();
        ConicProgram::new(block_sizes, objective)
    }

    pub fn add_constraint(&mut self, data: Vec<SymMatrix>, rhs: f64) -> Result<()> {
        if data.len() != self.block_sizes.len()
            || data.iter().zip(&self.block_sizes).any(|(a, &d)| a.n() != d)
        {
            return Err(Error::InvalidProgram("constraint blocks do not match sizes".into()));
        }
        if !rhs.is_finite() {
            return Err(Error::InvalidProgram("non-finite right-hand side".into()));
        }
        self.constraints.push(Constraint { data, rhs });
        Ok(())
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn objective(&self) -> &[SymMatrix] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Constraint count `m`.
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    /// `<C, X>` for a candidate block solution.
    pub fn objective_value(&self, blocks: &[SymMatrix]) -> f64 {
        self.objective.iter().zip(blocks).map(|(c, x)| c.inner(x)).sum()
    }
}

/// Termination status of [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    InfeasibleEvidence,
    UnboundedEvidence,
    MaxIters,
}

/// Solver output. `blocks` is the cone-exact iterate; `y` the equality
/// multipliers.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub blocks: Vec<SymMatrix>,
    pub y: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

/// Solver settings; `Default` matches the documented defaults.
#[derive(Debug, Clone)]
pub struct SolveSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iters: usize,
    pub threads: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings { eps_abs: 1e-6, eps_rel: 1e-6, max_iters: 50_000, threads: 1 }
    }
}

/// Exact residual evaluation for a candidate `(blocks, y)`:
/// `(primal residual, dual residual, objective)`.
///
/// The primal residual is `||A(X) - b||_2`; the dual residual is the
/// Frobenius distance of `C - A^*(y)` from the product PSD cone.
pub fn residuals(prog: &ConicProgram, blocks: &[SymMatrix], y: &[f64]) -> Result<(f64, f64, f64)> {
    if blocks.len() != prog.block_sizes.len()
        || blocks.iter().zip(&prog.block_sizes).any(|(x, &d)| x.n() != d)
        || y.len() != prog.m()
    {
        return Err(Error::InvalidArgument("candidate does not match the program".into()));
    }
    let mut pres_sq = 0.0f64;
    for c in &prog.constraints {
        let ax: f64 = c.data.iter().zip(blocks).map(|(a, x)| a.inner(x)).sum();
        pres_sq += (ax - c.rhs).powi(2);
    }
    let mut dres_sq = 0.0f64;
    for (b, cb) in prog.objective.iter().enumerate() {
        let mut s = cb.clone();
        for (c, &yi) in prog.constraints.iter().zip(y) {
            s.add_assign_scaled(&c.data[b], -yi);
        }
        // Distance of the dual slack from the PSD cone.
        let (vals, _) = sym_eig(&s)?;
        dres_sq += vals.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>();
    }
    Ok((pres_sq.sqrt(), dres_sq.sqrt(), prog.objective_value(blocks)))
}

// ---------------------------------------------------------------------------
// svec packing: block-wise scaled upper-triangle vectorization, so that
// <X, Y> = svec(X) . svec(Y).
// ---------------------------------------------------------------------------

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

fn svec_into(m: &SymMatrix, out: &mut [f64]) {
    let d = m.n();
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            out[k] = if i == j { m.get(i, j) } else { SQRT2 * m.get(i, j) };
            k += 1;
        }
    }
}

fn unsvec(v: &[f64], d: usize) -> SymMatrix {
    let mut m = SymMatrix::zeros(d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            m.set(i, j, if i == j { v[k] } else { v[k] / SQRT2 });
            k += 1;
        }
    }
    m
}

struct Packing {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl Packing {
    fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for &d in sizes {
            offsets.push(offsets.last().unwrap() + svec_len(d));
        }
        let total = *offsets.last().unwrap();
        Packing { sizes: sizes.to_vec(), offsets, total }
    }

    fn pack(&self, blocks: &[SymMatrix]) -> Vec<f64> {
        let mut out = vec![0.0; self.total];
        for (b, m) in blocks.iter().enumerate() {
            svec_into(m, &mut out[self.offsets[b]..self.offsets[b + 1]]);
        }
        out
    }

    fn unpack(&self, v: &[f64]) -> Vec<SymMatrix> {
        (0..self.sizes.len())
            .map(|b| unsvec(&v[self.offsets[b]..self.offsets[b + 1]], self.sizes[b]))
            .collect()
    }
}

/// Project each block of the packed vector onto the PSD cone; also returns
/// the norm of the clipped (negative) part.
fn project_blocks(pk: &Packing, v: &[f64], parallel: bool) -> Result<(Vec<f64>, f64)> {
    let proj_one = |b: usize| -> Result<(Vec<f64>, f64)> {
        let d = pk.sizes[b];
        let m = unsvec(&v[pk.offsets[b]..pk.offsets[b + 1]], d);
        let (vals, vecs) = sym_eig(&m)?;
        let clipped: Vec<f64> = vals.iter().map(|x| x.max(0.0)).collect();
        let neg_sq: f64 = vals.iter().map(|x| x.min(0.0).powi(2)).sum();
        let p = reconstruct(&clipped, &vecs);
        let mut out = vec![0.0; svec_len(d)];
        svec_into(&p, &mut out);
        Ok((out, neg_sq))
    };
    let results: Vec<Result<(Vec<f64>, f64)>> = if parallel {
        (0..pk.sizes.len()).into_par_iter().map(proj_one).collect()
    } else {
        (0..pk.sizes.len()).map(proj_one).collect()
    };
    let mut out = vec![0.0; pk.total];
    let mut neg_sq = 0.0;
    for (b, r) in results.into_iter().enumerate() {
        let (blockv, nsq) = r?;
        out[pk.offsets[b]..pk.offsets[b + 1]].copy_from_slice(&blockv);
        neg_sq += nsq;
    }
    Ok((out, neg_sq.sqrt()))
}

// ---------------------------------------------------------------------------
// Dense helpers for the constraint system.
// ---------------------------------------------------------------------------

fn mat_vec(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        out[r] = row.iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

fn mat_t_vec(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        let xr = x[r];
        if xr != 0.0 {
            for (o, p) in out.iter_mut().zip(row) {
                *o += xr * p;
            }
        }
    }
}

/// Dense Cholesky of an SPD matrix (row-major), with a jitter retry for
/// nearly rank-deficient constraint systems.
struct Chol {
    l: Vec<f64>,
    n: usize,
}

impl Chol {
    fn new(g: &[f64], n: usize) -> Result<Self> {
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for attempt in 0..2 {
            let jitter = if attempt == 0 { 0.0 } else { 1e-10 * (1.0 + scale) };
            let mut l = g.to_vec();
            let mut ok = true;
            for j in 0..n {
                let mut d = l[j * n + j] + jitter;
                for k in 0..j {
                    d -= l[j * n + k] * l[j * n + k];
                }
                if d <= 0.0 {
                    ok = false;
                    break;
                }
                let dj = d.sqrt();
                l[j * n + j] = dj;
                for i in (j + 1)..n {
                    let mut v = l[i * n + j];
                    for k in 0..j {
                        v -= l[i * n + k] * l[j * n + k];
                    }
                    l[i * n + j] = v / dj;
                }
            }
            if ok {
                for i in 0..n {
                    for j in (i + 1)..n {
                        l[i * n + j] = 0.0;
                    }
                }
                return Ok(Chol { l, n });
            }
        }
        Err(Error::Numeric("constraint Gram matrix is not positive definite".into()))
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.l[i * n + k] * x[k];
            }
            x[i] = v / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.l[k * n + i] * x[k];
            }
            x[i] = v / self.l[i * n + i];
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Ruiz equilibration on the collapsed constraint matrix.
// ---------------------------------------------------------------------------

struct Scaling {
    row: Vec<f64>,
    blk: Vec<f64>,
    beta: f64,
    tau: f64,
}

fn equilibrate(prog: &ConicProgram) -> Scaling {
    let m = prog.m();
    let nb = prog.block_sizes.len();
    let collapsed: Vec<f64> = prog
        .constraints
        .iter()
        .flat_map(|c| c.data.iter().map(|a| a.fro_norm()))
        .collect();
    let mut row = vec![1.0f64; m];
    let mut blk = vec![1.0f64; nb];
    for _ in 0..10 {
        for i in 0..m {
            let r = (0..nb).fold(0.0f64, |x, b| x.max(row[i] * blk[b] * collapsed[i * nb + b]));
            if r > 1e-12 {
                row[i] /= r.sqrt();
            }
        }
        for b in 0..nb {
            let c = (0..m).fold(0.0f64, |x, i| x.max(row[i] * blk[b] * collapsed[i * nb + b]));
            if c > 1e-12 {
                blk[b] /= c.sqrt();
            }
        }
    }
    let bnorm = prog
        .constraints
        .iter()
        .zip(&row)
        .map(|(c, &w)| (c.rhs * w).powi(2))
        .sum::<f64>()
        .sqrt();
    let beta = if bnorm > 1e-9 { bnorm } else { 1.0 };
    let cnorm = prog
        .objective
        .iter()
        .zip(&blk)
        .map(|(cb, &s)| (cb.fro_norm() * s).powi(2))
        .sum::<f64>()
        .sqrt();
    let tau = if cnorm > 1e-9 { 1.0 / cnorm } else { 1.0 };
    Scaling { row, blk, beta, tau }
}

/// Solve a conic program.
pub fn solve(prog: &ConicProgram, settings: &SolveSettings) -> Result<Solution> {
    if prog.m() == 0 {
        // No constraints: zero is optimal unless the objective has a descent
        // direction inside the cone.
        let blocks: Vec<SymMatrix> =
            prog.block_sizes.iter().map(|&d| SymMatrix::zeros(d)).collect();
        let unbounded = prog
            .objective
            .iter()
            .map(|c| sym_eig(c).map(|(vals, _)| vals[0]))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .any(|v| v < -1e-12);
        return Ok(Solution {
            status: if unbounded { SolveStatus::UnboundedEvidence } else { SolveStatus::Optimal },
            objective: 0.0,
            blocks,
            y: vec![],
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
        });
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads.max(1))
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    pool.install(|| solve_inner(prog, settings))
}

fn solve_inner(prog: &ConicProgram, settings: &SolveSettings) -> Result<Solution> {
    let parallel = settings.threads > 1;
    let pk = Packing::new(&prog.block_sizes);
    let m = prog.m();
    let dim = pk.total;
    let sc = equilibrate(prog);

    // Scaled data: A-hat_i,b = row_i blk_b A_i,b; b-hat = (row .* b)/beta;
    // c-hat_b = tau blk_b C_b.
    let mut amat = vec![0.0f64; m * dim];
    for (i, c) in prog.constraints.iter().enumerate() {
        let scaled_blocks: Vec<SymMatrix> = c
            .data
            .iter()
            .enumerate()
            .map(|(b, a)| a.scaled(sc.row[i] * sc.blk[b]))
            .collect();
        let packed = pk.pack(&scaled_blocks);
        amat[i * dim..(i + 1) * dim].copy_from_slice(&packed);
    }
    let bvec: Vec<f64> = prog
        .constraints
        .iter()
        .zip(&sc.row)
        .map(|(c, &w)| c.rhs * w / sc.beta)
        .collect();
    let cvec: Vec<f64> = {
        let scaled: Vec<SymMatrix> = prog
            .objective
            .iter()
            .enumerate()
            .map(|(b, cb)| cb.scaled(sc.tau * sc.blk[b]))
            .collect();
        pk.pack(&scaled)
    };

    // Gram matrix of the constraint rows, factored once.
    let mut gram = vec![0.0f64; m * m];
    for i in 0..m {
        for j in i..m {
            let gij: f64 = amat[i * dim..(i + 1) * dim]
                .iter()
                .zip(&amat[j * dim..(j + 1) * dim])
                .map(|(a, b)| a * b)
                .sum();
            gram[i * m + j] = gij;
            gram[j * m + i] = gij;
        }
    }
    let chol = Chol::new(&gram, m)?;

    let bnorm = bvec.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = cvec.iter().map(|v| v * v).sum::<f64>().sqrt();

    let relax = 1.6f64;
    let mut rho = 1.0f64;
    let mut x = vec![0.0f64; dim];
    let mut z = vec![0.0f64; dim];
    let mut u = vec![0.0f64; dim];
    let mut y;

    // Iterate histories for divergence certificates.
    let window = 100usize;
    let mut y_hist = vec![0.0f64; m];
    let mut x_hist = vec![0.0f64; dim];
    let mut stagnant_since = 0usize;
    let mut best_consensus = f64::INFINITY;

    let mut av = vec![0.0f64; m];
    let mut aty = vec![0.0f64; dim];
    let ac: Vec<f64> = (0..m)
        .map(|i| {
            amat[i * dim..(i + 1) * dim]
                .iter()
                .zip(&cvec)
                .map(|(a, c)| a * c)
                .sum()
        })
        .collect();

    let mut iters = 0usize;
    let mut status = SolveStatus::MaxIters;
    let mut y_final = vec![0.0f64; m];

    while iters < settings.max_iters {
        iters += 1;

        // Affine step: minimize <c,x> + rho/2 ||x - (z - u)||^2 on Ax = b.
        let v: Vec<f64> = z.iter().zip(&u).map(|(zi, ui)| zi - ui).collect();
        mat_vec(&amat, m, dim, &v, &mut av);
        let rhs: Vec<f64> = (0..m).map(|i| rho * (bvec[i] - av[i]) + ac[i]).collect();
        y = chol.solve(&rhs);
        mat_t_vec(&amat, m, dim, &y, &mut aty);
        for k in 0..dim {
            x[k] = v[k] + (aty[k] - cvec[k]) / rho;
        }

        // Over-relaxed cone step.
        let z_prev = z.clone();
        let mut w = vec![0.0f64; dim];
        for k in 0..dim {
            let xr = relax * x[k] + (1.0 - relax) * z[k];
            w[k] = xr + u[k];
        }
        let (z_new, _) = project_blocks(&pk, &w, parallel)?;
        z = z_new;
        for k in 0..dim {
            u[k] = w[k] - z[k];
        }

        let consensus = x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let dual_move =
            rho * z.iter().zip(&z_prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();

        if consensus < 0.9 * best_consensus {
            best_consensus = consensus;
            stagnant_since = 0;
        } else {
            stagnant_since += 1;
        }

        // Penalty adaptation on the residual ratio.
        if iters % 50 == 0 {
            let ratio = consensus / (dual_move + 1e-300);
            let mut new_rho = rho;
            if ratio > 10.0 {
                new_rho = (rho * 2.0).min(1e4);
            } else if ratio < 0.1 {
                new_rho = (rho / 2.0).max(1e-4);
            }
            if new_rho != rho {
                let f = rho / new_rho;
                for ui in u.iter_mut() {
                    *ui *= f;
                }
                rho = new_rho;
            }
        }

        y_final.copy_from_slice(&y);

        // Convergence check on the true (scaled) KKT residuals.
        if iters % 25 == 0 || iters == settings.max_iters {
            mat_vec(&amat, m, dim, &z, &mut av);
            let pres: f64 =
                av.iter().zip(&bvec).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let axnorm = av.iter().map(|v2| v2 * v2).sum::<f64>().sqrt();
            mat_t_vec(&amat, m, dim, &y_final, &mut aty);
            let slack: Vec<f64> = (0..dim).map(|k| cvec[k] - aty[k]).collect();
            // Dual infeasibility: the negative part of the slack c - A^*(y).
            let (_, dneg) = project_blocks(&pk, &slack, parallel)?;
            let atynorm = aty.iter().map(|v2| v2 * v2).sum::<f64>().sqrt();
            let pobj: f64 = cvec.iter().zip(&z).map(|(a, b)| a * b).sum();
            let dobj: f64 = bvec.iter().zip(&y_final).map(|(a, b)| a * b).sum();
            let eps_p = settings.eps_abs + settings.eps_rel * axnorm.max(bnorm);
            let eps_d = settings.eps_abs + settings.eps_rel * cnorm.max(atynorm);
            let eps_g =
                10.0 * (settings.eps_abs + settings.eps_rel * pobj.abs().max(dobj.abs()).max(1.0));
            if pres <= eps_p && dneg <= eps_d && (pobj - dobj).abs() <= eps_g {
                status = SolveStatus::Optimal;
                break;
            }
        }

        // Divergence certificates from normalized iterate differences.
        if iters % window == 0 {
            let dy: Vec<f64> = y_final.iter().zip(&y_hist).map(|(a, b)| a - b).collect();
            let dx: Vec<f64> = x.iter().zip(&x_hist).map(|(a, b)| a - b).collect();
            y_hist.copy_from_slice(&y_final);
            x_hist.copy_from_slice(&x);
            if iters >= 1000 && stagnant_since >= 200 {
                if let Some(st) =
                    check_divergence(&pk, &amat, m, dim, &bvec, &cvec, &dy, &dx, parallel)?
                {
                    status = st;
                    break;
                }
            }
        }
    }

    // Unscale: X_b = beta blk_b Z-hat_b ; y_i = row_i y-hat_i / tau.
    let blocks: Vec<SymMatrix> = pk
        .unpack(&z)
        .into_iter()
        .enumerate()
        .map(|(b, zb)| zb.scaled(sc.beta * sc.blk[b]))
        .collect();
    let y_out: Vec<f64> = y_final.iter().zip(&sc.row).map(|(yi, &w)| yi * w / sc.tau).collect();
    let (pres, dres, obj) = residuals(prog, &blocks, &y_out)?;
    Ok(Solution {
        status,
        blocks,
        y: y_out,
        objective: obj,
        primal_residual: pres,
        dual_residual: dres,
        iterations: iters,
    })
}

/// Farkas-style tests on normalized iterate differences. `dy` certifies
/// primal infeasibility when `A^*(dy)` is negative semidefinite blockwise
/// and `b^T dy > 0`; `dx` certifies unboundedness when it is an in-cone
/// descent direction in the constraint null space.
#[allow(clippy::too_many_arguments)]
fn check_divergence(
    pk: &Packing,
    amat: &[f64],
    m: usize,
    dim: usize,
    bvec: &[f64],
    cvec: &[f64],
    dy: &[f64],
    dx: &[f64],
    parallel: bool,
) -> Result<Option<SolveStatus>> {
    let dynorm = dy.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dynorm > 1e-12 {
        for sign in [1.0f64, -1.0] {
            let v: Vec<f64> = dy.iter().map(|a| sign * a / dynorm).collect();
            let btv: f64 = bvec.iter().zip(&v).map(|(a, b)| a * b).sum();
            if btv > 1e-7 {
                let mut atv = vec![0.0f64; dim];
                mat_t_vec(amat, m, dim, &v, &mut atv);
                // The positive part of A^*(v) must vanish for a certificate.
                let (pos_part, _) = project_blocks(pk, &atv, parallel)?;
                let posnorm = pos_part.iter().map(|t| t * t).sum::<f64>().sqrt();
                if posnorm <= 1e-6 * btv.max(1e-2) {
                    return Ok(Some(SolveStatus::InfeasibleEvidence));
                }
            }
        }
    }
    let dxnorm = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dxnorm > 1e-12 {
        let d: Vec<f64> = dx.iter().map(|a| a / dxnorm).collect();
        let ctd: f64 = cvec.iter().zip(&d).map(|(a, b)| a * b).sum();
        if ctd < -1e-7 {
            let mut ad = vec![0.0f64; m];
            mat_vec(amat, m, dim, &d, &mut ad);
            let adnorm = ad.iter().map(|v| v * v).sum::<f64>().sqrt();
            let (_, away) = project_blocks(pk, &d, parallel)?;
            // `away` is the clipped negative part: d has to lie in the cone.
            if adnorm <= 1e-6 * ctd.abs().max(1e-2) && away <= 1e-6 * ctd.abs().max(1e-2) {
                return Ok(Some(SolveStatus::UnboundedEvidence));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e11(n: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(n);
        m.set(0, 0, 1.0);
        m
    }

    #[test]
    fn min_trace_with_corner_pinned() {
        // min <I, X> s.t. X_11 = 1, X in S^2_+  =>  X = diag(1, 0), objective 1.
        let mut prog = ConicProgram::new(vec![2], vec![SymMatrix::identity(2)]).unwrap();
        prog.add_constraint(vec![e11(2)], 1.0).unwrap();
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 1.0).abs() <= 1e-5, "objective {}", sol.objective);
        assert!((sol.blocks[0].get(0, 0) - 1.0).abs() <= 1e-5);
        assert!(sol.blocks[0].get(1, 1).abs() <= 1e-5);
        assert!(sol.primal_residual <= 1e-5);
        assert!(sol.dual_residual <= 1e-5);
    }

    #[test]
    fn infeasible_sign_case() {
        // X_11 = -1 with X PSD is infeasible.
        let mut prog = ConicProgram::feasibility(vec![2]).unwrap();
        prog.add_constraint(vec![e11(2)], -1.0).unwrap();
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::InfeasibleEvidence);
    }

    #[test]
    fn unbounded_direction_detected() {
        // min -X_22 s.t. X_11 = 1: X_22 grows without bound.
        let mut c = SymMatrix::zeros(2);
        c.set(1, 1, -1.0);
        let mut prog = ConicProgram::new(vec![2], vec![c]).unwrap();
        prog.add_constraint(vec![e11(2)], 1.0).unwrap();
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::UnboundedEvidence);
    }

    #[test]
    fn residual_examples() {
        let mut prog = ConicProgram::new(vec![2], vec![SymMatrix::identity(2)]).unwrap();
        prog.add_constraint(vec![e11(2)], 1.0).unwrap();
        // Zero candidate: primal residual equals ||b||.
        let (p, _, obj) = residuals(&prog, &[SymMatrix::zeros(2)], &[0.0]).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(obj, 0.0);
        // Doubling a candidate doubles a linear objective.
        let x = SymMatrix::from_diag(&[1.0, 0.0]);
        let (_, _, o1) = residuals(&prog, &[x.clone()], &[0.0]).unwrap();
        let (_, _, o2) = residuals(&prog, &[x.scaled(2.0)], &[0.0]).unwrap();
        assert!((o2 - 2.0 * o1).abs() <= 1e-12);
    }

    #[test]
    fn solved_candidate_has_small_residuals() {
        let mut prog = ConicProgram::new(vec![2], vec![SymMatrix::identity(2)]).unwrap();
        prog.add_constraint(vec![e11(2)], 1.0).unwrap();
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        let (p, d, _) = residuals(&prog, &sol.blocks, &sol.y).unwrap();
        assert!(p <= 1e-5 && d <= 1e-5);
    }

    #[test]
    fn diagonal_sdp_matches_lp() {
        // Diagonal SDP = LP: min 2a + 3b s.t. a + b = 1, a,b >= 0 -> a = 1.
        let mut prog = ConicProgram::new(
            vec![1, 1],
            vec![SymMatrix::from_diag(&[2.0]), SymMatrix::from_diag(&[3.0])],
        )
        .unwrap();
        prog.add_constraint(
            vec![SymMatrix::from_diag(&[1.0]), SymMatrix::from_diag(&[1.0])],
            1.0,
        )
        .unwrap();
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 2.0).abs() <= 1e-5);
        assert!((sol.blocks[0].get(0, 0) - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn weak_duality_on_optimal() {
        let mut prog = ConicProgram::new(vec![3], vec![SymMatrix::identity(3)]).unwrap();
        let mut a1 = SymMatrix::zeros(3);
        a1.set(0, 1, 1.0);
        a1.set(2, 2, 1.0);
        prog.add_constraint(vec![a1], 2.0).unwrap();
        let mut a2 = SymMatrix::zeros(3);
        a2.set(0, 0, 1.0);
        a2.set(1, 1, 1.0);
        prog.add_constraint(vec![a2], 3.0).unwrap();
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let dual_obj: f64 = prog.rhs().iter().zip(&sol.y).map(|(b, y)| b * y).sum();
        assert!(sol.objective - dual_obj <= 10.0 * (1e-6 + 1e-6 * sol.objective.abs()) + 1e-6);
    }

    #[test]
    fn block_order_permutation_same_objective() {
        let mk = |flip: bool| {
            let (s1, s2) = if flip { (1usize, 2usize) } else { (2usize, 1usize) };
            let c1 = SymMatrix::identity(s1);
            let c2 = SymMatrix::identity(s2).scaled(2.0);
            let mut prog = ConicProgram::new(vec![s1, s2], vec![c1, c2]).unwrap();
            let mut a1 = SymMatrix::zeros(s1);
            a1.set(0, 0, 1.0);
            let mut a2 = SymMatrix::zeros(s2);
            a2.set(0, 0, 1.0);
            prog.add_constraint(vec![a1, a2], 1.0).unwrap();
            prog
        };
        let s1 = solve(&mk(false), &SolveSettings::default()).unwrap();
        let s2 = solve(&mk(true), &SolveSettings::default()).unwrap();
        assert!((s1.objective - s2.objective).abs() <= 1e-5);
    }

    #[test]
    fn deterministic_across_runs() {
        let mut prog = ConicProgram::new(vec![3], vec![SymMatrix::identity(3)]).unwrap();
        let mut a = SymMatrix::zeros(3);
        a.set(0, 0, 1.0);
        a.set(1, 2, -0.5);
        prog.add_constraint(vec![a], 1.5).unwrap();
        let s1 = solve(&prog, &SolveSettings::default()).unwrap();
        let s2 = solve(&prog, &SolveSettings::default()).unwrap();
        assert_eq!(s1.objective.to_bits(), s2.objective.to_bits());
        assert_eq!(s1.iterations, s2.iterations);
    }

    #[test]
    fn invalid_programs_rejected() {
        assert!(ConicProgram::new(vec![], vec![]).is_err());
        assert!(ConicProgram::new(vec![2], vec![SymMatrix::identity(3)]).is_err());
        let mut prog = ConicProgram::feasibility(vec![2]).unwrap();
        assert!(prog.add_constraint(vec![SymMatrix::identity(3)], 1.0).is_err());
        assert!(prog.add_constraint(vec![SymMatrix::identity(2)], f64::NAN).is_err());
    }
}
