//! Sum-of-squares layer: monomial bases, Gram-matrix equality assembly,
//! SOS / block-SDSOS program builders, certificate extraction, the natural
//! partition for polynomial-matrix problems, and the modified Broyden
//! benchmark generator.
//!
//! A polynomial `p` of degree `2d` is SOS exactly when `p = v^T Q v` for a
//! PSD Gram matrix `Q` over the monomial basis `v` of degree `<= d`. The
//! gamma-minimization `min γ : p + γ SOS` becomes `min Q_11` subject to the
//! non-constant coefficient equalities, since the constant monomial ties
//! `Q_11 = p_0 + γ`. Restricting `Q` to the pair-block cone for a partition
//! of the basis yields the block-SDSOS family.

use crate::linalg::{cholesky_psd, SymMatrix, PSD_REL_TOL};
use crate::partition::Partition;
use crate::reformulate::{to_block_fw_program, BlockFwProgram};
use crate::solver::{solve, ConicProgram, Solution, SolveSettings, SolveStatus};
use crate::{Error, Result};
use std::collections::{BTreeMap, HashMap};

/// Multivariate polynomial as an exponent-tuple → coefficient map.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialForm {
    n_vars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl PolynomialForm {
    pub fn zero(n_vars: usize) -> Self {
        PolynomialForm { n_vars, terms: BTreeMap::new() }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(&vec![0; n_vars], c).expect("constant term");
        p
    }

    /// The monomial `coeff * x_i^k`.
    pub fn monomial(n_vars: usize, var: usize, k: u32, coeff: f64) -> Result<Self> {
        if var >= n_vars {
            return Err(Error::InvalidArgument(format!("variable {var} out of range")));
        }
        let mut e = vec![0u32; n_vars];
        e[var] = k;
        let mut p = Self::zero(n_vars);
        p.add_term(&e, coeff)?;
        Ok(p)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Add `coeff` to the term with the given exponents; zero entries are
    /// pruned so the map never stores them.
    pub fn add_term(&mut self, exps: &[u32], coeff: f64) -> Result<()> {
        if exps.len() != self.n_vars {
            return Err(Error::InvalidArgument(format!(
                "exponent tuple length {} vs {} variables",
                exps.len(),
                self.n_vars
            )));
        }
        if !coeff.is_finite() {
            return Err(Error::Numeric("non-finite coefficient".into()));
        }
        let entry = self.terms.entry(exps.to_vec()).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(exps);
        }
        Ok(())
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum total degree (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| e.iter().sum::<u32>() as usize).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn add(&self, other: &PolynomialForm) -> Result<PolynomialForm> {
        if self.n_vars != other.n_vars {
            return Err(Error::InvalidArgument("variable count mismatch".into()));
        }
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e, *c)?;
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> PolynomialForm {
        let mut out = PolynomialForm { n_vars: self.n_vars, terms: BTreeMap::new() };
        for (e, c) in &self.terms {
            if c * s != 0.0 {
                out.terms.insert(e.clone(), c * s);
            }
        }
        out
    }

    pub fn mul(&self, other: &PolynomialForm) -> Result<PolynomialForm> {
        if self.n_vars != other.n_vars {
            return Err(Error::InvalidArgument("variable count mismatch".into()));
        }
        let mut out = PolynomialForm::zero(self.n_vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(&e, ca * cb)?;
            }
        }
        Ok(out)
    }

    pub fn square(&self) -> PolynomialForm {
        self.mul(self).expect("same variable count")
    }

    /// Largest absolute coefficient difference to another polynomial.
    pub fn max_coeff_diff(&self, other: &PolynomialForm) -> f64 {
        let mut worst = 0.0f64;
        for (e, c) in &self.terms {
            worst = worst.max((c - other.coeff(e)).abs());
        }
        for (e, c) in &other.terms {
            worst = worst.max((c - self.coeff(e)).abs());
        }
        worst
    }
}

/// Ordered monomial basis of total degree at most `d`: graded, with the
/// constant first and earlier variables taking precedence inside a degree.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    n_vars: usize,
    half_degree: usize,
    monomials: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

fn monomials_of_degree(n_vars: usize, deg: u32) -> Vec<Vec<u32>> {
    // Lexicographically descending: the first variable takes as much of the
    // degree as possible, matching the listing 1, x1, ..., xn, x1^2, x1 x2, ...
    fn rec(prefix: &mut Vec<u32>, left: usize, rem: u32, out: &mut Vec<Vec<u32>>) {
        if left == 1 {
            prefix.push(rem);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=rem).rev() {
            prefix.push(k);
            rec(prefix, left - 1, rem - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n_vars, deg, &mut out);
    out
}

fn monomials_up_to(n_vars: usize, d: usize) -> Vec<Vec<u32>> {
    (0..=d as u32).flat_map(|deg| monomials_of_degree(n_vars, deg)).collect()
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Monomial basis of `n_vars` variables up to degree `d`.
pub fn monomial_basis(n_vars: usize, d: usize) -> Result<MonomialBasis> {
    if n_vars == 0 {
        return Err(Error::InvalidArgument("need at least one variable".into()));
    }
    let monomials = monomials_up_to(n_vars, d);
    debug_assert_eq!(monomials.len(), binomial(n_vars + d, d));
    let index = monomials.iter().enumerate().map(|(k, e)| (e.clone(), k)).collect();
    Ok(MonomialBasis { n_vars, half_degree: d, monomials, index })
}

impl MonomialBasis {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn half_degree(&self) -> usize {
        self.half_degree
    }

    /// Basis size `N = C(n + d, d)`.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u32>] {
        &self.monomials
    }

    pub fn position(&self, exps: &[u32]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    /// Evaluate every basis monomial at a point.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.monomials
            .iter()
            .map(|e| e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product())
            .collect()
    }
}

/// One coefficient-matching equality: the Gram positions whose basis product
/// equals `monomial`, paired with the target coefficient.
#[derive(Debug, Clone)]
pub struct GramEquality {
    pub monomial: Vec<u32>,
    /// Upper-triangle positions `(s, t)`, `s <= t`.
    pub positions: Vec<(usize, usize)>,
    pub coeff: f64,
}

impl GramEquality {
    /// Data matrix realizing the equality as `<A, Q> = coeff`.
    pub fn data_matrix(&self, n: usize) -> SymMatrix {
        let mut a = SymMatrix::zeros(n);
        for &(s, t) in &self.positions {
            a.set(s, t, 1.0);
        }
        a
    }
}

/// Coefficient-matching equalities for `p = v^T Q v`: one per monomial of
/// degree `<= 2d`, including zero-coefficient ones.
pub fn gram_equalities(poly: &PolynomialForm, basis: &MonomialBasis) -> Result<Vec<GramEquality>> {
    if poly.n_vars() != basis.n_vars() {
        return Err(Error::InvalidArgument("variable count mismatch".into()));
    }
    if poly.degree() > 2 * basis.half_degree() {
        return Err(Error::InvalidArgument(format!(
            "polynomial degree {} exceeds basis degree {}",
            poly.degree(),
            2 * basis.half_degree()
        )));
    }
    let mut positions: BTreeMap<Vec<u32>, Vec<(usize, usize)>> = BTreeMap::new();
    let n = basis.len();
    for s in 0..n {
        for t in s..n {
            let prod: Vec<u32> = basis.monomials()[s]
                .iter()
                .zip(&basis.monomials()[t])
                .map(|(a, b)| a + b)
                .collect();
            positions.entry(prod).or_default().push((s, t));
        }
    }
    let out = monomials_up_to(basis.n_vars(), 2 * basis.half_degree())
        .into_iter()
        .map(|mono| {
            let pos = positions.remove(&mono).unwrap_or_default();
            let coeff = poly.coeff(&mono);
            GramEquality { monomial: mono, positions: pos, coeff }
        })
        .collect();
    Ok(out)
}

/// Whether a Gram matrix satisfies the equalities, checked by sampling
/// `v(x)^T Q v(x)` against the polynomial at random points.
pub fn gram_matches_poly(
    q: &SymMatrix,
    poly: &PolynomialForm,
    basis: &MonomialBasis,
    points: &[Vec<f64>],
    tol: f64,
) -> bool {
    points.iter().all(|x| {
        let v = basis.eval(x);
        let quad: f64 = (0..v.len())
            .map(|s| (0..v.len()).map(|t| q.get(s, t) * v[s] * v[t]).sum::<f64>())
            .sum();
        let target = poly.eval(x);
        (quad - target).abs() <= tol * (1.0 + target.abs().max(quad.abs()))
    })
}

/// A gamma-minimization program: `min γ` with `p(x) + γ` certified over the
/// chosen cone. The optimizer's objective equals `p_0 + γ`, so
/// [`SosGammaProgram::gamma_from_objective`] recovers γ.
#[derive(Debug, Clone)]
pub struct SosGammaProgram {
    pub program: ConicProgram,
    pub basis: MonomialBasis,
    /// Constant coefficient of the target polynomial.
    pub const_coeff: f64,
    /// Partition of the Gram basis; `None` for the full SOS (PSD) program.
    pub alpha: Option<Partition>,
    /// Pair order of the block program (empty for full SOS).
    pub pairs: Vec<(usize, usize)>,
}

impl SosGammaProgram {
    pub fn gamma_from_objective(&self, objective: f64) -> f64 {
        objective - self.const_coeff
    }

    /// Solve and return `(γ, solution)`.
    pub fn solve_gamma(&self, settings: &SolveSettings) -> Result<(f64, Solution)> {
        let sol = solve(&self.program, settings)?;
        if sol.status != SolveStatus::Optimal {
            return Err(Error::Numeric(format!(
                "gamma program did not reach optimality: {:?} after {} iterations",
                sol.status, sol.iterations
            )));
        }
        Ok((self.gamma_from_objective(sol.objective), sol))
    }

    /// Reconstruct the Gram matrix from a solution of this program.
    pub fn gram_from_solution(&self, sol: &Solution) -> Result<SymMatrix> {
        match &self.alpha {
            None => Ok(sol.blocks[0].clone()),
            Some(alpha) => {
                let bf = BlockFwProgram {
                    program: self.program.clone(),
                    alpha: alpha.clone(),
                    pairs: self.pairs.clone(),
                };
                bf.lift(&sol.blocks)
            }
        }
    }
}

/// Build `min γ : p + γ SOS` as a single-PSD-block program (`min Q_11`
/// subject to the non-constant coefficient equalities).
pub fn build_sos_program(poly: &PolynomialForm) -> Result<SosGammaProgram> {
    if poly.degree() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "odd degree {}: no sum of squares exists",
            poly.degree()
        )));
    }
    let d = poly.degree() / 2;
    let basis = monomial_basis(poly.n_vars(), d)?;
    let n = basis.len();
    let mut objective = SymMatrix::zeros(n);
    objective.set(0, 0, 1.0);
    let mut program = ConicProgram::new(vec![n], vec![objective])?;
    let const_mono = vec![0u32; poly.n_vars()];
    for eq in gram_equalities(poly, &basis)? {
        if eq.monomial == const_mono {
            continue;
        }
        program.add_constraint(vec![eq.data_matrix(n)], eq.coeff)?;
    }
    Ok(SosGammaProgram {
        program,
        basis,
        const_coeff: poly.coeff(&const_mono),
        alpha: None,
        pairs: vec![],
    })
}

/// Restrict the Gram matrix of [`build_sos_program`] to `FW_{α,2}` for a
/// partition of the basis; the trivial partition reproduces plain SDSOS.
pub fn build_alpha_sdsos_program(
    poly: &PolynomialForm,
    alpha: &Partition,
) -> Result<SosGammaProgram> {
    let gram = build_sos_program(poly)?;
    if alpha.n() != gram.basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} but the Gram basis has {} monomials",
            alpha.n(),
            gram.basis.len()
        )));
    }
    let bf = to_block_fw_program(&gram.program, alpha)?;
    Ok(SosGammaProgram {
        program: bf.program,
        basis: gram.basis,
        const_coeff: gram.const_coeff,
        alpha: Some(alpha.clone()),
        pairs: bf.pairs,
    })
}

/// One extracted square `(f^T m(x))^2`: coefficients over an explicit subset
/// of basis monomials.
#[derive(Debug, Clone)]
pub struct SquareTerm {
    /// Pair of partition blocks the square came from.
    pub pair: (usize, usize),
    /// Basis positions of the pair's monomial subvector.
    pub monomial_indices: Vec<usize>,
    pub coeffs: Vec<f64>,
}

/// Factor each PSD pair block of a Gram decomposition into explicit squared
/// linear combinations of basis monomials.
pub fn extract_certificate(
    dec: &crate::cone::FwDecomposition,
    basis: &MonomialBasis,
) -> Result<Vec<SquareTerm>> {
    if dec.alpha().n() != basis.len() {
        return Err(Error::DimensionMismatch(
            "decomposition partition does not cover the basis".into(),
        ));
    }
    let mut out = Vec::new();
    for (&(i, j), block) in dec.blocks() {
        let idx = dec.alpha().pair_indices(i, j);
        let tol = PSD_REL_TOL * (1.0 + block.fro_norm());
        let f = cholesky_psd(block, tol)?.ok_or_else(|| {
            Error::InvalidDecomposition(format!("pair ({i}, {j}) block is indefinite"))
        })?;
        let k = block.n();
        for t in 0..k {
            let coeffs: Vec<f64> = (0..k).map(|r| f[r][t]).collect();
            if coeffs.iter().any(|c| *c != 0.0) {
                out.push(SquareTerm { pair: (i, j), monomial_indices: idx.clone(), coeffs });
            }
        }
    }
    Ok(out)
}

/// Expand a list of squares back into a polynomial.
pub fn expand_certificate(terms: &[SquareTerm], basis: &MonomialBasis) -> Result<PolynomialForm> {
    let mut total = PolynomialForm::zero(basis.n_vars());
    for term in terms {
        let mut lin = PolynomialForm::zero(basis.n_vars());
        for (&pos, &c) in term.monomial_indices.iter().zip(&term.coeffs) {
            if c != 0.0 {
                lin.add_term(&basis.monomials()[pos], c)?;
            }
        }
        total = total.add(&lin.square())?;
    }
    Ok(total)
}

/// Symmetric matrix of polynomials.
#[derive(Debug, Clone)]
pub struct PolyMatrix {
    r: usize,
    n_vars: usize,
    entries: Vec<PolynomialForm>,
}

impl PolyMatrix {
    /// Build from row-major entries; symmetry is enforced coefficientwise.
    pub fn new(r: usize, n_vars: usize, entries: Vec<PolynomialForm>) -> Result<Self> {
        if entries.len() != r * r {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries, got {}",
                r * r,
                entries.len()
            )));
        }
        if entries.iter().any(|p| p.n_vars() != n_vars) {
            return Err(Error::InvalidArgument("inconsistent variable counts".into()));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                if entries[i * r + j].max_coeff_diff(&entries[j * r + i]) > 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(PolyMatrix { r, n_vars, entries })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn get(&self, i: usize, j: usize) -> &PolynomialForm {
        &self.entries[i * self.r + j]
    }

    pub fn max_degree(&self) -> usize {
        self.entries.iter().map(|p| p.degree()).max().unwrap_or(0)
    }
}

/// The Gram feasibility programs for certifying `P(x) + shift * I` as an SOS
/// matrix over the Kronecker basis.
#[derive(Debug, Clone)]
pub struct MatrixSosProgram {
    /// Single-block feasibility program for the full SOS relaxation
    /// (Gram size `r * N`).
    pub sos: ConicProgram,
    /// The natural partition `(N, ..., N)` (r copies).
    pub natural: Partition,
    pub basis: MonomialBasis,
    pub r: usize,
    pub shift: f64,
}

impl MatrixSosProgram {
    /// Pair-block restriction of the Gram feasibility program.
    pub fn block_program(&self, alpha: &Partition) -> Result<BlockFwProgram> {
        to_block_fw_program(&self.sos, alpha)
    }

    /// Block program under the natural partition.
    pub fn natural_block_program(&self) -> Result<BlockFwProgram> {
        self.block_program(&self.natural.clone())
    }
}

/// Build the Gram feasibility program for `P(x) + shift * I`: equalities
/// match the coefficients of `y^T (P + shift I) y` in the Kronecker variables
/// (only terms quadratic in `y` occur, so the Gram matrix is indexed by
/// `(matrix row, basis monomial)` directly).
pub fn matrix_sos_program(pm: &PolyMatrix, shift: f64) -> Result<MatrixSosProgram> {
    let two_d = pm.max_degree();
    if two_d % 2 != 0 {
        return Err(Error::InvalidArgument("entries must have even maximum degree".into()));
    }
    let d = two_d / 2;
    let basis = monomial_basis(pm.n_vars(), d)?;
    let n = basis.len();
    let r = pm.r();
    let dim = r * n;
    let mut program = ConicProgram::feasibility(vec![dim])?;
    let const_mono = vec![0u32; pm.n_vars()];

    // Product lookup: positions (s, t) of the scalar basis per monomial.
    let mut products: BTreeMap<Vec<u32>, Vec<(usize, usize)>> = BTreeMap::new();
    for s in 0..n {
        for t in 0..n {
            let prod: Vec<u32> =
                basis.monomials()[s].iter().zip(&basis.monomials()[t]).map(|(a, b)| a + b).collect();
            products.entry(prod).or_default().push((s, t));
        }
    }

    for i in 0..r {
        for j in i..r {
            for mono in monomials_up_to(pm.n_vars(), two_d) {
                let mut a = SymMatrix::zeros(dim);
                for &(s, t) in products.get(&mono).map(|v| v.as_slice()).unwrap_or(&[]) {
                    let (u, v) = (i * n + s, j * n + t);
                    if u == v {
                        a.add_at(u, u, 1.0);
                    } else {
                        a.add_at(u, v, 0.5);
                    }
                }
                let mut rhs = pm.get(i, j).coeff(&mono);
                if i == j && mono == const_mono {
                    rhs += shift;
                }
                program.add_constraint(vec![a], rhs)?;
            }
        }
    }
    let natural = Partition::new(vec![n; r])?;
    Ok(MatrixSosProgram { sos: program, natural, basis, r, shift })
}

/// The modified Broyden tridiagonal polynomial with the appended
/// `(Σ x_i)^2` coupling term; degree 4, nonnegative by construction.
pub fn broyden_poly(n_vars: usize) -> Result<PolynomialForm> {
    if n_vars < 2 {
        return Err(Error::InvalidArgument("the benchmark needs at least two variables".into()));
    }
    let term = |i: usize, prev: Option<usize>, next: Option<usize>| -> Result<PolynomialForm> {
        // (3 - 2 x_i) x_i - x_prev - 2 x_next + 1
        let mut t = PolynomialForm::monomial(n_vars, i, 1, 3.0)?;
        t = t.add(&PolynomialForm::monomial(n_vars, i, 2, -2.0)?)?;
        if let Some(pv) = prev {
            t = t.add(&PolynomialForm::monomial(n_vars, pv, 1, -1.0)?)?;
        }
        if let Some(nx) = next {
            t = t.add(&PolynomialForm::monomial(n_vars, nx, 1, -2.0)?)?;
        }
        t = t.add(&PolynomialForm::constant(n_vars, 1.0))?;
        Ok(t)
    };
    let mut q = term(0, None, Some(1))?.square();
    for i in 1..n_vars - 1 {
        q = q.add(&term(i, Some(i - 1), Some(i + 1))?.square())?;
    }
    q = q.add(&term(n_vars - 1, Some(n_vars - 2), None)?.square())?;
    let mut sum = PolynomialForm::zero(n_vars);
    for i in 0..n_vars {
        sum = sum.add(&PolynomialForm::monomial(n_vars, i, 1, 1.0)?)?;
    }
    q.add(&sum.square())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn poly_1var(pairs: &[(u32, f64)]) -> PolynomialForm {
        let mut p = PolynomialForm::zero(1);
        for &(e, c) in pairs {
            p.add_term(&[e], c).unwrap();
        }
        p
    }

    #[test]
    fn basis_counts_and_order() {
        assert_eq!(monomial_basis(3, 2).unwrap().len(), 10);
        assert_eq!(monomial_basis(2, 2).unwrap().len(), 6);
        let b = monomial_basis(1, 3).unwrap();
        assert_eq!(b.monomials(), &[vec![0], vec![1], vec![2], vec![3]]);
        // Graded order with the constant first, then x1, x2, x1^2, x1 x2, ...
        let b = monomial_basis(2, 2).unwrap();
        assert_eq!(
            b.monomials(),
            &[vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
    }

    #[test]
    fn gram_equalities_x_squared() {
        let p = poly_1var(&[(2, 1.0)]);
        let basis = monomial_basis(1, 1).unwrap();
        let eqs = gram_equalities(&p, &basis).unwrap();
        // Monomials 1, x, x^2.
        assert_eq!(eqs.len(), 3);
        let x2 = eqs.iter().find(|e| e.monomial == vec![2]).unwrap();
        assert_eq!(x2.positions, vec![(1, 1)]);
        assert_eq!(x2.coeff, 1.0);
        let q = SymMatrix::from_diag(&[0.0, 1.0]);
        let pts: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64 / 7.0 - 1.0]).collect();
        assert!(gram_matches_poly(&q, &p, &basis, &pts, 1e-8));
    }

    #[test]
    fn gram_equalities_sum_square() {
        // p = (x + y)^2 over basis (1, x, y).
        let mut p = PolynomialForm::zero(2);
        p.add_term(&[2, 0], 1.0).unwrap();
        p.add_term(&[1, 1], 2.0).unwrap();
        p.add_term(&[0, 2], 1.0).unwrap();
        let basis = monomial_basis(2, 1).unwrap();
        let q = SymMatrix::from_rows(
            3,
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pts: Vec<Vec<f64>> =
            (0..20).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        assert!(gram_matches_poly(&q, &p, &basis, &pts, 1e-8));
        // And the equality data agrees coefficientwise.
        for eq in gram_equalities(&p, &basis).unwrap() {
            let got: f64 = eq
                .positions
                .iter()
                .map(|&(s, t)| if s == t { q.get(s, t) } else { 2.0 * q.get(s, t) })
                .sum();
            assert!((got - eq.coeff).abs() <= 1e-12, "monomial {:?}", eq.monomial);
        }
    }

    #[test]
    fn gram_equalities_constant() {
        let p = poly_1var(&[(0, 5.0)]);
        let basis = monomial_basis(1, 1).unwrap();
        let eqs = gram_equalities(&p, &basis).unwrap();
        let c = eqs.iter().find(|e| e.monomial == vec![0]).unwrap();
        assert_eq!(c.positions, vec![(0, 0)]);
        assert_eq!(c.coeff, 5.0);
    }

    #[test]
    fn degree_overflow_rejected() {
        let p = poly_1var(&[(4, 1.0)]);
        let basis = monomial_basis(1, 1).unwrap();
        assert!(gram_equalities(&p, &basis).is_err());
        assert!(build_sos_program(&poly_1var(&[(3, 1.0)])).is_err());
    }

    #[test]
    fn sos_gamma_x_squared_is_zero() {
        let prog = build_sos_program(&poly_1var(&[(2, 1.0)])).unwrap();
        let (gamma, _) = prog.solve_gamma(&SolveSettings::default()).unwrap();
        assert!(gamma.abs() <= 1e-5, "gamma = {gamma}");
    }

    #[test]
    fn sos_gamma_quartic_cases() {
        // (x^2 - 1)^2 = x^4 - 2x^2 + 1: already SOS with minimum 0.
        let p = poly_1var(&[(4, 1.0), (2, -2.0), (0, 1.0)]);
        let prog = build_sos_program(&p).unwrap();
        let (gamma, _) = prog.solve_gamma(&SolveSettings::default()).unwrap();
        assert!(gamma.abs() <= 1e-4, "gamma = {gamma}");

        // x^4 - x^2: minimum -1/4, achieved by an SOS certificate.
        let p = poly_1var(&[(4, 1.0), (2, -1.0)]);
        let prog = build_sos_program(&p).unwrap();
        let (gamma, sol) = prog.solve_gamma(&SolveSettings::default()).unwrap();
        assert!((gamma - 0.25).abs() <= 1e-4, "gamma = {gamma}");
        // The Gram matrix reproduces p + gamma at sample points.
        let q = prog.gram_from_solution(&sol).unwrap();
        let target = p.add(&PolynomialForm::constant(1, gamma)).unwrap();
        let pts: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64 / 6.0 - 1.5]).collect();
        assert!(gram_matches_poly(&q, &target, &prog.basis, &pts, 1e-4));
    }

    #[test]
    fn alpha_sdsos_two_block_matches_sos() {
        let p = poly_1var(&[(4, 1.0), (2, -1.0)]);
        // Basis has N = 3 monomials; two-block partition equals full SOS.
        let alpha = Partition::new(vec![2, 1]).unwrap();
        let prog = build_alpha_sdsos_program(&p, &alpha).unwrap();
        let (gamma, _) = prog.solve_gamma(&SolveSettings::default()).unwrap();
        assert!((gamma - 0.25).abs() <= 1e-4, "gamma = {gamma}");
    }

    #[test]
    fn alpha_sdsos_partition_mismatch_rejected() {
        let p = poly_1var(&[(2, 1.0)]);
        let alpha = Partition::new(vec![2, 2]).unwrap();
        assert!(build_alpha_sdsos_program(&p, &alpha).is_err());
    }

    #[test]
    fn certificate_identity_gram() {
        // Q = I over basis (1, x): certificate 1^2 + x^2.
        let basis = monomial_basis(1, 1).unwrap();
        let alpha = Partition::new(vec![1, 1]).unwrap();
        let mut dec = crate::cone::FwDecomposition::new(alpha);
        dec.insert_block(0, 1, SymMatrix::identity(2)).unwrap();
        let terms = extract_certificate(&dec, &basis).unwrap();
        assert_eq!(terms.len(), 2);
        let expanded = expand_certificate(&terms, &basis).unwrap();
        assert_eq!(expanded.coeff(&[0]), 1.0);
        assert_eq!(expanded.coeff(&[2]), 1.0);
    }

    #[test]
    fn certificate_rank_one_square() {
        // Gram of (x + y)^2 concentrated on the (x, y) block.
        let basis = monomial_basis(2, 1).unwrap();
        let alpha = Partition::new(vec![1, 1, 1]).unwrap();
        let mut dec = crate::cone::FwDecomposition::new(alpha);
        dec.insert_block(1, 2, SymMatrix::from_rows(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap())
            .unwrap();
        let terms = extract_certificate(&dec, &basis).unwrap();
        assert_eq!(terms.len(), 1, "rank-one block yields a single square");
        let expanded = expand_certificate(&terms, &basis).unwrap();
        let mut target = PolynomialForm::zero(2);
        target.add_term(&[2, 0], 1.0).unwrap();
        target.add_term(&[1, 1], 2.0).unwrap();
        target.add_term(&[0, 2], 1.0).unwrap();
        assert!(expanded.max_coeff_diff(&target) <= 1e-9);
    }

    #[test]
    fn broyden_values() {
        let q2 = broyden_poly(2).unwrap();
        assert_eq!(q2.eval(&[0.0, 0.0]), 2.0);
        assert_eq!(q2.degree(), 4);

        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for n in [2usize, 3, 5] {
            let q = broyden_poly(n).unwrap();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                assert!(q.eval(&x) >= 0.0, "nonnegative by construction");
            }
        }
        assert!(broyden_poly(1).is_err());
    }

    #[test]
    fn matrix_sos_r1_matches_scalar_equalities() {
        // r = 1 and shift 0: the equality data equals the scalar Gram data.
        let p = poly_1var(&[(4, 1.0), (2, -1.0)]);
        let pm = PolyMatrix::new(1, 1, vec![p.clone()]).unwrap();
        let msp = matrix_sos_program(&pm, 0.0).unwrap();
        let basis = monomial_basis(1, 2).unwrap();
        let eqs = gram_equalities(&p, &basis).unwrap();
        assert_eq!(msp.sos.m(), eqs.len());
        for (c, eq) in msp.sos.constraints().iter().zip(&eqs) {
            assert!(c.data[0].sub(&eq.data_matrix(basis.len())).fro_norm() == 0.0);
            assert_eq!(c.rhs, eq.coeff);
        }
    }

    #[test]
    fn matrix_sos_identity_feasible() {
        // P = I (constants): Q = I works.
        let one = PolynomialForm::constant(1, 1.0);
        let zero = PolynomialForm::zero(1);
        let pm = PolyMatrix::new(
            2,
            1,
            vec![one.clone(), zero.clone(), zero.clone(), one.clone()],
        )
        .unwrap();
        let msp = matrix_sos_program(&pm, 0.0).unwrap();
        let sol = solve(&msp.sos, &SolveSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.primal_residual <= 1e-5);
    }

    #[test]
    fn polymatrix_symmetry_enforced() {
        let x = PolynomialForm::monomial(1, 0, 1, 1.0).unwrap();
        let zero = PolynomialForm::zero(1);
        assert!(PolyMatrix::new(2, 1, vec![zero.clone(), x, zero.clone(), zero]).is_err());
    }

    #[test]
    fn feasible_gram_reproduces_poly_at_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let q = broyden_poly(2).unwrap();
        let prog = build_sos_program(&q).unwrap();
        let (gamma, sol) = prog.solve_gamma(&SolveSettings::default()).unwrap();
        let gram = prog.gram_from_solution(&sol).unwrap();
        let target = q.add(&PolynomialForm::constant(2, gamma)).unwrap();
        let pts: Vec<Vec<f64>> =
            (0..20).map(|_| (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
        assert!(gram_matches_poly(&gram, &target, &prog.basis, &pts, 1e-5));
    }
}
