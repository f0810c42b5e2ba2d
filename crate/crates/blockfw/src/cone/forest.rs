//! Exact decomposition of PSD matrices whose block sparsity graph is a
//! forest (chordal with maximal clique size two).
//!
//! For such matrices a decomposition supported only on graph edges always
//! exists. The constructive split first tries dividing each diagonal block
//! across its incident edges proportionally to degree; when an edge block
//! comes out indefinite, a leaf-to-root sweep reallocates the diagonal mass
//! using generalized Schur complements, which succeeds whenever the matrix is
//! genuinely PSD on the pattern.

use super::FwDecomposition;
use crate::linalg::{sym_eig, SymMatrix};
use crate::partition::Partition;
use crate::Result;
use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// Rectangular block of a symmetric matrix (row-major).
struct Rect {
    cols: usize,
    data: Vec<f64>,
}

impl Rect {
    fn from_block(a: &SymMatrix, ri: &[usize], rj: &[usize]) -> Self {
        let mut data = Vec::with_capacity(ri.len() * rj.len());
        for &r in ri {
            for &c in rj {
                data.push(a.get(r, c));
            }
        }
        Rect { cols: rj.len(), data }
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `R^T B^+ R` together with the range-condition residual `||(I - B B^+) R||`.
fn schur_demand(b: &SymMatrix, r: &Rect) -> Result<(SymMatrix, f64)> {
    let (vals, vecs) = sym_eig(b)?;
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let rank_tol = 1e-12 * lmax.max(1e-300);
    let k = b.n();
    let m = r.cols;
    // W = V^T R, keeping only usable eigendirections.
    let mut w = vec![0.0f64; k * m];
    for (t, vec_t) in vecs.iter().enumerate() {
        for c in 0..m {
            let mut acc = 0.0;
            for row in 0..k {
                acc += vec_t[row] * r.get(row, c);
            }
            w[t * m + c] = acc;
        }
    }
    let mut demand = SymMatrix::zeros(m);
    let mut range_residual_sq = 0.0f64;
    for t in 0..k {
        if vals[t] > rank_tol {
            for c1 in 0..m {
                for c2 in c1..m {
                    demand.add_at(c1, c2, w[t * m + c1] * w[t * m + c2] / vals[t]);
                }
            }
        } else {
            for c in 0..m {
                range_residual_sq += w[t * m + c] * w[t * m + c];
            }
        }
    }
    Ok((demand, range_residual_sq.sqrt()))
}

/// Decompose `A` over the pairs of `alpha` using only the edges of its block
/// sparsity graph (edge `(i,j)` present when `||A_ij||_F > zero_tol`).
///
/// Returns `None` when the graph has a cycle or no PSD split exists on the
/// pattern; absence is informative, not an error.
pub fn sparse_forest_decompose(
    a: &SymMatrix,
    alpha: &Partition,
    zero_tol: f64,
) -> Result<Option<FwDecomposition>> {
    if a.n() != alpha.n() || alpha.block_count() < 2 {
        return Ok(None);
    }
    let p = alpha.block_count();
    let ranges: Vec<Vec<usize>> = (0..p).map(|i| alpha.block_range(i).collect()).collect();

    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut dropped_sq = 0.0f64;
    for i in 0..p {
        for j in (i + 1)..p {
            let blk = Rect::from_block(a, &ranges[i], &ranges[j]);
            let norm = blk.fro_norm();
            if norm > zero_tol {
                edges.push((i, j));
            } else {
                dropped_sq += 2.0 * norm * norm;
            }
        }
    }

    // Acyclicity via union-find.
    let mut parent: Vec<usize> = (0..p).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in &edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri == rj {
            return Ok(None);
        }
        parent[ri] = rj;
    }

    let scale = 1.0 + a.fro_norm();
    let psd_tol = 1e-8 * scale;

    let mut deg = vec![0usize; p];
    for &(i, j) in &edges {
        deg[i] += 1;
        deg[j] += 1;
    }

    // First pass: degree-proportional diagonal split.
    let mut blocks: Option<BTreeMap<(usize, usize), SymMatrix>> = {
        let mut out = BTreeMap::new();
        let mut ok = true;
        for &(i, j) in &edges {
            let (ki, kj) = (ranges[i].len(), ranges[j].len());
            let mut x = SymMatrix::zeros(ki + kj);
            for r in 0..ki {
                for c in r..ki {
                    x.set(r, c, a.get(ranges[i][r], ranges[i][c]) / deg[i] as f64);
                }
            }
            for r in 0..kj {
                for c in r..kj {
                    x.set(ki + r, ki + c, a.get(ranges[j][r], ranges[j][c]) / deg[j] as f64);
                }
            }
            for r in 0..ki {
                for c in 0..kj {
                    x.set(r, ki + c, a.get(ranges[i][r], ranges[j][c]));
                }
            }
            if x.min_eig()? < -psd_tol {
                ok = false;
                break;
            }
            out.insert((i, j), x);
        }
        if ok {
            Some(out)
        } else {
            None
        }
    };

    // Second pass: leaf-to-root sweep with Schur-complement demands.
    if blocks.is_none() {
        let mut out = BTreeMap::new();
        let mut budgets: Vec<SymMatrix> =
            (0..p).map(|i| a.principal_submatrix(&ranges[i])).collect();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); p];
        for &(i, j) in &edges {
            adj[i].insert(j);
            adj[j].insert(i);
        }
        let mut last_edge: Vec<Option<(usize, usize)>> = vec![None; p];
        let mut consumed_as_leaf = vec![false; p];
        let mut leaves: BTreeSet<usize> =
            (0..p).filter(|&i| adj[i].len() == 1).collect();
        let mut feasible = true;
        while let Some(&leaf) = leaves.iter().next() {
            leaves.remove(&leaf);
            let parent_block = match adj[leaf].iter().next() {
                Some(&x) => x,
                None => continue,
            };
            adj[leaf].remove(&parent_block);
            adj[parent_block].remove(&leaf);
            if adj[parent_block].len() == 1 {
                leaves.insert(parent_block);
            }

            let r = Rect::from_block(a, &ranges[leaf], &ranges[parent_block]);
            let (demand, range_residual) = schur_demand(&budgets[leaf], &r)?;
            if range_residual > 1e-7 * scale {
                feasible = false;
                break;
            }
            let (i, j) = (leaf.min(parent_block), leaf.max(parent_block));
            let ki = ranges[i].len();
            let kj = ranges[j].len();
            let kl = ranges[leaf].len();
            let kp = ranges[parent_block].len();
            let leaf_off = if leaf == i { 0 } else { ki };
            let par_off = if parent_block == i { 0 } else { ki };
            let mut x = SymMatrix::zeros(ki + kj);
            for r2 in 0..kl {
                for c2 in r2..kl {
                    x.set(leaf_off + r2, leaf_off + c2, budgets[leaf].get(r2, c2));
                }
            }
            for r2 in 0..kp {
                for c2 in r2..kp {
                    x.set(par_off + r2, par_off + c2, demand.get(r2, c2));
                }
            }
            for r2 in 0..kl {
                for c2 in 0..kp {
                    x.set(leaf_off + r2, par_off + c2, a.get(ranges[leaf][r2], ranges[parent_block][c2]));
                }
            }
            out.insert((i, j), x);
            budgets[parent_block].add_assign_scaled(&demand, -1.0);
            consumed_as_leaf[leaf] = true;
            last_edge[leaf] = Some((i, j));
            last_edge[parent_block] = Some((i, j));
        }
        if feasible {
            // Component roots (never consumed as a leaf) keep their leftover
            // diagonal budget; fold it into the last edge block touching them.
            for root in 0..p {
                if deg[root] == 0 || consumed_as_leaf[root] {
                    continue;
                }
                if let Some((i, j)) = last_edge[root] {
                    let x = out.get_mut(&(i, j)).expect("edge block exists");
                    let off = if root == i { 0 } else { ranges[i].len() };
                    let k = ranges[root].len();
                    for r in 0..k {
                        for c in r..k {
                            x.add_at(off + r, off + c, budgets[root].get(r, c));
                        }
                    }
                }
            }
            blocks = Some(out);
        }
    }

    let mut blocks = match blocks {
        Some(b) => b,
        None => return Ok(None),
    };

    // Isolated blocks carry their whole diagonal in a pure-diagonal pair
    // block with an arbitrary partner; no off-diagonal support is added.
    for i in 0..p {
        if deg[i] > 0 {
            continue;
        }
        let partner = if i == 0 { 1 } else { 0 };
        let (lo, hi) = (i.min(partner), i.max(partner));
        let (kl, kh) = (ranges[lo].len(), ranges[hi].len());
        let off = if i == lo { 0 } else { kl };
        let entry = blocks.entry((lo, hi)).or_insert_with(|| SymMatrix::zeros(kl + kh));
        let k = ranges[i].len();
        for r in 0..k {
            for c in r..k {
                entry.add_at(off + r, off + c, a.get(ranges[i][r], ranges[i][c]));
            }
        }
    }

    let mut dec = FwDecomposition::new(alpha.clone());
    for ((i, j), x) in blocks {
        if x.min_eig()? < -psd_tol {
            return Ok(None);
        }
        dec.insert_block(i, j, x)?;
    }
    let residual = dec.recompose().sub(a).fro_norm();
    if residual > dropped_sq.sqrt() + 1e-8 * scale {
        return Ok(None);
    }
    Ok(Some(dec))
}
