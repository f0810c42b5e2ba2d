//! Partition algebra: ordered block sizes over a matrix dimension, the
//! sub-partition (refinement) lattice, pair-index bookkeeping used by the
//! pair-block basis, and block permutations.
//!
//! Partitions here are contiguous: block `i` owns the consecutive index range
//! `offsets[i]..offsets[i+1]`. Non-contiguous groupings are expressed by
//! pre-applying [`block_permute`].

use crate::linalg::SymMatrix;
use crate::{Error, Result};
use std::ops::Range;

/// Ordered block sizes `{k_1, …, k_p}` partitioning dimension `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl Partition {
    /// Build a partition from block sizes. Every size must be positive.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        if sizes.iter().any(|&k| k == 0) {
            return Err(Error::InvalidPartition("zero-size block".into()));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for &k in &sizes {
            offsets.push(offsets.last().unwrap() + k);
        }
        Ok(Partition { sizes, offsets })
    }

    /// The trivial partition `{1, 1, …, 1}` of dimension `n`.
    pub fn trivial(n: usize) -> Result<Self> {
        Partition::new(vec![1; n])
    }

    /// `p` blocks with sizes the closest integers to `n/p`, smaller sizes
    /// first (the maximum number of size-`floor(n/p)` blocks, then the rest
    /// one larger).
    pub fn balanced(n: usize, p: usize) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::InvalidArgument(format!(
                "cannot split dimension {n} into {p} blocks"
            )));
        }
        let k = n / p;
        let r = n % p;
        let mut sizes = vec![k; p - r];
        sizes.extend(std::iter::repeat(k + 1).take(r));
        Partition::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of blocks `p`.
    pub fn block_count(&self) -> usize {
        self.sizes.len()
    }

    /// Total dimension `n`.
    pub fn n(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Index range owned by block `i`.
    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Row indices selected by the pair basis `E_ij`: block `i`'s range
    /// followed by block `j`'s.
    pub fn pair_indices(&self, i: usize, j: usize) -> Vec<usize> {
        self.block_range(i).chain(self.block_range(j)).collect()
    }

    /// All ordered pairs `i < j` (0-based block indices).
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let p = self.block_count();
        let mut out = Vec::with_capacity(p * (p - 1) / 2);
        for i in 0..p {
            for j in (i + 1)..p {
                out.push((i, j));
            }
        }
        out
    }

    /// Whether all blocks share one size and `n = p * k`.
    pub fn is_homogeneous(&self) -> bool {
        self.sizes.iter().all(|&k| k == self.sizes[0])
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.sizes.iter().map(|k| k.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Witness that a finer partition refines a coarser one.
///
/// `merge_bounds` holds the integers `m_1 < … < m_{p+1}` (1-based fine-block
/// indices) with `m_1 = 1`, `m_{p+1} = q+1`: coarse block `i` is the union of
/// fine blocks `m_i .. m_{i+1}-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubPartitionWitness {
    pub merge_bounds: Vec<usize>,
}

impl SubPartitionWitness {
    /// Fine-block range (0-based) merged into coarse block `i`.
    pub fn fine_range(&self, i: usize) -> Range<usize> {
        (self.merge_bounds[i] - 1)..(self.merge_bounds[i + 1] - 1)
    }

    /// Number of coarse blocks.
    pub fn coarse_count(&self) -> usize {
        self.merge_bounds.len() - 1
    }
}

/// Decide whether `beta` is a sub-partition (refinement) of `alpha`, returning
/// the merge witness when it is. Equal partitions yield the identity witness.
///
/// Contiguity makes the witness unique, so a greedy prefix-sum match is exact.
pub fn is_sub_partition(beta: &Partition, alpha: &Partition) -> Result<Option<SubPartitionWitness>> {
    if beta.n() != alpha.n() {
        return Err(Error::DimensionMismatch(format!(
            "partitions cover {} and {}",
            beta.n(),
            alpha.n()
        )));
    }
    let mut bounds = Vec::with_capacity(alpha.block_count() + 1);
    bounds.push(1usize);
    let mut fine = 0usize;
    for &k in alpha.sizes() {
        let mut acc = 0usize;
        while acc < k {
            if fine >= beta.block_count() {
                return Ok(None);
            }
            acc += beta.sizes()[fine];
            fine += 1;
        }
        if acc != k {
            return Ok(None);
        }
        bounds.push(fine + 1);
    }
    Ok(Some(SubPartitionWitness { merge_bounds: bounds }))
}

/// The row-index ranges selected by every pair basis `E_ij`, `i < j`.
///
/// Errors when `p = 1`: a single block has no pairs (the one-block cone is
/// the full PSD cone).
pub fn pair_row_ranges(alpha: &Partition) -> Result<Vec<((usize, usize), (Range<usize>, Range<usize>))>> {
    if alpha.block_count() < 2 {
        return Err(Error::InvalidPartition(
            "single-block partition has no pair basis".into(),
        ));
    }
    Ok(alpha
        .pairs()
        .into_iter()
        .map(|(i, j)| ((i, j), (alpha.block_range(i), alpha.block_range(j))))
        .collect())
}

/// Apply a block permutation: returns `P A P^T` together with the permuted
/// partition. `perm[t]` names the old block placed at new position `t`.
pub fn block_permute(
    alpha: &Partition,
    perm: &[usize],
    a: &SymMatrix,
) -> Result<(SymMatrix, Partition)> {
    let p = alpha.block_count();
    if a.n() != alpha.n() {
        return Err(Error::DimensionMismatch(format!(
            "matrix dimension {} vs partition dimension {}",
            a.n(),
            alpha.n()
        )));
    }
    if perm.len() != p {
        return Err(Error::InvalidArgument("permutation length mismatch".into()));
    }
    let mut seen = vec![false; p];
    for &t in perm {
        if t >= p || seen[t] {
            return Err(Error::InvalidArgument("not a permutation of the blocks".into()));
        }
        seen[t] = true;
    }
    let new_sizes: Vec<usize> = perm.iter().map(|&t| alpha.sizes()[t]).collect();
    let new_alpha = Partition::new(new_sizes)?;
    // Row map: new index -> old index.
    let mut rows = Vec::with_capacity(alpha.n());
    for &t in perm {
        rows.extend(alpha.block_range(t));
    }
    let out = SymMatrix::from_fn(a.n(), |i, j| a.get(rows[i], rows[j]));
    Ok((out, new_alpha))
}

/// Inverse of a block permutation.
pub fn invert_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (t, &s) in perm.iter().enumerate() {
        inv[s] = t;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn make_partition_examples() {
        let p = Partition::new(vec![4, 2]).unwrap();
        assert_eq!(p.block_count(), 2);
        assert_eq!(p.n(), 6);
        assert_eq!(p.offsets(), &[0, 4, 6]);

        let t = Partition::trivial(6).unwrap();
        assert_eq!(t.block_count(), 6);
        assert_eq!(t.n(), 6);

        let s = Partition::new(vec![5]).unwrap();
        assert_eq!(s.block_count(), 1);
        assert_eq!(s.n(), 5);

        assert!(Partition::new(vec![]).is_err());
        assert!(Partition::new(vec![2, 0, 1]).is_err());
    }

    #[test]
    fn balanced_examples() {
        assert_eq!(Partition::balanced(10, 4).unwrap().sizes(), &[2, 2, 3, 3]);
        assert_eq!(Partition::balanced(6, 3).unwrap().sizes(), &[2, 2, 2]);
        assert_eq!(Partition::balanced(6, 6).unwrap().sizes(), &[1; 6]);
        assert!(Partition::balanced(3, 4).is_err());
    }

    #[test]
    fn balanced_matches_enumeration() {
        // Independent check for (10, 4): among all 4-part compositions of 10,
        // minimize the distance of sizes to 10/4, then apply the ordering rule.
        let n = 10usize;
        let p = 4usize;
        let target = n as f64 / p as f64;
        let mut best: Option<(f64, Vec<usize>)> = None;
        fn compositions(n: usize, p: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if p == 1 {
                if n >= 1 {
                    prefix.push(n);
                    out.push(prefix.clone());
                    prefix.pop();
                }
                return;
            }
            for k in 1..=(n + 1 - p) {
                prefix.push(k);
                compositions(n - k, p - 1, prefix, out);
                prefix.pop();
            }
        }
        let mut all = Vec::new();
        compositions(n, p, &mut Vec::new(), &mut all);
        for c in all {
            let score: f64 = c.iter().map(|&k| (k as f64 - target).abs()).sum();
            let mut sorted = c.clone();
            sorted.sort();
            if best.as_ref().map_or(true, |(s, _)| score < s - 1e-12) {
                best = Some((score, sorted));
            }
        }
        assert_eq!(best.unwrap().1, Partition::balanced(n, p).unwrap().sizes());
    }

    #[test]
    fn sub_partition_examples() {
        let a = Partition::new(vec![4, 2]).unwrap();
        let b = Partition::new(vec![2, 2, 2]).unwrap();
        let g = Partition::trivial(6).unwrap();

        let w = is_sub_partition(&b, &a).unwrap().unwrap();
        assert_eq!(w.merge_bounds, vec![1, 3, 4]);

        let w = is_sub_partition(&g, &b).unwrap().unwrap();
        assert_eq!(w.merge_bounds, vec![1, 3, 5, 7]);

        let c = Partition::new(vec![3, 3]).unwrap();
        assert!(is_sub_partition(&c, &a).unwrap().is_none());

        // Identity witness.
        let w = is_sub_partition(&b, &b).unwrap().unwrap();
        assert_eq!(w.merge_bounds, vec![1, 2, 3, 4]);

        let short = Partition::new(vec![2, 2]).unwrap();
        assert!(is_sub_partition(&short, &a).is_err());
    }

    /// Exhaustive check that sub-partition witnesses match prefix alignment.
    #[test]
    fn sub_partition_exhaustive_prefix_oracle() {
        fn compositions(n: usize) -> Vec<Vec<usize>> {
            let mut out = vec![];
            let count = 1usize << (n - 1);
            for mask in 0..count {
                let mut c = vec![];
                let mut run = 1;
                for b in 0..(n - 1) {
                    if mask & (1 << b) != 0 {
                        c.push(run);
                        run = 1;
                    } else {
                        run += 1;
                    }
                }
                c.push(run);
                out.push(c);
            }
            out
        }
        for n in 2..=7usize {
            let parts: Vec<Partition> =
                compositions(n).into_iter().map(|c| Partition::new(c).unwrap()).collect();
            for beta in &parts {
                for alpha in &parts {
                    let got = is_sub_partition(beta, alpha).unwrap().is_some();
                    // Oracle: beta refines alpha iff alpha's offsets are a
                    // subset of beta's offsets.
                    let bset: std::collections::BTreeSet<usize> =
                        beta.offsets().iter().copied().collect();
                    let expect = alpha.offsets().iter().all(|o| bset.contains(o));
                    assert_eq!(got, expect, "beta={beta} alpha={alpha}");
                }
            }
        }
    }

    #[test]
    fn sub_partition_is_partial_order() {
        fn compositions(n: usize) -> Vec<Vec<usize>> {
            let mut out = vec![];
            for mask in 0..(1usize << (n - 1)) {
                let mut c = vec![];
                let mut run = 1;
                for b in 0..(n - 1) {
                    if mask & (1 << b) != 0 {
                        c.push(run);
                        run = 1;
                    } else {
                        run += 1;
                    }
                }
                c.push(run);
                out.push(c);
            }
            out
        }
        let parts: Vec<Partition> =
            compositions(8).into_iter().map(|c| Partition::new(c).unwrap()).collect();
        for a in &parts {
            assert!(is_sub_partition(a, a).unwrap().is_some(), "reflexive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..4000 {
            let x = &parts[rng.gen_range(0..parts.len())];
            let y = &parts[rng.gen_range(0..parts.len())];
            let z = &parts[rng.gen_range(0..parts.len())];
            let xy = is_sub_partition(x, y).unwrap().is_some();
            let yz = is_sub_partition(y, z).unwrap().is_some();
            if xy && yz {
                assert!(is_sub_partition(x, z).unwrap().is_some(), "transitive");
            }
            let yx = is_sub_partition(y, x).unwrap().is_some();
            if xy && yx {
                assert_eq!(x, y, "antisymmetric");
            }
        }
    }

    #[test]
    fn pair_ranges_examples() {
        let a = Partition::new(vec![4, 2]).unwrap();
        let prs = pair_row_ranges(&a).unwrap();
        assert_eq!(prs.len(), 1);
        assert_eq!(prs[0], ((0, 1), (0..4, 4..6)));

        assert_eq!(pair_row_ranges(&Partition::new(vec![2, 2, 2]).unwrap()).unwrap().len(), 3);
        assert_eq!(pair_row_ranges(&Partition::trivial(4).unwrap()).unwrap().len(), 6);
        assert!(pair_row_ranges(&Partition::new(vec![5]).unwrap()).is_err());
    }

    #[test]
    fn pair_ranges_cover_each_block_p_minus_1_times() {
        for sizes in [vec![1, 2, 3], vec![2, 2, 2, 2], vec![1, 1, 1, 1, 1]] {
            let a = Partition::new(sizes).unwrap();
            let p = a.block_count();
            let mut count = vec![0usize; a.n()];
            for ((_, _), (r1, r2)) in pair_row_ranges(&a).unwrap() {
                for i in r1.chain(r2) {
                    count[i] += 1;
                }
            }
            assert!(count.iter().all(|&c| c == p - 1));
        }
    }

    #[test]
    fn block_permute_examples() {
        let a = Partition::new(vec![4, 2]).unwrap();
        let mut m = SymMatrix::zeros(6);
        for i in 0..4 {
            m.set(i, i, 1.0);
        }
        for i in 4..6 {
            m.set(i, i, 2.0);
        }
        let (same, _) = block_permute(&a, &[0, 1], &m).unwrap();
        assert!(same.sub(&m).fro_norm() == 0.0);

        let (swapped, beta) = block_permute(&a, &[1, 0], &m).unwrap();
        assert_eq!(beta.sizes(), &[2, 4]);
        for i in 0..2 {
            assert_eq!(swapped.get(i, i), 2.0);
        }
        for i in 2..6 {
            assert_eq!(swapped.get(i, i), 1.0);
        }

        assert!(block_permute(&a, &[0, 0], &m).is_err());
    }

    #[test]
    fn block_permute_round_trip_and_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alpha = Partition::new(vec![2, 3, 1, 2]).unwrap();
        for _ in 0..20 {
            let a = SymMatrix::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
            let mut perm: Vec<usize> = (0..4).collect();
            perm.shuffle(&mut rng);
            let (b, beta) = block_permute(&alpha, &perm, &a).unwrap();
            let (back, gamma) = block_permute(&beta, &invert_perm(&perm), &b).unwrap();
            assert_eq!(gamma, alpha);
            assert!(back.sub(&a).fro_norm() == 0.0, "exact round trip");

            let mut ea = sym_eig(&a).unwrap().0;
            let mut eb = sym_eig(&b).unwrap().0;
            ea.sort_by(|x, y| x.partial_cmp(y).unwrap());
            eb.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in ea.iter().zip(&eb) {
                assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
            }
        }
    }
}
