//! Constructive coarsening of decompositions along a sub-partition witness.
//!
//! One elementary step merges two adjacent blocks `t, t+1`. Pair blocks not
//! touching the merged pair embed unchanged (with shifted offsets); the block
//! of the merged pair itself is spread evenly, weight `1/(p_new - 1)`, over
//! all new pairs containing the merged block. Merging adjacent blocks in
//! place is the last-two-blocks construction conjugated by the rotation
//! permutation, carried out on indices. A general witness reduces to a chain
//! of such merges because contiguous partitions only ever merge neighbours.

use super::FwDecomposition;
use crate::linalg::SymMatrix;
use crate::partition::{Partition, SubPartitionWitness};
use crate::{Error, Result};

/// Merge adjacent blocks `t` and `t+1` of the decomposition's partition.
fn merge_adjacent(dec: &FwDecomposition, t: usize) -> Result<FwDecomposition> {
    let alpha = dec.alpha();
    let p = alpha.block_count();
    if t + 1 >= p {
        return Err(Error::InvalidArgument(format!("no adjacent pair at block {t}")));
    }
    if p < 3 {
        return Err(Error::InvalidArgument(
            "merging the only pair would leave a single block".into(),
        ));
    }
    let old_sizes = alpha.sizes();
    let mut new_sizes: Vec<usize> = Vec::with_capacity(p - 1);
    new_sizes.extend_from_slice(&old_sizes[..t]);
    new_sizes.push(old_sizes[t] + old_sizes[t + 1]);
    new_sizes.extend_from_slice(&old_sizes[t + 2..]);
    let new_alpha = Partition::new(new_sizes.clone())?;
    let p_new = p - 1;
    let share = 1.0 / (p_new as f64 - 1.0);

    let map = |x: usize| if x <= t { x.min(t) } else if x == t + 1 { t } else { x - 1 };
    // Offset of an old block inside its new block.
    let sub_off = |x: usize| if x == t + 1 { old_sizes[t] } else { 0 };

    let mut out = FwDecomposition::new(new_alpha);
    let mut add = |i: usize, j: usize, x: &SymMatrix, rows: &[usize], weight: f64| {
        let d = new_sizes[i] + new_sizes[j];
        if out.block(i, j).is_none() {
            out.insert_block(i, j, SymMatrix::zeros(d)).expect("valid pair");
        }
        // Re-borrowing through the map each time keeps this simple.
        let mut merged = out.block(i, j).unwrap().clone();
        for (u, &ru) in rows.iter().enumerate() {
            for (v, &rv) in rows.iter().enumerate().skip(u) {
                merged.add_at(ru, rv, weight * x.get(u, v));
            }
        }
        out.insert_block(i, j, merged).expect("valid pair");
    };

    for (&(a, b), x) in dec.blocks() {
        if (a, b) == (t, t + 1) {
            // Spread the merged pair's block over every new pair touching it.
            for i in 0..p_new {
                if i == t {
                    continue;
                }
                let (lo, hi) = (i.min(t), i.max(t));
                let t_off = if lo == t { 0 } else { new_sizes[lo] };
                let rows: Vec<usize> = (0..x.n()).map(|u| t_off + u).collect();
                add(lo, hi, x, &rows, share);
            }
        } else {
            let (ka, _kb) = (old_sizes[a], old_sizes[b]);
            let (na, nb) = (map(a), map(b));
            debug_assert!(na < nb);
            let (ra, rb) = (sub_off(a), sub_off(b));
            let rows: Vec<usize> = (0..x.n())
                .map(|u| if u < ka { ra + u } else { new_sizes[na] + rb + (u - ka) })
                .collect();
            add(na, nb, x, &rows, 1.0);
        }
    }
    Ok(out)
}

/// Re-express a decomposition under the coarser partition described by the
/// witness. The represented matrix is unchanged (exactly, up to rounding).
pub fn coarsen_decomposition(
    dec: &FwDecomposition,
    witness: &SubPartitionWitness,
) -> Result<FwDecomposition> {
    let q = dec.alpha().block_count();
    let bounds = &witness.merge_bounds;
    if bounds.len() < 2
        || bounds[0] != 1
        || *bounds.last().unwrap() != q + 1
        || bounds.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidArgument(format!(
            "witness {bounds:?} does not map {q} fine blocks"
        )));
    }
    let target_p = witness.coarse_count();
    if target_p < 2 {
        return Err(Error::InvalidArgument(
            "cannot coarsen to a single block: the pair basis would be empty".into(),
        ));
    }
    let mut cur = dec.clone();
    for coarse in 0..target_p {
        let group = witness.fine_range(coarse).len();
        for _ in 1..group {
            cur = merge_adjacent(&cur, coarse)?;
        }
    }
    Ok(cur)
}
