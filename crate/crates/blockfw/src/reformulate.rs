//! Rewriting a single-block SDP over the pair-block cone, lifting block
//! solutions back, and the rotated-second-order-cone view of 2x2 blocks.

use crate::cone::FwDecomposition;
use crate::linalg::SymMatrix;
use crate::partition::Partition;
use crate::solver::ConicProgram;
use crate::{Error, Result};

/// A pair-block cone program together with the pair order of its blocks.
#[derive(Debug, Clone)]
pub struct BlockFwProgram {
    pub program: ConicProgram,
    pub alpha: Partition,
    /// Pair owning each program block, in block order. Empty for the `p = 1`
    /// identity transform.
    pub pairs: Vec<(usize, usize)>,
}

impl BlockFwProgram {
    /// Reassemble the full-size matrix from a block solution.
    pub fn lift(&self, blocks: &[SymMatrix]) -> Result<SymMatrix> {
        if self.pairs.is_empty() {
            return blocks
                .first()
                .cloned()
                .ok_or_else(|| Error::InvalidArgument("no blocks to lift".into()));
        }
        if blocks.len() != self.pairs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} blocks vs {} pairs",
                blocks.len(),
                self.pairs.len()
            )));
        }
        let mut dec = FwDecomposition::new(self.alpha.clone());
        for (&(i, j), x) in self.pairs.iter().zip(blocks) {
            dec.insert_block(i, j, x.clone())?;
        }
        Ok(dec.recompose())
    }
}

/// Replace the PSD cone of a single-block SDP by `FW_{α,2}`: one PSD block
/// per pair `(j, l)` with data `E_jl C E_jl^T` and `E_jl A_i E_jl^T`, the same
/// constraint count, and the same right-hand side. A single-block partition
/// is the identity transform.
pub fn to_block_fw_program(sdp: &ConicProgram, alpha: &Partition) -> Result<BlockFwProgram> {
    to_block_fw_program_sparse(sdp, alpha, None)
}

/// [`to_block_fw_program`] that additionally drops pair blocks whose
/// objective and constraint data all vanish (below `zero_tol`); such blocks
/// can only add cone mass that no data sees.
pub fn to_block_fw_program_sparse(
    sdp: &ConicProgram,
    alpha: &Partition,
    zero_tol: Option<f64>,
) -> Result<BlockFwProgram> {
    if sdp.block_sizes().len() != 1 {
        return Err(Error::InvalidProgram(format!(
            "expected a single-block SDP, got {} blocks",
            sdp.block_sizes().len()
        )));
    }
    let n = sdp.block_sizes()[0];
    if n != alpha.n() {
        return Err(Error::DimensionMismatch(format!(
            "SDP dimension {n} vs partition dimension {}",
            alpha.n()
        )));
    }
    if alpha.block_count() == 1 {
        return Ok(BlockFwProgram { program: sdp.clone(), alpha: alpha.clone(), pairs: vec![] });
    }

    let mut pairs = alpha.pairs();
    if let Some(tol) = zero_tol {
        pairs.retain(|&(i, j)| {
            let idx = alpha.pair_indices(i, j);
            sdp.objective()[0].principal_submatrix(&idx).fro_norm() > tol
                || sdp
                    .constraints()
                    .iter()
                    .any(|c| c.data[0].principal_submatrix(&idx).fro_norm() > tol)
        });
        if pairs.is_empty() {
            // Keep one block so the program stays well formed.
            pairs.push(alpha.pairs()[0]);
        }
    }

    let sizes: Vec<usize> =
        pairs.iter().map(|&(i, j)| alpha.sizes()[i] + alpha.sizes()[j]).collect();
    let objective: Vec<SymMatrix> = pairs
        .iter()
        .map(|&(i, j)| sdp.objective()[0].principal_submatrix(&alpha.pair_indices(i, j)))
        .collect();
    let mut program = ConicProgram::new(sizes, objective)?;
    for c in sdp.constraints() {
        let data: Vec<SymMatrix> = pairs
            .iter()
            .map(|&(i, j)| c.data[0].principal_submatrix(&alpha.pair_indices(i, j)))
            .collect();
        program.add_constraint(data, c.rhs)?;
    }
    Ok(BlockFwProgram { program, alpha: alpha.clone(), pairs })
}

/// Lift a full-pair-order block solution back to the original matrix
/// variable; the inverse of the reformulation's variable split.
pub fn lift_solution(blocks: &[SymMatrix], alpha: &Partition) -> Result<SymMatrix> {
    let pairs = alpha.pairs();
    if blocks.len() != pairs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} blocks vs {} pairs",
            blocks.len(),
            pairs.len()
        )));
    }
    let mut dec = FwDecomposition::new(alpha.clone());
    for (&(i, j), x) in pairs.iter().zip(blocks) {
        dec.insert_block(i, j, x.clone())?;
    }
    Ok(dec.recompose())
}

/// Rotated-second-order-cone description of a program whose blocks are all
/// 2x2: each block `[[a, b], [b, c]]` is PSD exactly when
/// `a >= 0, c >= 0, a*c >= b^2`.
#[derive(Debug, Clone)]
pub struct RsocProgram {
    pub n_blocks: usize,
}

impl RsocProgram {
    /// Feasibility of a candidate point in the rotated-cone form.
    pub fn check_point(&self, blocks: &[SymMatrix], tol: f64) -> Result<bool> {
        if blocks.len() != self.n_blocks {
            return Err(Error::DimensionMismatch("block count".into()));
        }
        Ok(blocks.iter().all(|x| {
            let (a, b, c) = (x.get(0, 0), x.get(0, 1), x.get(1, 1));
            let s = 1.0 + a.abs().max(c.abs()).max(b.abs());
            a >= -tol * s && c >= -tol * s && a * c - b * b >= -tol * s * s
        }))
    }
}

impl std::fmt::Display for RsocProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "rotated second-order cone constraints ({} blocks):", self.n_blocks)?;
        for k in 0..self.n_blocks {
            writeln!(
                f,
                "  block {k}: u = X{k}[1,1], v = X{k}[2,2], w = X{k}[1,2];  u >= 0, v >= 0, u*v >= w^2"
            )?;
        }
        Ok(())
    }
}

/// Emit the rotated-SOC description of an all-2x2-blocks program.
pub fn rsoc_reformulate(prog: &ConicProgram) -> Result<RsocProgram> {
    if let Some(&bad) = prog.block_sizes().iter().find(|&&d| d != 2) {
        return Err(Error::InvalidArgument(format!(
            "rotated-cone form needs 2x2 blocks, found size {bad}"
        )));
    }
    Ok(RsocProgram { n_blocks: prog.block_sizes().len() })
}
