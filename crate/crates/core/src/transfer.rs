//! Prolongation, restriction, and projection operators between adjacent
//! levels of a hierarchy.
//!
//! Restriction is always the transpose of prolongation, and projection is
//! injection at coincident entries, so `project(prolongate(x)) == x` holds
//! exactly. Operators apply matrix-free; dense materialization is provided
//! for test oracles.

use nalgebra::{DMatrix, DVector};

use crate::{NmmError, Result};

/// Transfer operators between one coarse/fine level pair.
#[derive(Debug, Clone)]
pub struct TransferOps {
    kind: TransferKind,
}

#[derive(Debug, Clone)]
enum TransferKind {
    /// Trivial transfer for equal-dimension level pairs.
    Identity { n: usize },
    /// 1-D interior-node grid refinement: `n_fine = 2 * n_coarse + 1`,
    /// piecewise-linear interpolation with zero boundary values.
    Interp1d { n_coarse: usize },
    /// Depth refinement of a block-structured parameter vector:
    /// `blocks` equal segments of `block_len` entries refine to
    /// `2 * blocks - 1` segments; a `tail_len` suffix passes through
    /// unchanged.
    DepthInterp { blocks: usize, block_len: usize, tail_len: usize },
}

impl TransferOps {
    /// Identity transfer on `n` entries (degenerate equal-dimension pair).
    pub fn identity(n: usize) -> TransferOps {
        TransferOps { kind: TransferKind::Identity { n } }
    }

    pub fn n_coarse(&self) -> usize {
        match self.kind {
            TransferKind::Identity { n } => n,
            TransferKind::Interp1d { n_coarse } => n_coarse,
            TransferKind::DepthInterp { blocks, block_len, tail_len } => {
                blocks * block_len + tail_len
            }
        }
    }

    pub fn n_fine(&self) -> usize {
        match self.kind {
            TransferKind::Identity { n } => n,
            TransferKind::Interp1d { n_coarse } => 2 * n_coarse + 1,
            TransferKind::DepthInterp { blocks, block_len, tail_len } => {
                (2 * blocks - 1) * block_len + tail_len
            }
        }
    }

    fn check(&self, len: usize, expected: usize) -> Result<()> {
        if len != expected {
            return Err(NmmError::DimensionMismatch { expected, got: len });
        }
        Ok(())
    }

    /// Applies the prolongation `I` to a coarse vector.
    pub fn prolongate(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(v.len(), self.n_coarse())?;
        Ok(match self.kind {
            TransferKind::Identity { .. } => v.clone(),
            TransferKind::Interp1d { n_coarse: m } => {
                let mut out = DVector::zeros(2 * m + 1);
                for i in 0..m {
                    out[2 * i + 1] = v[i];
                }
                out[0] = 0.5 * v[0];
                for i in 1..m {
                    out[2 * i] = 0.5 * (v[i - 1] + v[i]);
                }
                out[2 * m] = 0.5 * v[m - 1];
                out
            }
            TransferKind::DepthInterp { blocks: m, block_len: bl, tail_len } => {
                let fine_blocks = 2 * m - 1;
                let mut out = DVector::zeros(fine_blocks * bl + tail_len);
                for k in 0..m {
                    for j in 0..bl {
                        out[2 * k * bl + j] = v[k * bl + j];
                    }
                }
                for k in 0..m - 1 {
                    for j in 0..bl {
                        out[(2 * k + 1) * bl + j] =
                            0.5 * (v[k * bl + j] + v[(k + 1) * bl + j]);
                    }
                }
                for j in 0..tail_len {
                    out[fine_blocks * bl + j] = v[m * bl + j];
                }
                out
            }
        })
    }

    /// Applies the restriction `R = I^T` to a fine vector.
    pub fn restrict(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(v.len(), self.n_fine())?;
        Ok(match self.kind {
            TransferKind::Identity { .. } => v.clone(),
            TransferKind::Interp1d { n_coarse: m } => {
                let mut out = DVector::zeros(m);
                for i in 0..m {
                    out[i] = v[2 * i + 1] + 0.5 * (v[2 * i] + v[2 * i + 2]);
                }
                out
            }
            TransferKind::DepthInterp { blocks: m, block_len: bl, tail_len } => {
                let fine_blocks = 2 * m - 1;
                let mut out = DVector::zeros(m * bl + tail_len);
                for k in 0..m {
                    for j in 0..bl {
                        let mut acc = v[2 * k * bl + j];
                        if k > 0 {
                            acc += 0.5 * v[(2 * k - 1) * bl + j];
                        }
                        if k + 1 < m {
                            acc += 0.5 * v[(2 * k + 1) * bl + j];
                        }
                        out[k * bl + j] = acc;
                    }
                }
                for j in 0..tail_len {
                    out[m * bl + j] = v[fine_blocks * bl + j];
                }
                out
            }
        })
    }

    /// Applies the projection `P` (injection at coincident entries), so
    /// `project(prolongate(x)) == x` exactly.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x.len(), self.n_fine())?;
        Ok(match self.kind {
            TransferKind::Identity { .. } => x.clone(),
            TransferKind::Interp1d { n_coarse: m } => {
                DVector::from_fn(m, |i, _| x[2 * i + 1])
            }
            TransferKind::DepthInterp { blocks: m, block_len: bl, tail_len } => {
                let fine_blocks = 2 * m - 1;
                let mut out = DVector::zeros(m * bl + tail_len);
                for k in 0..m {
                    for j in 0..bl {
                        out[k * bl + j] = x[2 * k * bl + j];
                    }
                }
                for j in 0..tail_len {
                    out[m * bl + j] = x[fine_blocks * bl + j];
                }
                out
            }
        })
    }

    /// Dense prolongation matrix (test-oracle export).
    pub fn prolongation_matrix(&self) -> DMatrix<f64> {
        let (nc, nf) = (self.n_coarse(), self.n_fine());
        let mut mat = DMatrix::zeros(nf, nc);
        let mut e = DVector::zeros(nc);
        for j in 0..nc {
            e[j] = 1.0;
            let col = self.prolongate(&e).expect("unit vector has coarse dim");
            mat.set_column(j, &col);
            e[j] = 0.0;
        }
        mat
    }

    /// Dense projection matrix (test-oracle export).
    pub fn projection_matrix(&self) -> DMatrix<f64> {
        let (nc, nf) = (self.n_coarse(), self.n_fine());
        let mut mat = DMatrix::zeros(nc, nf);
        let mut e = DVector::zeros(nf);
        for j in 0..nf {
            e[j] = 1.0;
            let col = self.project(&e).expect("unit vector has fine dim");
            mat.set_column(j, &col);
            e[j] = 0.0;
        }
        mat
    }
}

/// Piecewise-linear interpolation between 1-D grids of interior nodes.
///
/// The fine grid has `2 * n_coarse + 1` interior nodes (uniform refinement).
/// Coincident fine nodes take the coarse value, in-between nodes average
/// their coarse neighbors, and boundary values are zero; projection is
/// injection at coincident nodes.
pub fn build_interpolation_1d(n_coarse: usize) -> Result<TransferOps> {
    if n_coarse == 0 {
        return Err(NmmError::config("1-D interpolation needs n_coarse >= 1"));
    }
    Ok(TransferOps { kind: TransferKind::Interp1d { n_coarse } })
}

/// Depth refinement for block-structured parameter vectors (residual
/// networks viewed as forward-Euler discretizations: the block index is the
/// time axis).
///
/// A coarse vector of `coarse_blocks` segments of `block_len` entries plus a
/// `tail_len` passthrough suffix refines to `2 * coarse_blocks - 1`
/// segments: coarse segments copy to coincident fine segments, in-between
/// segments average their neighbors, and the tail (classification head)
/// passes through identically.
pub fn build_resnet_transfer(
    coarse_blocks: usize,
    block_len: usize,
    tail_len: usize,
) -> Result<TransferOps> {
    if coarse_blocks == 0 || block_len == 0 {
        return Err(NmmError::config(
            "depth transfer needs coarse_blocks >= 1 and block_len >= 1",
        ));
    }
    Ok(TransferOps {
        kind: TransferKind::DepthInterp { blocks: coarse_blocks, block_len, tail_len },
    })
}
