//! Impulse responses and the block Hankel / Toeplitz matrices built from them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::StateSpaceModel;
use crate::error::{Result, SysIdError};
use crate::linalg::spectral_norm;

/// A dense matrix tiled by `block_rows × block_cols` blocks of size
/// `block_height × block_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrix {
    pub data: DMatrix<f64>,
    pub block_rows: usize,
    pub block_cols: usize,
    pub block_height: usize,
    pub block_width: usize,
}

impl BlockMatrix {
    pub fn new(
        data: DMatrix<f64>,
        block_rows: usize,
        block_cols: usize,
        block_height: usize,
        block_width: usize,
    ) -> Result<Self> {
        if data.nrows() != block_rows * block_height || data.ncols() != block_cols * block_width {
            return Err(SysIdError::Dimension(format!(
                "{}x{} data does not tile into {block_rows}x{block_cols} blocks of {block_height}x{block_width}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self {
            data,
            block_rows,
            block_cols,
            block_height,
            block_width,
        })
    }

    /// Copy of block `(i, j)`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.data
            .view(
                (i * self.block_height, j * self.block_width),
                (self.block_height, self.block_width),
            )
            .into_owned()
    }

    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.data)
    }
}

/// Which kernel a Toeplitz matrix is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToeplitzKernel {
    /// Blocks `C A^j B` (`p × m`).
    Input,
    /// Blocks `C A^j` (`p × n`), the process-noise channel.
    Noise,
}

/// Impulse response `[CB, CAB, …, CA^{count−1}B]` by iterated multiplication.
pub fn markov_parameters(model: &StateSpaceModel, count: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut ak_b = model.b().clone();
    for k in 0..count {
        out.push(model.c() * &ak_b);
        if k + 1 < count {
            ak_b = model.a() * &ak_b;
        }
    }
    out
}

/// `[C, CA, …, CA^{count−1}]`, the process-noise impulse response.
pub fn noise_markov_parameters(model: &StateSpaceModel, count: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut c_ak = model.c().clone();
    for k in 0..count {
        if k > 0 {
            c_ak = &c_ak * model.a();
        }
        out.push(c_ak.clone());
    }
    out
}

/// Block Hankel matrix whose block `(i, j)` is `kernel[offset + i + j]`.
pub fn hankel_from_markov(
    kernel: &[DMatrix<f64>],
    offset: usize,
    p_blocks: usize,
    q_blocks: usize,
) -> BlockMatrix {
    assert!(
        kernel.len() + 1 >= offset + p_blocks + q_blocks,
        "kernel too short for requested Hankel"
    );
    let (p, m) = kernel[0].shape();
    let mut data = DMatrix::zeros(p * p_blocks, m * q_blocks);
    for i in 0..p_blocks {
        for j in 0..q_blocks {
            data.view_mut((i * p, j * m), (p, m))
                .copy_from(&kernel[offset + i + j]);
        }
    }
    BlockMatrix {
        data,
        block_rows: p_blocks,
        block_cols: q_blocks,
        block_height: p,
        block_width: m,
    }
}

/// The `(k, p_blocks, q_blocks)` Hankel matrix with block `(i, j) = C A^{k+i+j} B`.
pub fn build_hankel(
    model: &StateSpaceModel,
    k: usize,
    p_blocks: usize,
    q_blocks: usize,
) -> Result<BlockMatrix> {
    if p_blocks == 0 || q_blocks == 0 {
        return Err(SysIdError::InvalidArgument(
            "Hankel block counts must be positive".into(),
        ));
    }
    let markov = markov_parameters(model, k + p_blocks + q_blocks - 1);
    Ok(hankel_from_markov(&markov, k, p_blocks, q_blocks))
}

/// Strictly block-lower-triangular Toeplitz matrix `T_{k,d}` (input kernel) or
/// `TO_{k,d}` (noise kernel): block `(i, j)` is `kernel[k + i − j − 1]` for `i > j`.
pub fn build_toeplitz(
    model: &StateSpaceModel,
    k: usize,
    d: usize,
    kernel: ToeplitzKernel,
) -> Result<BlockMatrix> {
    if d == 0 {
        return Err(SysIdError::InvalidArgument(
            "Toeplitz size d must be positive".into(),
        ));
    }
    let count = k + d.saturating_sub(1);
    let seq = match kernel {
        ToeplitzKernel::Input => markov_parameters(model, count.max(1)),
        ToeplitzKernel::Noise => noise_markov_parameters(model, count.max(1)),
    };
    let (p, w) = seq[0].shape();
    let mut data = DMatrix::zeros(p * d, w * d);
    for i in 1..d {
        for j in 0..i {
            data.view_mut((i * p, j * w), (p, w))
                .copy_from(&seq[k + i - j - 1]);
        }
    }
    BlockMatrix::new(data, d, d, p, w)
}

/// Spectral norm of `pad(small) − big`, where `small` is zero-extended to the
/// block grid of `big`.
pub fn padded_diff_norm(small: &BlockMatrix, big: &BlockMatrix) -> Result<f64> {
    if small.block_height != big.block_height || small.block_width != big.block_width {
        return Err(SysIdError::Dimension(format!(
            "block sizes differ: {}x{} vs {}x{}",
            small.block_height, small.block_width, big.block_height, big.block_width
        )));
    }
    if small.block_rows > big.block_rows || small.block_cols > big.block_cols {
        return Err(SysIdError::Dimension(format!(
            "{}x{} block grid does not fit inside {}x{}",
            small.block_rows, small.block_cols, big.block_rows, big.block_cols
        )));
    }
    let mut diff = -big.data.clone();
    let (r, c) = small.data.shape();
    let mut corner = diff.view_mut((0, 0), (r, c));
    corner += &small.data;
    Ok(spectral_norm(&diff))
}

/// Extended observability matrix `[C; CA; …; CA^{blocks−1}]`.
pub fn observability(model: &StateSpaceModel, blocks: usize) -> DMatrix<f64> {
    let p = model.p();
    let seq = noise_markov_parameters(model, blocks);
    let mut out = DMatrix::zeros(p * blocks, model.n());
    for (i, blk) in seq.iter().enumerate() {
        out.rows_mut(i * p, p).copy_from(blk);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_half() -> StateSpaceModel {
        StateSpaceModel::scalar(1.0, 0.5, 1.0)
    }

    #[test]
    fn scalar_markov_is_geometric() {
        let mk = markov_parameters(&scalar_half(), 3);
        let vals: Vec<f64> = mk.iter().map(|m| m[(0, 0)]).collect();
        assert_eq!(vals, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn single_markov_parameter_is_cb() {
        let m = StateSpaceModel::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.2]),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        )
        .unwrap();
        let mk = markov_parameters(&m, 1);
        assert_eq!(mk.len(), 1);
        assert_eq!(mk[0], m.c() * m.b());
    }

    #[test]
    fn scalar_hankel_2x2() {
        let h = build_hankel(&scalar_half(), 0, 2, 2).unwrap();
        assert_eq!(h.data, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.25]));
    }

    #[test]
    fn shifted_hankel_is_slice_of_larger_one() {
        let m = StateSpaceModel::new(
            DMatrix::from_row_slice(1, 2, &[1.0, -0.5]),
            DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.3, 0.4]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 2.0]),
        )
        .unwrap();
        let d = 3;
        let shifted = build_hankel(&m, d, 4, 5).unwrap();
        let big = build_hankel(&m, 0, 4 + d, 5).unwrap();
        let slice = big.data.rows(d * m.p(), 4 * m.p()).into_owned();
        assert_eq!(shifted.data, slice);
    }

    #[test]
    fn scalar_toeplitz_input() {
        let t = build_toeplitz(&scalar_half(), 0, 3, ToeplitzKernel::Input).unwrap();
        let expect =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 1.0, 0.0]);
        assert_eq!(t.data, expect);
    }

    #[test]
    fn toeplitz_of_size_one_is_zero() {
        let t = build_toeplitz(&scalar_half(), 0, 1, ToeplitzKernel::Input).unwrap();
        assert_eq!(t.data, DMatrix::zeros(1, 1));
    }

    #[test]
    fn noise_toeplitz_with_identity_output_and_zero_dynamics() {
        let n = 2;
        let m = StateSpaceModel::new(
            DMatrix::identity(n, n),
            DMatrix::zeros(n, n),
            DMatrix::from_element(n, 1, 1.0),
        )
        .unwrap();
        let t = build_toeplitz(&m, 0, 3, ToeplitzKernel::Noise).unwrap();
        assert_eq!(t.data.shape(), (6, 6));
        for bi in 0..3 {
            for bj in 0..3 {
                let expect = if bi == bj + 1 {
                    DMatrix::identity(n, n)
                } else {
                    DMatrix::zeros(n, n)
                };
                assert_eq!(t.block(bi, bj), expect, "block ({bi},{bj})");
            }
        }
    }

    #[test]
    fn padded_diff_of_equal_matrices_is_zero() {
        let h = build_hankel(&scalar_half(), 0, 4, 4).unwrap();
        assert_eq!(padded_diff_norm(&h, &h).unwrap(), 0.0);
    }

    #[test]
    fn padded_diff_against_own_padding_is_zero() {
        let h = build_hankel(&scalar_half(), 0, 2, 3).unwrap();
        let mut padded = DMatrix::zeros(5, 6);
        padded.view_mut((0, 0), (2, 3)).copy_from(&h.data);
        let big = BlockMatrix::new(padded, 5, 6, 1, 1).unwrap();
        assert_eq!(padded_diff_norm(&h, &big).unwrap(), 0.0);
    }

    #[test]
    fn padded_diff_rejects_mismatched_blocks() {
        let small = BlockMatrix::new(DMatrix::zeros(2, 2), 1, 1, 2, 2).unwrap();
        let big = BlockMatrix::new(DMatrix::zeros(4, 4), 4, 4, 1, 1).unwrap();
        assert!(padded_diff_norm(&small, &big).is_err());
        let too_big = BlockMatrix::new(DMatrix::zeros(6, 2), 3, 1, 2, 2).unwrap();
        let host = BlockMatrix::new(DMatrix::zeros(4, 4), 2, 2, 2, 2).unwrap();
        assert!(padded_diff_norm(&too_big, &host).is_err());
    }

    #[test]
    fn scalar_truncation_error_within_sandwich() {
        // ‖H_{2,∞,∞}‖ = a² / (1 − a²) = 1/3 for a = 1/2.
        let m = scalar_half();
        let small = build_hankel(&m, 0, 2, 2).unwrap();
        let big = build_hankel(&m, 0, 60, 60).unwrap();
        let v = padded_diff_norm(&small, &big).unwrap();
        let lo = 1.0 / 3.0;
        assert!(v >= lo - 1e-12 && v <= 2f64.sqrt() * lo + 1e-12, "{v}");
    }

    #[test]
    fn hankel_factors_through_observability_and_reachability() {
        let m = StateSpaceModel::new(
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.5, 0.0, 1.0, -1.0]),
            DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.0, -0.4, 0.2, 0.1, 0.0, 0.3]),
            DMatrix::from_row_slice(3, 1, &[1.0, 0.5, -0.5]),
        )
        .unwrap();
        let h = build_hankel(&m, 0, 6, 7).unwrap();
        let obs = observability(&m, 6);
        let mut reach = DMatrix::zeros(3, 7);
        let mut ak_b = m.b().clone();
        for j in 0..7 {
            reach.column_mut(j).copy_from(&ak_b.column(0));
            ak_b = m.a() * ak_b;
        }
        assert!((&obs * &reach - &h.data).norm() < 1e-12);
        let rank = h.data.rank(1e-10);
        assert!(rank <= 3);
    }
}
