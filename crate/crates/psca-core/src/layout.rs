use std::ops::Range;

use crate::error::{CoreError, Result};

/// Partition of a flat variable vector into contiguous blocks.
///
/// Blocks are never copied for read access: a block is a slice of the flat
/// vector at `offsets[i]..offsets[i] + dims[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(CoreError::invalid("block layout needs at least one block"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(CoreError::invalid("block dimensions must be positive"));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for &d in &dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(BlockLayout { dims, offsets })
    }

    /// `n` scalar blocks.
    pub fn scalar(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    /// Contiguous blocks of `block_size` coordinates; the last block may be
    /// shorter.
    pub fn split(total_dim: usize, block_size: usize) -> Result<Self> {
        if total_dim == 0 {
            return Err(CoreError::invalid("total dimension must be positive"));
        }
        if block_size == 0 || block_size > total_dim {
            return Err(CoreError::invalid(format!(
                "block size {block_size} not in 1..={total_dim}"
            )));
        }
        let mut dims = vec![block_size; total_dim / block_size];
        let rem = total_dim % block_size;
        if rem > 0 {
            dims.push(rem);
        }
        Self::new(dims)
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    #[inline]
    pub fn block_dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    #[inline]
    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    #[inline]
    pub fn block<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[self.block_range(i)]
    }

    #[inline]
    pub fn block_mut<'a>(&self, x: &'a mut [f64], i: usize) -> &'a mut [f64] {
        &mut x[self.block_range(i)]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn all_scalar(&self) -> bool {
        self.dims.iter().all(|&d| d == 1)
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.total_dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.total_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_empty_and_zero_dims() {
        assert!(BlockLayout::new(vec![]).is_err());
        assert!(BlockLayout::new(vec![2, 0, 1]).is_err());
    }

    #[test]
    fn split_handles_remainder() {
        let layout = BlockLayout::split(5, 2).unwrap();
        assert_eq!(layout.dims(), &[2, 2, 1]);
        assert_eq!(layout.offsets(), &[0, 2, 4, 5]);
        assert_eq!(layout.total_dim(), 5);
    }

    proptest! {
        #[test]
        fn offsets_are_prefix_sums(dims in proptest::collection::vec(1usize..7, 1..40)) {
            let total: usize = dims.iter().sum();
            let layout = BlockLayout::new(dims.clone()).unwrap();
            prop_assert_eq!(layout.offsets()[0], 0);
            prop_assert_eq!(layout.total_dim(), total);
            for i in 0..layout.n_blocks() {
                let r = layout.block_range(i);
                prop_assert_eq!(r.end - r.start, dims[i]);
                prop_assert_eq!(r.start, layout.offsets()[i]);
            }
        }
    }
}
