//! Dense channel-major 3D tensor: index (c, x, y, z) with x fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub channels: usize,
    pub dims: (usize, usize, usize),
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, dims: (usize, usize, usize)) -> Tensor {
        Tensor {
            channels,
            dims,
            data: vec![0.0; channels * dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_data(
        channels: usize,
        dims: (usize, usize, usize),
        data: Vec<f64>,
    ) -> Result<Tensor> {
        let expect = channels * dims.0 * dims.1 * dims.2;
        if data.len() != expect {
            return Err(Error::InvalidArgument(format!(
                "tensor data length {} does not match {channels} x {dims:?}",
                data.len()
            )));
        }
        Ok(Tensor {
            channels,
            dims,
            data,
        })
    }

    #[inline]
    pub fn idx(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        let (w, h, _) = self.dims;
        ((c * self.dims.2 + z) * h + y) * w + x
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.idx(c, x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, z: usize, v: f64) {
        let i = self.idx(c, x, y, z);
        self.data[i] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}
