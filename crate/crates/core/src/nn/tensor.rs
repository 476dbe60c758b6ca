use crate::error::{Error, Result};

use super::scalar::Scalar;

/// Dense `(batch, channels, length)` tensor in row-major order.
///
/// Flattened activations are carried as `(batch, features, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(batch: usize, channels: usize, length: usize) -> Self {
        Tensor3 {
            dims: [batch, channels, length],
            data: vec![T::zero(); batch * channels * length],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<T>) -> Result<Self> {
        let want = dims.iter().product::<usize>();
        if data.len() != want {
            return Err(Error::shape(
                "tensor data",
                format!("{want} values for dims {dims:?}"),
                data.len(),
            ));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let [b, c, l] = dims;
        let mut data = Vec::with_capacity(b * c * l);
        for bi in 0..b {
            for ci in 0..c {
                for li in 0..l {
                    data.push(f(bi, ci, li));
                }
            }
        }
        Tensor3 { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn length(&self) -> usize {
        self.dims[2]
    }

    /// Features per example, `channels · length`.
    pub fn row_len(&self) -> usize {
        self.dims[1] * self.dims[2]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, b: usize, c: usize, l: usize) -> T {
        self.data[(b * self.dims[1] + c) * self.dims[2] + l]
    }

    pub fn set(&mut self, b: usize, c: usize, l: usize, v: T) {
        let i = (b * self.dims[1] + c) * self.dims[2] + l;
        self.data[i] = v;
    }

    /// One example's `channels × length` block.
    pub fn example(&self, b: usize) -> &[T] {
        let n = self.row_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn example_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.row_len();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn reshape(mut self, dims: [usize; 3]) -> Result<Self> {
        if dims.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape(
                "reshape",
                self.data.len(),
                format!("{dims:?}"),
            ));
        }
        self.dims = dims;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor3<U> {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&x| U::of(x.f64())).collect(),
        }
    }

    /// Copies the listed examples into a new batch.
    pub fn gather(&self, rows: &[usize]) -> Self {
        let n = self.row_len();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            data.extend_from_slice(self.example(r));
        }
        Tensor3 {
            dims: [rows.len(), self.dims[1], self.dims[2]],
            data,
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.dims, other.dims);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
