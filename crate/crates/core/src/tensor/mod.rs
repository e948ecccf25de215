//! Dense rank-4 tensors and the differentiable operations the network needs.
//!
//! Tensors are laid out `(t, h, w, c)`, channels fastest. Every operation is
//! a pair of plain functions: a forward pass returning whatever the backward
//! pass needs, and a backward pass mapping an upstream gradient to input and
//! parameter gradients.

pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod pool;
mod real;

pub use real::Real;
pub(crate) use real::{gemm, MatRef};

use serde::{Deserialize, Serialize};

use crate::error::{LivrError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape4 {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape4 {
    pub const fn new(t: usize, h: usize, w: usize, c: usize) -> Self {
        Self { t, h, w, c }
    }

    pub fn len(&self) -> usize {
        self.t * self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of `(t, y, x)` positions.
    pub fn positions(&self) -> usize {
        self.t * self.h * self.w
    }

    pub fn with_c(self, c: usize) -> Self {
        Self { c, ..self }
    }

    pub fn index(&self, t: usize, y: usize, x: usize, c: usize) -> usize {
        ((t * self.h + y) * self.w + x) * self.c + c
    }
}

impl std::fmt::Display for Shape4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.t, self.h, self.w, self.c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    shape: Shape4,
    data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(shape: Shape4) -> Self {
        Self { shape, data: vec![T::zero(); shape.len()] }
    }

    pub fn filled(shape: Shape4, v: T) -> Self {
        Self { shape, data: vec![v; shape.len()] }
    }

    pub fn from_vec(shape: Shape4, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(LivrError::ShapeMismatch(format!(
                "{} values for shape {shape}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, t: usize, y: usize, x: usize, c: usize) -> T {
        self.data[self.shape.index(t, y, x, c)]
    }

    pub fn set(&mut self, t: usize, y: usize, x: usize, c: usize, v: T) {
        let i = self.shape.index(t, y, x, c);
        self.data[i] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Element type conversion.
    pub fn cast<U: Real>(&self) -> Tensor4<U> {
        Tensor4 { shape: self.shape, data: self.data.iter().map(|v| U::of(v.as_f64())).collect() }
    }
}
