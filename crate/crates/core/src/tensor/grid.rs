use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense row-major real array.
///
/// `grad` is only ever populated by [`Grid::accumulate_grad`]; everything else
/// treats a grid as an immutable value.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    shape: Vec<usize>,
    values: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Grid {
    pub fn new(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Size(format!("zero-sized dimension in {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::Shape {
                axis: "values",
                expected,
                got: values.len(),
            });
        }
        Ok(Grid {
            shape: shape.to_vec(),
            values,
            requires_grad: false,
            grad: None,
        })
    }

    /// Constructor for internal callers that already guarantee the length.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Grid {
            shape,
            values,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self::from_parts(shape.to_vec(), vec![value; shape.iter().product()])
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_parts(vec![1], vec![value])
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), (0..n).map(&mut f).collect())
    }

    pub fn randn<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        Self::from_fn(shape, |_| rng.sample::<f64, _>(StandardNormal))
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| rng.random_range(lo..hi))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for parameter updates.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn with_requires_grad(mut self, flag: bool) -> Self {
        self.requires_grad = flag;
        self
    }

    pub fn set_requires_grad(&mut self, flag: bool) {
        self.requires_grad = flag;
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Adds `g` into the stored gradient. Repeated calls accumulate.
    pub fn accumulate_grad(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.values.len() {
            return Err(Error::Shape {
                axis: "grad",
                expected: self.values.len(),
                got: g.len(),
            });
        }
        match &mut self.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => self.grad = Some(g.to_vec()),
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.len() {
            return Err(Error::Shape {
                axis: "reshape",
                expected: self.len(),
                got: n,
            });
        }
        Ok(Self::from_parts(shape.to_vec(), self.values.clone()))
    }

    /// Interprets the trailing dims as `[C, H, W]` (rank 3) or `[N, C, H, W]` (rank 4).
    pub fn nchw(&self) -> Result<[usize; 4]> {
        match *self.shape.as_slice() {
            [c, h, w] => Ok([1, c, h, w]),
            [n, c, h, w] => Ok([n, c, h, w]),
            _ => Err(Error::Size(format!(
                "expected [C,H,W] or [N,C,H,W], got {:?}",
                self.shape
            ))),
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.values[o] = v;
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.shape.len(), "index rank");
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| {
                assert!(i < d, "index {i} out of bounds for dim {d}");
                acc * d + i
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.shape.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::from_parts(
            self.shape.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Grid) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Grid) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Grid) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_same_shape(&self, other: &Grid) -> Result<()> {
        if self.shape.len() != other.shape.len() {
            return Err(Error::Shape {
                axis: "rank",
                expected: self.shape.len(),
                got: other.shape.len(),
            });
        }
        for (axis, (&a, &b)) in ["dim0", "dim1", "dim2", "dim3", "dim4"]
            .iter()
            .zip(self.shape.iter().zip(&other.shape))
        {
            if a != b {
                return Err(Error::Shape {
                    axis,
                    expected: a,
                    got: b,
                });
            }
        }
        Ok(())
    }

    /// Sample `n` of an `[N, ...]` grid as a `[1, ...]` grid.
    pub fn sample(&self, n: usize) -> Self {
        let per = self.len() / self.shape[0];
        let mut shape = self.shape.clone();
        shape[0] = 1;
        Self::from_parts(shape, self.values[n * per..(n + 1) * per].to_vec())
    }

    /// Stacks same-shaped `[1, ...]` grids along the leading axis.
    pub fn stack(items: &[Grid]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::invalid("stack of zero grids"))?;
        let mut values = Vec::with_capacity(first.len() * items.len());
        for g in items {
            first.check_same_shape(g)?;
            values.extend_from_slice(&g.values);
        }
        let mut shape = first.shape.clone();
        shape[0] *= items.len();
        Ok(Self::from_parts(shape, values))
    }

    /// Nearest-neighbour resample of every `[H, W]` plane to `[h, w]`.
    pub fn resize_nearest(&self, h: usize, w: usize) -> Result<Self> {
        let [n, c, sh, sw] = self.nchw()?;
        let mut out = Vec::with_capacity(n * c * h * w);
        for plane in self.values.chunks(sh * sw) {
            for y in 0..h {
                let sy = y * sh / h;
                for x in 0..w {
                    out.push(plane[sy * sw + x * sw / w]);
                }
            }
        }
        let mut shape = self.shape.clone();
        let r = shape.len();
        shape[r - 2] = h;
        shape[r - 1] = w;
        Ok(Self::from_parts(shape, out))
    }
}
