//! Dense complex tensors with a fixed row-major linearization, and pairwise
//! contraction over named axis pairs.
//!
//! Contraction is lowered to a single matrix product: the free axes of `a` are
//! permuted to the front and the paired axes to the back, `b` the other way
//! round, and both are reshaped into matrices.

use ndarray::{Array, Array2, ArrayBase, ArrayD, Data, Dimension, IntoDimension, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Row-major reshape that first copies the array into standard layout if
/// needed (matrix products of degenerate shapes may come back in column-major
/// order).
pub(crate) trait Reshaped {
    type Elem;
    fn reshaped<E: IntoDimension>(self, shape: E) -> Array<Self::Elem, E::Dim>;
}

impl<A: Clone, S: Data<Elem = A>, D: Dimension> Reshaped for ArrayBase<S, D> {
    type Elem = A;

    fn reshaped<E: IntoDimension>(self, shape: E) -> Array<A, E::Dim> {
        let owned = if self.is_standard_layout() { self.into_owned() } else { self.as_standard_layout().into_owned() };
        owned.into_shape_with_order(shape).expect("reshape preserves the element count")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    data: ArrayD<C64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<C64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} amplitudes, got {}",
                data.len()
            )));
        }
        Self::from_array(ArrayD::from_shape_vec(IxDyn(shape), data)?)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { data: ArrayD::zeros(IxDyn(shape)) }
    }

    pub fn from_fn<F: FnMut(&[usize]) -> C64>(shape: &[usize], mut f: F) -> Self {
        let data = ArrayD::from_shape_fn(IxDyn(shape), |idx| f(idx.slice()));
        Tensor { data }
    }

    pub fn from_array(data: ArrayD<C64>) -> Result<Self> {
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("tensor"));
        }
        // Normalize to standard layout so `data()` is always row-major.
        let data = if data.is_standard_layout() { data } else { data.as_standard_layout().into_owned() };
        Ok(Tensor { data })
    }

    pub fn from_matrix(m: Array2<C64>) -> Result<Self> {
        Self::from_array(m.into_dyn())
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn rank(&self) -> usize {
        self.data.ndim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Amplitudes in row-major order.
    pub fn data(&self) -> &[C64] {
        self.data.as_slice().expect("tensor storage is standard layout")
    }

    pub fn array(&self) -> &ArrayD<C64> {
        &self.data
    }

    pub fn into_array(self) -> ArrayD<C64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[IxDyn(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        self.data[idx] = value;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        check_permutation(axes, self.rank())?;
        Ok(Tensor { data: self.data.clone().permuted_axes(IxDyn(axes)).as_standard_layout().into_owned() })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != self.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {shape:?}", self.shape())));
        }
        Ok(Tensor { data: self.data.clone().into_shape_with_order(IxDyn(shape))? })
    }

    /// The tensor as a matrix; fails unless it has exactly two indices.
    pub fn to_matrix(&self) -> Result<Array2<C64>> {
        if self.rank() != 2 {
            return Err(Error::Shape(format!("expected a two-index tensor, got shape {:?}", self.shape())));
        }
        Ok(self.data.clone().into_dimensionality()?)
    }

    /// Largest absolute deviation from `other`.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(self.data.iter().zip(other.data.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

fn check_permutation(axes: &[usize], rank: usize) -> Result<()> {
    if axes.len() != rank {
        return Err(Error::Shape(format!("permutation {axes:?} has wrong length for rank {rank}")));
    }
    let mut seen = vec![false; rank];
    for &ax in axes {
        if ax >= rank {
            return Err(Error::AxisOutOfRange { axis: ax, rank });
        }
        if seen[ax] {
            return Err(Error::Shape(format!("axis {ax} repeated in permutation {axes:?}")));
        }
        seen[ax] = true;
    }
    Ok(())
}

/// Sum over the paired axes of `a` and `b`. The result carries the unpaired
/// axes of `a` followed by the unpaired axes of `b`, each in original order.
pub fn contract(a: &Tensor, b: &Tensor, pairs: &[(usize, usize)]) -> Result<Tensor> {
    let (ra, rb) = (a.rank(), b.rank());
    let mut used_a = vec![false; ra];
    let mut used_b = vec![false; rb];
    for &(ia, ib) in pairs {
        if ia >= ra {
            return Err(Error::AxisOutOfRange { axis: ia, rank: ra });
        }
        if ib >= rb {
            return Err(Error::AxisOutOfRange { axis: ib, rank: rb });
        }
        if used_a[ia] || used_b[ib] {
            return Err(Error::Shape(format!("axis listed twice in contraction pairs {pairs:?}")));
        }
        if a.shape()[ia] != b.shape()[ib] {
            return Err(Error::Shape(format!(
                "paired axes ({ia}, {ib}) have dimensions {} and {}",
                a.shape()[ia],
                b.shape()[ib]
            )));
        }
        used_a[ia] = true;
        used_b[ib] = true;
    }
    let free_a: Vec<usize> = (0..ra).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..rb).filter(|&i| !used_b[i]).collect();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();

    let rows: usize = free_a.iter().map(|&i| a.shape()[i]).product();
    let inner: usize = pairs.iter().map(|p| a.shape()[p.0]).product();
    let cols: usize = free_b.iter().map(|&i| b.shape()[i]).product();

    let am = a.permute(&perm_a)?.into_array().into_shape_with_order((rows, inner))?;
    let bm = b.permute(&perm_b)?.into_array().into_shape_with_order((inner, cols))?;
    let prod = am.dot(&bm);

    let out_shape: Vec<usize> =
        free_a.iter().map(|&i| a.shape()[i]).chain(free_b.iter().map(|&i| b.shape()[i])).collect();
    Ok(Tensor { data: prod.reshaped(IxDyn(&out_shape)) })
}
