//! Exterior calculus for form fields on the flat torus ℂⁿ/ℤ²ⁿ.
//!
//! The real coordinates are ordered `(x¹, y¹, x², y², …)` with
//! `zʲ = xʲ + √−1 yʲ`, each of period 1, sampled on a uniform grid of `N`
//! points per axis. Nodes are stored row-major with the last axis
//! contiguous. Derivatives are Fourier multipliers:
//! `∂/∂zʲ = ½(∂/∂xʲ − √−1 ∂/∂yʲ)`, so the mode `exp 2π√−1(m x + l y)` is
//! multiplied by `π(l + √−1 m)` under `∂` and by `π(√−1 m − l)` under `∂̄`.
//! The Nyquist wavenumber is differentiated as zero.

mod calculus;
mod fft;
mod field;
mod metric;

pub use calculus::{
    chern_form, codifferential_del_bar_star, codifferential_del_star, d_residual, del, del_bar,
    del_bar_star_fundamental, global_inner_product, hodge_star, inner_product_density, integrate,
    integrate_abs, random_ddbar_exact, random_field, residual_norms, trace_g, ResidualNorms,
};
pub use field::{FormField, ScalarField, Spectrum};
pub use metric::{min_eigenvalue_of_omega, MetricField};

pub(crate) use fft::spectral;

use crate::error::{Error, Result};

/// Default cap on `N^{2n}`.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    n: usize,
    size: usize,
}

impl TorusGrid {
    /// A grid with `size` points per real axis on the complex `n`-torus.
    pub fn new(n: usize, size: usize) -> Result<Self> {
        TorusGrid::with_budget(n, size, DEFAULT_NODE_BUDGET)
    }

    pub fn with_budget(n: usize, size: usize, budget: usize) -> Result<Self> {
        if n == 0 || n > 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        if size < 8 || size % 2 != 0 {
            return Err(Error::InvalidGrid(format!("points per axis must be even and at least 8, got {size}")));
        }
        let nodes = (size as u128).pow(2 * n as u32);
        if nodes > budget as u128 {
            return Err(Error::InvalidGrid(format!("{nodes} nodes exceed the budget of {budget}")));
        }
        Ok(TorusGrid { n, size })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Points per real axis.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn axes(&self) -> usize {
        2 * self.n
    }

    pub fn nodes(&self) -> usize {
        self.size.pow(2 * self.n as u32)
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.size as f64
    }

    /// Largest retained wavenumber magnitude under the 2/3 rule.
    pub fn cutoff(&self) -> usize {
        (self.size - 1) / 3
    }

    /// Signed wavenumber of axis index `i`; the Nyquist index maps to `−N/2`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.size as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Axis indices of a node.
    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes()];
        let mut rest = node;
        for a in (0..self.axes()).rev() {
            idx[a] = rest % self.size;
            rest /= self.size;
        }
        idx
    }

    /// Real coordinates `(x¹, y¹, …)` of a node.
    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node).into_iter().map(|i| i as f64 * self.spacing()).collect()
    }
}

/// Sum in a fixed pairwise order, independent of thread count.
pub(crate) fn pairwise_sum<T>(v: &[T]) -> T
where
    T: Copy + Default + std::ops::Add<Output = T>,
{
    if v.len() <= 64 {
        return v.iter().fold(T::default(), |a, &b| a + b);
    }
    let (l, r) = v.split_at(v.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}
