use num_complex::Complex64 as C64;

use super::{FormField, ScalarField, TorusGrid};
use crate::error::{Error, Result};
use crate::forms::{Bidegree, HermitianMetric};
use crate::linalg;

/// The Hermitian metric `g_{i j̄} = −√−1 ω_{i j̄}` at every node, with
/// inverse and determinant.
#[derive(Clone, Debug)]
pub struct MetricField {
    grid: TorusGrid,
    g: Vec<C64>,
    inv: Vec<C64>,
    /// `inv` by matrix entry, for vectorised contractions.
    inv_entries: Vec<Vec<C64>>,
    det: Vec<f64>,
}

fn node_matrix(omega: &FormField, node: usize, out: &mut [C64]) {
    let n = omega.grid().dim();
    let c = omega.components();
    // the exact Hermitian part of −√−1 ω
    for i in 0..n {
        for j in i..n {
            let (a, b) = (c[i * n + j][node], c[j * n + i][node]);
            let h = 0.5 * C64::new(a.im + b.im, b.re - a.re);
            out[i * n + j] = h;
            out[j * n + i] = h.conj();
        }
    }
}

impl MetricField {
    /// Fails with [`Error::PositivityLost`] at the first node where the
    /// Hermitian part of `−√−1 ω` is not positive definite.
    pub fn from_omega(omega: &FormField) -> Result<Self> {
        let deg = Bidegree::new(1, 1);
        if omega.bidegree() != deg {
            return Err(Error::BidegreeMismatch { expected: deg, found: omega.bidegree() });
        }
        let grid = omega.grid();
        let n = grid.dim();
        let nodes = grid.nodes();
        let nn = n * n;
        let c = omega.components();
        if n == 2 {
            return Self::from_omega_2(grid, c);
        }
        let mut g = vec![C64::new(0.0, 0.0); nodes * nn];
        // the exact Hermitian part of −√−1 ω
        for i in 0..n {
            for j in i..n {
                let (a, b) = (&c[i * n + j], &c[j * n + i]);
                for ((gs, a), b) in g.chunks_exact_mut(nn).zip(a).zip(b) {
                    let h = 0.5 * C64::new(a.im + b.im, b.re - a.re);
                    gs[i * n + j] = h;
                    gs[j * n + i] = h.conj();
                }
            }
        }
        let mut inv = Vec::with_capacity(nodes * nn);
        let mut det = Vec::with_capacity(nodes);
        let mut buf = [C64::new(0.0, 0.0); 9];
        for (node, gs) in g.chunks_exact(nn).enumerate() {
            match linalg::hermitian_inverse(n, gs, &mut buf[..nn]) {
                Some(v) => {
                    det.push(v);
                    inv.extend_from_slice(&buf[..nn]);
                }
                None => {
                    let margin = linalg::hermitian_eigenvalues(n, gs)[0];
                    return Err(Error::PositivityLost { margin, node: Some(node) });
                }
            }
        }
        let inv_entries = (0..nn).map(|k| inv.iter().skip(k).step_by(nn).copied().collect()).collect();
        Ok(MetricField { grid, g, inv, inv_entries, det })
    }

    /// Closed-form 2×2 inverses in a single pass.
    fn from_omega_2(grid: TorusGrid, c: &[Vec<C64>]) -> Result<Self> {
        let nodes = grid.nodes();
        let mut g = Vec::with_capacity(4 * nodes);
        let mut inv = Vec::with_capacity(4 * nodes);
        let mut entries: [Vec<C64>; 4] = std::array::from_fn(|_| Vec::with_capacity(nodes));
        let mut det = Vec::with_capacity(nodes);
        for node in 0..nodes {
            let (w01, w10) = (c[1][node], c[2][node]);
            let a = c[0][node].im;
            let d = c[3][node].im;
            let b = 0.5 * C64::new(w01.im + w10.im, w10.re - w01.re);
            let dt = a * d - b.norm_sqr();
            if !(a > 0.0 && dt > 0.0 && dt.is_finite()) {
                let gs = [C64::new(a, 0.0), b, b.conj(), C64::new(d, 0.0)];
                let margin = linalg::hermitian_eigenvalues(2, &gs)[0];
                return Err(Error::PositivityLost { margin, node: Some(node) });
            }
            let r = 1.0 / dt;
            let h = [C64::new(d * r, 0.0), -b * r, -b.conj() * r, C64::new(a * r, 0.0)];
            g.extend_from_slice(&[C64::new(a, 0.0), b, b.conj(), C64::new(d, 0.0)]);
            inv.extend_from_slice(&h);
            for (e, v) in entries.iter_mut().zip(h) {
                e.push(v);
            }
            det.push(dt);
        }
        Ok(MetricField { grid, g, inv, inv_entries: entries.into(), det })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// `g_{i j̄}` at a node, row-major.
    pub fn matrix(&self, node: usize) -> &[C64] {
        let k = self.grid.dim().pow(2);
        &self.g[node * k..(node + 1) * k]
    }

    /// Inverse matrix at a node, row-major.
    pub fn inverse(&self, node: usize) -> &[C64] {
        let k = self.grid.dim().pow(2);
        &self.inv[node * k..(node + 1) * k]
    }

    /// Entry `k = i·n + j` of the inverse matrix at every node.
    pub(crate) fn inverse_entry(&self, k: usize) -> &[C64] {
        &self.inv_entries[k]
    }

    pub fn det(&self) -> &[f64] {
        &self.det
    }

    pub fn at(&self, node: usize) -> HermitianMetric {
        HermitianMetric::new(self.grid.dim(), self.matrix(node).to_vec()).expect("positive at construction")
    }

    /// Smallest eigenvalue over all nodes.
    pub fn min_margin(&self) -> f64 {
        self.eigen_extremes().0
    }

    /// Smallest and largest eigenvalue over all nodes.
    pub fn eigen_extremes(&self) -> (f64, f64) {
        let n = self.grid.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for node in 0..self.grid.nodes() {
            let ev = linalg::hermitian_eigenvalues(n, self.matrix(node));
            lo = lo.min(ev[0]);
            hi = hi.max(ev[n - 1]);
        }
        (lo, hi)
    }

    /// `log det g`, real.
    pub fn log_det(&self) -> ScalarField {
        let values = self.det.iter().map(|d| C64::new(d.ln(), 0.0)).collect();
        ScalarField::new(self.grid, values).expect("one value per node")
    }
}

/// Smallest eigenvalue of `−√−1 ω` over all nodes, whether or not it is
/// positive.
pub fn min_eigenvalue_of_omega(omega: &FormField) -> f64 {
    let n = omega.grid().dim();
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    let mut lo = f64::INFINITY;
    for node in 0..omega.grid().nodes() {
        node_matrix(omega, node, &mut buf);
        lo = lo.min(linalg::hermitian_eigenvalues(n, &buf)[0]);
    }
    lo
}
