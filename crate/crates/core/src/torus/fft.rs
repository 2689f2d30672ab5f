//! Multi-dimensional FFT and cached spectral tables per grid.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use super::TorusGrid;

pub(crate) struct Spectral {
    pub grid: TorusGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `∂_j` multiplier per node, one table per complex direction. The
    /// `∂̄_j` multiplier is `−conj` of it.
    pub mu: Vec<Vec<C64>>,
    /// Node retained by the 2/3-rule truncation.
    pub keep: Vec<bool>,
    /// Node of the negated wavevector.
    pub neg: Vec<u32>,
}

thread_local! {
    /// FFT scratch and transpose buffer, reused across transforms.
    static BUFFERS: RefCell<(Vec<C64>, Vec<C64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

static CACHE: OnceLock<Mutex<HashMap<TorusGrid, Arc<Spectral>>>> = OnceLock::new();

pub(crate) fn spectral(grid: TorusGrid) -> Arc<Spectral> {
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("spectral cache poisoned");
    map.entry(grid).or_insert_with(|| Arc::new(Spectral::new(grid))).clone()
}

impl Spectral {
    fn new(grid: TorusGrid) -> Self {
        let size = grid.size();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let nodes = grid.nodes();
        let axes = grid.axes();
        let half = (size / 2) as i64;
        // differentiated wavenumber: Nyquist treated as zero
        let wn: Vec<f64> = (0..size)
            .map(|i| {
                let k = grid.wavenumber(i);
                if k == -half {
                    0.0
                } else {
                    k as f64
                }
            })
            .collect();
        let cut = grid.cutoff() as i64;
        let mut mu = vec![vec![C64::new(0.0, 0.0); nodes]; grid.dim()];
        let mut keep = vec![false; nodes];
        let mut neg = vec![0u32; nodes];
        let mut idx = vec![0usize; axes];
        for node in 0..nodes {
            for j in 0..grid.dim() {
                let m = wn[idx[2 * j]];
                let l = wn[idx[2 * j + 1]];
                mu[j][node] = C64::new(PI * l, PI * m);
            }
            keep[node] = idx.iter().all(|&i| grid.wavenumber(i).abs() <= cut);
            let mut nn = 0usize;
            for &i in &idx {
                nn = nn * size + (size - i) % size;
            }
            neg[node] = nn as u32;
            // advance the multi-index, last axis fastest
            for a in (0..axes).rev() {
                idx[a] += 1;
                if idx[a] < size {
                    break;
                }
                idx[a] = 0;
            }
        }
        Spectral { grid, fwd, inv, mu, keep, neg }
    }

    /// In-place unnormalised forward transform.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, &self.fwd);
    }

    /// In-place inverse transform, normalised so that it undoes
    /// [`Spectral::forward`].
    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let size = self.grid.size();
        let axes = self.grid.axes();
        debug_assert_eq!(data.len(), self.grid.nodes());
        // FFT the contiguous last axis, then transpose so the next axis
        // becomes last; after one round per axis the layout is restored.
        BUFFERS.with(|cell| {
            let (scratch, tmp) = &mut *cell.borrow_mut();
            scratch.resize(fft.get_inplace_scratch_len(), C64::new(0.0, 0.0));
            tmp.resize(data.len(), C64::new(0.0, 0.0));
            let rows = data.len() / size;
            for round in 0..axes {
                let (src, dst) = if round % 2 == 0 { (&mut *data, &mut tmp[..]) } else { (&mut tmp[..], &mut *data) };
                fft.process_with_scratch(src, scratch);
                transpose::transpose(src, dst, size, rows);
            }
            if axes % 2 == 1 {
                data.copy_from_slice(tmp);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_lands_on_its_wavevector() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let sp = spectral(grid);
        let mut data: Vec<C64> = (0..grid.nodes())
            .map(|node| {
                let x = grid.coords(node);
                let phase = 2.0 * PI * (2.0 * x[0] - x[1] + 3.0 * x[3]);
                C64::new(phase.cos(), phase.sin())
            })
            .collect();
        let orig = data.clone();
        sp.forward(&mut data);
        let target = ((2 * 8 + 7) * 8 + 0) * 8 + 3;
        for (node, v) in data.iter().enumerate() {
            let want = if node == target { grid.nodes() as f64 } else { 0.0 };
            assert!((v - want).norm() < 1e-9, "node {node}: {v}");
        }
        sp.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
        assert_eq!(sp.neg[target] as usize, ((6 * 8 + 1) * 8 + 0) * 8 + 5);
    }
}
