//! Small dense complex matrix helpers (row-major, n ≤ 6).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Cholesky factorisation of a Hermitian matrix. Writes the inverse into
/// `inv` and returns the (real, positive) determinant, or `None` when the
/// matrix is not positive definite.
pub(crate) fn hermitian_inverse(n: usize, g: &[C64], inv: &mut [C64]) -> Option<f64> {
    if n == 2 {
        let (a, d, b) = (g[0].re, g[3].re, g[1]);
        let det = a * d - b.norm_sqr();
        if !(a > 0.0 && det > 0.0 && det.is_finite()) {
            return None;
        }
        let r = 1.0 / det;
        inv[0] = C64::new(d * r, 0.0);
        inv[1] = -b * r;
        inv[2] = -b.conj() * r;
        inv[3] = C64::new(a * r, 0.0);
        return Some(det);
    }
    let mut l = [C64::new(0.0, 0.0); 36];
    let mut det = 1.0;
    for j in 0..n {
        let mut d = g[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        det *= d;
        l[j * n + j] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    // m = L^{-1}, lower triangular
    let mut m = [C64::new(0.0, 0.0); 36];
    for j in 0..n {
        m[j * n + j] = C64::new(1.0, 0.0) / l[j * n + j];
        for i in j + 1..n {
            let mut s = C64::new(0.0, 0.0);
            for k in j..i {
                s += l[i * n + k] * m[k * n + j];
            }
            m[i * n + j] = -s / l[i * n + i];
        }
    }
    // G^{-1} = L^{-*} L^{-1} = m^* m
    for i in 0..n {
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in i.max(j)..n {
                s += m[k * n + i].conj() * m[k * n + j];
            }
            inv[i * n + j] = s;
        }
    }
    Some(det)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn hermitian_eigenvalues(n: usize, g: &[C64]) -> Vec<f64> {
    match n {
        1 => vec![g[0].re],
        2 => {
            let a = g[0].re;
            let d = g[3].re;
            let b = g[1];
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            vec![mean - rad, mean + rad]
        }
        _ => {
            let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (g[i * n + j] + g[j * n + i].conj()));
            let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        }
    }
}

/// Determinant by Gaussian elimination with partial pivoting; `m` is
/// overwritten.
pub(crate) fn det_in_place(k: usize, m: &mut [C64]) -> C64 {
    match k {
        0 => return C64::new(1.0, 0.0),
        1 => return m[0],
        2 => return m[0] * m[3] - m[1] * m[2],
        _ => {}
    }
    let mut det = C64::new(1.0, 0.0);
    for c in 0..k {
        let mut piv = c;
        let mut best = m[c * k + c].norm_sqr();
        for r in c + 1..k {
            let v = m[r * k + c].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != c {
            for j in 0..k {
                m.swap(c * k + j, piv * k + j);
            }
            det = -det;
        }
        let p = m[c * k + c];
        det *= p;
        for r in c + 1..k {
            let f = m[r * k + c] / p;
            if f != C64::new(0.0, 0.0) {
                for j in c..k {
                    let v = m[c * k + j];
                    m[r * k + j] -= f * v;
                }
            }
        }
    }
    det
}

/// k-th compound matrix: entry `[rank(R)][rank(C)]` is the minor
/// `det h[R, C]` over row and column subsets of size k.
pub(crate) fn compound(n: usize, h: &[C64], subsets: &[u32], out: &mut Vec<C64>) {
    let m = subsets.len();
    if out.len() != m * m {
        out.clear();
        out.resize(m * m, C64::new(0.0, 0.0));
    }
    let k = subsets.first().map_or(0, |s| s.count_ones() as usize);
    if k == 0 {
        out[0] = C64::new(1.0, 0.0);
        return;
    }
    if k == 1 {
        for (a, &r) in subsets.iter().enumerate() {
            for (b, &c) in subsets.iter().enumerate() {
                out[a * m + b] = h[r.trailing_zeros() as usize * n + c.trailing_zeros() as usize];
            }
        }
        return;
    }
    let mut rows = [0usize; 6];
    let mut cols = [0usize; 6];
    let mut buf = [C64::new(0.0, 0.0); 36];
    for (a, &r) in subsets.iter().enumerate() {
        bits(r, &mut rows);
        for (b, &c) in subsets.iter().enumerate() {
            bits(c, &mut cols);
            for i in 0..k {
                for j in 0..k {
                    buf[i * k + j] = h[rows[i] * n + cols[j]];
                }
            }
            out[a * m + b] = det_in_place(k, &mut buf[..k * k]);
        }
    }
}

fn bits(mut mask: u32, out: &mut [usize; 6]) {
    let mut i = 0;
    while mask != 0 {
        out[i] = mask.trailing_zeros() as usize;
        mask &= mask - 1;
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_hermitian_matrix() {
        let n = 3;
        let g = [
            C64::new(2.0, 0.0),
            C64::new(0.3, 0.1),
            C64::new(0.0, -0.2),
            C64::new(0.3, -0.1),
            C64::new(1.5, 0.0),
            C64::new(0.1, 0.0),
            C64::new(0.0, 0.2),
            C64::new(0.1, 0.0),
            C64::new(1.0, 0.0),
        ];
        let mut inv = [C64::new(0.0, 0.0); 9];
        let det = hermitian_inverse(n, &g, &mut inv).unwrap();
        for i in 0..n {
            for j in 0..n {
                let s: C64 = (0..n).map(|k| g[i * n + k] * inv[k * n + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).norm() < 1e-14);
            }
        }
        let mut m = g;
        assert!((det_in_place(3, &mut m) - det).norm() < 1e-14);
        let ev = hermitian_eigenvalues(n, &g);
        assert!((ev.iter().product::<f64>() - det).abs() < 1e-13);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let g = [C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(2.0, 0.0), C64::new(1.0, 0.0)];
        let mut inv = [C64::new(0.0, 0.0); 4];
        assert!(hermitian_inverse(2, &g, &mut inv).is_none());
        assert_eq!(hermitian_eigenvalues(2, &g), vec![-1.0, 3.0]);
    }
}
