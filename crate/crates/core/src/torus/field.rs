use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::{pairwise_sum, spectral, TorusGrid};
use crate::error::{Error, Result};
use crate::forms::{binomial, Bidegree, ConjPlan, Form, Layout, WedgePlan};

const ZERO: C64 = C64::new(0.0, 0.0);

/// A (p,q)-form sampled at every node of a torus grid, stored one
/// coefficient slot at a time.
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    grid: TorusGrid,
    deg: Bidegree,
    comps: Vec<Vec<C64>>,
}

/// A complex function on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<C64>,
}

/// Fourier coefficients (unnormalised forward DFT) of a [`FormField`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: TorusGrid,
    deg: Bidegree,
    comps: Vec<Vec<C64>>,
}

fn slots(grid: TorusGrid, deg: Bidegree) -> usize {
    binomial(grid.dim(), deg.p) * binomial(grid.dim(), deg.q)
}

fn check_deg(grid: TorusGrid, deg: Bidegree) -> Result<()> {
    if deg.p > grid.dim() || deg.q > grid.dim() {
        return Err(Error::Precondition(format!("bidegree {deg} exceeds dimension {}", grid.dim())));
    }
    Ok(())
}

impl FormField {
    pub fn zeros(grid: TorusGrid, deg: Bidegree) -> Self {
        check_deg(grid, deg).expect("valid bidegree");
        FormField { grid, deg, comps: vec![vec![ZERO; grid.nodes()]; slots(grid, deg)] }
    }

    /// The same form at every node.
    pub fn constant(grid: TorusGrid, form: &Form) -> Result<Self> {
        if form.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { left: grid.dim(), right: form.dim() });
        }
        let comps = form.coeffs().iter().map(|&c| vec![c; grid.nodes()]).collect();
        Ok(FormField { grid, deg: form.bidegree(), comps })
    }

    /// Samples `f` at the real coordinates `(x¹, y¹, …)` of every node.
    pub fn from_fn(grid: TorusGrid, deg: Bidegree, f: impl Fn(&[f64]) -> Form) -> Result<Self> {
        check_deg(grid, deg)?;
        let mut out = FormField::zeros(grid, deg);
        for node in 0..grid.nodes() {
            let form = f(&grid.coords(node));
            if form.bidegree() != deg || form.dim() != grid.dim() {
                return Err(Error::BidegreeMismatch { expected: deg, found: form.bidegree() });
            }
            for (comp, &c) in out.comps.iter_mut().zip(form.coeffs()) {
                comp[node] = c;
            }
        }
        Ok(out)
    }

    /// Builds a field from per-slot node arrays (slot order as in [`Form`]).
    pub fn from_components(grid: TorusGrid, deg: Bidegree, comps: Vec<Vec<C64>>) -> Result<Self> {
        check_deg(grid, deg)?;
        let want = slots(grid, deg);
        if comps.len() != want {
            return Err(Error::DimensionMismatch { left: want, right: comps.len() });
        }
        if let Some(c) = comps.iter().find(|c| c.len() != grid.nodes()) {
            return Err(Error::DimensionMismatch { left: grid.nodes(), right: c.len() });
        }
        Ok(FormField { grid, deg, comps })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn bidegree(&self) -> Bidegree {
        self.deg
    }

    pub fn components(&self) -> &[Vec<C64>] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<C64>] {
        &mut self.comps
    }

    /// The form at one node.
    pub fn at(&self, node: usize) -> Form {
        let coeffs = self.comps.iter().map(|c| c[node]).collect();
        Form::from_coeffs(self.grid.dim(), self.deg, coeffs).expect("consistent layout")
    }

    pub fn set(&mut self, node: usize, form: &Form) {
        assert_eq!(form.bidegree(), self.deg);
        for (comp, &c) in self.comps.iter_mut().zip(form.coeffs()) {
            comp[node] = c;
        }
    }

    pub fn wedge(&self, other: &FormField) -> Result<FormField> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch { left: self.grid.nodes(), right: other.grid.nodes() });
        }
        let plan = WedgePlan::new(self.grid.dim(), self.deg, other.deg);
        let mut out = FormField::zeros(self.grid, plan.out);
        for &(ia, ib, io, s) in &plan.terms {
            let (a, b) = (&self.comps[ia as usize], &other.comps[ib as usize]);
            for ((o, &x), &y) in out.comps[io as usize].iter_mut().zip(a).zip(b) {
                *o += x * y * s;
            }
        }
        Ok(out)
    }

    /// `a^k` pointwise, with `a^0 = 1`.
    pub fn power(&self, k: usize) -> FormField {
        let mut out = FormField::constant(self.grid, &Form::one(self.grid.dim())).expect("same grid");
        for _ in 0..k {
            out = self.wedge(&out).expect("same grid");
        }
        out
    }

    pub fn conjugate(&self) -> FormField {
        let plan = ConjPlan::new(self.grid.dim(), self.deg);
        let mut comps = vec![Vec::new(); self.comps.len()];
        for (idx, &o) in plan.map.iter().enumerate() {
            comps[o] = self.comps[idx].iter().map(|v| v.conj() * plan.sign).collect();
        }
        FormField { grid: self.grid, deg: plan.out, comps }
    }

    pub fn scale(&self, c: C64) -> FormField {
        let comps = self.comps.iter().map(|v| v.iter().map(|&x| x * c).collect()).collect();
        FormField { grid: self.grid, deg: self.deg, comps }
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: C64, other: &FormField) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &FormField) -> Result<FormField> {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn checked_sub(&self, other: &FormField) -> Result<FormField> {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// Flat L² norm: `sqrt(mean over nodes of Σ |coefficient|²)`.
    pub fn l2_norm(&self) -> f64 {
        let nodes = self.grid.nodes();
        let mut dens = vec![0.0; nodes];
        for comp in &self.comps {
            for (d, c) in dens.iter_mut().zip(comp) {
                *d += c.norm_sqr();
            }
        }
        (pairwise_sum(&dens) / nodes as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient of `conj(a) − a`.
    pub fn reality_defect(&self) -> f64 {
        if self.deg.p != self.deg.q {
            return self.max_abs();
        }
        self.conjugate().checked_sub(self).expect("same layout").max_abs()
    }

    pub fn spectrum(&self) -> Spectrum {
        let sp = spectral(self.grid);
        let mut comps = self.comps.clone();
        comps.par_iter_mut().for_each(|c| sp.forward(c));
        Spectrum { grid: self.grid, deg: self.deg, comps }
    }

    /// Spectral (trigonometric) interpolation onto a finer grid with
    /// `size` points per axis. Nyquist content is dropped.
    pub fn refine(&self, size: usize) -> Result<FormField> {
        Ok(self.spectrum().refine(size)?.to_field())
    }

    fn check_same(&self, other: &FormField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch { left: self.grid.nodes(), right: other.grid.nodes() });
        }
        if self.deg != other.deg {
            return Err(Error::BidegreeMismatch { expected: self.deg, found: other.deg });
        }
        Ok(())
    }

    pub(crate) fn from_parts(grid: TorusGrid, deg: Bidegree, comps: Vec<Vec<C64>>) -> Self {
        debug_assert_eq!(comps.len(), slots(grid, deg));
        FormField { grid, deg, comps }
    }
}

macro_rules! field_ops {
    ($t:ty) => {
        impl Add for &$t {
            type Output = $t;
            fn add(self, rhs: &$t) -> $t {
                let mut out = self.clone();
                out.axpy(C64::new(1.0, 0.0), rhs).expect("operands share grid and bidegree");
                out
            }
        }

        impl Sub for &$t {
            type Output = $t;
            fn sub(self, rhs: &$t) -> $t {
                let mut out = self.clone();
                out.axpy(C64::new(-1.0, 0.0), rhs).expect("operands share grid and bidegree");
                out
            }
        }

        impl Neg for &$t {
            type Output = $t;
            fn neg(self) -> $t {
                self.scale(C64::new(-1.0, 0.0))
            }
        }

        impl Mul<C64> for &$t {
            type Output = $t;
            fn mul(self, c: C64) -> $t {
                self.scale(c)
            }
        }

        impl Mul<f64> for &$t {
            type Output = $t;
            fn mul(self, c: f64) -> $t {
                self.scale(C64::new(c, 0.0))
            }
        }
    };
}

field_ops!(FormField);
field_ops!(Spectrum);

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::DimensionMismatch { left: grid.nodes(), right: values.len() });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> C64) -> Self {
        let values = (0..grid.nodes()).map(|node| f(&grid.coords(node))).collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.im.abs() <= tol)
    }

    /// Average over the grid.
    pub fn mean(&self) -> C64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    /// The function as a (0,0)-form field.
    pub fn into_form(self) -> FormField {
        FormField { grid: self.grid, deg: Bidegree::new(0, 0), comps: vec![self.values] }
    }
}

impl Spectrum {
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn bidegree(&self) -> Bidegree {
        self.deg
    }

    pub fn components(&self) -> &[Vec<C64>] {
        &self.comps
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<C64>] {
        &mut self.comps
    }

    pub fn zeros(grid: TorusGrid, deg: Bidegree) -> Self {
        Spectrum { grid, deg, comps: vec![vec![ZERO; grid.nodes()]; slots(grid, deg)] }
    }

    pub fn to_field(&self) -> FormField {
        let sp = spectral(self.grid);
        let mut comps = self.comps.clone();
        comps.par_iter_mut().for_each(|c| sp.inverse(c));
        FormField { grid: self.grid, deg: self.deg, comps }
    }

    /// Inverse transform of the spectrum of a real (1,1)-field, using one
    /// transform per pair of diagonal slots and one per off-diagonal
    /// pair; the result is exactly real.
    pub(crate) fn to_real_field_11(&self) -> FormField {
        debug_assert_eq!(self.deg, Bidegree::new(1, 1));
        let n = self.grid.dim();
        let sp = spectral(self.grid);
        let nodes = self.grid.nodes();
        let mut comps = vec![Vec::new(); n * n];
        let mut work: Vec<(Vec<usize>, Vec<C64>)> = Vec::new();
        for i in (0..n).step_by(2) {
            let a = &self.comps[i * n + i];
            let packed = if i + 1 < n {
                let b = &self.comps[(i + 1) * n + i + 1];
                a.iter().zip(b).map(|(&x, &y)| C64::new(x.im, -x.re) + y).collect()
            } else {
                a.iter().map(|&x| C64::new(x.im, -x.re)).collect()
            };
            work.push((vec![i], packed));
        }
        for i in 0..n {
            for j in i + 1..n {
                work.push((vec![i, j], self.comps[i * n + j].clone()));
            }
        }
        work.par_iter_mut().for_each(|(_, c)| sp.inverse(c));
        for (key, v) in work {
            if key.len() == 1 {
                let i = key[0];
                comps[i * n + i] = v.iter().map(|f| C64::new(0.0, f.re)).collect();
                if i + 1 < n {
                    comps[(i + 1) * n + i + 1] = v.iter().map(|f| C64::new(0.0, f.im)).collect();
                }
            } else {
                let (i, j) = (key[0], key[1]);
                comps[j * n + i] = v.iter().map(|z| -z.conj()).collect();
                comps[i * n + j] = v;
            }
        }
        debug_assert!(comps.iter().all(|c| c.len() == nodes));
        FormField { grid: self.grid, deg: self.deg, comps }
    }

    /// `∂`, raising the holomorphic degree.
    pub fn del(&self) -> Spectrum {
        self.differentiate(true)
    }

    /// `∂̄`, raising the antiholomorphic degree.
    pub fn del_bar(&self) -> Spectrum {
        self.differentiate(false)
    }

    fn differentiate(&self, holomorphic: bool) -> Spectrum {
        let n = self.grid.dim();
        let (out_deg, ok) = if holomorphic {
            (Bidegree::new(self.deg.p + 1, self.deg.q), self.deg.p < n)
        } else {
            (Bidegree::new(self.deg.p, self.deg.q + 1), self.deg.q < n)
        };
        if !ok {
            let clamped = Bidegree::new(out_deg.p.min(n), out_deg.q.min(n));
            return Spectrum::zeros(self.grid, clamped);
        }
        let sp = spectral(self.grid);
        let lin = Layout::new(n, self.deg);
        let lout = Layout::new(n, out_deg);
        let mut out = Spectrum::zeros(self.grid, out_deg);
        for idx in 0..lin.len() {
            let (im, jm) = lin.masks(idx);
            for d in 0..n {
                let (target, sign) = if holomorphic {
                    if im & 1 << d != 0 {
                        continue;
                    }
                    let below = (im & ((1 << d) - 1)).count_ones();
                    (lout.index(im | 1 << d, jm), if below % 2 == 0 { 1.0 } else { -1.0 })
                } else {
                    if jm & 1 << d != 0 {
                        continue;
                    }
                    let below = (jm & ((1 << d) - 1)).count_ones() + self.deg.p as u32;
                    (lout.index(im, jm | 1 << d), if below % 2 == 0 { 1.0 } else { -1.0 })
                };
                let src = &self.comps[idx];
                let mu = &sp.mu[d];
                let dst = &mut out.comps[target];
                if holomorphic {
                    for ((o, &v), &m) in dst.iter_mut().zip(src).zip(mu) {
                        *o += v * m * sign;
                    }
                } else {
                    for ((o, &v), &m) in dst.iter_mut().zip(src).zip(mu) {
                        *o -= v * m.conj() * sign;
                    }
                }
            }
        }
        out
    }

    /// Zeroes every mode outside the 2/3-rule band.
    pub fn truncate(&mut self) {
        let sp = spectral(self.grid);
        for comp in &mut self.comps {
            for (v, &k) in comp.iter_mut().zip(&sp.keep) {
                if !k {
                    *v = ZERO;
                }
            }
        }
    }

    pub fn truncated(mut self) -> Spectrum {
        self.truncate();
        self
    }

    /// `Σ cᵢ sᵢ` over spectra of one layout, in a single pass.
    pub(crate) fn lincomb(terms: &[(f64, &Spectrum)]) -> Spectrum {
        let (_, first) = terms[0];
        debug_assert!(terms.iter().all(|(_, s)| s.grid == first.grid && s.deg == first.deg));
        let comps = (0..first.comps.len())
            .map(|c| {
                let mut out: Vec<C64> = first.comps[c].iter().map(|&v| v * terms[0].0).collect();
                for &(w, s) in &terms[1..] {
                    for (o, &v) in out.iter_mut().zip(&s.comps[c]) {
                        *o += v * w;
                    }
                }
                out
            })
            .collect();
        Spectrum { grid: first.grid, deg: first.deg, comps }
    }

    /// Largest coefficient magnitude outside the 2/3-rule band, relative to
    /// the node count (i.e. in physical amplitude units).
    pub fn out_of_band(&self) -> f64 {
        let sp = spectral(self.grid);
        let nodes = self.grid.nodes() as f64;
        self.comps
            .iter()
            .flat_map(|c| c.iter().zip(&sp.keep).filter(|(_, &k)| !k).map(|(v, _)| v.norm()))
            .fold(0.0, f64::max)
            / nodes
    }

    /// Spectrum of the complex-conjugate field.
    pub fn conjugate(&self) -> Spectrum {
        let sp = spectral(self.grid);
        let plan = ConjPlan::new(self.grid.dim(), self.deg);
        let mut comps = vec![Vec::new(); self.comps.len()];
        for (idx, &o) in plan.map.iter().enumerate() {
            let src = &self.comps[idx];
            comps[o] = sp.neg.iter().map(|&k| src[k as usize].conj() * plan.sign).collect();
        }
        Spectrum { grid: self.grid, deg: plan.out, comps }
    }

    pub fn scale(&self, c: C64) -> Spectrum {
        let comps = self.comps.iter().map(|v| v.iter().map(|&x| x * c).collect()).collect();
        Spectrum { grid: self.grid, deg: self.deg, comps }
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: C64, other: &Spectrum) -> Result<()> {
        if self.grid != other.grid || self.deg != other.deg {
            return Err(Error::BidegreeMismatch { expected: self.deg, found: other.deg });
        }
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        Ok(())
    }

    /// Zero-pads the spectrum onto a grid with `size ≥ N` points per axis,
    /// dropping the Nyquist modes.
    pub fn refine(&self, size: usize) -> Result<Spectrum> {
        let fine = TorusGrid::new(self.grid.dim(), size)?;
        if size < self.grid.size() {
            return Err(Error::InvalidGrid(format!("cannot refine {} points to {size}", self.grid.size())));
        }
        let coarse = self.grid;
        let half = (coarse.size() / 2) as i64;
        let axes = coarse.axes();
        let ratio = fine.nodes() as f64 / coarse.nodes() as f64;
        let map: Vec<Option<usize>> = (0..coarse.size())
            .map(|i| {
                let k = coarse.wavenumber(i);
                (k != -half).then(|| k.rem_euclid(size as i64) as usize)
            })
            .collect();
        let mut out = Spectrum::zeros(fine, self.deg);
        let mut idx = vec![0usize; axes];
        for node in 0..coarse.nodes() {
            let mut target = Some(0usize);
            for &i in &idx {
                target = target.and_then(|t| map[i].map(|m| t * size + m));
            }
            if let Some(t) = target {
                for (dst, src) in out.comps.iter_mut().zip(&self.comps) {
                    dst[t] = src[node] * ratio;
                }
            }
            for a in (0..axes).rev() {
                idx[a] += 1;
                if idx[a] < coarse.size() {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(out)
    }

    pub(crate) fn from_parts(grid: TorusGrid, deg: Bidegree, comps: Vec<Vec<C64>>) -> Self {
        Spectrum { grid, deg, comps }
    }
}
