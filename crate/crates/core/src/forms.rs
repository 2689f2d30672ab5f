//! Pointwise multilinear algebra on complex (p,q)-forms over ℂⁿ.
//!
//! A (p,q)-form is stored by its coefficients on the basis
//! `dz^I ∧ dz̄^J`, with `I` and `J` strictly increasing multi-indices of
//! lengths p and q. Indices are zero-based: `dz^0` is the first holomorphic
//! coordinate differential. Multi-indices are bitmasks, and coefficient
//! slots are ordered lexicographically, holomorphic index major.
//!
//! Metric conventions: for a Hermitian matrix `g_{i j̄}` the fundamental
//! form is `ω = √−1 Σ g_{i j̄} dz^i ∧ dz̄^j`, the pointwise inner product
//! satisfies `⟨dz^i, dz^j⟩ = g^{j̄ i}` (so `|dz^i|² = 1` for the identity
//! metric), and the volume form is `dV = ωⁿ/n!`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Largest supported complex dimension.
pub const MAX_DIM: usize = 6;

/// The imaginary unit √−1.
pub const I: C64 = C64::new(0.0, 1.0);

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bidegree {
    pub p: usize,
    pub q: usize,
}

impl Bidegree {
    pub const fn new(p: usize, q: usize) -> Self {
        Bidegree { p, q }
    }

    pub const fn total(self) -> usize {
        self.p + self.q
    }

    pub const fn conjugate(self) -> Self {
        Bidegree { p: self.q, q: self.p }
    }
}

impl fmt::Display for Bidegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.p, self.q)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Size-k subsets of {0..n} as bitmasks, in lexicographic order.
pub(crate) fn subsets(n: usize, k: usize) -> Vec<u32> {
    fn rec(start: usize, n: usize, k: usize, acc: u32, out: &mut Vec<u32>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for i in start..=n - k {
            rec(i + 1, n, k - 1, acc | 1 << i, out);
        }
    }
    let mut out = Vec::with_capacity(binomial(n, k));
    if k <= n {
        rec(0, n, k, 0, &mut out);
    }
    out
}

/// Inverse of [`subsets`]: position of each mask, indexed by mask.
fn ranks(n: usize, list: &[u32]) -> Vec<u32> {
    let mut r = vec![u32::MAX; 1 << n];
    for (i, &m) in list.iter().enumerate() {
        r[m as usize] = i as u32;
    }
    r
}

fn parity(k: u32) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of the shuffle sorting the concatenation of increasing `a` and
/// increasing `b` (disjoint).
pub(crate) fn merge_sign(a: u32, b: u32) -> f64 {
    let mut inv = 0;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inv += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    parity(inv)
}

/// `dz^I∧dz̄^J ∧ dz^K∧dz̄^L = sign · dz^{I∪K}∧dz̄^{J∪L}`, or `None` when
/// the product vanishes.
pub(crate) fn wedge_sign(i: u32, j: u32, k: u32, l: u32) -> Option<f64> {
    if i & k != 0 || j & l != 0 {
        return None;
    }
    Some(parity(j.count_ones() * k.count_ones()) * merge_sign(i, k) * merge_sign(j, l))
}

/// `ν` with `dV = det g · ν · dz^{all} ∧ dz̄^{all}`.
pub fn top_unit(n: usize) -> C64 {
    let i_pow = match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => I,
        2 => C64::new(-1.0, 0.0),
        _ => -I,
    };
    i_pow * parity((n * (n.saturating_sub(1)) / 2) as u32)
}

/// Coefficient layout of one bidegree in dimension n.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub holo: Vec<u32>,
    pub anti: Vec<u32>,
    holo_rank: Vec<u32>,
    anti_rank: Vec<u32>,
}

impl Layout {
    pub fn new(n: usize, deg: Bidegree) -> Self {
        let holo = subsets(n, deg.p);
        let anti = subsets(n, deg.q);
        let holo_rank = ranks(n, &holo);
        let anti_rank = ranks(n, &anti);
        Layout { holo, anti, holo_rank, anti_rank }
    }

    pub fn len(&self) -> usize {
        self.holo.len() * self.anti.len()
    }

    pub fn index(&self, i: u32, j: u32) -> usize {
        self.holo_rank[i as usize] as usize * self.anti.len() + self.anti_rank[j as usize] as usize
    }

    pub fn masks(&self, idx: usize) -> (u32, u32) {
        let m = self.anti.len();
        (self.holo[idx / m], self.anti[idx % m])
    }
}

/// Precomputed structure constants of `a ∧ b`.
#[derive(Clone, Debug)]
pub(crate) struct WedgePlan {
    pub out: Bidegree,
    pub terms: Vec<(u32, u32, u32, f64)>,
}

impl WedgePlan {
    pub fn new(n: usize, a: Bidegree, b: Bidegree) -> Self {
        let p = a.p + b.p;
        let q = a.q + b.q;
        if p > n || q > n {
            let out = Bidegree::new(p.min(n), q.min(n));
            return WedgePlan { out, terms: Vec::new() };
        }
        let out = Bidegree::new(p, q);
        let la = Layout::new(n, a);
        let lb = Layout::new(n, b);
        let lo = Layout::new(n, out);
        let mut terms = Vec::new();
        for ia in 0..la.len() {
            let (i, j) = la.masks(ia);
            for ib in 0..lb.len() {
                let (k, l) = lb.masks(ib);
                if let Some(s) = wedge_sign(i, j, k, l) {
                    terms.push((ia as u32, ib as u32, lo.index(i | k, j | l) as u32, s));
                }
            }
        }
        WedgePlan { out, terms }
    }

    pub fn apply(&self, a: &[C64], b: &[C64], out: &mut [C64]) {
        out.fill(ZERO);
        for &(ia, ib, io, s) in &self.terms {
            out[io as usize] += a[ia as usize] * b[ib as usize] * s;
        }
    }
}

/// Index map and sign of complex conjugation `(p,q) → (q,p)`.
#[derive(Clone, Debug)]
pub(crate) struct ConjPlan {
    pub out: Bidegree,
    pub map: Vec<usize>,
    pub sign: f64,
}

impl ConjPlan {
    pub fn new(n: usize, deg: Bidegree) -> Self {
        let la = Layout::new(n, deg);
        let lo = Layout::new(n, deg.conjugate());
        let map = (0..la.len())
            .map(|idx| {
                let (i, j) = la.masks(idx);
                lo.index(j, i)
            })
            .collect();
        ConjPlan { out: deg.conjugate(), map, sign: parity((deg.p * deg.q) as u32) }
    }

    pub fn apply(&self, a: &[C64], out: &mut [C64]) {
        for (idx, &o) in self.map.iter().enumerate() {
            out[o] = a[idx].conj() * self.sign;
        }
    }
}

/// Hodge star on bidegree (r,s): expands `*c` through minors of the
/// inverse metric.
#[derive(Clone, Debug)]
pub(crate) struct StarPlan {
    pub out: Bidegree,
    /// Subsets of size s (rows/columns of the first compound).
    pub sub_s: Vec<u32>,
    /// Subsets of size r.
    pub sub_r: Vec<u32>,
    /// `(out, input, index into C_s(H), index into C_r(H), sign)`
    pub terms: Vec<(u32, u32, u32, u32, f64)>,
}

impl StarPlan {
    pub fn new(n: usize, deg: Bidegree) -> Self {
        let (r, s) = (deg.p, deg.q);
        let out = Bidegree::new(n - s, n - r);
        let lin = Layout::new(n, deg);
        let lout = Layout::new(n, out);
        let sub_s = subsets(n, s);
        let sub_r = subsets(n, r);
        let (ms, mr) = (sub_s.len(), sub_r.len());
        let all = (1u32 << n) - 1;
        let mut terms = Vec::new();
        for (ir, &im) in sub_s.iter().enumerate() {
            for (jr, &jm) in sub_r.iter().enumerate() {
                // basis e_{I J} of bidegree (s, r) paired with its complement
                let sigma = wedge_sign(im, jm, all ^ im, all ^ jm).expect("complements are disjoint");
                let o = lout.index(all ^ im, all ^ jm);
                let sign = sigma * parity((r * s) as u32);
                for (kr, &km) in sub_s.iter().enumerate() {
                    for (lr, &lm) in sub_r.iter().enumerate() {
                        let input = lin.index(lm, km);
                        terms.push((o as u32, input as u32, (kr * ms + ir) as u32, (jr * mr + lr) as u32, sign));
                    }
                }
            }
        }
        StarPlan { out, sub_s, sub_r, terms }
    }

    /// `cs`, `cr` are the compounds of the inverse metric; `scale` is
    /// `det g · ν`.
    pub fn apply(&self, c: &[C64], cs: &[C64], cr: &[C64], scale: C64, out: &mut [C64]) {
        out.fill(ZERO);
        for &(o, i, a, b, s) in &self.terms {
            out[o as usize] += c[i as usize] * cs[a as usize] * cr[b as usize] * s;
        }
        for v in out.iter_mut() {
            *v *= scale;
        }
    }
}

/// Contraction with the metric: `tr_g = √−1 Λ_ω`, `(p,q) → (p−1,q−1)`.
#[derive(Clone, Debug)]
pub(crate) struct TracePlan {
    pub out: Bidegree,
    pub out_len: usize,
    /// `(out, input, index into g^{-1}, sign)`
    pub terms: Vec<(u32, u32, u32, f64)>,
}

impl TracePlan {
    pub fn new(n: usize, deg: Bidegree) -> Self {
        if deg.p == 0 || deg.q == 0 {
            let out = Bidegree::new(deg.p.saturating_sub(1), deg.q.saturating_sub(1));
            return TracePlan { out, out_len: Layout::new(n, out).len(), terms: Vec::new() };
        }
        let out = Bidegree::new(deg.p - 1, deg.q - 1);
        let lin = Layout::new(n, deg);
        let lout = Layout::new(n, out);
        let mut terms = Vec::new();
        for o in 0..lout.len() {
            let (im, jm) = lout.masks(o);
            for p in (0..n).filter(|&p| im & 1 << p == 0) {
                for q in (0..n).filter(|&q| jm & 1 << q == 0) {
                    let sign = merge_sign(im, 1 << p) * merge_sign(1 << q, jm);
                    let input = lin.index(im | 1 << p, jm | 1 << q);
                    terms.push((o as u32, input as u32, (q * n + p) as u32, sign));
                }
            }
        }
        TracePlan { out, out_len: lout.len(), terms }
    }

    pub fn apply(&self, a: &[C64], h: &[C64], out: &mut [C64]) {
        out.fill(ZERO);
        for &(o, i, k, s) in &self.terms {
            out[o as usize] += a[i as usize] * h[k as usize] * s;
        }
    }
}

/// A complex (p,q)-form at a single point.
#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    n: usize,
    deg: Bidegree,
    coeffs: Vec<C64>,
}

impl Form {
    pub fn zero(n: usize, deg: Bidegree) -> Self {
        assert!(n <= MAX_DIM && deg.p <= n && deg.q <= n, "bidegree {deg} invalid in dimension {n}");
        Form { n, deg, coeffs: vec![ZERO; binomial(n, deg.p) * binomial(n, deg.q)] }
    }

    /// The constant function `c` as a (0,0)-form.
    pub fn scalar(n: usize, c: C64) -> Self {
        Form { n, deg: Bidegree::new(0, 0), coeffs: vec![c] }
    }

    pub fn one(n: usize) -> Self {
        Form::scalar(n, C64::new(1.0, 0.0))
    }

    pub fn from_coeffs(n: usize, deg: Bidegree, coeffs: Vec<C64>) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        if deg.p > n || deg.q > n {
            return Err(Error::Precondition(format!("bidegree {deg} exceeds dimension {n}")));
        }
        let len = binomial(n, deg.p) * binomial(n, deg.q);
        if coeffs.len() != len {
            return Err(Error::DimensionMismatch { left: len, right: coeffs.len() });
        }
        Ok(Form { n, deg, coeffs })
    }

    /// `dz^{holo[0]} ∧ … ∧ dz̄^{anti[0]} ∧ …` for indices in any order;
    /// repeated indices give the zero form.
    pub fn monomial(n: usize, holo: &[usize], anti: &[usize]) -> Self {
        let deg = Bidegree::new(holo.len(), anti.len());
        let mut f = Form::zero(n, deg);
        if let (Some((i, si)), Some((j, sj))) = (sort_sign(holo), sort_sign(anti)) {
            let idx = Layout::new(n, deg).index(i, j);
            f.coeffs[idx] = C64::new(si * sj, 0.0);
        }
        f
    }

    pub fn dz(n: usize, i: usize) -> Self {
        Form::monomial(n, &[i], &[])
    }

    pub fn dz_bar(n: usize, i: usize) -> Self {
        Form::monomial(n, &[], &[i])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bidegree(&self) -> Bidegree {
        self.deg
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    /// Coefficient on `dz^I ∧ dz̄^J` for increasing index lists.
    pub fn coeff(&self, holo: &[usize], anti: &[usize]) -> C64 {
        let (i, si) = sort_sign(holo).unwrap_or((0, 0.0));
        let (j, sj) = sort_sign(anti).unwrap_or((0, 0.0));
        if si * sj == 0.0 || holo.len() != self.deg.p || anti.len() != self.deg.q {
            return ZERO;
        }
        self.coeffs[Layout::new(self.n, self.deg).index(i, j)] * (si * sj)
    }

    /// `(holomorphic indices, antiholomorphic indices, coefficient)` for
    /// every basis slot.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>, C64)> + '_ {
        let layout = Layout::new(self.n, self.deg);
        self.coeffs.iter().enumerate().map(move |(idx, &c)| {
            let (i, j) = layout.masks(idx);
            (mask_indices(i), mask_indices(j), c)
        })
    }

    pub fn wedge(&self, other: &Form) -> Result<Form> {
        wedge(self, other)
    }

    pub fn conjugate(&self) -> Form {
        conjugate(self)
    }

    pub fn power(&self, k: usize) -> Form {
        form_power(self, k)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest coefficient of `conj(a) − a` (zero iff the form is real).
    pub fn reality_defect(&self) -> f64 {
        if self.deg.p != self.deg.q {
            return self.max_abs();
        }
        (&self.conjugate() - self).max_abs()
    }

    pub fn scale(&self, c: C64) -> Form {
        Form { n: self.n, deg: self.deg, coeffs: self.coeffs.iter().map(|&v| v * c).collect() }
    }

    fn check_same(&self, other: &Form) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { left: self.n, right: other.n });
        }
        if self.deg != other.deg {
            return Err(Error::BidegreeMismatch { expected: self.deg, found: other.deg });
        }
        Ok(())
    }
}

fn mask_indices(mut m: u32) -> Vec<usize> {
    let mut v = Vec::new();
    while m != 0 {
        v.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    v
}

/// Bitmask and sorting sign of an index list; `None` on repeats.
fn sort_sign(idx: &[usize]) -> Option<(u32, f64)> {
    let mut mask = 0u32;
    let mut inv = 0;
    for (a, &i) in idx.iter().enumerate() {
        if mask & 1 << i != 0 {
            return None;
        }
        mask |= 1 << i;
        inv += idx[..a].iter().filter(|&&j| j > i).count();
    }
    Some((mask, parity(inv as u32)))
}

impl AddAssign<&Form> for Form {
    fn add_assign(&mut self, rhs: &Form) {
        self.check_same(rhs).expect("form addition");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&Form> for Form {
    fn sub_assign(&mut self, rhs: &Form) {
        self.check_same(rhs).expect("form subtraction");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Add for &Form {
    type Output = Form;
    fn add(self, rhs: &Form) -> Form {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &Form {
    type Output = Form;
    fn sub(self, rhs: &Form) -> Form {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &Form {
    type Output = Form;
    fn neg(self) -> Form {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul<C64> for &Form {
    type Output = Form;
    fn mul(self, c: C64) -> Form {
        self.scale(c)
    }
}

impl Mul<f64> for &Form {
    type Output = Form;
    fn mul(self, c: f64) -> Form {
        self.scale(C64::new(c, 0.0))
    }
}

/// Exterior product. Products whose degree would exceed `(n,n)` give the
/// zero form of the clamped bidegree.
pub fn wedge(a: &Form, b: &Form) -> Result<Form> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch { left: a.n, right: b.n });
    }
    let plan = WedgePlan::new(a.n, a.deg, b.deg);
    let mut out = Form::zero(a.n, plan.out);
    plan.apply(&a.coeffs, &b.coeffs, &mut out.coeffs);
    Ok(out)
}

pub fn conjugate(a: &Form) -> Form {
    let plan = ConjPlan::new(a.n, a.deg);
    let mut out = Form::zero(a.n, plan.out);
    plan.apply(&a.coeffs, &mut out.coeffs);
    out
}

/// `a^k`, with `a^0 = 1`.
pub fn form_power(a: &Form, k: usize) -> Form {
    let mut out = Form::one(a.n);
    for _ in 0..k {
        out = wedge(a, &out).expect("same dimension");
    }
    out
}

/// A positive definite Hermitian matrix `g_{i j̄}` with cached inverse,
/// determinant and smallest eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMetric {
    n: usize,
    g: Vec<C64>,
    inv: Vec<C64>,
    det: f64,
    margin: f64,
}

impl HermitianMetric {
    /// Builds a metric from a row-major `n × n` matrix. The matrix must be
    /// Hermitian to within `1e-13` (relative to its largest entry); it is
    /// symmetrised exactly before factorisation.
    pub fn new(n: usize, g: Vec<C64>) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        if g.len() != n * n {
            return Err(Error::DimensionMismatch { left: n * n, right: g.len() });
        }
        let scale = g.iter().map(|c| c.norm()).fold(1.0, f64::max);
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                defect = defect.max((g[i * n + j] - g[j * n + i].conj()).norm());
            }
        }
        if defect > 1e-13 * scale {
            return Err(Error::NotHermitian(defect));
        }
        let g: Vec<C64> = (0..n * n).map(|k| 0.5 * (g[k] + g[(k % n) * n + k / n].conj())).collect();
        let margin = linalg::hermitian_eigenvalues(n, &g)[0];
        let mut inv = vec![ZERO; n * n];
        match linalg::hermitian_inverse(n, &g, &mut inv) {
            Some(det) if margin > 0.0 => Ok(HermitianMetric { n, g, inv, det, margin }),
            _ => Err(Error::PositivityLost { margin, node: None }),
        }
    }

    pub fn identity(n: usize) -> Self {
        let g = (0..n * n).map(|k| if k % (n + 1) == 0 { C64::new(1.0, 0.0) } else { ZERO }).collect();
        HermitianMetric::new(n, g).expect("identity is a metric")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `g_{i j̄}`, row-major.
    pub fn matrix(&self) -> &[C64] {
        &self.g
    }

    /// `(g⁻¹)_{ij}`, row-major; `g^{j̄ i}` is entry `(j, i)`.
    pub fn inverse(&self) -> &[C64] {
        &self.inv
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Smallest eigenvalue.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// `ω = √−1 Σ g_{i j̄} dz^i ∧ dz̄^j`.
    pub fn fundamental_form(&self) -> Form {
        let coeffs = self.g.iter().map(|&v| I * v).collect();
        Form::from_coeffs(self.n, Bidegree::new(1, 1), coeffs).expect("n×n entries")
    }

    /// `dV = ωⁿ/n!`.
    pub fn volume_form(&self) -> Form {
        Form::scalar(self.n, C64::new(self.det, 0.0) * top_unit(self.n)).with_top_degree()
    }
}

impl Form {
    /// Reinterprets a single coefficient as the (n,n) form with that
    /// coefficient on `dz^{all} ∧ dz̄^{all}`.
    fn with_top_degree(self) -> Form {
        let n = self.n;
        Form { n, deg: Bidegree::new(n, n), coeffs: self.coeffs }
    }
}

/// Extracts `g_{i j̄} = −√−1 w_{i j̄}` from a real (1,1)-form; the smallest
/// eigenvalue is available as [`HermitianMetric::margin`].
pub fn metric_of_form(w: &Form) -> Result<HermitianMetric> {
    let deg = Bidegree::new(1, 1);
    if w.deg != deg {
        return Err(Error::BidegreeMismatch { expected: deg, found: w.deg });
    }
    let defect = w.reality_defect();
    if defect > 1e-12 * w.max_abs().max(1.0) {
        return Err(Error::NotReal(defect));
    }
    HermitianMetric::new(w.n, w.coeffs.iter().map(|&v| -I * v).collect())
}

pub(crate) fn inverse_compounds(n: usize, inv: &[C64], p: usize, q: usize) -> (Vec<C64>, Vec<C64>) {
    let (mut cp, mut cq) = (Vec::new(), Vec::new());
    linalg::compound(n, inv, &subsets(n, p), &mut cp);
    linalg::compound(n, inv, &subsets(n, q), &mut cq);
    (cp, cq)
}

/// Contracts coefficient vectors of bidegree (p,q) given the compounds
/// `C_p(g⁻¹)` and `C_q(g⁻¹)`.
pub(crate) fn contract(a: &[C64], b: &[C64], cp: &[C64], cq: &[C64], mp: usize, mq: usize) -> C64 {
    let mut sum = ZERO;
    for (ia, &av) in a.iter().enumerate() {
        if av == ZERO {
            continue;
        }
        let (ir, jr) = (ia / mq, ia % mq);
        let mut inner = ZERO;
        for (ib, &bv) in b.iter().enumerate() {
            let (kr, lr) = (ib / mq, ib % mq);
            inner += bv.conj() * cp[kr * mp + ir] * cq[jr * mq + lr];
        }
        sum += av * inner;
    }
    sum
}

/// Hermitian inner product `⟨a, b⟩` induced by `g`: complex-linear in `a`,
/// conjugate-linear in `b`.
pub fn inner_product_point(a: &Form, b: &Form, g: &HermitianMetric) -> Result<C64> {
    a.check_same(b)?;
    if a.n != g.n {
        return Err(Error::DimensionMismatch { left: a.n, right: g.n });
    }
    let (cp, cq) = inverse_compounds(a.n, &g.inv, a.deg.p, a.deg.q);
    let (mp, mq) = (binomial(a.n, a.deg.p), binomial(a.n, a.deg.q));
    Ok(contract(&a.coeffs, &b.coeffs, &cp, &cq, mp, mq))
}

/// Complex-linear Hodge star, characterised by
/// `a ∧ *conj(b) = ⟨a, b⟩ dV`. Maps bidegree (p,q) to (n−q, n−p).
pub fn hodge_star_point(a: &Form, g: &HermitianMetric) -> Form {
    assert_eq!(a.n, g.n, "form and metric dimensions differ");
    let plan = StarPlan::new(a.n, a.deg);
    let (mut cs, mut cr) = (Vec::new(), Vec::new());
    linalg::compound(a.n, &g.inv, &plan.sub_s, &mut cs);
    linalg::compound(a.n, &g.inv, &plan.sub_r, &mut cr);
    let mut out = Form::zero(a.n, plan.out);
    plan.apply(&a.coeffs, &cs, &cr, top_unit(a.n) * g.det, &mut out.coeffs);
    out
}

/// `tr_g = √−1 Λ_ω`, contracting one holomorphic and one antiholomorphic
/// slot against `g^{j̄ i}`. Forms of bidegree (p,0) or (0,q) map to zero.
pub fn trace_g_point(a: &Form, g: &HermitianMetric) -> Form {
    assert_eq!(a.n, g.n, "form and metric dimensions differ");
    let plan = TracePlan::new(a.n, a.deg);
    let mut out = Form::zero(a.n, plan.out);
    plan.apply(&a.coeffs, &g.inv, &mut out.coeffs);
    out
}

/// Lefschetz operator `L_ω a = ω ∧ a`.
pub fn lefschetz(a: &Form, g: &HermitianMetric) -> Form {
    wedge(&g.fundamental_form(), a).expect("same dimension")
}

/// Adjoint of [`lefschetz`]: `Λ_ω = −√−1 tr_g`.
pub fn dual_lefschetz(a: &Form, g: &HermitianMetric) -> Form {
    trace_g_point(a, g).scale(-I)
}

/// A form with independent standard complex Gaussian coefficients.
pub fn random_form<R: Rng + ?Sized>(n: usize, deg: Bidegree, rng: &mut R) -> Form {
    let mut f = Form::zero(n, deg);
    for c in &mut f.coeffs {
        *c = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    f
}

/// A random metric `A A* + ½ I` with Gaussian `A`.
pub fn random_metric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMetric {
    let a: Vec<C64> = (0..n * n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * 0.5)
        .collect();
    let mut g = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = (0..n).map(|k| a[i * n + k] * a[j * n + k].conj()).sum::<C64>();
        }
        g[i * n + i] += 0.5;
    }
    HermitianMetric::new(n, g).expect("A A* + I/2 is positive definite")
}
