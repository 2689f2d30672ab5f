use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{pairwise_sum, FormField, MetricField, ScalarField, Spectrum, TorusGrid};
use crate::error::{Error, Result};
use crate::forms::{binomial, contract, factorial, top_unit, Bidegree, StarPlan, TracePlan, I};
use crate::linalg;

const ZERO: C64 = C64::new(0.0, 0.0);

pub fn del(a: &FormField) -> FormField {
    a.spectrum().del().to_field()
}

pub fn del_bar(a: &FormField) -> FormField {
    a.spectrum().del_bar().to_field()
}

fn check_top(a: &FormField) -> Result<()> {
    let n = a.grid().dim();
    let top = Bidegree::new(n, n);
    if a.bidegree() != top {
        return Err(Error::BidegreeMismatch { expected: top, found: a.bidegree() });
    }
    Ok(())
}

/// `∫ a` for a top-degree field. Coordinates are normalised so that the
/// flat metric has total volume 1: the density of `a` relative to the
/// flat volume form is averaged over the grid.
pub fn integrate(a: &FormField) -> Result<C64> {
    check_top(a)?;
    let nu = top_unit(a.grid().dim());
    let c = &a.components()[0];
    Ok(pairwise_sum(c) / (c.len() as f64 * nu))
}

/// `∫ |a|`, the integral of the absolute density of a top-degree field.
/// Used as the natural scale when the signed integral is expected to
/// vanish.
pub fn integrate_abs(a: &FormField) -> Result<f64> {
    check_top(a)?;
    let c = &a.components()[0];
    let abs: Vec<f64> = c.iter().map(|v| v.norm()).collect();
    Ok(pairwise_sum(&abs) / c.len() as f64)
}

fn check_grid(a: &FormField, metric: &MetricField) -> Result<()> {
    if a.grid() != metric.grid() {
        return Err(Error::DimensionMismatch { left: a.grid().nodes(), right: metric.grid().nodes() });
    }
    Ok(())
}

/// Applies `f(node, coefficients in, coefficients out)` at every node.
fn map_nodes(a: &FormField, out_deg: Bidegree, mut f: impl FnMut(usize, &[C64], &mut [C64])) -> FormField {
    let grid = a.grid();
    let n = grid.dim();
    let out_len = binomial(n, out_deg.p) * binomial(n, out_deg.q);
    let mut out = vec![vec![ZERO; grid.nodes()]; out_len];
    let comps = a.components();
    let mut inb = vec![ZERO; comps.len()];
    let mut outb = vec![ZERO; out_len];
    for node in 0..grid.nodes() {
        for (b, c) in inb.iter_mut().zip(comps) {
            *b = c[node];
        }
        f(node, &inb, &mut outb);
        for (c, &b) in out.iter_mut().zip(&outb) {
            c[node] = b;
        }
    }
    FormField::from_parts(grid, out_deg, out)
}

/// Pointwise Hodge star with respect to the metric field.
pub fn hodge_star(a: &FormField, metric: &MetricField) -> Result<FormField> {
    check_grid(a, metric)?;
    let n = a.grid().dim();
    let plan = StarPlan::new(n, a.bidegree());
    let nu = top_unit(n);
    let det = metric.det();
    let (mut cs, mut cr) = (Vec::new(), Vec::new());
    Ok(map_nodes(a, plan.out, |node, x, y| {
        let h = metric.inverse(node);
        linalg::compound(n, h, &plan.sub_s, &mut cs);
        linalg::compound(n, h, &plan.sub_r, &mut cr);
        plan.apply(x, &cs, &cr, nu * det[node], y);
    }))
}

/// Pointwise `tr_g = √−1 Λ_ω`.
pub fn trace_g(a: &FormField, metric: &MetricField) -> Result<FormField> {
    check_grid(a, metric)?;
    let plan = TracePlan::new(a.grid().dim(), a.bidegree());
    let mut out: Vec<Vec<C64>> = vec![Vec::new(); plan.out_len];
    for &(o, i, k, s) in &plan.terms {
        let src = &a.components()[i as usize];
        let h = metric.inverse_entry(k as usize);
        let dst = &mut out[o as usize];
        if dst.is_empty() {
            *dst = src.iter().zip(h).map(|(&x, &h)| x * h * s).collect();
        } else {
            for ((d, &x), &h) in dst.iter_mut().zip(src).zip(h) {
                *d += x * h * s;
            }
        }
    }
    for dst in &mut out {
        if dst.is_empty() {
            *dst = vec![ZERO; a.grid().nodes()];
        }
    }
    Ok(FormField::from_parts(a.grid(), plan.out, out))
}

/// `⟨a, b⟩` at every node.
pub fn inner_product_density(a: &FormField, b: &FormField, metric: &MetricField) -> Result<ScalarField> {
    check_grid(a, metric)?;
    if a.bidegree() != b.bidegree() || a.grid() != b.grid() {
        return Err(Error::BidegreeMismatch { expected: a.bidegree(), found: b.bidegree() });
    }
    let grid = a.grid();
    let n = grid.dim();
    let Bidegree { p, q } = a.bidegree();
    let sub_p = crate::forms::subsets(n, p);
    let sub_q = crate::forms::subsets(n, q);
    let (mp, mq) = (sub_p.len(), sub_q.len());
    let (mut cp, mut cq) = (Vec::new(), Vec::new());
    let (ac, bc) = (a.components(), b.components());
    let mut xa = vec![ZERO; ac.len()];
    let mut xb = vec![ZERO; bc.len()];
    let values = (0..grid.nodes())
        .map(|node| {
            let h = metric.inverse(node);
            linalg::compound(n, h, &sub_p, &mut cp);
            linalg::compound(n, h, &sub_q, &mut cq);
            for (v, c) in xa.iter_mut().zip(ac) {
                *v = c[node];
            }
            for (v, c) in xb.iter_mut().zip(bc) {
                *v = c[node];
            }
            contract(&xa, &xb, &cp, &cq, mp, mq)
        })
        .collect();
    ScalarField::new(grid, values)
}

/// `(a, b) = ∫ ⟨a, b⟩ dV` with the metric's own volume form.
pub fn global_inner_product(a: &FormField, b: &FormField, metric: &MetricField) -> Result<C64> {
    let dens = inner_product_density(a, b, metric)?;
    let weighted: Vec<C64> = dens.values().iter().zip(metric.det()).map(|(v, d)| v * d).collect();
    Ok(pairwise_sum(&weighted) / weighted.len() as f64)
}

/// `∂̄* = −*∂*`, lowering the antiholomorphic degree.
pub fn codifferential_del_bar_star(a: &FormField, metric: &MetricField) -> Result<FormField> {
    let s = hodge_star(a, metric)?;
    Ok(hodge_star(&del(&s), metric)?.scale(C64::new(-1.0, 0.0)))
}

/// `∂* = −*∂̄*`, lowering the holomorphic degree.
pub fn codifferential_del_star(a: &FormField, metric: &MetricField) -> Result<FormField> {
    let s = hodge_star(a, metric)?;
    Ok(hodge_star(&del_bar(&s), metric)?.scale(C64::new(-1.0, 0.0)))
}

/// `∂̄*ω` for the fundamental form of `metric`, from the given `∂ω`.
///
/// Since `*ω = ω^{n−1}/(n−1)!`, `∂̄*ω = −*(ω^{n−2} ∧ ∂ω)/(n−2)!`; this
/// differentiates `ω` itself instead of a pointwise product, so it stays
/// exact on band-limited data.
pub fn del_bar_star_fundamental(omega: &FormField, del_omega: &FormField, metric: &MetricField) -> Result<FormField> {
    let n = omega.grid().dim();
    let prod = omega.power(n - 2).wedge(del_omega)?;
    Ok(hodge_star(&prod, metric)?.scale(C64::new(-1.0 / factorial(n - 2), 0.0)))
}

/// `√−1 ∂∂̄ log det g`, with `log det g` truncated to the dealiasing band.
pub fn chern_form(metric: &MetricField) -> FormField {
    chern_spectrum(metric).to_field()
}

pub(crate) fn chern_spectrum(metric: &MetricField) -> Spectrum {
    let l = metric.log_det().into_form().spectrum().truncated();
    l.del_bar().del().scale(I)
}

/// `‖dΩ‖` for `Ω = φ + ω + φ̄`, summing the four bidegree parts.
pub fn d_residual(phi: &FormField, omega: &FormField) -> f64 {
    let ps = phi.spectrum();
    let ws = omega.spectrum();
    let phibar = ps.conjugate();
    let p30 = ps.del().to_field().l2_norm();
    let mut p21 = ws.del();
    p21.axpy(C64::new(1.0, 0.0), &ps.del_bar()).expect("both (2,1)");
    let mut p12 = ws.del_bar();
    p12.axpy(C64::new(1.0, 0.0), &phibar.del()).expect("both (1,2)");
    let p03 = phibar.del_bar().to_field().l2_norm();
    let (a, b) = (p21.to_field().l2_norm(), p12.to_field().l2_norm());
    (p30 * p30 + a * a + b * b + p03 * p03).sqrt()
}

/// Global monitors of the Hermitian-symplectic conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualNorms {
    /// `‖dΩ‖`
    pub d_omega: f64,
    /// `‖∂ω + ∂̄φ‖`
    pub hs_constraint: f64,
    /// `‖∂φ‖`
    pub del_phi: f64,
    /// `‖∂∂̄ω‖`
    pub pluriclosed: f64,
    /// Smallest eigenvalue of `g` over the grid.
    pub min_margin: f64,
}

pub fn residual_norms(phi: &FormField, omega: &FormField) -> Result<ResidualNorms> {
    if phi.bidegree() != Bidegree::new(2, 0) {
        return Err(Error::BidegreeMismatch { expected: Bidegree::new(2, 0), found: phi.bidegree() });
    }
    if omega.bidegree() != Bidegree::new(1, 1) {
        return Err(Error::BidegreeMismatch { expected: Bidegree::new(1, 1), found: omega.bidegree() });
    }
    let ps = phi.spectrum();
    let ws = omega.spectrum();
    let mut c = ws.del();
    c.axpy(C64::new(1.0, 0.0), &ps.del_bar())?;
    Ok(ResidualNorms {
        d_omega: d_residual(phi, omega),
        hs_constraint: c.to_field().l2_norm(),
        del_phi: ps.del().to_field().l2_norm(),
        pluriclosed: ws.del_bar().del().to_field().l2_norm(),
        min_margin: super::min_eigenvalue_of_omega(omega),
    })
}

/// A random field whose modes satisfy `max_a |k_a| ≤ cutoff`, without a
/// constant part. Each slot's coefficients are scaled so their absolute
/// values sum to `amplitude`, which bounds the field pointwise by
/// `amplitude`.
pub fn random_field<R: Rng + ?Sized>(
    grid: TorusGrid,
    deg: Bidegree,
    cutoff: usize,
    amplitude: f64,
    rng: &mut R,
) -> FormField {
    let size = grid.size() as i64;
    let axes = grid.axes();
    let cut = cutoff.min(grid.cutoff()) as i64;
    let width = (2 * cut + 1) as usize;
    let modes: Vec<usize> = (0..width.pow(axes as u32))
        .filter_map(|mut m| {
            let mut node = 0i64;
            let mut nonzero = false;
            for _ in 0..axes {
                let k = (m % width) as i64 - cut;
                m /= width;
                nonzero |= k != 0;
                node = node * size + k.rem_euclid(size);
            }
            nonzero.then_some(node as usize)
        })
        .collect();
    let slots = binomial(grid.dim(), deg.p) * binomial(grid.dim(), deg.q);
    let nodes = grid.nodes() as f64;
    let comps = (0..slots)
        .map(|_| {
            let mut spec = vec![ZERO; grid.nodes()];
            let coeffs: Vec<C64> = modes
                .iter()
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let total: f64 = coeffs.iter().map(|c| c.norm()).sum();
            let s = if total > 0.0 { amplitude / total * nodes } else { 0.0 };
            for (&m, c) in modes.iter().zip(coeffs) {
                spec[m] = c * s;
            }
            spec
        })
        .collect();
    Spectrum::from_parts(grid, deg, comps).to_field()
}

/// `√−1 ∂∂̄u` for a random real function `u` bounded by `amplitude`: a
/// real, d-exact (1,1)-field.
pub fn random_ddbar_exact<R: Rng + ?Sized>(grid: TorusGrid, cutoff: usize, amplitude: f64, rng: &mut R) -> FormField {
    let v = random_field(grid, Bidegree::new(0, 0), cutoff, 0.5 * amplitude, rng);
    let u = &v + &v.conjugate();
    del(&del_bar(&u)).scale(I)
}
