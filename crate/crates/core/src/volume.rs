//! The exponential-type volume `𝒱(t) = ∫ β[0]`, the auxiliary forms
//! `α[k,s] = φᵏ ∧ φ̄ᵏ ∧ ω^{n−2k−s}` and
//! `β[s] = Σ_k α[k,s] / ((k!)² (n−2k−s)!)`, the functionals built from
//! them, polynomial fitting of sampled volumes, and the quadratic
//! obstruction test in complex dimension two.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{FlowState, Observable, ProbeSeries, Rate};
use crate::forms::{factorial, Bidegree};
use crate::torus::{
    chern_form, del, del_bar, del_bar_star_fundamental, global_inner_product, integrate, integrate_abs, FormField,
    TorusGrid,
};

/// Cached powers `φᵏ`, `φ̄ᵏ` and `ωʲ`.
struct Powers {
    grid: TorusGrid,
    phi: Vec<FormField>,
    phibar: Vec<FormField>,
    omega: Vec<FormField>,
}

impl Powers {
    fn new(phi: &FormField, omega: &FormField) -> Self {
        let n = omega.grid().dim();
        let mut phis = vec![phi.power(0)];
        let mut omegas = vec![omega.power(0)];
        for k in 1..=n / 2 {
            phis.push(phis[k - 1].wedge(phi).expect("same grid"));
        }
        for j in 1..=n {
            omegas.push(omegas[j - 1].wedge(omega).expect("same grid"));
        }
        let phibar = phis.iter().map(FormField::conjugate).collect();
        Powers { grid: omega.grid(), phi: phis, phibar, omega: omegas }
    }

    fn zero(&self, s: i64) -> FormField {
        let d = (self.grid.dim() as i64 - s).clamp(0, self.grid.dim() as i64) as usize;
        FormField::zeros(self.grid, Bidegree::new(d, d))
    }

    fn alpha(&self, k: i64, s: i64) -> FormField {
        let n = self.grid.dim() as i64;
        if k < 0 || s < 0 || 2 * k + s > n {
            return self.zero(s);
        }
        let (k, m) = (k as usize, (n - 2 * k - s) as usize);
        self.phi[k].wedge(&self.phibar[k]).and_then(|a| a.wedge(&self.omega[m])).expect("same grid")
    }

    fn beta(&self, s: i64) -> FormField {
        let n = self.grid.dim() as i64;
        let mut out = self.zero(s);
        if s < 0 || s > n {
            return out;
        }
        for k in 0..=(n - s) / 2 {
            let w = 1.0 / (factorial(k as usize).powi(2) * factorial((n - 2 * k - s) as usize));
            out.axpy(C64::new(w, 0.0), &self.alpha(k, s)).expect("same degree");
        }
        out
    }
}

/// `α[k,s]`; the zero field of bidegree `(n−s, n−s)` outside
/// `k, s ≥ 0`, `2k + s ≤ n`.
pub fn alpha_ks(phi: &FormField, omega: &FormField, k: i64, s: i64) -> FormField {
    Powers::new(phi, omega).alpha(k, s)
}

pub fn beta_s(phi: &FormField, omega: &FormField, s: i64) -> FormField {
    Powers::new(phi, omega).beta(s)
}

/// `𝒱 = ∫ β[0]`.
pub fn volume_v(phi: &FormField, omega: &FormField) -> f64 {
    integrate(&beta_s(phi, omega, 0)).expect("top degree").re
}

/// A closed-form coefficient together with the integral of the absolute
/// value of its integrand, the scale against which a vanishing
/// coefficient is compared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoefficientEstimate {
    pub value: f64,
    pub scale: f64,
}

/// `aᵢ = (1/i!) ∫ β[i] ∧ (√−1 ∂∂̄ log det g)ⁱ` at the given state.
pub fn coefficient_a(state: &FlowState, i: usize) -> Result<CoefficientEstimate> {
    let n = state.grid().dim();
    if i > n {
        return Err(Error::Precondition(format!("coefficient index {i} exceeds dimension {n}")));
    }
    let powers = Powers::new(state.phi(), state.omega());
    let integrand = powers.beta(i as i64).wedge(&chern_form(state.metric()).power(i))?;
    let f = factorial(i);
    Ok(CoefficientEstimate { value: integrate(&integrand)?.re / f, scale: integrate_abs(&integrand)? / f })
}

/// Which basis a polynomial coefficient came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fitted,
    IntegralFormula,
}

/// `𝒱(t) = Σ aᵢ tⁱ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolumePolynomial {
    pub coeffs: Vec<f64>,
    pub provenance: Vec<Provenance>,
    /// Relative least-squares residual for fitted polynomials.
    pub residual: Option<f64>,
}

impl VolumePolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }
}

/// The polynomial given by the coefficient formulas at `state`.
pub fn volume_polynomial(state: &FlowState) -> Result<VolumePolynomial> {
    let n = state.grid().dim();
    let coeffs = (0..=n).map(|i| coefficient_a(state, i).map(|c| c.value)).collect::<Result<Vec<_>>>()?;
    Ok(VolumePolynomial { coeffs, provenance: vec![Provenance::IntegralFormula; n + 1], residual: None })
}

/// Legendre polynomials `P_0..P_d` at `x`.
fn legendre(d: usize, x: f64) -> Vec<f64> {
    let mut p = vec![1.0; d + 1];
    if d >= 1 {
        p[1] = x;
    }
    for j in 2..=d {
        let jf = j as f64;
        p[j] = ((2.0 * jf - 1.0) * x * p[j - 1] - (jf - 1.0) * p[j - 2]) / jf;
    }
    p
}

/// Monomial coefficients (in `x`) of `P_0..P_d`.
fn legendre_monomials(d: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![1.0]];
    if d >= 1 {
        p.push(vec![0.0, 1.0]);
    }
    for j in 2..=d {
        let jf = j as f64;
        let mut next = vec![0.0; j + 1];
        for (i, &c) in p[j - 1].iter().enumerate() {
            next[i + 1] += (2.0 * jf - 1.0) / jf * c;
        }
        for (i, &c) in p[j - 2].iter().enumerate() {
            next[i] -= (jf - 1.0) / jf * c;
        }
        p.push(next);
    }
    p
}

/// Least-squares fit of `Σ aᵢ tⁱ`, `i ≤ degree`, in a Legendre basis on
/// the sample interval, mapped back to monomials in `t`.
pub fn fit_polynomial(ts: &[f64], vs: &[f64], degree: usize) -> Result<VolumePolynomial> {
    if ts.len() != vs.len() {
        return Err(Error::DimensionMismatch { left: ts.len(), right: vs.len() });
    }
    if ts.len() < degree + 1 {
        return Err(Error::Precondition(format!("{} samples cannot determine a degree {degree} fit", ts.len())));
    }
    if ts.iter().chain(vs).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("samples must be finite".into()));
    }
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if degree > 0 && hi <= lo {
        return Err(Error::Numerical("sample times are degenerate".into()));
    }
    let (scale, shift) = if hi > lo { (2.0 / (hi - lo), -(hi + lo) / (hi - lo)) } else { (0.0, 0.0) };
    let m = ts.len();
    let design = DMatrix::from_fn(m, degree + 1, |r, c| legendre(degree, scale * ts[r] + shift)[c]);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Numerical("sample times are degenerate".into()));
    }
    let rhs = DVector::from_column_slice(vs);
    let c = svd.solve(&rhs, 0.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let fitted = &design * &c;
    let num = (&rhs - &fitted).norm();
    let den = rhs.norm();
    let residual = if den > 0.0 { num / den } else { num };

    // Σ c_j P_j(x) → Σ b_i xⁱ → Σ a_i tⁱ with x = scale·t + shift
    let basis = legendre_monomials(degree);
    let mut b = vec![0.0; degree + 1];
    for (j, pj) in basis.iter().enumerate() {
        for (i, &v) in pj.iter().enumerate() {
            b[i] += c[j] * v;
        }
    }
    let mut a = vec![0.0; degree + 1];
    for (i, &bi) in b.iter().enumerate() {
        // (scale·t + shift)^i
        let mut binom = 1.0;
        for r in 0..=i {
            a[r] += bi * binom * scale.powi(r as i32) * shift.powi((i - r) as i32);
            binom = binom * (i - r) as f64 / (r + 1) as f64;
        }
    }
    Ok(VolumePolynomial { coeffs: a, provenance: vec![Provenance::Fitted; degree + 1], residual: Some(residual) })
}

/// Verdict on whether `a₀ + a₁t + a₂t²` admits a flow for all `t > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObstructionVerdict {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub discriminant: f64,
    pub min_positive_root: Option<f64>,
    pub obstructed: bool,
}

/// Least strictly positive root of `a₀ + a₁t + a₂t²`; a root caps the
/// existence time of the flow.
pub fn surface_obstruction(a0: f64, a1: f64, a2: f64) -> Result<ObstructionVerdict> {
    if ![a0, a1, a2].iter().all(|v| v.is_finite()) {
        return Err(Error::Precondition("coefficients must be finite".into()));
    }
    if !(a0 > 0.0) {
        return Err(Error::Precondition(format!("a0 must be positive, got {a0}")));
    }
    let discriminant = a1 * a1 - 4.0 * a2 * a0;
    let root = if a2 == 0.0 {
        (a1 < 0.0).then(|| -a0 / a1)
    } else if discriminant < 0.0 {
        None
    } else {
        let q = -0.5 * (a1 + a1.signum() * discriminant.sqrt());
        let q = if a1 == 0.0 { -0.5 * discriminant.sqrt() } else { q };
        [q / a2, a0 / q].into_iter().filter(|r| *r > 0.0).reduce(f64::min)
    };
    Ok(ObstructionVerdict { a0, a1, a2, discriminant, min_positive_root: root, obstructed: root.is_some() })
}

/// `a₂ = c₁²/2` for a ruled surface over a curve of genus `f`, where
/// `c₁² = 8(1 − f)`.
pub fn ruled_surface_a2(genus: u32) -> f64 {
    4.0 * (1.0 - genus as f64)
}

/// A real `(s,s)` field with `∂ψ = ∂̄ψ = 0`.
#[derive(Clone, Debug)]
pub struct TestForm {
    field: FormField,
}

impl TestForm {
    pub const CLOSEDNESS_TOLERANCE: f64 = 1e-10;

    pub fn new(field: FormField) -> Result<Self> {
        let deg = field.bidegree();
        if deg.p != deg.q {
            return Err(Error::Precondition(format!("test form must have bidegree (s,s), got {deg}")));
        }
        let scale = field.max_abs().max(1.0);
        let defect = field.reality_defect();
        if defect > 1e-12 * scale {
            return Err(Error::NotReal(defect));
        }
        let r = del(&field).l2_norm().max(del_bar(&field).l2_norm());
        if r > Self::CLOSEDNESS_TOLERANCE * scale {
            return Err(Error::Precondition(format!("test form is not closed: residual {r:e}")));
        }
        Ok(TestForm { field })
    }

    /// The constant function 1.
    pub fn one(grid: TorusGrid) -> Self {
        TestForm { field: FormField::constant(grid, &crate::forms::Form::one(grid.dim())).expect("same grid") }
    }

    pub fn degree(&self) -> usize {
        self.field.bidegree().p
    }

    pub fn field(&self) -> &FormField {
        &self.field
    }
}

fn check_test_form(state: &FlowState, s: usize, psi: &TestForm) -> Result<()> {
    if psi.field.grid() != state.grid() {
        return Err(Error::DimensionMismatch { left: psi.field.grid().nodes(), right: state.grid().nodes() });
    }
    if psi.degree() != s {
        return Err(Error::BidegreeMismatch { expected: Bidegree::new(s, s), found: psi.field.bidegree() });
    }
    Ok(())
}

/// `P[k,s;ψ] = ∫ α[k,s] ∧ ψ`.
pub fn functional_p(state: &FlowState, k: usize, s: usize, psi: &TestForm) -> Result<f64> {
    check_test_form(state, s, psi)?;
    let a = alpha_ks(state.phi(), state.omega(), k as i64, s as i64);
    Ok(integrate(&a.wedge(&psi.field)?)?.re)
}

/// `Q[s;ψ] = ∫ β[s] ∧ ψ`.
pub fn functional_q(state: &FlowState, s: usize, psi: &TestForm) -> Result<f64> {
    check_test_form(state, s, psi)?;
    let b = beta_s(state.phi(), state.omega(), s as i64);
    Ok(integrate(&b.wedge(&psi.field)?)?.re)
}

/// `‖∂∂̄β[s]‖`. The product is formed on a grid fine enough to hold every
/// mode of `β[s]`, so the residual is not polluted by aliasing.
pub fn check_beta_pluriclosed(state: &FlowState, s: usize) -> Result<f64> {
    let grid = state.grid();
    let n = grid.dim();
    if s == 0 || s >= n {
        // top degree, or the constant β[n] = 1
        return Ok(0.0);
    }
    let factors = n - s;
    let need = 2 * factors * grid.cutoff() + 2;
    let mut size = grid.size().max(need + need % 2);
    if TorusGrid::new(n, size).is_err() {
        size = grid.size();
    }
    let (phi, omega) = if size == grid.size() {
        (state.phi().clone(), state.omega().clone())
    } else {
        (state.phi().refine(size)?, state.omega().refine(size)?)
    };
    let beta = beta_s(&phi, &omega, s as i64);
    Ok(del(&del_bar(&beta)).l2_norm())
}

/// `∂̄*ω` and `∂̄ω` at a state.
fn torsion_parts(state: &FlowState) -> Result<(FormField, FormField)> {
    let x = del_bar_star_fundamental(state.omega(), &del(state.omega()), state.metric())?;
    Ok((x, del_bar(state.omega())))
}

/// Scalar functionals with analytic time derivatives along the flow.
#[derive(Clone, Debug)]
pub enum Probe {
    /// `𝒱`, with rate `∫ β[1] ∧ √−1∂∂̄ log det g`.
    Volume,
    /// `F = (φ, φ)`, with rate `−2(∂̄ω, ∂̄ω)` in complex dimension two.
    PhiNorm,
    P { k: usize, s: usize, psi: TestForm },
    Q { s: usize, psi: TestForm },
}

impl Observable for Probe {
    fn name(&self) -> String {
        match self {
            Probe::Volume => "V".into(),
            Probe::PhiNorm => "F".into(),
            Probe::P { k, s, .. } => format!("P[{k},{s}]"),
            Probe::Q { s, .. } => format!("Q[{s}]"),
        }
    }

    fn value(&self, state: &FlowState) -> Result<f64> {
        match self {
            Probe::Volume => Ok(volume_v(state.phi(), state.omega())),
            Probe::PhiNorm => Ok(global_inner_product(state.phi(), state.phi(), state.metric())?.re),
            Probe::P { k, s, psi } => functional_p(state, *k, *s, psi),
            Probe::Q { s, psi } => functional_q(state, *s, psi),
        }
    }

    fn rate(&self, state: &FlowState) -> Result<Rate> {
        let chern = chern_form(state.metric());
        match self {
            Probe::Volume => {
                let f = beta_s(state.phi(), state.omega(), 1).wedge(&chern)?;
                Ok(Rate { value: integrate(&f)?.re, scale: integrate_abs(&f)? })
            }
            Probe::PhiNorm => {
                if state.grid().dim() != 2 {
                    return Err(Error::UnsupportedDimension(state.grid().dim()));
                }
                let dbw = del_bar(state.omega());
                let v = -2.0 * global_inner_product(&dbw, &dbw, state.metric())?.re;
                Ok(Rate { value: v, scale: v.abs() })
            }
            Probe::Q { s, psi } => {
                check_test_form(state, *s, psi)?;
                let f = beta_s(state.phi(), state.omega(), *s as i64 + 1).wedge(&chern)?.wedge(&psi.field)?;
                Ok(Rate { value: integrate(&f)?.re, scale: integrate_abs(&f)? })
            }
            Probe::P { k, s, psi } => {
                check_test_form(state, *s, psi)?;
                let n = state.grid().dim() as i64;
                let (k, s) = (*k as i64, *s as i64);
                let m = n - 2 * k - s;
                let powers = Powers::new(state.phi(), state.omega());
                let (x, dbw) = torsion_parts(state)?;
                let mut value = 0.0;
                let mut scale = 0.0;
                let mut term = |coef: f64, f: FormField, doubled: bool| -> Result<()> {
                    if coef == 0.0 {
                        return Ok(());
                    }
                    let c = integrate(&f)?.re;
                    let a = integrate_abs(&f)?;
                    let w = if doubled { 2.0 } else { 1.0 };
                    value += w * coef * c;
                    scale += w * coef.abs() * a;
                    Ok(())
                };
                let kf = k as f64;
                let mf = m as f64;
                // −k²(A + Ā), A = ∫ ∂̄*ω ∧ α[k−1,s+2] ∧ ∂̄ω ∧ ψ
                let a = x.wedge(&powers.alpha(k - 1, s + 2))?.wedge(&dbw)?.wedge(&psi.field)?;
                term(-kf * kf, a, true)?;
                // m(m−1)(B + B̄), B = ∫ ∂̄*ω ∧ α[k,s+2] ∧ ∂̄ω ∧ ψ
                let b = x.wedge(&powers.alpha(k, s + 2))?.wedge(&dbw)?.wedge(&psi.field)?;
                term(mf * (mf - 1.0), b, true)?;
                // m ∫ α[k,s+1] ∧ √−1∂∂̄ log det g ∧ ψ
                let c = powers.alpha(k, s + 1).wedge(&chern)?.wedge(&psi.field)?;
                term(mf, c, false)?;
                Ok(Rate { value, scale })
            }
        }
    }
}

/// Agreement between a centred-difference derivative and its analytic
/// counterpart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub windows: usize,
    /// `max |FD − analytic| / max(|analytic|, scale)` over the windows.
    pub max_rel_error: f64,
    pub worst_t: f64,
}

/// Compares each recorded analytic rate with the five-point centred
/// difference of the probe values around it.
pub fn check_derivative_identities(series: &[ProbeSeries], dt: f64) -> Result<Vec<IdentityCheck>> {
    series
        .iter()
        .map(|s| {
            let mut worst = (0.0f64, f64::NAN);
            let mut windows = 0;
            for &(step, t, rate) in &s.rates {
                let at = |j: i64| {
                    s.values.iter().find(|v| v.0 as i64 == step as i64 + j).map(|v| v.2)
                };
                let (Some(m2), Some(m1), Some(p1), Some(p2)) = (at(-2), at(-1), at(1), at(2)) else {
                    continue;
                };
                let fd = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * dt);
                let denom = rate.value.abs().max(rate.scale);
                let err = if denom > 0.0 { (fd - rate.value).abs() / denom } else { (fd - rate.value).abs() };
                windows += 1;
                if !(err <= worst.0) {
                    worst = (err, t);
                }
            }
            if windows == 0 {
                return Err(Error::Precondition(format!("no complete difference window for {}", s.name)));
            }
            Ok(IdentityCheck { name: s.name.clone(), windows, max_rel_error: worst.0, worst_t: worst.1 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_tables_agree() {
        let m = legendre_monomials(4);
        for &x in &[-0.7, 0.1, 0.9] {
            let p = legendre(4, x);
            for j in 0..=4 {
                let v: f64 = m[j].iter().enumerate().map(|(i, c)| c * x.powi(i as i32)).sum();
                assert!((v - p[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ruled_preset() {
        assert_eq!(ruled_surface_a2(2), -4.0);
        assert_eq!(ruled_surface_a2(1), 0.0);
    }
}
