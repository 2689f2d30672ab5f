//! Time integration of the Hermitian-symplectic flow
//!
//! ```text
//! ∂ω/∂t = ∂∂*ω + ∂̄∂̄*ω + √−1 ∂∂̄ log det g
//! ∂φ/∂t = −∂ tr_g(∂̄φ)
//! ```
//!
//! for `Ω = φ + ω + φ̄` on the flat torus. The state is advanced in Fourier
//! space with the classical four-stage Runge–Kutta scheme; each right-hand
//! side is truncated to the 2/3-rule band, so a band-limited state stays
//! band-limited.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{Bidegree, HermitianMetric, I};
use crate::torus::{
    del, del_bar, del_bar_star_fundamental, global_inner_product, random_ddbar_exact, random_field,
    residual_norms, trace_g, FormField, MetricField, ResidualNorms, Spectrum, TorusGrid,
};
use crate::volume::volume_v;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    pub dt: f64,
    pub steps: usize,
    /// A diagnostics record is taken every `sample_every` steps.
    pub sample_every: usize,
    /// Fraction of the parabolic step bound that `dt` may use.
    pub safety: f64,
    /// Abort once `‖∂ω + ∂̄φ‖` or `‖∂φ‖` exceeds this.
    pub constraint_tolerance: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { dt: 1e-4, steps: 2000, sample_every: 100, safety: 0.5, constraint_tolerance: 1e-6 }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Precondition(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Precondition(format!("safety must lie in (0, 1], got {}", self.safety)));
        }
        if self.sample_every == 0 {
            return Err(Error::Precondition("sample_every must be at least 1".into()));
        }
        if !(self.constraint_tolerance > 0.0) {
            return Err(Error::Precondition("constraint tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// `(φ, ω)` at time `t`, with the metric of `ω`.
#[derive(Clone, Debug)]
pub struct FlowState {
    t: f64,
    phi: FormField,
    omega: FormField,
    metric: MetricField,
}

impl FlowState {
    /// Checks bidegrees, reality of `ω` and positivity.
    pub fn new(t: f64, phi: FormField, omega: FormField) -> Result<Self> {
        if omega.grid().dim() < 2 {
            return Err(Error::UnsupportedDimension(omega.grid().dim()));
        }
        if phi.bidegree() != Bidegree::new(2, 0) {
            return Err(Error::BidegreeMismatch { expected: Bidegree::new(2, 0), found: phi.bidegree() });
        }
        if phi.grid() != omega.grid() {
            return Err(Error::DimensionMismatch { left: phi.grid().nodes(), right: omega.grid().nodes() });
        }
        let defect = omega.reality_defect();
        if defect > 1e-12 * omega.max_abs().max(1.0) {
            return Err(Error::NotReal(defect));
        }
        let metric = MetricField::from_omega(&omega)?;
        Ok(FlowState { t, phi, omega, metric })
    }

    /// `φ = 0`, `ω = √−1 Σ dzⁱ ∧ dz̄ⁱ`.
    pub fn flat_kahler(grid: TorusGrid) -> Self {
        let omega = FormField::constant(grid, &HermitianMetric::identity(grid.dim()).fundamental_form())
            .expect("same dimension");
        FlowState::new(0.0, FormField::zeros(grid, Bidegree::new(2, 0)), omega).expect("flat metric")
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn phi(&self) -> &FormField {
        &self.phi
    }

    pub fn omega(&self) -> &FormField {
        &self.omega
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn grid(&self) -> TorusGrid {
        self.omega.grid()
    }

    pub fn residuals(&self) -> Result<ResidualNorms> {
        residual_norms(&self.phi, &self.omega)
    }
}

fn flat_omega(grid: TorusGrid) -> FormField {
    FormField::constant(grid, &HermitianMetric::identity(grid.dim()).fundamental_form()).expect("same dimension")
}

fn check_initial_args(grid: TorusGrid, epsilon: f64) -> Result<()> {
    if grid.dim() < 2 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Precondition(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    Ok(())
}

/// `Ω₀ = ω_flat + d(ζ + ζ̄)` for a random (1,0)-field `ζ` with modes
/// `|k_a| ≤ mode_cutoff` and coefficient mass `epsilon` per slot, split
/// as `φ₀ = ∂ζ`, `ω₀ = ω_flat + ∂̄ζ + ∂ζ̄`.
pub fn make_initial_hs(grid: TorusGrid, seed: u64, epsilon: f64, mode_cutoff: usize) -> Result<FlowState> {
    check_initial_args(grid, epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeta = random_field(grid, Bidegree::new(1, 0), mode_cutoff, epsilon, &mut rng);
    let phi = del(&zeta);
    let x = del_bar(&zeta);
    let omega = &flat_omega(grid) + &(&x + &x.conjugate());
    FlowState::new(0.0, phi, omega)
}

/// Kähler data `ω₀ = ω_flat + √−1 ∂∂̄u`, `φ₀ = 0`, with `|u| ≤ epsilon`.
pub fn make_initial_kahler(grid: TorusGrid, seed: u64, epsilon: f64, mode_cutoff: usize) -> Result<FlowState> {
    check_initial_args(grid, epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = &flat_omega(grid) + &random_ddbar_exact(grid, mode_cutoff, epsilon, &mut rng);
    FlowState::new(0.0, FormField::zeros(grid, Bidegree::new(2, 0)), omega)
}

/// Spectrum of `∂∂*ω + ∂̄∂̄*ω + √−1 ∂∂̄ log det g`, truncated, from the
/// spectrum of ω and its metric.
///
/// With `X = ∂̄*ω` and `L` the real part of `log det g`, slot `(i, j̄)`
/// at wavevector `k` is
/// `X_i(k) μ̄_j + conj(X_j(−k)) μ_i − √−1 μ_i μ̄_j L(k)`, where `μ` is
/// the `∂` multiplier; this is real by construction.
fn omega_rhs_spectrum(omega_hat: &Spectrum, metric: &MetricField) -> Result<Spectrum> {
    let grid = metric.grid();
    let n = grid.dim();
    // ∂̄*ω = −*(ω^{n−2} ∧ ∂ω)/(n−2)! = tr_g(∂ω)
    let x = trace_g(&omega_hat.del().to_field(), metric)?.spectrum();
    let l = metric.log_det().into_form().spectrum();
    let l = &l.components()[0];
    let x = x.components();
    let sp = crate::torus::spectral(grid);
    let half = C64::new(0.5, 0.0);
    let mut comps = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (mi, mj) = (&sp.mu[i], &sp.mu[j]);
            let out = (0..grid.nodes())
                .map(|k| {
                    if !sp.keep[k] {
                        return C64::new(0.0, 0.0);
                    }
                    let kn = sp.neg[k] as usize;
                    let (ui, uj) = (mi[k], mj[k].conj());
                    let lr = (l[k] + l[kn].conj()) * half;
                    x[i][k] * uj + x[j][kn].conj() * ui - I * ui * uj * lr
                })
                .collect();
            comps.push(out);
        }
    }
    Ok(Spectrum::from_parts(grid, Bidegree::new(1, 1), comps))
}

/// Spectrum of `−∂ tr_g(∂̄φ)`, truncated.
fn phi_rhs_spectrum(phi_hat: &Spectrum, metric: &MetricField) -> Result<Spectrum> {
    let y = trace_g(&phi_hat.del_bar().to_field(), metric)?.spectrum();
    let sp = crate::torus::spectral(metric.grid());
    let mut r = y.del();
    for comp in r.components_mut() {
        for (v, &keep) in comp.iter_mut().zip(&sp.keep) {
            *v = if keep { -*v } else { C64::new(0.0, 0.0) };
        }
    }
    Ok(r)
}

/// `∂∂*ω + ∂̄∂̄*ω + √−1 ∂∂̄ log det g`, truncated to the dealiasing band.
pub fn pluriclosed_rhs(omega: &FormField) -> Result<FormField> {
    let metric = MetricField::from_omega(omega)?;
    Ok(omega_rhs_spectrum(&omega.spectrum(), &metric)?.to_field())
}

/// `−∂ tr_g(∂̄φ)`, truncated to the dealiasing band.
pub fn phi_rhs(phi: &FormField, omega: &FormField) -> Result<FormField> {
    let metric = MetricField::from_omega(omega)?;
    Ok(phi_rhs_spectrum(&phi.spectrum(), &metric)?.to_field())
}

/// `∂∂̄*ω`, which equals [`phi_rhs`] whenever `∂ω + ∂̄φ = 0`.
pub fn phi_rhs_from_torsion(omega: &FormField) -> Result<FormField> {
    let metric = MetricField::from_omega(omega)?;
    let x = del_bar_star_fundamental(omega, &del(omega), &metric)?;
    Ok(x.spectrum().del().truncated().to_field())
}

/// `dt` allowed by `safety · h² · (min eigenvalue / max eigenvalue)`.
pub fn stability_bound(state: &FlowState, safety: f64) -> f64 {
    let (lo, hi) = state.metric.eigen_extremes();
    let h = state.grid().spacing();
    safety * h * h * lo / hi
}

#[derive(Clone)]
struct SpectralState {
    omega: Spectrum,
    phi: Spectrum,
}

/// A spectral state with its physical ω and metric, which every stage
/// needs.
struct Evaluated {
    y: SpectralState,
    omega: FormField,
    metric: MetricField,
}

impl SpectralState {
    fn from_state(s: &FlowState) -> Self {
        SpectralState { omega: s.omega.spectrum().truncated(), phi: s.phi.spectrum().truncated() }
    }

    fn evaluate(self) -> Result<Evaluated> {
        let omega = self.omega.to_real_field_11();
        let metric = MetricField::from_omega(&omega)?;
        Ok(Evaluated { y: self, omega, metric })
    }

    fn combine(terms: &[(f64, &SpectralState)]) -> SpectralState {
        let omega: Vec<_> = terms.iter().map(|&(c, s)| (c, &s.omega)).collect();
        let phi: Vec<_> = terms.iter().map(|&(c, s)| (c, &s.phi)).collect();
        SpectralState { omega: Spectrum::lincomb(&omega), phi: Spectrum::lincomb(&phi) }
    }
}

impl Evaluated {
    fn rhs(&self) -> Result<SpectralState> {
        Ok(SpectralState {
            omega: omega_rhs_spectrum(&self.y.omega, &self.metric)?,
            phi: phi_rhs_spectrum(&self.y.phi, &self.metric)?,
        })
    }

    /// Positivity is checked at every stage and at the accepted state.
    fn rk4(&self, dt: f64) -> Result<Evaluated> {
        let y = &self.y;
        let k1 = self.rhs()?;
        let k2 = SpectralState::combine(&[(1.0, y), (0.5 * dt, &k1)]).evaluate()?.rhs()?;
        let k3 = SpectralState::combine(&[(1.0, y), (0.5 * dt, &k2)]).evaluate()?.rhs()?;
        let k4 = SpectralState::combine(&[(1.0, y), (dt, &k3)]).evaluate()?.rhs()?;
        SpectralState::combine(&[(1.0, y), (dt / 6.0, &k1), (dt / 3.0, &k2), (dt / 3.0, &k3), (dt / 6.0, &k4)])
            .evaluate()
    }

    fn materialize(&self, t: f64) -> FlowState {
        FlowState { t, phi: self.y.phi.to_field(), omega: self.omega.clone(), metric: self.metric.clone() }
    }
}

/// One classical Runge–Kutta step. The result is truncated to the
/// dealiasing band; positivity loss in any stage is an error.
pub fn step_rk4(state: &FlowState, dt: f64) -> Result<FlowState> {
    Ok(SpectralState::from_state(state).evaluate()?.rk4(dt)?.materialize(state.t + dt))
}

/// Per-sample monitors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// The exponential-type volume.
    #[serde(rename = "V")]
    pub volume: f64,
    /// `(φ, φ)` in the current metric.
    #[serde(rename = "F")]
    pub phi_norm: f64,
    pub d_omega_residual: f64,
    pub hs_constraint_residual: f64,
    pub del_phi_residual: f64,
    pub pluriclosed_residual: f64,
    pub min_eig_margin: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 8] = [
        "t",
        "V",
        "F",
        "d_omega_residual",
        "hs_constraint_residual",
        "del_phi_residual",
        "pluriclosed_residual",
        "min_eig_margin",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.t,
            self.volume,
            self.phi_norm,
            self.d_omega_residual,
            self.hs_constraint_residual,
            self.del_phi_residual,
            self.pluriclosed_residual,
            self.min_eig_margin,
        ]
    }
}

pub fn diagnostics(state: &FlowState) -> Result<DiagnosticsRecord> {
    let res = state.residuals()?;
    Ok(DiagnosticsRecord {
        t: state.t,
        volume: volume_v(&state.phi, &state.omega),
        phi_norm: global_inner_product(&state.phi, &state.phi, &state.metric)?.re,
        d_omega_residual: res.d_omega,
        hs_constraint_residual: res.hs_constraint,
        del_phi_residual: res.del_phi,
        pluriclosed_residual: res.pluriclosed,
        min_eig_margin: res.min_margin,
    })
}

/// An analytic time derivative and the magnitude against which its error
/// is measured (it may vanish identically while its ingredients do not).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rate {
    pub value: f64,
    pub scale: f64,
}

/// A scalar functional of the state with a closed-form time derivative.
pub trait Observable {
    fn name(&self) -> String;
    fn value(&self, state: &FlowState) -> Result<f64>;
    fn rate(&self, state: &FlowState) -> Result<Rate>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeSeries {
    pub name: String,
    /// `(step, t, value)`
    pub values: Vec<(usize, f64, f64)>,
    /// `(step, t, analytic rate)`
    pub rates: Vec<(usize, f64, Rate)>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub probes: Vec<ProbeSeries>,
    /// Why the run stopped early, if it did.
    pub failure: Option<Error>,
    /// The last state known to be valid.
    pub final_state: FlowState,
    pub dt: f64,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

pub fn run_flow(config: &FlowConfig, initial: &FlowState) -> Result<Trajectory> {
    run_flow_with(config, initial, &[], &mut |_| Ok(()))
}

/// Runs the flow, evaluating `probes` at every step within two steps of a
/// sample (for centred differences) and calling `observer` on every
/// sampled state.
pub fn run_flow_with(
    config: &FlowConfig,
    initial: &FlowState,
    probes: &[&dyn Observable],
    observer: &mut dyn FnMut(&FlowState) -> Result<()>,
) -> Result<Trajectory> {
    config.validate()?;
    let every = config.sample_every;
    let steps = config.steps;
    let near_sample = |step: usize| {
        let r = step % every;
        let j = if r <= 2 { step - r } else { step + every - r };
        (r <= 2 || every - r <= 2) && j >= 2 && j + 2 <= steps && j % every == 0
    };
    let mut records = Vec::new();
    let mut series: Vec<ProbeSeries> = probes
        .iter()
        .map(|p| ProbeSeries { name: p.name(), values: Vec::new(), rates: Vec::new() })
        .collect();
    let mut y = SpectralState::from_state(initial).evaluate()?;
    let mut last_valid = initial.clone();
    let mut failure = None;
    for step in 0..=steps {
        let t = initial.t + step as f64 * config.dt;
        let sample = step % every == 0;
        let window = !probes.is_empty() && near_sample(step);
        if sample || window {
            let state = if step == 0 { initial.clone() } else { y.materialize(t) };
            if window {
                for (p, s) in probes.iter().zip(&mut series) {
                    s.values.push((step, t, p.value(&state)?));
                }
            }
            if sample {
                let rec = diagnostics(&state)?;
                records.push(rec);
                if window {
                    for (p, s) in probes.iter().zip(&mut series) {
                        s.rates.push((step, t, p.rate(&state)?));
                    }
                }
                observer(&state)?;
                let worst = rec.hs_constraint_residual.max(rec.del_phi_residual);
                if !(worst <= config.constraint_tolerance) {
                    failure = Some(Error::ConstraintViolation { t, residual: worst, tolerance: config.constraint_tolerance });
                }
                let bound = stability_bound(&state, config.safety);
                if failure.is_none() && config.dt > bound {
                    failure = Some(Error::StepTooLarge { dt: config.dt, bound });
                }
            }
            last_valid = state;
            if failure.is_some() {
                break;
            }
        }
        if step == steps {
            break;
        }
        match y.rk4(config.dt) {
            Ok(next) => y = next,
            Err(e) => {
                if !(sample || window) {
                    last_valid = y.materialize(t);
                }
                failure = Some(e);
                break;
            }
        }
    }
    Ok(Trajectory { records, probes: series, failure, final_state: last_valid, dt: config.dt })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_state_is_a_fixed_point() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let s = FlowState::flat_kahler(grid);
        let next = step_rk4(&s, 1e-3).unwrap();
        assert!((next.omega() - s.omega()).max_abs() < 1e-15);
        assert_eq!(next.phi().max_abs(), 0.0);
        assert!(pluriclosed_rhs(s.omega()).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        assert!(FlowConfig { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(FlowConfig { safety: 1.5, ..Default::default() }.validate().is_err());
        assert!(FlowConfig { sample_every: 0, ..Default::default() }.validate().is_err());
    }
}
