//! Invariant suites behind `plurisym verify`.

use num_complex::Complex64 as C64;
use plurisym::forms::{
    conjugate, dual_lefschetz, hodge_star_point, inner_product_point, random_form, random_metric, trace_g_point, wedge,
    Bidegree, HermitianMetric,
};
use plurisym::torus::{
    codifferential_del_bar_star, codifferential_del_star, del, del_bar, del_bar_star_fundamental,
    global_inner_product, integrate, random_field, trace_g, FormField, MetricField, TorusGrid,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// A deliberately broken check, used to exercise the failure path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Flip the sign of the trace term in the star-trace identity.
    SignFlip,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub worst_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn result(suite: &str, worst_error: f64, tolerance: f64) -> SuiteResult {
    SuiteResult { suite: suite.into(), worst_error, tolerance, pass: worst_error <= tolerance }
}

fn flat(grid: TorusGrid) -> FormField {
    FormField::constant(grid, &HermitianMetric::identity(grid.dim()).fundamental_form()).expect("same dimension")
}

/// Flat metric plus a small real (1,1) perturbation that is not closed.
fn curved(grid: TorusGrid, rng: &mut ChaCha8Rng) -> (FormField, MetricField) {
    let x = random_field(grid, Bidegree::new(1, 1), 1, 0.03, rng);
    let w = &flat(grid) + &(&x + &x.conjugate());
    let g = MetricField::from_omega(&w).expect("small perturbation stays positive");
    (w, g)
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(f64::MIN_POSITIVE)
}

/// `*(ωⁿ⁻² ∧ β) = −(n−2)! tr_g β` on random (2,1)-forms, n = 2, 3, 4.
pub fn star_trace_identity(seed: u64, fault: Option<Fault>) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sign = if fault == Some(Fault::SignFlip) { -1.0 } else { 1.0 };
    let mut worst = 0.0f64;
    for n in 2..=4 {
        let fact: f64 = (1..=n - 2).map(|k| k as f64).product();
        for _ in 0..100 {
            let g = random_metric(n, &mut rng);
            let beta = random_form(n, Bidegree::new(2, 1), &mut rng);
            let star = hodge_star_point(&wedge(&g.fundamental_form().power(n - 2), &beta).expect("same n"), &g);
            let tr = trace_g_point(&beta, &g).scale(C64::new(sign * fact, 0.0));
            worst = worst.max(rel((&star + &tr).coeff_norm(), beta.coeff_norm()));
        }
    }
    result("star-trace identity", worst, 1e-12)
}

/// `a ∧ *b̄ = (a, b) dV` for every bidegree, n = 1..=4.
pub fn star_defining_property(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in 1..=4 {
        let g = random_metric(n, &mut rng);
        let dv = g.volume_form();
        for p in 0..=n {
            for q in 0..=n {
                let deg = Bidegree::new(p, q);
                let a = random_form(n, deg, &mut rng);
                let b = random_form(n, deg, &mut rng);
                let lhs = wedge(&a, &hodge_star_point(&conjugate(&b), &g)).expect("same n");
                let ip = inner_product_point(&a, &b, &g).expect("same degree");
                let rhs = dv.scale(ip);
                worst = worst.max(rel((&lhs - &rhs).coeff_norm(), rhs.coeff_norm().max(1.0)));
            }
        }
    }
    result("star defining property", worst, 1e-12)
}

/// `(Λa, c) = (a, ω ∧ c)` on random forms, n = 1..=4.
pub fn lefschetz_adjointness(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in 1..=4 {
        let g = random_metric(n, &mut rng);
        let w = g.fundamental_form();
        for p in 1..=n {
            for q in 1..=n {
                let a = random_form(n, Bidegree::new(p, q), &mut rng);
                let c = random_form(n, Bidegree::new(p - 1, q - 1), &mut rng);
                let lhs = inner_product_point(&dual_lefschetz(&a, &g), &c, &g).expect("same degree");
                let rhs = inner_product_point(&a, &wedge(&w, &c).expect("same n"), &g).expect("same degree");
                worst = worst.max(rel((lhs - rhs).norm(), rhs.norm().max(1.0)));
            }
        }
    }
    result("trace is adjoint to the Lefschetz operator", worst, 1e-12)
}

fn grids() -> [TorusGrid; 2] {
    [TorusGrid::new(2, 16).expect("valid"), TorusGrid::new(3, 8).expect("valid")]
}

/// `∂² = ∂̄² = ∂∂̄ + ∂̄∂ = 0` on random band-limited fields.
pub fn spectral_exactness(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for grid in grids() {
        for deg in [Bidegree::new(0, 0), Bidegree::new(1, 0), Bidegree::new(0, 1), Bidegree::new(1, 1)] {
            let a = random_field(grid, deg, grid.cutoff(), 1.0, &mut rng);
            worst = worst.max(del(&del(&a)).l2_norm());
            worst = worst.max(del_bar(&del_bar(&a)).l2_norm());
            worst = worst.max((&del(&del_bar(&a)) + &del_bar(&del(&a))).l2_norm());
        }
    }
    result("spectral d² = 0", worst, 1e-12)
}

/// `∫ ∂a = ∫ ∂̄b = 0` for top-minus-one fields.
pub fn stokes(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for grid in grids() {
        let n = grid.dim();
        let a = random_field(grid, Bidegree::new(n - 1, n), grid.cutoff(), 1.0, &mut rng);
        let b = random_field(grid, Bidegree::new(n, n - 1), grid.cutoff(), 1.0, &mut rng);
        worst = worst.max(integrate(&del(&a)).expect("top degree").norm());
        worst = worst.max(integrate(&del_bar(&b)).expect("top degree").norm());
    }
    result("Stokes", worst, 1e-10)
}

/// `(∂a, b) = (a, ∂*b)` and `(∂̄a, b) = (a, ∂̄*b)` for a curved metric.
pub fn codifferential_adjointness(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TorusGrid::new(2, 16).expect("valid");
    let (_, g) = curved(grid, &mut rng);
    let mut worst = 0.0f64;
    for deg in [Bidegree::new(0, 1), Bidegree::new(1, 0), Bidegree::new(1, 1)] {
        let a = random_field(grid, deg, 2, 1.0, &mut rng);
        let b = random_field(grid, Bidegree::new(deg.p + 1, deg.q), 2, 1.0, &mut rng);
        let lhs = global_inner_product(&del(&a), &b, &g).expect("same degree");
        let rhs = global_inner_product(&a, &codifferential_del_star(&b, &g).expect("valid"), &g).expect("same degree");
        worst = worst.max(rel((lhs - rhs).norm(), lhs.norm()));
        let b = random_field(grid, Bidegree::new(deg.p, deg.q + 1), 2, 1.0, &mut rng);
        let lhs = global_inner_product(&del_bar(&a), &b, &g).expect("same degree");
        let rhs =
            global_inner_product(&a, &codifferential_del_bar_star(&b, &g).expect("valid"), &g).expect("same degree");
        worst = worst.max(rel((lhs - rhs).norm(), lhs.norm()));
    }
    // products of band-limited fields alias, so this holds to quadrature accuracy only
    result("codifferential adjointness", worst, 1e-8)
}

/// `∂̄*ω` through the Hodge star against `tr_g ∂ω`.
pub fn codifferential_of_fundamental_form(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for grid in grids() {
        let (w, g) = curved(grid, &mut rng);
        let dw = del(&w);
        let via_star = codifferential_del_bar_star(&w, &g).expect("valid");
        let via_trace = trace_g(&dw, &g).expect("valid");
        let fundamental = del_bar_star_fundamental(&w, &dw, &g).expect("valid");
        worst = worst.max((&via_star - &via_trace).l2_norm());
        worst = worst.max((&fundamental - &via_trace).l2_norm());
    }
    result("codifferential of the fundamental form", worst, 1e-10)
}

pub fn run_all(seed: u64, fault: Option<Fault>) -> Vec<SuiteResult> {
    vec![
        star_trace_identity(seed, fault),
        star_defining_property(seed.wrapping_add(1)),
        lefschetz_adjointness(seed.wrapping_add(2)),
        spectral_exactness(seed.wrapping_add(3)),
        stokes(seed.wrapping_add(4)),
        codifferential_adjointness(seed.wrapping_add(5)),
        codifferential_of_fundamental_form(seed.wrapping_add(6)),
    ]
}
