/// First sign change of `a₀ + a₁t + a₂t²` on a log grid over
/// `[1e-8, 1e8]`, refined by bisection.
pub fn scan_root(a0: f64, a1: f64, a2: f64) -> Option<f64> {
    let p = |t: f64| a0 + a1 * t + a2 * t * t;
    let points = 32000;
    let mut lo = 0.0;
    for i in 0..=points {
        let t = 10f64.powf(-8.0 + 16.0 * i as f64 / points as f64);
        if p(t) <= 0.0 {
            let mut hi = t;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if p(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(hi);
        }
        lo = t;
    }
    None
}
