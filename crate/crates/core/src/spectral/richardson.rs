//! Richardson extrapolation over grid sequences.

use super::Extrapolation;

/// Observed order `p` from three grids, solving
/// `(e1 − e2)/(e2 − e3) = (h1^p − h2^p)/(h2^p − h3^p)` for `h1 < h2 < h3`.
pub fn observed_order(h: [f64; 3], e: [f64; 3]) -> Option<f64> {
    let d12 = e[0] - e[1];
    let d23 = e[1] - e[2];
    if d23 == 0.0 || d12 == 0.0 || d12.signum() != d23.signum() {
        return None;
    }
    let target = d12 / d23;
    let f = |p: f64| (h[0].powf(p) - h[1].powf(p)) / (h[1].powf(p) - h[2].powf(p)) - target;
    let (mut lo, mut hi) = (0.05, 12.0);
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Extrapolates `(points_per_dim, value)` pairs to zero spacing `h ∝ 1/n`.
///
/// With three or more grids the order is measured from the three finest;
/// otherwise (or if the measurement fails) `assumed_order` is used.
pub fn extrapolate(grids: &[(usize, f64)], assumed_order: f64) -> Option<Extrapolation> {
    let mut g = grids.to_vec();
    g.sort_by(|a, b| b.0.cmp(&a.0));
    g.dedup_by_key(|x| x.0);
    if g.len() < 2 {
        return None;
    }
    let h = |n: usize| 1.0 / n as f64;
    let mut order = assumed_order;
    let mut observed = false;
    if g.len() >= 3 {
        if let Some(p) = observed_order([h(g[0].0), h(g[1].0), h(g[2].0)], [g[0].1, g[1].1, g[2].1]) {
            order = p;
            observed = true;
        }
    }
    let ratio = (g[0].0 as f64 / g[1].0 as f64).powf(order);
    Some(Extrapolation {
        value: g[0].1 + (g[0].1 - g[1].1) / (ratio - 1.0),
        order,
        order_observed: observed,
        grids: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_model_sequence() {
        let model = |n: usize| 3.0 + 2.0 / (n as f64).powi(2) - 1.0 / (n as f64).powi(4);
        let ex = extrapolate(&[(60, model(60)), (90, model(90)), (40, model(40))], 2.0).unwrap();
        assert!(ex.order_observed);
        assert!((ex.order - 2.0).abs() < 0.01);
        assert!((ex.value - 3.0).abs() < 1e-6);
        let two = extrapolate(&[(90, model(90)), (60, model(60))], 2.0).unwrap();
        assert!(!two.order_observed);
        assert!((two.value - 3.0).abs() < 1e-6);
    }

    #[test]
    fn non_monotone_data_falls_back() {
        let ex = extrapolate(&[(10, 1.0), (20, 2.0), (40, 1.5)], 2.0).unwrap();
        assert!(!ex.order_observed);
    }
}
