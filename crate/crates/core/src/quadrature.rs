//! Composite Simpson quadrature with panel doubling.

/// Smallest panel count used by the converged rules.
pub const MIN_PANELS: usize = 2048;

/// Successive-doubling tolerance.
pub const DOUBLING_TOL: f64 = 1e-10;

const MAX_PANELS: usize = 1 << 22;

/// Composite Simpson rule with `panels` sub-intervals (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let y = f(a + i as f64 * h);
        if i % 2 == 1 {
            odd += y;
        } else {
            even += y;
        }
    }
    h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b))
}

/// Simpson rule doubled from `min_panels` until two successive results differ by less than `tol`.
pub fn simpson_converged<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, min_panels: usize, tol: f64) -> f64 {
    let mut n = min_panels.max(2);
    let mut prev = simpson(&f, a, b, n);
    while n < MAX_PANELS {
        n *= 2;
        let next = simpson(&f, a, b, n);
        if (next - prev).abs() < tol {
            return next;
        }
        prev = next;
    }
    prev
}

/// Running integrals of `f` from `nodes[0]` to every node.
///
/// Each gap between consecutive nodes gets its own Simpson rule with `m`
/// panels; `m` doubles until the largest running value moves by less than `tol`.
pub fn cumulative_simpson<F: Fn(f64) -> f64>(f: F, nodes: &[f64], tol: f64) -> Vec<f64> {
    let run = |m: usize| {
        let mut out = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in nodes.windows(2) {
            acc += simpson(&f, w[0], w[1], m);
            out.push(acc);
        }
        out
    };
    let mut m = 2;
    let mut prev = run(m);
    while m < MAX_PANELS {
        m *= 2;
        let next = run(m);
        let diff = next.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff < tol {
            return next;
        }
        prev = next;
    }
    prev
}

/// Simpson rule over equally spaced samples; an even sample count falls back
/// to the trapezoid rule on the last interval.
pub fn simpson_samples(y: &[f64], h: f64) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        2 => 0.5 * h * (y[0] + y[1]),
        n if n % 2 == 1 => {
            let mut s = y[0] + y[n - 1];
            for (i, v) in y.iter().enumerate().take(n - 1).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            s * h / 3.0
        }
        n => simpson_samples(&y[..n - 1], h) + 0.5 * h * (y[n - 2] + y[n - 1]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - (4.0 - 4.0 + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn converged_rule_hits_exponential() {
        let v = simpson_converged(|y| (-y).exp(), 0.0, 1.0, MIN_PANELS, DOUBLING_TOL);
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn cumulative_matches_closed_form() {
        let nodes: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let c = cumulative_simpson(|y| (2.0 * y).exp(), &nodes, 1e-12);
        for (x, v) in nodes.iter().zip(&c) {
            assert!((v - ((2.0 * x).exp() - 1.0) / 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn samples_rule_handles_even_counts() {
        let h = 0.25;
        let y: Vec<f64> = (0..4).map(|i| i as f64 * h).collect();
        assert!((simpson_samples(&y, h) - 0.5 * 0.75 * 0.75).abs() < 1e-15);
    }
}
