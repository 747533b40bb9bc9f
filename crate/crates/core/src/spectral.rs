//! Singular Sturm-Liouville problem `-w'' + V w = lambda w / (x(1-x))` with
//! Dirichlet ends, whose principal eigenvalue is the interior decay rate of
//! the replicator-diffusion equation.

use crate::error::{Error, Result};
use crate::quadrature::{simpson_converged, DOUBLING_TOL, MIN_PANELS};

/// Default number of modes.
pub const DEFAULT_MODES: usize = 32;

/// Change of the extrapolated principal eigenvalue that stops grid refinement.
pub const REFINE_TOL: f64 = 1e-8;

const FIRST_GRID: usize = 200;
const MAX_GRID: usize = 25_600;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralProblem {
    pub alpha: f64,
    pub beta: f64,
}

impl SpectralProblem {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn eta(&self) -> f64 {
        self.alpha - self.beta
    }

    /// `V(x) = eta/2 + (beta + eta x)^2 / 4`.
    pub fn potential(&self, x: f64) -> f64 {
        let m = self.beta + self.eta() * x;
        0.5 * self.eta() + 0.25 * m * m
    }

    /// `omega(x) = 1 / (x(1-x))`.
    pub fn weight(&self, x: f64) -> f64 {
        1.0 / (x * (1.0 - x))
    }

    fn phase(&self, x: f64) -> f64 {
        (-0.5 * (self.beta * x + 0.5 * self.eta() * x * x)).exp()
    }

    /// `w(x) = x(1-x) p(x) exp(-(beta x + eta x^2/2)/2)` at the given nodes.
    pub fn w_transform(&self, p: &[f64], nodes: &[f64]) -> Vec<f64> {
        p.iter().zip(nodes).map(|(p, &x)| x * (1.0 - x) * p * self.phase(x)).collect()
    }

    /// Inverse of [`w_transform`](Self::w_transform) on interior nodes.
    pub fn inverse_w_transform(&self, w: &[f64], nodes: &[f64]) -> Vec<f64> {
        w.iter().zip(nodes).map(|(w, &x)| w / (x * (1.0 - x) * self.phase(x))).collect()
    }
}

/// Eigenpairs on a grid; eigenfunctions are sampled at the interior nodes and
/// normalized so that `sum phi_j phi_k omega h = delta_jk`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub grid: usize,
    pub eigenvalues: Vec<f64>,
    pub nodes: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SpectralData {
    fn h(&self) -> f64 {
        1.0 / self.grid as f64
    }

    /// Weighted inner product `sum u v omega h`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let h = self.h();
        u.iter().zip(v).zip(&self.weights).map(|((a, b), w)| a * b * w * h).sum()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, u) in self.eigenfunctions.iter().enumerate() {
            for (k, v) in self.eigenfunctions.iter().enumerate() {
                let want = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((self.inner(u, v) - want).abs());
            }
        }
        worst
    }

    /// Expansion coefficients of `w` (sampled at [`nodes`](Self::nodes)).
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        self.eigenfunctions.iter().map(|phi| self.inner(w, phi)).collect()
    }

    /// `sum c_j exp(-lambda_j t) phi_j`.
    pub fn reconstruct(&self, coeffs: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for ((c, lambda), phi) in coeffs.iter().zip(&self.eigenvalues).zip(&self.eigenfunctions) {
            let k = c * (-lambda * t).exp();
            for (o, p) in out.iter_mut().zip(phi) {
                *o += k * p;
            }
        }
        out
    }
}

/// Symmetric tridiagonal matrix: `diag[i]` and `off[i]` = entry `(i, i+1)`.
struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    /// Number of eigenvalues strictly below `mu` (Sturm sequence).
    fn count_below(&self, mu: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.diag.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - mu - b2 / d;
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + mu.abs() + f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue by bisection.
    fn eigenvalue(&self, k: usize, bounds: (f64, f64)) -> f64 {
        let (mut lo, mut hi) = bounds;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for eigenvalue `mu` by inverse iteration, orthogonalized
    /// against `previous`.
    fn eigenvector(&self, mu: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.diag.len();
        let d: Vec<f64> = self.diag.iter().map(|a| a - mu).collect();
        let lu = TridiagonalLu::factor(&self.off, &d, &self.off);
        let mut y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_75).sin()).collect();
        for _ in 0..4 {
            lu.solve(&mut y);
            for _ in 0..2 {
                for p in previous {
                    let c: f64 = y.iter().zip(p).map(|(a, b)| a * b).sum();
                    y.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
                }
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            y.iter_mut().for_each(|v| *v /= norm);
        }
        y
    }
}

/// LU factorization with partial pivoting of a general tridiagonal matrix.
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        let mut dl = sub[..n.saturating_sub(1)].to_vec();
        let mut d = diag.to_vec();
        let mut du = sup[..n.saturating_sub(1)].to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let tiny = f64::EPSILON * diag.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Second-order finite-difference eigenpairs on `grid` equal intervals.
pub fn eigen_solve_on_grid(problem: &SpectralProblem, grid: usize, modes: usize) -> Result<SpectralData> {
    if modes == 0 {
        return Err(Error::InvalidParameter("at least one mode is needed".into()));
    }
    if grid < modes + 2 {
        return Err(Error::InvalidParameter(format!("grid {grid} too coarse for {modes} modes")));
    }
    let h = 1.0 / grid as f64;
    let nodes: Vec<f64> = (1..grid).map(|i| i as f64 * h).collect();
    let weights: Vec<f64> = nodes.iter().map(|&x| problem.weight(x)).collect();
    let s: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let diag: Vec<f64> =
        nodes.iter().zip(&s).map(|(&x, si)| (2.0 / (h * h) + problem.potential(x)) * si * si).collect();
    let off: Vec<f64> = s.windows(2).map(|w| -w[0] * w[1] / (h * h)).collect();
    let t = SymTridiagonal { diag, off };
    let bounds = t.gershgorin();
    let mut eigenvalues = Vec::with_capacity(modes);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(modes);
    for k in 0..modes {
        let lambda = t.eigenvalue(k, bounds);
        let y = t.eigenvector(lambda, &vectors);
        eigenvalues.push(lambda);
        vectors.push(y);
    }
    let scale = 1.0 / h.sqrt();
    let eigenfunctions = vectors
        .iter()
        .map(|y| {
            let mut phi: Vec<f64> = y.iter().zip(&s).map(|(y, si)| y * si * scale).collect();
            let lead = phi.iter().find(|v| v.abs() > 1e-300).copied().unwrap_or(1.0);
            if lead < 0.0 {
                phi.iter_mut().for_each(|v| *v = -*v);
            }
            phi
        })
        .collect();
    Ok(SpectralData { grid, eigenvalues, nodes, eigenfunctions, weights })
}

/// Eigenpairs with the grid doubled until the Richardson-extrapolated
/// principal eigenvalue changes by less than [`REFINE_TOL`]. Eigenvalues are
/// the extrapolated ones; eigenfunctions come from the finest grid.
pub fn eigen_solve(problem: &SpectralProblem, modes: usize) -> Result<SpectralData> {
    let mut grid = FIRST_GRID.max(4 * modes);
    let mut coarse = eigen_solve_on_grid(problem, grid, modes)?;
    let mut previous: Option<f64> = None;
    while grid < MAX_GRID {
        grid *= 2;
        let fine = eigen_solve_on_grid(problem, grid, modes)?;
        let extrapolated: Vec<f64> =
            fine.eigenvalues.iter().zip(&coarse.eigenvalues).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
        let lead = extrapolated[0];
        if let Some(p) = previous {
            if (lead - p).abs() < REFINE_TOL {
                return Ok(SpectralData { eigenvalues: extrapolated, ..fine });
            }
        }
        previous = Some(lead);
        coarse = fine;
    }
    Err(Error::NoConvergence(grid as u64))
}

/// `int_A^(A+B) exp(s^2) ds` with `A = -beta / sqrt(2 xi)`, `B = sqrt(xi / 2)`.
/// A positive value rules out a zero eigenvalue.
pub fn zero_eigenvalue_witness(beta: f64, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter(format!("xi = {xi} must be positive")));
    }
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let a = -half * beta / xi.sqrt();
    let b = half * xi.sqrt();
    let top = (a * a).max((a + b) * (a + b));
    let scaled = simpson_converged(|s| (s * s - top).exp(), a, a + b, MIN_PANELS, DOUBLING_TOL);
    Ok(scaled * top.exp())
}

/// Least-squares slope of `ln y` against `t`.
pub fn fit_log_slope(samples: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = samples.iter().filter(|(_, y)| *y > 0.0).map(|&(t, y)| (t, y.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter("need two positive samples".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("samples share one abscissa".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn neutral_spectrum_is_known() {
        // lambda_j = (j+1)(j+2); the principal eigenfunction x(1-x) is resolved exactly.
        let d = eigen_solve_on_grid(&SpectralProblem::new(0.0, 0.0), 400, 6).unwrap();
        assert!((d.eigenvalues[0] - 2.0).abs() < 1e-9);
        for (j, l) in d.eigenvalues.iter().enumerate() {
            let want = ((j + 1) * (j + 2)) as f64;
            assert!((l - want).abs() < 1e-3 * want, "j={j}: {l}");
        }
        let refined = eigen_solve(&SpectralProblem::new(0.0, 0.0), 8).unwrap();
        for (j, l) in refined.eigenvalues.iter().enumerate() {
            let want = ((j + 1) * (j + 2)) as f64;
            assert!((l - want).abs() < 1e-6 * want, "j={j}: {l}");
        }
    }

    #[test]
    fn eigenfunctions_are_orthonormal() {
        let d = eigen_solve_on_grid(&SpectralProblem::new(1.0, 2.0), 800, 12).unwrap();
        assert!(d.orthonormality_defect() < 1e-6);
        // Principal eigenfunction keeps one sign.
        assert!(d.eigenfunctions[0].iter().all(|v| *v > 0.0));
    }

    #[test]
    fn eigen_solve_rejects_bad_input() {
        assert!(eigen_solve_on_grid(&SpectralProblem::new(0.0, 0.0), 5, 8).is_err());
        assert!(eigen_solve(&SpectralProblem::new(0.0, 0.0), 0).is_err());
    }

    #[test]
    fn reference_principal_values() {
        for (a, b, want) in [(1.0, 2.0, 2.014_136_3), (-20.0, 20.0, 0.135_406_31), (-20.0, -20.0, 17.506_612)] {
            let d = eigen_solve(&SpectralProblem::new(a, b), 4).unwrap();
            assert!((d.eigenvalues[0] - want).abs() < 2e-6, "({a},{b}): {}", d.eigenvalues[0]);
        }
    }

    #[test]
    fn w_transform_round_trip() {
        let pr = SpectralProblem::new(-3.0, 1.5);
        let nodes: Vec<f64> = (1..50).map(|i| i as f64 / 50.0).collect();
        let p: Vec<f64> = nodes.iter().map(|x| 1.0 + x * x).collect();
        let back = pr.inverse_w_transform(&pr.w_transform(&p, &nodes), &nodes);
        for (a, b) in p.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
        let neutral = SpectralProblem::new(0.0, 0.0).w_transform(&[2.0, 2.0], &[0.5, 0.25]);
        assert_eq!(neutral, vec![0.5, 2.0 * 0.25 * 0.75]);
        assert_eq!(pr.w_transform(&[3.0, 3.0], &[0.0, 1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn witness_examples() {
        let r = zero_eigenvalue_witness(1.0, 4.0).unwrap();
        // A = -1/(2 sqrt 2), B = sqrt 2: direct quadrature with many panels.
        let a = -1.0 / (2.0 * 2f64.sqrt());
        let b = 2f64.sqrt();
        let direct = crate::quadrature::simpson(|s| (s * s).exp(), a, a + b, 1 << 16);
        assert!((r - direct).abs() < 1e-9 && r > 0.0);
        assert!(zero_eigenvalue_witness(0.0, 1e-12).unwrap() < 1e-5);
        assert!(zero_eigenvalue_witness(1.0, 0.0).is_err());
    }

    #[test]
    fn log_slope_of_exponential() {
        let s: Vec<(f64, f64)> = (0..20).map(|k| (k as f64 * 0.1, 3.0 * (-2.5 * k as f64 * 0.1).exp())).collect();
        assert!((fit_log_slope(&s).unwrap() + 2.5).abs() < 1e-12);
        assert!(fit_log_slope(&[(1.0, 1.0)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn principal_eigenvalue_is_positive_and_continuous(a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let pr = SpectralProblem::new(a, b);
            let l0 = eigen_solve_on_grid(&pr, 400, 1).unwrap().eigenvalues[0];
            prop_assert!(l0 > 0.0);
            let l1 = eigen_solve_on_grid(&SpectralProblem::new(a + 1e-3, b), 400, 1).unwrap().eigenvalues[0];
            prop_assert!((l1 - l0).abs() < 0.1);
        }

        #[test]
        fn witness_is_positive(beta in -20.0f64..20.0, xi in 1e-3f64..40.0) {
            prop_assert!(zero_eigenvalue_witness(beta, xi).unwrap() > 0.0);
        }
    }
}
