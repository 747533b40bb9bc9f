//! Replicator dynamics `X' = X(1-X)(X alpha + (1-X) beta)`.

use crate::error::{Error, Result};
use crate::game::{effective_increments, q_star_ab, MixedPair, Regime, SelectionIncrements};

/// Endpoint change under step halving accepted by [`integrate`].
pub const HALVING_TOL: f64 = 1e-10;

/// Speed and distance thresholds of [`long_time_limit`].
pub const REST_SPEED: f64 = 1e-12;
pub const REST_DISTANCE: f64 = 1e-8;

const MAX_STEPS: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeState {
    pub t: f64,
    pub x: f64,
}

pub fn rhs(s: &SelectionIncrements, x: f64) -> f64 {
    rhs_ab(s.alpha(), s.beta(), x)
}

pub fn rhs_ab(alpha: f64, beta: f64, x: f64) -> f64 {
    x * (1.0 - x) * (x * alpha + (1.0 - x) * beta)
}

/// Fraction of `q1`-players in a `q1` vs `q2` contest.
pub fn rhs_mixed(s: &SelectionIncrements, q: &MixedPair, x: f64) -> f64 {
    let e = effective_increments(s, q);
    rhs_ab(e.alpha, e.beta, x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub points: Vec<OdeState>,
    pub step: f64,
    /// Largest distance by which a step left `[0, 1]` before clamping.
    pub max_clamp: f64,
}

impl Trajectory {
    pub fn last(&self) -> OdeState {
        *self.points.last().expect("trajectory has a start point")
    }
}

fn rk4(alpha: f64, beta: f64, x0: f64, h: f64, steps: u64, keep: bool) -> Trajectory {
    let f = |x: f64| rhs_ab(alpha, beta, x);
    let mut x = x0;
    let mut points = vec![OdeState { t: 0.0, x }];
    let mut max_clamp: f64 = 0.0;
    for k in 1..=steps {
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        let mut next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(0.0..=1.0).contains(&next) {
            let clamped = next.clamp(0.0, 1.0);
            max_clamp = max_clamp.max((next - clamped).abs());
            next = clamped;
        }
        x = next;
        if keep || k == steps {
            points.push(OdeState { t: k as f64 * h, x });
        }
    }
    Trajectory { points, step: h, max_clamp }
}

/// Classic fourth-order integration; the step is halved until the endpoint
/// moves by less than [`HALVING_TOL`].
pub fn integrate(s: &SelectionIncrements, x0: f64, t_end: f64) -> Result<Trajectory> {
    integrate_ab(s.alpha(), s.beta(), x0, t_end)
}

pub fn integrate_ab(alpha: f64, beta: f64, x0: f64, t_end: f64) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::ProbabilityOutOfRange { name: "X0", value: x0 });
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("t_end = {t_end}")));
    }
    if t_end == 0.0 {
        return Ok(Trajectory { points: vec![OdeState { t: 0.0, x: x0 }], step: 0.0, max_clamp: 0.0 });
    }
    let rate = alpha.abs().max(beta.abs()).max(1.0);
    let mut steps = ((t_end * rate / 0.1).ceil() as u64).max(16);
    let mut coarse = rk4(alpha, beta, x0, t_end / steps as f64, steps, false).last().x;
    while steps < MAX_STEPS {
        steps *= 2;
        let fine = rk4(alpha, beta, x0, t_end / steps as f64, steps, false).last().x;
        if (fine - coarse).abs() < HALVING_TOL {
            return Ok(rk4(alpha, beta, x0, t_end / steps as f64, steps, true));
        }
        coarse = fine;
    }
    Err(Error::NoConvergence(steps))
}

/// Equilibria of the flow in `[0, 1]`.
pub fn equilibria(alpha: f64, beta: f64) -> Vec<f64> {
    let mut e = vec![0.0, 1.0];
    if let Ok(q) = q_star_ab(alpha, beta) {
        if q.interior {
            e.insert(1, q.value);
        }
    }
    e
}

/// Integrates in windows until the state rests at an equilibrium.
pub fn long_time_limit(s: &SelectionIncrements, x0: f64) -> Result<f64> {
    let (alpha, beta) = (s.alpha(), s.beta());
    let eq = equilibria(alpha, beta);
    let mut x = x0;
    let mut t = 0.0;
    const WINDOW: f64 = 10.0;
    const T_MAX: f64 = 1e5;
    loop {
        let near = eq.iter().map(|e| (x - e).abs()).fold(f64::INFINITY, f64::min);
        if rhs_ab(alpha, beta, x).abs() < REST_SPEED && near < REST_DISTANCE {
            return Ok(x);
        }
        if t >= T_MAX {
            return Err(Error::NoConvergence(t as u64));
        }
        x = integrate_ab(alpha, beta, x, WINDOW)?.last().x;
        t += WINDOW;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumTable {
    pub stable: Vec<f64>,
    pub unstable: Vec<f64>,
}

pub fn classify_equilibria(s: &SelectionIncrements) -> Result<EquilibriumTable> {
    let (alpha, beta) = (s.alpha(), s.beta());
    let regime = Regime::of(alpha, beta)?;
    let x_star = q_star_ab(alpha, beta)?.value;
    let (stable, unstable) = match regime {
        Regime::PositiveAlphaLeads | Regime::PositiveBetaLeads => (vec![1.0], vec![0.0]),
        Regime::NegativeAlphaLeads | Regime::NegativeBetaLeads => (vec![0.0], vec![1.0]),
        Regime::Coordination => (vec![0.0, 1.0], vec![x_star]),
        Regime::Coexistence => (vec![x_star], vec![0.0, 1.0]),
    };
    Ok(EquilibriumTable { stable, unstable })
}

/// Long-time limit predicted by the stability table.
pub fn table_limit(s: &SelectionIncrements, x0: f64) -> Result<f64> {
    let table = classify_equilibria(s)?;
    if x0 == 0.0 || x0 == 1.0 || table.unstable.contains(&x0) {
        return Ok(x0);
    }
    Ok(match table.stable.as_slice() {
        [only] => *only,
        _ => {
            let x_star = table.unstable[0];
            if x0 < x_star {
                0.0
            } else {
                1.0
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(alpha: f64, beta: f64) -> SelectionIncrements {
        SelectionIncrements::from_alpha_beta(alpha, beta)
    }

    #[test]
    fn rhs_examples() {
        let g = s(-1.0, 2.0);
        assert_eq!(rhs(&g, 0.0), 0.0);
        assert_eq!(rhs(&g, 1.0), 0.0);
        assert!(rhs(&g, 2.0 / 3.0).abs() < 1e-16);
        assert!((rhs(&g, 0.5) - 0.125).abs() < 1e-16);
        assert_eq!(rhs_mixed(&g, &MixedPair::pure(), 0.5), rhs(&g, 0.5));
    }

    #[test]
    fn logistic_case_matches_closed_form() {
        // alpha = beta = 1: X' = X(1-X).
        let tr = integrate(&s(1.0, 1.0), 0.2, 3.0).unwrap();
        let e = (3.0f64).exp();
        let exact = 0.2 * e / (1.0 - 0.2 + 0.2 * e);
        assert!((tr.last().x - exact).abs() < 1e-9);
        assert!(tr.max_clamp <= 1e-12);
        assert!((tr.last().t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn endpoints_are_fixed() {
        for x0 in [0.0, 1.0] {
            let tr = integrate(&s(2.0, -1.0), x0, 5.0).unwrap();
            assert!(tr.points.iter().all(|p| p.x == x0));
        }
        assert!(integrate(&s(1.0, 1.0), 1.5, 1.0).is_err());
    }

    #[test]
    fn coexistence_goes_to_interior() {
        assert!((long_time_limit(&s(-1.0, 2.0), 0.1).unwrap() - 2.0 / 3.0).abs() < 1e-6);
        assert!((long_time_limit(&s(-1.0, 2.0), 0.9).unwrap() - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn coordination_splits_at_x_star() {
        let g = s(2.0, -1.0);
        assert!(long_time_limit(&g, 0.3).unwrap() < 1e-6);
        assert!(long_time_limit(&g, 0.4).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn table_rows() {
        let t = classify_equilibria(&s(2.0, 1.0)).unwrap();
        assert_eq!((t.stable, t.unstable), (vec![1.0], vec![0.0]));
        let t = classify_equilibria(&s(1.0, 2.0)).unwrap();
        assert_eq!((t.stable, t.unstable), (vec![1.0], vec![0.0]));
        assert!(classify_equilibria(&s(1.0, 1.0)).is_err());
    }

    #[test]
    fn table_matches_sign_sampling() {
        // An equilibrium is stable when the flow points towards it from both sides.
        for r in Regime::ALL {
            let (a, b) = r.sample();
            let table = classify_equilibria(&s(a, b)).unwrap();
            for e in equilibria(a, b) {
                let left = if e > 0.0 { rhs_ab(a, b, e - 1e-4) > 0.0 } else { true };
                let right = if e < 1.0 { rhs_ab(a, b, e + 1e-4) < 0.0 } else { true };
                let stable = left && right;
                assert_eq!(table.stable.contains(&e), stable, "{r:?} at {e}");
                assert_eq!(table.unstable.contains(&e), !stable, "{r:?} at {e}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn equilibrium_set_is_roots(alpha in -5.0f64..5.0, beta in -5.0f64..5.0) {
            prop_assume!((alpha - beta).abs() > 1e-3);
            let eq = equilibria(alpha, beta);
            for e in &eq {
                prop_assert!(rhs_ab(alpha, beta, *e).abs() < 1e-14);
            }
            // Between consecutive equilibria the flow keeps one sign.
            for w in eq.windows(2) {
                let signs: Vec<bool> = (1..50)
                    .map(|k| w[0] + (w[1] - w[0]) * k as f64 / 50.0)
                    .map(|x| rhs_ab(alpha, beta, x) > 0.0)
                    .collect();
                prop_assert!(signs.iter().all(|v| *v == signs[0]));
            }
        }

        #[test]
        fn trajectories_stay_in_unit_interval(alpha in -5.0f64..5.0, beta in -5.0f64..5.0, x0 in 0.0f64..=1.0) {
            let tr = integrate_ab(alpha, beta, x0, 4.0).unwrap();
            prop_assert!(tr.max_clamp <= 1e-12);
            prop_assert!(tr.points.iter().all(|p| (0.0..=1.0).contains(&p.x)));
        }
    }
}
