//! Dominance between mixed strategies.
//!
//! `E_q2` dominates `E_q1` when a single `q1`-population invaded by `q2` at
//! any initial fraction `x` fixes `q1` with probability `psi(x) < x`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{q_star_ab, Regime, SelectionIncrements};
use crate::quadrature::{cumulative_simpson, simpson};

/// Margins of absolute size below this are treated as neutral.
pub const NEUTRALITY_FLOOR: f64 = 1e-8;

/// Number of sub-intervals of the `x` grid of the numeric test.
pub const TEST_POINTS: usize = 1000;

const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dominance {
    /// `E_q2` dominates `E_q1`.
    SecondDominates,
    /// `E_q1` dominates `E_q2`.
    FirstDominates,
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Table,
    Numeric,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DominanceVerdict {
    pub q1: f64,
    pub q2: f64,
    pub verdict: Dominance,
    pub method: Method,
}

/// `F_(q1,q2)(y) = exp(-y^2 (q1-q2)^2 (alpha-beta)/2 - y (q1-q2)(q2 alpha + (1-q2) beta))`.
pub fn f_aux(s: &SelectionIncrements, q1: f64, q2: f64, y: f64) -> f64 {
    f_aux_scaled(s, q1, q2, y, 1.0)
}

/// `F^kappa`.
pub fn f_aux_scaled(s: &SelectionIncrements, q1: f64, q2: f64, y: f64, kappa: f64) -> f64 {
    let (alpha, beta) = (s.alpha(), s.beta());
    let d = q1 - q2;
    let e = -0.5 * y * y * d * d * (alpha - beta) - y * d * (q2 * alpha + (1.0 - q2) * beta);
    (kappa * e).exp()
}

/// `min_x (x - psi_(q1,q2)(x))` over the interior test grid; positive means `E_q2` dominates `E_q1`.
pub fn delta_margin(s: &SelectionIncrements, q1: f64, q2: f64, kappa: f64) -> f64 {
    if q1 == q2 {
        return 0.0;
    }
    let f = |y: f64| f_aux_scaled(s, q1, q2, y, kappa);
    let xs: Vec<f64> = (0..=TEST_POINTS).map(|k| k as f64 / TEST_POINTS as f64).collect();
    let scale = simpson(f, 0.0, 1.0, 64);
    let cum = cumulative_simpson(f, &xs, QUADRATURE_TOL * scale);
    let total = cum[TEST_POINTS];
    (1..TEST_POINTS).map(|k| xs[k] - cum[k] / total).fold(f64::INFINITY, f64::min)
}

/// Both directional margins: `(q2 over q1, q1 over q2)`.
pub fn delta_margins(s: &SelectionIncrements, q1: f64, q2: f64, kappa: f64) -> (f64, f64) {
    (delta_margin(s, q1, q2, kappa), delta_margin(s, q2, q1, kappa))
}

fn check_pair(q1: f64, q2: f64) -> Result<()> {
    for (name, value) in [("q1", q1), ("q2", q2)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ProbabilityOutOfRange { name, value });
        }
    }
    Ok(())
}

/// Verdict from the two directional margins of [`delta_margins`].
pub fn verdict_from_margins(forward: f64, reverse: f64) -> Result<Dominance> {
    if forward > NEUTRALITY_FLOOR {
        Ok(Dominance::SecondDominates)
    } else if reverse > NEUTRALITY_FLOOR {
        Ok(Dominance::FirstDominates)
    } else if forward < -NEUTRALITY_FLOOR && reverse < -NEUTRALITY_FLOOR {
        Ok(Dominance::Neither)
    } else {
        Err(Error::Inconclusive(if forward.abs() < reverse.abs() { forward } else { reverse }))
    }
}

/// Quadrature test of `psi_(q1,q2)(x) < x` in both directions.
pub fn delta_dominates_numeric(s: &SelectionIncrements, q1: f64, q2: f64) -> Result<DominanceVerdict> {
    delta_dominates_numeric_scaled(s, q1, q2, 1.0)
}

/// As [`delta_dominates_numeric`] with the exponent of `F` multiplied by `kappa`.
pub fn delta_dominates_numeric_scaled(
    s: &SelectionIncrements,
    q1: f64,
    q2: f64,
    kappa: f64,
) -> Result<DominanceVerdict> {
    check_pair(q1, q2)?;
    let verdict = if q1 == q2 {
        Dominance::Neither
    } else {
        let (f, r) = delta_margins(s, q1, q2, kappa);
        verdict_from_margins(f, r)?
    };
    Ok(DominanceVerdict { q1, q2, verdict, method: Method::Numeric })
}

/// Whether `E_q2` dominates `E_q1` according to the closed-form table.
fn table_rule(regime: Regime, q_star: f64, q1: f64, q2: f64) -> bool {
    match regime {
        Regime::PositiveAlphaLeads | Regime::PositiveBetaLeads => q2 > q1,
        Regime::NegativeAlphaLeads | Regime::NegativeBetaLeads => q2 < q1,
        Regime::Coordination => (q2 < q1 && q1 <= q_star) || (q2 > q1 && q1 >= q_star),
        Regime::Coexistence => (q1 < q2 && q2 <= q_star) || (q1 > q2 && q2 >= q_star),
    }
}

/// Closed-form classification for non-degenerate games.
pub fn classify(s: &SelectionIncrements, q1: f64, q2: f64) -> Result<DominanceVerdict> {
    check_pair(q1, q2)?;
    let (alpha, beta) = (s.alpha(), s.beta());
    let regime = Regime::of(alpha, beta)?;
    let q_star = q_star_ab(alpha, beta)?.value;
    let verdict = if q1 == q2 {
        Dominance::Neither
    } else if table_rule(regime, q_star, q1, q2) {
        Dominance::SecondDominates
    } else if table_rule(regime, q_star, q2, q1) {
        Dominance::FirstDominates
    } else {
        Dominance::Neither
    };
    Ok(DominanceVerdict { q1, q2, verdict, method: Method::Table })
}

/// Arrow from a dominated strategy to the one that dominates it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub from: f64,
    pub to: f64,
}

/// Dominance arrows among the given strategies.
pub fn dominance_edges(s: &SelectionIncrements, qs: &[f64], method: Method) -> Result<Vec<Edge>> {
    let pairs: Vec<(f64, f64)> =
        qs.iter().enumerate().flat_map(|(i, &a)| qs[i + 1..].iter().map(move |&b| (a, b))).collect();
    let verdicts: Vec<DominanceVerdict> = pairs
        .par_iter()
        .map(|&(q1, q2)| match method {
            Method::Table => classify(s, q1, q2),
            Method::Numeric => delta_dominates_numeric(s, q1, q2),
        })
        .collect::<Result<_>>()?;
    Ok(verdicts
        .into_iter()
        .filter_map(|v| match v.verdict {
            Dominance::SecondDominates => Some(Edge { from: v.q1, to: v.q2 }),
            Dominance::FirstDominates => Some(Edge { from: v.q2, to: v.q1 }),
            Dominance::Neither => None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(alpha: f64, beta: f64) -> SelectionIncrements {
        SelectionIncrements::from_alpha_beta(alpha, beta)
    }

    #[test]
    fn f_aux_examples() {
        let g = s(-1.0, 2.0);
        assert_eq!(f_aux(&g, 0.4, 0.4, 0.7), 1.0);
        // alpha = -1, beta = 2, q1 = 0, q2 = 2/3, y = 1:
        // exponent = -(4/9)(-3)/2 + (2/3)((2/3)(-1) + (1/3)2) = 2/3.
        let v = f_aux(&g, 0.0, 2.0 / 3.0, 1.0);
        assert!((v - (2.0f64 / 3.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn neutral_pair_is_neither() {
        let g = s(2.0, -1.0);
        assert_eq!(delta_dominates_numeric(&g, 0.3, 0.3).unwrap().verdict, Dominance::Neither);
        assert_eq!(classify(&g, 0.3, 0.3).unwrap().verdict, Dominance::Neither);
    }

    #[test]
    fn table_examples() {
        let v = classify(&s(2.0, 1.0), 0.2, 0.7).unwrap();
        assert_eq!(v.verdict, Dominance::SecondDominates);
        assert_eq!(v.method, Method::Table);
        // beta > 0 > alpha, q* = 2/3: q1 < q2 <= q*.
        assert_eq!(classify(&s(-1.0, 2.0), 0.2, 0.5).unwrap().verdict, Dominance::SecondDominates);
        assert_eq!(classify(&s(-1.0, 2.0), 0.9, 0.7).unwrap().verdict, Dominance::SecondDominates);
        assert_eq!(classify(&s(-1.0, -2.0), 0.2, 0.7).unwrap().verdict, Dominance::FirstDominates);
        assert!(matches!(classify(&s(1.0, 1.0), 0.2, 0.7), Err(Error::Degenerate(_))));
        assert!(matches!(classify(&s(1.0, 0.0), 0.2, 0.7), Err(Error::Degenerate(_))));
        assert!(classify(&s(2.0, 1.0), 1.2, 0.7).is_err());
    }

    #[test]
    fn increasing_f_means_second_dominates() {
        // alpha > beta > 0 with q2 > q1: F is increasing on [0, 1].
        let g = s(2.0, 1.0);
        let ys: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        assert!(ys.windows(2).all(|w| f_aux(&g, 0.2, 0.7, w[1]) > f_aux(&g, 0.2, 0.7, w[0])));
        let v = delta_dominates_numeric(&g, 0.2, 0.7).unwrap();
        assert_eq!((v.verdict, v.method), (Dominance::SecondDominates, Method::Numeric));
    }

    #[test]
    fn ess_dominates_everyone() {
        let g = s(-1.0, 2.0);
        let q_star = 2.0 / 3.0;
        for q in [0.0, 0.1, 0.5, 0.6, 0.7, 0.95, 1.0] {
            let v = delta_dominates_numeric(&g, q, q_star).unwrap();
            assert_eq!(v.verdict, Dominance::SecondDominates, "q = {q}");
        }
    }

    #[test]
    fn near_neutral_is_inconclusive() {
        let g = s(1e-9, 2e-9);
        assert!(matches!(delta_dominates_numeric(&g, 0.2, 0.8), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn edges_point_to_dominant() {
        let edges = dominance_edges(&s(2.0, 1.0), &[0.1, 0.5, 0.9], Method::Table).unwrap();
        assert_eq!(edges.len(), 3);
        assert!(edges.iter().all(|e| e.to > e.from));
        let numeric = dominance_edges(&s(2.0, 1.0), &[0.1, 0.5, 0.9], Method::Numeric).unwrap();
        assert_eq!(edges, numeric);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn f_aux_reflection_identity(
            alpha in -5.0f64..5.0, beta in -5.0f64..5.0,
            q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0, y in 0.0f64..=1.0,
        ) {
            let g = s(alpha, beta);
            let lhs = f_aux(&g, q1, q2, y);
            let rhs = f_aux(&g, q2, q1, 1.0 - y) * f_aux(&g, q1, q2, 1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs));
        }

        #[test]
        fn table_never_claims_both_directions(
            alpha in -5.0f64..5.0, beta in -5.0f64..5.0,
            q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0,
        ) {
            prop_assume!(alpha != beta && alpha != 0.0 && beta != 0.0);
            let g = s(alpha, beta);
            let (a, b) = (classify(&g, q1, q2).unwrap(), classify(&g, q2, q1).unwrap());
            let flipped = match a.verdict {
                Dominance::SecondDominates => Dominance::FirstDominates,
                Dominance::FirstDominates => Dominance::SecondDominates,
                Dominance::Neither => Dominance::Neither,
            };
            prop_assert_eq!(b.verdict, flipped);
        }
    }
}
