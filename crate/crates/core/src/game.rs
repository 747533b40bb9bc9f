//! Two-strategy games: payoffs, mixed contests and selection increments.

use crate::error::{Error, Result};

/// Payoffs of the row player: `a` = I vs I, `b` = I vs II, `c` = II vs I, `d` = II vs II.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PayoffMatrix {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl PayoffMatrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        for (name, value) in [("A", a), ("B", b), ("C", c), ("D", d)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositivePayoff { name, value });
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Weak-selection payoffs `1 + a/n`, ... for a population (or grid) of size `n`.
    pub fn weak_selection(s: &SelectionIncrements, n: usize) -> Result<Self> {
        let k = n as f64;
        Self::new(1.0 + s.a / k, 1.0 + s.b / k, 1.0 + s.c / k, 1.0 + s.d / k)
    }

    /// Frequency-independent game where type II has fitness `r` relative to type I
    /// (`A = B = 1`, `C = D = r`).
    pub fn frequency_independent(r: f64) -> Result<Self> {
        Self::new(1.0, 1.0, r, r)
    }

    pub fn neutral() -> Self {
        Self { a: 1.0, b: 1.0, c: 1.0, d: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }

    /// The same game with the strategy labels exchanged: `(D, C, B, A)`.
    pub fn relabeled(&self) -> Self {
        Self { a: self.d, b: self.c, c: self.b, d: self.a }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

/// Probabilities of playing I for the two competing types.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedPair {
    q1: f64,
    q2: f64,
}

impl MixedPair {
    pub fn new(q1: f64, q2: f64) -> Result<Self> {
        for (name, value) in [("q1", q1), ("q2", q2)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbabilityOutOfRange { name, value });
            }
        }
        Ok(Self { q1, q2 })
    }

    /// Pure strategies: type A always plays I, type B always plays II.
    pub fn pure() -> Self {
        Self { q1: 1.0, q2: 0.0 }
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }
    pub fn q2(&self) -> f64 {
        self.q2
    }

    pub fn swapped(&self) -> Self {
        Self { q1: self.q2, q2: self.q1 }
    }
}

/// Payoff matrix of the contest between mixed strategies `q1` (type A) and `q2` (type B).
pub fn mixed_payoffs(p: &PayoffMatrix, q: &MixedPair) -> PayoffMatrix {
    let row = |x: f64, y: f64| x * y * p.a + x * (1.0 - y) * p.b + (1.0 - x) * y * p.c + (1.0 - x) * (1.0 - y) * p.d;
    let (q1, q2) = (q.q1, q.q2);
    PayoffMatrix { a: row(q1, q1), b: row(q1, q2), c: row(q2, q1), d: row(q2, q2) }
}

/// Weak-selection increments: payoffs are `1 + a/N`, `1 + b/N`, ...
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionIncrements {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SelectionIncrements {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Canonical split `(alpha, beta, 0, 0)`.
    pub fn from_alpha_beta(alpha: f64, beta: f64) -> Self {
        Self { a: alpha, b: beta, c: 0.0, d: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.a - self.c
    }
    pub fn beta(&self) -> f64 {
        self.b - self.d
    }
    pub fn eta(&self) -> f64 {
        self.alpha() - self.beta()
    }

    /// Increments of the relabeled game `(d, c, b, a)`; alpha and beta become `-beta`, `-alpha`.
    pub fn relabeled(&self) -> Self {
        Self { a: self.d, b: self.c, c: self.b, d: self.a }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { a: k * self.a, b: k * self.b, c: k * self.c, d: k * self.d }
    }
}

/// Increments of a mixed-strategy contest, with the derived alpha and beta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveIncrements {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl EffectiveIncrements {
    pub fn increments(&self) -> SelectionIncrements {
        SelectionIncrements::new(self.a, self.b, self.c, self.d)
    }

    pub fn eta(&self) -> f64 {
        self.alpha - self.beta
    }
}

pub fn effective_increments(s: &SelectionIncrements, q: &MixedPair) -> EffectiveIncrements {
    let (q1, q2) = (q.q1, q.q2);
    let row = |x: f64, y: f64| x * y * s.a + x * (1.0 - y) * s.b + (1.0 - x) * y * s.c + (1.0 - x) * (1.0 - y) * s.d;
    let (alpha, beta) = (s.alpha(), s.beta());
    EffectiveIncrements {
        a: row(q1, q1),
        b: row(q1, q2),
        c: row(q2, q1),
        d: row(q2, q2),
        alpha: (q1 - q2) * (q1 * alpha + (1.0 - q1) * beta),
        beta: (q1 - q2) * (q2 * alpha + (1.0 - q2) * beta),
    }
}

/// The candidate interior strategy `beta / (beta - alpha)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorStrategy {
    pub value: f64,
    pub interior: bool,
}

pub fn q_star(s: &SelectionIncrements) -> Result<InteriorStrategy> {
    q_star_ab(s.alpha(), s.beta())
}

pub fn q_star_ab(alpha: f64, beta: f64) -> Result<InteriorStrategy> {
    if alpha == beta {
        return Err(Error::NoInteriorStrategy);
    }
    let value = beta / (beta - alpha);
    Ok(InteriorStrategy { value, interior: value > 0.0 && value < 1.0 })
}

/// The six non-degenerate sign patterns of `(alpha, beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// alpha > beta > 0
    PositiveAlphaLeads,
    /// alpha > 0 > beta
    Coordination,
    /// 0 > alpha > beta
    NegativeAlphaLeads,
    /// 0 > beta > alpha
    NegativeBetaLeads,
    /// beta > 0 > alpha
    Coexistence,
    /// beta > alpha > 0
    PositiveBetaLeads,
}

impl Regime {
    pub const ALL: [Regime; 6] = [
        Regime::PositiveAlphaLeads,
        Regime::Coordination,
        Regime::NegativeAlphaLeads,
        Regime::NegativeBetaLeads,
        Regime::Coexistence,
        Regime::PositiveBetaLeads,
    ];

    pub fn of(alpha: f64, beta: f64) -> Result<Self> {
        if alpha == beta {
            return Err(Error::Degenerate("alpha = beta"));
        }
        if alpha == 0.0 || beta == 0.0 {
            return Err(Error::Degenerate("alpha or beta is zero"));
        }
        Ok(match (alpha > 0.0, beta > 0.0, alpha > beta) {
            (true, true, true) => Regime::PositiveAlphaLeads,
            (true, false, _) => Regime::Coordination,
            (false, false, true) => Regime::NegativeAlphaLeads,
            (false, false, false) => Regime::NegativeBetaLeads,
            (false, true, _) => Regime::Coexistence,
            (true, true, false) => Regime::PositiveBetaLeads,
        })
    }

    /// A representative `(alpha, beta)` pair.
    pub fn sample(&self) -> (f64, f64) {
        match self {
            Regime::PositiveAlphaLeads => (2.0, 1.0),
            Regime::Coordination => (2.0, -1.0),
            Regime::NegativeAlphaLeads => (-1.0, -2.0),
            Regime::NegativeBetaLeads => (-2.0, -1.0),
            Regime::Coexistence => (-1.0, 2.0),
            Regime::PositiveBetaLeads => (1.0, 2.0),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::PositiveAlphaLeads => "alpha>beta>0",
            Regime::Coordination => "alpha>0>beta",
            Regime::NegativeAlphaLeads => "0>alpha>beta",
            Regime::NegativeBetaLeads => "0>beta>alpha",
            Regime::Coexistence => "beta>0>alpha",
            Regime::PositiveBetaLeads => "beta>alpha>0",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p2131() -> PayoffMatrix {
        PayoffMatrix::new(2.0, 1.0, 3.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_non_positive_payoffs() {
        assert!(PayoffMatrix::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(PayoffMatrix::new(1.0, 1.0, -2.0, 1.0).is_err());
        assert!(PayoffMatrix::new(f64::NAN, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(MixedPair::new(1.5, 0.0).is_err());
        assert!(MixedPair::new(0.0, -0.1).is_err());
    }

    #[test]
    fn pure_strategies_are_identity() {
        let p = p2131();
        assert_eq!(mixed_payoffs(&p, &MixedPair::pure()), p);
    }

    #[test]
    fn equal_strategies_flatten_payoffs() {
        let m = mixed_payoffs(&p2131(), &MixedPair::new(0.3, 0.3).unwrap());
        assert!((m.a() - m.b()).abs() < 1e-15);
        assert!((m.a() - m.c()).abs() < 1e-15);
        assert!((m.a() - m.d()).abs() < 1e-15);
    }

    #[test]
    fn mixed_payoffs_by_hand() {
        // q1 = 1/2, q2 = 1/4 against (2, 1, 3, 1).
        let m = mixed_payoffs(&p2131(), &MixedPair::new(0.5, 0.25).unwrap());
        let at = 0.25 * 2.0 + 0.25 * 1.0 + 0.25 * 3.0 + 0.25 * 1.0;
        let bt = 0.125 * 2.0 + 0.375 * 1.0 + 0.125 * 3.0 + 0.375 * 1.0;
        let ct = 0.125 * 2.0 + 0.125 * 1.0 + 0.375 * 3.0 + 0.375 * 1.0;
        let dt = 0.0625 * 2.0 + 0.1875 * 1.0 + 0.1875 * 3.0 + 0.5625 * 1.0;
        assert!((m.a() - at).abs() < 1e-15);
        assert!((m.b() - bt).abs() < 1e-15);
        assert!((m.c() - ct).abs() < 1e-15);
        assert!((m.d() - dt).abs() < 1e-15);
    }

    #[test]
    fn effective_increments_example() {
        let s = SelectionIncrements::from_alpha_beta(-1.0, 2.0);
        let e = effective_increments(&s, &MixedPair::new(1.0, 0.5).unwrap());
        assert!((e.alpha + 0.5).abs() < 1e-15);
        assert!((e.beta - 0.25).abs() < 1e-15);
        assert!((e.eta() + 0.75).abs() < 1e-15);
    }

    #[test]
    fn effective_increments_identity_and_tie() {
        let s = SelectionIncrements::new(0.3, -1.2, 2.0, 0.7);
        let e = effective_increments(&s, &MixedPair::pure());
        assert_eq!((e.alpha, e.beta), (s.alpha(), s.beta()));
        let e = effective_increments(&s, &MixedPair::new(0.4, 0.4).unwrap());
        assert_eq!((e.alpha, e.beta), (0.0, 0.0));
    }

    #[test]
    fn q_star_cases() {
        let q = q_star_ab(-1.0, 2.0).unwrap();
        assert!((q.value - 2.0 / 3.0).abs() < 1e-15 && q.interior);
        let q = q_star_ab(2.0, 1.0).unwrap();
        assert_eq!(q.value, -1.0);
        assert!(!q.interior);
        assert_eq!(q_star_ab(1.0, 1.0), Err(Error::NoInteriorStrategy));
    }

    #[test]
    fn regimes_round_trip() {
        for r in Regime::ALL {
            let (a, b) = r.sample();
            assert_eq!(Regime::of(a, b).unwrap(), r);
        }
        assert!(Regime::of(1.0, 0.0).is_err());
        assert!(Regime::of(1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn swapping_types_swaps_roles(
            a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.1f64..5.0, d in 0.1f64..5.0,
            q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0,
        ) {
            let p = PayoffMatrix::new(a, b, c, d).unwrap();
            let q = MixedPair::new(q1, q2).unwrap();
            let m = mixed_payoffs(&p, &q);
            let w = mixed_payoffs(&p, &q.swapped());
            prop_assert!((m.a() - w.d()).abs() < 1e-14);
            prop_assert!((m.b() - w.c()).abs() < 1e-14);
            prop_assert!((m.c() - w.b()).abs() < 1e-14);
            prop_assert!((m.d() - w.a()).abs() < 1e-14);
        }

        #[test]
        fn effective_eta_is_scaled_eta(
            a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0,
            q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0,
        ) {
            let s = SelectionIncrements::new(a, b, c, d);
            let e = effective_increments(&s, &MixedPair::new(q1, q2).unwrap());
            let want = (q1 - q2).powi(2) * s.eta();
            prop_assert!((e.eta() - want).abs() < 1e-13);
            let direct = e.increments();
            prop_assert!((direct.alpha() - e.alpha).abs() < 1e-13);
            prop_assert!((direct.beta() - e.beta).abs() < 1e-13);
        }
    }
}
