//! Transport limit `p_t = -(v p)_x` of the Moran process with unscaled payoffs
//! and `dt = 1/N`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::PayoffMatrix;
use crate::pde::InitialCondition;

/// `L(x) = x(A - C) + (1 - x)(B - D)`, the sign of the drift.
pub fn selection_gradient(p: &PayoffMatrix, x: f64) -> f64 {
    x * (p.a() - p.c()) + (1.0 - x) * (p.b() - p.d())
}

/// `v(x) = x(1-x) L(x) / (x^2 (A-B-C+D) + x (B+C-2D) + D)`.
pub fn drift_velocity(p: &PayoffMatrix, x: f64) -> Result<f64> {
    let den = x * x * (p.a() - p.b() - p.c() + p.d()) + x * (p.b() + p.c() - 2.0 * p.d()) + p.d();
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::InvalidParameter(format!("drift denominator {den} at x = {x}")));
    }
    Ok(x * (1.0 - x) * selection_gradient(p, x) / den)
}

/// Root `-(B - D)/(A - B - C + D)` of `L`, if `L` is not constant.
pub fn interior_point(p: &PayoffMatrix) -> Option<f64> {
    let den = p.a() - p.b() - p.c() + p.d();
    if den == 0.0 {
        None
    } else {
        Some(-(p.b() - p.d()) / den)
    }
}

/// `psi(x) = (1-x)^(A/(A-C)) x^(-D/(B-D)) |L(x)|^((DA-BC)/((A-C)(B-D)))`, which
/// decays as `exp(-t)` along characteristics.
pub fn psi_drift(p: &PayoffMatrix, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParameter(format!("psi_drift needs x in (0, 1), got {x}")));
    }
    let (ac, bd) = (p.a() - p.c(), p.b() - p.d());
    if ac == 0.0 || bd == 0.0 {
        return Err(Error::Degenerate("A = C or B = D"));
    }
    let e = (p.d() * p.a() - p.b() * p.c()) / (ac * bd);
    let l = selection_gradient(p, x).abs();
    Ok(((p.a() / ac) * (1.0 - x).ln() - (p.d() / bd) * x.ln() + e * l.ln()).exp())
}

/// Frequency-independent game in which type A has relative fitness `r`: `A = B = r`, `C = D = 1`.
pub fn frequency_independent(r: f64) -> Result<PayoffMatrix> {
    PayoffMatrix::new(r, r, 1.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GameClass {
    /// Drift points to `x = 1` everywhere.
    TowardsOne,
    /// Drift points to `x = 0` everywhere.
    TowardsZero,
    /// Drift points to the interior root.
    HawkDove,
    /// Drift points away from the interior root.
    Coordination,
}

impl GameClass {
    pub fn of(p: &PayoffMatrix) -> Result<Self> {
        let at_zero = p.b() - p.d();
        let at_one = p.a() - p.c();
        Ok(match (at_zero.partial_cmp(&0.0), at_one.partial_cmp(&0.0)) {
            (Some(o0), Some(o1)) => {
                use std::cmp::Ordering::*;
                match (o0, o1) {
                    (Equal, Equal) => return Err(Error::Degenerate("neutral game: no transport")),
                    (Greater | Equal, Greater | Equal) => GameClass::TowardsOne,
                    (Less | Equal, Less | Equal) => GameClass::TowardsZero,
                    (Greater, Less) => GameClass::HawkDove,
                    (Less, Greater) => GameClass::Coordination,
                }
            }
            _ => return Err(Error::InvalidParameter("payoffs are not comparable".into())),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            GameClass::TowardsOne => "towards-one",
            GameClass::TowardsZero => "towards-zero",
            GameClass::HawkDove => "hawk-dove",
            GameClass::Coordination => "coordination",
        }
    }
}

/// Masses of the limit measure at `0`, `x*` and `1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftOutcome {
    pub class: GameClass,
    pub x_star: Option<f64>,
    pub pi_zero: f64,
    pub pi_star: f64,
    pub pi_one: f64,
}

impl DriftOutcome {
    pub fn total(&self) -> f64 {
        self.pi_zero + self.pi_star + self.pi_one
    }
}

/// Limit of the transported initial data, by sign analysis of the drift.
pub fn asymptotic_masses(p: &PayoffMatrix, init: &InitialCondition) -> Result<DriftOutcome> {
    init.validate()?;
    let class = GameClass::of(p)?;
    let x_star = interior_point(p).filter(|x| *x > 0.0 && *x < 1.0);
    // Point masses sitting on an endpoint never move.
    let (stuck_zero, stuck_one) = match init {
        InitialCondition::Delta(x0) if *x0 == 0.0 => (1.0, 0.0),
        InitialCondition::Delta(x0) if *x0 == 1.0 => (0.0, 1.0),
        _ => (0.0, 0.0),
    };
    let free = 1.0 - stuck_zero - stuck_one;
    let (mut z, mut s, mut o) = (stuck_zero, 0.0, stuck_one);
    match class {
        GameClass::TowardsOne => o += free,
        GameClass::TowardsZero => z += free,
        GameClass::HawkDove => s += free,
        GameClass::Coordination => {
            let xs = x_star.expect("coordination games have an interior root");
            if free > 0.0 {
                if let InitialCondition::Delta(x0) = init {
                    if *x0 == xs {
                        return Err(Error::Indeterminate(xs));
                    }
                }
                let below = init.cumulative(xs);
                z += below;
                o += 1.0 - below;
            }
        }
    }
    Ok(DriftOutcome { class, x_star, pi_zero: z, pi_star: s, pi_one: o })
}

/// Weighted particles moved along `dX/dt = v(X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Characteristics {
    payoffs: PayoffMatrix,
    positions: Vec<f64>,
    weights: Vec<f64>,
    t: f64,
}

impl Characteristics {
    /// One particle per cell of an equal partition of `[0, 1]`, carrying the
    /// exact cell mass; a point mass becomes a single particle.
    pub fn new(payoffs: PayoffMatrix, init: &InitialCondition, cells: usize) -> Result<Self> {
        init.validate()?;
        if cells == 0 {
            return Err(Error::InvalidParameter("at least one cell is needed".into()));
        }
        let (positions, weights) = match init {
            InitialCondition::Delta(x0) => (vec![*x0], vec![1.0]),
            _ => {
                let h = 1.0 / cells as f64;
                (0..cells)
                    .map(|k| {
                        let (lo, hi) = (k as f64 * h, (k + 1) as f64 * h);
                        ((k as f64 + 0.5) * h, init.cumulative(hi) - init.cumulative(lo))
                    })
                    .filter(|(_, w)| *w > 0.0)
                    .unzip()
            }
        };
        Ok(Self { payoffs, positions, weights, t: 0.0 })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Moves every particle by `steps` classic fourth-order steps of size `dt`.
    pub fn advance(&mut self, dt: f64, steps: usize) {
        let p = self.payoffs;
        let v = move |x: f64| drift_velocity(&p, x.clamp(0.0, 1.0)).unwrap_or(0.0);
        self.positions.par_iter_mut().for_each(|x| {
            for _ in 0..steps {
                let k1 = v(*x);
                let k2 = v(*x + 0.5 * dt * k1);
                let k3 = v(*x + 0.5 * dt * k2);
                let k4 = v(*x + dt * k3);
                *x = (*x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0);
            }
        });
        self.t += dt * steps as f64;
    }

    /// `sum w psi(X)` over particles strictly inside `(0, 1)`.
    pub fn psi_functional(&self) -> Result<f64> {
        let mut acc = 0.0;
        for (x, w) in self.positions.iter().zip(&self.weights) {
            if *x > 0.0 && *x < 1.0 {
                acc += w * psi_drift(&self.payoffs, *x)?;
            }
        }
        Ok(acc)
    }

    /// Mass attributed to the nearest of `0`, `x*` (when interior) and `1`.
    pub fn nearest_masses(&self) -> (f64, f64, f64) {
        let xs = interior_point(&self.payoffs).filter(|x| *x > 0.0 && *x < 1.0);
        let (mut z, mut s, mut o) = (0.0, 0.0, 0.0);
        for (x, w) in self.positions.iter().zip(&self.weights) {
            let d0 = *x;
            let d1 = 1.0 - x;
            let ds = xs.map(|c| (x - c).abs()).unwrap_or(f64::INFINITY);
            if ds < d0 && ds < d1 {
                s += w;
            } else if d0 <= d1 {
                z += w;
            } else {
                o += w;
            }
        }
        (z, s, o)
    }
}
