//! Pairwise imitation dynamics and their diffusion limit
//!
//! `p_t = Psi(0) (x(1-x) p)_xx - 2 Psi'(0) (x(1-x)(alpha x + beta(1-x)) p)_x`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{effective_increments, MixedPair, PayoffMatrix, SelectionIncrements};
use crate::moran::{MoranChain, Transition, TransitionModel};
use crate::pde::{
    ConservedFunctional, ContinuumState, InitialCondition, InvariantMonitor, PdeParams, PdeSolver, Residuals,
    ABSORBED_TOL,
};

type Shape = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Probability `Psi(d)` that an individual copies a partner whose payoff exceeds its own by `d`.
#[derive(Clone)]
pub struct ImitationKernel {
    value: f64,
    slope: f64,
    shape: Option<Shape>,
}

impl fmt::Debug for ImitationKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImitationKernel")
            .field("value", &self.value)
            .field("slope", &self.slope)
            .field("shape", &self.shape.is_some())
            .finish()
    }
}

fn check_unit(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::KernelOutOfRange(v))
    }
}

fn check_slope(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kernel slope {s} must be nonnegative")))
    }
}

impl ImitationKernel {
    /// Only `Psi(0)` and `Psi'(0)`; enough for every continuum computation.
    pub fn scales(value: f64, slope: f64) -> Result<Self> {
        check_unit(value)?;
        check_slope(slope)?;
        Ok(Self { value, slope, shape: None })
    }

    /// Logistic kernel `sigma(logit(value) + k d)` with `Psi'(0) = slope`.
    pub fn fermi(value: f64, slope: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::InvalidParameter(format!("logistic kernel needs Psi(0) in (0, 1), got {value}")));
        }
        check_slope(slope)?;
        let offset = (value / (1.0 - value)).ln();
        let k = slope / (value * (1.0 - value));
        let shape: Shape = Arc::new(move |d: f64| 1.0 / (1.0 + (-(offset + k * d)).exp()));
        Ok(Self { value, slope, shape: Some(shape) })
    }

    pub fn constant(value: f64) -> Result<Self> {
        check_unit(value)?;
        Ok(Self { value, slope: 0.0, shape: Some(Arc::new(move |_| value)) })
    }

    /// Arbitrary kernel; `Psi(0)` is sampled and `Psi'(0)` estimated by a central difference.
    pub fn from_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Result<Self> {
        let h = 1e-6;
        let value = f(0.0);
        check_unit(value)?;
        let slope = (f(h) - f(-h)) / (2.0 * h);
        check_slope(slope)?;
        Ok(Self { value, slope, shape: Some(Arc::new(f)) })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn has_shape(&self) -> bool {
        self.shape.is_some()
    }

    pub fn eval(&self, d: f64) -> Result<f64> {
        let f = self.shape.as_ref().ok_or(Error::KernelShapeUnknown)?;
        let v = f(d);
        check_unit(v)?;
        Ok(v)
    }
}

/// Imitation-dynamics coefficients at state `n`.
pub fn imitation_coefficients(
    population: usize,
    payoffs: &PayoffMatrix,
    kernel: &ImitationKernel,
    n: usize,
) -> Result<Transition> {
    let chain = MoranChain::death_birth(population, *payoffs)?;
    if n > population {
        return Err(Error::CountOutOfRange { n, lo: 0, hi: population });
    }
    if n == 0 || n == population {
        return Ok(Transition::ABSORBING);
    }
    let (fa, fb) = chain.fitnesses(n)?;
    let (k, m) = (population as f64, n as f64);
    let pairs = (k - m) / k * (m / (k - 1.0));
    let up = pairs * kernel.eval(fa - fb)?;
    let down = pairs * kernel.eval(fb - fa)?;
    Ok(Transition { up, stay: 1.0 - up - down, down })
}

/// Finite-population imitation chain with precomputed coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ImitationChain {
    transitions: Vec<Transition>,
}

impl ImitationChain {
    pub fn new(population: usize, payoffs: &PayoffMatrix, kernel: &ImitationKernel) -> Result<Self> {
        let transitions =
            (0..=population).map(|n| imitation_coefficients(population, payoffs, kernel, n)).collect::<Result<_>>()?;
        Ok(Self { transitions })
    }
}

impl TransitionModel for ImitationChain {
    fn population(&self) -> usize {
        self.transitions.len() - 1
    }

    fn transition(&self, n: usize) -> Transition {
        self.transitions.get(n).copied().unwrap_or(Transition::ABSORBING)
    }
}

/// Diffusion limit of imitation dynamics, solved by the replicator-diffusion
/// scheme in the rescaled time `tau = Psi(0) t` with drift multiplied by
/// `kappa = 2 Psi'(0) / Psi(0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImitationPde {
    pub diffusion: f64,
    pub drift: f64,
    increments: SelectionIncrements,
}

pub fn continuum_coefficients(kernel: &ImitationKernel, s: &SelectionIncrements) -> Result<ImitationPde> {
    if kernel.value == 0.0 {
        return Err(Error::DriftDominated);
    }
    Ok(ImitationPde { diffusion: kernel.value, drift: 2.0 * kernel.slope, increments: *s })
}

impl ImitationPde {
    /// Contest between mixed strategies `q1` and `q2`.
    pub fn for_pair(kernel: &ImitationKernel, s: &SelectionIncrements, q: &MixedPair) -> Result<Self> {
        continuum_coefficients(kernel, &effective_increments(s, q).increments())
    }

    pub fn kappa(&self) -> f64 {
        self.drift / self.diffusion
    }

    pub fn increments(&self) -> &SelectionIncrements {
        &self.increments
    }

    /// Replicator-diffusion parameters of the rescaled problem.
    pub fn params(&self, grid: usize) -> Result<PdeParams> {
        PdeParams::new(self.increments.scaled(self.kappa()), grid)
    }

    /// Rescaled time for physical time `t`.
    pub fn tau(&self, t: f64) -> f64 {
        self.diffusion * t
    }

    pub fn solver(&self, grid: usize) -> Result<PdeSolver> {
        Ok(PdeSolver::new(self.params(grid)?))
    }

    /// State at physical time `t_end`.
    pub fn evolve(&self, init: &InitialCondition, grid: usize, t_end: f64) -> Result<ContinuumState> {
        self.solver(grid)?.evolve(ContinuumState::new(init, grid)?, self.tau(t_end))
    }

    /// Runs to absorption within physical time `t_max`, tracking invariant residuals.
    pub fn absorb(&self, init: &InitialCondition, grid: usize, t_max: f64) -> Result<(ContinuumState, Residuals)> {
        let params = self.params(grid)?;
        let solver = PdeSolver::new(params);
        let mut state = ContinuumState::new(init, grid)?;
        let mut monitor = InvariantMonitor::with_functional(&params, &self.functional());
        solver.run_to_absorption_observed(&mut state, ABSORBED_TOL, self.tau(t_max), |s| monitor.observe(s))?;
        Ok((state, monitor.residuals))
    }

    /// The conserved functional, exponent scaled by `kappa`.
    pub fn functional(&self) -> ConservedFunctional {
        ConservedFunctional::scaled(self.increments.alpha(), self.increments.beta(), self.kappa())
    }
}
