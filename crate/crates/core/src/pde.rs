//! Replicator-diffusion equation on `[0, 1]`
//!
//! `p_t = (x(1-x) p)_xx - (x(1-x)(alpha x + beta (1-x)) p)_x`
//!
//! with point masses accumulating at both ends. The time-stepper is the Moran
//! matrix of a population of `N_g` individuals with weak-selection payoffs
//! `1 + a/N_g, ...` and `dt = 1/N_g^2`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{effective_increments, EffectiveIncrements, MixedPair, PayoffMatrix, SelectionIncrements};
use crate::moran::{fixation_recursive, IterationMatrix, MoranChain};
use crate::quadrature::{cumulative_simpson, simpson_converged, DOUBLING_TOL, MIN_PANELS};

/// Densities below this are reported as a scheme failure.
pub const NEGATIVE_TOL: f64 = -1e-12;

/// Interior sup-norm below which the state counts as absorbed.
pub const ABSORBED_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeParams {
    increments: SelectionIncrements,
    grid: usize,
}

impl PdeParams {
    pub fn new(increments: SelectionIncrements, grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::PopulationTooSmall(grid));
        }
        PayoffMatrix::weak_selection(&increments, grid)?;
        Ok(Self { increments, grid })
    }

    /// Increments `(alpha, beta, 0, 0)`.
    pub fn from_alpha_beta(alpha: f64, beta: f64, grid: usize) -> Result<Self> {
        Self::new(SelectionIncrements::from_alpha_beta(alpha, beta), grid)
    }

    pub fn from_effective(e: &EffectiveIncrements, grid: usize) -> Result<Self> {
        Self::new(e.increments(), grid)
    }

    pub fn increments(&self) -> &SelectionIncrements {
        &self.increments
    }
    pub fn alpha(&self) -> f64 {
        self.increments.alpha()
    }
    pub fn beta(&self) -> f64 {
        self.increments.beta()
    }
    pub fn eta(&self) -> f64 {
        self.increments.eta()
    }
    pub fn grid(&self) -> usize {
        self.grid
    }
    pub fn dx(&self) -> f64 {
        1.0 / self.grid as f64
    }
    pub fn dt(&self) -> f64 {
        self.dx() * self.dx()
    }

    pub fn with_grid(&self, grid: usize) -> Result<Self> {
        Self::new(self.increments, grid)
    }

    /// Parameters of the relabeled game, whose solution is the mirror image `x -> 1 - x`.
    pub fn reflected(&self) -> Self {
        Self { increments: self.increments.relabeled(), grid: self.grid }
    }

    pub fn payoffs(&self) -> PayoffMatrix {
        PayoffMatrix::weak_selection(&self.increments, self.grid).expect("validated at construction")
    }

    pub fn chain(&self) -> MoranChain {
        MoranChain::death_birth(self.grid, self.payoffs()).expect("grid >= 2")
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.grid)
    }
}

pub fn nodes(grid: usize) -> Vec<f64> {
    (0..=grid).map(|i| i as f64 / grid as f64).collect()
}

/// Diffusion `x(1-x)` and drift velocity `x(1-x)(alpha x + beta(1-x))` at the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub x: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub velocity: Vec<f64>,
}

pub fn drift_diffusion_coefficients(params: &PdeParams) -> Coefficients {
    let x = params.nodes();
    let diffusion = x.iter().map(|&x| x * (1.0 - x)).collect();
    let velocity = x.iter().map(|&x| velocity(params.alpha(), params.beta(), x)).collect();
    Coefficients { x, diffusion, velocity }
}

pub fn velocity(alpha: f64, beta: f64, x: f64) -> f64 {
    x * (1.0 - x) * (alpha * x + beta * (1.0 - x))
}

/// Piecewise-linear density through the given points, rescaled to unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidDistribution("a table needs at least two rows".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidDistribution("table abscissae must increase".into()));
            }
        }
        for &(x, p) in points {
            if !(0.0..=1.0).contains(&x) || !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!("bad table row ({x}, {p})")));
            }
        }
        let mass: f64 = points.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidDistribution("table has zero mass".into()));
        }
        Ok(Self { xs: points.iter().map(|p| p.0).collect(), ps: points.iter().map(|p| p.1 / mass).collect() })
    }

    pub fn density(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let k = self.xs.partition_point(|&v| v <= x).clamp(1, n - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let t = (x - x0) / (x1 - x0);
        self.ps[k - 1] + t * (self.ps[k] - self.ps[k - 1])
    }

    pub fn cumulative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for k in 1..self.xs.len() {
            let (x0, x1) = (self.xs[k - 1], self.xs[k]);
            if x <= x0 {
                break;
            }
            let hi = x.min(x1);
            acc += 0.5 * (hi - x0) * (self.ps[k - 1] + self.density(hi));
        }
        acc.min(1.0)
    }
}

/// Initial data for the continuum equations.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// Unit point mass at `x0`.
    Delta(f64),
    Uniform,
    /// `6x(1-x)`.
    Parabolic,
    /// `20x^3(1-x)`.
    Skewed,
    Tabulated(TabulatedDensity),
}

impl InitialCondition {
    /// Parses `delta:X`, `uniform`, `6x(1-x)`, `20x3(1-x)` (also `20x^3(1-x)`).
    pub fn from_name(name: &str) -> Option<Self> {
        let s: String = name.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(rest) = s.strip_prefix("delta:") {
            return rest.parse().ok().map(InitialCondition::Delta);
        }
        match s.as_str() {
            "uniform" => Some(Self::Uniform),
            "6x(1-x)" => Some(Self::Parabolic),
            "20x3(1-x)" | "20x^3(1-x)" => Some(Self::Skewed),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Delta(x) if !(0.0..=1.0).contains(x) => Err(Error::ProbabilityOutOfRange { name: "x0", value: *x }),
            _ => Ok(()),
        }
    }

    /// Density value; `None` for a point mass.
    pub fn density(&self, x: f64) -> Option<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Some(0.0);
        }
        match self {
            Self::Delta(_) => None,
            Self::Uniform => Some(1.0),
            Self::Parabolic => Some(6.0 * x * (1.0 - x)),
            Self::Skewed => Some(20.0 * x.powi(3) * (1.0 - x)),
            Self::Tabulated(t) => Some(t.density(x)),
        }
    }

    /// Mass in `[0, x]`.
    pub fn cumulative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Self::Delta(x0) => {
                if x >= *x0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Uniform => x,
            Self::Parabolic => x * x * (3.0 - 2.0 * x),
            Self::Skewed => x.powi(4) * (5.0 - 4.0 * x),
            Self::Tabulated(t) => t.cumulative(x),
        }
    }

    /// `integral x p0(x) dx`.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Delta(x0) => *x0,
            Self::Uniform | Self::Parabolic => 0.5,
            Self::Skewed => 2.0 / 3.0,
            Self::Tabulated(_) => 1.0 - simpson_converged(|x| self.cumulative(x), 0.0, 1.0, MIN_PANELS, DOUBLING_TOL),
        }
    }

    /// Grid masses `P_0..P_N`: a point mass goes to the nearest node (ties to even), a density
    /// is sampled at the interior nodes and rescaled to unit mass.
    pub fn discretize(&self, grid: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let mut mass = vec![0.0; grid + 1];
        match self {
            Self::Delta(x0) => {
                let k = (x0 * grid as f64).round_ties_even() as usize;
                mass[k.min(grid)] = 1.0;
            }
            _ => {
                let dx = 1.0 / grid as f64;
                for (i, m) in mass.iter_mut().enumerate().take(grid).skip(1) {
                    *m = self.density(i as f64 * dx).unwrap_or(0.0) * dx;
                }
                let total: f64 = mass.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::InvalidDistribution("density vanishes on every interior node".into()));
                }
                mass.iter_mut().for_each(|m| *m /= total);
            }
        }
        Ok(mass)
    }
}

/// Boundary masses `a`, `b` and the interior density on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuumState {
    grid: usize,
    mass: Vec<f64>,
    steps: u64,
}

impl ContinuumState {
    pub fn new(init: &InitialCondition, grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::PopulationTooSmall(grid));
        }
        Ok(Self { grid, mass: init.discretize(grid)?, steps: 0 })
    }

    /// State from raw node masses (`P_0 = a`, `P_N = b`).
    pub fn from_masses(mass: Vec<f64>) -> Result<Self> {
        if mass.len() < 3 {
            return Err(Error::PopulationTooSmall(mass.len().saturating_sub(1)));
        }
        Ok(Self { grid: mass.len() - 1, mass, steps: 0 })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }
    pub fn steps(&self) -> u64 {
        self.steps
    }
    pub fn time(&self) -> f64 {
        self.steps as f64 / (self.grid as f64 * self.grid as f64)
    }
    pub fn a(&self) -> f64 {
        self.mass[0]
    }
    pub fn b(&self) -> f64 {
        self.mass[self.grid]
    }
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// `q(x_i)` for `i = 1..N-1`.
    pub fn interior_density(&self) -> Vec<f64> {
        let n = self.grid as f64;
        self.mass[1..self.grid].iter().map(|m| m * n).collect()
    }

    pub fn interior_mass(&self) -> f64 {
        self.mass[1..self.grid].iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.a() + self.b() + self.interior_mass()
    }

    pub fn mass_defect(&self) -> f64 {
        (1.0 - self.total_mass()).abs()
    }

    pub fn sup_density(&self) -> f64 {
        let n = self.grid as f64;
        self.mass[1..self.grid].iter().fold(0.0, |m, v| m.max(v.abs() * n))
    }

    /// `J = sum x(1-x) q^2 dx` over the interior nodes.
    pub fn weighted_l2(&self) -> f64 {
        let n = self.grid as f64;
        (1..self.grid)
            .map(|i| {
                let x = i as f64 / n;
                let q = self.mass[i] * n;
                x * (1.0 - x) * q * q / n
            })
            .sum()
    }

    /// `sum w_i P_i`.
    pub fn functional(&self, w: &[f64]) -> f64 {
        self.mass.iter().zip(w).map(|(m, w)| m * w).sum()
    }

    /// The state seen through `x -> 1 - x`.
    pub fn mirrored(&self) -> Self {
        let mut mass = self.mass.clone();
        mass.reverse();
        Self { grid: self.grid, mass, steps: self.steps }
    }

    fn check_sign(&self) -> Result<()> {
        match self.mass.iter().enumerate().find(|(_, v)| **v < NEGATIVE_TOL) {
            Some((node, &value)) => Err(Error::NegativeDensity { node, value: value * self.grid as f64 }),
            None => Ok(()),
        }
    }
}

const SIGN_CHECK_EVERY: u64 = 1024;
const ABSORPTION_CHECK_EVERY: u64 = 256;

/// Moran-matrix time-stepper for given parameters.
#[derive(Clone, Debug)]
pub struct PdeSolver {
    params: PdeParams,
    matrix: IterationMatrix,
}

impl PdeSolver {
    pub fn new(params: PdeParams) -> Self {
        let matrix = IterationMatrix::from_model(&params.chain());
        Self { params, matrix }
    }

    pub fn params(&self) -> &PdeParams {
        &self.params
    }

    pub fn matrix(&self) -> &IterationMatrix {
        &self.matrix
    }

    fn check_grid(&self, state: &ContinuumState) -> Result<()> {
        if state.grid != self.params.grid {
            return Err(Error::InvalidParameter(format!(
                "state grid {} differs from solver grid {}",
                state.grid, self.params.grid
            )));
        }
        Ok(())
    }

    fn advance(&self, state: &mut ContinuumState, scratch: &mut Vec<f64>, steps: u64) {
        scratch.resize(state.mass.len(), 0.0);
        for _ in 0..steps {
            self.matrix.apply_into(&state.mass, scratch);
            std::mem::swap(&mut state.mass, scratch);
        }
        state.steps += steps;
    }

    fn steps_until(&self, state: &ContinuumState, t_end: f64) -> u64 {
        let target = (t_end / self.params.dt()).round();
        if target <= state.steps as f64 {
            0
        } else {
            target as u64 - state.steps
        }
    }

    /// Advances to the grid time closest to `t_end`.
    pub fn evolve(&self, mut state: ContinuumState, t_end: f64) -> Result<ContinuumState> {
        self.evolve_observed(&mut state, t_end, 0, |_| {})?;
        Ok(state)
    }

    /// Advances to `t_end`, calling `observe` at the start, every `every` steps
    /// (if nonzero) and at the end.
    pub fn evolve_observed<F: FnMut(&ContinuumState)>(
        &self,
        state: &mut ContinuumState,
        t_end: f64,
        every: u64,
        mut observe: F,
    ) -> Result<()> {
        self.check_grid(state)?;
        let mut remaining = self.steps_until(state, t_end);
        let mut scratch = Vec::new();
        observe(state);
        let mut until_observed = every;
        while remaining > 0 {
            let mut k = SIGN_CHECK_EVERY.min(remaining);
            if every > 0 {
                k = k.min(until_observed);
            }
            self.advance(state, &mut scratch, k);
            remaining -= k;
            state.check_sign()?;
            if every > 0 {
                until_observed -= k;
                if until_observed == 0 {
                    if remaining > 0 {
                        observe(state);
                    }
                    until_observed = every;
                }
            }
        }
        observe(state);
        Ok(())
    }

    /// Iterates until the interior sup-norm drops below `tol`, or fails past `t_max`.
    pub fn run_to_absorption(&self, state: &mut ContinuumState, tol: f64, t_max: f64) -> Result<()> {
        self.run_to_absorption_observed(state, tol, t_max, |_| {})
    }

    /// As [`run_to_absorption`](Self::run_to_absorption), observing the state
    /// at every sup-norm check.
    pub fn run_to_absorption_observed<F: FnMut(&ContinuumState)>(
        &self,
        state: &mut ContinuumState,
        tol: f64,
        t_max: f64,
        mut observe: F,
    ) -> Result<()> {
        self.check_grid(state)?;
        let cap = (t_max / self.params.dt()).ceil() as u64;
        let mut scratch = Vec::new();
        observe(state);
        let mut since_sign = 0;
        while state.sup_density() >= tol {
            if state.steps >= cap {
                return Err(Error::NoConvergence(state.steps));
            }
            self.advance(state, &mut scratch, ABSORPTION_CHECK_EVERY);
            since_sign += ABSORPTION_CHECK_EVERY;
            if since_sign >= SIGN_CHECK_EVERY {
                state.check_sign()?;
                since_sign = 0;
            }
            observe(state);
        }
        state.check_sign()
    }
}

pub fn evolve_pde(state: ContinuumState, params: &PdeParams, t_end: f64) -> Result<ContinuumState> {
    PdeSolver::new(*params).evolve(state, t_end)
}

/// The conserved functional `psi(x) = c^-1 int_0^x exp(-kappa (y^2 eta/2 + y beta)) dy`,
/// `c` chosen so that `psi(1) = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedFunctional {
    eta: f64,
    beta: f64,
    kappa: f64,
    norm: f64,
}

impl ConservedFunctional {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self::scaled(alpha, beta, 1.0)
    }

    /// Exponent multiplied by `kappa`.
    pub fn scaled(alpha: f64, beta: f64, kappa: f64) -> Self {
        let mut f = Self { eta: alpha - beta, beta, kappa, norm: 1.0 };
        f.norm = simpson_converged(|y| f.integrand(y), 0.0, 1.0, MIN_PANELS, DOUBLING_TOL);
        f
    }

    pub fn from_params(params: &PdeParams) -> Self {
        Self::new(params.alpha(), params.beta())
    }

    /// Functional of the contest between mixed strategies `q1` and `q2`.
    pub fn for_pair(s: &SelectionIncrements, q: &MixedPair) -> Self {
        let e = effective_increments(s, q);
        Self::new(e.alpha, e.beta)
    }

    pub fn alpha(&self) -> f64 {
        self.eta + self.beta
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Unnormalized `psi'`.
    pub fn integrand(&self, y: f64) -> f64 {
        (-self.kappa * (0.5 * y * y * self.eta + y * self.beta)).exp()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        simpson_converged(|y| self.integrand(y), 0.0, x, MIN_PANELS, DOUBLING_TOL) / self.norm
    }

    /// `psi` at every node of the grid.
    pub fn on_grid(&self, grid: usize) -> Vec<f64> {
        let mut v = cumulative_simpson(|y| self.integrand(y), &nodes(grid), DOUBLING_TOL * self.norm.min(1.0));
        let top = v[grid];
        v.iter_mut().for_each(|p| *p /= top);
        v[0] = 0.0;
        v[grid] = 1.0;
        v
    }

    /// Fixation probability of type A, `int F(y) (1 - P0(y)) dy / c`, with `P0` the initial CDF.
    pub fn pi_one(&self, init: &InitialCondition) -> Result<f64> {
        init.validate()?;
        match init {
            InitialCondition::Delta(x0) => Ok(self.eval(*x0)),
            _ => {
                let v = simpson_converged(
                    |y| self.integrand(y) * (1.0 - init.cumulative(y)),
                    0.0,
                    1.0,
                    MIN_PANELS,
                    DOUBLING_TOL,
                );
                Ok(v / self.norm)
            }
        }
    }
}

pub fn psi(params: &PdeParams, x: f64) -> f64 {
    ConservedFunctional::from_params(params).eval(x)
}

/// Limiting mass `pi_1` at `x = 1`; the mass at `x = 0` is `1 - pi_1`.
pub fn pi_one(params: &PdeParams, init: &InitialCondition) -> Result<f64> {
    ConservedFunctional::from_params(params).pi_one(init)
}

/// Running worst-case invariant residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// `|1 - a - b - sum q dx|`.
    pub mass: f64,
    /// Drift of `sum F_i P_i` with `F` the scheme's own discrete fixation profile.
    pub discrete_psi: f64,
    /// Drift of `sum psi(x_i) P_i` with the continuum `psi`.
    pub continuum_psi: f64,
}

/// Tracks the invariants of a run.
#[derive(Clone, Debug)]
pub struct InvariantMonitor {
    discrete: Vec<f64>,
    continuum: Vec<f64>,
    start: Option<(f64, f64)>,
    pub residuals: Residuals,
}

impl InvariantMonitor {
    pub fn new(params: &PdeParams) -> Self {
        Self::with_functional(params, &ConservedFunctional::from_params(params))
    }

    pub fn with_functional(params: &PdeParams, psi: &ConservedFunctional) -> Self {
        Self {
            discrete: fixation_recursive(&params.chain()).values().to_vec(),
            continuum: psi.on_grid(params.grid()),
            start: None,
            residuals: Residuals::default(),
        }
    }

    pub fn observe(&mut self, state: &ContinuumState) {
        let d = state.functional(&self.discrete);
        let c = state.functional(&self.continuum);
        let (d0, c0) = *self.start.get_or_insert((d, c));
        let r = &mut self.residuals;
        r.mass = r.mass.max(state.mass_defect());
        r.discrete_psi = r.discrete_psi.max((d - d0).abs());
        r.continuum_psi = r.continuum_psi.max((c - c0).abs());
    }

    pub fn discrete_profile(&self) -> &[f64] {
        &self.discrete
    }
}

/// One row of [`convergence_harness`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub grid: usize,
    pub a: f64,
    pub b: f64,
    pub pi_one: f64,
    /// `|a + b - (pi_0 + pi_1)|` at absorption.
    pub absorption_error: f64,
    /// `|b - pi_1|` at absorption.
    pub fixation_error: f64,
    pub t_final: f64,
    pub residuals: Residuals,
}

/// Runs every grid to absorption and compares the boundary masses with the
/// continuum fixation probability.
pub fn convergence_harness(
    increments: &SelectionIncrements,
    init: &InitialCondition,
    t_max: f64,
    grids: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    let functional = ConservedFunctional::new(increments.alpha(), increments.beta());
    let pi1 = functional.pi_one(init)?;
    grids
        .par_iter()
        .map(|&grid| {
            let params = PdeParams::new(*increments, grid)?;
            let solver = PdeSolver::new(params);
            let mut state = ContinuumState::new(init, grid)?;
            let mut monitor = InvariantMonitor::with_functional(&params, &functional);
            solver.run_to_absorption_observed(&mut state, ABSORBED_TOL, t_max, |s| monitor.observe(s))?;
            Ok(ConvergenceRow {
                grid,
                a: state.a(),
                b: state.b(),
                pi_one: pi1,
                absorption_error: (state.a() + state.b() - 1.0).abs(),
                fixation_error: (state.b() - pi1).abs(),
                t_final: state.time(),
                residuals: monitor.residuals,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gamma_fix(gamma: f64, x0: f64) -> f64 {
        if gamma == 0.0 {
            x0
        } else {
            (1.0 - (-gamma * x0).exp()) / (1.0 - (-gamma).exp())
        }
    }

    #[test]
    fn coefficients_vanish_at_ends() {
        let p = PdeParams::from_alpha_beta(1.5, 1.5, 10).unwrap();
        let c = drift_diffusion_coefficients(&p);
        assert_eq!((c.diffusion[0], c.diffusion[10]), (0.0, 0.0));
        for (x, v) in c.x.iter().zip(&c.velocity) {
            assert!((v - 1.5 * x * (1.0 - x)).abs() < 1e-15);
        }
        let q = 2.0 / 3.0;
        assert!(velocity(-1.0, 2.0, q).abs() < 1e-15);
    }

    #[test]
    fn psi_examples() {
        let f = ConservedFunctional::new(0.0, 0.0);
        assert!((f.eval(0.3) - 0.3).abs() < 1e-13);
        let f = ConservedFunctional::new(1.0, 1.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert!((f.eval(1.0) - 1.0).abs() < 1e-13);
        assert!((f.eval(0.5) - gamma_fix(1.0, 0.5)).abs() < 1e-12);
        assert!((f.eval(0.5) - 0.62246).abs() < 1e-5);
        let grid = f.on_grid(40);
        for (i, v) in grid.iter().enumerate() {
            assert!((v - gamma_fix(1.0, i as f64 / 40.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_one_for_densities_matches_direct_quadrature() {
        let f = ConservedFunctional::new(-1.0, 2.5);
        for init in [InitialCondition::Uniform, InitialCondition::Parabolic, InitialCondition::Skewed] {
            let direct = simpson_converged(|x| f.eval(x) * init.density(x).unwrap(), 0.0, 1.0, 256, 1e-10);
            assert!((f.pi_one(&init).unwrap() - direct).abs() < 1e-8, "{init:?}");
        }
        assert!(
            (ConservedFunctional::new(0.0, 0.0).pi_one(&InitialCondition::Delta(0.3)).unwrap() - 0.3).abs() < 1e-13
        );
    }

    #[test]
    fn named_densities_have_unit_mass() {
        for init in [InitialCondition::Uniform, InitialCondition::Parabolic, InitialCondition::Skewed] {
            assert!((init.cumulative(1.0) - 1.0).abs() < 1e-15);
            let m = simpson_converged(|x| init.density(x).unwrap(), 0.0, 1.0, 64, 1e-12);
            assert!((m - 1.0).abs() < 1e-12);
            let mean = simpson_converged(|x| x * init.density(x).unwrap(), 0.0, 1.0, 64, 1e-12);
            assert!((mean - init.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_density_is_normalized() {
        let t = TabulatedDensity::new(&[(0.0, 0.0), (0.5, 2.0), (1.0, 0.0)]).unwrap();
        assert!((t.density(0.5) - 2.0).abs() < 1e-15);
        assert!((t.cumulative(0.5) - 0.5).abs() < 1e-15);
        assert!((t.cumulative(1.0) - 1.0).abs() < 1e-15);
        let t = TabulatedDensity::new(&[(0.0, 3.0), (1.0, 3.0)]).unwrap();
        assert!((t.density(0.7) - 1.0).abs() < 1e-15);
        assert!(TabulatedDensity::new(&[(0.5, 1.0), (0.2, 1.0)]).is_err());
        assert!(TabulatedDensity::new(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        let init = InitialCondition::Tabulated(TabulatedDensity::new(&[(0.0, 1.0), (1.0, 1.0)]).unwrap());
        assert!((init.mean() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn parses_named_conditions() {
        assert_eq!(InitialCondition::from_name("delta:0.25"), Some(InitialCondition::Delta(0.25)));
        assert_eq!(InitialCondition::from_name("20x3(1-x)"), Some(InitialCondition::Skewed));
        assert_eq!(InitialCondition::from_name("6x(1-x)"), Some(InitialCondition::Parabolic));
        assert_eq!(InitialCondition::from_name("uniform"), Some(InitialCondition::Uniform));
        assert_eq!(InitialCondition::from_name("gauss"), None);
        assert!(ContinuumState::new(&InitialCondition::Delta(1.5), 10).is_err());
    }

    #[test]
    fn delta_goes_to_nearest_node() {
        let m = InitialCondition::Delta(0.26).discretize(10).unwrap();
        assert_eq!(m[3], 1.0);
        let m = InitialCondition::Delta(0.25).discretize(10).unwrap();
        assert_eq!(m[2], 1.0);
        let m = InitialCondition::Delta(0.75).discretize(10).unwrap();
        assert_eq!(m[8], 1.0);
    }

    #[test]
    fn neutral_delta_stays_symmetric() {
        let p = PdeParams::from_alpha_beta(0.0, 0.0, 40).unwrap();
        let solver = PdeSolver::new(p);
        let mut s = ContinuumState::new(&InitialCondition::Delta(0.5), 40).unwrap();
        let mut worst: f64 = 0.0;
        solver.evolve_observed(&mut s, 0.5, 50, |st| worst = worst.max((st.a() - st.b()).abs())).unwrap();
        assert!(worst < 1e-10);
        assert!(s.mass_defect() < 1e-12);
    }

    #[test]
    fn absorption_reaches_gamma_fixation() {
        let p = PdeParams::from_alpha_beta(1.0, 1.0, 100).unwrap();
        let solver = PdeSolver::new(p);
        let mut s = ContinuumState::new(&InitialCondition::Delta(0.5), 100).unwrap();
        solver.run_to_absorption(&mut s, ABSORBED_TOL, 100.0).unwrap();
        assert!(s.sup_density() < ABSORBED_TOL);
        assert!((s.b() - gamma_fix(1.0, 0.5)).abs() < 5e-3);
        assert!(solver
            .run_to_absorption(&mut ContinuumState::new(&InitialCondition::Delta(0.5), 100).unwrap(), 1e-9, 0.01)
            .is_err());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let solver = PdeSolver::new(PdeParams::from_alpha_beta(0.0, 0.0, 20).unwrap());
        let s = ContinuumState::new(&InitialCondition::Uniform, 10).unwrap();
        assert!(solver.evolve(s, 0.1).is_err());
    }

    #[test]
    fn invariants_hold_along_a_run() {
        let p = PdeParams::new(SelectionIncrements::new(1.0, -2.0, 0.5, 0.3), 50).unwrap();
        let solver = PdeSolver::new(p);
        let mut s = ContinuumState::new(&InitialCondition::Skewed, 50).unwrap();
        let mut mon = InvariantMonitor::new(&p);
        solver.evolve_observed(&mut s, 1.0, 100, |st| mon.observe(st)).unwrap();
        assert!(mon.residuals.mass < 1e-10);
        assert!(mon.residuals.discrete_psi < 1e-10);
        assert!(mon.residuals.continuum_psi < 2e-2);
    }

    #[test]
    fn reflection_is_mirror_image() {
        let p = PdeParams::new(SelectionIncrements::new(2.0, -1.0, 0.5, 0.25), 60).unwrap();
        let s = ContinuumState::new(&InitialCondition::Delta(0.3), 60).unwrap();
        let fwd = evolve_pde(s.clone(), &p, 0.2).unwrap();
        let back = evolve_pde(s.mirrored(), &p.reflected(), 0.2).unwrap();
        let diff = fwd.masses().iter().zip(back.mirrored().masses()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn harness_reports_decreasing_error() {
        let rows = convergence_harness(
            &SelectionIncrements::from_alpha_beta(2.0, 2.0),
            &InitialCondition::Delta(0.5),
            200.0,
            &[20, 40, 80],
        )
        .unwrap();
        assert!(rows.windows(2).all(|w| w[1].fixation_error < w[0].fixation_error));
        for r in &rows {
            assert!(r.absorption_error < 1e-8);
            assert!(r.residuals.mass < 1e-10);
            assert!(r.residuals.discrete_psi < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn psi_is_increasing(alpha in -20.0f64..20.0, beta in -20.0f64..20.0) {
            let f = ConservedFunctional::new(alpha, beta);
            let v = f.on_grid(50);
            prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn scheme_keeps_density_nonnegative(alpha in -5.0f64..5.0, beta in -5.0f64..5.0, x0 in 0.05f64..0.95) {
            let p = PdeParams::from_alpha_beta(alpha, beta, 30).unwrap();
            let s = ContinuumState::new(&InitialCondition::Delta(x0), 30).unwrap();
            let out = evolve_pde(s, &p, 0.3).unwrap();
            prop_assert!(out.masses().iter().all(|m| *m >= 0.0));
            prop_assert!(out.mass_defect() < 1e-12);
        }
    }
}
