//! Finite-population Moran process: transition coefficients, the iteration
//! matrix, its long-run limit and fixation probabilities.

use crate::error::{Error, Result};
use crate::game::PayoffMatrix;

/// Update order of the Moran step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Variant {
    /// A uniformly chosen individual dies, then one of the remaining `N - 1`
    /// reproduces proportionally to fitness.
    #[default]
    DeathBirth,
    /// An individual reproduces proportionally to fitness, then a uniformly
    /// chosen individual dies.
    BirthDeath,
}

/// Probabilities of moving from `n` to `n + 1`, `n` and `n - 1` type-A individuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub up: f64,
    pub stay: f64,
    pub down: f64,
}

impl Transition {
    pub const ABSORBING: Transition = Transition { up: 0.0, stay: 1.0, down: 0.0 };

    pub fn total(&self) -> f64 {
        self.up + self.stay + self.down
    }
}

/// A birth-death chain on `0..=N` with absorbing ends.
pub trait TransitionModel {
    fn population(&self) -> usize;

    /// Coefficients at state `n`, `0 <= n <= population()`.
    fn transition(&self, n: usize) -> Transition;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoranChain {
    population: usize,
    payoffs: PayoffMatrix,
    variant: Variant,
}

impl MoranChain {
    pub fn new(population: usize, payoffs: PayoffMatrix, variant: Variant) -> Result<Self> {
        if population < 2 {
            return Err(Error::PopulationTooSmall(population));
        }
        Ok(Self { population, payoffs, variant })
    }

    pub fn death_birth(population: usize, payoffs: PayoffMatrix) -> Result<Self> {
        Self::new(population, payoffs, Variant::DeathBirth)
    }

    pub fn payoffs(&self) -> &PayoffMatrix {
        &self.payoffs
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    fn phi_a(&self, n: usize) -> f64 {
        let (k, n) = (self.population as f64, n as f64);
        ((n - 1.0) * self.payoffs.a() + (k - n) * self.payoffs.b()) / (k - 1.0)
    }

    fn phi_b(&self, n: usize) -> f64 {
        let (k, n) = (self.population as f64, n as f64);
        (n * self.payoffs.c() + (k - n - 1.0) * self.payoffs.d()) / (k - 1.0)
    }

    fn check(&self, n: usize, lo: usize, hi: usize) -> Result<()> {
        if n < lo || n > hi {
            return Err(Error::CountOutOfRange { n, lo, hi });
        }
        Ok(())
    }

    /// Fitness of a type-A individual when there are `n` of them, `1 <= n <= N`.
    pub fn fitness_a(&self, n: usize) -> Result<f64> {
        self.check(n, 1, self.population)?;
        Ok(self.phi_a(n))
    }

    /// Fitness of a type-B individual when there are `n` type-A, `0 <= n <= N - 1`.
    pub fn fitness_b(&self, n: usize) -> Result<f64> {
        self.check(n, 0, self.population - 1)?;
        Ok(self.phi_b(n))
    }

    /// Both fitnesses at a state where both types are present.
    pub fn fitnesses(&self, n: usize) -> Result<(f64, f64)> {
        self.check(n, 1, self.population - 1)?;
        Ok((self.phi_a(n), self.phi_b(n)))
    }

    /// `phi_A / phi_B` at an interior state.
    pub fn relative_fitness(&self, n: usize) -> Result<f64> {
        let (fa, fb) = self.fitnesses(n)?;
        Ok(fa / fb)
    }

    pub fn transition_coefficients(&self, n: usize) -> Result<Transition> {
        self.check(n, 0, self.population)?;
        Ok(self.transition(n))
    }

    /// Coefficients through `rho`, `f_N` and `g_N` (or `g~_N` for birth/death).
    pub fn transition_factored(&self, n: usize) -> Result<Transition> {
        self.check(n, 0, self.population)?;
        if n == 0 || n == self.population {
            return Ok(Transition::ABSORBING);
        }
        let rho = self.phi_a(n) / self.phi_b(n);
        let f = f_n(self.population, n);
        let (up, down) = match self.variant {
            Variant::DeathBirth => {
                (f * rho / g_n(self.population, n as f64, rho), f / g_n(self.population, n as f64 - 1.0, rho))
            }
            Variant::BirthDeath => {
                let g = g_tilde(self.population, n as f64, rho);
                (f * rho / g, f / g)
            }
        };
        Ok(Transition { up, stay: 1.0 - up - down, down })
    }

    /// `c-(n) / c+(n)` at an interior state, from the factored coefficients.
    pub fn ratio_h(&self, n: usize) -> Result<f64> {
        let rho = self.relative_fitness(n)?;
        Ok(match self.variant {
            Variant::DeathBirth => {
                g_n(self.population, n as f64, rho) / (rho * g_n(self.population, n as f64 - 1.0, rho))
            }
            Variant::BirthDeath => 1.0 / rho,
        })
    }
}

impl TransitionModel for MoranChain {
    fn population(&self) -> usize {
        self.population
    }

    fn transition(&self, n: usize) -> Transition {
        let big = self.population;
        if n == 0 || n >= big {
            return Transition::ABSORBING;
        }
        let (k, m) = (big as f64, n as f64);
        let (fa, fb) = (self.phi_a(n), self.phi_b(n));
        match self.variant {
            Variant::DeathBirth => {
                let birth_up = m * fa + (k - m - 1.0) * fb;
                let birth_down = (m - 1.0) * fa + (k - m) * fb;
                let up = (k - m) / k * (m * fa / birth_up);
                let down = m / k * ((k - m) * fb / birth_down);
                let stay = (k - m) / k * ((k - m - 1.0) * fb / birth_up) + m / k * ((m - 1.0) * fa / birth_down);
                Transition { up, stay, down }
            }
            Variant::BirthDeath => {
                let total = m * fa + (k - m) * fb;
                let up = m * fa / total * (k - m) / k;
                let down = (k - m) * fb / total * m / k;
                let stay = m * fa / total * m / k + (k - m) * fb / total * (k - m) / k;
                Transition { up, stay, down }
            }
        }
    }
}

/// `f_N(n) = n (N - n) / N^2`.
pub fn f_n(population: usize, n: usize) -> f64 {
    let (k, m) = (population as f64, n as f64);
    m * (k - m) / (k * k)
}

/// `g_N(n, rho) = (N - 1 + (rho - 1) n) / N`.
pub fn g_n(population: usize, n: f64, rho: f64) -> f64 {
    let k = population as f64;
    (k - 1.0 + (rho - 1.0) * n) / k
}

/// `g~_N(n, rho) = (N + (rho - 1) n) / N`.
pub fn g_tilde(population: usize, n: f64, rho: f64) -> f64 {
    let k = population as f64;
    (k + (rho - 1.0) * n) / k
}

/// Column-stochastic tridiagonal matrix `M` with `M[i][i] = c0(i)`,
/// `M[i+1][i] = c+(i)` and `M[i][i+1] = c-(i+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationMatrix {
    pub(crate) up: Vec<f64>,
    pub(crate) stay: Vec<f64>,
    pub(crate) down: Vec<f64>,
}

impl IterationMatrix {
    pub fn from_model<M: TransitionModel + ?Sized>(model: &M) -> Self {
        let n = model.population();
        let mut up = Vec::with_capacity(n + 1);
        let mut stay = Vec::with_capacity(n + 1);
        let mut down = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let t = model.transition(i);
            up.push(t.up);
            stay.push(t.stay);
            down.push(t.down);
        }
        Self { up, stay, down }
    }

    /// Number of rows (and columns), `N + 1`.
    pub fn size(&self) -> usize {
        self.stay.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.stay[j]
        } else if i == j + 1 {
            self.up[j]
        } else if j == i + 1 {
            self.down[j]
        } else {
            0.0
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.size()).map(|j| self.up[j] + self.stay[j] + self.down[j]).collect()
    }

    /// `dst = M src`.
    pub fn apply_into(&self, src: &[f64], dst: &mut [f64]) {
        let n = self.size();
        debug_assert!(src.len() == n && dst.len() == n);
        for i in 0..n {
            let mut v = self.stay[i] * src[i];
            if i > 0 {
                v += self.up[i - 1] * src[i - 1];
            }
            if i + 1 < n {
                v += self.down[i + 1] * src[i + 1];
            }
            dst[i] = v;
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.size();
        let mut m = DenseMatrix::zeros(n);
        for j in 0..n {
            for i in j.saturating_sub(1)..(j + 2).min(n) {
                m.set(i, j, self.entry(i, j));
            }
        }
        m
    }
}

pub fn build_matrix<M: TransitionModel + ?Sized>(model: &M) -> IterationMatrix {
    IterationMatrix::from_model(model)
}

/// Square row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            let dst = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for (d, b) in dst.iter_mut().zip(&other.data[k * n..(k + 1) * n]) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest entry in rows and columns `1..n-1`.
    pub fn max_interior_entry(&self) -> f64 {
        let n = self.n;
        let mut m = 0.0f64;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                m = m.max(self.get(i, j).abs());
            }
        }
        m
    }
}

/// Probability distribution over `0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionVector {
    probs: Vec<f64>,
}

/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-12;

impl DistributionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some((i, v)) = probs.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("entry {i} is {v}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Ok(Self { probs })
    }

    /// All mass on state `n`.
    pub fn delta(population: usize, n: usize) -> Result<Self> {
        if n > population {
            return Err(Error::CountOutOfRange { n, lo: 0, hi: population });
        }
        let mut probs = vec![0.0; population + 1];
        probs[n] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn inner(&self, w: &[f64]) -> f64 {
        self.probs.iter().zip(w).map(|(p, w)| p * w).sum()
    }

    pub fn interior_mass(&self) -> f64 {
        let n = self.probs.len();
        self.probs[1..n - 1].iter().sum()
    }
}

/// `M^k P0`.
pub fn evolve<M: TransitionModel + ?Sized>(model: &M, p0: &DistributionVector, steps: u64) -> DistributionVector {
    let m = IterationMatrix::from_model(model);
    let mut cur = p0.probs.clone();
    let mut next = vec![0.0; cur.len()];
    for _ in 0..steps {
        m.apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    DistributionVector { probs: cur }
}

/// `M^k` by `k` successive tridiagonal applications to each column.
pub fn matrix_power<M: TransitionModel + ?Sized>(model: &M, steps: u64) -> DenseMatrix {
    let m = IterationMatrix::from_model(model);
    let n = m.size();
    let mut out = DenseMatrix::zeros(n);
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    for j in 0..n {
        cur.iter_mut().for_each(|v| *v = 0.0);
        cur[j] = 1.0;
        for _ in 0..steps {
            m.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        for i in 0..n {
            out.set(i, j, cur[i]);
        }
    }
    out
}

/// Successive-iterate tolerance of [`power_limit`].
pub const POWER_LIMIT_TOL: f64 = 1e-13;

/// Equivalent step cap of [`power_limit`].
pub const POWER_LIMIT_CAP: u64 = 10_000_000;

/// `lim M^k`, by repeated squaring until `M^(2^s)` and `M^(2^(s+1))` agree.
pub fn power_limit<M: TransitionModel + ?Sized>(model: &M) -> Result<DenseMatrix> {
    let mut cur = IterationMatrix::from_model(model).to_dense();
    let mut steps: u64 = 1;
    loop {
        let next = cur.mul(&cur);
        steps *= 2;
        if next.max_abs_diff(&cur) < POWER_LIMIT_TOL {
            return Ok(next);
        }
        if steps >= POWER_LIMIT_CAP {
            return Err(Error::NoConvergence(steps));
        }
        cur = next;
    }
}

/// Fixation probabilities `F_0..F_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FixationProfile {
    values: Vec<f64>,
}

impl FixationProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 || values[0] != 0.0 || values[n - 1] != 1.0 {
            return Err(Error::InvalidDistribution("fixation profile must start at 0 and end at 1".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn population(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.values.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

/// `F_n = G_1 sum_{k<=n} prod_{i<k} H(i)`, with the products accumulated as sums of logarithms.
pub fn fixation_recursive(chain: &MoranChain) -> FixationProfile {
    let big = chain.population;
    let mut log_terms = Vec::with_capacity(big);
    let mut acc = 0.0;
    log_terms.push(0.0);
    for i in 1..big {
        // Interior states always have positive fitness ratios.
        acc += chain.ratio_h(i).expect("interior state").ln();
        log_terms.push(acc);
    }
    profile_from_log_terms(&log_terms)
}

fn profile_from_log_terms(log_terms: &[f64]) -> FixationProfile {
    let top = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cum = Vec::with_capacity(log_terms.len() + 1);
    let mut s = 0.0;
    cum.push(0.0);
    for l in log_terms {
        s += (l - top).exp();
        cum.push(s);
    }
    let total = s;
    let mut values: Vec<f64> = cum.iter().map(|c| c / total).collect();
    let last = values.len() - 1;
    values[last] = 1.0;
    FixationProfile { values }
}

/// Solves `c-(n) F_{n-1} - (c+(n) + c-(n)) F_n + c+(n) F_{n+1} = 0` with
/// `F_0 = 0`, `F_N = 1` by tridiagonal elimination.
///
/// Forward elimination leaves `F_n = e_n F_{n+1}`; each pivot `1 - q_n e_{n-1}`
/// is formed as `p_n + q_n (1 - e_{n-1})` with `1 - e_n` carried separately,
/// so no pivot suffers cancellation.
pub fn fixation_linear_solve<M: TransitionModel + ?Sized>(model: &M) -> Result<FixationProfile> {
    let big = model.population();
    let mut e = vec![0.0; big];
    let mut rest = 1.0;
    for i in 1..big {
        let t = model.transition(i);
        let total = t.up + t.down;
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(format!("state {i} cannot move")));
        }
        let (p, q) = (t.up / total, t.down / total);
        let pivot = p + q * rest;
        e[i] = p / pivot;
        rest = q * rest / pivot;
    }
    let mut values = vec![0.0; big + 1];
    values[big] = 1.0;
    for i in (1..big).rev() {
        values[i] = e[i] * values[i + 1];
    }
    Ok(FixationProfile { values })
}

/// Below this distance from one the neutral formula `n / N` is used.
pub const CLOSED_FORM_SWITCH: f64 = 1e-10;

/// Fixation probability in the frequency-independent game `A = B = 1`, `C = D = r`.
pub fn fixation_closed_form(population: usize, r: f64, n: usize, variant: Variant) -> Result<f64> {
    if population < 2 {
        return Err(Error::PopulationTooSmall(population));
    }
    if n > population {
        return Err(Error::CountOutOfRange { n, lo: 0, hi: population });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("relative fitness r = {r} must be positive")));
    }
    let (big, k) = (population as f64, n as f64);
    if (r - 1.0).abs() < CLOSED_FORM_SWITCH {
        return Ok(k / big);
    }
    let l = r.ln();
    let value = match variant {
        Variant::DeathBirth => {
            let m = big - 1.0;
            let frac = k / big * (r - 1.0);
            if r < 1.0 {
                let num = -(k * l).exp_m1() + frac * ((k - 1.0) * l).exp();
                num / -(m * l).exp_m1()
            } else {
                let num = (-m * l).exp() - ((k - m) * l).exp() + frac * ((k - 1.0 - m) * l).exp();
                num / (-m * l).exp_m1()
            }
        }
        Variant::BirthDeath => {
            if r < 1.0 {
                (k * l).exp_m1() / (big * l).exp_m1()
            } else {
                (((k - big) * l).exp() - (-big * l).exp()) / -(-big * l).exp_m1()
            }
        }
    };
    Ok(value)
}
