use anyhow::{bail, Result};
use serde_json::Value;

use moranlab::dominance::{classify, delta_margins, verdict_from_margins, Dominance};
use moranlab::drift::{self, asymptotic_masses, Characteristics};
use moranlab::game::{PayoffMatrix, Regime, SelectionIncrements};
use moranlab::imitation::{continuum_coefficients, ImitationChain, ImitationKernel};
use moranlab::moran::{
    evolve, fixation_closed_form, fixation_linear_solve, fixation_recursive, power_limit, DistributionVector,
    MoranChain, Variant,
};
use moranlab::ode::{integrate, long_time_limit, table_limit};
use moranlab::pde::{
    convergence_harness, pi_one, ContinuumState, InitialCondition, InvariantMonitor, PdeParams, PdeSolver,
};
use moranlab::spectral::{eigen_solve, eigen_solve_on_grid, SpectralProblem};

use crate::output::{num, Run};
use crate::params::{self, init_label, steps_per};
use crate::{Cli, Command, GameArgs, IncrementArgs, KernelArg, MethodArg, VariantArg};

const MASS_TOL: f64 = 1e-10;
const PSI_TOL: f64 = 1e-6;
const AGREEMENT_TOL: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-3;

pub fn run(cli: &Cli) -> Result<Vec<String>> {
    let name = match &cli.command {
        Command::Fixation { .. } => "fixation",
        Command::Evolve { .. } => "evolve",
        Command::Pde { .. } => "pde",
        Command::Dominance { .. } => "dominance",
        Command::Ode { .. } => "ode",
        Command::Drift { .. } => "drift",
        Command::Spectral { .. } => "spectral",
        Command::Imitate { .. } => "imitate",
        Command::Converge { .. } => "converge",
    };
    let mut run = Run::new(&cli.out, name)?;
    match &cli.command {
        Command::Fixation { n, game, variant } => fixation(&mut run, *n, game, *variant)?,
        Command::Evolve { n, game, variant, n0, steps, every } => {
            evolve_discrete(&mut run, *n, game, *variant, *n0, *steps, *every)?
        }
        Command::Pde { inc, grid, init, t_end, every } => pde(&mut run, inc, *grid, init, *t_end, *every)?,
        Command::Dominance { inc, points, method } => dominance(&mut run, inc, *points, *method)?,
        Command::Ode { inc, x0, t_end, every } => ode(&mut run, inc, *x0, *t_end, *every)?,
        Command::Drift { game, init, cells, t_end, dt } => drift_limit(&mut run, game, init, *cells, *t_end, *dt)?,
        Command::Spectral { alpha, beta, modes, grid } => spectral(&mut run, *alpha, *beta, *modes, *grid)?,
        Command::Imitate { inc, kernel, psi0, dpsi0, grid, init, t_end, every, n } => {
            imitate(&mut run, inc, *kernel, *psi0, *dpsi0, *grid, init, *t_end, *every, *n)?
        }
        Command::Converge { inc, init, grids, t_max } => converge(&mut run, inc, init, grids, *t_max)?,
    }
    run.finish()
}

fn variant(v: VariantArg) -> Variant {
    match v {
        VariantArg::Db => Variant::DeathBirth,
        VariantArg::Bd => Variant::BirthDeath,
    }
}

fn game_params(run: &mut Run, game: &GameArgs) {
    if let Some(p) = &game.payoffs {
        run.param("payoffs", p.as_str());
    }
    if let Some(r) = game.r {
        run.param("r", r);
    }
}

fn increments(run: &mut Run, inc: &IncrementArgs) -> Result<SelectionIncrements> {
    let s = params::increments(inc.increments.as_deref(), inc.alpha, inc.beta, inc.eta)?;
    run.param("increments", vec![s.a, s.b, s.c, s.d]);
    run.param("alpha", s.alpha());
    run.param("beta", s.beta());
    run.param("eta", s.eta());
    Ok(s)
}

fn initial(run: &mut Run, name: &str) -> Result<InitialCondition> {
    let init = params::initial_condition(name)?;
    run.param("init", init_label(&init));
    Ok(init)
}

fn fixation(run: &mut Run, n: usize, game: &GameArgs, v: VariantArg) -> Result<()> {
    let payoffs = params::payoffs(game.payoffs.as_deref(), game.r, PayoffMatrix::frequency_independent)?;
    run.param("N", n);
    game_params(run, game);
    run.param("variant", format!("{v:?}").to_lowercase());
    let chain = MoranChain::new(n, payoffs, variant(v))?;
    let rec = fixation_recursive(&chain);
    let lin = fixation_linear_solve(&chain)?;
    let lim = power_limit(&chain)?;
    let closed: Option<Vec<f64>> = match game.r {
        Some(r) => Some((0..=n).map(|k| fixation_closed_form(n, r, k, variant(v))).collect::<moranlab::Result<_>>()?),
        None => None,
    };
    let mut csv = run.csv("fixation", &["n", "x", "recursive", "linear_solve", "power_limit", "closed_form"])?;
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let l = lim.get(n, k);
        let mut values = vec![rec.get(k), lin.get(k), l];
        if let Some(c) = &closed {
            values.push(c[k]);
        }
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                worst = worst.max((values[i] - values[j]).abs());
            }
        }
        let cf = closed.as_ref().map(|c| num(c[k])).unwrap_or_default();
        csv.row(&[k.to_string(), num(k as f64 / n as f64), num(rec.get(k)), num(lin.get(k)), num(l), cf])?;
    }
    run.attach(csv)?;
    run.result("monotone", rec.is_monotone());
    run.result("fixation_of_single_mutant", rec.get(1));
    run.residual("max_pairwise_difference", worst, AGREEMENT_TOL);
    Ok(())
}

fn evolve_discrete(
    run: &mut Run,
    n: usize,
    game: &GameArgs,
    v: VariantArg,
    n0: usize,
    steps: u64,
    every: u64,
) -> Result<()> {
    if every == 0 {
        bail!("--every must be at least 1");
    }
    let payoffs = params::payoffs(game.payoffs.as_deref(), game.r, PayoffMatrix::frequency_independent)?;
    run.param("N", n);
    game_params(run, game);
    run.param("variant", format!("{v:?}").to_lowercase());
    run.param("n0", n0);
    run.param("steps", steps);
    run.param("every", every);
    let chain = MoranChain::new(n, payoffs, variant(v))?;
    let f = fixation_recursive(&chain);
    let mut p = DistributionVector::delta(n, n0)?;
    let (m0, f0) = (p.mass(), p.inner(f.values()));
    let (mut mass, mut psi): (f64, f64) = (0.0, 0.0);
    let mut csv = run.csv("evolve", &["step", "n", "probability"])?;
    let mut step = 0;
    loop {
        for (k, v) in p.probs().iter().enumerate() {
            csv.row(&[step.to_string(), k.to_string(), num(*v)])?;
        }
        mass = mass.max((p.mass() - m0).abs());
        psi = psi.max((p.inner(f.values()) - f0).abs());
        if step >= steps {
            break;
        }
        let k = every.min(steps - step);
        p = evolve(&chain, &p, k);
        step += k;
    }
    run.attach(csv)?;
    run.result("absorbed_at_zero", p.probs()[0]);
    run.result("absorbed_at_n", p.probs()[n]);
    run.result("interior_mass", p.interior_mass());
    run.result("predicted_fixation", f0);
    run.residual("mass_defect", mass, MASS_TOL);
    run.residual("fixation_functional_defect", psi, MASS_TOL);
    Ok(())
}

/// Evolves a continuum state, writing density snapshots and boundary masses.
#[allow(clippy::too_many_arguments)]
fn evolve_and_record(
    run: &mut Run,
    stem: &str,
    solver: &PdeSolver,
    state: &mut ContinuumState,
    monitor: &mut InvariantMonitor,
    tau_end: f64,
    every_steps: u64,
    time_scale: f64,
) -> Result<()> {
    let mut density = run.csv(stem, &["t", "x", "density"])?;
    let mut boundary = run.csv(
        &format!("{stem}_boundary"),
        &["t", "a", "b", "interior_mass", "mass_defect", "discrete_psi_defect", "continuum_psi_defect"],
    )?;
    let grid = state.grid();
    let mut failure = None;
    solver.evolve_observed(state, tau_end, every_steps, |s| {
        monitor.observe(s);
        let t = num(s.time() / time_scale);
        let mut write = || -> Result<()> {
            for (i, q) in s.interior_density().iter().enumerate() {
                density.row(&[t.clone(), num((i + 1) as f64 / grid as f64), num(*q)])?;
            }
            let r = monitor.residuals;
            boundary.row(&[
                t.clone(),
                num(s.a()),
                num(s.b()),
                num(s.interior_mass()),
                num(s.mass_defect()),
                num(r.discrete_psi),
                num(r.continuum_psi),
            ])
        };
        if failure.is_none() {
            failure = write().err();
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    run.attach(density)?;
    run.attach(boundary)?;
    Ok(())
}

fn pde(run: &mut Run, inc: &IncrementArgs, grid: usize, init: &str, t_end: f64, every: f64) -> Result<()> {
    let s = increments(run, inc)?;
    let init = initial(run, init)?;
    run.param("grid", grid);
    run.param("t_end", t_end);
    run.param("every", every);
    let params = PdeParams::new(s, grid)?;
    let solver = PdeSolver::new(params);
    let mut state = ContinuumState::new(&init, grid)?;
    let mut monitor = InvariantMonitor::new(&params);
    evolve_and_record(run, "pde", &solver, &mut state, &mut monitor, t_end, steps_per(every, params.dt())?, 1.0)?;
    run.result("t_final", state.time());
    run.result("a", state.a());
    run.result("b", state.b());
    run.result("interior_mass", state.interior_mass());
    run.result("pi_one", pi_one(&params, &init)?);
    run.result("continuum_psi_defect", monitor.residuals.continuum_psi);
    run.residual("mass_defect", monitor.residuals.mass, MASS_TOL);
    run.residual("discrete_psi_defect", monitor.residuals.discrete_psi, PSI_TOL);
    Ok(())
}

fn label(d: Dominance) -> &'static str {
    match d {
        Dominance::SecondDominates => "q2",
        Dominance::FirstDominates => "q1",
        Dominance::Neither => "neither",
    }
}

fn dominance(run: &mut Run, inc: &IncrementArgs, points: usize, method: MethodArg) -> Result<()> {
    if points == 0 {
        bail!("--points must be positive");
    }
    let s = increments(run, inc)?;
    run.param("points", points);
    run.param("method", format!("{method:?}").to_lowercase());
    if let Ok(r) = Regime::of(s.alpha(), s.beta()) {
        run.result("regime", r.label());
    }
    let qs: Vec<f64> = (0..points).map(|k| (k as f64 + 0.5) / points as f64).collect();
    let mut grid_csv = run.csv(
        "dominance",
        &["q1", "q2", "table_dominant", "numeric_dominant", "margin_q2_over_q1", "margin_q1_over_q2"],
    )?;
    let mut edges = run.csv("dominance_edges", &["method", "from", "to"])?;
    let (mut agree, mut disagree, mut inconclusive) = (0u64, 0u64, 0u64);
    for &q1 in &qs {
        for &q2 in &qs {
            let table = if method != MethodArg::Numeric { classify(&s, q1, q2).ok().map(|v| v.verdict) } else { None };
            let (numeric, margins) = if method != MethodArg::Table {
                let (f, r) = if q1 == q2 { (0.0, 0.0) } else { delta_margins(&s, q1, q2, 1.0) };
                let v = if q1 == q2 { Ok(Dominance::Neither) } else { verdict_from_margins(f, r) };
                (Some(v.ok()), Some((f, r)))
            } else {
                (None, None)
            };
            let table_text = match (method, table) {
                (MethodArg::Numeric, _) => "",
                (_, Some(v)) => label(v),
                (_, None) => "degenerate",
            };
            let numeric_text = match numeric {
                None => "",
                Some(Some(v)) => label(v),
                Some(None) => "inconclusive",
            };
            if let (Some(t), Some(n)) = (table, numeric) {
                match n {
                    Some(n) if n == t => agree += 1,
                    Some(_) => disagree += 1,
                    None => inconclusive += 1,
                }
            }
            let (mf, mr) = margins.map(|(f, r)| (num(f), num(r))).unwrap_or_default();
            grid_csv.row(&[num(q1), num(q2), table_text.into(), numeric_text.into(), mf, mr])?;
            // Each unordered pair once.
            if q1 < q2 {
                for (name, verdict) in [("table", table), ("numeric", numeric.flatten())] {
                    match verdict {
                        Some(Dominance::SecondDominates) => edges.row(&[name.into(), num(q1), num(q2)])?,
                        Some(Dominance::FirstDominates) => edges.row(&[name.into(), num(q2), num(q1)])?,
                        _ => {}
                    }
                }
            }
        }
    }
    run.attach(grid_csv)?;
    run.attach(edges)?;
    if method == MethodArg::Both {
        run.result("agreements", agree);
        run.result("disagreements", disagree);
        run.result("inconclusive", inconclusive);
    }
    Ok(())
}

fn ode(run: &mut Run, inc: &IncrementArgs, x0: f64, t_end: f64, every: f64) -> Result<()> {
    let s = increments(run, inc)?;
    run.param("x0", x0);
    run.param("t_end", t_end);
    run.param("every", every);
    let tr = integrate(&s, x0, t_end)?;
    let stride = if tr.step > 0.0 { steps_per(every, tr.step)? as usize } else { 1 };
    let mut csv = run.csv("ode", &["t", "x"])?;
    let last = tr.points.len() - 1;
    for (i, p) in tr.points.iter().enumerate() {
        if i % stride == 0 || i == last {
            csv.row(&[num(p.t), num(p.x)])?;
        }
    }
    run.attach(csv)?;
    run.result("step", tr.step);
    run.result("x_final", tr.last().x);
    run.result("long_time_limit", long_time_limit(&s, x0).map(Value::from).unwrap_or(Value::Null));
    match (Regime::of(s.alpha(), s.beta()), table_limit(&s, x0)) {
        (Ok(r), Ok(l)) => {
            run.result("regime", r.label());
            run.result("table_limit", l);
        }
        _ => run.result("regime", "degenerate"),
    }
    run.residual("max_clamp", tr.max_clamp, 1e-12);
    Ok(())
}

fn drift_limit(run: &mut Run, game: &GameArgs, init: &str, cells: usize, t_end: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        bail!("--dt must be positive and --t-end nonnegative");
    }
    let payoffs = params::payoffs(game.payoffs.as_deref(), game.r, drift::frequency_independent)?;
    game_params(run, game);
    let init = initial(run, init)?;
    run.param("cells", cells);
    run.param("t_end", t_end);
    run.param("dt", dt);
    let theory = asymptotic_masses(&payoffs, &init)?;
    let mut particles = Characteristics::new(payoffs, &init, cells)?;
    let psi_start = particles.psi_functional()?;
    particles.advance(dt, (t_end / dt).round() as usize);
    let (z, s, o) = particles.nearest_masses();
    let x_star = theory.x_star.map(num).unwrap_or_default();
    let mut csv = run.csv("drift", &["site", "x", "theory", "characteristics"])?;
    csv.row(&["zero".into(), num(0.0), num(theory.pi_zero), num(z)])?;
    csv.row(&["interior".into(), x_star, num(theory.pi_star), num(s)])?;
    csv.row(&["one".into(), num(1.0), num(theory.pi_one), num(o)])?;
    run.attach(csv)?;
    run.result("class", theory.class.label());
    run.result("x_star", theory.x_star.map(Value::from).unwrap_or(Value::Null));
    run.result("psi_functional_start", psi_start);
    run.result("psi_functional_end", particles.psi_functional()?);
    let discrepancy = [(theory.pi_zero - z).abs(), (theory.pi_star - s).abs(), (theory.pi_one - o).abs()]
        .into_iter()
        .fold(0.0f64, f64::max);
    run.residual("mass_defect", (particles.mass() - 1.0).abs(), MASS_TOL);
    run.residual("characteristics_discrepancy", discrepancy, ORACLE_TOL);
    Ok(())
}

fn spectral(run: &mut Run, alpha: f64, beta: f64, modes: usize, grid: Option<usize>) -> Result<()> {
    run.param("alpha", alpha);
    run.param("beta", beta);
    run.param("modes", modes);
    let problem = SpectralProblem::new(alpha, beta);
    let data = match grid {
        Some(g) => eigen_solve_on_grid(&problem, g, modes)?,
        None => eigen_solve(&problem, modes)?,
    };
    let mut csv = run.csv("spectral", &["j", "lambda", "lambda_over_j2"])?;
    for (j, l) in data.eigenvalues.iter().enumerate() {
        let ratio = if j == 0 { String::new() } else { num(l / (j * j) as f64) };
        csv.row(&[j.to_string(), num(*l), ratio])?;
    }
    run.attach(csv)?;
    run.result("grid", data.grid);
    run.result("lambda0", data.eigenvalues[0]);
    run.residual("orthonormality_defect", data.orthonormality_defect(), 1e-8);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn imitate(
    run: &mut Run,
    inc: &IncrementArgs,
    kernel: KernelArg,
    psi0: f64,
    dpsi0: f64,
    grid: usize,
    init: &str,
    t_end: f64,
    every: f64,
    n: Option<usize>,
) -> Result<()> {
    let s = increments(run, inc)?;
    let init = initial(run, init)?;
    run.param("kernel", format!("{kernel:?}").to_lowercase());
    run.param("psi0", psi0);
    run.param("dpsi0", dpsi0);
    run.param("grid", grid);
    run.param("t_end", t_end);
    run.param("every", every);
    let kernel = match kernel {
        KernelArg::Scales => ImitationKernel::scales(psi0, dpsi0)?,
        KernelArg::Fermi => ImitationKernel::fermi(psi0, dpsi0)?,
    };
    let pde = continuum_coefficients(&kernel, &s)?;
    let params = pde.params(grid)?;
    let solver = PdeSolver::new(params);
    let mut state = ContinuumState::new(&init, grid)?;
    let functional = pde.functional();
    let mut monitor = InvariantMonitor::with_functional(&params, &functional);
    let every_steps = steps_per(pde.tau(every), params.dt())?;
    evolve_and_record(run, "imitate", &solver, &mut state, &mut monitor, pde.tau(t_end), every_steps, pde.diffusion)?;
    run.result("kappa", pde.kappa());
    run.result("time_scale", pde.diffusion);
    run.result("a", state.a());
    run.result("b", state.b());
    run.result("pi_one", functional.pi_one(&init)?);
    run.result("continuum_psi_defect", monitor.residuals.continuum_psi);
    if let Some(n) = n {
        run.param("N", n);
        let chain = ImitationChain::new(n, &PayoffMatrix::weak_selection(&s, n)?, &kernel)?;
        let f = fixation_linear_solve(&chain)?;
        let mut csv = run.csv("imitate_fixation", &["n", "x", "finite_population", "continuum"])?;
        let mut worst: f64 = 0.0;
        for k in 0..=n {
            let x = k as f64 / n as f64;
            let c = functional.eval(x);
            worst = worst.max((f.get(k) - c).abs());
            csv.row(&[k.to_string(), num(x), num(f.get(k)), num(c)])?;
        }
        run.attach(csv)?;
        run.result("max_finite_vs_continuum", worst);
    }
    run.residual("mass_defect", monitor.residuals.mass, MASS_TOL);
    run.residual("discrete_psi_defect", monitor.residuals.discrete_psi, PSI_TOL);
    Ok(())
}

fn converge(run: &mut Run, inc: &IncrementArgs, init: &str, grids: &str, t_max: f64) -> Result<()> {
    let s = increments(run, inc)?;
    let init = initial(run, init)?;
    let grids = params::parse_grids(grids)?;
    run.param("grids", grids.clone());
    run.param("t_max", t_max);
    let rows = convergence_harness(&s, &init, t_max, &grids)?;
    let mut csv = run.csv(
        "converge",
        &[
            "grid",
            "a",
            "b",
            "pi_one",
            "fixation_error",
            "absorption_error",
            "t_final",
            "mass_defect",
            "discrete_psi_defect",
            "continuum_psi_defect",
        ],
    )?;
    for r in &rows {
        csv.row(&[
            r.grid.to_string(),
            num(r.a),
            num(r.b),
            num(r.pi_one),
            num(r.fixation_error),
            num(r.absorption_error),
            num(r.t_final),
            num(r.residuals.mass),
            num(r.residuals.discrete_psi),
            num(r.residuals.continuum_psi),
        ])?;
    }
    run.attach(csv)?;
    let decreasing = rows.windows(2).all(|w| w[1].fixation_error < w[0].fixation_error);
    run.result("error_decreasing", decreasing);
    let mass = rows.iter().map(|r| r.residuals.mass).fold(0.0, f64::max);
    let psi = rows.iter().map(|r| r.residuals.discrete_psi).fold(0.0, f64::max);
    run.residual("mass_defect", mass, MASS_TOL);
    run.residual("discrete_psi_defect", psi, PSI_TOL);
    Ok(())
}
