use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use moranlab::game::{PayoffMatrix, SelectionIncrements};
use moranlab::pde::{InitialCondition, TabulatedDensity};

pub fn parse_list<const K: usize>(s: &str, what: &str) -> Result<[f64; K]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number {p:?} in {what}")))
        .collect::<Result<_>>()?;
    parts.try_into().map_err(|v: Vec<f64>| anyhow!("{what} needs {K} comma-separated values, got {}", v.len()))
}

pub fn parse_grids(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|p| p.trim().parse::<usize>().with_context(|| format!("bad grid size {p:?}"))).collect()
}

/// Payoffs from `--payoffs A,B,C,D` or the frequency-independent `--r`.
pub fn payoffs(
    payoffs: Option<&str>,
    r: Option<f64>,
    r_form: fn(f64) -> moranlab::Result<PayoffMatrix>,
) -> Result<PayoffMatrix> {
    match (payoffs, r) {
        (Some(_), Some(_)) => bail!("give either --payoffs or --r, not both"),
        (Some(p), None) => {
            let [a, b, c, d] = parse_list::<4>(p, "--payoffs")?;
            Ok(PayoffMatrix::new(a, b, c, d)?)
        }
        (None, Some(r)) => Ok(r_form(r)?),
        (None, None) => bail!("one of --payoffs or --r is required"),
    }
}

/// Increments from `--increments a,b,c,d` or two of `--alpha`, `--beta`, `--eta`.
pub fn increments(
    increments: Option<&str>,
    alpha: Option<f64>,
    beta: Option<f64>,
    eta: Option<f64>,
) -> Result<SelectionIncrements> {
    if let Some(s) = increments {
        if alpha.is_some() || beta.is_some() || eta.is_some() {
            bail!("--increments excludes --alpha/--beta/--eta");
        }
        let [a, b, c, d] = parse_list::<4>(s, "--increments")?;
        return Ok(SelectionIncrements::new(a, b, c, d));
    }
    let (alpha, beta) = match (alpha, beta, eta) {
        (Some(a), Some(b), None) => (a, b),
        (Some(a), None, Some(e)) => (a, a - e),
        (None, Some(b), Some(e)) => (b + e, b),
        (Some(a), Some(b), Some(e)) if (a - b - e).abs() <= 1e-12 * (1.0 + e.abs()) => (a, b),
        (Some(_), Some(_), Some(_)) => bail!("--alpha, --beta and --eta are inconsistent (eta = alpha - beta)"),
        _ => bail!("give two of --alpha, --beta, --eta (or --increments)"),
    };
    Ok(SelectionIncrements::from_alpha_beta(alpha, beta))
}

/// `delta:X`, `uniform`, `6x(1-x)`, `20x3(1-x)`, or `file:PATH` with two numeric columns `x p`.
pub fn initial_condition(s: &str) -> Result<InitialCondition> {
    if let Some(path) = s.strip_prefix("file:") {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {path}"))?;
        let mut points = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> =
                line.split(|c: char| c == ',' || c.is_whitespace()).filter(|c| !c.is_empty()).collect();
            let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
            match parsed.as_deref() {
                Some([x, p]) => points.push((*x, *p)),
                // A non-numeric first line is a header.
                None if points.is_empty() => continue,
                _ => bail!("{path}: expected two numeric columns, got {line:?}"),
            }
        }
        return Ok(InitialCondition::Tabulated(TabulatedDensity::new(&points)?));
    }
    let init = InitialCondition::from_name(s).ok_or_else(|| {
        anyhow!("unknown initial condition {s:?} (use delta:X, uniform, 6x(1-x), 20x3(1-x) or file:PATH)")
    })?;
    init.validate()?;
    Ok(init)
}

pub fn init_label(init: &InitialCondition) -> String {
    match init {
        InitialCondition::Delta(x) => format!("delta:{x}"),
        InitialCondition::Uniform => "uniform".into(),
        InitialCondition::Parabolic => "6x(1-x)".into(),
        InitialCondition::Skewed => "20x3(1-x)".into(),
        InitialCondition::Tabulated(_) => "tabulated".into(),
    }
}

/// Steps of size `dt` closest to the interval `every` (at least one).
pub fn steps_per(every: f64, dt: f64) -> Result<u64> {
    if !(every > 0.0) || !every.is_finite() {
        bail!("snapshot interval must be positive, got {every}");
    }
    Ok(((every / dt).round() as u64).max(1))
}
