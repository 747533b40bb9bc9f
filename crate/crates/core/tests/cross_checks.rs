use moranlab::dominance::{classify, delta_dominates_numeric, delta_dominates_numeric_scaled, Dominance};
use moranlab::drift::{asymptotic_masses, Characteristics};
use moranlab::game::{effective_increments, MixedPair, PayoffMatrix, Regime, SelectionIncrements};
use moranlab::imitation::{continuum_coefficients, ImitationKernel};
use moranlab::moran::{evolve, fixation_linear_solve, DistributionVector, MoranChain};
use moranlab::ode::rhs_mixed;
use moranlab::pde::{convergence_harness, pi_one, ContinuumState, InitialCondition, PdeParams, PdeSolver};
use moranlab::spectral::{eigen_solve, eigen_solve_on_grid, SpectralProblem};
use proptest::prelude::*;

#[test]
fn spectral_expansion_tracks_the_scheme() {
    let (alpha, beta) = (1.0, 2.0);
    let grid = 400;
    let problem = SpectralProblem::new(alpha, beta);
    let data = eigen_solve_on_grid(&problem, grid, 32).unwrap();
    let p0: Vec<f64> = data.nodes.iter().map(|&x| 6.0 * x * (1.0 - x)).collect();
    let coeffs = data.project(&problem.w_transform(&p0, &data.nodes));
    let spectral = problem.inverse_w_transform(&data.reconstruct(&coeffs, 0.1), &data.nodes);

    let params = PdeParams::from_alpha_beta(alpha, beta, grid).unwrap();
    let state = ContinuumState::new(&InitialCondition::Parabolic, grid).unwrap();
    let state = PdeSolver::new(params).evolve(state, 0.1).unwrap();
    let scheme = state.interior_density();

    let scale = scheme.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = spectral.iter().zip(&scheme).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(worst / scale < 2e-2, "relative difference {}", worst / scale);
}

#[test]
fn eigenvalues_grow_like_j_squared() {
    for (alpha, beta) in [(0.0, 0.0), (1.0, 2.0), (-5.0, 3.0)] {
        let l = eigen_solve(&SpectralProblem::new(alpha, beta), 17).unwrap().eigenvalues;
        let (r8, r16) = (l[8] / 64.0, l[16] / 256.0);
        assert!((r8 - r16).abs() / r16 < 0.2, "({alpha},{beta}): {r8} vs {r16}");
    }
}

#[test]
fn neutral_eigenvalues_match_exact_values() {
    let l = eigen_solve(&SpectralProblem::new(0.0, 0.0), 4).unwrap().eigenvalues;
    for (j, v) in l.iter().enumerate() {
        let exact = ((j + 1) * (j + 2)) as f64;
        assert!((v - exact).abs() < 1e-6 * exact, "{j}: {v}");
    }
}

#[test]
fn smooth_initial_density_fixes_with_pi_one() {
    let s = SelectionIncrements::from_alpha_beta(1.0, -2.0);
    for init in [InitialCondition::Skewed, InitialCondition::Parabolic, InitialCondition::Uniform] {
        let target = pi_one(&PdeParams::new(s, 100).unwrap(), &init).unwrap();
        let rows = convergence_harness(&s, &init, 500.0, &[100, 200]).unwrap();
        assert!(rows[1].fixation_error < rows[0].fixation_error);
        assert!((rows[1].b - target).abs() < 5e-3);
        assert!(rows[1].residuals.discrete_psi < 1e-10);
        assert!(rows[1].residuals.mass < 1e-10);
    }
}

#[test]
fn general_initial_distribution_absorbs_with_weighted_fixation() {
    let chain = MoranChain::death_birth(30, PayoffMatrix::new(1.2, 0.8, 1.0, 1.1).unwrap()).unwrap();
    let f = fixation_linear_solve(&chain).unwrap();
    let raw: Vec<f64> = (0..=30).map(|k| ((k * 7) % 11) as f64 + 0.5).collect();
    let total: f64 = raw.iter().sum();
    let p0 = DistributionVector::new(raw.iter().map(|v| v / total).collect()).unwrap();
    let want = p0.inner(f.values());
    let end = evolve(&chain, &p0, 200_000);
    assert!(end.interior_mass() < 1e-12);
    assert!((end.probs()[30] - want).abs() < 1e-10);
}

#[test]
fn characteristics_split_a_smooth_density() {
    let p = PayoffMatrix::new(3.0, 1.0, 1.0, 2.0).unwrap();
    for init in [InitialCondition::Parabolic, InitialCondition::Skewed] {
        let want = asymptotic_masses(&p, &init).unwrap();
        let mut c = Characteristics::new(p, &init, 4000).unwrap();
        c.advance(0.05, 2000);
        let (z, s, o) = c.nearest_masses();
        assert!((z - want.pi_zero).abs() < 1e-3);
        assert!((o - want.pi_one).abs() < 1e-3);
        assert!(s < 1e-3);
    }
}

#[test]
fn kernel_speed_does_not_change_sign_definite_verdicts() {
    for regime in
        [Regime::PositiveAlphaLeads, Regime::NegativeAlphaLeads, Regime::NegativeBetaLeads, Regime::PositiveBetaLeads]
    {
        let (alpha, beta) = regime.sample();
        let s = SelectionIncrements::from_alpha_beta(alpha, beta);
        let kernel = ImitationKernel::fermi(0.3, 0.6).unwrap();
        let kappa = continuum_coefficients(&kernel, &s).unwrap().kappa();
        for (q1, q2) in [(0.1, 0.7), (0.8, 0.2), (0.45, 0.55)] {
            let table = classify(&s, q1, q2).unwrap().verdict;
            let scaled = delta_dominates_numeric_scaled(&s, q1, q2, kappa).unwrap().verdict;
            assert_eq!(table, scaled, "{regime:?} {q1} {q2}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // When the q1 share shrinks everywhere under the replicator flow of the
    // contest, q2 dominates; and symmetrically.
    #[test]
    fn one_signed_contest_flow_decides_dominance(
        inc in prop::array::uniform4(-4.0f64..4.0),
        q1 in 0.0f64..=1.0,
        q2 in 0.0f64..=1.0,
    ) {
        let s = SelectionIncrements::new(inc[0], inc[1], inc[2], inc[3]);
        let q = MixedPair::new(q1, q2).unwrap();
        let e = effective_increments(&s, &q);
        prop_assume!(e.alpha.abs() > 0.05 && e.beta.abs() > 0.05);
        prop_assume!(e.alpha.signum() == e.beta.signum());
        let shrinking = (1..20).all(|k| rhs_mixed(&s, &q, k as f64 / 20.0) < 0.0);
        let verdict = delta_dominates_numeric(&s, q1, q2).unwrap().verdict;
        let expected = if shrinking { Dominance::SecondDominates } else { Dominance::FirstDominates };
        prop_assert_eq!(verdict, expected);
    }
}
