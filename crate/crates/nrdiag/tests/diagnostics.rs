mod common;

use common::{case, opts, rng, start};
use nrdiag::diagnostics::{
    compute_alpha, compute_gamma, compute_sigma, diagnose, nonlinear_residual, sigma_fd_oracle, Direction,
    IndicatorKind,
};
use nrdiag::linops::{norm_inf, Mat};
use nrdiag::problems::ProblemCase;
use nrdiag::solver::{first_step_damped, newton_solve, FirstStepResult};
use nrdiag::SystemModel;
use rand::Rng;

fn step(spec: &str) -> (ProblemCase, FirstStepResult) {
    let (c, x0) = start(spec);
    let s = first_step_damped(&c.model, &x0, &opts()).unwrap();
    (c, s)
}

fn within(value: f64, target: f64, rel: f64, abs: f64) -> bool {
    (value - target).abs() <= abs.max(rel * target.abs())
}

/// 1-based (i, j, k) lookup.
fn gamma(c: &ProblemCase, s: &FirstStepResult, i: usize, j: usize, k: usize) -> f64 {
    compute_gamma(&c.model, s).unwrap().get(i - 1, j - 1, k - 1).unwrap_or(0.0)
}

#[test]
fn residual_vanishes_at_exact_solution() {
    let c = case("hex");
    let x = c.exact_solution.clone().unwrap();
    let x1 = nrdiag::solver::newton_step(&c.model, &x).unwrap();
    assert!(nonlinear_residual(&c.model, &x, &x1).unwrap().inf_norm <= 1e-10);
}

#[test]
fn residual_formulas_agree_on_hex_case_two() {
    let (c, s) = step("hex#2");
    let r = nonlinear_residual(&c.model, &s.x0, &s.x1).unwrap();
    // The heat exchanger has no z variables, so f(x0) + f_z (z1 - z0) = f(x0).
    for (a, b) in r.r.iter().zip(&s.f_x0) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-12));
    }
    assert_eq!(r.inf_norm, norm_inf(&r.r));
}

#[test]
fn residual_formulas_agree_on_dc() {
    let (c, s) = step("dc#3");
    let r = nonlinear_residual(&c.model, &s.x0, &s.x1).unwrap();
    let z = c.model.z_indices();
    for i in 0..c.model.m() {
        let alt = s.f_x0[i] + z.iter().map(|&j| s.jacobian_at_x0[(i, j)] * (s.x1[j] - s.x0[j])).sum::<f64>();
        assert!((r.r[i] - alt).abs() <= 1e-9 * alt.abs().max(1.0), "{i}");
    }
}

#[test]
fn hex_case_two_alpha() {
    let (c, s) = step("hex#2");
    let a = compute_alpha(&c.model, &s).unwrap();
    assert!(within(a.get(0).unwrap(), 0.224, 0.0, 0.01));
    for eq in [1, 3, 4] {
        assert!(a.get(eq).unwrap() <= 1e-9, "alpha_{}", eq + 1);
    }
}

#[test]
fn hex_case_three_damped_alpha() {
    let (c, s) = step("hex#3");
    assert!((s.lambda - 0.49).abs() < 1e-12);
    assert!(within(compute_alpha(&c.model, &s).unwrap().get(0).unwrap(), 0.678, 0.0, 0.02));
}

#[test]
fn dc_case_three_alpha_and_sigma() {
    let (c, s) = step("dc#3");
    assert!(within(compute_alpha(&c.model, &s).unwrap().get(0).unwrap(), 1.31e5, 0.05, 0.0));
    let sigma = compute_sigma(&c.model, &s).unwrap();
    assert!(within(sigma.diag(1).unwrap(), -14.993, 0.0, 0.1));
}

#[test]
fn gamma_spot_values() {
    let (c, s) = step("hex#2");
    assert!(within(gamma(&c, &s, 1, 6, 6), 0.211, 0.0, 0.01));
    let (c, s) = step("dc#5");
    assert!(within(gamma(&c, &s, 2, 1, 3), 0.958, 0.0, 0.02));
    assert_eq!(gamma(&c, &s, 2, 1, 3), gamma(&c, &s, 2, 3, 1));
    let g = compute_gamma(&c.model, &s).unwrap();
    assert!(g.entries.iter().all(|e| c.model.is_nonlinear_eq(e.eq)));
}

#[test]
fn hex_case_two_sigma() {
    let (c, s) = step("hex#2");
    assert!(within(compute_sigma(&c.model, &s).unwrap().diag(5).unwrap(), -0.423, 0.0, 0.01));
}

#[test]
fn quadratic_equations_have_negligible_alpha() {
    for spec in ["hex#2", "hex#4", "dc#2", "dc#5", "ac(4,1.0)#test1"] {
        let (c, s) = step(spec);
        let a = compute_alpha(&c.model, &s).unwrap();
        let r = nonlinear_residual(&c.model, &s.x0, &s.x1).unwrap().inf_norm;
        let bound = 1e-6 * (1.0 + norm_inf(&s.f_x1_star) / r);
        let names = c.model.eq_names();
        for e in &a.entries {
            let n = &names[e.eq];
            let quadratic =
                matches!(n.as_str(), "exchanger_pressure_drop" | "fluid_energy" | "heat_transfer" | "source_power")
                    || n.starts_with("gen_p")
                    || n.starts_with("load_");
            if quadratic {
                assert!(e.value <= bound, "{spec} {n}: {}", e.value);
            }
        }
    }
}

#[test]
fn sigma_matches_fd_oracle() {
    let specs = ["hex#1", "hex#2", "hex#3", "hex#4", "hex#5", "hex#6", "dc#1", "dc#2", "dc#3", "ac(4,1.0)#test1"];
    for spec in specs {
        let (c, s) = step(spec);
        let analytic = compute_sigma(&c.model, &s).unwrap().full();
        let oracle = sigma_fd_oracle(&c.model, &s.x0, &opts()).unwrap();
        for i in 0..c.model.m() {
            for j in 0..c.model.m() {
                let (a, b) = (analytic[(i, j)], oracle[(i, j)]);
                assert!((a - b).abs() <= 1e-3f64.max(1e-3 * a.abs()), "{spec} ({i},{j}): {a} vs {b}");
            }
        }
        for &j in c.model.z_indices() {
            for i in 0..c.model.m() {
                assert!(oracle[(i, j)].abs() <= 1e-7, "{spec} z column {j}");
            }
        }
    }
}

fn refined_exact(c: &ProblemCase) -> Vec<f64> {
    let r = newton_solve(&c.model, c.exact_solution.as_ref().unwrap(), &opts());
    assert!(r.converged());
    r.x_final
}

#[test]
fn sigma_vanishes_at_exact_solutions() {
    for spec in ["hex", "dc"] {
        let c = case(spec);
        let x = refined_exact(&c);
        let s = first_step_damped(&c.model, &x, &opts()).unwrap();
        let sigma = compute_sigma(&c.model, &s).unwrap();
        assert!(sigma.full().norm_inf() <= 1e-6, "{spec}");
        assert!(sigma.sigma_diag.iter().all(|(_, v)| v.abs() <= 1e-8));
        let oracle = sigma_fd_oracle(&c.model, &x, &opts()).unwrap();
        assert!(oracle.norm_inf() <= 1e-6, "{spec} oracle");
    }
}

#[test]
fn exact_start_has_no_critical_suspects() {
    for spec in ["hex", "dc"] {
        let c = case(spec);
        let d = diagnose(&c.model, &refined_exact(&c), &opts(), 1.0).unwrap();
        assert!(d.rankings.suspects.iter().all(|s| !s.critical && s.score <= 1e-6), "{spec}");
    }
}

#[test]
fn hex_case_four_points_at_inlet_pressure() {
    let (c, x0) = start("hex#4");
    let d = diagnose(&c.model, &x0, &opts(), 1.0).unwrap();
    let top = &d.rankings.suspects[0];
    assert_eq!(c.model.var_names()[top.var], "p_i");
    assert!(top.critical);
    assert_eq!(top.direction, Direction::Increase);
    let values: Vec<(IndicatorKind, f64)> = top.evidence.iter().map(|e| (e.kind, e.value)).collect();
    let get = |k| values.iter().find(|(kind, _)| *kind == k).unwrap().1;
    assert!(within(get(IndicatorKind::Alpha), 1.316, 0.05, 0.005));
    assert!(within(get(IndicatorKind::Gamma), 0.463, 0.10, 0.005));
    assert!(within(get(IndicatorKind::Sigma), 0.933, 0.0, 0.01));
}

#[test]
fn hex_case_six_top_gamma_points_at_flow() {
    let (c, x0) = start("hex#6");
    let d = diagnose(&c.model, &x0, &opts(), 1.0).unwrap();
    let g = &d.rankings.gamma[0];
    assert_eq!((g.eq, g.var_j, g.var_k), (Some(1), Some(0), Some(0)));
}

#[test]
fn dc_case_four_points_at_diode_voltage() {
    let (c, x0) = start("dc#4");
    let d = diagnose(&c.model, &x0, &opts(), 1.0).unwrap();
    assert_eq!(c.model.var_names()[d.rankings.suspects[0].var], "v_d");
    assert!(d.alpha.get(0).unwrap() >= 1e80);
    assert!(within(d.gamma.get(0, 1, 1).unwrap(), 21.116, 0.05, 0.005));
    assert!(within(d.sigma.diag(1).unwrap().abs(), 158.105, 0.01, 0.0));
}

#[test]
fn sufficient_condition_values() {
    let (c, x0) = start("hex#2");
    let d = diagnose(&c.model, &x0, &opts(), 1.0).unwrap();
    assert!(within(d.sufficient.alpha_plus_beta, 0.435, 0.0, 0.005));
    assert!(d.sufficient.bound_applies && d.sufficient.holds);
    let (c, x0) = start("dc#2");
    let d = diagnose(&c.model, &x0, &opts(), 1.0).unwrap();
    assert!(within(d.sufficient.alpha_plus_beta, 0.190, 0.0, 0.005));
    assert!(d.sufficient.holds);
}

#[test]
fn linear_system_has_zero_indicators() {
    let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
    let aj = a.clone();
    let undeclared = SystemModel::new(2, move |x: &[f64]| Ok(a.mul_vec(x).iter().map(|v| v - 1.0).collect()))
        .with_jacobian(move |_: &[f64]| Ok(aj.clone()))
        .with_hessian(|_, _: &[f64]| Vec::new());
    let d = diagnose(&undeclared, &[5.0, -3.0], &opts(), 1.0).unwrap();
    assert!(d.alpha.alpha <= 1e-9);
    assert_eq!(d.gamma.beta, 0.0);
    assert!(d.norms.f_x1_star_inf <= 1e-14);
    assert!(d.sufficient.holds);

    let declared = undeclared.with_partition(Vec::new(), Vec::new()).unwrap();
    let d = diagnose(&declared, &[5.0, -3.0], &opts(), 1.0).unwrap();
    assert_eq!((d.alpha.alpha, d.gamma.beta), (0.0, 0.0));
    assert!(d.alpha.entries.is_empty());
}

/// The bound ‖f(x1)‖∞ ≤ (α+β)‖r(x0)‖∞ on one start point, when the step was undamped.
fn check_bound(label: &str, model: &SystemModel, x0: &[f64]) {
    let Ok(d) = diagnose(model, x0, &opts(), 1.0) else { return };
    if d.lambda != 1.0 || d.note.is_some() {
        return;
    }
    let lhs = d.norms.f_x1_star_inf;
    let rhs = d.sufficient.alpha_plus_beta * d.norms.r_x0_inf;
    assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-10, "{label}: {lhs} > {rhs}");
    assert!(d.sufficient.holds, "{label}");
}

#[test]
fn residual_bound_on_corpus() {
    for spec in ["hex#1", "hex#2", "dc#1", "dc#2", "dc#3", "dc#4", "dc#5", "ac(4,1.0)#test1", "ac(4,0.4)#test1"] {
        let (c, x0) = start(spec);
        check_bound(spec, &c.model, &x0);
    }
}

#[test]
fn residual_bound_on_perturbed_starts() {
    let mut r = rng(21);
    for spec in ["hex#2", "dc#2", "dc#5"] {
        let (c, x0) = start(spec);
        for t in 0..20 {
            let x: Vec<f64> = x0.iter().map(|v| v * (1.0 + 0.05 * r.random_range(-1.0..1.0))).collect();
            check_bound(&format!("{spec}/{t}"), &c.model, &x);
        }
    }
}

/// r, α and Γ depend on w0 only.
fn z0_invariance(spec: &str, seed: u64) {
    let (c, x0) = start(spec);
    let model = &c.model;
    let base = diagnose(model, &x0, &opts(), 1.0).unwrap();
    let base_r = nonlinear_residual(model, &x0, &first_step_damped(model, &x0, &opts()).unwrap().x1).unwrap();
    let mut r = rng(seed);
    for _ in 0..10 {
        let mut x = x0.clone();
        for &j in model.z_indices() {
            x[j] = r.random_range(-3.0..3.0);
        }
        let s = first_step_damped(model, &x, &opts()).unwrap();
        let res = nonlinear_residual(model, &x, &s.x1).unwrap();
        for (a, b) in base_r.r.iter().zip(&res.r) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-3), "{spec} r: {a} vs {b}");
        }
        let d = diagnose(model, &x, &opts(), 1.0).unwrap();
        for (a, b) in base.alpha.entries.iter().zip(&d.alpha.entries) {
            assert!((a.value - b.value).abs() <= 1e-9 * a.value.abs().max(1e-3), "{spec} alpha");
        }
        for (a, b) in base.gamma.entries.iter().zip(&d.gamma.entries) {
            assert!((a.value - b.value).abs() <= 1e-9 * a.value.abs().max(1e-3), "{spec} gamma");
        }
    }
}

#[test]
fn indicators_independent_of_z0_dc() {
    z0_invariance("dc#2", 4);
    z0_invariance("dc#3", 5);
}

#[test]
fn indicators_independent_of_z0_ac() {
    z0_invariance("ac(4,1.0)#test1", 6);
}
