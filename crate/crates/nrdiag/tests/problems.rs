mod common;

use std::collections::BTreeSet;

use common::{case, rng};
use nrdiag::linops::norm_inf;
use nrdiag::problems::{self, ac_grid, infinite_grid_guess, perturb_preset, AcGridParams, Override, ProblemError};
use rand::Rng;

/// 1-based (i, j, k) triplets with a nonzero analytic Hessian entry at any of
/// the sample points.
fn hessian_pattern(spec: &str, samples: &[Vec<f64>]) -> BTreeSet<(usize, usize, usize)> {
    let c = case(spec);
    let mut out = BTreeSet::new();
    for x in samples {
        for i in 0..c.model.m() {
            for (j, k, v) in c.model.hessian_at(i, x).unwrap() {
                if v != 0.0 {
                    out.insert((i + 1, j + 1, k + 1));
                }
            }
        }
    }
    out
}

fn presets(spec: &str) -> Vec<Vec<f64>> {
    case(spec).presets.into_iter().map(|(_, x)| x).collect()
}

#[test]
fn heat_exchanger_hessian_pattern() {
    let want: BTreeSet<_> =
        [(1, 6, 6), (2, 1, 1), (3, 2, 5), (3, 5, 2), (3, 5, 5), (4, 1, 3), (4, 3, 1), (5, 3, 4), (5, 4, 3), (6, 1, 1)]
            .into();
    let samples: Vec<Vec<f64>> = presets("hex").into_iter().filter(|x| x[5] < 2.201).collect();
    assert_eq!(hessian_pattern("hex", &samples), want);
}

#[test]
fn dc_hessian_pattern() {
    let want: BTreeSet<_> = [(1, 2, 2), (2, 1, 3), (2, 3, 1)].into();
    assert_eq!(hessian_pattern("dc", &presets("dc")), want);
}

#[test]
fn analytic_hessians_agree_with_fd() {
    let mut r = rng(17);
    for spec in ["hex", "dc", "ac(4,1.0)"] {
        let c = case(spec);
        let samples: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let spread = if spec == "hex" { 2e-4 } else { 0.05 };
                c.reference.iter().map(|&v| v + spread * v.abs().max(0.1) * r.random_range(-1.0..1.0)).collect()
            })
            .collect();
        for check in nrdiag::model::verify_derivatives(&c.model, &samples) {
            assert!(check.passed, "{spec}: {} {:?}", check.name, check.offenders);
        }
    }
}

#[test]
fn exact_solutions_solve_their_systems() {
    let hex = case("hex");
    assert!(norm_inf(&hex.model.eval(hex.exact_solution.as_ref().unwrap()).unwrap()) <= 1e-12);
    let dc = case("dc");
    assert!(norm_inf(&dc.model.eval(dc.exact_solution.as_ref().unwrap()).unwrap()) <= 1e-4);
}

#[test]
fn builtin_presets() {
    assert_eq!(case("hex").preset("#3").unwrap()[5], 2.178);
    let dc = case("dc");
    assert_eq!(&dc.preset("#2").unwrap()[..3], &[0.99, 0.693, 10.593]);
    assert!(dc.presets.iter().all(|(_, x)| x[3..].iter().all(|v| *v == 0.0)));
    assert_eq!(case("hex").presets.len(), 6);
    assert_eq!(dc.presets.len(), 5);
}

#[test]
fn ac_dimensions() {
    for n in [2, 4, 20] {
        let c = ac_grid(&AcGridParams { n, ..Default::default() }).unwrap();
        assert_eq!(c.model.m(), 8 * n * n - 4 * n);
        assert_eq!(c.model.p(), 2 * n * n - 2);
        assert_eq!(c.model.m() - c.model.p(), 6 * n * n - 4 * n + 2);
    }
    assert!(matches!(ac_grid(&AcGridParams { n: 3, ..Default::default() }), Err(ProblemError::InvalidParams(_))));
    assert!(matches!(ac_grid(&AcGridParams { x: 0.0, ..Default::default() }), Err(ProblemError::InvalidParams(_))));
}

#[test]
fn ac_slack_at_grid_centre() {
    let c = ac_grid(&AcGridParams { n: 4, ..Default::default() }).unwrap();
    let names = c.model.eq_names();
    assert!(!names.iter().any(|n| n.ends_with("_2_2") && (n.starts_with("gen") || n.starts_with("load"))));
    let z: Vec<&str> = c.model.z_indices().iter().map(|&j| c.model.var_names()[j].as_str()).collect();
    assert!(z.contains(&"v_2_2_re") && z.contains(&"v_2_2_im") && z.contains(&"in_2_2_re"));
}

#[test]
fn infinite_grid_guess_limits() {
    let g = infinite_grid_guess(&AcGridParams { n: 2, x: 1e-12, p: 1.0 });
    // v_1_1 is a generator, v_2_1 a load.
    assert!((g[0] - 1.0).abs() < 1e-12 && (g[2] - 1.0).abs() < 1e-12);
    for x in [0.1, 0.4, 1.0, 2.5] {
        let params = AcGridParams { n: 4, x, p: 1.0 };
        let c = ac_grid(&params).unwrap();
        let g = infinite_grid_guess(&params);
        let j = c.model.var_index("v_2_1_re").unwrap();
        assert!(((g[j].powi(2) + g[j + 1].powi(2)).sqrt() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn ac_guess_residual_only_at_boundary_current_balance() {
    let params = AcGridParams { n: 8, x: 0.4, p: 1.0 };
    let c = ac_grid(&params).unwrap();
    let f = c.model.eval(&infinite_grid_guess(&params)).unwrap();
    let mut boundary = 0;
    for (i, name) in c.model.eq_names().iter().enumerate() {
        let node = problems::ac_grid::node_of(name);
        let on_edge = node.is_some_and(|(a, b)| a == 1 || b == 1 || a == params.n || b == params.n);
        if name.starts_with("kcl") && on_edge {
            boundary += usize::from(f[i].abs() > 1e-10);
        } else {
            assert!(f[i].abs() <= 1e-10, "{name}: {}", f[i]);
        }
    }
    assert!(boundary > 0);
}

#[test]
fn ac_test_presets_follow_protocol() {
    let c = case("ac");
    assert_eq!(c.presets.len(), 11);
    let j = c.model.var_index("in_5_1_re").unwrap();
    let t2 = c.preset("test2").unwrap();
    assert!((t2[j] - 0.1 * c.reference[j]).abs() < 1e-15);
    let built = perturb_preset(&c, &c.reference, &[("in_5_1".into(), Override::Scale(0.1))]).unwrap();
    assert_eq!(built, t2);
    assert_eq!(perturb_preset(&c, &c.reference, &[]).unwrap(), c.reference);

    let t7 = c.preset("test7").unwrap();
    let v = c.model.var_index("v_5_1_re").unwrap();
    assert!((t7[v] - 0.5 * c.reference[v]).abs() < 1e-15);
    let j = c.model.var_index("v_13_17_re").unwrap();
    assert!((t7[j] - 0.1 * c.reference[j]).abs() < 1e-15);
    let t8 = c.preset("test8").unwrap();
    let j = c.model.var_index("v_12_20_re").unwrap();
    assert!((t8[j] - 0.8 * c.reference[j]).abs() < 1e-15);
    assert!(matches!(
        perturb_preset(&c, &c.reference, &[("v_99_1".into(), Override::Scale(0.1))]),
        Err(ProblemError::UnknownVariable(_))
    ));
}

#[test]
fn lookup_vocabulary() {
    for spec in ["hex#1", "hex#6", "dc#1", "dc#5", "ac-test1", "ac-test11", "ac#test3", "ac(4,0.4)", "ac(4,0.4)#test1"]
    {
        assert!(problems::lookup(spec).is_ok(), "{spec}");
    }
    assert!(problems::lookup("ac(3,0.4)").is_err());
    assert!(problems::lookup("dc#6").is_err());
}
