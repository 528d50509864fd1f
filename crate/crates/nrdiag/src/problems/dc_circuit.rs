//! Constant-power source feeding a diode in series with `N` resistors.
//!
//! Unknowns `[i, v_d, v, v_1..v_N]`. The resistor voltages enter linearly, so
//! `w = [i, v_d, v]` and only the diode and source equations are nonlinear.

use crate::linops::Mat;
use crate::model::{EvalFailure, SystemModel};

use super::{ProblemCase, ProblemError};

#[derive(Debug, Clone, PartialEq)]
pub struct DcCircuitParams {
    /// Diode saturation current.
    pub i_s: f64,
    /// Thermal voltage.
    pub v_t: f64,
    /// Source power.
    pub power: f64,
    pub resistance: f64,
    pub n: usize,
}

impl Default for DcCircuitParams {
    fn default() -> Self {
        Self { i_s: 6.9144e-13, v_t: 0.025, power: 10.7, resistance: 1.0, n: 10 }
    }
}

/// `(i, v_d, v)` for presets `#1`..`#5`; resistor voltages start at zero.
pub const PRESETS: [[f64; 3]; 5] =
    [[0.99999, 0.699993, 10.699893], [0.99, 0.693, 10.593], [0.9, 0.63, 9.63], [0.8, 0.56, 8.56], [0.25, 0.693, 2.675]];

fn residual(p: &DcCircuitParams, x: &[f64]) -> Result<Vec<f64>, EvalFailure> {
    let (i, v_d, v) = (x[0], x[1], x[2]);
    let e = (v_d / p.v_t).exp();
    if !e.is_finite() {
        return Err(EvalFailure::non_finite(0));
    }
    let resistors = &x[3..];
    let mut f = Vec::with_capacity(p.n + 3);
    f.push(i - p.i_s * (e - 1.0));
    f.push(v * i - p.power);
    f.push(v - resistors.iter().sum::<f64>() - v_d);
    f.extend(resistors.iter().map(|v_k| v_k - p.resistance * i));
    Ok(f)
}

fn jacobian(p: &DcCircuitParams, x: &[f64]) -> Mat {
    let m = p.n + 3;
    let (i, v_d, v) = (x[0], x[1], x[2]);
    let mut j = Mat::zeros(m, m);
    j[(0, 0)] = 1.0;
    j[(0, 1)] = -p.i_s / p.v_t * (v_d / p.v_t).exp();
    j[(1, 0)] = v;
    j[(1, 2)] = i;
    j[(2, 1)] = -1.0;
    j[(2, 2)] = 1.0;
    for k in 0..p.n {
        j[(2, 3 + k)] = -1.0;
        j[(3 + k, 0)] = -p.resistance;
        j[(3 + k, 3 + k)] = 1.0;
    }
    j
}

fn hessian(p: &DcCircuitParams, eq: usize, x: &[f64]) -> Vec<(usize, usize, f64)> {
    match eq {
        0 => vec![(1, 1, -p.i_s / (p.v_t * p.v_t) * (x[1] / p.v_t).exp())],
        1 => vec![(0, 2, 1.0), (2, 0, 1.0)],
        _ => Vec::new(),
    }
}

pub fn dc_circuit(params: &DcCircuitParams) -> Result<ProblemCase, ProblemError> {
    let p = params.clone();
    if !(p.i_s > 0.0 && p.v_t > 0.0 && p.power > 0.0 && p.resistance > 0.0) || p.n == 0 {
        return Err(ProblemError::InvalidParams("all DC parameters must be positive".into()));
    }
    let m = p.n + 3;
    let mut var_names: Vec<String> = ["i", "v_d", "v"].map(String::from).to_vec();
    var_names.extend((1..=p.n).map(|k| format!("v_{k}")));
    let mut eq_names: Vec<String> = ["diode", "source_power", "kvl"].map(String::from).to_vec();
    eq_names.extend((1..=p.n).map(|k| format!("resistor_{k}")));

    let (pr, pj, ph) = (p.clone(), p.clone(), p.clone());
    let model = SystemModel::new(m, move |x: &[f64]| residual(&pr, x))
        .with_jacobian(move |x: &[f64]| Ok(jacobian(&pj, x)))
        .with_hessian(move |i: usize, x: &[f64]| hessian(&ph, i, x))
        .with_partition(vec![0, 1, 2], vec![0, 1])?
        .with_names(var_names, eq_names)?;

    let i_exact = p.power / (0.7 + p.n as f64 * p.resistance);
    let mut exact = vec![i_exact, 0.7, p.power / i_exact];
    exact.extend(std::iter::repeat_n(p.resistance * i_exact, p.n));
    let presets = PRESETS
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let mut x = w.to_vec();
            x.resize(m, 0.0);
            (format!("#{}", k + 1), x)
        })
        .collect();
    Ok(ProblemCase { name: "dc".into(), model, presets, exact_solution: Some(exact.clone()), reference: exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::norm_inf;

    #[test]
    fn exact_solution_nearly_solves() {
        let case = dc_circuit(&DcCircuitParams::default()).unwrap();
        let exact = case.exact_solution.clone().unwrap();
        assert_eq!(&exact[..3], &[1.0, 0.7, 10.7]);
        assert!(exact[3..].iter().all(|v| *v == 1.0));
        assert!(norm_inf(&case.model.eval(&exact).unwrap()) <= 1e-4);
    }

    #[test]
    fn presets_start_resistors_at_zero() {
        let case = dc_circuit(&DcCircuitParams::default()).unwrap();
        let x = case.preset("#2").unwrap();
        assert_eq!(&x[..3], &[0.99, 0.693, 10.593]);
        assert!(x[3..].iter().all(|v| *v == 0.0));
        assert_eq!((case.model.m(), case.model.q(), case.model.p()), (13, 3, 2));
    }

    #[test]
    fn diode_curvature_matches_closed_form() {
        let p = DcCircuitParams::default();
        let case = dc_circuit(&p).unwrap();
        let mut x = case.exact_solution.clone().unwrap();
        x[1] = 0.63;
        let h = crate::linops::fd_hessian(|v: &[f64]| case.model.eval(v).map(|f| f[0]), &x).unwrap();
        let exact = -p.i_s / (p.v_t * p.v_t) * (0.63 / p.v_t).exp();
        assert!((h[(1, 1)] - exact).abs() <= 1e-4 * exact.abs());
    }
}
