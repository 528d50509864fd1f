//! Heat exchanger fed through a shut-off valve and a control valve.
//!
//! Unknowns `[f, k_v, T_o, γ, p_o, p_i]`: mass flow, control-valve opening,
//! outlet temperature, heat transfer coefficient, outlet and inlet pressure.
//! Every variable enters the Jacobian, so `w` is the whole vector.

use crate::linops::Mat;
use crate::model::{EvalFailure, SystemModel};

use super::{ProblemCase, ProblemError};

#[derive(Debug, Clone, PartialEq)]
pub struct HeatExchangerParams {
    pub p_s: f64,
    pub p_d: f64,
    pub k_p: f64,
    pub k_h: f64,
    pub c: f64,
    pub f_0: f64,
    pub gamma_0: f64,
    pub nu: f64,
    pub t_s: f64,
    pub t_a: f64,
    pub q: f64,
    pub a: f64,
}

impl Default for HeatExchangerParams {
    fn default() -> Self {
        Self {
            p_s: 2.201,
            p_d: 1.0,
            k_p: 1000f64.sqrt(),
            k_h: 0.2,
            c: 1.0,
            f_0: 1.0,
            gamma_0: 1.0,
            nu: 0.8,
            t_s: 0.0,
            t_a: 6.0,
            q: 4.0,
            a: 1.0,
        }
    }
}

pub const VAR_NAMES: [&str; 6] = ["f", "k_v", "T_o", "gamma", "p_o", "p_i"];
pub const EQ_NAMES: [&str; 6] =
    ["inlet_valve", "exchanger_pressure_drop", "control_valve", "fluid_energy", "heat_transfer", "htc_law"];

/// Initial guesses, one per preset `#1`..`#6`.
pub const PRESETS: [[f64; 6]; 6] = [
    [0.99999, 0.99999, 3.99996, 0.99999, 1.99998, 2.19998],
    [0.999, 0.999, 3.996, 0.999, 1.998, 2.198],
    [0.99, 0.99, 3.96, 0.99, 1.98, 2.178],
    [0.9, 0.9, 3.6, 0.9, 1.8, 1.98],
    [0.9, 0.9, 3.6, 0.9, 1.8, 2.151],
    [3.0, 0.999, 3.996, 0.999, 1.998, 2.198],
];

pub const EXACT: [f64; 6] = [1.0, 1.0, 4.0, 1.0, 2.0, 2.2];

fn residual(p: &HeatExchangerParams, x: &[f64]) -> Result<Vec<f64>, EvalFailure> {
    let [f, k_v, t_o, g, p_o, p_i] = [x[0], x[1], x[2], x[3], x[4], x[5]];
    if p.p_s - p_i < 0.0 {
        return Err(EvalFailure::domain(0));
    }
    if p_o - p.p_d < 0.0 {
        return Err(EvalFailure::domain(2));
    }
    if f / p.f_0 < 0.0 {
        return Err(EvalFailure::domain(5));
    }
    Ok(vec![
        f - p.k_p * (p.p_s - p_i).sqrt(),
        p_i - p_o - p.k_h * f * f,
        f - k_v * (p_o - p.p_d).sqrt(),
        p.q - f * p.c * (t_o - p.t_s),
        p.q - g * p.a * (p.t_a - (p.t_s + t_o) / 2.0),
        g - p.gamma_0 * (f / p.f_0).powf(p.nu),
    ])
}

fn jacobian(p: &HeatExchangerParams, x: &[f64]) -> Mat {
    let [f, k_v, t_o, g, p_o, p_i] = [x[0], x[1], x[2], x[3], x[4], x[5]];
    let sq_in = (p.p_s - p_i).sqrt();
    let sq_out = (p_o - p.p_d).sqrt();
    let mut j = Mat::zeros(6, 6);
    j[(0, 0)] = 1.0;
    j[(0, 5)] = p.k_p / (2.0 * sq_in);
    j[(1, 0)] = -2.0 * p.k_h * f;
    j[(1, 4)] = -1.0;
    j[(1, 5)] = 1.0;
    j[(2, 0)] = 1.0;
    j[(2, 1)] = -sq_out;
    j[(2, 4)] = -k_v / (2.0 * sq_out);
    j[(3, 0)] = -p.c * (t_o - p.t_s);
    j[(3, 2)] = -f * p.c;
    j[(4, 2)] = g * p.a / 2.0;
    j[(4, 3)] = -p.a * (p.t_a - (p.t_s + t_o) / 2.0);
    j[(5, 0)] = -p.gamma_0 * p.nu * (f / p.f_0).powf(p.nu - 1.0) / p.f_0;
    j[(5, 3)] = 1.0;
    j
}

fn hessian(p: &HeatExchangerParams, i: usize, x: &[f64]) -> Vec<(usize, usize, f64)> {
    let [f, k_v, p_o, p_i] = [x[0], x[1], x[4], x[5]];
    match i {
        0 => vec![(5, 5, p.k_p / 4.0 * (p.p_s - p_i).powf(-1.5))],
        1 => vec![(0, 0, -2.0 * p.k_h)],
        2 => {
            let mixed = -1.0 / (2.0 * (p_o - p.p_d).sqrt());
            vec![(1, 4, mixed), (4, 1, mixed), (4, 4, k_v / 4.0 * (p_o - p.p_d).powf(-1.5))]
        }
        3 => vec![(0, 2, -p.c), (2, 0, -p.c)],
        4 => vec![(2, 3, p.a / 2.0), (3, 2, p.a / 2.0)],
        5 => vec![(0, 0, -p.gamma_0 * p.nu * (p.nu - 1.0) * (f / p.f_0).powf(p.nu - 2.0) / (p.f_0 * p.f_0))],
        _ => Vec::new(),
    }
}

pub fn heat_exchanger(params: &HeatExchangerParams) -> Result<ProblemCase, ProblemError> {
    let p = params.clone();
    if !(p.p_s > p.p_d) {
        return Err(ProblemError::InvalidParams("p_s must exceed p_d".into()));
    }
    if !(p.k_p > 0.0 && p.k_h > 0.0 && p.c > 0.0 && p.a > 0.0 && p.f_0 > 0.0) {
        return Err(ProblemError::InvalidParams("k_p, k_h, c, A and f_0 must be positive".into()));
    }
    let (pr, pj, ph) = (p.clone(), p.clone(), p);
    let model = SystemModel::new(6, move |x: &[f64]| residual(&pr, x))
        .with_jacobian(move |x: &[f64]| Ok(jacobian(&pj, x)))
        .with_hessian(move |i: usize, x: &[f64]| hessian(&ph, i, x))
        .with_names(VAR_NAMES.map(String::from).to_vec(), EQ_NAMES.map(String::from).to_vec())?;
    Ok(ProblemCase {
        name: "hex".into(),
        model,
        presets: PRESETS.iter().enumerate().map(|(k, x)| (format!("#{}", k + 1), x.to_vec())).collect(),
        exact_solution: Some(EXACT.to_vec()),
        reference: EXACT.to_vec(),
    })
}
