//! First-iteration convergence indicators.
//!
//! From one Newton step out of `x0` this computes the nonlinear residual
//! `r(x0) = -f_w (w1 - w0)`, the higher-order remainder ratios `α_i`, the
//! curvature factors `Γ_ijk`, the sensitivity `Σ = ∂x1/∂x0`, and ranks the
//! w-variables that are most likely responsible for a poor initial guess.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::linops::{self, Mat};
use crate::model::SystemModel;
use crate::solver::{self, FirstStepResult, SolveOptions, SolverError};

/// Below this ‖r(x0)‖∞ the start point already solves the nonlinear part and
/// the normalized indicators are undefined.
pub const DEGENERATE_RESIDUAL: f64 = 1e-14;

/// Default score above which a suspect is flagged critical.
pub const DEFAULT_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error(
        "nonlinear residual {norm:e} is below {DEGENERATE_RESIDUAL:e}; start point already solves the nonlinear part"
    )]
    DegenerateResidual { norm: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearResidual {
    pub r: Vec<f64>,
    pub inf_norm: f64,
}

/// `r = -J[:, w] (x1 - x0)[w]`.
fn residual_from_jacobian(model: &SystemModel, jacobian: &Mat, x0: &[f64], x1: &[f64]) -> NonlinearResidual {
    let r: Vec<f64> = (0..model.m())
        .map(|i| -model.w_indices().iter().map(|&j| jacobian[(i, j)] * (x1[j] - x0[j])).sum::<f64>())
        .collect();
    let inf_norm = linops::norm_inf(&r);
    NonlinearResidual { r, inf_norm }
}

/// Nonlinear residual at `x0` for the undamped step `x1`.
pub fn nonlinear_residual(model: &SystemModel, x0: &[f64], x1: &[f64]) -> Result<NonlinearResidual, DiagnosticsError> {
    let jacobian = model.jacobian_at(x0).map_err(SolverError::from)?;
    Ok(residual_from_jacobian(model, &jacobian, x0, x1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaEntry {
    pub eq: usize,
    pub value: f64,
    /// Variables appearing nonlinearly (with a nonzero Hessian entry) in the equation.
    pub vars: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSet {
    /// One entry per nonlinear equation, in model order.
    pub entries: Vec<AlphaEntry>,
    pub alpha: f64,
    pub lambda: f64,
}

impl AlphaSet {
    pub fn get(&self, eq: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.eq == eq).map(|e| e.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEntry {
    pub eq: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    /// Both `(j, k)` and `(k, j)` are stored for off-diagonal pairs.
    pub entries: Vec<GammaEntry>,
    /// `Σ_jk Γ_ijk` per nonlinear equation.
    pub row_sums: Vec<(usize, f64)>,
    pub beta: f64,
}

impl GammaSet {
    pub fn get(&self, eq: usize, j: usize, k: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.eq == eq && e.j == j && e.k == k).map(|e| e.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    pub w_indices: Vec<usize>,
    /// The m×q block of Σ formed by its w-columns; z-columns are zero.
    pub sigma_wblock: Mat,
    /// `(j, σ_jj)` for every w-variable j.
    pub sigma_diag: Vec<(usize, f64)>,
}

impl SensitivityMatrix {
    /// Full m×m Σ with the structurally zero z-columns filled in.
    pub fn full(&self) -> Mat {
        let m = self.sigma_wblock.rows();
        let mut out = Mat::zeros(m, m);
        for i in 0..m {
            for (c, &j) in self.w_indices.iter().enumerate() {
                out[(i, j)] = self.sigma_wblock[(i, c)];
            }
        }
        out
    }

    pub fn diag(&self, j: usize) -> Option<f64> {
        self.sigma_diag.iter().find(|(v, _)| *v == j).map(|(_, s)| *s)
    }
}

/// Nonzero Hessian entries keyed by (j, k), per nonlinear equation.
type EquationHessians = Vec<(usize, BTreeMap<(usize, usize), f64>)>;

fn hessians(model: &SystemModel, x0: &[f64]) -> Result<EquationHessians, SolverError> {
    model
        .nonlinear_eqs()
        .iter()
        .map(|&i| {
            let mut h = BTreeMap::new();
            for (j, k, v) in model.hessian_at(i, x0)? {
                *h.entry((j, k)).or_insert(0.0) += v;
            }
            Ok((i, h))
        })
        .collect()
}

fn quad_form(h: &BTreeMap<(usize, usize), f64>, d: &[f64]) -> f64 {
    h.iter().map(|(&(j, k), v)| v * d[j] * d[k]).sum()
}

fn residual_norm(model: &SystemModel, step: &FirstStepResult) -> Result<f64, DiagnosticsError> {
    let norm = residual_from_jacobian(model, &step.jacobian_at_x0, &step.x0, &step.x1).inf_norm;
    if norm < DEGENERATE_RESIDUAL {
        return Err(DiagnosticsError::DegenerateResidual { norm });
    }
    Ok(norm)
}

/// `α_i = |f_i(x1*) − (1−λ) f_i(x0) − ½ d*ᵀ H_i d*| / (λ³ ‖r‖∞)` with `d* = x1* − x0`.
pub fn compute_alpha(model: &SystemModel, step: &FirstStepResult) -> Result<AlphaSet, DiagnosticsError> {
    let rn = residual_norm(model, step)?;
    let lambda = step.lambda;
    let d: Vec<f64> = step.x1_star.iter().zip(&step.x0).map(|(a, b)| a - b).collect();
    let entries: Vec<AlphaEntry> = hessians(model, &step.x0)?
        .into_iter()
        .map(|(i, h)| {
            let remainder = step.f_x1_star[i] - (1.0 - lambda) * step.f_x0[i] - 0.5 * quad_form(&h, &d);
            let mut vars: Vec<usize> = h.iter().filter(|(_, v)| **v != 0.0).flat_map(|(&(j, k), _)| [j, k]).collect();
            vars.sort_unstable();
            vars.dedup();
            AlphaEntry { eq: i, value: remainder.abs() / (lambda.powi(3) * rn), vars }
        })
        .collect();
    let alpha = entries.iter().map(|e| e.value).fold(0.0, f64::max);
    Ok(AlphaSet { entries, alpha, lambda })
}

/// `Γ_ijk = |½ H_i[j,k] d_j d_k| / ‖r‖∞` with the undamped `d = x1 − x0`.
pub fn compute_gamma(model: &SystemModel, step: &FirstStepResult) -> Result<GammaSet, DiagnosticsError> {
    let rn = residual_norm(model, step)?;
    let d = step.increment();
    let mut entries = Vec::new();
    let mut row_sums = Vec::new();
    for (i, h) in hessians(model, &step.x0)? {
        let mut sum = 0.0;
        for (&(j, k), v) in &h {
            let value = (0.5 * v * d[j] * d[k]).abs() / rn;
            sum += value;
            entries.push(GammaEntry { eq: i, j, k, value });
        }
        row_sums.push((i, sum));
    }
    let beta = row_sums.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    Ok(GammaSet { entries, row_sums, beta })
}

/// `Σ = −J⁻¹ H̃`, where row i of `H̃` is `dᵀ H_i` for nonlinear equations and
/// zero otherwise; only the w-columns are formed.
pub fn compute_sigma(model: &SystemModel, step: &FirstStepResult) -> Result<SensitivityMatrix, DiagnosticsError> {
    let m = model.m();
    let w = model.w_indices().to_vec();
    let col_of: BTreeMap<usize, usize> = w.iter().enumerate().map(|(c, &j)| (j, c)).collect();
    let d = step.increment();
    let mut h_tilde = Mat::zeros(m, w.len());
    for (i, h) in hessians(model, &step.x0)? {
        for (&(j, k), v) in &h {
            if let Some(&c) = col_of.get(&k) {
                h_tilde[(i, c)] -= d[j] * v;
            }
        }
    }
    let sigma_wblock = step.lu.solve_mat(&h_tilde);
    let sigma_diag = w.iter().enumerate().map(|(c, &j)| (j, sigma_wblock[(j, c)])).collect();
    Ok(SensitivityMatrix { w_indices: w, sigma_wblock, sigma_diag })
}

/// Finite-difference `∂x1/∂x0`: each component of `x0` is perturbed by
/// `1e-6·max(|x0_j|, 1)` and the undamped Newton step recomputed.
pub fn sigma_fd_oracle(model: &SystemModel, x0: &[f64], opts: &SolveOptions) -> Result<Mat, SolverError> {
    let m = model.m();
    let mut out = Mat::zeros(m, m);
    let mut x = x0.to_vec();
    for j in 0..m {
        let h = 1e-6 * x0[j].abs().max(1.0);
        x[j] = x0[j] + h;
        let xp = solver::newton_step_with(model, &x, opts)?;
        x[j] = x0[j] - h;
        let xm = solver::newton_step_with(model, &x, opts)?;
        x[j] = x0[j];
        for i in 0..m {
            out[(i, j)] = (xp[i] - xm[i]) / (2.0 * h);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum IndicatorKind {
    Alpha,
    Gamma,
    Sigma,
}

impl IndicatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Gamma => "gamma",
            Self::Sigma => "sigma",
        }
    }
}

/// One indicator value with the equation/variable indices it refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorEntry {
    pub kind: IndicatorKind,
    pub eq: Option<usize>,
    pub var_j: Option<usize>,
    pub var_k: Option<usize>,
    /// Non-negative magnitude used for ranking (|σ_jj| for Σ).
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increase,
    Decrease,
    Unchanged,
}

impl Direction {
    fn of(increment: f64) -> Self {
        match increment.partial_cmp(&0.0) {
            Some(Ordering::Greater) => Self::Increase,
            Some(Ordering::Less) => Self::Decrease,
            _ => Self::Unchanged,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Increase => "increase",
            Self::Decrease => "decrease",
            Self::Unchanged => "unchanged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suspect {
    pub var: usize,
    pub score: f64,
    pub critical: bool,
    /// The largest α, Γ and |σ| entries that involve the variable.
    pub evidence: Vec<IndicatorEntry>,
    pub direction: Direction,
    /// First-step increment `(w1 − w0)_j`.
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rankings {
    pub alpha: Vec<IndicatorEntry>,
    pub gamma: Vec<IndicatorEntry>,
    pub sigma: Vec<IndicatorEntry>,
    pub suspects: Vec<Suspect>,
}

/// Descending by value; NaN first (it signals breakdown), ties keep input order.
fn sort_desc(entries: &mut [IndicatorEntry]) {
    entries.sort_by(|a, b| cmp_desc(a.value, b.value));
}

fn cmp_desc(a: f64, b: f64) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => b.partial_cmp(&a).expect("non-NaN"),
    }
}

fn better(new: &IndicatorEntry, old: &Option<IndicatorEntry>) -> bool {
    old.as_ref().is_none_or(|o| cmp_desc(new.value, o.value) == Ordering::Less)
}

/// Per-family rankings and the merged suspect list. A variable's score is the
/// largest of: α_i of equations it appears in nonlinearly, Γ_ijk with j or k
/// equal to it, and |σ_jj|.
pub fn rank_indicators(
    alpha: &AlphaSet,
    gamma: &GammaSet,
    sigma: &SensitivityMatrix,
    step: &FirstStepResult,
    threshold: f64,
) -> Rankings {
    let mut alpha_rank: Vec<IndicatorEntry> = alpha
        .entries
        .iter()
        .map(|e| IndicatorEntry {
            kind: IndicatorKind::Alpha,
            eq: Some(e.eq),
            var_j: None,
            var_k: None,
            value: e.value,
        })
        .collect();
    let mut gamma_rank: Vec<IndicatorEntry> = gamma
        .entries
        .iter()
        .map(|e| IndicatorEntry {
            kind: IndicatorKind::Gamma,
            eq: Some(e.eq),
            var_j: Some(e.j),
            var_k: Some(e.k),
            value: e.value,
        })
        .collect();
    let mut sigma_rank: Vec<IndicatorEntry> = sigma
        .sigma_diag
        .iter()
        .map(|&(j, s)| IndicatorEntry {
            kind: IndicatorKind::Sigma,
            eq: None,
            var_j: Some(j),
            var_k: Some(j),
            value: s.abs(),
        })
        .collect();
    sort_desc(&mut alpha_rank);
    sort_desc(&mut gamma_rank);
    sort_desc(&mut sigma_rank);

    let d = step.increment();
    let mut best: BTreeMap<usize, [Option<IndicatorEntry>; 3]> =
        sigma.w_indices.iter().map(|&j| (j, [None, None, None])).collect();
    for e in &alpha.entries {
        let entry =
            IndicatorEntry { kind: IndicatorKind::Alpha, eq: Some(e.eq), var_j: None, var_k: None, value: e.value };
        for j in &e.vars {
            if let Some(slots) = best.get_mut(j) {
                if better(&entry, &slots[0]) {
                    slots[0] = Some(entry);
                }
            }
        }
    }
    for entry in &gamma_rank {
        for j in [entry.var_j, entry.var_k].into_iter().flatten() {
            if let Some(slots) = best.get_mut(&j) {
                if better(entry, &slots[1]) {
                    slots[1] = Some(*entry);
                }
            }
        }
    }
    for entry in &sigma_rank {
        if let Some(slots) = best.get_mut(&entry.var_j.expect("sigma entries name a variable")) {
            slots[2] = Some(*entry);
        }
    }

    let mut suspects: Vec<Suspect> = best
        .into_iter()
        .map(|(var, slots)| {
            let mut evidence: Vec<IndicatorEntry> = slots.into_iter().flatten().collect();
            sort_desc(&mut evidence);
            let score = evidence.first().map_or(0.0, |e| e.value);
            Suspect {
                var,
                score,
                critical: !(score <= threshold),
                evidence,
                direction: Direction::of(d[var]),
                increment: d[var],
            }
        })
        .collect();
    // BTreeMap iteration is by ascending index and the sort is stable, so ties
    // stay in ascending variable order.
    suspects.sort_by(|a, b| cmp_desc(a.score, b.score));

    Rankings { alpha: alpha_rank, gamma: gamma_rank, sigma: sigma_rank, suspects }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientCondition {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_plus_beta: f64,
    /// `Σ_jk Γ_ijk ≤ β` for every nonlinear equation.
    pub row_sums_bounded: bool,
    /// The bound on ‖f(x1)‖∞ is only asserted for an undamped first step.
    pub bound_applies: bool,
    pub f_x1_inf: f64,
    pub bound: f64,
    /// `‖f(x1)‖∞ ≤ (α+β)‖r(x0)‖∞` (always false when the bound does not apply).
    pub holds: bool,
}

/// Checks the sufficient condition bound `‖f(x1)‖∞ ≤ (α+β)‖r(x0)‖∞`.
pub fn sufficient_condition_check(alpha: &AlphaSet, gamma: &GammaSet, norms: &Norms) -> SufficientCondition {
    let row_sums_bounded = gamma.row_sums.iter().all(|(_, s)| *s <= gamma.beta);
    let alpha_plus_beta = alpha.alpha + gamma.beta;
    let bound = alpha_plus_beta * norms.r_x0_inf;
    let bound_applies = alpha.lambda == 1.0;
    let holds = bound_applies && norms.f_x1_star_inf <= bound * (1.0 + 1e-9) + 1e-10;
    SufficientCondition {
        alpha: alpha.alpha,
        beta: gamma.beta,
        alpha_plus_beta,
        row_sums_bounded,
        bound_applies,
        f_x1_inf: norms.f_x1_star_inf,
        bound,
        holds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub f_x0_inf: f64,
    pub r_x0_inf: f64,
    pub f_x1_star_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub lambda: f64,
    pub norms: Norms,
    pub alpha: AlphaSet,
    pub gamma: GammaSet,
    pub sigma: SensitivityMatrix,
    pub sufficient: SufficientCondition,
    pub rankings: Rankings,
    /// Set when the start point already solves the nonlinear part.
    pub note: Option<String>,
}

/// Runs the damped first step and computes every indicator.
pub fn diagnose(
    model: &SystemModel,
    x0: &[f64],
    opts: &SolveOptions,
    threshold: f64,
) -> Result<DiagnosticReport, SolverError> {
    let step = solver::first_step_damped(model, x0, opts)?;
    diagnose_step(model, &step, threshold)
}

/// Computes every indicator from an already computed first step.
pub fn diagnose_step(
    model: &SystemModel,
    step: &FirstStepResult,
    threshold: f64,
) -> Result<DiagnosticReport, SolverError> {
    let residual = residual_from_jacobian(model, &step.jacobian_at_x0, &step.x0, &step.x1);
    let norms = Norms {
        f_x0_inf: linops::norm_inf(&step.f_x0),
        r_x0_inf: residual.inf_norm,
        f_x1_star_inf: linops::norm_inf(&step.f_x1_star),
    };
    let unwrap_solver = |e: DiagnosticsError| match e {
        DiagnosticsError::Solver(s) => s,
        DiagnosticsError::DegenerateResidual { .. } => unreachable!("degenerate case handled separately"),
    };
    let (alpha, gamma, note) = if residual.inf_norm < DEGENERATE_RESIDUAL {
        let hs = hessians(model, &step.x0)?;
        let alpha = AlphaSet {
            entries: hs.iter().map(|(i, _)| AlphaEntry { eq: *i, value: 0.0, vars: Vec::new() }).collect(),
            alpha: 0.0,
            lambda: step.lambda,
        };
        let entries =
            hs.iter().flat_map(|(i, h)| h.keys().map(move |&(j, k)| GammaEntry { eq: *i, j, k, value: 0.0 })).collect();
        let gamma = GammaSet { entries, row_sums: hs.iter().map(|(i, _)| (*i, 0.0)).collect(), beta: 0.0 };
        (alpha, gamma, Some("start point already solves the nonlinear part; indicators set to zero".to_string()))
    } else {
        (compute_alpha(model, step).map_err(unwrap_solver)?, compute_gamma(model, step).map_err(unwrap_solver)?, None)
    };
    let sigma = compute_sigma(model, step).map_err(unwrap_solver)?;
    let sufficient = sufficient_condition_check(&alpha, &gamma, &norms);
    let rankings = rank_indicators(&alpha, &gamma, &sigma, step, threshold);
    Ok(DiagnosticReport { lambda: step.lambda, norms, alpha, gamma, sigma, sufficient, rankings, note })
}
