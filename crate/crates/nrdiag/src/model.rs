//! Equation-system abstraction with the structural metadata the diagnostics
//! rely on: the split of unknowns into `w` (the Jacobian depends on them) and
//! `z` (they enter linearly), the nonlinear/linear equation classes, names and
//! residual scaling.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linops::{self, Mat};

/// Where a residual evaluation failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureLocation {
    Equation(usize),
    Variable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// An argument left the domain of definition (negative square root, ...).
    DomainViolation,
    /// The computed value was infinite or NaN.
    NonFinite,
}

/// A residual evaluation that could not produce a finite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("residual not evaluable: {reason:?} at {location:?}")]
pub struct EvalFailure {
    pub location: FailureLocation,
    pub reason: FailureReason,
}

impl EvalFailure {
    pub fn domain(eq: usize) -> Self {
        Self { location: FailureLocation::Equation(eq), reason: FailureReason::DomainViolation }
    }

    pub fn non_finite(eq: usize) -> Self {
        Self { location: FailureLocation::Equation(eq), reason: FailureReason::NonFinite }
    }
}

pub type EvalOutcome<T> = Result<T, EvalFailure>;

pub type ResidualFn = Arc<dyn Fn(&[f64]) -> EvalOutcome<Vec<f64>> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> EvalOutcome<Mat> + Send + Sync>;
/// Sparse Hessian of one equation as `(j, k, value)` triplets over w-indices.
/// Off-diagonal entries are listed in both orders.
pub type HessianFn = Arc<dyn Fn(usize, &[f64]) -> Vec<(usize, usize, f64)> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("scale {index} is not strictly positive ({value})")]
    NonPositiveScale { index: usize, value: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A square system `f(x) = 0` with declared structure.
#[derive(Clone)]
pub struct SystemModel {
    m: usize,
    residual: ResidualFn,
    jacobian: Option<JacobianFn>,
    hessian: Option<HessianFn>,
    w_indices: Vec<usize>,
    z_indices: Vec<usize>,
    nonlinear_eqs: Vec<usize>,
    var_names: Vec<String>,
    eq_names: Vec<String>,
    residual_scales: Vec<f64>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("m", &self.m)
            .field("q", &self.q())
            .field("p", &self.p())
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

impl SystemModel {
    /// Creates a model with every variable in `w`, every equation nonlinear,
    /// generic names and unit scales. Refine it with the `with_*` methods.
    pub fn new(m: usize, residual: impl Fn(&[f64]) -> EvalOutcome<Vec<f64>> + Send + Sync + 'static) -> Self {
        Self {
            m,
            residual: Arc::new(residual),
            jacobian: None,
            hessian: None,
            w_indices: (0..m).collect(),
            z_indices: Vec::new(),
            nonlinear_eqs: (0..m).collect(),
            var_names: (0..m).map(|j| format!("x{j}")).collect(),
            eq_names: (0..m).map(|i| format!("eq{i}")).collect(),
            residual_scales: vec![1.0; m],
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> EvalOutcome<Mat> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_hessian(
        mut self,
        hess: impl Fn(usize, &[f64]) -> Vec<(usize, usize, f64)> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(hess));
        self
    }

    /// Declares the w-variables and nonlinear equations; everything else is
    /// z / linear.
    pub fn with_partition(mut self, w_indices: Vec<usize>, nonlinear_eqs: Vec<usize>) -> Result<Self, ModelError> {
        check_subset(&w_indices, self.m, "w_indices")?;
        check_subset(&nonlinear_eqs, self.m, "nonlinear_eqs")?;
        self.z_indices = (0..self.m).filter(|j| !w_indices.contains(j)).collect();
        self.w_indices = w_indices;
        self.nonlinear_eqs = nonlinear_eqs;
        Ok(self)
    }

    pub fn with_names(mut self, var_names: Vec<String>, eq_names: Vec<String>) -> Result<Self, ModelError> {
        for names in [&var_names, &eq_names] {
            if names.len() != self.m {
                return Err(ModelError::DimensionMismatch { expected: self.m, got: names.len() });
            }
        }
        self.var_names = var_names;
        self.eq_names = eq_names;
        Ok(self)
    }

    pub fn with_residual_scales(mut self, scales: Vec<f64>) -> Result<Self, ModelError> {
        check_scales(&scales, self.m)?;
        self.residual_scales = scales;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of w-variables.
    pub fn q(&self) -> usize {
        self.w_indices.len()
    }

    /// Number of nonlinear equations.
    pub fn p(&self) -> usize {
        self.nonlinear_eqs.len()
    }

    pub fn w_indices(&self) -> &[usize] {
        &self.w_indices
    }

    pub fn z_indices(&self) -> &[usize] {
        &self.z_indices
    }

    pub fn nonlinear_eqs(&self) -> &[usize] {
        &self.nonlinear_eqs
    }

    pub fn linear_eqs(&self) -> Vec<usize> {
        (0..self.m).filter(|i| !self.nonlinear_eqs.contains(i)).collect()
    }

    pub fn is_nonlinear_eq(&self, i: usize) -> bool {
        self.nonlinear_eqs.contains(&i)
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn eq_names(&self) -> &[String] {
        &self.eq_names
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|n| n == name)
    }

    pub fn residual_scales(&self) -> &[f64] {
        &self.residual_scales
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    /// Scaled residual `f(x) ⊘ residual_scales`. Non-finite components are
    /// reported as failures.
    pub fn eval(&self, x: &[f64]) -> EvalOutcome<Vec<f64>> {
        debug_assert_eq!(x.len(), self.m);
        let mut f = (self.residual)(x)?;
        for (i, (v, s)) in f.iter_mut().zip(&self.residual_scales).enumerate() {
            *v /= s;
            if !v.is_finite() {
                return Err(EvalFailure::non_finite(i));
            }
        }
        Ok(f)
    }

    /// Scaled Jacobian, analytic when available, central differences otherwise.
    pub fn jacobian_at(&self, x: &[f64]) -> EvalOutcome<Mat> {
        match &self.jacobian {
            Some(jac) => {
                let mut j = jac(x)?;
                for (i, s) in self.residual_scales.iter().enumerate() {
                    j.row_mut(i).iter_mut().for_each(|v| *v /= s);
                }
                if let Some(i) = (0..self.m).find(|&i| !j.row(i).iter().all(|v| v.is_finite())) {
                    return Err(EvalFailure::non_finite(i));
                }
                Ok(j)
            }
            None => linops::fd_jacobian(|v| self.eval(v), x),
        }
    }

    /// Scaled Hessian of equation `i` as triplets over w-indices. Linear
    /// equations have none. Without an analytic callback the Hessian is
    /// approximated by central differences restricted to the w-block, and
    /// entries below a noise floor are dropped.
    pub fn hessian_at(&self, i: usize, x: &[f64]) -> EvalOutcome<Vec<(usize, usize, f64)>> {
        if !self.is_nonlinear_eq(i) {
            return Ok(Vec::new());
        }
        if let Some(hess) = &self.hessian {
            let s = self.residual_scales[i];
            return Ok(hess(i, x).into_iter().map(|(j, k, v)| (j, k, v / s)).collect());
        }
        let w = &self.w_indices;
        let xw: Vec<f64> = w.iter().map(|&j| x[j]).collect();
        let h = linops::fd_hessian(
            |v: &[f64]| {
                let mut full = x.to_vec();
                for (slot, &j) in v.iter().zip(w) {
                    full[j] = *slot;
                }
                self.eval(&full).map(|f| f[i])
            },
            &xw,
        )?;
        let fi = self.eval(x)?[i];
        let floor = 1e-6 * (1.0 + fi.abs());
        let mut out = Vec::new();
        for (a, &j) in w.iter().enumerate() {
            for (b, &k) in w.iter().enumerate() {
                if h[(a, b)].abs() > floor {
                    out.push((j, k, h[(a, b)]));
                }
            }
        }
        Ok(out)
    }

    /// Dense Hessian of equation `i` over all variables (zeros outside w).
    pub fn dense_hessian(&self, i: usize, x: &[f64]) -> EvalOutcome<Mat> {
        let mut h = Mat::zeros(self.m, self.m);
        for (j, k, v) in self.hessian_at(i, x)? {
            h[(j, k)] += v;
        }
        Ok(h)
    }
}

fn check_subset(idx: &[usize], m: usize, what: &str) -> Result<(), ModelError> {
    let mut seen = vec![false; m];
    for &j in idx {
        if j >= m {
            return Err(ModelError::InvalidPartition(format!("{what} contains {j}, out of range 0..{m}")));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(ModelError::InvalidPartition(format!("{what} lists {j} twice")));
        }
    }
    Ok(())
}

fn check_scales(scales: &[f64], m: usize) -> Result<(), ModelError> {
    if scales.len() != m {
        return Err(ModelError::DimensionMismatch { expected: m, got: scales.len() });
    }
    match scales.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
        Some(index) => Err(ModelError::NonPositiveScale { index, value: scales[index] }),
        None => Ok(()),
    }
}

/// Permutations between the user ordering and the canonical `[w; z]`
/// variable / `[n; l]` equation ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub q: usize,
    pub p: usize,
    /// `var_perm[c]` is the user index of canonical variable `c`.
    pub var_perm: Vec<usize>,
    /// `eq_perm[c]` is the user index of canonical equation `c`.
    pub eq_perm: Vec<usize>,
    var_inv: Vec<usize>,
    eq_inv: Vec<usize>,
}

impl Partition {
    fn new(q: usize, p: usize, var_perm: Vec<usize>, eq_perm: Vec<usize>) -> Self {
        let var_inv = invert(&var_perm);
        let eq_inv = invert(&eq_perm);
        Self { q, p, var_perm, eq_perm, var_inv, eq_inv }
    }

    pub fn is_identity(&self) -> bool {
        self.var_perm.iter().enumerate().all(|(c, &u)| c == u) && self.eq_perm.iter().enumerate().all(|(c, &u)| c == u)
    }

    /// Canonical index of user variable `j`.
    pub fn canonical_var(&self, j: usize) -> usize {
        self.var_inv[j]
    }

    /// Canonical index of user equation `i`.
    pub fn canonical_eq(&self, i: usize) -> usize {
        self.eq_inv[i]
    }

    pub fn to_canonical_x(&self, x_user: &[f64]) -> Vec<f64> {
        self.var_perm.iter().map(|&u| x_user[u]).collect()
    }

    pub fn to_user_x(&self, x_canon: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x_canon.len()];
        for (c, &u) in self.var_perm.iter().enumerate() {
            out[u] = x_canon[c];
        }
        out
    }

    pub fn to_user_f(&self, f_canon: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f_canon.len()];
        for (c, &u) in self.eq_perm.iter().enumerate() {
            out[u] = f_canon[c];
        }
        out
    }
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (c, &u) in perm.iter().enumerate() {
        inv[u] = c;
    }
    inv
}

/// Reorders a model so that w-variables come first and nonlinear equations
/// come first, preserving relative order inside each block.
pub fn canonicalize(model: &SystemModel) -> Result<(SystemModel, Partition), ModelError> {
    let m = model.m;
    check_subset(&model.w_indices, m, "w_indices")?;
    check_subset(&model.nonlinear_eqs, m, "nonlinear_eqs")?;
    let mut w = model.w_indices.clone();
    w.sort_unstable();
    let mut z = model.z_indices.clone();
    z.sort_unstable();
    if w.iter().any(|j| z.binary_search(j).is_ok()) || w.len() + z.len() != m {
        return Err(ModelError::InvalidPartition("w and z must partition the variables".into()));
    }
    let mut nl = model.nonlinear_eqs.clone();
    nl.sort_unstable();
    let lin = model.linear_eqs();

    let var_perm: Vec<usize> = w.iter().chain(&z).copied().collect();
    let eq_perm: Vec<usize> = nl.iter().chain(&lin).copied().collect();
    let part = Partition::new(w.len(), nl.len(), var_perm, eq_perm);

    let residual = {
        let f = model.residual.clone();
        let part = part.clone();
        move |x: &[f64]| -> EvalOutcome<Vec<f64>> {
            let fu = f(&part.to_user_x(x))?;
            Ok(part.eq_perm.iter().map(|&u| fu[u]).collect())
        }
    };
    let mut out = SystemModel::new(m, residual);
    out.residual = wrap_failures(out.residual.clone(), &part);

    if let Some(jac) = &model.jacobian {
        let jac = jac.clone();
        let part = part.clone();
        out.jacobian = Some(Arc::new(move |x: &[f64]| {
            let ju = jac(&part.to_user_x(x))?;
            Ok(Mat::from_fn(m, m, |i, j| ju[(part.eq_perm[i], part.var_perm[j])]))
        }));
    }
    if let Some(hess) = &model.hessian {
        let hess = hess.clone();
        let part = part.clone();
        out.hessian = Some(Arc::new(move |i: usize, x: &[f64]| {
            hess(part.eq_perm[i], &part.to_user_x(x))
                .into_iter()
                .map(|(j, k, v)| (part.canonical_var(j), part.canonical_var(k), v))
                .collect()
        }));
    }
    out.w_indices = (0..part.q).collect();
    out.z_indices = (part.q..m).collect();
    out.nonlinear_eqs = (0..part.p).collect();
    out.var_names = part.var_perm.iter().map(|&u| model.var_names[u].clone()).collect();
    out.eq_names = part.eq_perm.iter().map(|&u| model.eq_names[u].clone()).collect();
    out.residual_scales = part.eq_perm.iter().map(|&u| model.residual_scales[u]).collect();
    Ok((out, part))
}

// The residual closure built in `canonicalize` reports failures in user
// indices; this wrapper translates them to canonical indices.
fn wrap_failures(residual: ResidualFn, part: &Partition) -> ResidualFn {
    let part = part.clone();
    Arc::new(move |x: &[f64]| {
        residual(x).map_err(|e| EvalFailure {
            location: match e.location {
                FailureLocation::Equation(i) => FailureLocation::Equation(part.canonical_eq(i)),
                FailureLocation::Variable(j) => FailureLocation::Variable(part.canonical_var(j)),
            },
            reason: e.reason,
        })
    })
}

/// Returns a model in scaled units: `x' = x ⊘ var_scales`, `f' = f ⊘ eq_scales`.
pub fn scale_model(model: &SystemModel, var_scales: &[f64], eq_scales: &[f64]) -> Result<SystemModel, ModelError> {
    check_scales(var_scales, model.m)?;
    check_scales(eq_scales, model.m)?;
    let s: Arc<[f64]> = var_scales.into();
    let unscale = {
        let s = s.clone();
        move |xs: &[f64]| -> Vec<f64> { xs.iter().zip(s.iter()).map(|(a, b)| a * b).collect() }
    };
    let mut out = model.clone();
    {
        let f = model.residual.clone();
        let unscale = unscale.clone();
        out.residual = Arc::new(move |x: &[f64]| f(&unscale(x)));
    }
    if let Some(jac) = &model.jacobian {
        let jac = jac.clone();
        let s = s.clone();
        let unscale = unscale.clone();
        out.jacobian = Some(Arc::new(move |x: &[f64]| {
            let mut j = jac(&unscale(x))?;
            for i in 0..j.rows() {
                j.row_mut(i).iter_mut().zip(s.iter()).for_each(|(v, sj)| *v *= sj);
            }
            Ok(j)
        }));
    }
    if let Some(hess) = &model.hessian {
        let hess = hess.clone();
        let s = s.clone();
        out.hessian = Some(Arc::new(move |i: usize, x: &[f64]| {
            hess(i, &unscale(x)).into_iter().map(|(j, k, v)| (j, k, v * s[j] * s[k])).collect()
        }));
    }
    out.residual_scales = model.residual_scales.iter().zip(eq_scales).map(|(a, b)| a * b).collect();
    Ok(out)
}

/// Empirical classification of one equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquationClass {
    Linear,
    Quadratic,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureCheck {
    pub name: String,
    pub passed: bool,
    /// Names of the variables or equations that violate the declaration.
    pub offenders: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub checks: Vec<StructureCheck>,
    /// Per equation, from FD Hessians across the samples.
    pub classes: Vec<EquationClass>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn offenders(&self) -> Vec<&str> {
        self.checks.iter().flat_map(|c| c.offenders.iter().map(String::as_str)).collect()
    }
}

/// Noise floor for FD second derivatives of equation values near `fi`.
fn hessian_floor(fi: f64, x: &[f64]) -> f64 {
    1e-5 * (1.0 + fi.abs() + linops::norm_inf(x))
}

/// Checks the declared partition and equation classes by finite differences
/// at the given sample points.
pub fn verify_structure(model: &SystemModel, samples: &[Vec<f64>]) -> StructureReport {
    let mut z_const = Vec::new();
    let mut z_hess = Vec::new();
    let mut lin_hess = Vec::new();
    let mut eval_fail = Vec::new();
    let mut hessians: Vec<(Vec<Mat>, Vec<f64>)> = Vec::new();
    let mut jac0: Option<Mat> = None;

    for (s, x) in samples.iter().enumerate() {
        let f = match model.eval(x) {
            Ok(f) => f,
            Err(_) => {
                eval_fail.push(format!("sample {s}"));
                continue;
            }
        };
        match linops::fd_jacobian(|v| model.eval(v), x) {
            Ok(j) => {
                if let Some(j0) = &jac0 {
                    for &zj in &model.z_indices {
                        let diff = (0..model.m).map(|i| (j[(i, zj)] - j0[(i, zj)]).abs()).fold(0.0, f64::max);
                        let mag = (0..model.m).map(|i| j0[(i, zj)].abs()).fold(1.0, f64::max);
                        if diff > 1e-6 * mag {
                            z_const.push(model.var_names[zj].clone());
                        }
                    }
                } else {
                    jac0 = Some(j);
                }
            }
            Err(_) => eval_fail.push(format!("sample {s}")),
        }
        let hs = match linops::fd_hessians(|v| model.eval(v), x) {
            Ok(h) => h,
            Err(_) => {
                eval_fail.push(format!("sample {s}"));
                continue;
            }
        };
        let floors: Vec<f64> = f.iter().map(|fi| hessian_floor(*fi, x)).collect();
        for (i, h) in hs.iter().enumerate() {
            let floor = floors[i];
            for &zj in &model.z_indices {
                let worst = (0..model.m).map(|k| h[(zj, k)].abs().max(h[(k, zj)].abs())).fold(0.0, f64::max);
                if worst > floor {
                    z_hess.push(model.var_names[zj].clone());
                }
            }
            if !model.is_nonlinear_eq(i) && h.max_abs() > floor {
                lin_hess.push(model.eq_names[i].clone());
            }
        }
        hessians.push((hs, floors));
    }

    let classes = (0..model.m)
        .map(|i| {
            if !hessians.iter().any(|(hs, floors)| hs[i].max_abs() > floors[i]) {
                return EquationClass::Linear;
            }
            let first = &hessians[0].0[i];
            let constant = hessians.iter().all(|(hs, floors)| {
                let d = hs[i].as_slice().iter().zip(first.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                d <= floors[i] + 1e-4 * first.max_abs()
            });
            if constant {
                EquationClass::Quadratic
            } else {
                EquationClass::Nonlinear
            }
        })
        .collect();

    let check = |name: &str, mut offenders: Vec<String>| {
        offenders.sort();
        offenders.dedup();
        StructureCheck { name: name.to_string(), passed: offenders.is_empty(), offenders }
    };
    StructureReport {
        checks: vec![
            check("samples evaluable", eval_fail),
            check("z columns of the Jacobian are constant", z_const),
            check("Hessian rows/columns at z are zero", z_hess),
            check("declared-linear equations have zero Hessian", lin_hess),
        ],
        classes,
    }
}

/// Compares analytic derivatives against central differences at the samples.
/// Returns a Jacobian check and a Hessian check; a check without an analytic
/// callback trivially passes.
///
/// Differences are taken at steps `h` and `h/2`; twice their gap is allowed
/// on top of the fixed tolerance, so strongly curved points (near a square
/// root's branch point, say) are not reported as mismatches.
pub fn verify_derivatives(model: &SystemModel, samples: &[Vec<f64>]) -> Vec<StructureCheck> {
    let mut jac_bad = Vec::new();
    let mut hess_bad = Vec::new();
    let eval = |v: &[f64]| model.eval(v);
    let (jac_step, hess_step) = (f64::EPSILON.cbrt(), f64::EPSILON.powf(0.25));
    for x in samples {
        if model.has_analytic_jacobian() {
            let fd = linops::fd_jacobian_step(eval, x, jac_step)
                .and_then(|coarse| linops::fd_jacobian_step(eval, x, jac_step / 2.0).map(|fine| (coarse, fine)));
            match (model.jacobian_at(x), fd) {
                (Ok(ja), Ok((jc, jf))) => {
                    for i in 0..model.m {
                        for j in 0..model.m {
                            let (a, b) = (ja[(i, j)], jc[(i, j)]);
                            let truncation = 2.0 * (jc[(i, j)] - jf[(i, j)]).abs();
                            if (a - b).abs() > 1e-5 * a.abs().max(1.0) + truncation {
                                jac_bad.push(format!("{}/{}", model.eq_names[i], model.var_names[j]));
                            }
                        }
                    }
                }
                _ => jac_bad.push("evaluation failed".into()),
            }
        }
        if model.has_analytic_hessian() {
            let fd = linops::fd_hessians_step(eval, x, hess_step)
                .and_then(|coarse| linops::fd_hessians_step(eval, x, hess_step / 2.0).map(|fine| (coarse, fine)));
            let (Ok(f), Ok((hc, hf))) = (model.eval(x), fd) else {
                hess_bad.push("evaluation failed".into());
                continue;
            };
            for i in 0..model.m {
                let Ok(ha) = model.dense_hessian(i, x) else {
                    hess_bad.push(model.eq_names[i].clone());
                    continue;
                };
                let floor = hessian_floor(f[i], x);
                for j in 0..model.m {
                    for k in 0..model.m {
                        let (a, b) = (ha[(j, k)], hc[i][(j, k)]);
                        let truncation = 2.0 * (hc[i][(j, k)] - hf[i][(j, k)]).abs();
                        if (a - b).abs() > 1e-4 * a.abs() + floor + truncation {
                            hess_bad
                                .push(format!("{}/{}/{}", model.eq_names[i], model.var_names[j], model.var_names[k]));
                        }
                    }
                }
            }
        }
    }
    let check = |name: &str, mut offenders: Vec<String>| {
        offenders.sort();
        offenders.dedup();
        StructureCheck { name: name.to_string(), passed: offenders.is_empty(), offenders }
    };
    vec![
        check("analytic Jacobian matches finite differences", jac_bad),
        check("analytic Hessian matches finite differences", hess_bad),
    ]
}
