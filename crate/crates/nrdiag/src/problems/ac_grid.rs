//! Balanced AC power flow on an N×N grid of alternating generator and load
//! nodes connected by purely reactive lines.
//!
//! Node `(i, k)` with `i + k` even is a generator (`|v| = V_g`, injected power
//! `P`), odd nodes are loads drawing `P` at unit power factor. The node at
//! `(N/2, N/2)` is the slack. Complex quantities are split into real and
//! imaginary parts; per node the variable order is `v`, then the injection
//! current `iⁿ`, then the horizontal and vertical line currents.

use std::sync::Arc;

use crate::linops::Mat;
use crate::model::{EvalFailure, SystemModel};

use super::{Override, ProblemCase, ProblemError};

#[derive(Debug, Clone, PartialEq)]
pub struct AcGridParams {
    /// Grid size (even).
    pub n: usize,
    /// Line reactance, per unit.
    pub x: f64,
    /// Power per node, per unit.
    pub p: f64,
}

impl Default for AcGridParams {
    fn default() -> Self {
        Self { n: 20, x: 1.0, p: 1.0 }
    }
}

impl AcGridParams {
    /// Generator voltage magnitude `√(1 + X²/16)`.
    pub fn v_g(&self) -> f64 {
        (1.0 + self.x * self.x / 16.0).sqrt()
    }

    fn validate(&self) -> Result<(), ProblemError> {
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(ProblemError::InvalidParams(format!("grid size {} must be even and at least 2", self.n)));
        }
        if !(self.x > 0.0 && self.p > 0.0) {
            return Err(ProblemError::InvalidParams("reactance and power must be positive".into()));
        }
        Ok(())
    }
}

/// Variable layout: each entry is the index of the real part; the imaginary
/// part follows it.
struct Layout {
    n: usize,
}

impl Layout {
    fn v(&self, i: usize, k: usize) -> usize {
        2 * ((k - 1) * self.n + (i - 1))
    }

    fn inj(&self, i: usize, k: usize) -> usize {
        2 * self.n * self.n + self.v(i, k)
    }

    /// Horizontal line between `(i, k)` and `(i + 1, k)`.
    fn h(&self, i: usize, k: usize) -> usize {
        4 * self.n * self.n + 2 * ((k - 1) * (self.n - 1) + (i - 1))
    }

    /// Vertical line between `(i, k)` and `(i, k + 1)`.
    fn u(&self, i: usize, k: usize) -> usize {
        4 * self.n * self.n + 2 * self.n * (self.n - 1) + 2 * ((k - 1) * self.n + (i - 1))
    }

    fn m(&self) -> usize {
        8 * self.n * self.n - 4 * self.n
    }

    fn slack(&self) -> (usize, usize) {
        (self.n / 2, self.n / 2)
    }

    fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..=self.n).flat_map(move |k| (1..=self.n).map(move |i| (i, k)))
    }
}

fn is_generator(i: usize, k: usize) -> bool {
    (i + k).is_multiple_of(2)
}

#[derive(Debug, Clone, Copy)]
enum NodeEq {
    Magnitude,
    GenPower,
    LoadReal,
    LoadImag,
}

/// Nonlinear node equations followed by a sparse affine block `A x + b`.
struct Grid {
    p: f64,
    v_g: f64,
    nonlinear: Vec<(NodeEq, usize, usize)>,
    /// Rows of the linear block as `(column, coefficient)` lists.
    linear: Vec<Vec<(usize, f64)>>,
    linear_rhs: Vec<f64>,
}

impl Grid {
    fn build(params: &AcGridParams, lay: &Layout) -> Self {
        let n = lay.n;
        let mut nonlinear = Vec::new();
        for (i, k) in lay.nodes() {
            if (i, k) == lay.slack() {
                continue;
            }
            if is_generator(i, k) {
                nonlinear.push((NodeEq::Magnitude, lay.v(i, k), lay.inj(i, k)));
                nonlinear.push((NodeEq::GenPower, lay.v(i, k), lay.inj(i, k)));
            } else {
                nonlinear.push((NodeEq::LoadReal, lay.v(i, k), lay.inj(i, k)));
                nonlinear.push((NodeEq::LoadImag, lay.v(i, k), lay.inj(i, k)));
            }
        }

        let mut linear = Vec::new();
        let mut linear_rhs = Vec::new();
        let v_g = params.v_g();
        let (gi, gk) = lay.slack();
        linear.push(vec![(lay.v(gi, gk), 1.0)]);
        linear_rhs.push(v_g);
        linear.push(vec![(lay.v(gi, gk) + 1, 1.0)]);
        linear_rhs.push(0.0);

        // Ohm's law with admittance 1/(jX): I = -j (v_a - v_b) / X.
        let y = 1.0 / params.x;
        let mut ohm = |c: usize, a: usize, b: usize| {
            linear.push(vec![(c, 1.0), (a + 1, -y), (b + 1, y)]);
            linear_rhs.push(0.0);
            linear.push(vec![(c + 1, 1.0), (a, y), (b, -y)]);
            linear_rhs.push(0.0);
        };
        for k in 1..=n {
            for i in 1..n {
                ohm(lay.h(i, k), lay.v(i, k), lay.v(i + 1, k));
            }
        }
        for k in 1..n {
            for i in 1..=n {
                ohm(lay.u(i, k), lay.v(i, k), lay.v(i, k + 1));
            }
        }

        // Current balance: injection plus outgoing lines minus incoming lines.
        for (i, k) in lay.nodes() {
            let mut terms = vec![(lay.inj(i, k), 1.0)];
            if i < n {
                terms.push((lay.h(i, k), 1.0));
            }
            if k < n {
                terms.push((lay.u(i, k), 1.0));
            }
            if i > 1 {
                terms.push((lay.h(i - 1, k), -1.0));
            }
            if k > 1 {
                terms.push((lay.u(i, k - 1), -1.0));
            }
            linear.push(terms.clone());
            linear_rhs.push(0.0);
            linear.push(terms.into_iter().map(|(c, s)| (c + 1, s)).collect());
            linear_rhs.push(0.0);
        }
        Self { p: params.p, v_g, nonlinear, linear, linear_rhs }
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>, EvalFailure> {
        let mut f = Vec::with_capacity(self.nonlinear.len() + self.linear.len());
        for (e, &(kind, a, c)) in self.nonlinear.iter().enumerate() {
            let (vr, vi, nr, ni) = (x[a], x[a + 1], x[c], x[c + 1]);
            f.push(match kind {
                NodeEq::Magnitude => {
                    let s = vr * vr + vi * vi;
                    if !(s > 0.0) {
                        return Err(EvalFailure::domain(e));
                    }
                    s.sqrt() - self.v_g
                }
                NodeEq::GenPower => vr * nr + vi * ni + self.p,
                NodeEq::LoadReal => vr * nr + vi * ni - self.p,
                NodeEq::LoadImag => vi * nr - vr * ni,
            });
        }
        for (row, b) in self.linear.iter().zip(&self.linear_rhs) {
            f.push(row.iter().map(|&(c, s)| s * x[c]).sum::<f64>() - b);
        }
        Ok(f)
    }

    fn jacobian(&self, x: &[f64]) -> Mat {
        let p = self.nonlinear.len();
        let m = p + self.linear.len();
        let mut j = Mat::zeros(m, m);
        for (e, &(kind, a, c)) in self.nonlinear.iter().enumerate() {
            let (vr, vi, nr, ni) = (x[a], x[a + 1], x[c], x[c + 1]);
            let row = j.row_mut(e);
            match kind {
                NodeEq::Magnitude => {
                    let s = (vr * vr + vi * vi).sqrt();
                    row[a] = vr / s;
                    row[a + 1] = vi / s;
                }
                NodeEq::GenPower | NodeEq::LoadReal => {
                    row[a] = nr;
                    row[a + 1] = ni;
                    row[c] = vr;
                    row[c + 1] = vi;
                }
                NodeEq::LoadImag => {
                    row[a] = -ni;
                    row[a + 1] = nr;
                    row[c] = vi;
                    row[c + 1] = -vr;
                }
            }
        }
        for (r, terms) in self.linear.iter().enumerate() {
            let row = j.row_mut(p + r);
            for &(c, s) in terms {
                row[c] += s;
            }
        }
        j
    }

    fn hessian(&self, e: usize, x: &[f64]) -> Vec<(usize, usize, f64)> {
        let Some(&(kind, a, c)) = self.nonlinear.get(e) else {
            return Vec::new();
        };
        match kind {
            NodeEq::Magnitude => {
                let (vr, vi) = (x[a], x[a + 1]);
                let s3 = (vr * vr + vi * vi).powf(1.5);
                let mixed = -vr * vi / s3;
                vec![(a, a, vi * vi / s3), (a, a + 1, mixed), (a + 1, a, mixed), (a + 1, a + 1, vr * vr / s3)]
            }
            NodeEq::GenPower | NodeEq::LoadReal => {
                vec![(a, c, 1.0), (c, a, 1.0), (a + 1, c + 1, 1.0), (c + 1, a + 1, 1.0)]
            }
            NodeEq::LoadImag => vec![(a + 1, c, 1.0), (c, a + 1, 1.0), (a, c + 1, -1.0), (c + 1, a, -1.0)],
        }
    }
}

fn names(lay: &Layout) -> (Vec<String>, Vec<String>) {
    let n = lay.n;
    let mut vars = vec![String::new(); lay.m()];
    let mut set = |idx: usize, base: String| {
        vars[idx] = format!("{base}_re");
        vars[idx + 1] = format!("{base}_im");
    };
    for (i, k) in lay.nodes() {
        set(lay.v(i, k), format!("v_{i}_{k}"));
        set(lay.inj(i, k), format!("in_{i}_{k}"));
    }
    for k in 1..=n {
        for i in 1..n {
            set(lay.h(i, k), format!("ih_{i}_{k}"));
        }
    }
    for k in 1..n {
        for i in 1..=n {
            set(lay.u(i, k), format!("iv_{i}_{k}"));
        }
    }

    let mut eqs = Vec::with_capacity(lay.m());
    for (i, k) in lay.nodes() {
        if (i, k) == lay.slack() {
            continue;
        }
        if is_generator(i, k) {
            eqs.push(format!("gen_mag_{i}_{k}"));
            eqs.push(format!("gen_p_{i}_{k}"));
        } else {
            eqs.push(format!("load_p_{i}_{k}"));
            eqs.push(format!("load_q_{i}_{k}"));
        }
    }
    eqs.push("slack_re".into());
    eqs.push("slack_im".into());
    for (dir, kmax, imax) in [("h", n, n - 1), ("v", n - 1, n)] {
        for k in 1..=kmax {
            for i in 1..=imax {
                eqs.push(format!("ohm_{dir}_{i}_{k}_re"));
                eqs.push(format!("ohm_{dir}_{i}_{k}_im"));
            }
        }
    }
    for (i, k) in lay.nodes() {
        eqs.push(format!("kcl_{i}_{k}_re"));
        eqs.push(format!("kcl_{i}_{k}_im"));
    }
    (vars, eqs)
}

/// Closed-form solution of the infinite grid, restricted to the finite one:
/// `V_g` at generators, `V_l = V_g / (1 + jX/4)` at loads, injections `∓V_l`
/// and line currents from Ohm's law.
pub fn infinite_grid_guess(params: &AcGridParams) -> Vec<f64> {
    let lay = Layout { n: params.n };
    let v_g = params.v_g();
    // V_l = V_g (1 - jX/4) / (1 + X²/16)
    let den = 1.0 + params.x * params.x / 16.0;
    let v_l = (v_g / den, -v_g * params.x / 4.0 / den);
    let volt = |i: usize, k: usize| if is_generator(i, k) { (v_g, 0.0) } else { v_l };
    let mut x = vec![0.0; lay.m()];
    let mut put = |idx: usize, (re, im): (f64, f64)| {
        x[idx] = re;
        x[idx + 1] = im;
    };
    for (i, k) in lay.nodes() {
        put(lay.v(i, k), volt(i, k));
        put(lay.inj(i, k), if is_generator(i, k) { (-v_l.0, -v_l.1) } else { v_l });
    }
    // (v_a - v_b) / (jX) = -j (v_a - v_b) / X
    let line = |a: (f64, f64), b: (f64, f64)| ((a.1 - b.1) / params.x, -(a.0 - b.0) / params.x);
    for k in 1..=params.n {
        for i in 1..params.n {
            put(lay.h(i, k), line(volt(i, k), volt(i + 1, k)));
        }
    }
    for k in 1..params.n {
        for i in 1..=params.n {
            put(lay.u(i, k), line(volt(i, k), volt(i, k + 1)));
        }
    }
    x
}

/// Guess changes for test presets 2..11, as multiples of the infinite-grid values.
pub fn test_overrides(test: usize) -> Option<Vec<(String, Override)>> {
    let scale = |name: &str, f: f64| (name.to_string(), Override::Scale(f));
    let t7 = || {
        let mut v = vec![scale("v_5_1", 0.5)];
        for node in ["13_17", "13_18", "14_18", "12_20", "13_20"] {
            v.push(scale(&format!("v_{node}"), 0.1));
        }
        for node in ["5_1", "13_17", "13_18", "14_18", "13_20"] {
            v.push(scale(&format!("in_{node}"), 0.1));
        }
        v
    };
    const REPAIRS: [&str; 4] = ["v_12_20", "v_13_20", "v_14_18", "v_13_17"];
    Some(match test {
        1 => Vec::new(),
        2 => vec![scale("in_5_1", 0.1)],
        3 => vec![scale("in_5_1", 0.1), scale("v_5_1", 0.5)],
        4 => vec![scale("in_5_1", 0.1), scale("v_5_1", 0.1)],
        5 => vec![scale("in_5_1", 0.5), scale("v_5_1", 0.1)],
        6 => vec![scale("v_5_1", 0.01)],
        7..=11 => {
            let mut v = t7();
            v.extend(REPAIRS[..test - 7].iter().map(|n| scale(n, 0.8)));
            v
        }
        _ => return None,
    })
}

pub fn ac_grid(params: &AcGridParams) -> Result<ProblemCase, ProblemError> {
    params.validate()?;
    let lay = Layout { n: params.n };
    let grid = Arc::new(Grid::build(params, &lay));
    let m = lay.m();
    debug_assert_eq!(grid.nonlinear.len() + grid.linear.len(), m);

    let slack = lay.slack();
    let mut w: Vec<usize> = lay
        .nodes()
        .filter(|&node| node != slack)
        .flat_map(|(i, k)| [lay.v(i, k), lay.v(i, k) + 1, lay.inj(i, k), lay.inj(i, k) + 1])
        .collect();
    w.sort_unstable();
    let nonlinear: Vec<usize> = (0..grid.nonlinear.len()).collect();
    let (var_names, eq_names) = names(&lay);

    let (gr, gj, gh) = (grid.clone(), grid.clone(), grid);
    let model = SystemModel::new(m, move |x: &[f64]| gr.residual(x))
        .with_jacobian(move |x: &[f64]| Ok(gj.jacobian(x)))
        .with_hessian(move |i: usize, x: &[f64]| gh.hessian(i, x))
        .with_partition(w, nonlinear)?
        .with_names(var_names, eq_names)?;

    let reference = infinite_grid_guess(params);
    let mut case = ProblemCase {
        name: format!("ac({},{})", params.n, params.x),
        model,
        presets: vec![("test1".into(), reference.clone())],
        exact_solution: None,
        reference: reference.clone(),
    };
    if params.n >= 20 {
        for t in 2..=11 {
            let overrides = test_overrides(t).expect("tests 2..11 are defined");
            let x = super::perturb_preset(&case, &reference, &overrides)?;
            case.presets.push((format!("test{t}"), x));
        }
    }
    if *params == AcGridParams::default() {
        case.name = "ac".into();
    }
    Ok(case)
}

/// Node coordinates of an AC equation or variable name such as `kcl_3_4_re`.
pub fn node_of(name: &str) -> Option<(usize, usize)> {
    let mut nums = name.split('_').filter_map(|t| t.parse::<usize>().ok());
    Some((nums.next()?, nums.next()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let case = ac_grid(&AcGridParams { n: 2, ..Default::default() }).unwrap();
        assert_eq!(case.model.m(), 24);
        let case = ac_grid(&AcGridParams::default()).unwrap();
        assert_eq!(case.model.m(), 3120);
        assert_eq!(case.model.p(), 798);
        assert_eq!(case.model.m() - case.model.p(), 2322);
        assert_eq!(case.model.q(), 4 * 400 - 4);
        assert_eq!(case.presets.len(), 11);
    }

    #[test]
    fn odd_grid_rejected() {
        assert!(ac_grid(&AcGridParams { n: 5, ..Default::default() }).is_err());
    }

    #[test]
    fn load_voltage_has_unit_magnitude() {
        for x in [0.0001, 0.4, 1.0, 3.0] {
            let params = AcGridParams { n: 4, x, p: 1.0 };
            let g = infinite_grid_guess(&params);
            let lay = Layout { n: 4 };
            let a = lay.v(2, 1);
            assert!(((g[a] * g[a] + g[a + 1] * g[a + 1]).sqrt() - 1.0).abs() < 1e-14);
            let b = lay.v(1, 1);
            assert!((g[b] - params.v_g()).abs() < 1e-15 && g[b + 1] == 0.0);
        }
        let g = infinite_grid_guess(&AcGridParams { n: 4, x: 1e-9, p: 1.0 });
        assert!((g[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_grid_residual_confined_to_edges() {
        let params = AcGridParams { n: 6, ..Default::default() };
        let case = ac_grid(&params).unwrap();
        let f = case.model.eval(&infinite_grid_guess(&params)).unwrap();
        let mut edge_nonzero = 0;
        for (i, name) in case.model.eq_names().iter().enumerate() {
            let interior = match node_of(name) {
                Some((a, b)) => (2..params.n).contains(&a) && (2..params.n).contains(&b),
                None => true,
            };
            if interior || !name.starts_with("kcl") {
                assert!(f[i].abs() <= 1e-10, "{name}: {}", f[i]);
            } else if f[i].abs() > 1e-10 {
                edge_nonzero += 1;
            }
        }
        assert!(edge_nonzero > 0);
    }

    #[test]
    fn test_seven_bundle() {
        let case = ac_grid(&AcGridParams::default()).unwrap();
        let x = case.preset("test7").unwrap();
        let j = case.model.var_index("v_5_1_im").unwrap();
        assert!((x[j] - 0.5 * case.reference[j]).abs() < 1e-15);
        let j = case.model.var_index("in_13_20_re").unwrap();
        assert!((x[j] - 0.1 * case.reference[j]).abs() < 1e-15);
        let j = case.model.var_index("in_12_20_re").unwrap();
        assert_eq!(x[j], case.reference[j]);
    }
}
