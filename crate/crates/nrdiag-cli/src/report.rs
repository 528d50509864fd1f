//! Combined solve and diagnostic report: JSON schema and text rendering.

use std::fmt::Write as _;

use nrdiag::diagnostics::{DiagnosticReport, IndicatorEntry, IndicatorKind};
use nrdiag::{SolveReport, SystemModel};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub case: String,
    pub preset: Option<String>,
    pub status: String,
    pub iterations: usize,
    #[serde(with = "number")]
    pub lambda: f64,
    pub norms: Norms,
    pub alpha: Vec<Alpha>,
    pub gamma: Vec<Gamma>,
    /// Signed σ_jj, ordered by descending magnitude.
    pub sigma_diag: Vec<Sigma>,
    /// Absent when the first step could not be taken.
    pub sufficient_condition: Option<Sufficient>,
    pub suspects: Vec<Suspect>,
    pub solve: SolveSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    #[serde(with = "number")]
    pub f_x0_inf: f64,
    #[serde(with = "number")]
    pub r_x0_inf: f64,
    #[serde(with = "number")]
    pub f_x1_star_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alpha {
    pub eq: String,
    #[serde(with = "number")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub eq: String,
    pub var_j: String,
    pub var_k: String,
    #[serde(with = "number")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sigma {
    pub var: String,
    #[serde(with = "number")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sufficient {
    #[serde(with = "number")]
    pub alpha: f64,
    #[serde(with = "number")]
    pub beta: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suspect {
    pub var: String,
    #[serde(with = "number")]
    pub score: f64,
    pub critical: bool,
    pub direction: String,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub kind: String,
    #[serde(with = "number")]
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    #[serde(with = "number")]
    pub final_residual_inf: f64,
    #[serde(with = "number")]
    pub min_rcond: f64,
    pub ill_conditioned_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Finite numbers as JSON numbers, non-finite ones as "NaN", "Infinity" or
/// "-Infinity".
mod number {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("Infinity")
        } else {
            s.serialize_str("-Infinity")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "NaN" => Ok(f64::NAN),
                "Infinity" => Ok(f64::INFINITY),
                "-Infinity" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("expected a number, got \"{other}\""))),
            },
        }
    }
}

impl Report {
    /// Assembles the report. `diagnostics` is `Err` with a message when the
    /// first step could not be taken.
    pub fn new(
        model: &SystemModel,
        case: &str,
        preset: Option<&str>,
        solve: &SolveReport,
        diagnostics: Result<&DiagnosticReport, String>,
    ) -> Self {
        let vars = model.var_names();
        let eqs = model.eq_names();
        let summary = SolveSummary {
            final_residual_inf: solve.final_residual_inf,
            min_rcond: solve.min_rcond,
            ill_conditioned_steps: solve.ill_conditioned_steps,
            failure: solve.failure.as_ref().map(ToString::to_string),
        };
        let mut report = Self {
            schema: SCHEMA_VERSION,
            case: case.to_string(),
            preset: preset.map(str::to_string),
            status: solve.status.as_str().to_string(),
            iterations: solve.iterations,
            lambda: solve.lambda_used,
            norms: Norms { f_x0_inf: f64::NAN, r_x0_inf: f64::NAN, f_x1_star_inf: f64::NAN },
            alpha: Vec::new(),
            gamma: Vec::new(),
            sigma_diag: Vec::new(),
            sufficient_condition: None,
            suspects: Vec::new(),
            solve: summary,
            note: None,
        };
        let d = match diagnostics {
            Ok(d) => d,
            Err(msg) => {
                report.note = Some(msg);
                return report;
            }
        };
        let name = |list: &[String], i: Option<usize>| i.map(|i| list[i].clone()).unwrap_or_default();
        report.lambda = d.lambda;
        report.norms =
            Norms { f_x0_inf: d.norms.f_x0_inf, r_x0_inf: d.norms.r_x0_inf, f_x1_star_inf: d.norms.f_x1_star_inf };
        report.alpha = d.rankings.alpha.iter().map(|e| Alpha { eq: name(eqs, e.eq), value: e.value }).collect();
        report.gamma = d
            .rankings
            .gamma
            .iter()
            .map(|e| Gamma {
                eq: name(eqs, e.eq),
                var_j: name(vars, e.var_j),
                var_k: name(vars, e.var_k),
                value: e.value,
            })
            .collect();
        report.sigma_diag = d
            .rankings
            .sigma
            .iter()
            .map(|e| {
                let j = e.var_j.expect("sigma entries name a variable");
                Sigma { var: vars[j].clone(), value: d.sigma.diag(j).unwrap_or(f64::NAN) }
            })
            .collect();
        report.sufficient_condition =
            Some(Sufficient { alpha: d.sufficient.alpha, beta: d.sufficient.beta, holds: d.sufficient.holds });
        report.suspects = d
            .rankings
            .suspects
            .iter()
            .map(|s| Suspect {
                var: vars[s.var].clone(),
                score: s.score,
                critical: s.critical,
                direction: s.direction.as_str().to_string(),
                evidence: s.evidence.iter().map(|e| evidence(e, eqs)).collect(),
            })
            .collect();
        report.note = d.note.clone();
        report
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Human-readable rendering. Every number of the JSON form appears, in
    /// the same order, formatted by [`fmt_num`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let preset = self.preset.as_deref().unwrap_or("-");
        let _ = writeln!(out, "case {}  preset {}", self.case, preset);
        let _ =
            writeln!(out, "status {}  iterations {}  lambda {}", self.status, self.iterations, fmt_num(self.lambda));
        let _ = writeln!(
            out,
            "norms  |f(x0)| {}  |r(x0)| {}  |f(x1*)| {}",
            fmt_num(self.norms.f_x0_inf),
            fmt_num(self.norms.r_x0_inf),
            fmt_num(self.norms.f_x1_star_inf)
        );

        let _ = writeln!(out, "\nalpha");
        for a in &self.alpha {
            let _ = writeln!(out, "  {:<28} {}", a.eq, fmt_num(a.value));
        }
        let _ = writeln!(out, "\ngamma");
        for g in &self.gamma {
            let _ = writeln!(out, "  {:<28} {:<14} {:<14} {}", g.eq, g.var_j, g.var_k, fmt_num(g.value));
        }
        let _ = writeln!(out, "\nsigma diagonal");
        for s in &self.sigma_diag {
            let _ = writeln!(out, "  {:<28} {}", s.var, fmt_num(s.value));
        }

        let _ = writeln!(out);
        match &self.sufficient_condition {
            Some(c) => {
                let verdict = if c.holds { "holds" } else { "does not hold" };
                let _ = writeln!(
                    out,
                    "sufficient condition  alpha {}  beta {}  {verdict}",
                    fmt_num(c.alpha),
                    fmt_num(c.beta)
                );
            }
            None => {
                let _ = writeln!(out, "sufficient condition  unavailable");
            }
        }

        let _ = writeln!(out, "\nsuspects");
        for (rank, s) in self.suspects.iter().enumerate() {
            let flag = if s.critical { "critical" } else { "-" };
            let evidence: Vec<String> = s
                .evidence
                .iter()
                .map(|e| match &e.eq {
                    Some(eq) => format!("{} {} @ {eq}", e.kind, fmt_num(e.value)),
                    None => format!("{} {}", e.kind, fmt_num(e.value)),
                })
                .collect();
            let _ = writeln!(
                out,
                "  {:>4}. {:<14} {} {:<8} {:<9} [{}]",
                rank + 1,
                s.var,
                fmt_num(s.score),
                flag,
                s.direction,
                evidence.join(", ")
            );
        }

        let _ = writeln!(
            out,
            "\nsolve  |f(final)| {}  min rcond {}  ill-conditioned steps {}",
            fmt_num(self.solve.final_residual_inf),
            fmt_num(self.solve.min_rcond),
            self.solve.ill_conditioned_steps
        );
        if let Some(f) = &self.solve.failure {
            let _ = writeln!(out, "failure: {f}");
        }
        if let Some(n) = &self.note {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    /// All numeric fields in rendering order.
    pub fn numbers(&self) -> Vec<f64> {
        let mut v = vec![self.lambda, self.norms.f_x0_inf, self.norms.r_x0_inf, self.norms.f_x1_star_inf];
        v.extend(self.alpha.iter().map(|a| a.value));
        v.extend(self.gamma.iter().map(|g| g.value));
        v.extend(self.sigma_diag.iter().map(|s| s.value));
        if let Some(c) = &self.sufficient_condition {
            v.extend([c.alpha, c.beta]);
        }
        for s in &self.suspects {
            v.push(s.score);
            v.extend(s.evidence.iter().map(|e| e.value));
        }
        v.extend([self.solve.final_residual_inf, self.solve.min_rcond]);
        v
    }
}

fn evidence(e: &IndicatorEntry, eqs: &[String]) -> Evidence {
    let eq = match e.kind {
        IndicatorKind::Sigma => None,
        _ => e.eq.map(|i| eqs[i].clone()),
    };
    Evidence { kind: e.kind.as_str().to_string(), value: e.value, eq }
}

/// Three decimals for moderate magnitudes, three-digit scientific otherwise.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let a = v.abs();
    if a == 0.0 || (5e-4..1e4).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.3e}")
    }
}
