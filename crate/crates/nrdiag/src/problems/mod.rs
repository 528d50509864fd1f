//! Benchmark systems with named initial-guess presets.
//!
//! Case names follow the command-line vocabulary: `hex#1`..`hex#6`,
//! `dc#1`..`dc#5`, `ac-test1`..`ac-test11`, and the parametric grid
//! `ac(N,X)`, optionally followed by `#preset`.

pub mod ac_grid;
pub mod dc_circuit;
pub mod heat_exchanger;

use thiserror::Error;

use crate::model::{ModelError, SystemModel};

pub use ac_grid::{ac_grid, infinite_grid_guess, AcGridParams};
pub use dc_circuit::{dc_circuit, DcCircuitParams};
pub use heat_exchanger::{heat_exchanger, HeatExchangerParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("case `{case}` has no preset `{preset}`")]
    UnknownPreset { case: String, preset: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A benchmark instance: model, named initial guesses and known solution.
#[derive(Debug, Clone)]
pub struct ProblemCase {
    pub name: String,
    pub model: SystemModel,
    /// Presets in display order.
    pub presets: Vec<(String, Vec<f64>)>,
    pub exact_solution: Option<Vec<f64>>,
    /// Values that `Override::Scale` factors multiply: the exact solution when
    /// known, otherwise the best available closed-form approximation.
    pub reference: Vec<f64>,
}

impl ProblemCase {
    pub fn preset(&self, name: &str) -> Option<&[f64]> {
        self.presets.iter().find(|(n, _)| n == name).map(|(_, x)| x.as_slice())
    }

    pub fn preset_names(&self) -> impl Iterator<Item = &str> {
        self.presets.iter().map(|(n, _)| n.as_str())
    }

    /// Resolves a variable name. A complex base name (`v_5_1`) resolves to its
    /// `_re` and `_im` components.
    pub fn resolve(&self, name: &str) -> Result<Vec<usize>, ProblemError> {
        if let Some(j) = self.model.var_index(name) {
            return Ok(vec![j]);
        }
        match (self.model.var_index(&format!("{name}_re")), self.model.var_index(&format!("{name}_im"))) {
            (Some(re), Some(im)) => Ok(vec![re, im]),
            _ => Err(ProblemError::UnknownVariable(name.to_string())),
        }
    }
}

/// A change to one initial-guess entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Override {
    /// Replace the value outright (real variables only).
    Set(f64),
    /// Set the entry to `factor` times its reference value; complex variables
    /// have both components scaled.
    Scale(f64),
}

/// Returns `guess` with the named entries replaced.
pub fn perturb_preset(
    case: &ProblemCase,
    guess: &[f64],
    overrides: &[(String, Override)],
) -> Result<Vec<f64>, ProblemError> {
    let mut x = guess.to_vec();
    for (name, change) in overrides {
        let idx = case.resolve(name)?;
        match *change {
            Override::Set(value) => {
                if idx.len() != 1 {
                    return Err(ProblemError::UnknownVariable(format!(
                        "{name} (set a component: {name}_re or {name}_im)"
                    )));
                }
                x[idx[0]] = value;
            }
            Override::Scale(factor) => {
                for j in idx {
                    x[j] = factor * case.reference[j];
                }
            }
        }
    }
    Ok(x)
}

/// Summary line data for listing.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseInfo {
    pub name: String,
    pub m: usize,
    pub q: usize,
    pub p: usize,
    pub presets: Vec<String>,
}

/// The built-in families with default parameters.
pub fn builtin_cases() -> Vec<ProblemCase> {
    vec![
        heat_exchanger(&HeatExchangerParams::default()).expect("default parameters are valid"),
        dc_circuit(&DcCircuitParams::default()).expect("default parameters are valid"),
        ac_grid(&AcGridParams::default()).expect("default parameters are valid"),
    ]
}

/// Parses a case name into the case and the preset it selects, if any.
///
/// Accepted forms: `hex`, `hex#3`, `dc#2`, `ac`, `ac-test4`, `ac#test4`,
/// `ac(20,1.0)`, `ac(4,0.4)#test1`.
pub fn lookup(spec: &str) -> Result<(ProblemCase, Option<String>), ProblemError> {
    let spec = spec.trim();
    let (base, preset) = if let Some(rest) = spec.strip_prefix("ac-") {
        ("ac", Some(rest.to_string()))
    } else {
        match spec.split_once('#') {
            Some((b, p)) => (b, Some(format!("#{p}"))),
            None => (spec, None),
        }
    };
    let case = match base {
        "hex" => heat_exchanger(&HeatExchangerParams::default())?,
        "dc" => dc_circuit(&DcCircuitParams::default())?,
        "ac" => ac_grid(&AcGridParams::default())?,
        _ => match parse_ac(base) {
            Some((n, x)) => ac_grid(&AcGridParams { n, x, ..AcGridParams::default() })?,
            None => return Err(ProblemError::UnknownCase(spec.to_string())),
        },
    };
    // AC presets are named `testK`; accept `#testK` too.
    let preset = preset.map(|p| {
        if case.preset(&p).is_none() {
            if let Some(bare) = p.strip_prefix('#') {
                if case.preset(bare).is_some() {
                    return bare.to_string();
                }
            }
        }
        p
    });
    if let Some(p) = &preset {
        if case.preset(p).is_none() {
            return Err(ProblemError::UnknownPreset { case: case.name.clone(), preset: p.clone() });
        }
    }
    Ok((case, preset))
}

fn parse_ac(s: &str) -> Option<(usize, f64)> {
    let inner = s.strip_prefix("ac(")?.strip_suffix(')')?;
    let (n, x) = inner.split_once(',')?;
    Some((n.trim().parse().ok()?, x.trim().parse().ok()?))
}

impl From<&ProblemCase> for CaseInfo {
    fn from(case: &ProblemCase) -> Self {
        Self {
            name: case.name.clone(),
            m: case.model.m(),
            q: case.model.q(),
            p: case.model.p(),
            presets: case.preset_names().map(str::to_string).collect(),
        }
    }
}
