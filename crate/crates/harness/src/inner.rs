//! Text format for single inner problems, used by `ropo solve-inner`.
//!
//! ```text
//! # worst case of V over an L1 ball
//! kind l1-sa
//! radius 0.5
//! value 0 1
//! row 0.5 0.5
//! ```
//!
//! `kind` is `l1-sa`, `l1-s` or `kl`. The per-state L1 set takes one `row`
//! line per action and an optional `action` line naming the queried row
//! (default 0). Blank lines and `#` comments are ignored.

use std::path::Path;

use ropo_core::solvers::{sigma_kl, sigma_l1_s, sigma_l1_sa};
use ropo_core::{DualSolverResult, InnerProblem, UncertaintyKind};

use crate::error::{HarnessError, Result};
use crate::format::sig12;

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSpec {
    pub kind: UncertaintyKind,
    pub radius: f64,
    pub value: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub action: usize,
}

pub fn parse(path: &Path, text: &str) -> Result<InnerSpec> {
    let mut kind = None;
    let mut radius = None;
    let mut value = None;
    let mut rows = Vec::new();
    let mut action = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| HarnessError::parse(path, format!("line {}: {msg}", i + 1));
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let numbers = || -> Result<Vec<f64>> {
            rest.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(format!("field {key}: {t:?} is not a number"))))
                .collect()
        };
        let single = || -> Result<f64> {
            match numbers()?.as_slice() {
                [x] => Ok(*x),
                _ => Err(err(format!("field {key}: expected one number"))),
            }
        };
        let once = |seen: bool| if seen { Err(err(format!("field {key} given twice"))) } else { Ok(()) };
        match key {
            "kind" => {
                once(kind.is_some())?;
                kind = Some(match rest.trim() {
                    "l1-sa" => UncertaintyKind::L1Sa,
                    "l1-s" => UncertaintyKind::L1S,
                    "kl" => UncertaintyKind::Kl,
                    k => return Err(err(format!("field kind: unknown set {k:?}"))),
                });
            }
            "radius" => {
                once(radius.is_some())?;
                radius = Some(single()?);
            }
            "value" => {
                once(value.is_some())?;
                value = Some(numbers()?);
            }
            "row" => rows.push(numbers()?),
            "action" => {
                once(action.is_some())?;
                let a = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| err(format!("field action: {:?} is not an index", rest.trim())))?;
                action = Some(a);
            }
            k => return Err(err(format!("unknown field {k:?}"))),
        }
    }
    let missing = |f: &str| HarnessError::parse(path, format!("missing field {f}"));
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let value = value.ok_or_else(|| missing("value"))?;
    if rows.is_empty() {
        return Err(missing("row"));
    }
    if rows.len() > 1 && kind != UncertaintyKind::L1S {
        return Err(HarnessError::parse(path, "only the l1-s set takes several rows"));
    }
    Ok(InnerSpec {
        kind,
        radius: radius.ok_or_else(|| missing("radius"))?,
        value,
        rows,
        action: action.unwrap_or(0),
    })
}

pub fn solve(spec: &InnerSpec) -> Result<DualSolverResult> {
    let flat: Vec<f64> = spec.rows.concat();
    if spec.rows.iter().any(|r| r.len() != spec.value.len()) {
        return Err(HarnessError::config("every row needs one entry per value"));
    }
    if spec.radius == 0.0 {
        // Every set collapses to the nominal row; the KL dual is not
        // defined there.
        let p = InnerProblem::block(&flat, spec.action, &spec.value, 0.0)?;
        return Ok(DualSolverResult {
            sigma: p.nominal_expectation(),
            dual_point: Vec::new(),
            iterations: 0,
            residual: 0.0,
        });
    }
    let result = match spec.kind {
        UncertaintyKind::L1Sa => sigma_l1_sa(&InnerProblem::row(&flat, &spec.value, spec.radius)?)?,
        UncertaintyKind::L1S => sigma_l1_s(&InnerProblem::block(&flat, spec.action, &spec.value, spec.radius)?)?,
        UncertaintyKind::Kl => sigma_kl(&InnerProblem::row(&flat, &spec.value, spec.radius)?)?,
    };
    Ok(result)
}

/// The lines printed by the CLI.
pub fn render(result: &DualSolverResult) -> String {
    let dual: Vec<String> = result.dual_point.iter().map(|&x| sig12(x)).collect();
    format!(
        "sigma {}\ndual_point {}\niterations {}\nresidual {}\n",
        sig12(result.sigma),
        dual.join(" "),
        result.iterations,
        sig12(result.residual)
    )
}
