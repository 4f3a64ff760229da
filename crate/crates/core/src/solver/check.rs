//! Feasibility of a variable assignment against a model.

use crate::error::{Error, Result};
use crate::milp::{MilpModel, VarKind};

/// One violated row, bound or integrality requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelViolation {
    /// Row or variable name.
    pub name: String,
    /// Constraint family tag for rows, `bound` or `integrality` for variables.
    pub tag: String,
    /// Row index when the violation is a row.
    pub row: Option<usize>,
    /// Amount by which the requirement is missed (always positive).
    pub excess: f64,
}

/// Lists every requirement of `model` that `values` misses by more than the
/// model's tolerances. Row tolerances scale with `max(1, |rhs|)`.
pub fn check_feasible(model: &MilpModel, values: &[f64]) -> Result<Vec<ModelViolation>> {
    if values.len() != model.num_vars() {
        return Err(Error::Numeric(format!(
            "{} values for {} variables",
            values.len(),
            model.num_vars()
        )));
    }
    let tol = model.tolerances;
    let mut out = Vec::new();
    for (v, &x) in model.variables.iter().zip(values) {
        if !x.is_finite() {
            out.push(ModelViolation {
                name: v.name.clone(),
                tag: "bound".into(),
                row: None,
                excess: f64::INFINITY,
            });
            continue;
        }
        let below = v.lower - x;
        let above = x - v.upper;
        let excess = below.max(above);
        if excess > tol.feasibility * v.lower.abs().max(v.upper.abs()).clamp(1.0, 1e12) {
            out.push(ModelViolation {
                name: v.name.clone(),
                tag: "bound".into(),
                row: None,
                excess,
            });
        }
        if v.kind == VarKind::Binary {
            let frac = (x - x.round()).abs();
            if frac > tol.integrality {
                out.push(ModelViolation {
                    name: v.name.clone(),
                    tag: "integrality".into(),
                    row: None,
                    excess: frac,
                });
            }
        }
    }
    for (r, c) in model.constraints.iter().enumerate() {
        let excess = c.violation(values);
        if excess > tol.feasibility * c.rhs.abs().max(1.0) {
            out.push(ModelViolation {
                name: model.row_name(r),
                tag: c.family.as_str().into(),
                row: Some(r),
                excess,
            });
        }
    }
    Ok(out)
}

/// Like [`check_feasible`] but fails with the first violation's tag.
pub fn ensure_feasible(model: &MilpModel, values: &[f64]) -> Result<()> {
    match check_feasible(model, values)?.into_iter().next() {
        None => Ok(()),
        Some(v) => Err(Error::Rejected {
            tag: v.tag,
            violation: v.excess,
        }),
    }
}
