//! Free-format MPS and CPLEX-LP writers, an MPS reader, and plain-text solution files.
//!
//! Column names encode [`VarTag`]s and row names encode [`Family`]s, so a model
//! written and read back is equal to the original.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::model::{Family, MilpModel, Sense, VarId, VarKind, VarTag};
use crate::error::{Error, Result};

const OBJ_ROW: &str = "obj";

pub fn write_mps(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("NAME vnfpr\nROWS\n");
    let _ = writeln!(out, " N {OBJ_ROW}");
    for (r, c) in model.constraints.iter().enumerate() {
        let s = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {s} {}", model.row_name(r));
    }

    // Column-major view of the rows.
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (r, c) in model.constraints.iter().enumerate() {
        for &(v, a) in &c.terms {
            columns[v.0].push((r, a));
        }
    }
    let mut obj = vec![0.0; model.num_vars()];
    for &(v, c) in &model.objective {
        obj[v.0] = c;
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for (j, var) in model.variables.iter().enumerate() {
        let is_int = var.kind == VarKind::Binary;
        if is_int != in_int {
            let tag = if is_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    MARKER 'MARKER' '{tag}'");
            in_int = is_int;
        }
        let mut entries: Vec<(String, f64)> = Vec::new();
        if obj[j] != 0.0 || columns[j].is_empty() {
            entries.push((OBJ_ROW.to_string(), obj[j]));
        }
        entries.extend(columns[j].iter().map(|&(r, a)| (model.row_name(r), a)));
        // At most two entries per record.
        for pair in entries.chunks(2) {
            let _ = write!(out, "    {}", var.name);
            for (row, a) in pair {
                let _ = write!(out, " {row} {a}");
            }
            out.push('\n');
        }
    }
    if in_int {
        out.push_str("    MARKER 'MARKER' 'INTEND'\n");
    }
    out.push_str("RHS\n");
    for (r, c) in model.constraints.iter().enumerate() {
        if c.rhs != 0.0 {
            let _ = writeln!(out, "    rhs {} {}", model.row_name(r), c.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for var in &model.variables {
        if var.kind == VarKind::Binary {
            let _ = writeln!(out, " BV bnd {}", var.name);
            continue;
        }
        match (var.lower, var.upper) {
            (l, u) if l == u => {
                let _ = writeln!(out, " FX bnd {} {l}", var.name);
            }
            (l, u) => {
                if l == f64::NEG_INFINITY && u == f64::INFINITY {
                    let _ = writeln!(out, " FR bnd {}", var.name);
                    continue;
                }
                if l == f64::NEG_INFINITY {
                    let _ = writeln!(out, " MI bnd {}", var.name);
                } else if l != 0.0 {
                    let _ = writeln!(out, " LO bnd {} {l}", var.name);
                }
                if u != f64::INFINITY {
                    let _ = writeln!(out, " UP bnd {} {u}", var.name);
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

/// Parses a free-format MPS file written by [`write_mps`] or by another tool.
///
/// Integer columns must be binary; ranges are not supported.
pub fn read_mps(text: &str) -> Result<MilpModel> {
    let mut section = Section::None;
    let mut row_index: HashMap<String, Option<usize>> = HashMap::new();
    let mut rows: Vec<(String, Sense)> = Vec::new();
    let mut row_terms: Vec<Vec<(VarId, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut cols: Vec<(String, bool)> = Vec::new();
    let mut bounds: Vec<(f64, f64, bool)> = Vec::new();
    let mut objective: Vec<(VarId, f64)> = Vec::new();
    let mut in_int = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let perr = |message: String| Error::Parse { line, message };
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match fields[0] {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                "RANGES" => return Err(perr("RANGES section is not supported".into())),
                other => return Err(perr(format!("unknown section {other}"))),
            };
            continue;
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad number `{s}`"),
            })
        };
        match section {
            Section::Rows => {
                let [kind, name] = fields[..] else {
                    return Err(perr("expected `<type> <name>`".into()));
                };
                let sense = match kind {
                    "N" => {
                        row_index.insert(name.to_string(), None);
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    _ => return Err(perr(format!("unknown row type {kind}"))),
                };
                row_index.insert(name.to_string(), Some(rows.len()));
                rows.push((name.to_string(), sense));
                row_terms.push(Vec::new());
                rhs.push(0.0);
            }
            Section::Columns => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    match fields[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        m => return Err(perr(format!("unknown marker {m}"))),
                    }
                    continue;
                }
                if fields.len() < 3 || fields.len() % 2 == 0 {
                    return Err(perr("expected `<column> (<row> <value>)+`".into()));
                }
                let col = match col_index.get(fields[0]) {
                    Some(&c) => c,
                    None => {
                        col_index.insert(fields[0].to_string(), cols.len());
                        cols.push((fields[0].to_string(), in_int));
                        bounds.push((0.0, f64::INFINITY, false));
                        cols.len() - 1
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let value = num(pair[1])?;
                    match row_index.get(pair[0]) {
                        Some(None) => objective.push((VarId(col), value)),
                        Some(Some(r)) => row_terms[*r].push((VarId(col), value)),
                        None => return Err(perr(format!("unknown row {}", pair[0]))),
                    }
                }
            }
            Section::Rhs => {
                if fields.len() < 3 || fields.len() % 2 == 0 {
                    return Err(perr("expected `<set> (<row> <value>)+`".into()));
                }
                for pair in fields[1..].chunks(2) {
                    let value = num(pair[1])?;
                    match row_index.get(pair[0]) {
                        Some(None) => {}
                        Some(Some(r)) => rhs[*r] = value,
                        None => return Err(perr(format!("unknown row {}", pair[0]))),
                    }
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(perr("expected `<type> <set> <column> [value]`".into()));
                }
                let col = *col_index
                    .get(fields[2])
                    .ok_or_else(|| perr(format!("unknown column {}", fields[2])))?;
                let value = || -> Result<f64> {
                    fields
                        .get(3)
                        .ok_or_else(|| Error::Parse {
                            line,
                            message: "missing bound value".into(),
                        })
                        .and_then(|s| num(s))
                };
                let b = &mut bounds[col];
                match fields[0] {
                    "UP" | "UI" => b.1 = value()?,
                    "LO" | "LI" => b.0 = value()?,
                    "FX" => {
                        let v = value()?;
                        *b = (v, v, b.2);
                    }
                    "FR" => {
                        b.0 = f64::NEG_INFINITY;
                        b.1 = f64::INFINITY;
                    }
                    "MI" => b.0 = f64::NEG_INFINITY,
                    "PL" => b.1 = f64::INFINITY,
                    "BV" => *b = (0.0, 1.0, true),
                    t => return Err(perr(format!("unknown bound type {t}"))),
                }
            }
            Section::None | Section::End => return Err(perr("data outside a section".into())),
        }
    }
    if section != Section::End {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: "missing ENDATA".into(),
        });
    }

    let mut model = MilpModel::new();
    for (j, (name, is_int)) in cols.into_iter().enumerate() {
        let (lower, upper, bv) = bounds[j];
        let binary = bv || is_int;
        if binary && !(lower == 0.0 && upper == 1.0) {
            return Err(Error::Parse {
                line: 0,
                message: format!("integer column {name} is not binary"),
            });
        }
        let kind = if binary {
            VarKind::Binary
        } else {
            VarKind::Continuous
        };
        let tag = VarTag::parse(&name);
        model.add_variable(name, kind, lower, upper, tag);
    }
    for (r, ((name, sense), terms)) in rows.into_iter().zip(row_terms).enumerate() {
        let family = name
            .rsplit_once('_')
            .and_then(|(f, _)| Family::from_str(f))
            .unwrap_or(Family::External);
        model.add_constraint(terms, sense, rhs[r], family);
    }
    model.set_objective(objective);
    Ok(model)
}

/// CPLEX LP format, for inspection and for feeding external solvers.
pub fn write_lp(model: &MilpModel) -> String {
    let mut out = String::from("\\ vnfpr model\nMinimize\n obj:");
    let term = |out: &mut String, v: VarId, c: f64| {
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", c.abs(), model.variables[v.0].name);
    };
    if model.objective.is_empty() {
        out.push_str(" 0");
    }
    for &(v, c) in &model.objective {
        term(&mut out, v, c);
    }
    out.push_str("\nSubject To\n");
    for (r, c) in model.constraints.iter().enumerate() {
        let _ = write!(out, " {}:", model.row_name(r));
        for &(v, a) in &c.terms {
            term(&mut out, v, a);
        }
        let s = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {s} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for v in model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Continuous)
    {
        let lo = if v.lower == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            v.lower.to_string()
        };
        let up = if v.upper == f64::INFINITY {
            "+inf".to_string()
        } else {
            v.upper.to_string()
        };
        let _ = writeln!(out, " {lo} <= {} <= {up}", v.name);
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

/// One `name value` line per non-zero variable.
pub fn write_solution(model: &MilpModel, values: &[f64]) -> String {
    let mut out = String::from("# variable value\n");
    for (v, &x) in model.variables.iter().zip(values) {
        if x != 0.0 {
            let _ = writeln!(out, "{} {x}", v.name);
        }
    }
    out
}

/// Reads `name value` lines (`#` starts a comment); unlisted variables are zero.
pub fn read_solution(model: &MilpModel, text: &str) -> Result<Vec<f64>> {
    let index: HashMap<&str, usize> = model
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let mut values = vec![0.0; model.num_vars()];
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line,
                message: "expected `<variable> <value>`".into(),
            });
        };
        let &j = index.get(name).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown variable {name}"),
        })?;
        values[j] = value.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad number `{value}`"),
        })?;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_tagged(
            VarTag::MaxUtilization,
            VarKind::Continuous,
            0.0,
            f64::INFINITY,
        );
        let y = m.add_variable("b".into(), VarKind::Binary, 0.0, 1.0, None);
        let z = m.add_variable("c".into(), VarKind::Continuous, -1.5, 2.25, None);
        m.add_constraint(
            vec![(x, 1.0), (y, -0.1)],
            Sense::Ge,
            0.0,
            Family::LinkUtilization,
        );
        m.add_constraint(
            vec![(y, 1.0), (z, 1.0)],
            Sense::Eq,
            1.0 / 3.0,
            Family::External,
        );
        m.set_objective(vec![(x, 1.0), (z, 1e-7)]);
        m
    }

    #[test]
    fn mps_round_trip() {
        let m = tiny();
        let text = write_mps(&m);
        let back = read_mps(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.var(VarTag::MaxUtilization), Some(VarId(0)));
    }

    #[test]
    fn mps_errors_carry_lines() {
        let text = "NAME t\nROWS\n N obj\n Q r\nENDATA\n";
        match read_mps(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_mps("NAME t\nROWS\n N obj\n").is_err());
    }

    #[test]
    fn solution_files() {
        let m = tiny();
        let text = "# comment\nU 0.5\n\nc -1 # trailing\n";
        assert_eq!(read_solution(&m, text).unwrap(), vec![0.5, 0.0, -1.0]);
        let back = read_solution(&m, &write_solution(&m, &[0.5, 1.0, 0.0])).unwrap();
        assert_eq!(back, vec![0.5, 1.0, 0.0]);
        match read_solution(&m, "U 1\nq 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lp_lists_everything() {
        let lp = write_lp(&tiny());
        assert!(lp.contains("util_0: + 1 U - 0.1 b >= 0"));
        assert!(lp.contains("Binaries\n b\n"));
        assert!(lp.contains("-1.5 <= c <= 2.25"));
    }
}
