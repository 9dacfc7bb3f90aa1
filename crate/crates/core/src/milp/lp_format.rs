//! CPLEX-style LP text dump, for diffing against external solvers.

use std::fmt::Write;

use super::model::{MilpModel, Var, VarKind};
use crate::Sense;

fn ident(raw: &str, fallback: &str) -> String {
    let s: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    match s.chars().next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => s,
        Some(_) => format!("_{s}"),
        None => fallback.to_string(),
    }
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn expr(out: &mut String, coeffs: &[(Var, f64)], names: &[String]) {
    if coeffs.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (i, &(v, c)) in coeffs.iter().enumerate() {
        let sign = if c < 0.0 { '-' } else { '+' };
        if i == 0 && sign == '+' {
            let _ = write!(out, " {} {}", num(c.abs()), names[v.index()]);
        } else {
            let _ = write!(out, " {sign} {} {}", num(c.abs()), names[v.index()]);
        }
    }
}

/// Renders `model` in LP format. Variable and row names are sanitized.
pub fn write_lp(model: &MilpModel) -> String {
    let names: Vec<String> = model
        .vars()
        .iter()
        .enumerate()
        .map(|(i, v)| ident(&v.name, &format!("x{i}")))
        .collect();
    let mut out = String::new();
    let obj = model.objective();
    out.push_str(match obj.sense {
        Sense::Max => "Maximize\n",
        Sense::Min => "Minimize\n",
    });
    out.push_str(" obj:");
    expr(&mut out, &obj.coeffs, &names);
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints().iter().enumerate() {
        let _ = write!(out, " {}:", ident(&c.name, &format!("c{i}")));
        if c.lower == c.upper {
            expr(&mut out, &c.coeffs, &names);
            let _ = writeln!(out, " = {}", num(c.upper));
        } else if c.lower.is_finite() && c.upper.is_finite() {
            let _ = write!(out, " {} <=", num(c.lower));
            expr(&mut out, &c.coeffs, &names);
            let _ = writeln!(out, " <= {}", num(c.upper));
        } else if c.upper.is_finite() {
            expr(&mut out, &c.coeffs, &names);
            let _ = writeln!(out, " <= {}", num(c.upper));
        } else {
            expr(&mut out, &c.coeffs, &names);
            let _ = writeln!(out, " >= {}", num(c.lower));
        }
    }
    out.push_str("Bounds\n");
    for (v, name) in model.vars().iter().zip(&names) {
        if v.kind == VarKind::Binary {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            _ => {
                let _ = writeln!(out, " {} <= {name} <= {}", num(v.lower), num(v.upper));
            }
        }
    }
    let bins: Vec<&str> = model
        .vars()
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for chunk in bins.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Relation;

    #[test]
    fn renders_all_sections() {
        let mut m = MilpModel::new();
        let w = m.add_continuous("w[0]", 0.0, f64::INFINITY);
        let d = m.add_continuous("d", f64::NEG_INFINITY, f64::INFINITY);
        let b = m.add_binary("b 1");
        m.add_range("win", [(w, 1.0), (d, -2.0)], 3.0, 5.0);
        m.add_constraint("link", [(w, 1.0), (b, -10.0)], Relation::Le, 0.0);
        m.set_objective(Sense::Max, [(w, 1.0)]);
        let lp = write_lp(&m);
        assert_eq!(
            lp,
            "Maximize\n obj: 1 w[0]\nSubject To\n win: 3 <= 1 w[0] - 2 d <= 5\n \
             link: 1 w[0] - 10 b_1 <= 0\nBounds\n 0 <= w[0] <= inf\n d free\nBinaries\n b_1\nEnd\n"
        );
    }
}
