use std::fmt::Write as _;

use super::{MipModel, Sense};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn terms(coefs: impl Iterator<Item = (usize, f64)>, model: &MipModel) -> String {
    let mut out = String::new();
    for (i, a) in coefs {
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(a.abs()), model.vars[i].name);
    }
    if out.is_empty() {
        out.push_str(" 0");
    }
    out
}

/// CPLEX LP text of the model. Fields come in a fixed order and every number
/// is written with 17 significant digits.
pub fn to_lp_format(model: &MipModel) -> String {
    let mut out = String::from("\\ scenopt extensive form\nMinimize\n obj:");
    let obj = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.objective != 0.0)
        .map(|(i, v)| (i, v.objective));
    out.push_str(&terms(obj, model));
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(
            out,
            " {}:{} {op} {}",
            row.name,
            terms(row.coefs.iter().copied(), model),
            num(row.rhs)
        );
    }
    out.push_str("Bounds\n");
    for v in model.vars.iter().filter(|v| !v.binary) {
        let hi = if v.upper.is_finite() { num(v.upper) } else { "+inf".into() };
        let _ = writeln!(out, " {} <= {} <= {hi}", num(v.lower), v.name);
    }
    out.push_str("Binaries\n");
    for v in model.vars.iter().filter(|v| v.binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_in_order() {
        let mut m = MipModel::default();
        let x = m.add_continuous("x", 0.0, f64::INFINITY, 0.1);
        let y = m.add_binary("y", -2.0);
        m.add_row("r", vec![(x, 1.0), (y, -3.0)], Sense::Le, 0.0);
        let text = to_lp_format(&m);
        let pos = |s: &str| text.find(s).unwrap();
        assert!(pos("Minimize") < pos("Subject To"));
        assert!(pos("Subject To") < pos("Bounds"));
        assert!(pos("Bounds") < pos("Binaries"));
        assert!(text.contains(" obj: + 1.0000000000000001e-1 x - 2.0000000000000000e0 y"));
        assert!(text.contains(" r: + 1.0000000000000000e0 x - 3.0000000000000000e0 y <= 0.0000000000000000e0"));
        assert!(text.trim_end().ends_with("End"));
    }
}
