//! Plain-text layout of tensors and vectors, indexed by coordinate name.

use std::fmt::Write;

use ostro_core::expr::Expr;

/// Section heading.
pub fn heading(out: &mut String, title: &str) {
    let _ = writeln!(out, "\n== {title} ==");
}

/// `label_name = value` per component.
pub fn components(out: &mut String, label: &str, names: &[String], values: &[Expr]) {
    for (name, v) in names.iter().zip(values) {
        let _ = writeln!(out, "  {label}_{name} = {v}");
    }
}

/// ASCII table of a square tensor with coordinate names on both axes.
pub fn matrix(out: &mut String, label: &str, names: &[String], cell: impl Fn(usize, usize) -> String) {
    let n = names.len();
    let cells: Vec<Vec<String>> = (0..n).map(|i| (0..n).map(|j| cell(i, j)).collect()).collect();
    let head = names.iter().map(String::len).max().unwrap_or(0).max(label.len());
    let widths: Vec<usize> = (0..n)
        .map(|j| cells.iter().map(|row| row[j].len()).max().unwrap_or(0).max(names[j].len()))
        .collect();
    let mut line = format!("  {label:<head$}");
    for (name, w) in names.iter().zip(&widths) {
        let _ = write!(line, " | {name:<w$}");
    }
    let _ = writeln!(out, "{}", line.trim_end());
    let mut rule = format!("  {}", "-".repeat(head));
    for w in &widths {
        let _ = write!(rule, "-+-{}", "-".repeat(*w));
    }
    let _ = writeln!(out, "{rule}");
    for (i, row) in cells.iter().enumerate() {
        let mut line = format!("  {:<head$}", names[i]);
        for (c, w) in row.iter().zip(&widths) {
            let _ = write!(line, " | {c:<w$}");
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
}

pub fn expr_matrix(out: &mut String, label: &str, names: &[String], m: &[Vec<Expr>]) {
    matrix(out, label, names, |i, j| m[i][j].to_string());
}

/// Whether every entry is a literal zero.
pub fn all_zero(m: &[Vec<Expr>]) -> bool {
    m.iter().flatten().all(Expr::is_zero)
}

/// Fixed-width scientific notation, stable across platforms.
pub fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

/// Short decimal for sample coordinates.
pub fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| num(*v)).collect();
    format!("({})", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_layout() {
        let mut out = String::new();
        let names = vec!["t".to_string(), "r".to_string()];
        matrix(&mut out, "M", &names, |i, j| if i == j { "1".into() } else { "0".into() });
        assert_eq!(out, "  M | t | r\n  --+---+--\n  t | 1 | 0\n  r | 0 | 1\n");
    }

    #[test]
    fn numbers() {
        assert_eq!(num(2.5), "2.5");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(3.0), "3");
        assert_eq!(list(&[1.0, -0.25]), "(1, -0.25)");
    }
}
