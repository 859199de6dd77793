//! Fixed-format MPS export.
//!
//! Fixed MPS allows at most eight characters per name, so rows and columns
//! are written as `R0000001`, `C0000001`, ... and the original names are kept
//! in `*` comment lines. Maximisation problems are written with the objective
//! negated (fixed MPS has no sense marker); a comment records this.

use std::fmt::Write as _;

use crate::scalar::Scalar;

use super::{Direction, LinearProgram, Sense};

const OBJ: &str = "COST";

fn number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for prec in (0..=8).rev() {
        let s = format!("{v:.prec$E}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:.0E}")
}

/// One data line with the classic field columns 2-3, 5-12, 15-22, 25-36,
/// 40-47 and 50-61.
fn line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str, f5: Option<(&str, &str)>) {
    let mut s = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}");
    if let Some((f5, f6)) = f5 {
        let _ = write!(s, "   {f5:<8}  {f6:>12}");
    }
    out.push_str(s.trim_end());
    out.push('\n');
}

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

pub fn write_fixed_mps<T: Scalar>(lp: &LinearProgram<T>, name: &str) -> String {
    let mut out = String::new();
    let negate = lp.objective.direction == Direction::Maximize;
    if negate {
        out.push_str("* objective negated: original problem maximises\n");
    }
    for (j, v) in lp.variables.iter().enumerate() {
        let _ = writeln!(out, "* {} {}", col_name(j), v.name);
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        let _ = writeln!(out, "* {} {}", row_name(i), c.name);
    }
    let short: String = name.chars().take(8).collect();
    let _ = writeln!(out, "NAME          {short}");

    out.push_str("ROWS\n");
    line(&mut out, "N", OBJ, "", "", None);
    for (i, c) in lp.constraints.iter().enumerate() {
        let t = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        line(&mut out, t, &row_name(i), "", "", None);
    }

    // column-major entries
    let n = lp.variables.len();
    let mut cols: Vec<Vec<(String, f64)>> = vec![Vec::new(); n];
    for (v, c) in &lp.objective.terms {
        let c = c.to_f64_lossy();
        cols[v.0].push((OBJ.to_string(), if negate { -c } else { c }));
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        for (v, a) in &c.terms {
            cols[v.0].push((row_name(i), a.to_f64_lossy()));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, entries) in cols.iter().enumerate() {
        let cn = col_name(j);
        if entries.is_empty() {
            line(&mut out, "", &cn, OBJ, "0", None);
            continue;
        }
        for pair in entries.chunks(2) {
            let (r1, v1) = &pair[0];
            let second = pair.get(1).map(|(r2, v2)| (r2.as_str(), number(*v2)));
            match &second {
                Some((r2, v2)) => line(&mut out, "", &cn, r1, &number(*v1), Some((r2, v2))),
                None => line(&mut out, "", &cn, r1, &number(*v1), None),
            }
        }
    }

    out.push_str("RHS\n");
    let mut rhs: Vec<(String, f64)> = Vec::new();
    let k = lp.objective.constant.to_f64_lossy();
    if k != 0.0 {
        // objective constant enters as minus the rhs of the objective row
        rhs.push((OBJ.to_string(), if negate { k } else { -k }));
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        let b = c.rhs.to_f64_lossy();
        if b != 0.0 {
            rhs.push((row_name(i), b));
        }
    }
    for pair in rhs.chunks(2) {
        let (r1, v1) = &pair[0];
        match pair.get(1) {
            Some((r2, v2)) => line(&mut out, "", "RHS", r1, &number(*v1), Some((r2, &number(*v2)))),
            None => line(&mut out, "", "RHS", r1, &number(*v1), None),
        }
    }

    out.push_str("BOUNDS\n");
    for (j, v) in lp.variables.iter().enumerate() {
        let cn = col_name(j);
        let lo = v.lower.as_ref().map(|x| x.to_f64_lossy());
        let up = v.upper.as_ref().map(|x| x.to_f64_lossy());
        match (lo, up) {
            (None, None) => line(&mut out, "FR", "BND", &cn, "", None),
            (Some(l), Some(u)) if l == u => line(&mut out, "FX", "BND", &cn, &number(l), None),
            (lo, up) => {
                match lo {
                    None => line(&mut out, "MI", "BND", &cn, "", None),
                    Some(l) if l != 0.0 || up.is_some_and(|u| u < 0.0) => {
                        line(&mut out, "LO", "BND", &cn, &number(l), None)
                    }
                    Some(_) => {}
                }
                if let Some(u) = up {
                    line(&mut out, "UP", "BND", &cn, &number(u), None);
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_small_program() {
        let mut lp = LinearProgram::<f64>::new(Direction::Maximize);
        let x = lp.add_variable("x", Some(0.0), Some(10.0));
        let y = lp.add_variable("y", None, None);
        let z = lp.add_variable("z", Some(1.5), Some(1.5));
        lp.add_constraint("cap", [(x, 1.0), (y, 2.5)], Sense::Le, 3.0);
        lp.add_constraint("bal", [(y, -1.0), (z, 1.0)], Sense::Eq, 0.0);
        lp.set_objective(Direction::Maximize, [(x, 1.0)]);
        let text = write_fixed_mps(&lp, "tiny");
        let expected = "\
* objective negated: original problem maximises
* C0000001 x
* C0000002 y
* C0000003 z
* R0000001 cap
* R0000002 bal
NAME          tiny
ROWS
 N  COST
 L  R0000001
 E  R0000002
COLUMNS
    C0000001  COST                -1   R0000001             1
    C0000002  R0000001           2.5   R0000002            -1
    C0000003  R0000002             1
RHS
    RHS       R0000001             3
BOUNDS
 UP BND       C0000001            10
 FR BND       C0000002
 FX BND       C0000003           1.5
ENDATA
";
        assert_eq!(text, expected);
        // field 3 starts in column 15, field 4 ends in column 36
        let data = text.lines().find(|l| l.contains("C0000002  R0000001")).unwrap();
        assert_eq!(&data[14..22], "R0000001");
        assert_eq!(&data[33..36], "2.5");
        assert_eq!(&data[39..47], "R0000002");
    }

    #[test]
    fn long_numbers_fit_field() {
        assert!(number(1.0 / 3.0).len() <= 12);
        assert!(number(-123456789.123456).len() <= 12);
        assert_eq!(number(2.0), "2");
    }
}
