//! Reductions applied before the simplex and undone afterwards.
//!
//! Only reductions with an exact postsolve are performed: fixed columns, row
//! singletons (turned into bounds), doubleton equalities (one column
//! substituted out), empty columns, and zero-cost column singletons in an
//! inequality row (fixed at the bound that loosens the row).

use std::collections::{BTreeMap, BTreeSet};

use crate::scalar::Scalar;

use super::Sense;

/// Minimisation problem with anonymous columns.
#[derive(Debug, Clone)]
pub(crate) struct StdProblem<T> {
    pub lower: Vec<Option<T>>,
    pub upper: Vec<Option<T>>,
    pub cost: Vec<T>,
    pub rows: Vec<StdRow<T>>,
}

#[derive(Debug, Clone)]
pub(crate) struct StdRow<T> {
    pub entries: Vec<(usize, T)>,
    pub sense: Sense,
    pub rhs: T,
}

impl<T> StdProblem<T> {
    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Fixed {
        col: usize,
        value: T,
    },
    /// `a_elim * x_elim + a_kept * x_kept = rhs`
    Doubleton {
        elim: usize,
        kept: usize,
        a_elim: T,
        a_kept: T,
        rhs: T,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Postsolve<T> {
    n_orig: usize,
    col_map: Vec<usize>,
    ops: Vec<Op<T>>,
}

impl<T: Scalar> Postsolve<T> {
    pub fn identity(n: usize) -> Self {
        Postsolve {
            n_orig: n,
            col_map: (0..n).collect(),
            ops: Vec::new(),
        }
    }

    /// Maps reduced-problem values back to a full assignment.
    pub fn restore(&self, reduced: &[T]) -> Vec<T> {
        let mut x: Vec<Option<T>> = vec![None; self.n_orig];
        for (r, &orig) in self.col_map.iter().enumerate() {
            x[orig] = Some(reduced[r].clone());
        }
        for op in self.ops.iter().rev() {
            match op {
                Op::Fixed { col, value } => x[*col] = Some(value.clone()),
                Op::Doubleton {
                    elim,
                    kept,
                    a_elim,
                    a_kept,
                    rhs,
                } => {
                    let xk = x[*kept].clone().expect("kept column restored before eliminated one");
                    x[*elim] = Some((rhs.clone() - a_kept.clone() * xk) / a_elim.clone());
                }
            }
        }
        x.into_iter()
            .map(|v| v.expect("every column restored"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Infeasibility {
    Row(usize),
    Column(usize),
}

struct Work<T> {
    rows: Vec<Option<(BTreeMap<usize, T>, Sense, T)>>,
    col_rows: Vec<BTreeSet<usize>>,
    alive: Vec<bool>,
    lower: Vec<Option<T>>,
    upper: Vec<Option<T>>,
    cost: Vec<T>,
    ops: Vec<Op<T>>,
    tol: T,
}

impl<T: Scalar> Work<T> {
    fn tol_at(&self, magnitude: &T) -> T {
        self.tol.clone() * (T::one() + magnitude.abs())
    }

    fn fix(&mut self, j: usize, value: T) {
        let rows: Vec<usize> = self.col_rows[j].iter().copied().collect();
        for r in rows {
            if let Some((coefs, _, rhs)) = self.rows[r].as_mut() {
                if let Some(a) = coefs.remove(&j) {
                    *rhs = rhs.clone() - a * value.clone();
                }
            }
        }
        self.col_rows[j].clear();
        self.alive[j] = false;
        self.lower[j] = Some(value.clone());
        self.upper[j] = Some(value.clone());
        self.ops.push(Op::Fixed { col: j, value });
    }

    fn drop_row(&mut self, r: usize) {
        if let Some((coefs, _, _)) = self.rows[r].take() {
            for j in coefs.keys() {
                self.col_rows[*j].remove(&r);
            }
        }
    }

    fn tighten_lower(&mut self, j: usize, v: T) -> Result<(), Infeasibility> {
        let better = match &self.lower[j] {
            Some(l) => v > *l,
            None => true,
        };
        if better {
            if let Some(u) = &self.upper[j] {
                if v > u.clone() + self.tol_at(u) {
                    return Err(Infeasibility::Column(j));
                }
                if v > *u {
                    self.lower[j] = Some(u.clone());
                    return Ok(());
                }
            }
            self.lower[j] = Some(v);
        }
        Ok(())
    }

    fn tighten_upper(&mut self, j: usize, v: T) -> Result<(), Infeasibility> {
        let better = match &self.upper[j] {
            Some(u) => v < *u,
            None => true,
        };
        if better {
            if let Some(l) = &self.lower[j] {
                if v < l.clone() - self.tol_at(l) {
                    return Err(Infeasibility::Column(j));
                }
                if v < *l {
                    self.upper[j] = Some(l.clone());
                    return Ok(());
                }
            }
            self.upper[j] = Some(v);
        }
        Ok(())
    }

    fn row_pass(&mut self) -> Result<bool, Infeasibility> {
        let mut changed = false;
        for r in 0..self.rows.len() {
            let Some((coefs, sense, rhs)) = self.rows[r].as_ref() else {
                continue;
            };
            let (sense, rhs) = (*sense, rhs.clone());
            match coefs.len() {
                0 => {
                    let tol = self.tol_at(&rhs);
                    let ok = match sense {
                        Sense::Le => rhs >= -tol,
                        Sense::Ge => rhs <= tol,
                        Sense::Eq => rhs.abs() <= tol,
                    };
                    if !ok {
                        return Err(Infeasibility::Row(r));
                    }
                    self.rows[r] = None;
                    changed = true;
                }
                1 => {
                    let (&j, a) = coefs.iter().next().expect("one entry");
                    let bound = rhs / a.clone();
                    let positive = a.is_positive();
                    match (sense, positive) {
                        (Sense::Eq, _) => {
                            self.tighten_lower(j, bound.clone())?;
                            self.tighten_upper(j, bound)?;
                        }
                        (Sense::Le, true) | (Sense::Ge, false) => self.tighten_upper(j, bound)?,
                        (Sense::Le, false) | (Sense::Ge, true) => self.tighten_lower(j, bound)?,
                    }
                    self.drop_row(r);
                    changed = true;
                }
                2 if sense == Sense::Eq => {
                    let mut it = coefs.iter();
                    let (&c1, a1) = it.next().expect("two entries");
                    let (&c2, a2) = it.next().expect("two entries");
                    let (a1, a2) = (a1.clone(), a2.clone());
                    let m1 = a1.abs();
                    let m2 = a2.abs();
                    let big = T::max_of(m1.clone(), m2.clone());
                    let ratio_ok = |m: &T| T::is_exact() || m.clone() * T::from_f64_lossy(1e3) >= big;
                    // eliminate the column touching fewer rows, if well scaled
                    let (elim, a_e, kept, a_k) = match (ratio_ok(&m1), ratio_ok(&m2)) {
                        (true, true) => {
                            if self.col_rows[c2].len() < self.col_rows[c1].len() {
                                (c2, a2, c1, a1)
                            } else {
                                (c1, a1, c2, a2)
                            }
                        }
                        (true, false) => (c1, a1, c2, a2),
                        (false, true) => (c2, a2, c1, a1),
                        (false, false) => continue,
                    };
                    self.eliminate_doubleton(r, elim, a_e, kept, a_k, rhs)?;
                    changed = true;
                }
                _ => {}
            }
        }
        Ok(changed)
    }

    fn eliminate_doubleton(
        &mut self,
        row: usize,
        elim: usize,
        a_e: T,
        kept: usize,
        a_k: T,
        rhs: T,
    ) -> Result<(), Infeasibility> {
        // x_kept = rhs/a_k - (a_e/a_k) x_elim, so x_elim's range maps onto x_kept
        let base = rhs.clone() / a_k.clone();
        let ratio = a_e.clone() / a_k.clone();
        let at = |x: &Option<T>| x.as_ref().map(|v| base.clone() - ratio.clone() * v.clone());
        let (lo, hi) = if ratio.is_positive() {
            (at(&self.upper[elim]), at(&self.lower[elim]))
        } else {
            (at(&self.lower[elim]), at(&self.upper[elim]))
        };
        if let Some(lo) = lo {
            self.tighten_lower(kept, lo)?;
        }
        if let Some(hi) = hi {
            self.tighten_upper(kept, hi)?;
        }
        self.drop_row(row);

        let others: Vec<usize> = self.col_rows[elim].iter().copied().collect();
        for r in others {
            let (coefs, _, r_rhs) = self.rows[r].as_mut().expect("live row");
            let a = coefs.remove(&elim).expect("column listed in row");
            *r_rhs = r_rhs.clone() - a.clone() * rhs.clone() / a_e.clone();
            let delta = -(a * a_k.clone() / a_e.clone());
            let entry = coefs.entry(kept).or_insert_with(T::zero);
            *entry = entry.clone() + delta;
            if entry.near_zero(&T::zero_tol()) {
                coefs.remove(&kept);
                self.col_rows[kept].remove(&r);
            } else {
                self.col_rows[kept].insert(r);
            }
        }
        self.col_rows[elim].clear();

        let c_e = self.cost[elim].clone();
        if !c_e.is_zero() {
            self.cost[kept] = self.cost[kept].clone() - c_e * a_k.clone() / a_e.clone();
        }
        self.alive[elim] = false;
        self.ops.push(Op::Doubleton {
            elim,
            kept,
            a_elim: a_e,
            a_kept: a_k,
            rhs,
        });
        Ok(())
    }

    fn col_pass(&mut self) -> Result<bool, Infeasibility> {
        let mut changed = false;
        for j in 0..self.alive.len() {
            if !self.alive[j] {
                continue;
            }
            if let (Some(l), Some(u)) = (&self.lower[j], &self.upper[j]) {
                if *l > u.clone() + self.tol_at(u) {
                    return Err(Infeasibility::Column(j));
                }
                if (u.clone() - l.clone()) <= T::zero_tol() * (T::one() + l.abs()) {
                    let v = l.clone();
                    self.fix(j, v);
                    changed = true;
                    continue;
                }
            }
            let cost_zero = self.cost[j].near_zero(&T::zero_tol());
            match self.col_rows[j].len() {
                0 => {
                    let v = if cost_zero {
                        self.lower[j].clone().or_else(|| self.upper[j].clone()).or(Some(T::zero()))
                    } else if self.cost[j].is_positive() {
                        self.lower[j].clone()
                    } else {
                        self.upper[j].clone()
                    };
                    if let Some(v) = v {
                        self.fix(j, v);
                        changed = true;
                    }
                }
                1 if cost_zero => {
                    let r = *self.col_rows[j].iter().next().expect("one row");
                    let (coefs, sense, _) = self.rows[r].as_ref().expect("live row");
                    let positive = coefs[&j].is_positive();
                    let target = match (*sense, positive) {
                        (Sense::Eq, _) => None,
                        (Sense::Le, true) | (Sense::Ge, false) => self.lower[j].clone(),
                        (Sense::Le, false) | (Sense::Ge, true) => self.upper[j].clone(),
                    };
                    if let Some(v) = target {
                        self.fix(j, v);
                        changed = true;
                    }
                }
                _ => {}
            }
        }
        Ok(changed)
    }
}

/// Runs the reductions to a fixed point and returns the reduced problem
/// (columns renumbered) with its postsolve record.
pub(crate) fn presolve<T: Scalar>(
    p: &StdProblem<T>,
    tol: T,
) -> Result<(StdProblem<T>, Postsolve<T>), Infeasibility> {
    let n = p.num_cols();
    let mut col_rows = vec![BTreeSet::new(); n];
    let rows = p
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut coefs = BTreeMap::new();
            for (j, a) in &row.entries {
                if !a.is_zero() {
                    coefs.insert(*j, a.clone());
                    col_rows[*j].insert(r);
                }
            }
            Some((coefs, row.sense, row.rhs.clone()))
        })
        .collect();
    let mut w = Work {
        rows,
        col_rows,
        alive: vec![true; n],
        lower: p.lower.clone(),
        upper: p.upper.clone(),
        cost: p.cost.clone(),
        ops: Vec::new(),
        tol,
    };
    for _ in 0..64 {
        let a = w.row_pass()?;
        let b = w.col_pass()?;
        if !a && !b {
            break;
        }
    }

    let col_map: Vec<usize> = (0..n).filter(|&j| w.alive[j]).collect();
    let mut new_index = vec![usize::MAX; n];
    for (k, &j) in col_map.iter().enumerate() {
        new_index[j] = k;
    }
    let rows = w
        .rows
        .iter()
        .flatten()
        .map(|(coefs, sense, rhs)| StdRow {
            entries: coefs.iter().map(|(j, a)| (new_index[*j], a.clone())).collect(),
            sense: *sense,
            rhs: rhs.clone(),
        })
        .collect();
    let reduced = StdProblem {
        lower: col_map.iter().map(|&j| w.lower[j].clone()).collect(),
        upper: col_map.iter().map(|&j| w.upper[j].clone()).collect(),
        cost: col_map.iter().map(|&j| w.cost[j].clone()).collect(),
        rows,
    };
    let post = Postsolve {
        n_orig: n,
        col_map,
        ops: w.ops,
    };
    Ok((reduced, post))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(entries: &[(usize, f64)], sense: Sense, rhs: f64) -> StdRow<f64> {
        StdRow {
            entries: entries.to_vec(),
            sense,
            rhs,
        }
    }

    #[test]
    fn doubleton_equality_is_substituted() {
        // x0 + x1 = 10, x0 in [0, 4], x1 in [0, 100], x0 + 2 x1 <= 30 (two entries, kept)
        let p = StdProblem {
            lower: vec![Some(0.0), Some(0.0)],
            upper: vec![Some(4.0), Some(100.0)],
            cost: vec![1.0, 0.0],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 10.0),
                row(&[(0, 1.0), (1, 2.0), ], Sense::Le, 30.0),
            ],
        };
        let (red, post) = presolve(&p, 1e-9).unwrap();
        // elimination leaves a singleton row, then an empty costed column
        assert_eq!(red.num_cols(), 0);
        assert!(red.rows.is_empty());
        assert_eq!(post.restore(&[]), vec![0.0, 10.0]);
    }

    #[test]
    fn singleton_rows_become_bounds_and_detect_conflicts() {
        let p = StdProblem {
            lower: vec![None],
            upper: vec![None],
            cost: vec![0.0],
            rows: vec![
                row(&[(0, 1.0)], Sense::Eq, 1.0),
                row(&[(0, 1.0)], Sense::Eq, 2.0),
            ],
        };
        assert!(presolve(&p, 1e-9).is_err());
    }

    #[test]
    fn dominated_singleton_fixed_at_loosening_bound() {
        // 2 x0 - x1 <= 5 with x1 in [0, 3] costless -> x1 fixed at 3
        let p = StdProblem {
            lower: vec![Some(0.0), Some(0.0)],
            upper: vec![None, Some(3.0)],
            cost: vec![-1.0, 0.0],
            rows: vec![row(&[(0, 2.0), (1, -1.0)], Sense::Le, 5.0)],
        };
        let (red, post) = presolve(&p, 1e-9).unwrap();
        // x1 fixed, row becomes a singleton bound x0 <= 4, then x0 is an empty
        // column with negative cost and gets fixed at its upper bound
        assert_eq!(red.num_cols(), 0);
        assert_eq!(post.restore(&[]), vec![4.0, 3.0]);
    }
}
