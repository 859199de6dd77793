//! Sparse linear programs and the solver contract.
//!
//! A [`LinearProgram`] is a list of bounded variables, sparse rows with a sense
//! and right-hand side, and a linear objective. It is generic over the
//! [`Scalar`] field so that the same program can be solved in `f64` or exactly
//! in rationals.

mod mps;
mod presolve;
mod simplex;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

pub use mps::write_fixed_mps;
pub use simplex::{SimplexOptions, SimplexSolver};

/// Default contract tolerance on the row-scaled residual of an optimal point.
pub const CONTRACT_FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver failure ({detail}); row {row:?}, column {column:?}")]
    SolverFailure {
        row: Option<usize>,
        column: Option<usize>,
        detail: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<T> {
    pub name: String,
    /// `None` means unbounded below.
    pub lower: Option<T>,
    /// `None` means unbounded above.
    pub upper: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub name: String,
    pub terms: Vec<(VarId, T)>,
    pub sense: Sense,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn activity(&self, values: &[T]) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, (v, a)| acc + a.clone() * values[v.0].clone())
    }

    /// Signed violation of the row at `values`; non-positive when satisfied.
    pub fn violation(&self, values: &[T]) -> T {
        let act = self.activity(values);
        match self.sense {
            Sense::Le => act - self.rhs.clone(),
            Sense::Ge => self.rhs.clone() - act,
            Sense::Eq => (act - self.rhs.clone()).abs(),
        }
    }

    pub fn max_abs_coefficient(&self) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |m, (_, a)| T::max_of(m, a.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective<T> {
    pub direction: Direction,
    pub terms: Vec<(VarId, T)>,
    pub constant: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub variables: Vec<Variable<T>>,
    pub constraints: Vec<Constraint<T>>,
    pub objective: Objective<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub status: Status,
    /// One value per declared variable. Meaningful only when optimal.
    pub values: Vec<T>,
    pub objective_value: T,
    /// Largest violation over rows (each divided by its max-abs coefficient)
    /// and bounds, evaluated on the original program.
    pub max_residual: f64,
    pub iterations: usize,
}

impl<T: Scalar> Solution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, v: VarId) -> &T {
        &self.values[v.0]
    }
}

/// Anything that can honour the [`Solution`] postconditions.
pub trait LpSolver<T: Scalar>: Sync {
    fn solve(&self, lp: &LinearProgram<T>) -> Result<Solution<T>, LpError>;
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(direction: Direction) -> Self {
        LinearProgram {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective {
                direction,
                terms: Vec::new(),
                constant: T::zero(),
            },
        }
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty() && self.constraints.is_empty()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: Option<T>,
        upper: Option<T>,
    ) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    /// Adds a row, merging repeated variables and dropping exact zeros.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, T)>,
        sense: Sense,
        rhs: T,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms: merge_terms(terms),
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, direction: Direction, terms: impl IntoIterator<Item = (VarId, T)>) {
        self.objective.direction = direction;
        self.objective.terms = merge_terms(terms);
    }

    pub fn set_bounds(&mut self, v: VarId, lower: Option<T>, upper: Option<T>) {
        let var = &mut self.variables[v.0];
        var.lower = lower;
        var.upper = upper;
    }

    pub fn find_variable(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn objective_at(&self, values: &[T]) -> T {
        self.objective
            .terms
            .iter()
            .fold(self.objective.constant.clone(), |acc, (v, c)| {
                acc + c.clone() * values[v.0].clone()
            })
    }

    /// Checks the structural invariants: bounds ordered, references declared,
    /// coefficients finite.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.variables.len();
        for (j, v) in self.variables.iter().enumerate() {
            for b in [&v.lower, &v.upper].into_iter().flatten() {
                if !b.is_finite_value() {
                    return Err(LpError::InvalidProgram(format!(
                        "variable {j} ({}) has a non-finite bound",
                        v.name
                    )));
                }
            }
            if let (Some(l), Some(u)) = (&v.lower, &v.upper) {
                if l > u {
                    return Err(LpError::InvalidProgram(format!(
                        "variable {j} ({}) has lower bound above upper bound",
                        v.name
                    )));
                }
            }
        }
        let check_terms = |terms: &[(VarId, T)], what: &str| -> Result<(), LpError> {
            for (v, a) in terms {
                if v.0 >= n {
                    return Err(LpError::InvalidProgram(format!(
                        "{what} references undeclared variable {}",
                        v.0
                    )));
                }
                if !a.is_finite_value() {
                    return Err(LpError::InvalidProgram(format!(
                        "{what} has a non-finite coefficient"
                    )));
                }
            }
            Ok(())
        };
        for (i, c) in self.constraints.iter().enumerate() {
            check_terms(&c.terms, &format!("row {i} ({})", c.name))?;
            if !c.rhs.is_finite_value() {
                return Err(LpError::InvalidProgram(format!("row {i} has a non-finite rhs")));
            }
        }
        check_terms(&self.objective.terms, "objective")
    }

    /// Converts every coefficient into another scalar field.
    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> LinearProgram<U> {
        let map_terms =
            |terms: &[(VarId, T)]| terms.iter().map(|(v, a)| (*v, f(a))).collect::<Vec<_>>();
        LinearProgram {
            variables: self
                .variables
                .iter()
                .map(|v| Variable {
                    name: v.name.clone(),
                    lower: v.lower.as_ref().map(&f),
                    upper: v.upper.as_ref().map(&f),
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    name: c.name.clone(),
                    terms: map_terms(&c.terms),
                    sense: c.sense,
                    rhs: f(&c.rhs),
                })
                .collect(),
            objective: Objective {
                direction: self.objective.direction,
                terms: map_terms(&self.objective.terms),
                constant: f(&self.objective.constant),
            },
        }
    }
}

pub(crate) fn merge_terms<T: Scalar>(terms: impl IntoIterator<Item = (VarId, T)>) -> Vec<(VarId, T)> {
    let mut merged: BTreeMap<VarId, T> = BTreeMap::new();
    for (v, a) in terms {
        let e = merged.entry(v).or_insert_with(T::zero);
        *e = e.clone() + a;
    }
    merged.into_iter().filter(|(_, a)| !a.is_zero()).collect()
}

/// Largest signed violation over all rows and bounds of `lp` at `values`.
///
/// Returns a non-positive number for feasible points (zero for an empty
/// program).
pub fn check_feasibility<T: Scalar>(lp: &LinearProgram<T>, values: &[T]) -> Result<T, LpError> {
    if values.len() != lp.variables.len() {
        return Err(LpError::InvalidInput(format!(
            "expected {} values, got {}",
            lp.variables.len(),
            values.len()
        )));
    }
    let mut worst: Option<T> = None;
    let mut push = |v: T| {
        worst = Some(match worst.take() {
            Some(w) => T::max_of(w, v),
            None => v,
        })
    };
    for (var, x) in lp.variables.iter().zip(values) {
        if let Some(l) = &var.lower {
            push(l.clone() - x.clone());
        }
        if let Some(u) = &var.upper {
            push(x.clone() - u.clone());
        }
    }
    for c in &lp.constraints {
        push(c.violation(values));
    }
    Ok(worst.unwrap_or_else(T::zero))
}

/// Row-scaled residual used in [`Solution::max_residual`], with the index of
/// the worst row (if a row is the worst offender).
pub fn scaled_residual<T: Scalar>(lp: &LinearProgram<T>, values: &[T]) -> (f64, Option<usize>) {
    let mut worst = 0.0f64;
    let mut worst_row = None;
    for (var, x) in lp.variables.iter().zip(values) {
        let x = x.to_f64_lossy();
        if let Some(l) = &var.lower {
            worst = worst.max(l.to_f64_lossy() - x);
        }
        if let Some(u) = &var.upper {
            worst = worst.max(x - u.to_f64_lossy());
        }
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        let scale = c.max_abs_coefficient().to_f64_lossy();
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let v = c.violation(values).to_f64_lossy() / scale;
        if v > worst {
            worst = v;
            worst_row = Some(i);
        }
    }
    (worst, worst_row)
}

/// Solves with the bundled simplex backend and default options.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<Solution<T>, LpError> {
    SimplexSolver::default().solve(lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_examples() {
        let mut lp = LinearProgram::<f64>::new(Direction::Maximize);
        let x = lp.add_variable("x", Some(0.0), Some(10.0));
        lp.add_constraint("c", [(x, 1.0)], Sense::Le, 3.0);
        assert_eq!(check_feasibility(&lp, &[4.0]).unwrap(), 1.0);
        assert!(check_feasibility(&lp, &[2.0]).unwrap() <= 0.0);
        assert!(matches!(
            check_feasibility(&lp, &[1.0, 2.0]),
            Err(LpError::InvalidInput(_))
        ));
        let empty = LinearProgram::<f64>::new(Direction::Minimize);
        assert_eq!(check_feasibility(&empty, &[]).unwrap(), 0.0);
    }

    #[test]
    fn merge_drops_cancelled_terms() {
        let mut lp = LinearProgram::<f64>::new(Direction::Minimize);
        let x = lp.add_variable("x", None, None);
        let y = lp.add_variable("y", None, None);
        let r = lp.add_constraint("r", [(x, 1.0), (y, 2.0), (x, -1.0)], Sense::Eq, 0.0);
        assert_eq!(lp.constraints[r].terms, vec![(y, 2.0)]);
    }

    #[test]
    fn validate_rejects_bad_programs() {
        let mut lp = LinearProgram::<f64>::new(Direction::Minimize);
        let x = lp.add_variable("x", Some(1.0), Some(0.0));
        assert!(lp.validate().is_err());
        lp.set_bounds(x, Some(0.0), Some(1.0));
        assert!(lp.validate().is_ok());
        lp.add_constraint("bad", [(VarId(7), 1.0)], Sense::Le, 0.0);
        assert!(lp.validate().is_err());
        let mut lp2 = LinearProgram::<f64>::new(Direction::Minimize);
        let y = lp2.add_variable("y", None, None);
        lp2.add_constraint("nan", [(y, f64::NAN)], Sense::Le, 0.0);
        assert!(lp2.validate().is_err());
    }
}
