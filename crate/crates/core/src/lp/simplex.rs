//! Bounded-variable primal simplex on a dense tableau.
//!
//! Every row `a x (sense) b` gets a logical column `r` with `a x + r = b` and
//! bounds `[0, inf)` for `<=`, `(-inf, 0]` for `>=`, `[0, 0]` for `=`.
//! Nonbasic columns sit at a finite bound (or at zero when free). Rows whose
//! logical would start outside its bounds receive an artificial column and
//! phase one minimises the sum of artificials.
//!
//! Pricing is Dantzig's largest reduced cost; after a run of degenerate pivots
//! the solver switches to Bland's smallest-index rule until progress resumes,
//! which rules out cycling. All choices are index-ordered, so a solve is
//! deterministic.

use crate::scalar::{pow2_reciprocal, Scalar};

use super::presolve::{presolve, Infeasibility, Postsolve, StdProblem, StdRow};
use super::{
    scaled_residual, Direction, LinearProgram, LpError, LpSolver, Sense, Solution, Status,
    CONTRACT_FEASIBILITY_TOL,
};

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Contract tolerance on the row-scaled residual of a returned optimum.
    pub feasibility_tol: f64,
    pub presolve: bool,
    pub scale: bool,
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_switch: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            feasibility_tol: CONTRACT_FEASIBILITY_TOL,
            presolve: true,
            scale: true,
            max_iterations: None,
            degenerate_switch: 50,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimplexSolver {
    pub options: SimplexOptions,
}

impl SimplexSolver {
    pub fn new(options: SimplexOptions) -> Self {
        SimplexSolver { options }
    }
}

impl<T: Scalar> LpSolver<T> for SimplexSolver {
    fn solve(&self, lp: &LinearProgram<T>) -> Result<Solution<T>, LpError> {
        lp.validate()?;
        let n = lp.num_variables();
        let mut cost = vec![T::zero(); n];
        for (v, c) in &lp.objective.terms {
            cost[v.0] = match lp.objective.direction {
                Direction::Minimize => c.clone(),
                Direction::Maximize => -c.clone(),
            };
        }
        let std = StdProblem {
            lower: lp.variables.iter().map(|v| v.lower.clone()).collect(),
            upper: lp.variables.iter().map(|v| v.upper.clone()).collect(),
            cost,
            rows: lp
                .constraints
                .iter()
                .map(|c| StdRow {
                    entries: c.terms.iter().map(|(v, a)| (v.0, a.clone())).collect(),
                    sense: c.sense,
                    rhs: c.rhs.clone(),
                })
                .collect(),
        };

        let infeasible = |iterations| Solution {
            status: Status::Infeasible,
            values: vec![T::zero(); n],
            objective_value: T::zero(),
            max_residual: f64::INFINITY,
            iterations,
        };

        let (reduced, post) = if self.options.presolve {
            match presolve(&std, T::feasibility_tol()) {
                Ok(r) => r,
                Err(Infeasibility::Row(_)) | Err(Infeasibility::Column(_)) => return Ok(infeasible(0)),
            }
        } else {
            (std, Postsolve::identity(n))
        };

        let (col_scale, scaled) = if self.options.scale {
            equilibrate(&reduced)
        } else {
            (vec![T::one(); reduced.num_cols()], reduced)
        };

        let max_iter = self
            .options
            .max_iterations
            .unwrap_or(20_000 + 50 * (scaled.num_cols() + scaled.rows.len()));
        let mut tab = Tableau::new(&scaled, self.options.degenerate_switch);
        let outcome = tab.run(max_iter)?;
        let iterations = tab.iterations;
        match outcome {
            Status::Infeasible => return Ok(infeasible(iterations)),
            Status::Unbounded => {
                return Ok(Solution {
                    status: Status::Unbounded,
                    values: vec![T::zero(); n],
                    objective_value: T::zero(),
                    max_residual: f64::INFINITY,
                    iterations,
                })
            }
            Status::Optimal => {}
        }

        let reduced_values: Vec<T> = tab
            .structural_values()
            .into_iter()
            .zip(&col_scale)
            .map(|(x, s)| x * s.clone())
            .collect();
        let values = post.restore(&reduced_values);
        let (max_residual, worst_row) = scaled_residual(lp, &values);
        if max_residual > self.options.feasibility_tol.max(T::feasibility_tol().to_f64_lossy()) {
            return Err(LpError::SolverFailure {
                row: worst_row,
                column: None,
                detail: format!("residual {max_residual:e} exceeds tolerance after {iterations} iterations"),
            });
        }
        Ok(Solution {
            status: Status::Optimal,
            objective_value: lp.objective_at(&values),
            values,
            max_residual,
            iterations,
        })
    }
}

/// Row then column max-abs scaling with powers of two. Returns the column
/// factors `c_j` such that original `x_j = c_j * x'_j`.
fn equilibrate<T: Scalar>(p: &StdProblem<T>) -> (Vec<T>, StdProblem<T>) {
    let mut rows = p.rows.clone();
    for row in &mut rows {
        let m = row
            .entries
            .iter()
            .fold(0.0f64, |m, (_, a)| m.max(a.to_f64_lossy().abs()));
        let f = T::from_f64_lossy(pow2_reciprocal(m));
        for (_, a) in &mut row.entries {
            *a = a.clone() * f.clone();
        }
        row.rhs = row.rhs.clone() * f;
    }
    let n = p.num_cols();
    let mut col_max = vec![0.0f64; n];
    for row in &rows {
        for (j, a) in &row.entries {
            col_max[*j] = col_max[*j].max(a.to_f64_lossy().abs());
        }
    }
    let col_scale: Vec<T> = col_max
        .iter()
        .map(|&m| T::from_f64_lossy(pow2_reciprocal(m)))
        .collect();
    for row in &mut rows {
        for (j, a) in &mut row.entries {
            *a = a.clone() * col_scale[*j].clone();
        }
    }
    let div = |b: &Option<T>, s: &T| b.as_ref().map(|v| v.clone() / s.clone());
    let scaled = StdProblem {
        lower: p.lower.iter().zip(&col_scale).map(|(b, s)| div(b, s)).collect(),
        upper: p.upper.iter().zip(&col_scale).map(|(b, s)| div(b, s)).collect(),
        cost: p
            .cost
            .iter()
            .zip(&col_scale)
            .map(|(c, s)| c.clone() * s.clone())
            .collect(),
        rows,
    };
    (col_scale, scaled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic column resting at zero.
    Free,
}

struct Tableau<T> {
    m: usize,
    n_struct: usize,
    ncols: usize,
    /// `B^{-1} A` over structural, logical and artificial columns.
    rows: Vec<Vec<T>>,
    lower: Vec<Option<T>>,
    upper: Vec<Option<T>>,
    /// Current value of every column.
    x: Vec<T>,
    state: Vec<ColState>,
    basis: Vec<usize>,
    /// Column initially basic in each row, with its coefficient (1 or -1).
    initial_basis: Vec<(usize, T)>,
    rhs: Vec<T>,
    /// Original (unfactored) columns as sparse lists, for refreshes.
    columns: Vec<Vec<(usize, T)>>,
    phase_cost: Vec<T>,
    cost: Vec<T>,
    reduced: Vec<T>,
    excluded: Vec<bool>,
    iterations: usize,
    degenerate_run: usize,
    degenerate_switch: usize,
}

impl<T: Scalar> Tableau<T> {
    fn new(p: &StdProblem<T>, degenerate_switch: usize) -> Self {
        let m = p.rows.len();
        let n = p.num_cols();

        let mut lower: Vec<Option<T>> = p.lower.clone();
        let mut upper: Vec<Option<T>> = p.upper.clone();
        let mut x: Vec<T> = Vec::with_capacity(n + 2 * m);
        let mut state = Vec::with_capacity(n + 2 * m);
        for j in 0..n {
            let (v, s) = match (&lower[j], &upper[j]) {
                (Some(l), _) => (l.clone(), ColState::AtLower),
                (None, Some(u)) => (u.clone(), ColState::AtUpper),
                (None, None) => (T::zero(), ColState::Free),
            };
            x.push(v);
            state.push(s);
        }

        let mut columns: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, row) in p.rows.iter().enumerate() {
            for (j, a) in &row.entries {
                columns[*j].push((i, a.clone()));
            }
        }

        // residual each logical would need to absorb
        let mut need: Vec<T> = p.rows.iter().map(|r| r.rhs.clone()).collect();
        for (j, col) in columns.iter().enumerate() {
            if x[j].is_zero() {
                continue;
            }
            for (i, a) in col {
                need[*i] = need[*i].clone() - a.clone() * x[j].clone();
            }
        }

        // logical columns
        for (i, row) in p.rows.iter().enumerate() {
            let (l, u) = match row.sense {
                Sense::Le => (Some(T::zero()), None),
                Sense::Ge => (None, Some(T::zero())),
                Sense::Eq => (Some(T::zero()), Some(T::zero())),
            };
            lower.push(l);
            upper.push(u);
            columns.push(vec![(i, T::one())]);
            x.push(T::zero());
            state.push(ColState::AtLower);
        }

        let mut basis = vec![0usize; m];
        let mut artificial_rows = Vec::new();
        for i in 0..m {
            let logical = n + i;
            let within = lower[logical].as_ref().map_or(true, |l| need[i] >= *l)
                && upper[logical].as_ref().map_or(true, |u| need[i] <= *u);
            if within {
                basis[i] = logical;
                state[logical] = ColState::Basic;
                x[logical] = need[i].clone();
            } else {
                // logical rests at the violated bound, artificial takes the rest
                let (bound, st) = match (&lower[logical], &upper[logical]) {
                    (Some(l), _) if need[i] < *l => (l.clone(), ColState::AtLower),
                    (_, Some(u)) => (u.clone(), ColState::AtUpper),
                    _ => unreachable!("logical outside its bounds has a finite violated bound"),
                };
                x[logical] = bound.clone();
                state[logical] = st;
                artificial_rows.push((i, need[i].clone() - bound));
            }
        }
        let n_before_art = n + m;
        for (k, (i, resid)) in artificial_rows.iter().enumerate() {
            let col = n_before_art + k;
            let sign = if resid.is_negative() { -T::one() } else { T::one() };
            lower.push(Some(T::zero()));
            upper.push(None);
            columns.push(vec![(*i, sign)]);
            x.push(resid.abs());
            state.push(ColState::Basic);
            basis[*i] = col;
        }
        let initial_basis: Vec<(usize, T)> = (0..m)
            .map(|i| {
                let c = basis[i];
                let sign = columns[c][0].1.clone();
                (c, sign)
            })
            .collect();

        let ncols = columns.len();
        let mut rows = vec![vec![T::zero(); ncols]; m];
        for (j, col) in columns.iter().enumerate() {
            for (i, a) in col {
                rows[*i][j] = a.clone();
            }
        }
        // B0 is diagonal with entries +-1; B0^{-1} A flips rows with a -1 artificial
        for i in 0..m {
            let (_, sign) = &initial_basis[i];
            if sign.is_negative() {
                for v in rows[i].iter_mut() {
                    *v = -v.clone();
                }
            }
        }

        let mut phase_cost = vec![T::zero(); ncols];
        let mut cost = p.cost.clone();
        cost.resize(ncols, T::zero());
        for c in n_before_art..ncols {
            phase_cost[c] = T::one();
        }

        let mut t = Tableau {
            m,
            n_struct: n,
            ncols,
            rows,
            lower,
            upper,
            x,
            state,
            basis,
            initial_basis,
            rhs: p.rows.iter().map(|r| r.rhs.clone()).collect(),
            columns,
            phase_cost,
            cost,
            reduced: Vec::new(),
            excluded: vec![false; ncols],
            iterations: 0,
            degenerate_run: 0,
            degenerate_switch,
        };
        t.recompute_reduced(true);
        t
    }

    fn structural_values(&self) -> Vec<T> {
        self.x[..self.n_struct].to_vec()
    }

    fn recompute_reduced(&mut self, phase_one: bool) {
        let c = if phase_one { &self.phase_cost } else { &self.cost };
        let mut d = c.clone();
        for i in 0..self.m {
            let cb = &c[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for (j, v) in self.rows[i].iter().enumerate() {
                if !v.is_zero() {
                    d[j] = d[j].clone() - cb.clone() * v.clone();
                }
            }
        }
        for i in 0..self.m {
            d[self.basis[i]] = T::zero();
        }
        self.reduced = d;
    }

    /// Recomputes basic values from the nonbasic ones using the `B^{-1}`
    /// stored in the initial-basis columns of the tableau.
    fn refresh_basic_values(&mut self) {
        let mut r = self.rhs.clone();
        for j in 0..self.ncols {
            if self.state[j] == ColState::Basic || self.x[j].is_zero() {
                continue;
            }
            for (i, a) in &self.columns[j] {
                r[*i] = r[*i].clone() - a.clone() * self.x[j].clone();
            }
        }
        for i in 0..self.m {
            let mut v = T::zero();
            for (k, (c, sign)) in self.initial_basis.iter().enumerate() {
                let binv = self.rows[i][*c].clone() * sign.clone();
                if !binv.is_zero() && !r[k].is_zero() {
                    v = v + binv * r[k].clone();
                }
            }
            let b = self.basis[i];
            self.x[b] = v;
        }
    }

    fn objective(&self, phase_one: bool) -> T {
        let c = if phase_one { &self.phase_cost } else { &self.cost };
        c.iter()
            .zip(&self.x)
            .fold(T::zero(), |acc, (c, x)| if c.is_zero() { acc } else { acc + c.clone() * x.clone() })
    }

    fn price(&self, bland: bool) -> Option<(usize, bool)> {
        let tol = T::optimality_tol();
        let mut best: Option<(usize, bool, T)> = None;
        for j in 0..self.ncols {
            if self.excluded[j] {
                continue;
            }
            let d = &self.reduced[j];
            let candidate = match self.state[j] {
                ColState::Basic => None,
                ColState::AtLower => {
                    if self.lower[j] == self.upper[j] {
                        None
                    } else if *d < -tol.clone() {
                        Some(true)
                    } else {
                        None
                    }
                }
                ColState::AtUpper => {
                    if self.lower[j] == self.upper[j] {
                        None
                    } else if *d > tol {
                        Some(false)
                    } else {
                        None
                    }
                }
                ColState::Free => {
                    if *d < -tol.clone() {
                        Some(true)
                    } else if *d > tol {
                        Some(false)
                    } else {
                        None
                    }
                }
            };
            if let Some(increase) = candidate {
                if bland {
                    return Some((j, increase));
                }
                let score = d.abs();
                if best.as_ref().map_or(true, |(_, _, s)| score > *s) {
                    best = Some((j, increase, score));
                }
            }
        }
        best.map(|(j, inc, _)| (j, inc))
    }

    /// Ratio test for column `q` moving in direction `increase`. Returns the
    /// step and the leaving row (`None` for a bound flip or unbounded).
    fn ratio(&self, q: usize, increase: bool, bland: bool) -> (Option<T>, Option<usize>) {
        let feas = T::feasibility_tol();
        let ptol = T::pivot_tol();
        let mut best_t: Option<T> = match (&self.lower[q], &self.upper[q]) {
            (Some(l), Some(u)) => Some(u.clone() - l.clone()),
            _ => None,
        };
        let mut best_row: Option<usize> = None;
        let mut best_alpha = T::zero();
        for i in 0..self.m {
            let alpha = &self.rows[i][q];
            if alpha.near_zero(&ptol) {
                continue;
            }
            // basic value changes at rate -alpha per unit step (sign by direction)
            let rate = if increase { -alpha.clone() } else { alpha.clone() };
            let b = self.basis[i];
            let xb = &self.x[b];
            let limit = if rate.is_negative() {
                self.lower[b]
                    .as_ref()
                    .map(|l| T::max_of(xb.clone() - l.clone(), T::zero()) / (-rate.clone()))
            } else {
                self.upper[b]
                    .as_ref()
                    .map(|u| T::max_of(u.clone() - xb.clone(), T::zero()) / rate.clone())
            };
            let Some(t) = limit else { continue };
            let replace = match &best_t {
                None => true,
                Some(bt) => {
                    if t < bt.clone() - feas.clone() {
                        true
                    } else if t <= bt.clone() + feas.clone() {
                        // tie: prefer a row pivot over a flip, then by rule
                        match best_row {
                            None => t <= *bt,
                            Some(br) => {
                                if bland {
                                    self.basis[i] < self.basis[br]
                                } else {
                                    alpha.abs() > best_alpha
                                }
                            }
                        }
                    } else {
                        false
                    }
                }
            };
            if replace {
                best_t = Some(t);
                best_row = Some(i);
                best_alpha = alpha.abs();
            }
        }
        (best_t, best_row)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let mut prow = std::mem::take(&mut self.rows[r]);
        let piv = prow[q].clone();
        let ztol = T::zero_tol();
        let mut nz = Vec::new();
        for (j, v) in prow.iter_mut().enumerate() {
            if v.is_zero() {
                continue;
            }
            *v = v.clone() / piv.clone();
            if v.near_zero(&ztol) {
                *v = T::zero();
            } else {
                nz.push(j);
            }
        }
        prow[q] = T::one();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.rows[i][q].clone();
            if f.is_zero() {
                continue;
            }
            let row = &mut self.rows[i];
            for &j in &nz {
                let v = row[j].clone() - f.clone() * prow[j].clone();
                row[j] = if v.near_zero(&ztol) { T::zero() } else { v };
            }
            row[q] = T::zero();
        }
        let dq = self.reduced[q].clone();
        if !dq.is_zero() {
            for &j in &nz {
                self.reduced[j] = self.reduced[j].clone() - dq.clone() * prow[j].clone();
            }
            self.reduced[q] = T::zero();
        }
        self.rows[r] = prow;
    }

    fn iterate(&mut self, phase_one: bool, max_iter: usize) -> Result<Status, LpError> {
        let refresh_every = if T::is_exact() { usize::MAX } else { 200 };
        let mut since_refresh = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(LpError::SolverFailure {
                    row: None,
                    column: None,
                    detail: format!("iteration limit {max_iter} reached"),
                });
            }
            if since_refresh >= refresh_every {
                self.refresh_basic_values();
                self.recompute_reduced(phase_one);
                since_refresh = 0;
            }
            let bland = self.degenerate_run >= self.degenerate_switch;
            let Some((q, increase)) = self.price(bland) else {
                return Ok(Status::Optimal);
            };
            let (step, leave) = self.ratio(q, increase, bland);
            let Some(t) = step else {
                if phase_one {
                    // phase one objective is bounded below by zero
                    return Err(LpError::SolverFailure {
                        row: None,
                        column: Some(q),
                        detail: "unbounded ray in phase one".into(),
                    });
                }
                return Ok(Status::Unbounded);
            };
            self.iterations += 1;
            since_refresh += 1;
            if t.near_zero(&T::feasibility_tol()) {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }

            let signed = if increase { t.clone() } else { -t.clone() };
            if !t.is_zero() {
                for i in 0..self.m {
                    let a = &self.rows[i][q];
                    if a.is_zero() {
                        continue;
                    }
                    let b = self.basis[i];
                    self.x[b] = self.x[b].clone() - a.clone() * signed.clone();
                }
            }
            self.x[q] = self.x[q].clone() + signed;

            match leave {
                None => {
                    // bound flip
                    let (v, s) = if increase {
                        (self.upper[q].clone(), ColState::AtUpper)
                    } else {
                        (self.lower[q].clone(), ColState::AtLower)
                    };
                    self.x[q] = v.expect("flip only with both bounds finite");
                    self.state[q] = s;
                }
                Some(r) => {
                    let leaving = self.basis[r];
                    let alpha = self.rows[r][q].clone();
                    let rate = if increase { -alpha } else { alpha };
                    let (v, s) = if rate.is_negative() {
                        (self.lower[leaving].clone(), ColState::AtLower)
                    } else {
                        (self.upper[leaving].clone(), ColState::AtUpper)
                    };
                    self.x[leaving] = v.expect("leaving column hits a finite bound");
                    self.state[leaving] = s;
                    self.basis[r] = q;
                    self.state[q] = ColState::Basic;
                    self.pivot(r, q);
                }
            }
        }
    }

    fn run(&mut self, max_iter: usize) -> Result<Status, LpError> {
        let n_art_start = self.n_struct + self.m;
        let has_artificials = self.ncols > n_art_start;
        if has_artificials {
            match self.iterate(true, max_iter)? {
                Status::Optimal => {}
                other => return Ok(other),
            }
            self.refresh_basic_values();
            let infeas = self.objective(true);
            // artificials live on the scaled rows; compare against a tolerance
            // relative to the largest right-hand side
            let scale = self
                .rhs
                .iter()
                .fold(T::one(), |m, b| T::max_of(m, b.abs()));
            if infeas > T::from_f64_lossy(1e-9) * scale && !T::is_exact()
                || T::is_exact() && infeas.is_positive()
            {
                return Ok(Status::Infeasible);
            }
            self.drive_out_artificials(n_art_start);
            for c in n_art_start..self.ncols {
                self.excluded[c] = true;
                self.upper[c] = Some(T::zero());
                if self.state[c] != ColState::Basic {
                    self.x[c] = T::zero();
                    self.state[c] = ColState::AtLower;
                }
            }
            self.degenerate_run = 0;
        }
        self.recompute_reduced(false);
        let status = self.iterate(false, max_iter)?;
        if status == Status::Optimal && !T::is_exact() {
            self.refresh_basic_values();
        }
        Ok(status)
    }

    fn drive_out_artificials(&mut self, n_art_start: usize) {
        let ptol = T::from_f64_lossy(1e-9);
        for r in 0..self.m {
            if self.basis[r] < n_art_start {
                continue;
            }
            let art = self.basis[r];
            let mut best: Option<(usize, T)> = None;
            for j in 0..n_art_start {
                if self.state[j] == ColState::Basic {
                    continue;
                }
                let a = self.rows[r][j].abs();
                let ok = if T::is_exact() { !a.is_zero() } else { a > ptol };
                if ok && best.as_ref().map_or(true, |(_, b)| a > *b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                // degenerate pivot: artificial is at zero, entering keeps its value
                self.x[art] = T::zero();
                self.state[art] = ColState::AtLower;
                self.basis[r] = j;
                self.state[j] = ColState::Basic;
                self.pivot(r, j);
            }
        }
    }
}
