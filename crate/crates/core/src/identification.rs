//! Set identification of the female private-consumption share and sharing
//! rule, and the naive bounds implied by assignability alone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Direction, LpSolver, Status, VarId};
use crate::model::{AgentId, CoupleRef, ExitOption, MarriageMarket};
use crate::stability::{
    build_program, checked_index, IndexMode, ModelKind, NonlaborMode, ProgramOptions, SolveSettings,
    StabilityProgram,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Interval { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn contains_strictly(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }

    pub fn is_subset_of(&self, other: &Interval, tol: f64) -> bool {
        self.lower >= other.lower - tol && self.upper <= other.upper + tol
    }

    fn intersect(self, other: Interval) -> Interval {
        let lower = self.lower.max(other.lower);
        let upper = self.upper.min(other.upper);
        if lower <= upper {
            Interval { lower, upper }
        } else {
            let mid = 0.5 * (lower + upper);
            Interval { lower: mid, upper: mid }
        }
    }
}

/// Denominator of the sharing rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareDenominator {
    /// Potential labour plus non-labour income; the numerator includes the
    /// value of her leisure.
    FullIncome,
    /// Market expenditure; the numerator excludes leisure.
    Expenditure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsOptions {
    pub nonlabor: NonlaborMode,
    pub denominator: ShareDenominator,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            nonlabor: NonlaborMode::Band,
            denominator: ShareDenominator::FullIncome,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBounds {
    pub household_id: String,
    pub qw_share: Interval,
    pub sharing_rule: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupleBounds {
    pub household_id: String,
    pub male: AgentId,
    pub female: AgentId,
    /// Female over male wage.
    pub wage_ratio: f64,
    pub qw_share: Interval,
    pub sharing_rule: Interval,
    pub naive_qw: Interval,
    pub naive_sharing: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub region: String,
    pub model: ModelKind,
    pub denominator: ShareDenominator,
    /// The sharing rule credits her leisure, her private good, her Lindahl
    /// share of the public good and a free attribution of children's goods.
    pub sharing_rule_definition: String,
    pub couples: Vec<CoupleBounds>,
}

const SHARING_DEFINITION: &str =
    "(wage_w*leisure_w + q_w + P_w*Q + kappa*k + rho_w*K) / y  [jc];  (wage_w*leisure_w + q_w + P_w*Q + kappa*C) / y  [spc]; kappa free in [0,1]; configurable denominator";

struct CoupleData {
    household_id: String,
    q_priv: f64,
    private_price: f64,
    leisure_value_w: f64,
    fixed_w: f64,
    assign_m: f64,
    assign_w: f64,
    pool: f64,
    denominator: f64,
}

fn couple_data(market: &MarriageMarket, r: CoupleRef, model: ModelKind, denom: ShareDenominator) -> CoupleData {
    let hh = &market.households[r.household];
    let b = &hh.bundle;
    let (m, w) = (&market.agents[r.male], &market.agents[r.female]);
    let entry = market.grid.get(&ExitOption::pair(&m.id, &w.id));
    let (pp, pub_p) = entry.map_or((1.0, 1.0), |e| (e.private_price, e.public_price));
    let children = match model {
        ModelKind::JointCustody => b.child_daily_k + hh.rho * b.child_big_k,
        ModelKind::SoleCustody { .. } => b.child_total_c,
    };
    let (leisure_value_w, denominator) = match denom {
        ShareDenominator::FullIncome => (
            w.wage * b.leisure_w,
            m.potential_labor_income() + w.potential_labor_income() + hh.nonlabor_income,
        ),
        ShareDenominator::Expenditure => (0.0, hh.total_expenditure),
    };
    CoupleData {
        household_id: hh.household_id.clone(),
        q_priv: b.q_priv,
        private_price: pp,
        leisure_value_w,
        fixed_w: leisure_value_w + pp * b.assign_w(),
        assign_m: b.assign_m(),
        assign_w: b.assign_w(),
        pool: pp * (b.q_priv - b.assign_m() - b.assign_w()) + pub_p * b.q_pub + children,
        denominator,
    }
}

fn ratio(x: f64, y: f64) -> f64 {
    if y > 0.0 {
        x / y
    } else {
        0.0
    }
}

fn naive_from(d: &CoupleData) -> (Interval, Interval) {
    let qw = if d.q_priv > 0.0 && (d.assign_m > 0.0 || d.assign_w > 0.0) {
        Interval::new(d.assign_w / d.q_priv, 1.0 - d.assign_m / d.q_priv)
    } else {
        Interval::new(0.0, 1.0)
    };
    let lower = ratio(d.fixed_w, d.denominator);
    let sharing = Interval::new(lower, lower + ratio(d.pool, d.denominator));
    (qw, sharing)
}

/// Bounds from assignability alone: she owns at least her assignable
/// private good and at most everything not assigned to him.
pub fn naive_bounds(market: &MarriageMarket, model: ModelKind) -> Result<Vec<NaiveBounds>> {
    naive_bounds_with(market, model, ShareDenominator::FullIncome)
}

pub fn naive_bounds_with(market: &MarriageMarket, model: ModelKind, denom: ShareDenominator) -> Result<Vec<NaiveBounds>> {
    let index = checked_index(market)?;
    Ok(index
        .couples
        .iter()
        .map(|r| {
            let d = couple_data(market, *r, model, denom);
            let (qw_share, sharing_rule) = naive_from(&d);
            NaiveBounds {
                household_id: d.household_id,
                qw_share,
                sharing_rule,
            }
        })
        .collect())
}

fn optimize(prog: &StabilityProgram<f64>, terms: &[(VarId, f64)], direction: Direction, settings: &SolveSettings) -> Result<f64> {
    let mut lp = prog.lp.clone();
    lp.set_objective(direction, terms.iter().copied());
    let sol = settings.solver().solve(&lp)?;
    match sol.status {
        Status::Optimal => Ok(sol.objective_value),
        Status::Infeasible => Err(Error::AdjustmentError(
            "adjusted market is not rationalizable at full indices".into(),
        )),
        Status::Unbounded => Err(Error::ModelError("bounds program is unbounded".into())),
    }
}

fn stable_program(adjusted: &MarriageMarket, model: ModelKind, opts: BoundsOptions) -> Result<StabilityProgram<f64>> {
    let mut p = ProgramOptions::new(model, opts.nonlabor, IndexMode::None);
    p.sharing_vars = true;
    build_program::<f64>(adjusted, p)
}

fn qw_bounds(prog: &StabilityProgram<f64>, c: usize, d: &CoupleData, settings: &SolveSettings) -> Result<Interval> {
    if d.q_priv <= 0.0 {
        return Ok(Interval::new(0.0, 1.0));
    }
    let q_w = prog.vars.couples[c].q_w;
    let lo = optimize(prog, &[(q_w, 1.0)], Direction::Minimize, settings)?;
    let hi = optimize(prog, &[(q_w, 1.0)], Direction::Maximize, settings)?;
    Ok(Interval::new(lo / d.q_priv, hi / d.q_priv))
}

fn sharing_terms(
    prog: &StabilityProgram<f64>,
    market: &MarriageMarket,
    c: usize,
    model: ModelKind,
    d: &CoupleData,
) -> (Vec<(VarId, f64)>, f64) {
    let cv = &prog.vars.couples[c];
    let hh = &market.households[cv.household];
    let b = &hh.bundle;
    let kappa = cv.kappa_w.expect("sharing columns");
    let mut terms = vec![
        (cv.q_w, d.private_price),
        (cv.p_w_current.expect("sharing columns"), b.q_pub),
    ];
    match model {
        ModelKind::JointCustody => {
            terms.push((kappa, b.child_daily_k));
            terms.push((cv.rho_w.expect("children price column"), b.child_big_k));
        }
        ModelKind::SoleCustody { .. } => terms.push((kappa, b.child_total_c)),
    }
    (terms, d.leisure_value_w)
}

/// Per-couple interval of `q_w / q` over the adjusted stability region.
pub fn bound_private_share(
    adjusted: &MarriageMarket,
    model: ModelKind,
    opts: BoundsOptions,
    settings: &SolveSettings,
) -> Result<Vec<Interval>> {
    let prog = stable_program(adjusted, model, opts)?;
    (0..prog.couples.len())
        .into_par_iter()
        .map(|c| {
            let d = couple_data(adjusted, prog.couples[c], model, opts.denominator);
            let (naive_qw, _) = naive_from(&d);
            Ok(qw_bounds(&prog, c, &d, settings)?.intersect(naive_qw))
        })
        .collect()
}

/// Per-couple interval of her sharing rule over the adjusted stability
/// region.
pub fn bound_sharing_rule(
    adjusted: &MarriageMarket,
    model: ModelKind,
    opts: BoundsOptions,
    settings: &SolveSettings,
) -> Result<Vec<Interval>> {
    let prog = stable_program(adjusted, model, opts)?;
    (0..prog.couples.len())
        .into_par_iter()
        .map(|c| sharing_bounds(&prog, adjusted, c, model, opts, settings))
        .collect()
}

fn sharing_bounds(
    prog: &StabilityProgram<f64>,
    market: &MarriageMarket,
    c: usize,
    model: ModelKind,
    opts: BoundsOptions,
    settings: &SolveSettings,
) -> Result<Interval> {
    let d = couple_data(market, prog.couples[c], model, opts.denominator);
    let (_, naive) = naive_from(&d);
    if d.denominator <= 0.0 {
        return Ok(naive);
    }
    let (terms, constant) = sharing_terms(prog, market, c, model, &d);
    let lo = optimize(prog, &terms, Direction::Minimize, settings)?;
    let hi = optimize(prog, &terms, Direction::Maximize, settings)?;
    Ok(Interval::new((constant + lo) / d.denominator, (constant + hi) / d.denominator).intersect(naive))
}

/// Stable and naive bounds for every couple of `adjusted`.
pub fn compute_bounds(
    adjusted: &MarriageMarket,
    model: ModelKind,
    opts: BoundsOptions,
    settings: &SolveSettings,
) -> Result<BoundsReport> {
    let prog = stable_program(adjusted, model, opts)?;
    let couples = (0..prog.couples.len())
        .into_par_iter()
        .map(|c| {
            let r = prog.couples[c];
            let d = couple_data(adjusted, r, model, opts.denominator);
            let (naive_qw, naive_sharing) = naive_from(&d);
            let qw_share = qw_bounds(&prog, c, &d, settings)?.intersect(naive_qw);
            let sharing_rule = sharing_bounds(&prog, adjusted, c, model, opts, settings)?;
            let (m, w) = (&adjusted.agents[r.male], &adjusted.agents[r.female]);
            Ok(CoupleBounds {
                household_id: d.household_id,
                male: m.id.clone(),
                female: w.id.clone(),
                wage_ratio: ratio(w.wage, m.wage),
                qw_share,
                sharing_rule,
                naive_qw,
                naive_sharing,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundsReport {
        region: adjusted.region.clone(),
        model,
        denominator: opts.denominator,
        sharing_rule_definition: SHARING_DEFINITION.to_string(),
        couples,
    })
}
