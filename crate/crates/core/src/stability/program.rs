//! Constraint generators for the joint- and sole-custody stability systems.
//!
//! Every row is written as `lhs - rhs <= 0` where the left side holds the
//! exit-option income (possibly scaled by an index or reduced by a loss) plus
//! any statutory transfer, and the right side is the cost of the agents'
//! current consumption at the option's prices.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationVariables, CoupleVars, PairVars};
use crate::error::{Error, Result};
use crate::lp::{Direction, LinearProgram, Sense, VarId};
use crate::model::{
    validate_market, CoupleRef, ExitOption, Gender, GridEntry, MarketIndex, MarriageMarket,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    JointCustody,
    SoleCustody { binding: bool },
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::JointCustody => "jc",
            ModelKind::SoleCustody { binding: false } => "spc",
            ModelKind::SoleCustody { binding: true } => "spc-binding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Fixed5050,
    Endogenous,
}

/// How spouses' shares of household non-labour income enter exit incomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlaborMode {
    /// Each spouse owns half.
    Half,
    /// Free within the market's band.
    Band,
}

impl From<SplitMode> for NonlaborMode {
    fn from(s: SplitMode) -> Self {
        match s {
            SplitMode::Fixed5050 => NonlaborMode::Half,
            SplitMode::Endogenous => NonlaborMode::Band,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMode {
    /// Plain rationalizability rows.
    None,
    /// `s * y` with `s` in `[0, 1]`; needs pinned non-labour income.
    Multiplicative,
    /// `y - L` with `L >= 0`.
    AdditiveLoss,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgramOptions {
    pub model: ModelKind,
    pub nonlabor: NonlaborMode,
    pub indices: IndexMode,
    /// Adds the children attribution and current-household personalized
    /// public prices used by the sharing rule.
    pub sharing_vars: bool,
}

impl ProgramOptions {
    pub fn new(model: ModelKind, nonlabor: NonlaborMode, indices: IndexMode) -> Self {
        ProgramOptions {
            model,
            nonlabor,
            indices,
            sharing_vars: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    IndividualRationality,
    NoBlockingPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionRow {
    pub option: ExitOption,
    pub kind: RowKind,
    pub row: usize,
    pub index_var: Option<VarId>,
    /// Income with every non-labour split at one half.
    pub reference_income: f64,
    pub income_constant: f64,
    pub income_vars: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub struct StabilityProgram<T> {
    pub lp: LinearProgram<T>,
    pub vars: AllocationVariables,
    pub options: Vec<OptionRow>,
    pub couples: Vec<CoupleRef>,
    /// Minimum child support owed by each couple's male (zero under joint
    /// custody).
    pub transfers: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct Expr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl Expr {
    fn var(&mut self, v: VarId, c: f64) {
        self.terms.push((v, c));
    }
    fn add(&mut self, c: f64) {
        self.constant += c;
    }
    fn sub_expr(&mut self, other: Expr) {
        self.constant -= other.constant;
        self.terms.extend(other.terms.into_iter().map(|(v, c)| (v, -c)));
    }
}

fn conv<T: Scalar>(x: f64) -> T {
    T::from_f64_lossy(x)
}

fn push_le<T: Scalar>(lp: &mut LinearProgram<T>, name: String, e: Expr) -> usize {
    lp.add_constraint(
        name,
        e.terms.into_iter().map(|(v, c)| (v, conv::<T>(c))),
        Sense::Le,
        conv::<T>(-e.constant),
    )
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy)]
struct Side {
    agent: usize,
    household: usize,
    couple: Option<usize>,
    male: bool,
}

struct Builder<'a, T> {
    market: &'a MarriageMarket,
    opts: ProgramOptions,
    index: MarketIndex,
    grid: BTreeMap<&'a ExitOption, &'a GridEntry>,
    side: Vec<Side>,
    lp: LinearProgram<T>,
    vars: AllocationVariables,
    transfers: Vec<f64>,
    options_out: Vec<OptionRow>,
}

/// Validates the market and resolves couples; shared by every generator.
pub(crate) fn checked_index(market: &MarriageMarket) -> Result<MarketIndex> {
    let violations = validate_market(market);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    market.index().map_err(Error::Validation)
}

/// Pairs `(male, female)` (agent positions) that generate a no-blocking-pair
/// row: either side considers the other and they are not married to each
/// other. Ordered by agent ids.
pub fn considered_pairs(market: &MarriageMarket, index: &MarketIndex) -> Vec<(usize, usize)> {
    let mut set = BTreeSet::new();
    for cs in &market.consideration {
        let Some(&a) = index.agent_pos.get(&cs.agent) else { continue };
        for o in &cs.options {
            let Some(&b) = index.agent_pos.get(o) else { continue };
            let (m, w) = if market.agents[a].gender == Gender::Male {
                (a, b)
            } else {
                (b, a)
            };
            if market.agents[m].gender != Gender::Male || market.agents[w].gender != Gender::Female {
                continue;
            }
            if market.agents[m].spouse_id.as_ref() == Some(&market.agents[w].id) {
                continue;
            }
            set.insert((market.agents[m].id.clone(), market.agents[w].id.clone()));
        }
    }
    set.into_iter()
        .map(|(m, w)| (index.agent_pos[&m], index.agent_pos[&w]))
        .collect()
}

impl<'a, T: Scalar> Builder<'a, T> {
    fn new(market: &'a MarriageMarket, opts: ProgramOptions) -> Result<Self> {
        let index = checked_index(market)?;
        if opts.indices == IndexMode::Multiplicative && opts.nonlabor == NonlaborMode::Band {
            return Err(Error::InvalidInput(
                "multiplicative indices need pinned non-labour splits".into(),
            ));
        }
        if let ModelKind::SoleCustody { .. } = opts.model {
            if market.settings.custodian != Gender::Female {
                return Err(Error::Unsupported(
                    "sole custody is implemented for female custodians only".into(),
                ));
            }
        }
        let mut side = vec![
            Side {
                agent: 0,
                household: 0,
                couple: None,
                male: false,
            };
            market.agents.len()
        ];
        for (i, a) in market.agents.iter().enumerate() {
            side[i] = Side {
                agent: i,
                household: index.household_of[&a.id],
                couple: None,
                male: a.gender == Gender::Male,
            };
        }
        for (c, r) in index.couples.iter().enumerate() {
            side[r.male].couple = Some(c);
            side[r.female].couple = Some(c);
        }
        let transfers = index
            .couples
            .iter()
            .map(|r| match opts.model {
                ModelKind::JointCustody => 0.0,
                ModelKind::SoleCustody { .. } => {
                    let m = &market.agents[r.male];
                    market
                        .settings
                        .child_support
                        .transfer(m.n_children, m.potential_labor_income())
                }
            })
            .collect();
        let direction = match opts.indices {
            IndexMode::AdditiveLoss => Direction::Minimize,
            _ => Direction::Maximize,
        };
        Ok(Builder {
            market,
            opts,
            grid: market.grid.lookup(),
            index,
            side,
            lp: LinearProgram::new(direction),
            vars: AllocationVariables::default(),
            transfers,
            options_out: Vec::new(),
        })
    }

    fn jc(&self) -> bool {
        self.opts.model == ModelKind::JointCustody
    }

    fn couple_vars(&mut self) {
        let [lo, hi] = self.market.settings.nonlabor_band;
        for (c, r) in self.index.couples.clone().iter().enumerate() {
            let hh = &self.market.households[r.household];
            let id = &hh.household_id;
            let b = &hh.bundle;
            let (am, aw) = (b.assign_m(), b.assign_w());
            let q = b.q_priv;
            let q_m = self
                .lp
                .add_variable(format!("q_m[{id}]"), Some(conv(am)), Some(conv(q - aw)));
            let q_w = self
                .lp
                .add_variable(format!("q_w[{id}]"), Some(conv(aw)), Some(conv(q - am)));
            self.lp.add_constraint(
                format!("add_q[{id}]"),
                [(q_m, T::one()), (q_w, T::one())],
                Sense::Eq,
                conv(q),
            );
            let (mut rho_m, mut rho_w) = (None, None);
            if self.jc() {
                let rho = hh.rho;
                let rm = self.lp.add_variable(format!("rho_m[{id}]"), Some(T::zero()), Some(conv(rho)));
                let rw = self.lp.add_variable(format!("rho_w[{id}]"), Some(T::zero()), Some(conv(rho)));
                self.lp.add_constraint(
                    format!("add_rho[{id}]"),
                    [(rm, T::one()), (rw, T::one())],
                    Sense::Eq,
                    conv(rho),
                );
                rho_m = Some(rm);
                rho_w = Some(rw);
            }
            let (mut ynl_m, mut ynl_w) = (None, None);
            if self.opts.nonlabor == NonlaborMode::Band {
                let y = hh.nonlabor_income;
                let (l, u) = ordered(lo * y, hi * y);
                let vm = self.lp.add_variable(format!("ynl_m[{id}]"), Some(conv(l)), Some(conv(u)));
                let vw = self.lp.add_variable(format!("ynl_w[{id}]"), Some(conv(l)), Some(conv(u)));
                self.lp.add_constraint(
                    format!("add_ynl[{id}]"),
                    [(vm, T::one()), (vw, T::one())],
                    Sense::Eq,
                    conv(y),
                );
                ynl_m = Some(vm);
                ynl_w = Some(vw);
            }
            self.vars.couples.push(CoupleVars {
                household: r.household,
                q_m,
                q_w,
                rho_m,
                rho_w,
                ynl_m,
                ynl_w,
                kappa_w: None,
                p_m_current: None,
                p_w_current: None,
            });
            debug_assert_eq!(self.vars.couples.len(), c + 1);
        }
    }

    fn sharing_vars(&mut self) {
        for c in 0..self.vars.couples.len() {
            let hh = &self.market.households[self.vars.couples[c].household];
            let id = hh.household_id.clone();
            let r = self.index.couples[c];
            let opt = ExitOption::pair(&self.market.agents[r.male].id, &self.market.agents[r.female].id);
            let p = self.grid.get(&opt).map_or(1.0, |e| e.public_price);
            let kappa = self.lp.add_variable(format!("kappa_w[{id}]"), Some(T::zero()), Some(T::one()));
            let pm = self.lp.add_variable(format!("P_m_cur[{id}]"), Some(T::zero()), Some(conv(p)));
            let pw = self.lp.add_variable(format!("P_w_cur[{id}]"), Some(T::zero()), Some(conv(p)));
            self.lp.add_constraint(
                format!("add_P_cur[{id}]"),
                [(pm, T::one()), (pw, T::one())],
                Sense::Eq,
                conv(p),
            );
            let cv = &mut self.vars.couples[c];
            cv.kappa_w = Some(kappa);
            cv.p_m_current = Some(pm);
            cv.p_w_current = Some(pw);
        }
    }

    /// Cost of one agent's current consumption at the option's prices.
    fn member_cost(&self, s: Side, entry: &GridEntry, public: Option<VarId>) -> Expr {
        let hh = &self.market.households[s.household];
        let b = &hh.bundle;
        let agent = &self.market.agents[s.agent];
        let mut e = Expr::default();
        let leisure = if s.male { b.leisure_m } else { b.leisure_w };
        e.add(agent.wage * leisure);
        match s.couple {
            Some(c) => {
                let cv = &self.vars.couples[c];
                e.var(if s.male { cv.q_m } else { cv.q_w }, entry.private_price);
            }
            None => e.add(entry.private_price * b.q_priv),
        }
        match public {
            Some(v) => e.var(v, b.q_pub),
            None => e.add(entry.public_price * b.q_pub),
        }
        if self.jc() {
            e.add(b.child_daily_k);
            match s.couple {
                Some(c) => {
                    let cv = &self.vars.couples[c];
                    let rho = if s.male { cv.rho_m } else { cv.rho_w };
                    e.var(rho.expect("children price column"), b.child_big_k);
                }
                None => e.add(hh.rho * b.child_big_k),
            }
        } else {
            e.add(b.child_total_c);
        }
        e
    }

    /// Non-labour income of one agent: (column, constant, half-split value).
    fn nonlabor(&self, s: Side) -> (Option<VarId>, f64, f64) {
        let y = self.market.households[s.household].nonlabor_income;
        match s.couple {
            None => (None, y, y),
            Some(c) => {
                let cv = &self.vars.couples[c];
                match (self.opts.nonlabor, if s.male { cv.ynl_m } else { cv.ynl_w }) {
                    (NonlaborMode::Band, Some(v)) => (Some(v), 0.0, 0.5 * y),
                    _ => (None, 0.5 * y, 0.5 * y),
                }
            }
        }
    }

    /// Constant added to the income side by statutory transfers.
    fn transfer_terms(&self, male: Option<Side>, female: Option<Side>) -> f64 {
        let ModelKind::SoleCustody { binding } = self.opts.model else {
            return 0.0;
        };
        let mut t = 0.0;
        if let Some(c) = female.and_then(|s| s.couple) {
            t += self.transfers[c];
        }
        if binding {
            if let Some(c) = male.and_then(|s| s.couple) {
                t -= self.transfers[c];
            }
        }
        t
    }

    fn option_row(
        &mut self,
        option: ExitOption,
        kind: RowKind,
        male: Option<Side>,
        female: Option<Side>,
        public: Option<(VarId, VarId)>,
    ) {
        let entry = *self.grid.get(&option).expect("grid validated");
        let mut income = Expr::default();
        income.add(entry.y_labor - entry.income_deduction);
        let mut reference = entry.y_labor - entry.income_deduction;
        for s in [male, female].into_iter().flatten() {
            let (v, c, half) = self.nonlabor(s);
            income.add(c);
            if let Some(v) = v {
                income.var(v, 1.0);
            }
            reference += half;
        }
        let mut cost = Expr::default();
        if let Some(s) = male {
            let e = self.member_cost(s, entry, public.map(|p| p.0));
            cost.terms.extend(e.terms);
            cost.constant += e.constant;
        }
        if let Some(s) = female {
            let e = self.member_cost(s, entry, public.map(|p| p.1));
            cost.terms.extend(e.terms);
            cost.constant += e.constant;
        }
        let transfer = self.transfer_terms(male, female);

        let tag = match kind {
            RowKind::IndividualRationality => "ir",
            RowKind::NoBlockingPair => "nbp",
        };
        let mut lhs = Expr::default();
        let mut index_var = None;
        match self.opts.indices {
            IndexMode::None => lhs = income.clone(),
            IndexMode::Multiplicative => {
                let s = self.lp.add_variable(format!("s{option}"), Some(T::zero()), Some(T::one()));
                lhs.var(s, income.constant);
                index_var = Some(s);
            }
            IndexMode::AdditiveLoss => {
                let l = self.lp.add_variable(format!("L{option}"), Some(T::zero()), None);
                lhs = income.clone();
                lhs.var(l, -1.0);
                index_var = Some(l);
            }
        }
        lhs.add(transfer);
        lhs.sub_expr(cost);
        let row = push_le(&mut self.lp, format!("{tag}{option}"), lhs);
        if let Some(v) = index_var {
            self.vars.index.insert(option.clone(), v);
        }
        self.options_out.push(OptionRow {
            option,
            kind,
            row,
            index_var,
            reference_income: reference,
            income_constant: income.constant,
            income_vars: income.terms.iter().map(|t| t.0).collect(),
        });
    }

    fn ir_rows(&mut self) {
        for r in self.index.couples.clone() {
            let (m, w) = (self.side[r.male], self.side[r.female]);
            let mid = self.market.agents[r.male].id.clone();
            let wid = self.market.agents[r.female].id.clone();
            self.option_row(
                ExitOption::male_single(&mid),
                RowKind::IndividualRationality,
                Some(m),
                None,
                None,
            );
            self.option_row(
                ExitOption::female_single(&wid),
                RowKind::IndividualRationality,
                None,
                Some(w),
                None,
            );
        }
    }

    fn nbp_rows(&mut self) {
        for (mi, wi) in considered_pairs(self.market, &self.index) {
            let option = ExitOption::pair(&self.market.agents[mi].id, &self.market.agents[wi].id);
            let p = self.grid[&option].public_price;
            let name = option.to_string();
            let pm = self.lp.add_variable(format!("P_m{name}"), Some(T::zero()), Some(conv(p)));
            let pw = self.lp.add_variable(format!("P_w{name}"), Some(T::zero()), Some(conv(p)));
            self.lp.add_constraint(
                format!("add_P{name}"),
                [(pm, T::one()), (pw, T::one())],
                Sense::Eq,
                conv(p),
            );
            self.vars.pairs.insert(option.clone(), PairVars { p_m: pm, p_w: pw });
            let (m, w) = (self.side[mi], self.side[wi]);
            self.option_row(option, RowKind::NoBlockingPair, Some(m), Some(w), Some((pm, pw)));
        }
    }

    fn objective(&mut self) {
        let terms: Vec<(VarId, T)> = match self.opts.indices {
            IndexMode::None => Vec::new(),
            IndexMode::Multiplicative => self
                .options_out
                .iter()
                .filter_map(|o| o.index_var.map(|v| (v, T::one())))
                .collect(),
            IndexMode::AdditiveLoss => self
                .options_out
                .iter()
                .filter_map(|o| {
                    let w = 1.0 / o.reference_income.abs().max(1.0);
                    o.index_var.map(|v| (v, conv::<T>(w)))
                })
                .collect(),
        };
        let dir = self.lp.objective.direction;
        self.lp.set_objective(dir, terms);
    }

    fn finish(self) -> StabilityProgram<T> {
        StabilityProgram {
            lp: self.lp,
            vars: self.vars,
            options: self.options_out,
            couples: self.index.couples,
            transfers: self.transfers,
        }
    }
}

/// Builds the full program for `market` under `opts`.
pub fn build_program<T: Scalar>(market: &MarriageMarket, opts: ProgramOptions) -> Result<StabilityProgram<T>> {
    let mut b = Builder::<T>::new(market, opts)?;
    b.couple_vars();
    if opts.sharing_vars {
        b.sharing_vars();
    }
    b.ir_rows();
    b.nbp_rows();
    b.objective();
    Ok(b.finish())
}

/// Joint-custody system: adding-up rows for private goods, children prices
/// and public prices, individual rationality for every married agent and no
/// blocking pair for every considered pair.
pub fn build_jc_constraints<T: Scalar>(
    market: &MarriageMarket,
    nonlabor: NonlaborMode,
    indices: IndexMode,
) -> Result<StabilityProgram<T>> {
    build_program(market, ProgramOptions::new(ModelKind::JointCustody, nonlabor, indices))
}

/// Sole-custody system with the market's child-support schedule. With
/// `binding` the male side of individual rationality and no blocking pair
/// nets out his own minimum transfer.
pub fn build_spc_constraints<T: Scalar>(
    market: &MarriageMarket,
    nonlabor: NonlaborMode,
    indices: IndexMode,
    binding: bool,
) -> Result<StabilityProgram<T>> {
    build_program(
        market,
        ProgramOptions::new(ModelKind::SoleCustody { binding }, nonlabor, indices),
    )
}
