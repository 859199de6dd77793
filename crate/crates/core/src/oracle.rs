//! Synthetic markets with a known rationalizing allocation, controlled
//! perturbations, and a grid-search feasibility check for tiny markets.
//!
//! The row arithmetic here is written out independently of the LP
//! generators so the two can check each other.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{build_consideration_sets, build_grid, household_nonlabor_income};
use crate::model::{
    Agent, AgentId, ExitOption, Gender, Household, HouseholdBundle, MarketSettings, MarriageMarket,
    WEEKLY_HOURS,
};
use crate::stability::{ModelKind, SplitMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consideration {
    /// Age-difference percentile window of the matched couples.
    AgeWindow,
    /// Nobody considers anybody: only individual rationality rows.
    Empty,
    /// Everyone considers every agent of the other gender.
    Everyone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub consideration: Consideration,
    pub percentile_band: [f64; 2],
    pub margin: [f64; 2],
    /// Probability that a couple reports assignable private consumption.
    pub assignable_probability: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            consideration: Consideration::AgeWindow,
            percentile_band: [0.01, 0.99],
            margin: [0.8, 0.99],
            assignable_probability: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupleTruth {
    pub household_id: String,
    pub q_m: f64,
    pub q_w: f64,
    pub rho_m: f64,
    pub rho_w: f64,
    pub ynl_m: f64,
    pub ynl_w: f64,
    pub kappa_w: f64,
    pub p_w_current: f64,
    pub qw_share: f64,
    pub sharing_rule: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionTruth {
    pub option: ExitOption,
    /// Cost of the current bundles at the option's prices, at the truth.
    pub cost: f64,
    /// Transfer terms on the income side.
    pub transfer: f64,
    pub margin: f64,
    /// Male Lindahl price of the pair's public good (pairs only).
    pub p_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub model: ModelKind,
    pub couples: Vec<CoupleTruth>,
    pub options: Vec<OptionTruth>,
}

/// Values of one couple's unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplePoint {
    pub q_m: f64,
    pub q_w: f64,
    pub rho_m: f64,
    pub rho_w: f64,
    pub ynl_m: f64,
    pub ynl_w: f64,
}

/// Direct evaluation of the stability rows.
pub struct RowEvaluator<'a> {
    market: &'a MarriageMarket,
    model: ModelKind,
    pos: BTreeMap<&'a AgentId, usize>,
    household: BTreeMap<&'a AgentId, usize>,
    /// Couple number for married agents, by household order.
    couple: BTreeMap<&'a AgentId, usize>,
    couples: Vec<(usize, usize, usize)>,
}

impl<'a> RowEvaluator<'a> {
    pub fn new(market: &'a MarriageMarket, model: ModelKind) -> Self {
        let pos: BTreeMap<&AgentId, usize> = market.agents.iter().enumerate().map(|(i, a)| (&a.id, i)).collect();
        let mut household = BTreeMap::new();
        let mut couple = BTreeMap::new();
        let mut couples = Vec::new();
        for (h, hh) in market.households.iter().enumerate() {
            for id in &hh.member_ids {
                household.insert(id, h);
            }
            if hh.member_ids.len() == 2 {
                let (a, b) = (pos[&hh.member_ids[0]], pos[&hh.member_ids[1]]);
                let (m, w) = if market.agents[a].gender == Gender::Male { (a, b) } else { (b, a) };
                couple.insert(&market.agents[m].id, couples.len());
                couple.insert(&market.agents[w].id, couples.len());
                couples.push((h, m, w));
            }
        }
        RowEvaluator {
            market,
            model,
            pos,
            household,
            couple,
            couples,
        }
    }

    /// `(household, male, female)` positions of each couple.
    pub fn couples(&self) -> &[(usize, usize, usize)] {
        &self.couples
    }

    pub fn couple_of(&self, id: &AgentId) -> Option<usize> {
        self.couple.get(id).copied()
    }

    fn transfer_of(&self, c: usize) -> f64 {
        match self.model {
            ModelKind::JointCustody => 0.0,
            ModelKind::SoleCustody { .. } => {
                let m = &self.market.agents[self.couples[c].1];
                self.market.settings.child_support.transfer(m.n_children, WEEKLY_HOURS * m.wage)
            }
        }
    }

    /// Transfer terms added to the income side of an option's row.
    pub fn transfer(&self, option: &ExitOption) -> f64 {
        let ModelKind::SoleCustody { binding } = self.model else { return 0.0 };
        let mut t = 0.0;
        if let Some(c) = option.female.as_ref().and_then(|w| self.couple_of(w)) {
            t += self.transfer_of(c);
        }
        if binding {
            if let Some(c) = option.male.as_ref().and_then(|m| self.couple_of(m)) {
                t -= self.transfer_of(c);
            }
        }
        t
    }

    /// Cost of one agent's current consumption at `option`'s prices.
    /// `public_share` is the agent's Lindahl price in a pair option.
    pub fn member_cost(&self, id: &AgentId, option: &ExitOption, points: &[CouplePoint], public_share: Option<f64>) -> f64 {
        let a = &self.market.agents[self.pos[id]];
        let hh = &self.market.households[self.household[id]];
        let b = &hh.bundle;
        let e = self.market.grid.get(option).expect("priced option");
        let male = a.gender == Gender::Male;
        let point = self.couple_of(id).map(|c| points[c]);
        let mut cost = a.wage * if male { b.leisure_m } else { b.leisure_w };
        cost += e.private_price
            * match point {
                Some(p) => {
                    if male {
                        p.q_m
                    } else {
                        p.q_w
                    }
                }
                None => b.q_priv,
            };
        cost += public_share.unwrap_or(e.public_price) * b.q_pub;
        cost += match self.model {
            ModelKind::JointCustody => {
                let rho = match point {
                    Some(p) => {
                        if male {
                            p.rho_m
                        } else {
                            p.rho_w
                        }
                    }
                    None => hh.rho,
                };
                b.child_daily_k + rho * b.child_big_k
            }
            ModelKind::SoleCustody { .. } => b.child_total_c,
        };
        cost
    }

    /// Non-labour income of an agent at `points`.
    pub fn nonlabor(&self, id: &AgentId, points: &[CouplePoint]) -> f64 {
        match self.couple_of(id) {
            Some(c) => {
                if self.market.agents[self.pos[id]].gender == Gender::Male {
                    points[c].ynl_m
                } else {
                    points[c].ynl_w
                }
            }
            None => self.market.households[self.household[id]].nonlabor_income,
        }
    }

    pub fn income(&self, option: &ExitOption, points: &[CouplePoint]) -> f64 {
        let e = self.market.grid.get(option).expect("priced option");
        let mut y = e.y_labor - e.income_deduction;
        for id in [&option.male, &option.female].into_iter().flatten() {
            y += self.nonlabor(id, points);
        }
        y
    }

    /// Row slack `cost - income - transfer` (nonnegative when satisfied).
    pub fn slack(&self, option: &ExitOption, points: &[CouplePoint], p_m: Option<f64>) -> f64 {
        let mut cost = 0.0;
        if let Some(m) = &option.male {
            cost += self.member_cost(m, option, points, p_m);
        }
        if let Some(w) = &option.female {
            let pw = p_m.map(|p| self.market.grid.get(option).expect("priced option").public_price - p);
            cost += self.member_cost(w, option, points, pw);
        }
        cost - self.income(option, points) - self.transfer(option)
    }

    /// Options with a row: singlehood of every married agent and every
    /// considered pair.
    pub fn row_options(&self) -> Vec<ExitOption> {
        let mut out = Vec::new();
        for &(_, m, w) in &self.couples {
            out.push(ExitOption::male_single(&self.market.agents[m].id));
            out.push(ExitOption::female_single(&self.market.agents[w].id));
        }
        let mut pairs = BTreeSet::new();
        for cs in &self.market.consideration {
            let Some(&a) = self.pos.get(&cs.agent) else { continue };
            for o in &cs.options {
                let Some(&b) = self.pos.get(o) else { continue };
                let (x, y) = (&self.market.agents[a], &self.market.agents[b]);
                let (m, w) = if x.gender == Gender::Male { (x, y) } else { (y, x) };
                if m.gender == w.gender || m.spouse_id.as_ref() == Some(&w.id) {
                    continue;
                }
                pairs.insert(ExitOption::pair(&m.id, &w.id));
            }
        }
        out.extend(pairs);
        out
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn generate_stable_market(seed: u64, n_couples: usize, n_singles: usize, model: ModelKind) -> (MarriageMarket, Truth) {
    generate_stable_market_with(seed, n_couples, n_singles, model, &OracleConfig::default())
}

pub fn generate_stable_market_with(
    seed: u64,
    n_couples: usize,
    n_singles: usize,
    model: ModelKind,
    config: &OracleConfig,
) -> (MarriageMarket, Truth) {
    assert!(n_couples >= 1, "an oracle market needs a couple");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = MarketSettings::default();
    let region = format!("synth{seed}");
    let mut agents = Vec::new();
    let mut households = Vec::new();
    let mut couple_truth = Vec::new();

    let person = |rng: &mut ChaCha8Rng, id: String, g: Gender, age: f64, children: u32, spouse: Option<String>| Agent {
        id: AgentId(id),
        gender: g,
        wage: round2(match g {
            Gender::Male => uniform(rng, 8.0, 30.0),
            Gender::Female => uniform(rng, 6.0, 26.0),
        }),
        work_hours: round2(uniform(rng, 20.0, 50.0)),
        age,
        region: region.clone(),
        n_children: children,
        spouse_id: spouse.map(AgentId),
    };

    for i in 0..n_couples {
        let (mid, wid) = (format!("m{i:03}"), format!("w{i:03}"));
        let age_m = round2(uniform(&mut rng, 30.0, 60.0));
        let age_w = (age_m - uniform(&mut rng, -3.0, 8.0)).clamp(25.0, 65.0).round();
        let children = rng.gen_range(0..4u32);
        let m = person(&mut rng, mid.clone(), Gender::Male, age_m.round(), children, Some(wid.clone()));
        let w = person(&mut rng, wid.clone(), Gender::Female, age_w, children, Some(mid.clone()));
        let earnings = m.wage * m.work_hours + w.wage * w.work_hours;
        let q = round2(uniform(&mut rng, 0.3, 0.6) * earnings);
        let big_q = round2(uniform(&mut rng, 0.3, 0.6) * earnings);
        let transfer = settings.child_support.transfer(children, m.potential_labor_income());
        let mut c = if children > 0 {
            round2(uniform(&mut rng, 0.1, 0.3) * earnings)
        } else {
            0.0
        };
        if matches!(model, ModelKind::SoleCustody { .. }) && children > 0 {
            c = c.max(round2(1.5 * transfer + 1.0));
        }
        let big_share = uniform(&mut rng, 0.3, 0.7);
        let big_k = round2(big_share * c);
        let share_w = uniform(&mut rng, 0.25, 0.75);
        let q_w = share_w * q;
        let q_m = q - q_w;
        let (mut am, mut aw) = (None, None);
        if rng.gen::<f64>() < config.assignable_probability {
            am = Some(round2(uniform(&mut rng, 0.1, 0.6) * q_m).min(q_m * 0.95));
            aw = Some(round2(uniform(&mut rng, 0.1, 0.6) * q_w).min(q_w * 0.95));
        }
        let bundle = HouseholdBundle {
            leisure_m: m.leisure(),
            leisure_w: w.leisure(),
            q_priv: q,
            q_priv_assign_m: am,
            q_priv_assign_w: aw,
            q_pub: big_q,
            child_daily_k: c - big_k,
            child_big_k: big_k,
            child_total_c: c,
        };
        let total = q + big_q + c;
        let nonlabor = household_nonlabor_income(&[&m, &w], total);
        let [lo, hi] = settings.nonlabor_band;
        let t = uniform(&mut rng, lo + 0.02, hi - 0.02);
        let rho_m = uniform(&mut rng, 0.2, 0.8);
        let kappa = uniform(&mut rng, 0.1, 0.9);
        let p_w_cur = uniform(&mut rng, 0.2, 0.8);
        let full = m.potential_labor_income() + w.potential_labor_income() + nonlabor;
        let children_w = match model {
            ModelKind::JointCustody => kappa * bundle.child_daily_k + (1.0 - rho_m) * bundle.child_big_k,
            ModelKind::SoleCustody { .. } => kappa * c,
        };
        let eta = (w.wage * w.leisure() + q_w + p_w_cur * big_q + children_w) / full;
        let hid = format!("h{i:03}");
        couple_truth.push(CoupleTruth {
            household_id: hid.clone(),
            q_m,
            q_w,
            rho_m,
            rho_w: 1.0 - rho_m,
            ynl_m: t * nonlabor,
            ynl_w: (1.0 - t) * nonlabor,
            kappa_w: kappa,
            p_w_current: p_w_cur,
            qw_share: share_w,
            sharing_rule: eta,
        });
        households.push(Household {
            household_id: hid,
            member_ids: vec![m.id.clone(), w.id.clone()],
            total_expenditure: total,
            assignable_private_m: am,
            assignable_private_w: aw,
            big_decision_share: Some(big_share),
            bundle,
            nonlabor_income: nonlabor,
            rho: 1.0,
        });
        agents.push(m);
        agents.push(w);
    }
    for j in 0..n_singles {
        let g = if j % 2 == 0 { Gender::Female } else { Gender::Male };
        let id = match g {
            Gender::Male => format!("sm{j:03}"),
            Gender::Female => format!("sw{j:03}"),
        };
        let children = if rng.gen::<f64>() < 0.3 { 1 } else { 0 };
        let age = uniform(&mut rng, 25.0, 65.0).round();
        let a = person(&mut rng, id, g, age, children, None);
        let earnings = a.wage * a.work_hours;
        let q = round2(uniform(&mut rng, 0.3, 0.6) * earnings);
        let big_q = round2(uniform(&mut rng, 0.3, 0.6) * earnings);
        let c = if children > 0 { round2(0.2 * earnings) } else { 0.0 };
        let big_k = round2(0.5 * c);
        let mut bundle = HouseholdBundle {
            q_priv: q,
            q_pub: big_q,
            child_daily_k: c - big_k,
            child_big_k: big_k,
            child_total_c: c,
            ..Default::default()
        };
        match g {
            Gender::Male => bundle.leisure_m = a.leisure(),
            Gender::Female => bundle.leisure_w = a.leisure(),
        }
        let total = q + big_q + c;
        households.push(Household {
            household_id: format!("s{j:03}"),
            member_ids: vec![a.id.clone()],
            total_expenditure: total,
            assignable_private_m: None,
            assignable_private_w: None,
            big_decision_share: Some(0.5),
            bundle,
            nonlabor_income: household_nonlabor_income(&[&a], total),
            rho: 1.0,
        });
        agents.push(a);
    }
    agents.sort_by(|a, b| a.id.cmp(&b.id));

    let mut market = MarriageMarket {
        region,
        grid: build_grid(&agents),
        agents,
        households,
        consideration: Vec::new(),
        settings,
    };
    market.consideration = match config.consideration {
        Consideration::AgeWindow => build_consideration_sets(&market, config.percentile_band).expect("market has couples"),
        Consideration::Empty => market
            .agents
            .iter()
            .map(|a| crate::model::ConsiderationSet {
                agent: a.id.clone(),
                options: Vec::new(),
                singlehood: true,
            })
            .collect(),
        Consideration::Everyone => {
            let all = market.agents.clone();
            all.iter()
                .map(|a| crate::model::ConsiderationSet {
                    agent: a.id.clone(),
                    options: all
                        .iter()
                        .filter(|b| b.gender != a.gender && a.spouse_id.as_ref() != Some(&b.id))
                        .map(|b| b.id.clone())
                        .collect(),
                    singlehood: true,
                })
                .collect()
        }
    };

    // Price every row's income strictly below its cost at the truth, both at
    // the true non-labour split and at the even split.
    let points: Vec<CouplePoint> = couple_truth
        .iter()
        .map(|t| CouplePoint {
            q_m: t.q_m,
            q_w: t.q_w,
            rho_m: t.rho_m,
            rho_w: t.rho_w,
            ynl_m: t.ynl_m,
            ynl_w: t.ynl_w,
        })
        .collect();
    let half: Vec<CouplePoint> = points
        .iter()
        .map(|p| CouplePoint {
            ynl_m: 0.5 * (p.ynl_m + p.ynl_w),
            ynl_w: 0.5 * (p.ynl_m + p.ynl_w),
            ..*p
        })
        .collect();
    let mut option_truth = Vec::new();
    let mut updates = Vec::new();
    {
        let eval = RowEvaluator::new(&market, model);
        for option in eval.row_options() {
            let p_m = option
                .male
                .as_ref()
                .zip(option.female.as_ref())
                .map(|_| uniform(&mut rng, 0.1, 0.9) * market.grid.get(&option).expect("priced").public_price);
            let mut cost = 0.0;
            if let Some(m) = &option.male {
                cost += eval.member_cost(m, &option, &points, p_m);
            }
            if let Some(w) = &option.female {
                let pw = p_m.map(|p| market.grid.get(&option).expect("priced").public_price - p);
                cost += eval.member_cost(w, &option, &points, pw);
            }
            let transfer = eval.transfer(&option);
            let margin = uniform(&mut rng, config.margin[0], config.margin[1]);
            let target = margin * cost - transfer;
            let e = market.grid.get(&option).expect("priced");
            let labor_free = |pts: &[CouplePoint]| eval.income(&option, pts) - (e.y_labor - e.income_deduction);
            let nl = labor_free(&points).max(labor_free(&half));
            updates.push((option.clone(), target - nl));
            option_truth.push(OptionTruth {
                option,
                cost,
                transfer,
                margin,
                p_m,
            });
        }
    }
    for (option, y_labor) in updates {
        market.grid.get_mut(&option).expect("priced").y_labor = y_labor;
    }
    market.grid.labor_from_wages = false;
    (
        market,
        Truth {
            seed,
            model,
            couples: couple_truth,
            options: option_truth,
        },
    )
}

/// Candidate point of the truth for the evaluator.
pub fn truth_points(truth: &Truth) -> Vec<CouplePoint> {
    truth
        .couples
        .iter()
        .map(|t| CouplePoint {
            q_m: t.q_m,
            q_w: t.q_w,
            rho_m: t.rho_m,
            rho_w: t.rho_w,
            ynl_m: t.ynl_m,
            ynl_w: t.ynl_w,
        })
        .collect()
}

/// Smallest row slack of the market at the truth, divided by the row's cost;
/// positive means every row holds strictly.
pub fn truth_slack(market: &MarriageMarket, truth: &Truth) -> f64 {
    let eval = RowEvaluator::new(market, truth.model);
    let points = truth_points(truth);
    truth
        .options
        .iter()
        .map(|o| eval.slack(&o.option, &points, o.p_m) / o.cost.abs().max(1.0))
        .fold(f64::INFINITY, f64::min)
}

/// Income of `option` with every married member at half of the household
/// non-labour income.
pub fn reference_income(market: &MarriageMarket, option: &ExitOption) -> Result<f64> {
    let e = market
        .grid
        .get(option)
        .ok_or_else(|| Error::InvalidInput(format!("unknown option {option}")))?;
    let mut y = e.y_labor - e.income_deduction;
    for id in [&option.male, &option.female].into_iter().flatten() {
        let a = market
            .agent(id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown agent {id}")))?;
        let hh = market
            .households
            .iter()
            .find(|h| h.member_ids.contains(id))
            .ok_or_else(|| Error::InvalidInput(format!("agent {id} has no household")))?;
        y += if a.is_married() { 0.5 * hh.nonlabor_income } else { hh.nonlabor_income };
    }
    Ok(y)
}

/// Multiplies the even-split income of one exit option by `factor`.
pub fn perturb_incomes(market: &MarriageMarket, option: &ExitOption, factor: f64) -> Result<MarriageMarket> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidInput(format!("factor {factor} must be positive")));
    }
    let y = reference_income(market, option)?;
    let mut out = market.clone();
    let e = out.grid.get_mut(option).expect("checked above");
    e.y_labor += (factor - 1.0) * y;
    out.grid.labor_from_wages = false;
    Ok(out)
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Grid search over every unknown at full indices. Supports at most two
/// couples, two singles and 21 grid steps per unknown.
pub fn brute_force_rationalizable(market: &MarriageMarket, model: ModelKind, split: SplitMode, grid_steps: usize) -> Result<bool> {
    let eval = RowEvaluator::new(market, model);
    let n_couples = eval.couples().len();
    let n_singles = market.households.len() - n_couples;
    if n_couples > 2 || n_singles > 2 || grid_steps > 21 {
        return Err(Error::Unsupported(format!(
            "brute force handles at most 2 couples, 2 singles and 21 steps (got {n_couples}, {n_singles}, {grid_steps})"
        )));
    }
    if grid_steps < 2 {
        return Err(Error::InvalidInput("grid needs at least two steps".into()));
    }
    let [lo, hi] = market.settings.nonlabor_band;
    let tol = |scale: f64| -1e-9 * scale.abs().max(1.0);

    // per-couple candidate points
    let mut candidates: Vec<Vec<CouplePoint>> = Vec::new();
    for &(h, _, _) in eval.couples() {
        let hh = &market.households[h];
        let b = &hh.bundle;
        let qs = grid(b.assign_m(), b.q_priv - b.assign_w(), grid_steps);
        let rhos = match model {
            ModelKind::JointCustody => grid(0.0, hh.rho, grid_steps),
            ModelKind::SoleCustody { .. } => vec![0.0],
        };
        let y = hh.nonlabor_income;
        let ynls = match split {
            SplitMode::Fixed5050 => vec![0.5 * y],
            SplitMode::Endogenous => {
                let (a, c) = if lo * y <= hi * y { (lo * y, hi * y) } else { (hi * y, lo * y) };
                // the partner's share must also stay in the band
                grid(a.max(y - c), c.min(y - a), grid_steps)
            }
        };
        let mut pts = Vec::new();
        for &q_m in &qs {
            for &rho_m in &rhos {
                for &ynl_m in &ynls {
                    pts.push(CouplePoint {
                        q_m,
                        q_w: b.q_priv - q_m,
                        rho_m,
                        rho_w: hh.rho - rho_m,
                        ynl_m,
                        ynl_w: y - ynl_m,
                    });
                }
            }
        }
        candidates.push(pts);
    }
    let options = eval.row_options();
    let (ir, nbp): (Vec<&ExitOption>, Vec<&ExitOption>) =
        options.iter().partition(|o| o.male.is_none() || o.female.is_none());

    // prune each couple by its own individual-rationality rows
    let mut filtered: Vec<Vec<CouplePoint>> = Vec::new();
    for (c, pts) in candidates.iter().enumerate() {
        let own: Vec<&&ExitOption> = ir
            .iter()
            .filter(|o| {
                [&o.male, &o.female]
                    .into_iter()
                    .flatten()
                    .any(|id| eval.couple_of(id) == Some(c))
            })
            .collect();
        let keep = pts
            .iter()
            .filter(|p| {
                let mut probe = vec![*p.to_owned(); n_couples];
                probe[c] = **p;
                own.iter().all(|o| eval.slack(o, &probe, None) >= tol(eval.income(o, &probe)))
            })
            .copied()
            .collect::<Vec<_>>();
        if keep.is_empty() {
            return Ok(false);
        }
        filtered.push(keep);
    }

    let pair_ok = |o: &ExitOption, pts: &[CouplePoint]| {
        let p = market.grid.get(o).expect("priced").public_price;
        let scale = eval.income(o, pts);
        grid(0.0, p, grid_steps)
            .into_iter()
            .any(|pm| eval.slack(o, pts, Some(pm)) >= tol(scale))
    };
    let all_pairs_ok = |pts: &[CouplePoint]| nbp.iter().all(|o| pair_ok(o, pts));
    match n_couples {
        0 => Ok(all_pairs_ok(&[])),
        1 => Ok(filtered[0].iter().any(|p| all_pairs_ok(&[*p]))),
        _ => Ok(filtered[0]
            .iter()
            .any(|a| filtered[1].iter().any(|b| all_pairs_ok(&[*a, *b])))),
    }
}
