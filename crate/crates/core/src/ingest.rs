//! Survey extracts to canonical markets.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_market, Agent, AgentId, ChildSupportSchedule, ConsiderationSet, ExitOption, Gender,
    GridEntry, Household, HouseholdBundle, MarketDocument, MarketSettings, MarriageMarket,
    PriceIncomeGrid, WEEKLY_HOURS,
};
use crate::stability::ModelKind;

pub const AGENTS_HEADER: [&str; 8] = [
    "id",
    "gender",
    "wage",
    "work_hours",
    "age",
    "region",
    "n_children",
    "spouse_id",
];

const HOUSEHOLDS_REQUIRED: [&str; 3] = ["household_id", "member_ids", "total_expenditure"];

/// Children's cost as a share of total expenditure, by number of children
/// (1, 2, 3+).
const COUPLE_CHILD_SHARE: [f64; 3] = [0.17, 0.28, 0.37];
const SINGLE_CHILD_SHARE: [f64; 3] = [0.23, 0.37, 0.47];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentsCsvRow {
    pub id: String,
    pub gender: String,
    pub wage: f64,
    pub work_hours: f64,
    pub age: f64,
    pub region: String,
    pub n_children: u32,
    pub spouse_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdsCsvRow {
    pub household_id: String,
    /// Member ids separated by `;`.
    pub member_ids: String,
    pub total_expenditure: f64,
    #[serde(default)]
    pub assignable_private_m: Option<f64>,
    #[serde(default)]
    pub assignable_private_w: Option<f64>,
    #[serde(default)]
    pub big_decision_share: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Jc,
    Spc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub model: ModelChoice,
    pub big_decision_share: f64,
    pub nonlabor_band: [f64; 2],
    pub percentile_band: [f64; 2],
    pub child_support: ChildSupportSchedule,
    /// Clamp negative household non-labour income at zero.
    pub truncate_negative_nonlabor: bool,
    /// Drop households whose wages or non-labour income fall outside these
    /// percentiles.
    pub trim_percentiles: Option<[f64; 2]>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            model: ModelChoice::Jc,
            big_decision_share: 0.5,
            nonlabor_band: [0.4, 0.6],
            percentile_band: [0.01, 0.99],
            child_support: ChildSupportSchedule::default(),
            truncate_negative_nonlabor: false,
            trim_percentiles: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HouseholdType {
    Couple,
    Single,
}

pub fn impute_children_expenditure(kind: HouseholdType, n_children: u32, total: f64) -> Result<f64> {
    if !(total >= 0.0) {
        return Err(Error::InvalidInput(format!("negative total expenditure {total}")));
    }
    if n_children == 0 {
        return Ok(0.0);
    }
    let table = match kind {
        HouseholdType::Couple => &COUPLE_CHILD_SHARE,
        HouseholdType::Single => &SINGLE_CHILD_SHARE,
    };
    Ok(table[(n_children as usize - 1).min(2)] * total)
}

/// Observed bundle: children's cost from the equivalence scale, the adult
/// remainder split evenly into private and public, leisure from hours.
pub fn build_bundle(row: &HouseholdsCsvRow, members: &[&Agent], config: &IngestConfig) -> Result<HouseholdBundle> {
    let kind = match members.len() {
        1 => HouseholdType::Single,
        2 => HouseholdType::Couple,
        n => {
            return Err(Error::InvalidInput(format!(
                "household {} has {n} members",
                row.household_id
            )))
        }
    };
    let mut b = HouseholdBundle::default();
    for a in members {
        if a.work_hours > WEEKLY_HOURS || a.work_hours < 0.0 {
            return Err(Error::InvalidInput(format!("agent {} works {} hours", a.id, a.work_hours)));
        }
        match a.gender {
            Gender::Male => b.leisure_m = a.leisure(),
            Gender::Female => b.leisure_w = a.leisure(),
        }
    }
    let n_children = members.iter().map(|a| a.n_children).max().unwrap_or(0);
    let children = impute_children_expenditure(kind, n_children, row.total_expenditure)?;
    let adult = row.total_expenditure - children;
    b.q_priv = adult / 2.0;
    b.q_pub = adult / 2.0;
    let share = row.big_decision_share.unwrap_or(config.big_decision_share);
    if !(0.0..=1.0).contains(&share) {
        return Err(Error::InvalidInput(format!(
            "household {}: big_decision_share {share} outside [0, 1]",
            row.household_id
        )));
    }
    b.child_big_k = share * children;
    b.child_daily_k = children - b.child_big_k;
    b.child_total_c = children;
    b.q_priv_assign_m = row.assignable_private_m;
    b.q_priv_assign_w = row.assignable_private_w;
    Ok(b)
}

/// Household non-labour income: full consumption (market expenditure plus
/// wage-valued leisure) minus potential labour income.
pub fn household_nonlabor_income(members: &[&Agent], total_expenditure: f64) -> f64 {
    let leisure_value: f64 = members.iter().map(|a| a.wage * a.leisure()).sum();
    let potential: f64 = members.iter().map(|a| a.potential_labor_income()).sum();
    total_expenditure + leisure_value - potential
}

/// Income of a counterfactual pair given each member's non-labour income.
pub fn counterfactual_income(entry: &GridEntry, ynl_m: f64, ynl_w: f64) -> f64 {
    entry.y_labor - entry.income_deduction + ynl_m + ynl_w
}

/// Unit-price grid over every option of `agents`, with potential labour
/// income from wages.
pub fn build_grid(agents: &[Agent]) -> PriceIncomeGrid {
    let pos: BTreeMap<&AgentId, &Agent> = agents.iter().map(|a| (&a.id, a)).collect();
    let shell = MarriageMarket {
        region: String::new(),
        agents: agents.to_vec(),
        households: Vec::new(),
        consideration: Vec::new(),
        grid: PriceIncomeGrid {
            entries: Vec::new(),
            labor_from_wages: true,
        },
        settings: MarketSettings::default(),
    };
    let labor = |o: &Option<AgentId>| o.as_ref().map_or(0.0, |id| pos[id].potential_labor_income());
    let entries = shell
        .required_options()
        .into_iter()
        .map(|option: ExitOption| GridEntry {
            private_price: 1.0,
            public_price: 1.0,
            y_labor: labor(&option.male) + labor(&option.female),
            income_deduction: 0.0,
            option,
        })
        .collect();
    PriceIncomeGrid {
        entries,
        labor_from_wages: true,
    }
}

/// Prices, labour incomes and per-household non-labour incomes.
pub fn compute_incomes(agents: &[Agent], households: &[Household]) -> (PriceIncomeGrid, BTreeMap<String, f64>) {
    let pos: BTreeMap<&AgentId, &Agent> = agents.iter().map(|a| (&a.id, a)).collect();
    let nonlabor = households
        .iter()
        .map(|h| {
            let members: Vec<&Agent> = h.member_ids.iter().filter_map(|id| pos.get(id).copied()).collect();
            (h.household_id.clone(), household_nonlabor_income(&members, h.total_expenditure))
        })
        .collect();
    (build_grid(agents), nonlabor)
}

/// Statutory minimum transfer owed by a non-custodial father.
pub fn compute_child_support(agent: &Agent, schedule: &ChildSupportSchedule, model: ModelKind) -> Result<f64> {
    if model == ModelKind::JointCustody {
        return Err(Error::ModelMismatch("child support exists only under sole custody".into()));
    }
    if agent.gender != Gender::Male {
        return Err(Error::Unsupported("custodians are female; transfers are paid by males".into()));
    }
    Ok(schedule.transfer(agent.n_children, agent.potential_labor_income()))
}

/// Linear-interpolation percentile of a sorted sample (`p` in `[0, 1]`).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Age-difference window `[lo, hi]` of matched couples (male minus female).
pub fn age_window(agents: &[Agent], band: [f64; 2]) -> Option<(f64, f64)> {
    let pos: BTreeMap<&AgentId, &Agent> = agents.iter().map(|a| (&a.id, a)).collect();
    let mut diffs: Vec<f64> = agents
        .iter()
        .filter(|a| a.gender == Gender::Male)
        .filter_map(|m| {
            let w = pos.get(m.spouse_id.as_ref()?)?;
            Some(m.age - w.age)
        })
        .collect();
    if diffs.is_empty() {
        return None;
    }
    diffs.sort_by(f64::total_cmp);
    Some((percentile(&diffs, band[0]), percentile(&diffs, band[1])))
}

pub fn build_consideration_sets(market: &MarriageMarket, band: [f64; 2]) -> Result<Vec<ConsiderationSet>> {
    let (lo, hi) = age_window(&market.agents, band).ok_or_else(|| Error::EmptyMarket(market.region.clone()))?;
    let mut agents: Vec<&Agent> = market.agents.iter().collect();
    agents.sort_by(|a, b| a.id.cmp(&b.id));
    let within = |m: &Agent, w: &Agent| {
        let d = m.age - w.age;
        d >= lo && d <= hi && m.spouse_id.as_ref() != Some(&w.id)
    };
    Ok(agents
        .iter()
        .map(|a| {
            let options = agents
                .iter()
                .filter(|b| b.gender != a.gender)
                .filter(|b| match a.gender {
                    Gender::Male => within(a, b),
                    Gender::Female => within(b, a),
                })
                .map(|b| b.id.clone())
                .collect();
            ConsiderationSet {
                agent: a.id.clone(),
                options,
                singlehood: true,
            }
        })
        .collect())
}

/// Groups agents by region; spouses must share one.
pub fn partition_agents(agents: &[Agent]) -> Result<BTreeMap<String, Vec<Agent>>> {
    let pos: BTreeMap<&AgentId, &Agent> = agents.iter().map(|a| (&a.id, a)).collect();
    let mut out: BTreeMap<String, Vec<Agent>> = BTreeMap::new();
    for a in agents {
        if let Some(s) = a.spouse_id.as_ref().and_then(|s| pos.get(s)) {
            if s.region != a.region {
                return Err(Error::InconsistentRegion(a.id.0.clone(), s.id.0.clone()));
            }
        }
        out.entry(a.region.clone()).or_default().push(a.clone());
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(out)
}

fn parse_gender(s: &str, id: &str) -> Result<Gender> {
    match s.trim().to_ascii_lowercase().as_str() {
        "male" | "m" => Ok(Gender::Male),
        "female" | "f" => Ok(Gender::Female),
        other => Err(Error::InvalidInput(format!("agent {id}: unknown gender {other:?}"))),
    }
}

pub fn read_agents(reader: impl Read) -> Result<Vec<Agent>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != AGENTS_HEADER {
        return Err(Error::InvalidInput(format!(
            "agents header must be {}",
            AGENTS_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<AgentsCsvRow>() {
        let r = row?;
        out.push(Agent {
            gender: parse_gender(&r.gender, &r.id)?,
            id: AgentId(r.id),
            wage: r.wage,
            work_hours: r.work_hours,
            age: r.age,
            region: r.region,
            n_children: r.n_children,
            spouse_id: r.spouse_id.filter(|s| !s.is_empty()).map(AgentId),
        });
    }
    Ok(out)
}

pub fn read_households(reader: impl Read) -> Result<Vec<HouseholdsCsvRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for h in HOUSEHOLDS_REQUIRED {
        if !headers.iter().any(|x| x == h) {
            return Err(Error::InvalidInput(format!("households file lacks column {h}")));
        }
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<HouseholdsCsvRow>() {
        let r = row?;
        if !(r.total_expenditure >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "household {}: negative total expenditure",
                r.household_id
            )));
        }
        out.push(r);
    }
    Ok(out)
}

fn member_ids(row: &HouseholdsCsvRow) -> Vec<AgentId> {
    row.member_ids
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(AgentId::from)
        .collect()
}

fn trim_outliers(agents: &mut Vec<Agent>, households: &mut Vec<Household>, band: [f64; 2]) {
    let mut wages: Vec<f64> = agents.iter().map(|a| a.wage).collect();
    let mut nonlabor: Vec<f64> = households.iter().map(|h| h.nonlabor_income).collect();
    if wages.is_empty() || nonlabor.is_empty() {
        return;
    }
    wages.sort_by(f64::total_cmp);
    nonlabor.sort_by(f64::total_cmp);
    let (wl, wh) = (percentile(&wages, band[0]), percentile(&wages, band[1]));
    let (nl, nh) = (percentile(&nonlabor, band[0]), percentile(&nonlabor, band[1]));
    let pos: BTreeMap<AgentId, f64> = agents.iter().map(|a| (a.id.clone(), a.wage)).collect();
    let mut dropped = Vec::new();
    households.retain(|h| {
        let ok = (nl..=nh).contains(&h.nonlabor_income)
            && h.member_ids.iter().all(|id| pos.get(id).is_some_and(|w| (wl..=wh).contains(w)));
        if !ok {
            dropped.extend(h.member_ids.iter().cloned());
        }
        ok
    });
    agents.retain(|a| !dropped.contains(&a.id));
}

/// Full ingest: parse, build bundles and incomes, partition by region and
/// attach consideration sets. Every market is validated.
pub fn ingest(agents_csv: impl Read, households_csv: impl Read, config: &IngestConfig) -> Result<MarketDocument> {
    let mut agents = read_agents(agents_csv)?;
    let rows = read_households(households_csv)?;
    let pos: BTreeMap<AgentId, Agent> = agents.iter().map(|a| (a.id.clone(), a.clone())).collect();
    let mut households = Vec::with_capacity(rows.len());
    for row in &rows {
        let ids = member_ids(row);
        let members: Vec<&Agent> = ids
            .iter()
            .map(|id| pos.get(id).ok_or_else(|| Error::InvalidInput(format!("unknown member {id}"))))
            .collect::<Result<_>>()?;
        let bundle = build_bundle(row, &members, config)?;
        let mut nonlabor = household_nonlabor_income(&members, row.total_expenditure);
        if nonlabor < 0.0 {
            log::warn!("household {} has negative non-labour income {nonlabor}", row.household_id);
            if config.truncate_negative_nonlabor {
                nonlabor = 0.0;
            }
        }
        households.push(Household {
            household_id: row.household_id.clone(),
            member_ids: ids,
            total_expenditure: row.total_expenditure,
            assignable_private_m: row.assignable_private_m,
            assignable_private_w: row.assignable_private_w,
            big_decision_share: row.big_decision_share,
            bundle,
            nonlabor_income: nonlabor,
            rho: 1.0,
        });
    }
    if let Some(band) = config.trim_percentiles {
        trim_outliers(&mut agents, &mut households, band);
    }
    let settings = MarketSettings {
        nonlabor_band: config.nonlabor_band,
        child_support: config.child_support.clone(),
        custodian: Gender::Female,
    };
    let mut markets = Vec::new();
    for (region, agents) in partition_agents(&agents)? {
        let mut hh: Vec<Household> = households
            .iter()
            .filter(|h| h.member_ids.iter().any(|id| agents.iter().any(|a| &a.id == id)))
            .cloned()
            .collect();
        hh.sort_by(|a, b| a.household_id.cmp(&b.household_id));
        let mut market = MarriageMarket {
            region,
            grid: build_grid(&agents),
            agents,
            households: hh,
            consideration: Vec::new(),
            settings: settings.clone(),
        };
        market.consideration = build_consideration_sets(&market, config.percentile_band)?;
        let v = validate_market(&market);
        if !v.is_empty() {
            return Err(Error::Validation(v));
        }
        markets.push(market);
    }
    Ok(MarketDocument::new(markets))
}
