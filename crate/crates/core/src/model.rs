//! Marriage-market domain types.
//!
//! Units are fixed: money in currency per week, time in hours per week. All
//! values are immutable once a market is built; the solvers only read them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Weekly time endowment; potential labour income is this times the wage.
pub const WEEKLY_HOURS: f64 = 112.0;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(s: impl Into<String>) -> Self {
        AgentId(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn opposite(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaritalStatus {
    Married(AgentId),
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub gender: Gender,
    pub wage: f64,
    pub work_hours: f64,
    pub age: f64,
    pub region: String,
    pub n_children: u32,
    pub spouse_id: Option<AgentId>,
}

impl Agent {
    pub fn status(&self) -> MaritalStatus {
        match &self.spouse_id {
            Some(s) => MaritalStatus::Married(s.clone()),
            None => MaritalStatus::Single,
        }
    }

    pub fn is_married(&self) -> bool {
        self.spouse_id.is_some()
    }

    pub fn leisure(&self) -> f64 {
        WEEKLY_HOURS - self.work_hours
    }

    pub fn potential_labor_income(&self) -> f64 {
        WEEKLY_HOURS * self.wage
    }
}

/// Observed consumption of one household. For singles the absent partner's
/// leisure and assignable fields stay at zero / `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HouseholdBundle {
    pub leisure_m: f64,
    pub leisure_w: f64,
    /// Aggregate private Hicksian good.
    pub q_priv: f64,
    pub q_priv_assign_m: Option<f64>,
    pub q_priv_assign_w: Option<f64>,
    /// Public Hicksian good.
    pub q_pub: f64,
    /// Children's daily-routine expenditure, provided non-cooperatively.
    pub child_daily_k: f64,
    /// Children's big-decision expenditure, provided cooperatively.
    pub child_big_k: f64,
    /// Total children's expenditure.
    pub child_total_c: f64,
}

impl HouseholdBundle {
    pub fn assign_m(&self) -> f64 {
        self.q_priv_assign_m.unwrap_or(0.0)
    }
    pub fn assign_w(&self) -> f64 {
        self.q_priv_assign_w.unwrap_or(0.0)
    }
    pub fn has_assignable(&self) -> bool {
        self.q_priv_assign_m.is_some() || self.q_priv_assign_w.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub household_id: String,
    pub member_ids: Vec<AgentId>,
    pub total_expenditure: f64,
    pub assignable_private_m: Option<f64>,
    pub assignable_private_w: Option<f64>,
    pub big_decision_share: Option<f64>,
    pub bundle: HouseholdBundle,
    /// Household non-labour income (full consumption minus potential labour
    /// income); may be negative.
    pub nonlabor_income: f64,
    /// Market price of big-decision children's goods.
    pub rho: f64,
}

/// An exit option `(m, w)` with `None` standing for singlehood.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExitOption {
    pub male: Option<AgentId>,
    pub female: Option<AgentId>,
}

impl ExitOption {
    pub fn pair(m: &AgentId, w: &AgentId) -> Self {
        ExitOption {
            male: Some(m.clone()),
            female: Some(w.clone()),
        }
    }
    pub fn male_single(m: &AgentId) -> Self {
        ExitOption {
            male: Some(m.clone()),
            female: None,
        }
    }
    pub fn female_single(w: &AgentId) -> Self {
        ExitOption {
            male: None,
            female: Some(w.clone()),
        }
    }
}

impl fmt::Display for ExitOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |o: &Option<AgentId>| o.as_ref().map_or("0".to_string(), |a| a.0.clone());
        write!(f, "({},{})", show(&self.male), show(&self.female))
    }
}

/// Prices and income data for one option `(m, w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub option: ExitOption,
    /// Price of the private Hicksian good (leisure is priced at own wage).
    pub private_price: f64,
    /// Market price of the public good.
    pub public_price: f64,
    /// Potential labour income of the pair.
    pub y_labor: f64,
    /// Constant subtracted from the pair's income; zero for raw data, set by
    /// income adjustment.
    pub income_deduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceIncomeGrid {
    pub entries: Vec<GridEntry>,
    /// When true `y_labor` must equal 112 times the sum of member wages.
    pub labor_from_wages: bool,
}

impl PriceIncomeGrid {
    pub fn lookup(&self) -> BTreeMap<&ExitOption, &GridEntry> {
        self.entries.iter().map(|e| (&e.option, e)).collect()
    }

    pub fn get(&self, option: &ExitOption) -> Option<&GridEntry> {
        self.entries.iter().find(|e| &e.option == option)
    }

    pub fn get_mut(&mut self, option: &ExitOption) -> Option<&mut GridEntry> {
        self.entries.iter_mut().find(|e| &e.option == option)
    }
}

/// Statutory minimum child support as a fraction of the non-custodian's
/// potential labour income. `rates[i]` applies to `i + 1` children; the last
/// rate applies to any larger family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildSupportSchedule {
    pub rates: Vec<f64>,
}

impl Default for ChildSupportSchedule {
    fn default() -> Self {
        ChildSupportSchedule {
            rates: vec![0.25, 0.33, 0.50],
        }
    }
}

impl ChildSupportSchedule {
    pub fn zero() -> Self {
        ChildSupportSchedule { rates: Vec::new() }
    }

    pub fn rate(&self, n_children: u32) -> f64 {
        if n_children == 0 || self.rates.is_empty() {
            return 0.0;
        }
        let i = (n_children as usize - 1).min(self.rates.len() - 1);
        self.rates[i]
    }

    pub fn transfer(&self, n_children: u32, base_income: f64) -> f64 {
        self.rate(n_children) * base_income
    }
}

/// Opposite-gender agents an individual weighs as partners; singlehood is
/// always an option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsiderationSet {
    pub agent: AgentId,
    pub options: Vec<AgentId>,
    pub singlehood: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSettings {
    /// Bounds on each spouse's share of household non-labour income.
    pub nonlabor_band: [f64; 2],
    pub child_support: ChildSupportSchedule,
    /// Parent holding sole custody after divorce.
    #[serde(default = "default_custodian")]
    pub custodian: Gender,
}

fn default_custodian() -> Gender {
    Gender::Female
}

impl Default for MarketSettings {
    fn default() -> Self {
        MarketSettings {
            nonlabor_band: [0.4, 0.6],
            child_support: ChildSupportSchedule::default(),
            custodian: Gender::Female,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarriageMarket {
    pub region: String,
    pub agents: Vec<Agent>,
    pub households: Vec<Household>,
    pub consideration: Vec<ConsiderationSet>,
    pub grid: PriceIncomeGrid,
    pub settings: MarketSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketDocument {
    pub schema_version: u32,
    pub markets: Vec<MarriageMarket>,
}

impl MarketDocument {
    pub fn new(markets: Vec<MarriageMarket>) -> Self {
        MarketDocument {
            schema_version: SCHEMA_VERSION,
            markets,
        }
    }
}

/// Bijection between married males and married females.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    pub husband_of: BTreeMap<AgentId, AgentId>,
    pub wife_of: BTreeMap<AgentId, AgentId>,
}

impl Matching {
    pub fn spouse(&self, a: &AgentId) -> Option<&AgentId> {
        self.wife_of.get(a).or_else(|| self.husband_of.get(a))
    }

    pub fn len(&self) -> usize {
        self.wife_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wife_of.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    DuplicateAgent(AgentId),
    UnknownAgent(AgentId),
    /// `first` names `second` as spouse but `second` does not name `first`.
    MatchingAsymmetry(AgentId, AgentId),
    SameGenderSpouse(AgentId, AgentId),
    WorkHoursOutOfRange(AgentId),
    AgeOutOfRange(AgentId),
    NegativeWage(AgentId),
    HouseholdMembership(String),
    AgentWithoutHousehold(AgentId),
    NegativeQuantity { household: String, field: &'static str },
    ChildSplitMismatch(String),
    AssignableExceedsPrivate(String),
    NonPositivePrice(ExitOption),
    LaborIncomeMismatch(ExitOption),
    MissingGridEntry(ExitOption),
    ConsiderationIncludesSpouse(AgentId),
    ConsiderationWithoutSinglehood(AgentId),
    ConsiderationWrongGender(AgentId, AgentId),
    RegionMismatch(AgentId),
    InvalidBand,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Resolved view of a market: agent positions, couples and singles.
#[derive(Debug, Clone)]
pub struct MarketIndex {
    pub agent_pos: BTreeMap<AgentId, usize>,
    pub couples: Vec<CoupleRef>,
    pub singles: Vec<SingleRef>,
    /// Household position for each agent.
    pub household_of: BTreeMap<AgentId, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupleRef {
    pub household: usize,
    pub male: usize,
    pub female: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingleRef {
    pub household: usize,
    pub agent: usize,
}

pub fn matching_from_agents(agents: &[Agent]) -> (Matching, Vec<Violation>) {
    let by_id: BTreeMap<&AgentId, &Agent> = agents.iter().map(|a| (&a.id, a)).collect();
    let mut matching = Matching::default();
    let mut violations = Vec::new();
    for a in agents {
        let Some(s) = &a.spouse_id else { continue };
        let Some(spouse) = by_id.get(s) else {
            violations.push(Violation::UnknownAgent(s.clone()));
            continue;
        };
        if spouse.spouse_id.as_ref() != Some(&a.id) {
            violations.push(Violation::MatchingAsymmetry(a.id.clone(), s.clone()));
            continue;
        }
        if spouse.gender == a.gender {
            if a.id < spouse.id {
                violations.push(Violation::SameGenderSpouse(a.id.clone(), s.clone()));
            }
            continue;
        }
        if a.gender == Gender::Male {
            matching.wife_of.insert(a.id.clone(), s.clone());
            matching.husband_of.insert(s.clone(), a.id.clone());
        }
    }
    (matching, violations)
}

impl MarriageMarket {
    pub fn agent(&self, id: &AgentId) -> Option<&Agent> {
        self.agents.iter().find(|a| &a.id == id)
    }

    pub fn males(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter().filter(|a| a.gender == Gender::Male)
    }

    pub fn females(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter().filter(|a| a.gender == Gender::Female)
    }

    pub fn consideration_of(&self, id: &AgentId) -> Option<&ConsiderationSet> {
        self.consideration.iter().find(|c| &c.agent == id)
    }

    /// Resolves households into couples and singles. Fails with the list of
    /// violations when the market is not well formed.
    pub fn index(&self) -> Result<MarketIndex, Vec<Violation>> {
        let mut v = Vec::new();
        let mut agent_pos = BTreeMap::new();
        for (i, a) in self.agents.iter().enumerate() {
            if agent_pos.insert(a.id.clone(), i).is_some() {
                v.push(Violation::DuplicateAgent(a.id.clone()));
            }
        }
        let (_, mv) = matching_from_agents(&self.agents);
        v.extend(mv);
        let mut household_of = BTreeMap::new();
        let mut couples = Vec::new();
        let mut singles = Vec::new();
        for (h, hh) in self.households.iter().enumerate() {
            let members: Vec<usize> = hh
                .member_ids
                .iter()
                .filter_map(|id| match agent_pos.get(id) {
                    Some(p) => Some(*p),
                    None => {
                        v.push(Violation::UnknownAgent(id.clone()));
                        None
                    }
                })
                .collect();
            if members.len() != hh.member_ids.len() {
                continue;
            }
            for id in &hh.member_ids {
                if household_of.insert(id.clone(), h).is_some() {
                    v.push(Violation::HouseholdMembership(hh.household_id.clone()));
                }
            }
            match members.as_slice() {
                [a] if !self.agents[*a].is_married() => singles.push(SingleRef {
                    household: h,
                    agent: *a,
                }),
                [a, b] => {
                    let (x, y) = (&self.agents[*a], &self.agents[*b]);
                    if x.spouse_id.as_ref() != Some(&y.id) || y.spouse_id.as_ref() != Some(&x.id) {
                        v.push(Violation::HouseholdMembership(hh.household_id.clone()));
                        continue;
                    }
                    let (male, female) = match (x.gender, y.gender) {
                        (Gender::Male, Gender::Female) => (*a, *b),
                        (Gender::Female, Gender::Male) => (*b, *a),
                        _ => continue,
                    };
                    couples.push(CoupleRef {
                        household: h,
                        male,
                        female,
                    });
                }
                _ => v.push(Violation::HouseholdMembership(hh.household_id.clone())),
            }
        }
        for a in &self.agents {
            if !household_of.contains_key(&a.id) {
                v.push(Violation::AgentWithoutHousehold(a.id.clone()));
            }
        }
        if v.is_empty() {
            Ok(MarketIndex {
                agent_pos,
                couples,
                singles,
                household_of,
            })
        } else {
            v.sort();
            v.dedup();
            Err(v)
        }
    }

    /// Every option the grid must price: all pairs of one male and one
    /// female, and singlehood for every married agent.
    pub fn required_options(&self) -> Vec<ExitOption> {
        let mut out = Vec::new();
        for m in self.males() {
            if m.is_married() {
                out.push(ExitOption::male_single(&m.id));
            }
            for w in self.females() {
                out.push(ExitOption::pair(&m.id, &w.id));
            }
        }
        for w in self.females() {
            if w.is_married() {
                out.push(ExitOption::female_single(&w.id));
            }
        }
        out.sort();
        out
    }
}

/// Structural and data invariants of a market. An empty list means valid.
pub fn validate_market(market: &MarriageMarket) -> Vec<Violation> {
    let mut v = match market.index() {
        Ok(_) => Vec::new(),
        Err(e) => e,
    };
    let [lo, hi] = market.settings.nonlabor_band;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi || lo > 0.5 || hi < 0.5 {
        v.push(Violation::InvalidBand);
    }
    for a in &market.agents {
        if !(10.0..=WEEKLY_HOURS).contains(&a.work_hours) {
            v.push(Violation::WorkHoursOutOfRange(a.id.clone()));
        }
        if !(25.0..=65.0).contains(&a.age) {
            v.push(Violation::AgeOutOfRange(a.id.clone()));
        }
        if a.wage < 0.0 || !a.wage.is_finite() {
            v.push(Violation::NegativeWage(a.id.clone()));
        }
        if a.region != market.region {
            v.push(Violation::RegionMismatch(a.id.clone()));
        }
    }
    for h in &market.households {
        v.extend(validate_bundle(&h.household_id, &h.bundle));
    }

    let agents: BTreeMap<&AgentId, &Agent> = market.agents.iter().map(|a| (&a.id, a)).collect();
    let grid = market.grid.lookup();
    for opt in market.required_options() {
        match grid.get(&opt) {
            None => v.push(Violation::MissingGridEntry(opt)),
            Some(e) => {
                if !(e.private_price > 0.0 && e.public_price > 0.0) {
                    v.push(Violation::NonPositivePrice(opt.clone()));
                }
                if market.grid.labor_from_wages {
                    let wage = |o: &Option<AgentId>| {
                        o.as_ref()
                            .and_then(|id| agents.get(id))
                            .map_or(0.0, |a| a.potential_labor_income())
                    };
                    let expected = wage(&opt.male) + wage(&opt.female);
                    if (e.y_labor - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                        v.push(Violation::LaborIncomeMismatch(opt.clone()));
                    }
                }
            }
        }
    }

    for cs in &market.consideration {
        let Some(owner) = agents.get(&cs.agent) else {
            v.push(Violation::UnknownAgent(cs.agent.clone()));
            continue;
        };
        if !cs.singlehood {
            v.push(Violation::ConsiderationWithoutSinglehood(cs.agent.clone()));
        }
        for o in &cs.options {
            match agents.get(o) {
                None => v.push(Violation::UnknownAgent(o.clone())),
                Some(other) => {
                    if other.gender == owner.gender {
                        v.push(Violation::ConsiderationWrongGender(cs.agent.clone(), o.clone()));
                    }
                    if owner.spouse_id.as_ref() == Some(o) {
                        v.push(Violation::ConsiderationIncludesSpouse(cs.agent.clone()));
                    }
                }
            }
        }
    }
    v.sort();
    v.dedup();
    v
}

pub fn validate_bundle(household: &str, b: &HouseholdBundle) -> Vec<Violation> {
    let mut v = Vec::new();
    let fields: [(&'static str, f64); 7] = [
        ("leisure_m", b.leisure_m),
        ("leisure_w", b.leisure_w),
        ("q_priv", b.q_priv),
        ("q_pub", b.q_pub),
        ("child_daily_k", b.child_daily_k),
        ("child_big_k", b.child_big_k),
        ("child_total_c", b.child_total_c),
    ];
    for (name, x) in fields {
        if !(x >= 0.0) {
            v.push(Violation::NegativeQuantity {
                household: household.to_string(),
                field: name,
            });
        }
    }
    for (name, x) in [
        ("q_priv_assign_m", b.q_priv_assign_m),
        ("q_priv_assign_w", b.q_priv_assign_w),
    ] {
        if let Some(x) = x {
            if !(x >= 0.0) {
                v.push(Violation::NegativeQuantity {
                    household: household.to_string(),
                    field: name,
                });
            }
        }
    }
    let c = b.child_daily_k + b.child_big_k;
    if (c - b.child_total_c).abs() > 1e-9 * (1.0 + b.child_total_c.abs()) {
        v.push(Violation::ChildSplitMismatch(household.to_string()));
    }
    if b.has_assignable() && b.assign_m() + b.assign_w() > b.q_priv * (1.0 + 1e-12) + 1e-12 {
        v.push(Violation::AssignableExceedsPrivate(household.to_string()));
    }
    v
}
