//! Small hand-built markets for row-level tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use stablehh::ingest::build_grid;
use stablehh::model::{
    Agent, AgentId, ConsiderationSet, ExitOption, Gender, Household, HouseholdBundle, MarketSettings,
    MarriageMarket,
};
use stablehh::stability::StabilityProgram;

pub fn agent(id: &str, gender: Gender, wage: f64, n_children: u32, spouse: Option<&str>) -> Agent {
    Agent {
        id: AgentId::new(id),
        gender,
        wage,
        work_hours: 40.0,
        age: 40.0,
        region: "test".into(),
        n_children,
        spouse_id: spouse.map(AgentId::new),
    }
}

pub fn couple(hid: &str, m: &Agent, w: &Agent, bundle: HouseholdBundle) -> Household {
    Household {
        household_id: hid.into(),
        member_ids: vec![m.id.clone(), w.id.clone()],
        total_expenditure: bundle.q_priv + bundle.q_pub + bundle.child_total_c,
        assignable_private_m: bundle.q_priv_assign_m,
        assignable_private_w: bundle.q_priv_assign_w,
        big_decision_share: None,
        bundle: HouseholdBundle {
            leisure_m: m.leisure(),
            leisure_w: w.leisure(),
            ..bundle
        },
        nonlabor_income: 0.0,
        rho: 1.0,
    }
}

pub fn single(hid: &str, a: &Agent, bundle: HouseholdBundle) -> Household {
    let mut b = bundle;
    match a.gender {
        Gender::Male => b.leisure_m = a.leisure(),
        Gender::Female => b.leisure_w = a.leisure(),
    }
    Household {
        household_id: hid.into(),
        member_ids: vec![a.id.clone()],
        total_expenditure: b.q_priv + b.q_pub + b.child_total_c,
        assignable_private_m: None,
        assignable_private_w: None,
        big_decision_share: None,
        bundle: b,
        nonlabor_income: 0.0,
        rho: 1.0,
    }
}

/// Market with unit prices, zero incomes everywhere and no considered pairs.
pub fn market(agents: Vec<Agent>, households: Vec<Household>) -> MarriageMarket {
    let mut grid = build_grid(&agents);
    grid.labor_from_wages = false;
    for e in &mut grid.entries {
        e.y_labor = 0.0;
    }
    let consideration = agents
        .iter()
        .map(|a| ConsiderationSet {
            agent: a.id.clone(),
            options: Vec::new(),
            singlehood: true,
        })
        .collect();
    MarriageMarket {
        region: "test".into(),
        agents,
        households,
        consideration,
        grid,
        settings: MarketSettings::default(),
    }
}

pub fn set_income(m: &mut MarriageMarket, option: &ExitOption, y: f64) {
    m.grid.get_mut(option).unwrap().y_labor = y;
}

pub fn consider(m: &mut MarriageMarket, who: &str, other: &str) {
    let cs = m.consideration.iter_mut().find(|c| c.agent.as_str() == who).unwrap();
    cs.options.push(AgentId::new(other));
    cs.options.sort();
}

pub fn bundle(q: f64, big_q: f64, k: f64, big_k: f64) -> HouseholdBundle {
    HouseholdBundle {
        q_priv: q,
        q_pub: big_q,
        child_daily_k: k,
        child_big_k: big_k,
        child_total_c: k + big_k,
        ..Default::default()
    }
}

/// The option's row as `name -> coefficient` (zero terms dropped) and its
/// right-hand side.
pub fn row_of(prog: &StabilityProgram<f64>, option: &ExitOption) -> (BTreeMap<String, f64>, f64) {
    let o = prog.options.iter().find(|o| &o.option == option).expect("option has a row");
    let c = &prog.lp.constraints[o.row];
    let mut terms = BTreeMap::new();
    for (v, a) in &c.terms {
        if *a != 0.0 {
            *terms.entry(prog.lp.variables[v.0].name.clone()).or_insert(0.0) += a;
        }
    }
    (terms, c.rhs)
}

pub fn terms(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(n, a)| (n.to_string(), *a)).collect()
}
