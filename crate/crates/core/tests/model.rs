mod common;

use common::*;
use stablehh::model::{validate_market, AgentId, ExitOption, Gender, MarketDocument, Violation};
use stablehh::oracle::generate_stable_market;
use stablehh::stability::ModelKind;

#[test]
fn market_json_round_trip() {
    let (m, _) = generate_stable_market(12, 5, 3, ModelKind::SoleCustody { binding: true });
    let doc = MarketDocument::new(vec![m]);
    let s = serde_json::to_string(&doc).unwrap();
    let back: MarketDocument = serde_json::from_str(&s).unwrap();
    assert_eq!(back, doc);
    assert_eq!(serde_json::to_string(&back).unwrap(), s);
}

#[test]
fn symmetric_single_couple_is_valid() {
    let m = agent("m1", Gender::Male, 10.0, 0, Some("w1"));
    let w = agent("w1", Gender::Female, 8.0, 0, Some("m1"));
    let h = couple("h1", &m, &w, bundle(40.0, 30.0, 0.0, 0.0));
    assert_eq!(validate_market(&market(vec![m, w], vec![h])), vec![]);
}

#[test]
fn violations_are_reported() {
    let m = agent("m1", Gender::Male, 10.0, 0, Some("w1"));
    let w = agent("w1", Gender::Female, 8.0, 0, Some("m1"));
    let h = couple("h1", &m, &w, bundle(40.0, 30.0, 0.0, 0.0));
    let base = market(vec![m, w], vec![h]);

    let mut mk = base.clone();
    mk.agents[0].work_hours = 5.0;
    assert!(validate_market(&mk).iter().any(|v| matches!(v, Violation::WorkHoursOutOfRange(_))));

    let mut mk = base.clone();
    mk.agents[1].age = 70.0;
    assert!(validate_market(&mk).iter().any(|v| matches!(v, Violation::AgeOutOfRange(_))));

    let mut mk = base.clone();
    mk.grid.get_mut(&ExitOption::male_single(&"m1".into())).unwrap().private_price = 0.0;
    assert!(validate_market(&mk).iter().any(|v| matches!(v, Violation::NonPositivePrice(_))));

    let mut mk = base.clone();
    mk.consideration[0].options.push(AgentId::new("w1"));
    assert!(validate_market(&mk).iter().any(|v| matches!(v, Violation::ConsiderationIncludesSpouse(..))));

    let mut mk = base.clone();
    mk.consideration[0].singlehood = false;
    assert!(validate_market(&mk).iter().any(|v| matches!(v, Violation::ConsiderationWithoutSinglehood(_))));

    let mut mk = base;
    mk.households[0].bundle.child_total_c = 25.0;
    mk.households[0].bundle.child_daily_k = 10.0;
    mk.households[0].bundle.child_big_k = 20.0;
    assert!(validate_market(&mk).iter().any(|v| matches!(v, Violation::ChildSplitMismatch(_))));
}
