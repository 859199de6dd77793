mod common;

use common::*;
use stablehh::model::{ChildSupportSchedule, ExitOption, Gender, validate_market};
use stablehh::oracle::{generate_stable_market, perturb_incomes, reference_income};
use stablehh::stability::{
    adjust_grid, adjust_incomes, build_program, is_rationalizable, solve_stability_indices, IndexMode, ModelKind,
    NonlaborMode, ProgramOptions, RowKind, SolveSettings, SplitMode,
};

fn program(m: &stablehh::model::MarriageMarket, model: ModelKind) -> stablehh::StabilityProgramF64 {
    build_program(m, ProgramOptions::new(model, NonlaborMode::Half, IndexMode::Multiplicative)).unwrap()
}

fn one_couple(wage_m: f64, children: u32, b: stablehh::model::HouseholdBundle) -> stablehh::model::MarriageMarket {
    let m = agent("m1", Gender::Male, wage_m, children, Some("w1"));
    let w = agent("w1", Gender::Female, 0.0, children, Some("m1"));
    let h = couple("h1", &m, &w, b);
    market(vec![m, w], vec![h])
}

#[test]
fn joint_custody_ir_row() {
    let mut mk = one_couple(0.0, 1, bundle(40.0, 30.0, 10.0, 20.0));
    let opt = ExitOption::male_single(&"m1".into());
    set_income(&mut mk, &opt, 100.0);
    assert!(validate_market(&mk).is_empty());
    let prog = program(&mk, ModelKind::JointCustody);
    let (t, rhs) = row_of(&prog, &opt);
    // 100 s <= q_m + 30 + 10 + 20 rho_m
    assert_eq!(t, terms(&[("s(m1,0)", 100.0), ("q_m[h1]", -1.0), ("rho_m[h1]", -20.0)]));
    assert_eq!(rhs, 40.0);
}

#[test]
fn sole_custody_female_ir_row() {
    // T = 0.33 * 112 * 100 = 3696
    let mut mk = one_couple(100.0, 2, bundle(40.0, 30.0, 12.0, 13.0));
    let opt = ExitOption::female_single(&"w1".into());
    set_income(&mut mk, &opt, 2000.0);
    let prog = program(&mk, ModelKind::SoleCustody { binding: false });
    assert!((prog.transfers[0] - 3696.0).abs() < 1e-9);
    let (t, rhs) = row_of(&prog, &opt);
    // 2000 s + 3696 <= q_w + 30 + 25
    assert_eq!(t, terms(&[("s(0,w1)", 2000.0), ("q_w[h1]", -1.0)]));
    assert!((rhs - (55.0 - 3696.0)).abs() < 1e-9);
}

#[test]
fn binding_variant_deducts_own_transfer() {
    let mut mk = one_couple(100.0, 2, bundle(40.0, 30.0, 12.0, 13.0));
    let opt = ExitOption::male_single(&"m1".into());
    set_income(&mut mk, &opt, 15000.0);
    let male_leisure = 100.0 * 72.0;
    let (_, plain) = row_of(&program(&mk, ModelKind::SoleCustody { binding: false }), &opt);
    let (t, binding) = row_of(&program(&mk, ModelKind::SoleCustody { binding: true }), &opt);
    assert_eq!(t, terms(&[("s(m1,0)", 15000.0), ("q_m[h1]", -1.0)]));
    assert!((plain - (male_leisure + 55.0)).abs() < 1e-9);
    assert!((binding - (male_leisure + 55.0 + 3696.0)).abs() < 1e-9);
}

fn two_couples(k: [f64; 2], big_k: [f64; 2]) -> stablehh::model::MarriageMarket {
    let m1 = agent("m1", Gender::Male, 10.0, 1, Some("w1"));
    let w1 = agent("w1", Gender::Female, 8.0, 1, Some("m1"));
    let m2 = agent("m2", Gender::Male, 12.0, 2, Some("w2"));
    let w2 = agent("w2", Gender::Female, 9.0, 2, Some("m2"));
    let h1 = couple("h1", &m1, &w1, bundle(400.0, 300.0, k[0], big_k[0]));
    let h2 = couple("h2", &m2, &w2, bundle(500.0, 250.0, k[1], big_k[1]));
    let mut mk = market(vec![m1, w1, m2, w2], vec![h1, h2]);
    for (a, b) in [("m1", "w2"), ("w1", "m2")] {
        consider(&mut mk, a, b);
    }
    for e in &mut mk.grid.entries {
        e.y_labor = 900.0;
    }
    mk
}

#[test]
fn childless_pair_has_no_children_terms() {
    let mk = two_couples([0.0, 0.0], [0.0, 0.0]);
    let prog = program(&mk, ModelKind::JointCustody);
    let nbp: Vec<_> = prog.options.iter().filter(|o| o.kind == RowKind::NoBlockingPair).collect();
    assert_eq!(nbp.len(), 2);
    for o in nbp {
        let (t, _) = row_of(&prog, &o.option);
        assert!(t.keys().all(|n| !n.starts_with("rho")), "{t:?}");
    }
}

#[test]
fn joint_custody_without_big_decisions_matches_zero_transfer_sole_custody() {
    let mut mk = two_couples([80.0, 120.0], [0.0, 0.0]);
    mk.settings.child_support = ChildSupportSchedule::zero();
    let jc = program(&mk, ModelKind::JointCustody);
    let spc = program(&mk, ModelKind::SoleCustody { binding: true });
    assert_eq!(jc.options.len(), spc.options.len());
    for (a, b) in jc.options.iter().zip(&spc.options) {
        assert_eq!(a.option, b.option);
        let (ta, ra) = row_of(&jc, &a.option);
        let (tb, rb) = row_of(&spc, &b.option);
        assert_eq!(ta, tb, "{}", a.option);
        assert!((ra - rb).abs() < 1e-9, "{}", a.option);
    }
}

#[test]
fn blocking_pair_exceeded_by_ten_percent() {
    // his private good is pinned by assignability, equal public goods make
    // the pair's Lindahl split irrelevant
    let m1 = agent("m1", Gender::Male, 0.0, 0, Some("w1"));
    let w1 = agent("w1", Gender::Female, 0.0, 0, Some("m1"));
    let w2 = agent("w2", Gender::Female, 0.0, 0, None);
    let mut b = bundle(40.0, 30.0, 0.0, 0.0);
    b.q_priv_assign_m = Some(25.0);
    b.q_priv_assign_w = Some(15.0);
    let h1 = couple("h1", &m1, &w1, b);
    let s2 = single("s2", &w2, bundle(20.0, 30.0, 0.0, 0.0));
    let mut mk = market(vec![m1, w1, w2], vec![h1, s2]);
    consider(&mut mk, "m1", "w2");
    let pair = ExitOption::pair(&"m1".into(), &"w2".into());
    let cost = 25.0 + 20.0 + 30.0;
    set_income(&mut mk, &pair, cost / 0.9);
    assert!(validate_market(&mk).is_empty());
    let r = solve_stability_indices(&mk, ModelKind::JointCustody, SplitMode::Fixed5050, &SolveSettings::default()).unwrap();
    for o in &r.options {
        let want = if o.option == pair { 0.9 } else { 1.0 };
        assert!((o.index - want).abs() < 1e-9, "{} {}", o.option, o.index);
    }
    let c = &r.couples[0];
    assert!((c.minimum_index - 0.9).abs() < 1e-9);
    assert_eq!(c.n_options, 3);
}

#[test]
fn zero_incomes_give_full_indices() {
    let mut mk = two_couples([10.0, 20.0], [5.0, 5.0]);
    for e in &mut mk.grid.entries {
        e.y_labor = 0.0;
    }
    for model in [ModelKind::JointCustody, ModelKind::SoleCustody { binding: false }] {
        for split in [SplitMode::Fixed5050, SplitMode::Endogenous] {
            let r = solve_stability_indices(&mk, model, split, &SolveSettings::default()).unwrap();
            assert!(r.options.iter().all(|o| (o.index - 1.0).abs() < 1e-9));
            assert!((r.total_index - r.options.len() as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn adjustment_removes_lost_income() {
    let mut b = bundle(1000.0, 300.0, 0.0, 0.0);
    b.q_priv_assign_m = Some(600.0);
    b.q_priv_assign_w = Some(400.0);
    let mut mk = one_couple(0.0, 0, b);
    let opt = ExitOption::male_single(&"m1".into());
    set_income(&mut mk, &opt, 1000.0);
    let settings = SolveSettings::default();
    let r = solve_stability_indices(&mk, ModelKind::JointCustody, SplitMode::Fixed5050, &settings).unwrap();
    let s = r.options.iter().find(|o| o.option == opt).unwrap();
    assert!((s.index - 0.9).abs() < 1e-9);
    let adjusted = adjust_incomes(&mk, &r, &settings).unwrap();
    assert!((reference_income(&adjusted, &opt).unwrap() - 900.0).abs() < 1e-9);
    assert!(is_rationalizable(&adjusted, ModelKind::JointCustody, SplitMode::Fixed5050, &settings).unwrap());
}

#[test]
fn full_indices_leave_grid_unchanged() {
    let (mk, _) = generate_stable_market(11, 4, 2, ModelKind::JointCustody);
    let r = solve_stability_indices(&mk, ModelKind::JointCustody, SplitMode::Fixed5050, &SolveSettings::default()).unwrap();
    assert_eq!(adjust_grid(&mk.grid, &r).unwrap(), mk.grid);
}

#[test]
fn endogenous_adjustment_passes_post_check() {
    let settings = SolveSettings::default();
    for seed in 0..10 {
        for model in [ModelKind::JointCustody, ModelKind::SoleCustody { binding: seed % 2 == 0 }] {
            let (mk, truth) = generate_stable_market(seed, 4, 2, model);
            let mut p = mk.clone();
            for o in truth.options.iter().step_by(3) {
                p = perturb_incomes(&p, &o.option, 1.5).unwrap();
            }
            let r = solve_stability_indices(&p, model, SplitMode::Endogenous, &settings).unwrap();
            assert!(r.total_index < r.options.len() as f64);
            let adjusted = adjust_incomes(&p, &r, &settings).unwrap();
            assert!(is_rationalizable(&adjusted, model, SplitMode::Endogenous, &settings).unwrap());
        }
    }
}

#[test]
fn adjustment_rejects_foreign_report() {
    let settings = SolveSettings::default();
    let (a, _) = generate_stable_market(1, 3, 0, ModelKind::JointCustody);
    let (b, _) = generate_stable_market(2, 3, 0, ModelKind::JointCustody);
    let r = solve_stability_indices(&a, ModelKind::JointCustody, SplitMode::Fixed5050, &settings).unwrap();
    assert!(adjust_incomes(&b, &r, &settings).is_err());
}

#[test]
fn transfer_beyond_costs_is_a_model_error() {
    // T = 0.5 * 112 * 200 = 11200 exceeds everything she could be charged
    let mk = one_couple(200.0, 3, bundle(40.0, 30.0, 12.0, 13.0));
    let err = solve_stability_indices(
        &mk,
        ModelKind::SoleCustody { binding: false },
        SplitMode::Fixed5050,
        &SolveSettings::default(),
    )
    .unwrap_err();
    assert!(matches!(err, stablehh::Error::ModelError(_)), "{err}");
}

#[test]
fn rational_program_matches_float_rows() {
    let mk = two_couples([80.0, 120.0], [40.0, 10.0]);
    let opts = ProgramOptions::new(ModelKind::JointCustody, NonlaborMode::Band, IndexMode::AdditiveLoss);
    let f: stablehh::StabilityProgramF64 = build_program(&mk, opts).unwrap();
    let q: stablehh::RationalStabilityProgram = build_program(&mk, opts).unwrap();
    assert_eq!(f.lp.num_constraints(), q.lp.num_constraints());
    let back = q.lp.map_scalar(|x| stablehh::scalar::Scalar::to_f64_lossy(x));
    for (a, b) in back.constraints.iter().zip(&f.lp.constraints) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.sense, b.sense);
        assert!((a.rhs - b.rhs).abs() <= 1e-9 * b.rhs.abs().max(1.0), "{}", a.name);
        assert_eq!(a.terms.len(), b.terms.len(), "{}", a.name);
        for ((va, ca), (vb, cb)) in a.terms.iter().zip(&b.terms) {
            assert_eq!(va, vb);
            assert!((ca - cb).abs() <= 1e-12 * cb.abs().max(1.0));
        }
    }
}
