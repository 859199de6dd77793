//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stablehh::identification::{compute_bounds, BoundsOptions};
use stablehh::ingest::{impute_children_expenditure, ingest, HouseholdType, IngestConfig};
use stablehh::model::{AgentId, ChildSupportSchedule, ExitOption, Gender, MarriageMarket, WEEKLY_HOURS};
use stablehh::oracle::{
    brute_force_rationalizable, generate_stable_market, generate_stable_market_with, perturb_incomes,
    reference_income, Consideration, OracleConfig,
};
use stablehh::stability::{
    adjust_incomes, is_rationalizable, solve_stability_indices, ModelKind, SolveSettings, SplitMode,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s(e: impl std::fmt::Display) -> String {
    e.to_string()
}

const MODELS: [ModelKind; 3] = [
    ModelKind::JointCustody,
    ModelKind::SoleCustody { binding: false },
    ModelKind::SoleCustody { binding: true },
];

// 1
fn oracle_stability() -> Outcome {
    let settings = SolveSettings::default();
    let start = Instant::now();
    let mut rows = 0;
    for seed in 0..50u64 {
        let n_couples = if seed == 0 { 30 } else { 1 + (seed as usize * 7) % 30 };
        let n_singles = if seed == 0 { 10 } else { (seed as usize * 3) % 11 };
        for model in [ModelKind::JointCustody, ModelKind::SoleCustody { binding: seed % 2 == 1 }] {
            let (m, _) = generate_stable_market(seed, n_couples, n_singles, model);
            for split in [SplitMode::Fixed5050, SplitMode::Endogenous] {
                let r = solve_stability_indices(&m, model, split, &settings).map_err(e2s)?;
                for o in &r.options {
                    check(
                        (o.index - 1.0).abs() <= 1e-6,
                        format!("seed {seed} {} {split:?}: s{} = {}", model.label(), o.option, o.index),
                    )?;
                }
                rows += r.options.len();
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("{rows} indices equal to 1 in {secs:.1}s"))
}

struct Spouse<'a> {
    id: &'a AgentId,
    option: ExitOption,
}

/// Highest own-row cost the inflated spouse can reach while the partner's
/// row still holds at full index, net of the inflated row's transfer term.
fn closed_form_headroom(m: &MarriageMarket, model: ModelKind, inflated: &Spouse, other: &Spouse) -> f64 {
    let hh = &m.households[0];
    let b = &hh.bundle;
    let agent = |id: &AgentId| m.agent(id).unwrap();
    let leisure = |id: &AgentId| {
        let a = agent(id);
        a.wage * if a.gender == Gender::Male { b.leisure_m } else { b.leisure_w }
    };
    let own_assign = |id: &AgentId| if agent(id).gender == Gender::Male { b.assign_m() } else { b.assign_w() };
    let (children_total, children_min) = match model {
        ModelKind::JointCustody => (2.0 * b.child_daily_k + hh.rho * b.child_big_k, b.child_daily_k),
        ModelKind::SoleCustody { .. } => (2.0 * b.child_total_c, b.child_total_c),
    };
    let total = leisure(inflated.id) + leisure(other.id) + b.q_priv + 2.0 * b.q_pub + children_total;
    let other_min = leisure(other.id) + own_assign(other.id) + b.q_pub + children_min;
    let t = |id: &AgentId| {
        let man = m.agents.iter().find(|a| a.gender == Gender::Male).unwrap();
        let tr = WEEKLY_HOURS * man.wage * m.settings.child_support.rate(man.n_children);
        match (model, agent(id).gender) {
            (ModelKind::SoleCustody { .. }, Gender::Female) => tr,
            (ModelKind::SoleCustody { binding: true }, Gender::Male) => -tr,
            _ => 0.0,
        }
    };
    let y_other = reference_income(m, &other.option).unwrap();
    total - (y_other + t(other.id)).max(other_min) - t(inflated.id)
}

// 2
fn analytic_perturbation() -> Outcome {
    let settings = SolveSettings::default();
    let cfg = OracleConfig {
        consideration: Consideration::Empty,
        ..Default::default()
    };
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        for model in MODELS {
            let (m, _) = generate_stable_market_with(100 + seed, 1, 0, model, &cfg);
            let man = m.agents.iter().find(|a| a.gender == Gender::Male).unwrap();
            let woman = m.agents.iter().find(|a| a.gender == Gender::Female).unwrap();
            let sm = Spouse {
                id: &man.id,
                option: ExitOption::male_single(&man.id),
            };
            let sw = Spouse {
                id: &woman.id,
                option: ExitOption::female_single(&woman.id),
            };
            let ym = reference_income(&m, &sm.option).unwrap();
            let yw = reference_income(&m, &sw.option).unwrap();
            let (inflated, other, y) = if ym >= yw { (&sm, &sw, ym) } else { (&sw, &sm, yw) };
            let headroom = closed_form_headroom(&m, model, inflated, other) / y;
            // the listed factors, plus one that overshoots the headroom by 25%
            for factor in [1.1, 1.25, 2.0, 1.25 * headroom] {
                let p = perturb_incomes(&m, &inflated.option, factor).map_err(e2s)?;
                let r = solve_stability_indices(&p, model, SplitMode::Fixed5050, &settings).map_err(e2s)?;
                let got = r.options.iter().find(|o| o.option == inflated.option).unwrap().index;
                let want = (headroom / factor).clamp(0.0, 1.0);
                worst = worst.max((got - want).abs());
                check(
                    (got - want).abs() <= 1e-6,
                    format!("seed {seed} {} factor {factor:.4}: s = {got}, closed form {want}", model.label()),
                )?;
                if factor == 1.25 * headroom {
                    check((got - 0.8).abs() <= 1e-6, format!("25% overshoot gave s = {got}"))?;
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases, max deviation {worst:.1e}"))
}

// 3
fn brute_force_agreement() -> Outcome {
    let settings = SolveSettings::default();
    let cfg = OracleConfig {
        consideration: Consideration::Everyone,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut both, mut neither, mut grid_miss, mut bad) = (0, 0, 0, Vec::new());
    for i in 0..200u64 {
        let model = MODELS[(i % 3) as usize];
        let n_couples = rng.gen_range(1..=2);
        let n_singles = rng.gen_range(0..=2);
        let (mut m, truth) = generate_stable_market_with(1000 + i, n_couples, n_singles, model, &cfg);
        for o in &truth.options {
            if rng.gen_bool(0.3) {
                let f = rng.gen_range(1.0..1.3);
                m = perturb_incomes(&m, &o.option, f).map_err(e2s)?;
            }
        }
        let (split, steps) = if i % 4 == 3 {
            (SplitMode::Endogenous, 7)
        } else {
            (SplitMode::Fixed5050, 11)
        };
        let lp = is_rationalizable(&m, model, split, &settings).map_err(e2s)?;
        let bf = brute_force_rationalizable(&m, model, split, steps).map_err(e2s)?;
        match (bf, lp) {
            (true, true) => both += 1,
            (false, false) => neither += 1,
            (false, true) => grid_miss += 1,
            (true, false) => bad.push(i),
        }
    }
    check(bad.is_empty(), format!("grid-feasible but LP-infeasible instances: {bad:?}"))?;
    Ok(format!(
        "200 instances: {both} feasible, {neither} infeasible, {grid_miss} missed by the grid"
    ))
}

fn collapse_children(m: &MarriageMarket) -> MarriageMarket {
    let mut out = m.clone();
    for h in &mut out.households {
        h.bundle.child_daily_k = h.bundle.child_total_c;
        h.bundle.child_big_k = 0.0;
    }
    out.settings.child_support = ChildSupportSchedule::zero();
    out
}

// 4
fn degeneracy() -> Outcome {
    let settings = SolveSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut below_full = 0;
    for seed in 0..20u64 {
        let (m, truth) = generate_stable_market(400 + seed, 4, 2, ModelKind::JointCustody);
        let mut p = m.clone();
        for o in &truth.options {
            if rng.gen_bool(0.25) {
                p = perturb_incomes(&p, &o.option, rng.gen_range(1.1..2.0)).map_err(e2s)?;
            }
        }
        let p = collapse_children(&p);
        let jc = solve_stability_indices(&p, ModelKind::JointCustody, SplitMode::Fixed5050, &settings).map_err(e2s)?;
        let spc = solve_stability_indices(&p, ModelKind::SoleCustody { binding: false }, SplitMode::Fixed5050, &settings)
            .map_err(e2s)?;
        check(
            (jc.total_index - spc.total_index).abs() <= 1e-6,
            format!("seed {seed}: JC {} vs SPC {}", jc.total_index, spc.total_index),
        )?;
        if jc.total_index < jc.options.len() as f64 - 1e-6 {
            below_full += 1;
        }
    }
    Ok(format!("20 seeds equal ({below_full} with binding indices)"))
}

// 5
fn nestedness_and_truth() -> Outcome {
    let settings = SolveSettings::default();
    let mut couples = 0;
    for seed in 0..20u64 {
        for model in MODELS {
            let (m, truth) = generate_stable_market(500 + seed, 5, 3, model);
            let r = solve_stability_indices(&m, model, SplitMode::Endogenous, &settings).map_err(e2s)?;
            let adjusted = adjust_incomes(&m, &r, &settings).map_err(e2s)?;
            let b = compute_bounds(&adjusted, model, BoundsOptions::default(), &settings).map_err(e2s)?;
            for (c, t) in b.couples.iter().zip(&truth.couples) {
                let tag = format!("seed {seed} {} {}", model.label(), c.household_id);
                check(c.household_id == t.household_id, format!("{tag}: order"))?;
                check(c.qw_share.is_subset_of(&c.naive_qw, 0.0), format!("{tag}: q share not nested"))?;
                check(c.sharing_rule.is_subset_of(&c.naive_sharing, 0.0), format!("{tag}: sharing rule not nested"))?;
                check(
                    c.qw_share.contains_strictly(t.qw_share),
                    format!("{tag}: true q share {} outside {:?}", t.qw_share, c.qw_share),
                )?;
                check(
                    c.sharing_rule.contains_strictly(t.sharing_rule),
                    format!("{tag}: true sharing rule {} outside {:?}", t.sharing_rule, c.sharing_rule),
                )?;
                couples += 1;
            }
        }
    }
    Ok(format!("{couples} couples nested with truth inside"))
}

// 6
fn ingest_fidelity() -> Outcome {
    let total = 1000.0;
    for (kind, shares) in [
        (HouseholdType::Couple, [170.0, 280.0, 370.0]),
        (HouseholdType::Single, [230.0, 370.0, 470.0]),
    ] {
        for (n, want) in (1u32..=3).zip(shares) {
            let got = impute_children_expenditure(kind, n, total).map_err(e2s)?;
            check(got == want, format!("{kind:?} with {n} children: {got} != {want}"))?;
        }
        check(impute_children_expenditure(kind, 0, total).map_err(e2s)? == 0.0, "childless household")?;
    }
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let agents = std::fs::read(dir.join("agents.csv")).map_err(e2s)?;
    let households = std::fs::read(dir.join("households.csv")).map_err(e2s)?;
    let doc = ingest(&agents[..], &households[..], &IngestConfig::default()).map_err(e2s)?;
    let mut n = 0;
    for m in &doc.markets {
        for a in &m.agents {
            check(a.leisure() == 112.0 - a.work_hours, format!("{} leisure", a.id))?;
            check(a.potential_labor_income() == 112.0 * a.wage, format!("{} potential income", a.id))?;
            let h = m.households.iter().find(|h| h.member_ids.contains(&a.id)).unwrap();
            let own = if a.gender == Gender::Male { h.bundle.leisure_m } else { h.bundle.leisure_w };
            check(own == 112.0 - a.work_hours, format!("{} bundle leisure", a.id))?;
            n += 1;
        }
        for h in &m.households {
            let kids = h.member_ids.iter().map(|id| m.agent(id).unwrap().n_children).max().unwrap();
            let kind = if h.member_ids.len() == 2 { HouseholdType::Couple } else { HouseholdType::Single };
            let table = match kind {
                HouseholdType::Couple => [0.0, 0.17, 0.28, 0.37],
                HouseholdType::Single => [0.0, 0.23, 0.37, 0.47],
            };
            let want = table[kids.min(3) as usize] * h.total_expenditure;
            check(
                h.bundle.child_total_c == want,
                format!("{}: children {} != {want}", h.household_id, h.bundle.child_total_c),
            )?;
        }
    }
    Ok(format!("share tables exact, {n} fixture agents exact"))
}

// 7
fn child_support_tiers() -> Outcome {
    let s = ChildSupportSchedule::default();
    let wage = 23.75;
    for (n, rate) in [(1, 0.25), (2, 0.33), (3, 0.5), (4, 0.5)] {
        let got = s.transfer(n, WEEKLY_HOURS * wage);
        let want = rate * (112.0 * wage);
        check(got == want, format!("{n} children: {got} != {want}"))?;
    }
    check(s.transfer(0, WEEKLY_HOURS * wage) == 0.0, "no children")?;
    Ok("1,2,3,4 children -> 25%, 33%, 50%, 50%".into())
}

// 8
fn monotonicity() -> Outcome {
    let settings = SolveSettings::default();
    let cfg = OracleConfig {
        consideration: Consideration::Everyone,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = ModelKind::JointCustody;
    // incomes are set for every pair, then the sets start out empty
    let (mut base, truth) = generate_stable_market_with(800, 5, 3, model, &cfg);
    for cs in &mut base.consideration {
        cs.options.clear();
    }
    let mut perturbed = base.clone();
    for o in &truth.options {
        if rng.gen_bool(0.4) {
            perturbed = perturb_incomes(&perturbed, &o.option, rng.gen_range(1.1..1.6)).map_err(e2s)?;
        }
    }
    let males: Vec<AgentId> = base.males().map(|a| a.id.clone()).collect();
    let females: Vec<AgentId> = base.females().map(|a| a.id.clone()).collect();
    let (mut stable, mut indexed) = (base, perturbed);
    // every new pair brings its own index, so compare the total shortfall
    let sum_of = |m: &MarriageMarket| {
        solve_stability_indices(m, model, SplitMode::Fixed5050, &settings)
            .map(|r| r.options.iter().map(|o| 1.0 - o.index).sum::<f64>())
    };
    let bounds_of = |m: &MarriageMarket| compute_bounds(m, model, BoundsOptions::default(), &settings);
    let mut prev_sum = sum_of(&indexed).map_err(e2s)?;
    let mut prev_bounds = bounds_of(&stable).map_err(e2s)?;
    let start_sum = prev_sum;
    let tol = 1e-7;
    for step in 0..20 {
        // add a few random cross pairs to both markets' consideration sets
        for _ in 0..2 {
            let m = &males[rng.gen_range(0..males.len())];
            let w = &females[rng.gen_range(0..females.len())];
            if stable.agent(m).unwrap().spouse_id.as_ref() == Some(w) {
                continue;
            }
            for market in [&mut stable, &mut indexed] {
                let cs = market.consideration.iter_mut().find(|c| &c.agent == m).unwrap();
                if !cs.options.contains(w) {
                    cs.options.push(w.clone());
                    cs.options.sort();
                }
            }
        }
        let sum = sum_of(&indexed).map_err(e2s)?;
        check(sum >= prev_sum - tol, format!("step {step}: shortfall fell {prev_sum} -> {sum}"))?;
        let b = bounds_of(&stable).map_err(e2s)?;
        for (new, old) in b.couples.iter().zip(&prev_bounds.couples) {
            check(
                new.qw_share.is_subset_of(&old.qw_share, tol) && new.sharing_rule.is_subset_of(&old.sharing_rule, tol),
                format!("step {step}: bounds of {} widened", new.household_id),
            )?;
        }
        prev_sum = sum;
        prev_bounds = b;
    }
    Ok(format!("20 steps, index shortfall {start_sum:.4} -> {prev_sum:.4}"))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_stablehh"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(e2s)?;
    check(
        out.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )?;
    Ok(())
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let agents = fixtures.join("agents.csv");
    let households = fixtures.join("households.csv");
    run_cli(
        dir,
        &["ingest", "--agents", agents.to_str().unwrap(), "--households", households.to_str().unwrap(), "--out", "ingested.json"],
    )?;
    run_cli(dir, &["synth", "--seed", "9", "--couples", "8", "--singles", "4", "--model", "spc", "--out", "synth.json", "--truth", "truth.json"])?;
    for market in ["ingested", "synth"] {
        let input = format!("{market}.json");
        let report = format!("{market}_stability.json");
        run_cli(
            dir,
            &["stability", "--model", "spc", "--split", "endogenous", "--market", &input, "--out", &report, "--csv", &format!("{market}_stability.csv"), "--jobs", "2"],
        )?;
        run_cli(
            dir,
            &["bounds", "--model", "spc", "--market", &input, "--report", &report, "--out", &format!("{market}_bounds.csv"), "--json", &format!("{market}_bounds.json"), "--emit-plot-data", &format!("{market}_plot.csv"), "--jobs", "2"],
        )?;
        run_cli(dir, &["report", "--stability", &report, "--bounds", &format!("{market}_bounds.csv"), "--out", &format!("{market}_report.txt")])?;
    }
    Ok(())
}

// 9
fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(e2s)?;
    let b = tempfile::tempdir().map_err(e2s)?;
    pipeline(a.path())?;
    pipeline(b.path())?;
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .map_err(e2s)?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for n in &names {
        let x = std::fs::read(a.path().join(n)).map_err(e2s)?;
        let y = std::fs::read(b.path().join(n)).map_err(e2s)?;
        check(x == y, format!("{n} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical", names.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle stability", oracle_stability),
        ("analytic perturbation", analytic_perturbation),
        ("brute-force agreement", brute_force_agreement),
        ("degeneracy", degeneracy),
        ("nestedness and truth containment", nestedness_and_truth),
        ("ingest fidelity", ingest_fidelity),
        ("child-support tiers", child_support_tiers),
        ("monotonicity", monotonicity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
