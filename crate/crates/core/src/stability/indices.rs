use serde::{Deserialize, Serialize};

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::lp::{scaled_residual, LpSolver, SimplexOptions, SimplexSolver, Status, CONTRACT_FEASIBILITY_TOL};
use crate::model::{AgentId, ExitOption, MarriageMarket, PriceIncomeGrid};

use super::program::{
    build_program, IndexMode, ModelKind, NonlaborMode, ProgramOptions, RowKind, SplitMode,
    StabilityProgram,
};

/// Solver configuration shared by the pipeline stages.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSettings {
    pub feasibility_tol: f64,
    pub presolve: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            feasibility_tol: CONTRACT_FEASIBILITY_TOL,
            presolve: true,
        }
    }
}

impl SolveSettings {
    /// Defaults, with `STABLEHH_TOL` overriding the feasibility tolerance.
    pub fn from_env() -> Result<Self> {
        let mut s = SolveSettings::default();
        if let Ok(v) = std::env::var("STABLEHH_TOL") {
            let tol: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("STABLEHH_TOL={v} is not a number")))?;
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidInput(format!("STABLEHH_TOL={v} must be positive")));
            }
            s.feasibility_tol = tol;
        }
        Ok(s)
    }

    pub fn solver(&self) -> SimplexSolver {
        SimplexSolver::new(SimplexOptions {
            feasibility_tol: self.feasibility_tol,
            presolve: self.presolve,
            ..Default::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionIndex {
    pub option: ExitOption,
    pub kind: RowKind,
    /// Stability index in `[0, 1]`.
    pub index: f64,
    /// Exit-option income at the solution.
    pub income: f64,
    /// Income removed to rationalize the option.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupleIndex {
    pub household_id: String,
    pub male: AgentId,
    pub female: AgentId,
    pub average_index: f64,
    pub minimum_index: f64,
    pub n_options: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub region: String,
    pub model: ModelKind,
    pub split: SplitMode,
    /// Sum of all indices; the model-level statistic.
    pub total_index: f64,
    /// Per-option indices come from one optimal vertex and need not be the
    /// only maximizer.
    pub indices_may_be_non_unique: bool,
    pub options: Vec<OptionIndex>,
    pub couples: Vec<CoupleIndex>,
    pub allocation: Allocation,
}

/// Mean and minimum of a couple's option indices; `(1, 1)` for no options.
pub fn summarize_indices(indices: &[f64]) -> (f64, f64) {
    if indices.is_empty() {
        return (1.0, 1.0);
    }
    let avg = indices.iter().sum::<f64>() / indices.len() as f64;
    let min = indices.iter().cloned().fold(f64::INFINITY, f64::min);
    (avg, min)
}

/// Per-couple average and minimum over both spouses' exit options.
pub fn summarize(report: &StabilityReport) -> Vec<CoupleIndex> {
    report
        .couples
        .iter()
        .map(|c| couple_summary(&report.options, &c.household_id, &c.male, &c.female))
        .collect()
}

fn couple_summary(options: &[OptionIndex], household: &str, m: &AgentId, w: &AgentId) -> CoupleIndex {
    let own: Vec<f64> = options
        .iter()
        .filter(|o| o.option.male.as_ref() == Some(m) || o.option.female.as_ref() == Some(w))
        .map(|o| o.index)
        .collect();
    let (average_index, minimum_index) = summarize_indices(&own);
    CoupleIndex {
        household_id: household.to_string(),
        male: m.clone(),
        female: w.clone(),
        average_index,
        minimum_index,
        n_options: own.len(),
    }
}

pub(crate) fn half_nonlabor(market: &MarriageMarket, prog: &StabilityProgram<f64>) -> Vec<f64> {
    prog.couples
        .iter()
        .map(|r| 0.5 * market.households[r.household].nonlabor_income)
        .collect()
}

pub(crate) fn household_ids(market: &MarriageMarket) -> Vec<String> {
    market.households.iter().map(|h| h.household_id.clone()).collect()
}

/// Maximizes the sum of stability indices (fixed splits) or minimizes the
/// normalized income loss (endogenous splits).
pub fn solve_stability_indices(
    market: &MarriageMarket,
    model: ModelKind,
    split: SplitMode,
    settings: &SolveSettings,
) -> Result<StabilityReport> {
    let indices = match split {
        SplitMode::Fixed5050 => IndexMode::Multiplicative,
        SplitMode::Endogenous => IndexMode::AdditiveLoss,
    };
    let prog = build_program::<f64>(market, ProgramOptions::new(model, split.into(), indices))?;
    let sol = settings.solver().solve(&prog.lp)?;
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => {
            return Err(Error::ModelError(format!(
                "market {} is not rationalizable even with every index at zero",
                market.region
            )))
        }
        Status::Unbounded => {
            return Err(Error::ModelError(format!("index program for {} is unbounded", market.region)))
        }
    }
    let x = &sol.values;
    let mut options = Vec::with_capacity(prog.options.len());
    for o in &prog.options {
        let v = o.index_var.map_or(1.0, |v| x[v.0]);
        let (index, income, loss) = match indices {
            IndexMode::Multiplicative => {
                let s = v.clamp(0.0, 1.0);
                let y = o.reference_income;
                (s, y, (1.0 - s) * y)
            }
            _ => {
                let l = v.max(0.0);
                let y = o.income_constant + o.income_vars.iter().map(|v| x[v.0]).sum::<f64>();
                let s = if y > 0.0 {
                    (1.0 - l / y).clamp(0.0, 1.0)
                } else if l <= settings.feasibility_tol {
                    1.0
                } else {
                    0.0
                };
                (s, y, l)
            }
        };
        options.push(OptionIndex {
            option: o.option.clone(),
            kind: o.kind,
            index,
            income,
            loss,
        });
    }
    let couples = prog
        .couples
        .iter()
        .map(|r| {
            couple_summary(
                &options,
                &market.households[r.household].household_id,
                &market.agents[r.male].id,
                &market.agents[r.female].id,
            )
        })
        .collect();
    let allocation = prog
        .vars
        .extract(x, &household_ids(market), &half_nonlabor(market, &prog));
    Ok(StabilityReport {
        region: market.region.clone(),
        model,
        split,
        total_index: options.iter().map(|o| o.index).sum(),
        indices_may_be_non_unique: true,
        options,
        couples,
        allocation,
    })
}

/// Lowers every exit-option income by the loss recorded in `report`.
pub fn adjust_grid(grid: &PriceIncomeGrid, report: &StabilityReport) -> Result<PriceIncomeGrid> {
    let mut out = grid.clone();
    for o in &report.options {
        let e = out
            .get_mut(&o.option)
            .ok_or_else(|| Error::InvalidInput(format!("report option {} not in grid", o.option)))?;
        if o.loss != 0.0 {
            e.income_deduction += o.loss;
        }
    }
    Ok(out)
}

/// Applies the report's income losses and verifies the adjusted market is
/// rationalizable at the recorded allocation.
pub fn adjust_incomes(
    market: &MarriageMarket,
    report: &StabilityReport,
    settings: &SolveSettings,
) -> Result<MarriageMarket> {
    if report.region != market.region {
        return Err(Error::InvalidInput(format!(
            "report for {} applied to market {}",
            report.region, market.region
        )));
    }
    let mut adjusted = market.clone();
    adjusted.grid = adjust_grid(&market.grid, report)?;
    let prog = build_program::<f64>(
        &adjusted,
        ProgramOptions::new(report.model, report.split.into(), IndexMode::None),
    )
    .map_err(|e| Error::AdjustmentError(e.to_string()))?;
    if prog.vars.couples.len() != report.allocation.couples.len() {
        return Err(Error::AdjustmentError("report allocation does not match market".into()));
    }
    let zeros = vec![0.0; prog.lp.num_variables()];
    let x = prog.vars.assemble(&report.allocation, &zeros);
    let (residual, row) = scaled_residual(&prog.lp, &x);
    if residual > settings.feasibility_tol {
        let name = row.map_or("bounds".to_string(), |r| prog.lp.constraints[r].name.clone());
        return Err(Error::AdjustmentError(format!(
            "adjusted market {} violates {name} by {residual:e}",
            market.region
        )));
    }
    Ok(adjusted)
}

/// Feasibility of the unindexed system.
pub fn is_rationalizable(
    market: &MarriageMarket,
    model: ModelKind,
    split: SplitMode,
    settings: &SolveSettings,
) -> Result<bool> {
    let nonlabor: NonlaborMode = split.into();
    let prog = build_program::<f64>(market, ProgramOptions::new(model, nonlabor, IndexMode::None))?;
    let sol = settings.solver().solve(&prog.lp)?;
    Ok(sol.status == Status::Optimal)
}
