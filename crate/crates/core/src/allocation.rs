//! Unknown intrahousehold quantities: LP handles and solved values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lp::VarId;
use crate::model::ExitOption;

/// LP columns for one matched couple. Children prices exist only under joint
/// custody; non-labour splits only when they are free; the sharing-rule
/// columns only in identification programs.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupleVars {
    pub household: usize,
    pub q_m: VarId,
    pub q_w: VarId,
    pub rho_m: Option<VarId>,
    pub rho_w: Option<VarId>,
    pub ynl_m: Option<VarId>,
    pub ynl_w: Option<VarId>,
    pub kappa_w: Option<VarId>,
    pub p_m_current: Option<VarId>,
    pub p_w_current: Option<VarId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairVars {
    pub p_m: VarId,
    pub p_w: VarId,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AllocationVariables {
    pub couples: Vec<CoupleVars>,
    pub pairs: BTreeMap<ExitOption, PairVars>,
    /// Stability index `s` or income loss `L` per exit option.
    pub index: BTreeMap<ExitOption, VarId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupleAllocation {
    pub household_id: String,
    pub q_m: f64,
    pub q_w: f64,
    pub rho_m: Option<f64>,
    pub rho_w: Option<f64>,
    pub ynl_m: f64,
    pub ynl_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAllocation {
    pub option: ExitOption,
    pub p_m: f64,
    pub p_w: f64,
}

/// Solved values of the unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Allocation {
    pub couples: Vec<CoupleAllocation>,
    pub pairs: Vec<PairAllocation>,
}

impl AllocationVariables {
    /// Reads the solved values. `half_nonlabor[i]` is used for couples whose
    /// non-labour split is pinned.
    pub fn extract(
        &self,
        values: &[f64],
        household_ids: &[String],
        half_nonlabor: &[f64],
    ) -> Allocation {
        let get = |v: VarId| values[v.0];
        let couples = self
            .couples
            .iter()
            .zip(half_nonlabor)
            .map(|(c, half)| CoupleAllocation {
                household_id: household_ids[c.household].clone(),
                q_m: get(c.q_m),
                q_w: get(c.q_w),
                rho_m: c.rho_m.map(get),
                rho_w: c.rho_w.map(get),
                ynl_m: c.ynl_m.map_or(*half, get),
                ynl_w: c.ynl_w.map_or(*half, get),
            })
            .collect();
        let pairs = self
            .pairs
            .iter()
            .map(|(o, p)| PairAllocation {
                option: o.clone(),
                p_m: get(p.p_m),
                p_w: get(p.p_w),
            })
            .collect();
        Allocation { couples, pairs }
    }

    /// Writes an allocation into a full candidate vector of length `n`;
    /// columns the allocation does not cover are taken from `fill`.
    pub fn assemble(&self, allocation: &Allocation, fill: &[f64]) -> Vec<f64> {
        let mut x = fill.to_vec();
        for (c, a) in self.couples.iter().zip(&allocation.couples) {
            x[c.q_m.0] = a.q_m;
            x[c.q_w.0] = a.q_w;
            if let (Some(v), Some(r)) = (c.rho_m, a.rho_m) {
                x[v.0] = r;
            }
            if let (Some(v), Some(r)) = (c.rho_w, a.rho_w) {
                x[v.0] = r;
            }
            if let Some(v) = c.ynl_m {
                x[v.0] = a.ynl_m;
            }
            if let Some(v) = c.ynl_w {
                x[v.0] = a.ynl_w;
            }
        }
        let by_option: BTreeMap<&ExitOption, &PairAllocation> =
            allocation.pairs.iter().map(|p| (&p.option, p)).collect();
        for (o, p) in &self.pairs {
            if let Some(a) = by_option.get(o) {
                x[p.p_m.0] = a.p_m;
                x[p.p_w.0] = a.p_w;
            }
        }
        x
    }
}

/// Targets of the adding-up identities for one couple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AddingUpTargets {
    pub q_priv: f64,
    pub rho: Option<f64>,
    pub nonlabor: f64,
}

impl Allocation {
    /// Largest absolute adding-up error over couples and pairs. Pair public
    /// prices are checked against `public_price(option)`.
    pub fn adding_up_residual(
        &self,
        targets: &[AddingUpTargets],
        public_price: impl Fn(&ExitOption) -> f64,
    ) -> f64 {
        let mut worst = 0.0f64;
        for (a, t) in self.couples.iter().zip(targets) {
            worst = worst.max((a.q_m + a.q_w - t.q_priv).abs());
            if let (Some(rm), Some(rw), Some(r)) = (a.rho_m, a.rho_w, t.rho) {
                worst = worst.max((rm + rw - r).abs());
            }
            worst = worst.max((a.ynl_m + a.ynl_w - t.nonlabor).abs());
        }
        for p in &self.pairs {
            worst = worst.max((p.p_m + p.p_w - public_price(&p.option)).abs());
        }
        worst
    }
}
