//! The Mann-Whitney count and the two-stage decision procedure.
//!
//! All statistics here are exact integers; no floating point enters the
//! counting path. Ties between a control and a treated value are rejected
//! outright because every downstream formula assumes continuity.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The four sample sizes of a two-stage design: stage 1 observes `m` controls
/// and `n` treated, the full trial observes `M` controls and `N` treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleDesign {
    pub m: u64,
    pub n: u64,
    #[serde(rename = "M")]
    pub total_m: u64,
    #[serde(rename = "N")]
    pub total_n: u64,
}

impl SampleDesign {
    pub fn new(m: u64, n: u64, total_m: u64, total_n: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidDesign(format!(
                "stage-1 sizes must be positive, got m={m}, n={n}"
            )));
        }
        if m > total_m || n > total_n {
            return Err(Error::InvalidDesign(format!(
                "stage-1 sizes must not exceed totals: m={m} > M={total_m} or n={n} > N={total_n}"
            )));
        }
        Ok(SampleDesign { m, n, total_m, total_n })
    }

    /// Maximum value of the stage-1 statistic, m*n.
    pub fn u1_max(&self) -> u64 {
        self.m * self.n
    }

    /// Maximum value of the full statistic, M*N.
    pub fn u2_max(&self) -> u64 {
        self.total_m * self.total_n
    }

    /// Design with stages swapped in role (M, N as stage-1 of itself).
    pub fn single_stage(total_m: u64, total_n: u64) -> Result<Self> {
        Self::new(total_m, total_n, total_m, total_n)
    }
}

/// Raw observations of a two-stage trial, grouped by arm and stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageData {
    pub x_stage1: Vec<f64>,
    pub y_stage1: Vec<f64>,
    pub x_stage2: Vec<f64>,
    pub y_stage2: Vec<f64>,
}

impl TwoStageData {
    /// Validates stage-1 nonemptiness and the continuity assumption across
    /// the pooled samples.
    pub fn new(
        x_stage1: Vec<f64>,
        y_stage1: Vec<f64>,
        x_stage2: Vec<f64>,
        y_stage2: Vec<f64>,
    ) -> Result<Self> {
        let data = TwoStageData { x_stage1, y_stage1, x_stage2, y_stage2 };
        let d = data.design()?;
        debug_assert!(d.m >= 1 && d.n >= 1);
        for x in data.x_stage1.iter().chain(&data.x_stage2) {
            for y in data.y_stage1.iter().chain(&data.y_stage2) {
                if x == y {
                    return Err(Error::Tie);
                }
            }
        }
        Ok(data)
    }

    /// The design implied by the sample lengths.
    pub fn design(&self) -> Result<SampleDesign> {
        SampleDesign::new(
            self.x_stage1.len() as u64,
            self.y_stage1.len() as u64,
            (self.x_stage1.len() + self.x_stage2.len()) as u64,
            (self.y_stage1.len() + self.y_stage2.len()) as u64,
        )
    }
}

/// Outcome of the two-stage procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    RejectAtStage1,
    RejectAtStage2,
    FailToReject,
}

/// Decision record: the observed statistics alongside the outcome. `u2` is
/// absent exactly when the trial stopped at stage 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub u1: u64,
    pub u2: Option<u64>,
}

/// Count of pairs (i, j) with `xs[i] < ys[j]`.
///
/// Errors with [`Error::Tie`] if any `xs[i] == ys[j]`: the indicator is
/// strict and tie-free data is a precondition of the whole model.
pub fn mann_whitney_u(xs: &[f64], ys: &[f64]) -> Result<u64> {
    let mut count = 0u64;
    for x in xs {
        for y in ys {
            if x == y {
                return Err(Error::Tie);
            }
            if x < y {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// (U1, U2): the stage-1 count and the pooled count.
pub fn two_stage_statistics(data: &TwoStageData) -> Result<(u64, u64)> {
    let u1 = mann_whitney_u(&data.x_stage1, &data.y_stage1)?;
    let xs: Vec<f64> = data.x_stage1.iter().chain(&data.x_stage2).copied().collect();
    let ys: Vec<f64> = data.y_stage1.iter().chain(&data.y_stage2).copied().collect();
    let u2 = mann_whitney_u(&xs, &ys)?;
    Ok((u1, u2))
}

/// Runs the decision rule. The stage-2 statistic is pulled from `u2_supplier`
/// only when stage 1 fails to reject, modelling genuine early stopping.
pub fn two_stage_decision<E, F>(u1: u64, u2_supplier: F, c1: u64, c2: u64) -> std::result::Result<Decision, E>
where
    F: FnOnce() -> std::result::Result<u64, E>,
{
    if u1 >= c1 {
        return Ok(Decision { outcome: Outcome::RejectAtStage1, u1, u2: None });
    }
    let u2 = u2_supplier()?;
    let outcome = if u2 >= c2 { Outcome::RejectAtStage2 } else { Outcome::FailToReject };
    Ok(Decision { outcome, u1, u2: Some(u2) })
}
