//! Arm-difference treatment effect estimates, the global Z test and the
//! one-step marginal consistency criterion.

use serde::Serialize;

use crate::data::{Arm, RegionPartition, TrialDataset};
use crate::error::{Error, Result};
use crate::num::std_normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AteEstimate {
    pub delta: f64,
    pub se: f64,
    pub n_treat: usize,
    pub n_control: usize,
}

#[derive(Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, y: f64) {
        self.n += 1;
        let d = y - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (y - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }
}

/// Difference in arm means over `indices` with the unpooled (Welch) standard
/// error √(s₁²/n₁ + s₀²/n₀).
pub fn estimate_ate(data: &TrialDataset, indices: &[usize]) -> Result<AteEstimate> {
    let y = data.outcomes();
    let t = data.treatments();
    let (mut treat, mut control) = (Moments::default(), Moments::default());
    for &i in indices {
        match t[i] {
            Arm::Treatment => treat.push(y[i]),
            Arm::Control => control.push(y[i]),
        }
    }
    if treat.n == 0 || control.n == 0 {
        return Err(Error::EmptyArm);
    }
    let se = (treat.variance() / treat.n as f64 + control.variance() / control.n as f64).sqrt();
    Ok(AteEstimate {
        delta: treat.mean - control.mean,
        se,
        n_treat: treat.n,
        n_control: control.n,
    })
}

/// Estimate over every subject in the dataset.
pub fn estimate_global_ate(data: &TrialDataset) -> Result<AteEstimate> {
    let all: Vec<usize> = (0..data.n()).collect();
    estimate_ate(data, &all)
}

/// (δ̂ + M)/ŝe(δ̂); M = 0 is the superiority statistic.
pub fn z_statistic(ate: &AteEstimate, margin: f64) -> Result<f64> {
    if ate.se == 0.0 {
        return Err(Error::ZeroStandardError);
    }
    Ok((ate.delta + margin) / ate.se)
}

pub fn global_z(data: &TrialDataset, margin: f64) -> Result<f64> {
    z_statistic(&estimate_global_ate(data)?, margin)
}

/// Upper-α critical value of the standard normal.
pub fn z_alpha(alpha: f64) -> Result<f64> {
    std_normal_quantile(1.0 - alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneStepResult {
    pub z: f64,
    pub z_alpha: f64,
    pub overall_significant: bool,
    pub delta: f64,
    pub delta_r: f64,
    pub delta_minus_r: f64,
    /// (δ̂_r + M)/(δ̂₋ᵣ + M); `None` when the trial is not significant or the
    /// shifted denominator is not positive.
    pub ratio: Option<f64>,
    #[serde(rename = "q")]
    pub threshold_q: f64,
    pub consistent: bool,
    pub margin: f64,
}

/// The three estimates every consistency criterion starts from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionalEstimates {
    pub global: AteEstimate,
    pub region: AteEstimate,
    pub complement: AteEstimate,
}

impl RegionalEstimates {
    pub fn compute(data: &TrialDataset, partition: &RegionPartition) -> Result<Self> {
        Ok(RegionalEstimates {
            global: estimate_global_ate(data)?,
            region: estimate_ate(data, &partition.in_region)?,
            complement: estimate_ate(data, &partition.complement)?,
        })
    }

    /// Shifted ratio, defined only for a positive shifted denominator.
    pub fn shifted_ratio(&self, margin: f64) -> Option<f64> {
        let den = self.complement.delta + margin;
        (den > 0.0).then(|| (self.region.delta + margin) / den)
    }

    pub fn one_step(&self, q: f64, alpha: f64, margin: f64) -> Result<OneStepResult> {
        check_q(q)?;
        let z = z_statistic(&self.global, margin)?;
        let za = z_alpha(alpha)?;
        let significant = z > za;
        let ratio = if significant { self.shifted_ratio(margin) } else { None };
        Ok(OneStepResult {
            z,
            z_alpha: za,
            overall_significant: significant,
            delta: self.global.delta,
            delta_r: self.region.delta,
            delta_minus_r: self.complement.delta,
            ratio,
            threshold_q: q,
            consistent: ratio.is_some_and(|r| r > q),
            margin,
        })
    }
}

fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q >= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("threshold q must be at least 0.5, got {q}")))
    }
}

/// One-step criterion: significant overall and (δ̂_r + M)/(δ̂₋ᵣ + M) > q.
pub fn one_step_assess(
    data: &TrialDataset,
    partition: &RegionPartition,
    q: f64,
    alpha: f64,
    margin: f64,
) -> Result<OneStepResult> {
    RegionalEstimates::compute(data, partition)?.one_step(q, alpha, margin)
}

/// Threshold on δ̂_r/δ̂ equivalent to δ̂_r/δ̂₋ᵣ > q under balanced allocation.
pub fn equivalent_global_threshold(q: f64, rho_r: f64) -> f64 {
    q / (1.0 - rho_r + q * rho_r)
}
