//! Discrete density ratios between a region and its complement, the
//! covariate-shift-adjusted regional effects δ̂*_{r,s}, and the step-2
//! max criterion.

use serde::{Deserialize, Serialize};

use crate::data::{RegionPartition, TrialDataset};
use crate::error::{Error, Result};
use crate::ite::IteProfile;

pub const LEVELS: usize = 3;

/// Default pseudo-count added to every level.
pub const DEFAULT_SMOOTHING: f64 = 0.5;

/// (countₗ + smoothing)/(n + 3·smoothing) for levels 0, 1, 2 of covariate `s`.
pub fn level_frequencies(
    data: &TrialDataset,
    indices: &[usize],
    s: usize,
    smoothing: f64,
) -> Result<[f64; LEVELS]> {
    if !data.is_discretized() {
        return Err(Error::NotDiscretized);
    }
    if indices.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    check_smoothing(smoothing)?;
    let mut counts = [0usize; LEVELS];
    for &i in indices {
        counts[data.level(s, i)] += 1;
    }
    Ok(frequencies(&counts, smoothing))
}

fn frequencies(counts: &[usize], smoothing: f64) -> [f64; LEVELS] {
    let n: usize = counts.iter().sum();
    let den = n as f64 + LEVELS as f64 * smoothing;
    let mut f = [0.0; LEVELS];
    for (fl, &c) in f.iter_mut().zip(counts) {
        *fl = (c as f64 + smoothing) / den;
    }
    f
}

fn check_smoothing(smoothing: f64) -> Result<()> {
    if smoothing.is_finite() && smoothing >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("smoothing must be non-negative, got {smoothing}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRatioTable {
    pub covariate_index: usize,
    pub freq_r: [f64; LEVELS],
    pub freq_minus_r: [f64; LEVELS],
    /// f̂₋ᵣ/f̂ᵣ per level; `None` where f̂ᵣ is zero.
    pub ratio: [Option<f64>; LEVELS],
    pub smoothing: f64,
}

pub fn density_ratio(
    data: &TrialDataset,
    partition: &RegionPartition,
    s: usize,
    smoothing: f64,
) -> Result<DensityRatioTable> {
    let freq_r = level_frequencies(data, &partition.in_region, s, smoothing)?;
    let freq_minus_r = level_frequencies(data, &partition.complement, s, smoothing)?;
    let mut ratio = [None; LEVELS];
    for l in 0..LEVELS {
        if freq_r[l] > 0.0 {
            ratio[l] = Some(freq_minus_r[l] / freq_r[l]);
        }
    }
    Ok(DensityRatioTable {
        covariate_index: s,
        freq_r,
        freq_minus_r,
        ratio,
        smoothing,
    })
}

/// δ̂*_{r,s}: mean over region r of ITE × density ratio at the subject's level.
pub fn adjusted_ate(
    data: &TrialDataset,
    ite: &IteProfile,
    partition: &RegionPartition,
    table: &DensityRatioTable,
) -> Result<f64> {
    let s = table.covariate_index;
    let mut sum = 0.0;
    for &i in &partition.in_region {
        let l = data.level(s, i);
        let w = table.ratio[l].ok_or(Error::UndefinedRatio { covariate: s, level: l })?;
        sum += ite.ite[i] * w;
    }
    Ok(sum / partition.n_r as f64)
}

/// Density ratio over the joint grid of 3ᵖ level combinations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointRatioTable {
    /// Indexed by Σ_s level_s·3ˢ.
    pub ratio: Vec<Option<f64>>,
    pub smoothing: f64,
}

fn joint_cell(data: &TrialDataset, i: usize) -> usize {
    (0..data.p()).rev().fold(0, |acc, s| acc * LEVELS + data.level(s, i))
}

pub fn joint_density_ratio(
    data: &TrialDataset,
    partition: &RegionPartition,
    smoothing: f64,
) -> Result<JointRatioTable> {
    if !data.is_discretized() {
        return Err(Error::NotDiscretized);
    }
    check_smoothing(smoothing)?;
    let p = u32::try_from(data.p()).map_err(|_| Error::InvalidArgument("too many covariates".into()))?;
    let cells = LEVELS
        .checked_pow(p)
        .filter(|&c| c <= 1 << 20)
        .ok_or_else(|| Error::InvalidArgument(format!("joint grid over {p} covariates is too large")))?;
    let tally = |idx: &[usize]| {
        let mut c = vec![0usize; cells];
        for &i in idx {
            c[joint_cell(data, i)] += 1;
        }
        c
    };
    let (cr, cm) = (tally(&partition.in_region), tally(&partition.complement));
    let den_r = partition.n_r as f64 + cells as f64 * smoothing;
    let den_m = partition.n_minus_r as f64 + cells as f64 * smoothing;
    let ratio = cr
        .iter()
        .zip(&cm)
        .map(|(&a, &b)| {
            let fr = (a as f64 + smoothing) / den_r;
            (fr > 0.0).then(|| ((b as f64 + smoothing) / den_m) / fr)
        })
        .collect();
    Ok(JointRatioTable { ratio, smoothing })
}

/// δ̂*_r under the joint-grid ratio.
pub fn adjusted_ate_joint(
    data: &TrialDataset,
    ite: &IteProfile,
    partition: &RegionPartition,
    table: &JointRatioTable,
) -> Result<f64> {
    let mut sum = 0.0;
    for &i in &partition.in_region {
        let c = joint_cell(data, i);
        let w = table.ratio[c].ok_or(Error::UndefinedRatio { covariate: usize::MAX, level: c })?;
        sum += ite.ite[i] * w;
    }
    Ok(sum / partition.n_r as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateAdjustment {
    pub s: usize,
    pub name: String,
    pub delta_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustedAte {
    pub per_covariate: Vec<CovariateAdjustment>,
    /// max_s (δ̂*_{r,s} + M)/(δ̂₋ᵣ + M); `None` when the denominator is not positive.
    pub max_ratio_over_delta_minus_r: Option<f64>,
    pub best_covariate: Option<usize>,
}

/// How the step-2 reweighting is formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMode {
    /// One δ̂*_{r,s} per covariate.
    #[default]
    PerCovariate,
    /// A single δ̂*_r under the joint 3ᵖ grid, reported as covariate 0.
    Joint,
}

/// Adjusted regional effects for every covariate, or the joint estimate.
pub fn adjust_region(
    data: &TrialDataset,
    ite: &IteProfile,
    partition: &RegionPartition,
    smoothing: f64,
    mode: RatioMode,
    delta_minus_r: f64,
    margin: f64,
) -> Result<AdjustedAte> {
    let per_covariate = match mode {
        RatioMode::PerCovariate => (0..data.p())
            .map(|s| {
                let table = density_ratio(data, partition, s, smoothing)?;
                Ok(CovariateAdjustment {
                    s,
                    name: data.covariate_names()[s].clone(),
                    delta_star: adjusted_ate(data, ite, partition, &table)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        RatioMode::Joint => {
            let table = joint_density_ratio(data, partition, smoothing)?;
            vec![CovariateAdjustment {
                s: 0,
                name: "joint".into(),
                delta_star: adjusted_ate_joint(data, ite, partition, &table)?,
            }]
        }
    };
    let ranking = rank_ratios(&per_covariate, delta_minus_r, margin);
    Ok(AdjustedAte {
        max_ratio_over_delta_minus_r: ranking.first().map(|r| r.ratio),
        best_covariate: ranking.first().map(|r| r.s),
        per_covariate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedRatio {
    pub s: usize,
    pub delta_star: f64,
    pub ratio: f64,
    /// 1 for the largest ratio.
    pub rank: usize,
}

/// Ratios (δ̂*_{r,s} + M)/(δ̂₋ᵣ + M) sorted descending; empty when the
/// denominator is not positive.
fn rank_ratios(per: &[CovariateAdjustment], delta_minus_r: f64, margin: f64) -> Vec<RankedRatio> {
    let den = delta_minus_r + margin;
    if !(den > 0.0) {
        return Vec::new();
    }
    let mut ranked: Vec<RankedRatio> = per
        .iter()
        .map(|a| RankedRatio {
            s: a.s,
            delta_star: a.delta_star,
            ratio: (a.delta_star + margin) / den,
            rank: 0,
        })
        .collect();
    ranked.sort_by(|a, b| b.ratio.total_cmp(&a.ratio).then(a.s.cmp(&b.s)));
    for (k, r) in ranked.iter_mut().enumerate() {
        r.rank = k + 1;
    }
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step2Decision {
    pub passed: bool,
    pub best_covariate: Option<usize>,
    pub ranking: Vec<RankedRatio>,
}

/// Passes when max_s (δ̂*_{r,s} + M)/(δ̂₋ᵣ + M) > q2 with a positive denominator.
pub fn step2_event(adjusted: &AdjustedAte, delta_minus_r: f64, q2: f64, margin: f64) -> Step2Decision {
    let ranking = rank_ratios(&adjusted.per_covariate, delta_minus_r, margin);
    let best = ranking.first();
    Step2Decision {
        passed: best.is_some_and(|r| r.ratio > q2),
        best_covariate: best.map(|r| r.s),
        ranking,
    }
}
