//! Transformed-outcome individual treatment effects, the leave-one-out
//! potential-outcome regression for m̂, and the regional interaction model
//! whose Wald test checks whether conditional effects differ by region.

use serde::{Deserialize, Serialize};

use crate::data::{Arm, RegionPartition, TrialDataset};
use crate::error::{Error, Result};
use crate::num::{
    chi_square_sf, loo_prediction, ols_fit_pruned, spd_inverse, unit_leverage_indices, Matrix,
    OlsFit,
};

/// How covariates enter the regression designs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateCoding {
    /// Indicators for levels 1 and 2 of each three-level covariate.
    #[default]
    OneHot,
    /// Covariate values as given.
    Raw,
}

/// Which covariance estimate feeds the Wald statistic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaldCovariance {
    #[default]
    Ols,
    /// HC0 heteroskedasticity-consistent sandwich.
    Sandwich,
}

/// Which terms the per-arm outcome regressions behind m̂ include.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MhatDesign {
    /// Intercept, main effects, region indicator and region interactions.
    #[default]
    RegionInteractions,
    /// Intercept, main effects and region indicator.
    RegionIndicator,
    /// Intercept and main effects.
    Additive,
}

/// Column layout shared by the m̂ regressions and the interaction model:
/// `[1, main effects, I(R=r), main effects × I(R=r)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignLayout {
    pub coding: CovariateCoding,
    /// Number of main-effect columns.
    pub width_x: usize,
}

impl DesignLayout {
    pub fn new(data: &TrialDataset, coding: CovariateCoding) -> Result<Self> {
        let width_x = match coding {
            CovariateCoding::OneHot => {
                if !data.is_discretized() {
                    return Err(Error::NotDiscretized);
                }
                2 * data.p()
            }
            CovariateCoding::Raw => data.p(),
        };
        Ok(DesignLayout { coding, width_x })
    }

    pub fn ncols(&self) -> usize {
        2 * self.width_x + 2
    }

    pub fn region_column(&self) -> usize {
        self.width_x + 1
    }

    pub fn interaction_columns(&self) -> std::ops::Range<usize> {
        self.width_x + 2..self.ncols()
    }

    fn fill_row(&self, data: &TrialDataset, i: usize, in_region: bool, row: &mut [f64]) {
        row.fill(0.0);
        row[0] = 1.0;
        let ind = if in_region { 1.0 } else { 0.0 };
        row[self.region_column()] = ind;
        let off = self.width_x + 2;
        match self.coding {
            CovariateCoding::OneHot => {
                for s in 0..data.p() {
                    let lv = data.level(s, i);
                    if lv > 0 {
                        let c = 2 * s + lv - 1;
                        row[1 + c] = 1.0;
                        row[off + c] = ind;
                    }
                }
            }
            CovariateCoding::Raw => {
                for s in 0..data.p() {
                    let v = data.covariate(s)[i];
                    row[1 + s] = v;
                    row[off + s] = v * ind;
                }
            }
        }
    }

    /// Full design over all subjects.
    pub fn build(&self, data: &TrialDataset, partition: &RegionPartition) -> Matrix {
        let n = data.n();
        let k = self.ncols();
        let mut m = Matrix::zeros(n, k);
        let mut row = vec![0.0; k];
        for i in 0..n {
            self.fill_row(data, i, partition.is_member[i], &mut row);
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    /// Design columns used by the m̂ regressions.
    pub fn mhat_columns(&self, design: MhatDesign) -> Vec<usize> {
        match design {
            MhatDesign::RegionInteractions => (0..self.ncols()).collect(),
            MhatDesign::RegionIndicator => (0..=self.region_column()).collect(),
            MhatDesign::Additive => (0..=self.width_x).collect(),
        }
    }

    pub fn term_names(&self, data: &TrialDataset) -> Vec<String> {
        let mut main = Vec::with_capacity(self.width_x);
        for name in data.covariate_names() {
            match self.coding {
                CovariateCoding::OneHot => {
                    main.push(format!("{name}=1"));
                    main.push(format!("{name}=2"));
                }
                CovariateCoding::Raw => main.push(name.clone()),
            }
        }
        let mut names = vec!["intercept".to_string()];
        names.extend(main.iter().cloned());
        names.push("region".into());
        names.extend(main.iter().map(|m| format!("region:{m}")));
        names
    }
}

/// (t/π_t)(y − m̂).
#[inline]
pub fn transformed_outcome(y: f64, t: Arm, mhat: f64, pi1: f64) -> f64 {
    match t {
        Arm::Treatment => (y - mhat) / pi1,
        Arm::Control => -(y - mhat) / (1.0 - pi1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IteProfile {
    pub mhat: Vec<f64>,
    pub ite: Vec<f64>,
    pub pi1: f64,
}

impl IteProfile {
    pub fn from_mhat(data: &TrialDataset, mhat: Vec<f64>) -> Result<Self> {
        if mhat.len() != data.n() {
            return Err(Error::InvalidArgument(format!(
                "{} fitted values for {} subjects",
                mhat.len(),
                data.n()
            )));
        }
        let pi1 = data.pi1();
        let ite = data
            .outcomes()
            .iter()
            .zip(data.treatments())
            .zip(&mhat)
            .map(|((&y, &t), &m)| transformed_outcome(y, t, m, pi1))
            .collect();
        Ok(IteProfile { mhat, ite, pi1 })
    }

    /// Mean ITE over a set of subjects.
    pub fn mean_over(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.ite[i]).sum::<f64>() / indices.len() as f64
    }
}

/// Per-arm outcome predictions: leave-one-out for the arm's own members,
/// full-fit for everyone else.
fn arm_predictions(design: &Matrix, y: &[f64], members: &[usize]) -> Result<Vec<f64>> {
    let n = design.nrows();
    let x_arm = design.select_rows(members);
    let y_arm: Vec<f64> = members.iter().map(|&i| y[i]).collect();
    let fit = ols_fit_pruned(&x_arm, &y_arm)?;
    if !fit.dropped.is_empty() {
        log::debug!("arm regression dropped dependent columns {:?}", fit.dropped);
    }
    let mut out = vec![0.0; n];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = fit.predict(&design.row(i));
    }
    let unit = unit_leverage_indices(&fit);
    let loo = if unit.is_empty() {
        loo_prediction(&fit, &y_arm)?
    } else {
        loo_with_refits(&fit, &x_arm, &y_arm, &unit)?
    };
    for (pos, &i) in members.iter().enumerate() {
        out[i] = loo[pos];
    }
    Ok(out)
}

/// Leave-one-out predictions where some observations sit at unit leverage;
/// those are refitted explicitly with column pruning.
fn loo_with_refits(fit: &OlsFit, x: &Matrix, y: &[f64], unit: &[usize]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(y.len());
    for (i, ((&f, &h), &yi)) in fit.fitted.iter().zip(&fit.hat_diagonals).zip(y).enumerate() {
        if unit.binary_search(&i).is_ok() {
            let keep: Vec<usize> = (0..y.len()).filter(|&j| j != i).collect();
            let sub_y: Vec<f64> = keep.iter().map(|&j| y[j]).collect();
            let refit = ols_fit_pruned(&x.select_rows(&keep), &sub_y)?;
            log::debug!("observation {i} has unit leverage; refitted without it");
            out.push(refit.predict(&x.row(i)));
        } else {
            out.push(f - h * (yi - f) / (1.0 - h));
        }
    }
    Ok(out)
}

/// m̂ᵢ = π₋₁·μ̂₁⁽⁻ⁱ⁾(xᵢ) + π₁·μ̂₋₁⁽⁻ⁱ⁾(xᵢ) from per-arm linear regressions.
pub fn loop_mhat(data: &TrialDataset, partition: &RegionPartition) -> Result<Vec<f64>> {
    loop_mhat_design(data, partition, MhatDesign::default())
}

pub fn loop_mhat_design(
    data: &TrialDataset,
    partition: &RegionPartition,
    design: MhatDesign,
) -> Result<Vec<f64>> {
    let layout = DesignLayout::new(data, CovariateCoding::OneHot)?;
    let full = layout.build(data, partition);
    match design {
        MhatDesign::RegionInteractions => loop_mhat_with(data, &full),
        _ => loop_mhat_with(data, &full.select_columns(&layout.mhat_columns(design))),
    }
}

/// [`loop_mhat`] on a prebuilt design.
pub fn loop_mhat_with(data: &TrialDataset, design: &Matrix) -> Result<Vec<f64>> {
    let (mut treated, mut control) = (Vec::new(), Vec::new());
    for (i, t) in data.treatments().iter().enumerate() {
        match t {
            Arm::Treatment => treated.push(i),
            Arm::Control => control.push(i),
        }
    }
    if treated.is_empty() || control.is_empty() {
        return Err(Error::EmptyArm);
    }
    let y = data.outcomes();
    let mu1 = arm_predictions(design, y, &treated)?;
    let mu0 = arm_predictions(design, y, &control)?;
    let pi1 = data.pi1();
    Ok(mu1
        .iter()
        .zip(&mu0)
        .map(|(a, b)| (1.0 - pi1) * a + pi1 * b)
        .collect())
}

pub fn ite_profile(data: &TrialDataset, partition: &RegionPartition) -> Result<IteProfile> {
    IteProfile::from_mhat(data, loop_mhat(data, partition)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkingModelOptions {
    pub coding: CovariateCoding,
    pub covariance: WaldCovariance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkingModelFit {
    pub beta0: f64,
    /// Main effects, zero where a column was dropped.
    pub beta_x: Vec<f64>,
    pub beta_r: f64,
    /// Interaction coefficients that survived column pruning.
    pub beta_rx: Vec<f64>,
    /// Names of the terms in `beta_rx`.
    pub rx_terms: Vec<String>,
    pub cov_rx: Vec<Vec<f64>>,
    pub wald_stat: f64,
    pub df: usize,
    pub p_value: f64,
    pub dropped_terms: Vec<String>,
}

/// OLS of the ITEs on the regional interaction design with a Wald test of
/// the interaction block.
pub fn fit_working_model(
    data: &TrialDataset,
    partition: &RegionPartition,
    ite: &IteProfile,
    options: WorkingModelOptions,
) -> Result<WorkingModelFit> {
    let layout = DesignLayout::new(data, options.coding)?;
    let design = layout.build(data, partition);
    fit_working_model_with(data, &layout, &design, ite, options.covariance)
}

/// [`fit_working_model`] on a prebuilt design.
pub fn fit_working_model_with(
    data: &TrialDataset,
    layout: &DesignLayout,
    design: &Matrix,
    ite: &IteProfile,
    covariance: WaldCovariance,
) -> Result<WorkingModelFit> {
    if ite.ite.len() != design.nrows() {
        return Err(Error::InvalidArgument("ITE length differs from design rows".into()));
    }
    let fit = ols_fit_pruned(design, &ite.ite)?;
    let names = layout.term_names(data);
    let cov = match covariance {
        WaldCovariance::Ols => fit.covariance.clone(),
        WaldCovariance::Sandwich => fit.sandwich_covariance(&ite.ite),
    };
    let rx_range = layout.interaction_columns();
    let rx_pos: Vec<usize> = fit
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| rx_range.contains(c))
        .map(|(pos, _)| pos)
        .collect();
    let df = rx_pos.len();
    if df == 0 {
        return Err(Error::DegenerateWald("every interaction column was dropped".into()));
    }
    let beta_rx: Vec<f64> = rx_pos.iter().map(|&p| fit.coefficients[p]).collect();
    let block = cov.select_rows(&rx_pos).select_columns(&rx_pos);
    let inv = spd_inverse(&block)?;
    let mut wald = 0.0;
    for a in 0..df {
        for b in 0..df {
            wald += beta_rx[a] * inv.get(a, b) * beta_rx[b];
        }
    }
    if !wald.is_finite() || wald < 0.0 {
        return Err(Error::DegenerateWald(format!("statistic {wald}")));
    }
    let p_value = chi_square_sf(wald, df)?;

    let coef_of = |col: usize| {
        fit.columns
            .iter()
            .position(|&c| c == col)
            .map_or(0.0, |p| fit.coefficients[p])
    };
    Ok(WorkingModelFit {
        beta0: coef_of(0),
        beta_x: (1..=layout.width_x).map(coef_of).collect(),
        beta_r: coef_of(layout.region_column()),
        rx_terms: rx_pos.iter().map(|&p| names[fit.columns[p]].clone()).collect(),
        beta_rx,
        cov_rx: (0..df).map(|a| (0..df).map(|b| block.get(a, b)).collect()).collect(),
        wald_stat: wald,
        df,
        p_value,
        dropped_terms: fit.dropped.iter().map(|&c| names[c].clone()).collect(),
    })
}

/// True when H₀: β_RX = 0 is rejected, i.e. p < α.
pub fn cate_similarity_test(fit: &WorkingModelFit, alpha: f64) -> bool {
    fit.p_value < alpha
}
