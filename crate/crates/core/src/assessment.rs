//! The two-step regional consistency assessment: marginal ratio check,
//! CATE-similarity gate, and density-ratio-adjusted rescue.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ate::{OneStepResult, RegionalEstimates};
use crate::data::{
    discretize_covariates_with, partition_by_region, QuantileScope, RegionPartition, TrialDataset,
};
use crate::error::{Error, Result, Stage, StageExt};
use crate::ite::{
    cate_similarity_test, fit_working_model_with, loop_mhat_with, CovariateCoding, DesignLayout,
    IteProfile, MhatDesign, WaldCovariance, WorkingModelFit,
};
use crate::shift::{adjust_region, step2_event, AdjustedAte, RankedRatio, RatioMode, DEFAULT_SMOOTHING};
use crate::survival::{to_pseudo_dataset_with, PseudoScope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssessmentConfig {
    pub region: String,
    pub q1: f64,
    pub q2: f64,
    /// One-sided level of the overall test.
    pub alpha: f64,
    /// Level of the CATE-similarity test.
    pub alpha_interaction: f64,
    pub margin: f64,
    pub smoothing: f64,
    pub coding: CovariateCoding,
    pub covariance: WaldCovariance,
    pub mhat_design: MhatDesign,
    pub ratio_mode: RatioMode,
    pub quantile_scope: QuantileScope,
    pub pseudo_scope: PseudoScope,
}

impl Default for AssessmentConfig {
    fn default() -> Self {
        AssessmentConfig {
            region: "r".into(),
            q1: 0.9,
            q2: 0.5,
            alpha: 0.025,
            alpha_interaction: 0.05,
            margin: 0.0,
            smoothing: DEFAULT_SMOOTHING,
            coding: CovariateCoding::OneHot,
            covariance: WaldCovariance::Ols,
            mhat_design: MhatDesign::default(),
            ratio_mode: RatioMode::PerCovariate,
            quantile_scope: QuantileScope::Pooled,
            pseudo_scope: PseudoScope::PerArm,
        }
    }
}

impl AssessmentConfig {
    pub fn for_region(region: impl Into<String>) -> Self {
        AssessmentConfig {
            region: region.into(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, q) in [("q1", self.q1), ("q2", self.q2)] {
            if !(q.is_finite() && q >= 0.5) {
                return Err(Error::InvalidArgument(format!("{name} must be at least 0.5, got {q}")));
            }
        }
        for (name, a) in [("alpha", self.alpha), ("alpha_interaction", self.alpha_interaction)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {a}")));
            }
        }
        if !self.margin.is_finite() {
            return Err(Error::NonFinite("margin"));
        }
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "smoothing must be non-negative, got {}",
                self.smoothing
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Consistency,
    Inconsistency,
    NotSignificant,
}

/// Branch of the algorithm that produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionStage {
    OverallTest,
    Step1,
    InteractionReject,
    Step2Pass,
    Step2Fail,
}

impl DecisionStage {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionStage::OverallTest => "overall_test",
            DecisionStage::Step1 => "step1",
            DecisionStage::InteractionReject => "interaction_reject",
            DecisionStage::Step2Pass => "step2_pass",
            DecisionStage::Step2Fail => "step2_fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub stage: &'static str,
    pub message: String,
    pub warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step2Summary {
    pub adjusted: AdjustedAte,
    pub q2: f64,
    pub passed: bool,
    pub ranking: Vec<RankedRatio>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssessmentReport {
    pub region: String,
    pub verdict: Verdict,
    pub stage: DecisionStage,
    pub one_step: OneStepResult,
    pub interaction: Option<WorkingModelFit>,
    pub interaction_rejected: Option<bool>,
    pub adjusted: Option<Step2Summary>,
    pub trace: Vec<TraceEntry>,
    pub notes: Vec<String>,
}

/// Data made ready for assessment: pseudo-observations for survival
/// outcomes, discretized covariates and the regional partition.
#[derive(Debug, Clone)]
pub struct PreparedTrial {
    pub data: TrialDataset,
    /// Covariates before discretization, kept for the raw-coding working model.
    pub raw: Option<TrialDataset>,
    pub partition: RegionPartition,
    pub estimates: RegionalEstimates,
}

impl PreparedTrial {
    pub fn new(data: &TrialDataset, config: &AssessmentConfig) -> Result<Self> {
        Self::build(data, config, true)
    }

    fn build(data: &TrialDataset, config: &AssessmentConfig, discretize: bool) -> Result<Self> {
        config.validate()?;
        let mut data = if data.endpoint().is_survival() {
            to_pseudo_dataset_with(data, config.pseudo_scope).at(Stage::Pseudo)?
        } else {
            data.clone()
        };
        let mut raw = None;
        if discretize && !data.is_discretized() {
            let cut = discretize_covariates_with(&data, config.quantile_scope).at(Stage::Discretize)?;
            if config.coding == CovariateCoding::Raw {
                raw = Some(data);
            }
            data = cut;
        }
        let partition = partition_by_region(&data, &config.region).at(Stage::Partition)?;
        let estimates = RegionalEstimates::compute(&data, &partition).at(Stage::Step1)?;
        Ok(PreparedTrial { data, raw, partition, estimates })
    }

    pub fn one_step(&self, q: f64, config: &AssessmentConfig) -> Result<OneStepResult> {
        self.estimates.one_step(q, config.alpha, config.margin).at(Stage::Step1)
    }

    pub fn ite_profile(&self, config: &AssessmentConfig) -> Result<IteProfile> {
        let layout = DesignLayout::new(&self.data, CovariateCoding::OneHot).at(Stage::Interaction)?;
        let full = layout.build(&self.data, &self.partition);
        let mhat = match config.mhat_design {
            MhatDesign::RegionInteractions => loop_mhat_with(&self.data, &full),
            d => loop_mhat_with(&self.data, &full.select_columns(&layout.mhat_columns(d))),
        }
        .at(Stage::Interaction)?;
        IteProfile::from_mhat(&self.data, mhat).at(Stage::Interaction)
    }

    /// Working-model fit, or the reason it could not be computed.
    pub fn working_model(
        &self,
        ite: &IteProfile,
        config: &AssessmentConfig,
    ) -> std::result::Result<WorkingModelFit, Error> {
        let source = match config.coding {
            CovariateCoding::Raw => self.raw.as_ref().unwrap_or(&self.data),
            CovariateCoding::OneHot => &self.data,
        };
        let layout = DesignLayout::new(source, config.coding)?;
        let design = layout.build(source, &self.partition);
        fit_working_model_with(source, &layout, &design, ite, config.covariance)
    }

    pub fn adjusted(&self, ite: &IteProfile, config: &AssessmentConfig) -> Result<AdjustedAte> {
        adjust_region(
            &self.data,
            ite,
            &self.partition,
            config.smoothing,
            config.ratio_mode,
            self.estimates.complement.delta,
            config.margin,
        )
        .at(Stage::Step2)
    }
}

/// Whether a working-model failure means "cannot be computed" rather than
/// a broken input.
fn wald_incomputable(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateWald(_)
            | Error::RankDeficient { .. }
            | Error::TooFewObservations { .. }
            | Error::NonFinite(_)
    )
}

fn trace(entries: &mut Vec<TraceEntry>, stage: &'static str, message: String) {
    entries.push(TraceEntry { stage, message, warning: false });
}

/// Full two-step assessment.
pub fn two_step_assess(data: &TrialDataset, config: &AssessmentConfig) -> Result<AssessmentReport> {
    let prepared = PreparedTrial::new(data, config)?;
    assess_prepared(&prepared, config)
}

pub fn assess_prepared(prepared: &PreparedTrial, config: &AssessmentConfig) -> Result<AssessmentReport> {
    let one = prepared.one_step(config.q1, config)?;
    let mut report = AssessmentReport {
        region: config.region.clone(),
        verdict: Verdict::NotSignificant,
        stage: DecisionStage::OverallTest,
        one_step: one,
        interaction: None,
        interaction_rejected: None,
        adjusted: None,
        trace: Vec::new(),
        notes: prepared.data.notes().to_vec(),
    };
    let t = &mut report.trace;
    trace(t, "overall_test", format!("Z = {:.4} vs z_alpha = {:.4}", one.z, one.z_alpha));
    if !one.overall_significant {
        trace(t, "overall_test", "not significant; no consistency assessment".into());
        return Ok(report);
    }
    match one.ratio {
        Some(r) => trace(t, "step1", format!("ratio = {r:.4} vs q1 = {}", config.q1)),
        None => trace(t, "step1", "complement effect not positive; ratio undefined".into()),
    }
    if one.consistent {
        report.verdict = Verdict::Consistency;
        report.stage = DecisionStage::Step1;
        return Ok(report);
    }

    let ite = prepared.ite_profile(config)?;
    match prepared.working_model(&ite, config) {
        Ok(fit) => {
            let reject = cate_similarity_test(&fit, config.alpha_interaction);
            trace(
                t,
                "interaction",
                format!(
                    "Wald = {:.4} on {} df, p = {:.4} vs alpha = {}",
                    fit.wald_stat, fit.df, fit.p_value, config.alpha_interaction
                ),
            );
            report.interaction = Some(fit);
            report.interaction_rejected = Some(reject);
            if reject {
                report.verdict = Verdict::Inconsistency;
                report.stage = DecisionStage::InteractionReject;
                return Ok(report);
            }
        }
        Err(e) if wald_incomputable(&e) => {
            t.push(TraceEntry {
                stage: "interaction",
                message: format!("interaction test not computable ({e}); proceeding to step 2"),
                warning: true,
            });
            log::warn!("interaction test not computable: {e}");
        }
        Err(e) => return Err(e.at(Stage::Interaction)),
    }

    let adjusted = prepared.adjusted(&ite, config)?;
    let decision = step2_event(&adjusted, prepared.estimates.complement.delta, config.q2, config.margin);
    match decision.ranking.first() {
        Some(best) => trace(
            t,
            "step2",
            format!("max adjusted ratio = {:.4} (covariate {}) vs q2 = {}", best.ratio, best.s, config.q2),
        ),
        None => trace(t, "step2", "complement effect not positive; adjusted ratios undefined".into()),
    }
    report.verdict = if decision.passed { Verdict::Consistency } else { Verdict::Inconsistency };
    report.stage = if decision.passed { DecisionStage::Step2Pass } else { DecisionStage::Step2Fail };
    report.adjusted = Some(Step2Summary {
        adjusted,
        q2: config.q2,
        passed: decision.passed,
        ranking: decision.ranking,
    });
    Ok(report)
}

/// The marginal criterion alone at q = `config.q1`.
pub fn one_step_only(data: &TrialDataset, config: &AssessmentConfig) -> Result<AssessmentReport> {
    let prepared = PreparedTrial::build(data, config, false)?;
    let one = prepared.one_step(config.q1, config)?;
    let (verdict, stage) = match (one.overall_significant, one.consistent) {
        (false, _) => (Verdict::NotSignificant, DecisionStage::OverallTest),
        (true, true) => (Verdict::Consistency, DecisionStage::Step1),
        (true, false) => (Verdict::Inconsistency, DecisionStage::Step2Fail),
    };
    let mut t = Vec::new();
    trace(&mut t, "overall_test", format!("Z = {:.4} vs z_alpha = {:.4}", one.z, one.z_alpha));
    if let Some(r) = one.ratio {
        trace(&mut t, "step1", format!("ratio = {r:.4} vs q = {}", config.q1));
    }
    Ok(AssessmentReport {
        region: config.region.clone(),
        verdict,
        stage,
        one_step: one,
        interaction: None,
        interaction_rejected: None,
        adjusted: None,
        trace: t,
        notes: prepared.data.notes().to_vec(),
    })
}

/// A consistency criterion as compared in the simulation tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    OneStep { q: f64 },
    TwoStep { q1: f64, q2: f64 },
}

impl Method {
    /// The four criteria compared in the tables.
    pub fn table_set() -> [Method; 4] {
        [
            Method::OneStep { q: 0.5 },
            Method::TwoStep { q1: 0.5, q2: 0.5 },
            Method::TwoStep { q1: 0.75, q2: 0.5 },
            Method::TwoStep { q1: 0.9, q2: 0.5 },
        ]
    }

    pub fn label(&self) -> String {
        match self {
            Method::OneStep { q } => format!("Ko({q})"),
            Method::TwoStep { q1, q2 } => format!("TwoStep({q1},{q2})"),
        }
    }
}

/// Outcome of several criteria on one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodClaims {
    pub significant: bool,
    /// One flag per method; all false when not significant.
    pub claims: Vec<bool>,
}

/// Evaluates several criteria on one prepared trial, sharing the ITE fit,
/// the interaction test and the adjusted effects between them.
pub fn evaluate_methods(
    prepared: &PreparedTrial,
    methods: &[Method],
    config: &AssessmentConfig,
) -> Result<MethodClaims> {
    let est = &prepared.estimates;
    let base = est.one_step(0.5, config.alpha, config.margin).at(Stage::Step1)?;
    if !base.overall_significant {
        return Ok(MethodClaims { significant: false, claims: vec![false; methods.len()] });
    }
    let step1 = |q: f64| base.ratio.is_some_and(|r| r > q);

    struct Second {
        rejected: bool,
        adjusted: AdjustedAte,
    }
    let mut second: Option<Second> = None;
    let mut claims = Vec::with_capacity(methods.len());
    for m in methods {
        let claim = match *m {
            Method::OneStep { q } => step1(q),
            Method::TwoStep { q1, q2 } => {
                if step1(q1) {
                    true
                } else {
                    if second.is_none() {
                        let ite = prepared.ite_profile(config)?;
                        let rejected = match prepared.working_model(&ite, config) {
                            Ok(fit) => cate_similarity_test(&fit, config.alpha_interaction),
                            Err(e) if wald_incomputable(&e) => false,
                            Err(e) => return Err(e.at(Stage::Interaction)),
                        };
                        let adjusted = prepared.adjusted(&ite, config)?;
                        second = Some(Second { rejected, adjusted });
                    }
                    let s = second.as_ref().expect("filled above");
                    !s.rejected && step2_event(&s.adjusted, est.complement.delta, q2, config.margin).passed
                }
            }
        };
        claims.push(claim);
    }
    Ok(MethodClaims { significant: true, claims })
}

impl AssessmentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub const CSV_HEADER: [&'static str; 17] = [
        "region",
        "verdict",
        "stage",
        "z",
        "z_alpha",
        "delta",
        "delta_r",
        "delta_minus_r",
        "ratio",
        "q1",
        "wald_stat",
        "df",
        "p_value",
        "interaction_rejected",
        "q2",
        "max_adjusted_ratio",
        "best_covariate",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let o = &self.one_step;
        let w = self.interaction.as_ref();
        let a = self.adjusted.as_ref();
        vec![
            self.region.clone(),
            format!("{:?}", self.verdict),
            self.stage.as_str().into(),
            o.z.to_string(),
            o.z_alpha.to_string(),
            o.delta.to_string(),
            o.delta_r.to_string(),
            o.delta_minus_r.to_string(),
            opt(o.ratio),
            o.threshold_q.to_string(),
            opt(w.map(|f| f.wald_stat)),
            w.map_or(String::new(), |f| f.df.to_string()),
            opt(w.map(|f| f.p_value)),
            self.interaction_rejected.map_or(String::new(), |b| b.to_string()),
            opt(a.map(|s| s.q2)),
            opt(a.and_then(|s| s.adjusted.max_ratio_over_delta_minus_r)),
            a.and_then(|s| s.adjusted.best_covariate).map_or(String::new(), |s| s.to_string()),
        ]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_record())?;
        w.flush()?;
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let o = &self.one_step;
        let mut s = String::new();
        let _ = writeln!(s, "Region: {}", self.region);
        let _ = writeln!(s, "Verdict: {:?} (stage {})", self.verdict, self.stage.as_str());
        let _ = writeln!(s, "Overall test: Z = {:.4}, z_alpha = {:.4}", o.z, o.z_alpha);
        let _ = writeln!(
            s,
            "Effects: overall {:.4}, region {:.4}, complement {:.4}",
            o.delta, o.delta_r, o.delta_minus_r
        );
        if let Some(f) = &self.interaction {
            let _ = writeln!(
                s,
                "Interaction test: Wald {:.4} on {} df, p = {:.4}",
                f.wald_stat, f.df, f.p_value
            );
        }
        if let Some(a) = &self.adjusted {
            let _ = writeln!(s, "Adjusted ratios (q2 = {}):", a.q2);
            for r in &a.ranking {
                let name = &a.adjusted.per_covariate[a
                    .adjusted
                    .per_covariate
                    .iter()
                    .position(|c| c.s == r.s)
                    .unwrap_or(0)]
                .name;
                let _ = writeln!(s, "  {}. {} delta* = {:.4}, ratio = {:.4}", r.rank, name, r.delta_star, r.ratio);
            }
        }
        s.push_str("Trace:\n");
        for e in &self.trace {
            let flag = if e.warning { " [warning]" } else { "" };
            let _ = writeln!(s, "  [{}] {}{}", e.stage, e.message, flag);
        }
        for n in &self.notes {
            let _ = writeln!(s, "Note: {n}");
        }
        s
    }
}
