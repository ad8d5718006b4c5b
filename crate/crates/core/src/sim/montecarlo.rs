use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assessment::{evaluate_methods, AssessmentConfig, Method, PreparedTrial};
use crate::data::TrialDataset;
use crate::error::{Error, Result};
use crate::num::RngStream;

use super::generate::generate_trial;
use super::scenario::{ScenarioSpec, REGION_LABEL};

/// What one simulated trial produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub significant: bool,
    /// One flag per method.
    pub claims: Vec<bool>,
    pub delta_r: f64,
    pub delta_minus_r: f64,
    /// Set when the trial could not be analysed. Failed replicates count
    /// toward the total but never as significant.
    pub failed: Option<String>,
}

impl ReplicateOutcome {
    fn failure(methods: usize, e: &Error) -> Self {
        ReplicateOutcome {
            significant: false,
            claims: vec![false; methods],
            delta_r: f64::NAN,
            delta_minus_r: f64::NAN,
            failed: Some(e.to_string()),
        }
    }
}

/// Consistency probability of one method in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpResult {
    pub method: Method,
    /// Claims among significant replicates; `None` when none were significant.
    pub cp: Option<f64>,
    pub mc_se: Option<f64>,
    pub reps_total: usize,
    pub reps_significant: usize,
    pub reps_failed: usize,
    pub claims: usize,
    pub power: f64,
    pub seed: u64,
}

fn region_config(config: &AssessmentConfig) -> AssessmentConfig {
    AssessmentConfig { region: REGION_LABEL.to_string(), ..config.clone() }
}

fn analyse<G>(generate: &G, methods: &[Method], config: &AssessmentConfig, rng: &mut RngStream) -> Result<ReplicateOutcome>
where
    G: Fn(&mut RngStream) -> Result<TrialDataset>,
{
    let data = generate(rng)?;
    let prepared = PreparedTrial::new(&data, config)?;
    let outcome = evaluate_methods(&prepared, methods, config)?;
    Ok(ReplicateOutcome {
        significant: outcome.significant,
        claims: outcome.claims,
        delta_r: prepared.estimates.region.delta,
        delta_minus_r: prepared.estimates.complement.delta,
        failed: None,
    })
}

fn replicate_with<G>(generate: &G, methods: &[Method], config: &AssessmentConfig, seed: u64, index: u64) -> ReplicateOutcome
where
    G: Fn(&mut RngStream) -> Result<TrialDataset>,
{
    let mut rng = RngStream::new(seed, index);
    analyse(generate, methods, config, &mut rng).unwrap_or_else(|e| {
        log::debug!("replicate {index} failed: {e}");
        ReplicateOutcome::failure(methods.len(), &e)
    })
}

/// Runs replicates `0..reps` of an arbitrary trial generator in parallel,
/// assessing the region named in `config`.
pub(crate) fn replicates_with<G>(
    generate: G,
    methods: &[Method],
    config: &AssessmentConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<ReplicateOutcome>>
where
    G: Fn(&mut RngStream) -> Result<TrialDataset> + Sync,
{
    if reps == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    config.validate()?;
    Ok((0..reps as u64)
        .into_par_iter()
        .map(|i| replicate_with(&generate, methods, config, seed, i))
        .collect())
}

/// Simulates and assesses replicate `index`, drawing from stream `index` of
/// `seed`.
pub fn run_replicate(
    spec: &ScenarioSpec,
    methods: &[Method],
    config: &AssessmentConfig,
    seed: u64,
    index: u64,
) -> ReplicateOutcome {
    let generate = |rng: &mut RngStream| generate_trial(spec, rng);
    replicate_with(&generate, methods, &region_config(config), seed, index)
}

/// Replicates `0..reps` in parallel, returned in index order.
pub fn run_replicates(
    spec: &ScenarioSpec,
    methods: &[Method],
    config: &AssessmentConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<ReplicateOutcome>> {
    spec.validate()?;
    replicates_with(|rng: &mut RngStream| generate_trial(spec, rng), methods, &region_config(config), reps, seed)
}

pub fn summarize(outcomes: &[ReplicateOutcome], methods: &[Method], seed: u64) -> Vec<CpResult> {
    let reps_total = outcomes.len();
    let reps_significant = outcomes.iter().filter(|o| o.significant).count();
    let reps_failed = outcomes.iter().filter(|o| o.failed.is_some()).count();
    let power = if reps_total == 0 { 0.0 } else { reps_significant as f64 / reps_total as f64 };
    methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let claims = outcomes.iter().filter(|o| o.significant && o.claims[m]).count();
            let cp = (reps_significant > 0).then(|| claims as f64 / reps_significant as f64);
            let mc_se = cp.map(|p| (p * (1.0 - p) / reps_significant as f64).sqrt());
            CpResult {
                method,
                cp,
                mc_se,
                reps_total,
                reps_significant,
                reps_failed,
                claims,
                power,
                seed,
            }
        })
        .collect()
}

pub fn estimate_cp_methods(
    spec: &ScenarioSpec,
    methods: &[Method],
    config: &AssessmentConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<CpResult>> {
    let outcomes = run_replicates(spec, methods, config, reps, seed)?;
    let results = summarize(&outcomes, methods, seed);
    if let Some(r) = results.first() {
        if r.reps_failed > 0 {
            log::warn!("{}: {} of {} replicates failed", spec.name, r.reps_failed, reps);
        }
    }
    Ok(results)
}

pub fn estimate_cp(
    spec: &ScenarioSpec,
    method: Method,
    config: &AssessmentConfig,
    reps: usize,
    seed: u64,
) -> Result<CpResult> {
    let mut out = estimate_cp_methods(spec, &[method], config, reps, seed)?;
    Ok(out.remove(0))
}
