use crate::data::{Arm, DatasetBuilder, Endpoint, TrialDataset};
use crate::error::Result;
use crate::num::{trunc_normal_sample, RngStream, TruncNormalParams};

use super::scenario::{Family, ScenarioSpec, COMPLEMENT_LABEL, REGION_LABEL};
#[cfg(test)]
use super::scenario::HazardLink;

#[inline]
pub(crate) fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Linear predictor of the exponential survival model.
#[inline]
pub(crate) fn hazard_predictor(x: &[f64], kappa: f64, treated: bool) -> f64 {
    let effect = if treated { kappa * (x[0] + 0.5 * x[1]) / 10.0 } else { 0.0 };
    x[2] + x[3] + effect
}

#[inline]
pub(crate) fn success_logit(x: &[f64], kappa: f64, treated: bool) -> f64 {
    let effect = if treated { kappa * (x[0] + 0.5 * x[1]) } else { 0.0 };
    -5.0 + 5.0 * (x[2] + x[3]) + effect
}

/// Arms for one region: Bernoulli(π₁) draws, or an exact split shuffled
/// into random order when `balanced`.
fn assign_arms(n: usize, pi1: f64, balanced: bool, rng: &mut RngStream) -> Vec<Arm> {
    if balanced {
        let n_treat = (n as f64 * pi1).round() as usize;
        let mut arms: Vec<Arm> = (0..n)
            .map(|i| if i < n_treat { Arm::Treatment } else { Arm::Control })
            .collect();
        rng.shuffle(&mut arms);
        arms
    } else {
        (0..n)
            .map(|_| if rng.bernoulli(pi1) { Arm::Treatment } else { Arm::Control })
            .collect()
    }
}

/// One simulated trial: the first `n_r` subjects form region "r", the rest
/// the complement "other".
pub fn generate_trial(spec: &ScenarioSpec, rng: &mut RngStream) -> Result<TrialDataset> {
    spec.validate()?;
    let names = (1..=spec.p).map(|s| format!("x{s}")).collect();
    let endpoint = match spec.family {
        Family::Survival => Endpoint::Survival { tau: spec.tau },
        Family::Binary => Endpoint::Binary,
        Family::Continuous { .. } => Endpoint::Continuous,
    };
    let mut builder =
        DatasetBuilder::new(endpoint, names, spec.pi1)?.with_capacity(spec.n_r + spec.n_minus_r);
    let (a, b) = spec.bounds;
    let mut x = vec![0.0; spec.p];
    for (label, n, mu, kappa) in [
        (REGION_LABEL, spec.n_r, &spec.mu_r, spec.kappa_r),
        (COMPLEMENT_LABEL, spec.n_minus_r, &spec.mu_minus_r, spec.kappa_minus_r),
    ] {
        let laws = mu
            .iter()
            .map(|&m| TruncNormalParams::new(m, spec.sigma, a, b))
            .collect::<Result<Vec<_>>>()?;
        let arms = assign_arms(n, spec.pi1, spec.balanced, rng);
        for arm in arms {
            for (xs, law) in x.iter_mut().zip(&laws) {
                *xs = trunc_normal_sample(law, rng);
            }
            let treated = arm == Arm::Treatment;
            let (y, status) = match spec.family {
                Family::Continuous { shape } => {
                    let effect = if treated { kappa * shape.eval(x[0], x[1]) } else { 0.0 };
                    let y = 10.0 + 5.0 * x.iter().sum::<f64>() + effect + rng.standard_normal();
                    (y, None)
                }
                Family::Binary => {
                    let p = expit(success_logit(&x, kappa, treated));
                    (if rng.bernoulli(p) { 1.0 } else { 0.0 }, None)
                }
                Family::Survival => {
                    let rate = spec.hazard_link.rate(hazard_predictor(&x, kappa, treated));
                    let t = rng.exponential(rate);
                    let c = rng.uniform_range(0.0, spec.censor_upper);
                    (t.min(c), Some(t <= c))
                }
            };
            builder.push(y, status, arm, label, &x)?;
        }
    }
    builder.finish()
}
