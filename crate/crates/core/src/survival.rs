//! Kaplan–Meier estimation, restricted mean survival time and jackknife
//! pseudo-observations.
//!
//! At tied times events are processed before censorings, so a subject
//! censored at an event time is still at risk for that event.

use serde::{Deserialize, Serialize};

use crate::data::{Arm, Endpoint, TrialDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmCurve {
    pub event_times: Vec<f64>,
    /// Ŝ just after each event time.
    pub survival: Vec<f64>,
    pub n_at_risk: Vec<usize>,
    pub n_events: Vec<usize>,
}

impl KmCurve {
    /// Ŝ(t), right-continuous with Ŝ(0) = 1.
    pub fn at(&self, t: f64) -> f64 {
        match self.event_times.iter().rposition(|&e| e <= t) {
            Some(k) => self.survival[k],
            None => 1.0,
        }
    }
}

/// Order of subjects by time with events first among ties.
fn survival_order(times: &[f64], status: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]).then(status[j].cmp(&status[i])));
    order
}

fn check_inputs(times: &[f64], status: &[bool]) -> Result<()> {
    if times.len() != status.len() {
        return Err(Error::InvalidArgument(format!(
            "{} times but {} status flags",
            times.len(),
            status.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument("survival times must be finite and non-negative".into()));
    }
    Ok(())
}

/// Product-limit estimator of the survival function.
pub fn kaplan_meier(times: &[f64], status: &[bool]) -> Result<KmCurve> {
    check_inputs(times, status)?;
    let order = survival_order(times, status);
    let mut curve = KmCurve {
        event_times: Vec::new(),
        survival: Vec::new(),
        n_at_risk: Vec::new(),
        n_events: Vec::new(),
    };
    let mut at_risk = times.len();
    let mut s = 1.0;
    let mut k = 0;
    while k < order.len() {
        let t = times[order[k]];
        let (mut d, mut c) = (0, 0);
        while k < order.len() && times[order[k]] == t {
            if status[order[k]] {
                d += 1;
            } else {
                c += 1;
            }
            k += 1;
        }
        if d > 0 {
            s *= 1.0 - d as f64 / at_risk as f64;
            curve.event_times.push(t);
            curve.survival.push(s);
            curve.n_at_risk.push(at_risk);
            curve.n_events.push(d);
        }
        at_risk -= d + c;
    }
    Ok(curve)
}

/// ∫₀^τ Ŝ(u) du for the step function Ŝ.
pub fn rmst(curve: &KmCurve, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let mut area = 0.0;
    let mut prev = 0.0;
    let mut s = 1.0;
    for (&t, &sv) in curve.event_times.iter().zip(&curve.survival) {
        if t >= tau {
            break;
        }
        area += s * (t - prev);
        prev = t;
        s = sv;
    }
    area += s * (tau - prev);
    Ok(area)
}

/// RMST from data already in survival order, optionally skipping one
/// position. Walks the product-limit recursion directly.
fn rmst_sorted(times: &[f64], status: &[bool], skip: Option<usize>, tau: f64) -> f64 {
    let n = times.len();
    let mut at_risk = n - usize::from(skip.is_some());
    let mut area = 0.0;
    let mut prev = 0.0;
    let mut s = 1.0;
    let mut k = 0;
    while k < n {
        let t = times[k];
        if t >= tau {
            break;
        }
        let (mut d, mut c) = (0usize, 0usize);
        while k < n && times[k] == t {
            if Some(k) != skip {
                if status[k] {
                    d += 1;
                } else {
                    c += 1;
                }
            }
            k += 1;
        }
        if d > 0 {
            area += s * (t - prev);
            prev = t;
            s *= 1.0 - d as f64 / at_risk as f64;
        }
        at_risk -= d + c;
    }
    area + s * (tau - prev)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoObs {
    pub theta_full: f64,
    /// Leave-one-out estimates θ̂₍ᵢ₎ in input order.
    pub theta_loo: Vec<f64>,
    /// nθ̂ − (n − 1)θ̂₍ᵢ₎ in input order.
    pub values: Vec<f64>,
    pub tau: f64,
}

/// Jackknife RMST pseudo-observations.
pub fn pseudo_observations(times: &[f64], status: &[bool], tau: f64) -> Result<PseudoObs> {
    check_inputs(times, status)?;
    let n = times.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let order = survival_order(times, status);
    let st: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let ss: Vec<bool> = order.iter().map(|&i| status[i]).collect();
    let theta = rmst_sorted(&st, &ss, None, tau);
    let nf = n as f64;
    let mut theta_loo = vec![0.0; n];
    let mut values = vec![0.0; n];
    for (pos, &i) in order.iter().enumerate() {
        let loo = rmst_sorted(&st, &ss, Some(pos), tau);
        theta_loo[i] = loo;
        values[i] = nf * theta - (nf - 1.0) * loo;
    }
    Ok(PseudoObs {
        theta_full: theta,
        theta_loo,
        values,
        tau,
    })
}

/// Which subjects share a Kaplan–Meier fit when forming pseudo-observations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoScope {
    /// Each arm over all regions.
    #[default]
    PerArm,
    /// Each arm within each region.
    PerArmWithinRegion,
}

/// Replaces censored times by RMST pseudo-observations, giving a continuous
/// outcome.
pub fn to_pseudo_dataset(data: &TrialDataset) -> Result<TrialDataset> {
    to_pseudo_dataset_with(data, PseudoScope::PerArm)
}

pub fn to_pseudo_dataset_with(data: &TrialDataset, scope: PseudoScope) -> Result<TrialDataset> {
    let tau = match data.endpoint() {
        Endpoint::Survival { tau } => tau,
        _ => return Err(Error::InvalidArgument("pseudo-observations need a survival endpoint".into())),
    };
    let status = data.status().ok_or_else(|| Error::MissingColumn("status".into()))?;
    let times = data.outcomes();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let nreg = data.region_labels().len();
    let ngroups = match scope {
        PseudoScope::PerArm => 2,
        PseudoScope::PerArmWithinRegion => 2 * nreg,
    };
    groups.resize(ngroups, Vec::new());
    for i in 0..data.n() {
        let arm = usize::from(data.treatments()[i] == Arm::Control);
        let g = match scope {
            PseudoScope::PerArm => arm,
            PseudoScope::PerArmWithinRegion => {
                let r = data
                    .region_labels()
                    .iter()
                    .position(|l| l == data.region_of(i))
                    .expect("interned label");
                2 * r + arm
            }
        };
        groups[g].push(i);
    }
    let mut out = vec![0.0; data.n()];
    for members in groups.iter().filter(|g| !g.is_empty()) {
        let t: Vec<f64> = members.iter().map(|&i| times[i]).collect();
        let s: Vec<bool> = members.iter().map(|&i| status[i]).collect();
        let po = pseudo_observations(&t, &s, tau)?;
        for (&i, v) in members.iter().zip(po.values) {
            out[i] = v;
        }
    }
    data.with_outcomes(out, Endpoint::Continuous)
}
