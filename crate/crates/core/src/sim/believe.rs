use serde::{Deserialize, Serialize};

use crate::assessment::{AssessmentConfig, Method};
use crate::data::{Arm, DatasetBuilder, Endpoint, TrialDataset};
use crate::error::{Error, Result};
use crate::num::RngStream;

use super::generate::expit;
use super::montecarlo::{replicates_with, summarize, CpResult};

pub const ASIAN: &str = "Asian";
pub const NON_ASIAN: &str = "non-Asian";

/// Response model and cohort layout of the luspatercept case study. The
/// response logit is
/// `intercept + treatment·1[T] + btb_treatment·BTB·1[T] + btb·BTB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BelieveParams {
    pub intercept: f64,
    pub treatment: f64,
    pub btb_treatment: f64,
    pub btb: f64,
    pub n_asian: usize,
    pub n_non_asian: usize,
    pub pi1: f64,
    /// Share of each cohort drawn from the high-burden range.
    pub high_fraction_asian: f64,
    pub high_fraction_non_asian: f64,
    pub low_range: (f64, f64),
    pub high_range: (f64, f64),
}

impl Default for BelieveParams {
    fn default() -> Self {
        BelieveParams {
            intercept: 2.7,
            treatment: -15.0,
            btb_treatment: 1.3,
            btb: 0.0,
            n_asian: 117,
            n_non_asian: 219,
            pi1: 2.0 / 3.0,
            high_fraction_asian: 0.42,
            high_fraction_non_asian: 0.18,
            low_range: (6.0, 15.0),
            high_range: (15.0, 26.0),
        }
    }
}

impl BelieveParams {
    /// The printed model with every coefficient negated: a low placebo
    /// response and a benefit that shrinks as the burden grows.
    pub fn sign_corrected() -> Self {
        let printed = BelieveParams::default();
        BelieveParams {
            intercept: -printed.intercept,
            treatment: -printed.treatment,
            btb_treatment: -printed.btb_treatment,
            ..printed
        }
    }

    pub fn validate(&self) -> Result<()> {
        let coefficients = [self.intercept, self.treatment, self.btb_treatment, self.btb];
        if !coefficients.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("response model coefficient"));
        }
        if self.n_asian < 4 || self.n_non_asian < 4 {
            return Err(Error::InvalidArgument("each cohort needs at least 4 subjects".into()));
        }
        if !(self.pi1 > 0.0 && self.pi1 < 1.0) {
            return Err(Error::InvalidArgument(format!("pi1 must lie in (0, 1), got {}", self.pi1)));
        }
        for f in [self.high_fraction_asian, self.high_fraction_non_asian] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!("high-burden share {f} is not a probability")));
            }
        }
        for (lo, hi) in [self.low_range, self.high_range] {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!("empty burden range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn response_probability(&self, btb: f64, arm: Arm) -> f64 {
        let treated = if arm == Arm::Treatment { 1.0 } else { 0.0 };
        expit(self.intercept + self.treatment * treated + self.btb_treatment * btb * treated + self.btb * btb)
    }
}

/// One simulated trial with the Asian cohort first.
pub fn generate_believe(params: &BelieveParams, rng: &mut RngStream) -> Result<TrialDataset> {
    params.validate()?;
    let mut builder = DatasetBuilder::new(Endpoint::Binary, vec!["btb".into()], params.pi1)?
        .with_capacity(params.n_asian + params.n_non_asian);
    for (label, n, high) in [
        (ASIAN, params.n_asian, params.high_fraction_asian),
        (NON_ASIAN, params.n_non_asian, params.high_fraction_non_asian),
    ] {
        for _ in 0..n {
            let (lo, hi) = if rng.bernoulli(high) { params.high_range } else { params.low_range };
            let btb = rng.uniform_range(lo, hi);
            let arm = if rng.bernoulli(params.pi1) { Arm::Treatment } else { Arm::Control };
            let y = if rng.bernoulli(params.response_probability(btb, arm)) { 1.0 } else { 0.0 };
            builder.push(y, None, arm, label, &[btb])?;
        }
    }
    builder.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BelieveSummary {
    pub params: BelieveParams,
    pub power: f64,
    pub results: Vec<CpResult>,
}

/// Consistency probabilities of the Asian cohort under the four table
/// criteria.
pub fn believe_study(
    params: &BelieveParams,
    config: &AssessmentConfig,
    reps: usize,
    seed: u64,
) -> Result<BelieveSummary> {
    params.validate()?;
    let config = AssessmentConfig { region: ASIAN.to_string(), ..config.clone() };
    let methods = Method::table_set();
    let outcomes = replicates_with(|rng: &mut RngStream| generate_believe(params, rng), &methods, &config, reps, seed)?;
    let results = summarize(&outcomes, &methods, seed);
    Ok(BelieveSummary { params: params.clone(), power: results[0].power, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_model_rates() {
        let p = BelieveParams::default();
        assert!((p.response_probability(10.0, Arm::Control) - expit(2.7)).abs() < 1e-15);
        assert!((p.response_probability(10.0, Arm::Treatment) - expit(0.7)).abs() < 1e-15);
    }

    #[test]
    fn sign_corrected_model_rates() {
        let p = BelieveParams::sign_corrected();
        assert!((p.response_probability(20.0, Arm::Control) - expit(-2.7)).abs() < 1e-15);
        assert!((p.response_probability(10.0, Arm::Treatment) - expit(-0.7)).abs() < 1e-15);
        assert!(p.response_probability(8.0, Arm::Treatment) > p.response_probability(20.0, Arm::Treatment));
    }

    #[test]
    fn cohorts_and_ranges() {
        let p = BelieveParams::default();
        let d = generate_believe(&p, &mut RngStream::new(4, 0)).unwrap();
        assert_eq!(d.n(), 336);
        assert!((0..117).all(|i| d.region_of(i) == ASIAN));
        assert!((117..336).all(|i| d.region_of(i) == NON_ASIAN));
        assert!(d.covariate(0).iter().all(|&b| (6.0..=26.0).contains(&b)));
    }

    #[test]
    fn high_burden_shares() {
        let p = BelieveParams { n_asian: 40_000, n_non_asian: 40_000, ..BelieveParams::default() };
        let d = generate_believe(&p, &mut RngStream::new(8, 0)).unwrap();
        let share = |lo: usize, hi: usize| {
            d.covariate(0)[lo..hi].iter().filter(|&&b| b >= 15.0).count() as f64 / (hi - lo) as f64
        };
        assert!((share(0, 40_000) - 0.42).abs() < 0.01);
        assert!((share(40_000, 80_000) - 0.18).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_params() {
        let p = BelieveParams { high_fraction_asian: 1.5, ..BelieveParams::default() };
        assert!(p.validate().is_err());
        let p = BelieveParams { low_range: (15.0, 6.0), ..BelieveParams::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn small_study_runs() {
        let s = believe_study(&BelieveParams::sign_corrected(), &AssessmentConfig::default(), 20, 3).unwrap();
        assert_eq!(s.results.len(), 4);
        assert_eq!(s.results[0].reps_total, 20);
    }
}
