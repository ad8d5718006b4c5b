use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::trunc_normal_invert_moment;

/// Label of the region under assessment in generated trials.
pub const REGION_LABEL: &str = "r";
pub const COMPLEMENT_LABEL: &str = "other";

const SIGMA: f64 = 1.4;
const BOUNDS: (f64, f64) = (-3.0, 3.0);
/// Centring constant used by the quadratic effect shape.
pub(crate) const QUADRATIC_CENTRE: f64 = 1.61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CateShape {
    /// x₁ + 0.5x₂
    Linear,
    /// x₁² − 1.61 + 0.5(x₂² − 1.61)
    Quadratic,
    /// x₁³ + 0.5x₂³
    Cubic,
}

impl CateShape {
    #[inline]
    pub fn eval(self, x1: f64, x2: f64) -> f64 {
        match self {
            CateShape::Linear => x1 + 0.5 * x2,
            CateShape::Quadratic => x1 * x1 - QUADRATIC_CENTRE + 0.5 * (x2 * x2 - QUADRATIC_CENTRE),
            CateShape::Cubic => x1.powi(3) + 0.5 * x2.powi(3),
        }
    }

    fn name(self) -> &'static str {
        match self {
            CateShape::Linear => "linear",
            CateShape::Quadratic => "quadratic",
            CateShape::Cubic => "cubic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Continuous { shape: CateShape },
    Binary,
    Survival,
}

impl Family {
    pub fn all() -> [Family; 5] {
        [
            Family::Continuous { shape: CateShape::Linear },
            Family::Continuous { shape: CateShape::Quadratic },
            Family::Continuous { shape: CateShape::Cubic },
            Family::Binary,
            Family::Survival,
        ]
    }

    pub fn name(self) -> String {
        match self {
            Family::Continuous { shape } => format!("continuous-{}", shape.name()),
            Family::Binary => "binary".into(),
            Family::Survival => "survival".into(),
        }
    }
}

/// How the linear predictor of the survival model maps to the event rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardLink {
    /// rate = exp(predictor)
    #[default]
    LogLinear,
    /// rate = predictor; non-positive rates never produce an event.
    Linear,
}

impl HazardLink {
    #[inline]
    pub fn rate(self, predictor: f64) -> f64 {
        match self {
            HazardLink::LogLinear => predictor.exp(),
            HazardLink::Linear => predictor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    /// Identical covariate laws in both regions.
    Noshift,
    /// Complement shifted in x₁.
    ShiftI,
    /// Complement shifted in x₁ and x₂.
    ShiftIi,
}

impl ShiftKind {
    pub fn all() -> [ShiftKind; 3] {
        [ShiftKind::Noshift, ShiftKind::ShiftI, ShiftKind::ShiftIi]
    }

    pub fn name(self) -> &'static str {
        match self {
            ShiftKind::Noshift => "noshift",
            ShiftKind::ShiftI => "shift-i",
            ShiftKind::ShiftIi => "shift-ii",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub family: Family,
    pub shift: ShiftKind,
    pub n_r: usize,
    pub n_minus_r: usize,
    pub p: usize,
    pub mu_r: Vec<f64>,
    pub mu_minus_r: Vec<f64>,
    pub sigma: f64,
    pub bounds: (f64, f64),
    pub kappa_r: f64,
    pub kappa_minus_r: f64,
    pub pi1: f64,
    /// Upper end of the uniform censoring law (survival only).
    pub censor_upper: f64,
    /// RMST horizon (survival only).
    pub tau: f64,
    #[serde(default)]
    pub hazard_link: HazardLink,
    /// Force exact π₁ allocation within each region.
    pub balanced: bool,
}

impl ScenarioSpec {
    fn base(family: Family, shift: ShiftKind) -> Self {
        ScenarioSpec {
            name: format!("{}-{}", family.name(), shift.name()),
            family,
            shift,
            n_r: 60,
            n_minus_r: 340,
            p: 4,
            mu_r: vec![0.0; 4],
            mu_minus_r: vec![0.0; 4],
            sigma: SIGMA,
            bounds: BOUNDS,
            kappa_r: 10.0,
            kappa_minus_r: 10.0,
            pi1: 0.5,
            censor_upper: 200.0,
            tau: 100.0,
            hazard_link: HazardLink::default(),
            balanced: false,
        }
    }

    pub fn with_kappa_r(mut self, kappa_r: f64) -> Self {
        self.kappa_r = kappa_r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let needed = match self.family {
            Family::Continuous { .. } => 2,
            Family::Binary | Family::Survival => 4,
        };
        if self.p < needed {
            return Err(Error::InvalidArgument(format!(
                "scenario {} needs at least {needed} covariates, has {}",
                self.name, self.p
            )));
        }
        if self.mu_r.len() != self.p || self.mu_minus_r.len() != self.p {
            return Err(Error::InvalidArgument("covariate locations must have length p".into()));
        }
        if self.n_r < 4 || self.n_minus_r < 4 {
            return Err(Error::InvalidArgument("each region needs at least 4 subjects".into()));
        }
        if !(self.pi1 > 0.0 && self.pi1 < 1.0) {
            return Err(Error::InvalidArgument(format!("pi1 must lie in (0, 1), got {}", self.pi1)));
        }
        if !(self.sigma > 0.0) || !(self.bounds.0 < self.bounds.1) {
            return Err(Error::InvalidArgument("invalid truncated-normal parameters".into()));
        }
        if matches!(self.family, Family::Survival) && !(self.tau > 0.0 && self.censor_upper > 0.0) {
            return Err(Error::InvalidArgument("survival scenarios need positive tau and censoring bound".into()));
        }
        Ok(())
    }
}

fn invert(target: f64, k: u8) -> f64 {
    trunc_normal_invert_moment(target, k, SIGMA, BOUNDS.0, BOUNDS.1)
        .expect("catalog moment targets are attainable")
}

/// Location of x₁ (and x₂ for shift (ii)) giving the tabulated moments.
fn locations(family: Family, shift: ShiftKind) -> (Vec<f64>, Vec<f64>) {
    let zero = vec![0.0; 4];
    let with = |m1: f64, m2: f64| vec![m1, m2, 0.0, 0.0];
    match (family, shift) {
        (Family::Continuous { shape }, ShiftKind::Noshift) => {
            let mu = match shape {
                CateShape::Linear => 0.8,
                CateShape::Quadratic => 1.4,
                CateShape::Cubic => 0.5,
            };
            (with(mu, 0.0), with(mu, 0.0))
        }
        (Family::Binary, ShiftKind::Noshift) => {
            let mu = invert(0.408, 1);
            (with(mu, 0.0), with(mu, 0.0))
        }
        (Family::Survival, ShiftKind::Noshift) => {
            let mu = invert(-0.791, 1);
            (with(mu, 0.0), with(mu, 0.0))
        }
        (Family::Continuous { shape }, ShiftKind::ShiftI) => {
            let mu = match shape {
                CateShape::Linear => invert(0.72, 1),
                CateShape::Quadratic => invert(QUADRATIC_CENTRE + 0.94, 2),
                CateShape::Cubic => invert(1.96, 3),
            };
            (zero, with(mu, 0.0))
        }
        (Family::Continuous { shape }, ShiftKind::ShiftIi) => {
            let mu = match shape {
                CateShape::Linear => invert(0.49, 1),
                CateShape::Quadratic => invert(QUADRATIC_CENTRE + 0.64, 2),
                CateShape::Cubic => invert(1.29, 3),
            };
            (zero, with(mu, mu))
        }
        (Family::Binary, ShiftKind::ShiftI) => (zero, with(invert(0.408, 1), 0.0)),
        (Family::Binary, ShiftKind::ShiftIi) => (zero, with(invert(0.245, 1), invert(0.164, 1))),
        (Family::Survival, ShiftKind::ShiftI) => (zero, with(invert(-0.866, 1), 0.0)),
        (Family::Survival, ShiftKind::ShiftIi) => (zero, with(invert(-0.486, 1), invert(-0.407, 1))),
    }
}

/// Every family × shift combination with the tabulated covariate moments.
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    let mut out = Vec::with_capacity(15);
    for family in Family::all() {
        for shift in ShiftKind::all() {
            let mut spec = ScenarioSpec::base(family, shift);
            let (mu_r, mu_minus_r) = locations(family, shift);
            spec.mu_r = mu_r;
            spec.mu_minus_r = mu_minus_r;
            out.push(spec);
        }
    }
    out
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioSpec> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario \"{name}\"")))
}

pub fn catalog_json() -> String {
    serde_json::to_string_pretty(&builtin_scenarios()).expect("catalog serializes")
}
