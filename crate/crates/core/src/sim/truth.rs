use crate::error::{Error, Result};
use crate::num::{trunc_normal_moment, TruncNormalParams};

use super::generate::{expit, hazard_predictor, success_logit};
use super::scenario::{CateShape, Family, HazardLink, ScenarioSpec, QUADRATIC_CENTRE};

/// Restricted mean of an exponential time with the given rate up to `tau`.
/// Non-positive rates never produce an event.
fn exponential_rmst(rate: f64, tau: f64) -> f64 {
    if rate <= 0.0 {
        tau
    } else {
        -(-rate * tau).exp_m1() / rate
    }
}

/// Conditional treatment effect at covariates `x` in the region (`true`) or
/// its complement. Survival effects need a positive event rate in both arms.
pub fn true_cate(spec: &ScenarioSpec, x: &[f64], in_region: bool) -> Result<f64> {
    let needed = match spec.family {
        Family::Continuous { .. } => 2,
        _ => 4,
    };
    if x.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "need {needed} covariates, got {}",
            x.len()
        )));
    }
    let kappa = if in_region { spec.kappa_r } else { spec.kappa_minus_r };
    if let Family::Survival = spec.family {
        for treated in [true, false] {
            let rate = spec.hazard_link.rate(hazard_predictor(x, kappa, treated));
            if !(rate > 0.0) {
                return Err(Error::NonPositiveHazard { rate });
            }
        }
    }
    Ok(cate(spec, kappa, x))
}

fn cate(spec: &ScenarioSpec, kappa: f64, x: &[f64]) -> f64 {
    match spec.family {
        Family::Continuous { shape } => kappa * shape.eval(x[0], x[1]),
        Family::Binary => {
            expit(success_logit(x, kappa, true)) - expit(success_logit(x, kappa, false))
        }
        Family::Survival => {
            let rate = |treated| spec.hazard_link.rate(hazard_predictor(x, kappa, treated));
            exponential_rmst(rate(true), spec.tau) - exponential_rmst(rate(false), spec.tau)
        }
    }
}

const PANELS: usize = 6;
const NODES_PER_PANEL: usize = 8;

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            deriv = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / deriv;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * deriv * deriv)));
    }
    out
}

/// Composite quadrature rule for one covariate, with the truncated-normal
/// density folded into the weights.
fn density_rule(law: &TruncNormalParams) -> Vec<(f64, f64)> {
    let base = gauss_legendre(NODES_PER_PANEL);
    let width = (law.b - law.a) / PANELS as f64;
    let mut rule = Vec::with_capacity(PANELS * NODES_PER_PANEL);
    for panel in 0..PANELS {
        let mid = law.a + width * (panel as f64 + 0.5);
        for &(t, w) in &base {
            let x = mid + 0.5 * width * t;
            rule.push((x, 0.5 * width * w * law.pdf(x)));
        }
    }
    rule
}

/// Population average treatment effect in the region or its complement.
/// Under the linear hazard link, covariates with a non-positive rate
/// contribute an event-free RMST of τ, matching the generator.
pub fn population_ate(spec: &ScenarioSpec, in_region: bool) -> Result<f64> {
    spec.validate()?;
    let (mu, kappa) = if in_region {
        (&spec.mu_r, spec.kappa_r)
    } else {
        (&spec.mu_minus_r, spec.kappa_minus_r)
    };
    let law = |m: f64| TruncNormalParams::new(m, spec.sigma, spec.bounds.0, spec.bounds.1);
    if let Family::Continuous { shape } = spec.family {
        let (k, centre) = match shape {
            CateShape::Linear => (1, 0.0),
            CateShape::Quadratic => (2, QUADRATIC_CENTRE),
            CateShape::Cubic => (3, 0.0),
        };
        let m1 = trunc_normal_moment(&law(mu[0])?, k)? - centre;
        let m2 = trunc_normal_moment(&law(mu[1])?, k)? - centre;
        return Ok(kappa * (m1 + 0.5 * m2));
    }
    let rules = mu[..4].iter().map(|&m| law(m).map(|l| density_rule(&l))).collect::<Result<Vec<_>>>()?;
    let last = law(mu[3])?;
    let base = gauss_legendre(NODES_PER_PANEL);
    let mut total = 0.0;
    let mut x = [0.0; 4];
    for &(x0, w0) in &rules[0] {
        x[0] = x0;
        for &(x1, w1) in &rules[1] {
            x[1] = x1;
            let w01 = w0 * w1;
            for &(x2, w2) in &rules[2] {
                x[2] = x2;
                let w012 = w01 * w2;
                let inner = match spec.family {
                    Family::Survival if spec.hazard_link == HazardLink::Linear => {
                        // The RMST ramps from τ within a few hundredths of
                        // the zero-hazard line, so grade the mesh there.
                        let shift = kappa * (x0 + 0.5 * x1) / 10.0;
                        let breaks = graded_breaks(&last, &[-x2, -x2 - shift]);
                        integrate_last(&breaks, &base, &last, &mut x, |x| cate(spec, kappa, x))
                    }
                    _ => rules[3]
                        .iter()
                        .map(|&(x3, w3)| {
                            x[3] = x3;
                            w3 * cate(spec, kappa, &x)
                        })
                        .sum(),
                };
                total += w012 * inner;
            }
        }
    }
    Ok(total)
}

const GRADING: [f64; 9] = [0.0, 1e-3, 4e-3, 0.015, 0.05, 0.15, 0.4, 1.0, 2.5];

/// Panel edges on [a, b] that include every kink and a geometric ladder of
/// points on either side of it.
fn graded_breaks(law: &TruncNormalParams, kinks: &[f64]) -> Vec<f64> {
    let mut breaks = vec![law.a, law.b];
    let width = (law.b - law.a) / PANELS as f64;
    breaks.extend((1..PANELS).map(|k| law.a + width * k as f64));
    for &k in kinks {
        for d in GRADING {
            for p in [k - d, k + d] {
                if p > law.a && p < law.b {
                    breaks.push(p);
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    breaks
}

/// ∫ f(x) pdf(x₄) dx₄ over the panels, varying the last coordinate of `x`.
fn integrate_last<F>(
    breaks: &[f64],
    base: &[(f64, f64)],
    law: &TruncNormalParams,
    x: &mut [f64; 4],
    f: F,
) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for &(t, w) in base {
            x[3] = mid + half * t;
            total += half * w * law.pdf(x[3]) * f(x);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{trunc_normal_sample, RngStream};
    use crate::sim::scenario::builtin_scenario;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let rule = gauss_legendre(8);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-13);
        let x14: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((x14 - 2.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn density_rule_reproduces_moments() {
        let law = TruncNormalParams::new(0.6, 1.4, -3.0, 3.0).unwrap();
        let rule = density_rule(&law);
        let mass: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        let m1: f64 = rule.iter().map(|(x, w)| w * x).sum();
        assert!((m1 - trunc_normal_moment(&law, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn linear_no_shift_effects() {
        let spec = builtin_scenario("continuous-linear-noshift").unwrap();
        let law = TruncNormalParams::new(0.8, 1.4, -3.0, 3.0).unwrap();
        let m = trunc_normal_moment(&law, 1).unwrap();
        for kappa in [0.0, 4.0, 10.0] {
            let s = spec.clone().with_kappa_r(kappa);
            assert!((population_ate(&s, true).unwrap() - kappa * m).abs() < 1e-12);
        }
        assert!((m - 0.64).abs() < 0.005);
    }

    #[test]
    fn shift_ii_linear_complement_effect() {
        let spec = builtin_scenario("continuous-linear-shift-ii").unwrap();
        assert!((population_ate(&spec, false).unwrap() - 10.0 * (0.49 + 0.5 * 0.49)).abs() < 1e-6);
        assert!(population_ate(&spec, true).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rmst_limits() {
        assert_eq!(exponential_rmst(-1.0, 100.0), 100.0);
        assert_eq!(exponential_rmst(0.0, 100.0), 100.0);
        assert!((exponential_rmst(1e-12, 100.0) - 100.0).abs() < 1e-6);
        assert!((exponential_rmst(2.0, 100.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_kappa_has_no_effect() {
        for name in ["binary-shift-i", "survival-shift-ii"] {
            let spec = builtin_scenario(name).unwrap().with_kappa_r(0.0);
            assert!(true_cate(&spec, &[1.0, 1.0, 0.2, 0.3], true).unwrap().abs() < 1e-15);
            assert!(population_ate(&spec, true).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_matches_monte_carlo() {
        let mut linear = builtin_scenario("survival-shift-i").unwrap();
        linear.hazard_link = HazardLink::Linear;
        let specs = [
            builtin_scenario("binary-noshift").unwrap(),
            builtin_scenario("survival-shift-i").unwrap(),
            linear,
        ];
        for spec in specs {
            let name = spec.name.clone();
            let exact = population_ate(&spec, false).unwrap();
            let laws: Vec<_> = spec
                .mu_minus_r
                .iter()
                .map(|&m| TruncNormalParams::new(m, 1.4, -3.0, 3.0).unwrap())
                .collect();
            let mut rng = RngStream::new(11, 0);
            let n = 200_000;
            let mut x = [0.0; 4];
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..n {
                for (v, l) in x.iter_mut().zip(&laws) {
                    *v = trunc_normal_sample(l, &mut rng);
                }
                let c = cate(&spec, spec.kappa_minus_r, &x);
                sum += c;
                sum2 += c * c;
            }
            let mean = sum / n as f64;
            let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - exact).abs() < 4.0 * se, "{name}: {mean} vs {exact} (se {se})");
        }
    }

    #[test]
    fn survival_linear_link_needs_positive_rate() {
        let mut spec = builtin_scenario("survival-noshift").unwrap();
        spec.hazard_link = HazardLink::Linear;
        assert!(matches!(
            true_cate(&spec, &[0.0, 0.0, -0.5, 0.2], true),
            Err(Error::NonPositiveHazard { .. })
        ));
        let x = [1.0, 2.0, 0.5, 0.5];
        let expected = exponential_rmst(3.0, 100.0) - exponential_rmst(1.0, 100.0);
        assert!((true_cate(&spec, &x, true).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn survival_log_linear_cate() {
        let spec = builtin_scenario("survival-noshift").unwrap();
        let x = [1.0, 2.0, -0.5, 0.2];
        let expected = exponential_rmst((1.7f64).exp(), 100.0) - exponential_rmst((-0.3f64).exp(), 100.0);
        assert!((true_cate(&spec, &x, true).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn linear_formula() {
        let spec = builtin_scenario("continuous-linear-noshift").unwrap();
        assert_eq!(true_cate(&spec, &[1.0, 2.0, 0.0, 0.0], true).unwrap(), 20.0);
    }

    #[test]
    fn short_covariate_vector() {
        let spec = builtin_scenario("binary-noshift").unwrap();
        assert!(true_cate(&spec, &[0.0, 0.0], true).is_err());
    }
}
