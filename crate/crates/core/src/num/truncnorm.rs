//! Truncated normal distribution on a finite interval.

use serde::{Deserialize, Serialize};

use super::normal::{phi, phi_inv, std_normal_pdf};
use super::rng::RngStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncNormalParams {
    pub mu: f64,
    pub sigma: f64,
    pub a: f64,
    pub b: f64,
}

impl TruncNormalParams {
    pub fn new(mu: f64, sigma: f64, a: f64, b: f64) -> Result<Self> {
        let p = TruncNormalParams { mu, sigma, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.mu, self.sigma, self.a, self.b].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("truncated normal parameter"));
        }
        if self.sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "truncated normal sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.a >= self.b {
            return Err(Error::InvalidArgument(format!(
                "truncation bounds must satisfy a < b, got [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(())
    }

    fn standardized(&self) -> (f64, f64) {
        ((self.a - self.mu) / self.sigma, (self.b - self.mu) / self.sigma)
    }

    /// Density on [a, b].
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.a || x > self.b {
            return 0.0;
        }
        let (alpha, beta) = self.standardized();
        std_normal_pdf((x - self.mu) / self.sigma) / (self.sigma * mass(alpha, beta))
    }
}

/// Φ(β) − Φ(α), evaluated on the tail that avoids cancellation.
fn mass(alpha: f64, beta: f64) -> f64 {
    if alpha > 0.0 {
        phi(-alpha) - phi(-beta)
    } else {
        phi(beta) - phi(alpha)
    }
}

/// Inverse-cdf draw: u ~ U(Φ(α), Φ(β)), x = μ + σΦ⁻¹(u).
pub fn trunc_normal_sample(params: &TruncNormalParams, rng: &mut RngStream) -> f64 {
    let (alpha, beta) = params.standardized();
    let u = rng.uniform_open();
    // Sample the reflected variable when the window sits in the upper tail.
    let z = if alpha > 0.0 {
        let lo = phi(-beta);
        let hi = phi(-alpha);
        -phi_inv(lo + u * (hi - lo))
    } else {
        let lo = phi(alpha);
        let hi = phi(beta);
        phi_inv(lo + u * (hi - lo))
    };
    (params.mu + params.sigma * z).clamp(params.a, params.b)
}

/// Raw moment E[Xᵏ], k ∈ {1, 2, 3}, by the closed-form recursion on the
/// standardized truncated normal.
pub fn trunc_normal_moment(params: &TruncNormalParams, k: u8) -> Result<f64> {
    params.validate()?;
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "moment order must be 1, 2 or 3, got {k}"
        )));
    }
    let (alpha, beta) = params.standardized();
    let z = mass(alpha, beta);
    let (pa, pb) = (std_normal_pdf(alpha), std_normal_pdf(beta));
    // m_j = E[Yʲ] for Y standard normal truncated to [α, β].
    let m1 = (pa - pb) / z;
    let m2 = 1.0 + (alpha * pa - beta * pb) / z;
    let m3 = 2.0 * m1 + (alpha * alpha * pa - beta * beta * pb) / z;
    let (mu, s) = (params.mu, params.sigma);
    Ok(match k {
        1 => mu + s * m1,
        2 => mu * mu + 2.0 * mu * s * m1 + s * s * m2,
        _ => mu.powi(3) + 3.0 * mu * mu * s * m1 + 3.0 * mu * s * s * m2 + s.powi(3) * m3,
    })
}

/// Finds μ with E[Xᵏ] = target by bisection.
///
/// k = 1 and k = 3 are monotone in μ over the whole line. k = 2 is searched
/// on the branch μ ≥ (a + b)/2, the one the shift scenarios use.
pub fn trunc_normal_invert_moment(target: f64, k: u8, sigma: f64, a: f64, b: f64) -> Result<f64> {
    if !target.is_finite() {
        return Err(Error::NonFinite("moment target"));
    }
    let centre = 0.5 * (a + b);
    let width = b - a;
    let (mut lo, mut hi) = match k {
        1 | 3 => (centre - 5.0 * width, centre + 5.0 * width),
        2 => (centre, centre + 5.0 * width),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "moment order must be 1, 2 or 3, got {k}"
            )))
        }
    };
    let f = |mu: f64| -> Result<f64> {
        Ok(trunc_normal_moment(&TruncNormalParams::new(mu, sigma, a, b)?, k)? - target)
    };
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::MomentUnattainable { target, order: k });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
