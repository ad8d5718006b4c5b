use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Upper tail probability of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidArgument("chi-square df must be positive".into()));
    }
    if x.is_nan() {
        return Err(Error::NonFinite("chi-square statistic"));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_gamma_half_int(df: usize) -> f64 {
        // Γ(df/2) for small integer df by recursion from Γ(1/2) and Γ(1).
        let mut g = if df.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
        let mut a = if df.is_multiple_of(2) { 1.0 } else { 0.5 };
        while a < df as f64 / 2.0 {
            g *= a;
            a += 1.0;
        }
        g.ln()
    }

    /// Composite Simpson integration of the chi-square density from x to a far cutoff.
    fn quadrature_sf(x: f64, df: usize) -> f64 {
        let k = df as f64 / 2.0;
        let lg = log_gamma_half_int(df);
        let pdf = |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            ((k - 1.0) * t.ln() - t / 2.0 - k * 2f64.ln() - lg).exp()
        };
        let upper = x + 200.0;
        let n = 200_000;
        let h = (upper - x) / n as f64;
        let mut s = pdf(x) + pdf(upper);
        for i in 1..n {
            let t = x + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(t);
        }
        s * h / 3.0
    }

    #[test]
    fn boundary_and_tail() {
        assert_eq!(chi_square_sf(0.0, 4).unwrap(), 1.0);
        assert!(chi_square_sf(1e9, 1).unwrap() < 1e-300);
        assert!(chi_square_sf(1.0, 0).is_err());
    }

    #[test]
    fn critical_value_df4() {
        let want = quadrature_sf(9.4877, 4);
        assert!((want - 0.05).abs() < 1e-3);
        let got = chi_square_sf(9.4877, 4).unwrap();
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn matches_quadrature_across_df() {
        for df in [2usize, 3, 8, 16] {
            for &x in &[0.5, 3.0, 10.0, 25.0] {
                let got = chi_square_sf(x, df).unwrap();
                let want = quadrature_sf(x, df);
                assert!((got - want).abs() < 1e-7, "df={df} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn decreasing_in_x() {
        let mut prev = 1.0;
        for i in 1..200 {
            let v = chi_square_sf(i as f64 * 0.25, 8).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }
}
