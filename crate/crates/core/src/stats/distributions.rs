//! Tail probabilities of the reference distributions.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, StudentsT};
use libm::erfc;

use super::clamp_p;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

pub fn normal_two_sided_p(z: f64) -> f64 {
    clamp_p(2.0 * normal_sf(z.abs()))
}

/// `P(T > t)` for Student's t with `df` degrees of freedom.
pub fn t_sf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    StudentsT::new(0.0, 1.0, df)
        .expect("df > 0 checked by callers")
        .sf(t)
}

pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    clamp_p(2.0 * t_sf(t.abs(), df))
}

/// `P(X > x)` for chi-square with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    clamp_p(ChiSquared::new(df).expect("df > 0 checked by callers").sf(x))
}

/// `P(F > f)` for the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    clamp_p(
        FisherSnedecor::new(d1, d2)
            .expect("df > 0 checked by callers")
            .sf(f),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        // t(10) two-sided p at 2.228138851986274 is 0.05
        assert!((t_two_sided_p(2.228138851986274, 10.0) - 0.05).abs() < 1e-9);
        // chi2(2) sf(x) = exp(-x/2)
        assert!((chi2_sf(3.0, 2.0) - (-1.5f64).exp()).abs() < 1e-12);
        // F(1, d) with f = t^2 matches the t two-sided p
        assert!((f_sf(2.228138851986274f64.powi(2), 1.0, 10.0) - 0.05).abs() < 1e-9);
    }
}
