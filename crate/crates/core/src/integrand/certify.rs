//! Checks of the analytic hypotheses a profile must satisfy before its leaf
//! can be built: the one-jet at `s = 1`, the trapping inequality
//! `E_kl(phi)(s) >= kappa (1 - s)`, the second-derivative threshold, uniform
//! convexity and `phi - s phi' > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::integrand::profile::Profile;
use crate::integrand::ConeParams;
use crate::numerics::monotone_root;

/// Tolerance on `phi(1) = 1`, `phi'(1) = l/(k+l)`.
pub const ONE_JET_TOL: f64 = 1e-9;

/// Half-width beyond `[-1, 1]` on which `legendre_slope` searches.
pub const LEGENDRE_MARGIN: f64 = 0.5;

/// The trapping quantity
/// `l (k+l-1)/(k+l+1) phi - (k + (l - 2(k+l)/(k+l+1)) s) phi' - ((k+l+1)/2 - s)(1-s) phi''`.
pub fn trapping_quantity(profile: &Profile, params: ConeParams, s: f64) -> Result<f64> {
    let j = profile.jet(s)?;
    Ok(trapping_from_jet(params, s, &j))
}

pub(crate) fn trapping_from_jet(params: ConeParams, s: f64, j: &[f64; 4]) -> f64 {
    let (k, l) = (params.k as f64, params.l as f64);
    let n1 = k + l + 1.0;
    l * (k + l - 1.0) / n1 * j[0]
        - (k + (l - 2.0 * (k + l) / n1) * s) * j[1]
        - (n1 / 2.0 - s) * (1.0 - s) * j[2]
}

/// `4kl / ((k+l)(k+l-1)^2)`, the lower bound `phi''(1)` must exceed.
pub fn second_derivative_threshold(params: ConeParams) -> f64 {
    let (k, l) = (params.k as f64, params.l as f64);
    4.0 * k * l / ((k + l) * (k + l - 1.0).powi(2))
}

/// Sufficient conditions on the exponent of a raw power profile:
/// `p - 1 > 4k/(k+l-1)^2` and the quadratic inequality in `p - 1`.
pub fn exponent_inequalities(params: ConeParams, p: f64) -> (bool, bool) {
    let (k, l) = (params.k as f64, params.l as f64);
    let m = p - 1.0;
    let first = m > 4.0 * k / (k + l - 1.0).powi(2);
    let lin = (k + 2.0 * l + 2.0) / (k + l) + 4.0 / ((k + l) * (k + l - 1.0));
    let cst = 4.0 * k / ((k + l) * (k + l - 1.0));
    let second = m * m - lin * m + cst >= 0.0;
    (first, second)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub one_jet_ok: bool,
    pub kappa_estimate: f64,
    pub second_deriv_margin: f64,
    pub convexity_margin: f64,
    pub monotonicity_margin: f64,
    /// Only meaningful for power profiles; `None` otherwise.
    pub p_inequalities_ok: Option<bool>,
    pub sample_count: usize,
    pub verdict: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    pub samples: usize,
    /// Step of the one-sided difference giving `-E'(1)`.
    pub edge_step: f64,
    pub exec: Execution,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { samples: 10_001, edge_step: 1e-4, exec: Execution::Sequential }
    }
}

pub fn certify_profile(profile: &Profile, params: ConeParams) -> CertificationReport {
    certify_profile_with(profile, params, &CertifyOptions::default())
}

pub fn certify_profile_with(
    profile: &Profile,
    params: ConeParams,
    opts: &CertifyOptions,
) -> CertificationReport {
    let n = opts.samples.max(3);
    let target_slope = params.l as f64 / (params.k + params.l) as f64;

    let one_jet_ok = match profile.jet(1.0) {
        Ok(j) => (j[0] - 1.0).abs() <= ONE_JET_TOL && (j[1] - target_slope).abs() <= ONE_JET_TOL,
        Err(_) => false,
    };
    let second_deriv_margin = profile
        .eval(1.0, 2)
        .map(|v| v - second_derivative_threshold(params))
        .unwrap_or(f64::NAN);

    // (E/(1-s), phi'', phi - s phi') per sample; evaluation failures poison the minimum
    let rows = exec::map_range(opts.exec, n - 1, |i| {
        let s = i as f64 / (n - 1) as f64;
        match profile.jet(s) {
            Ok(j) => (trapping_from_jet(params, s, &j) / (1.0 - s), j[2], j[0] - s * j[1]),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        }
    });
    let h = opts.edge_step;
    let edge = (|| -> Result<(f64, [f64; 4])> {
        let e0 = trapping_quantity(profile, params, 1.0)?;
        let e1 = trapping_quantity(profile, params, 1.0 - h)?;
        let e2 = trapping_quantity(profile, params, 1.0 - 2.0 * h)?;
        Ok(((4.0 * e1 - e2 - 3.0 * e0) / (2.0 * h), profile.jet(1.0)?))
    })();
    let (edge_ratio, edge_jet) = edge.unwrap_or((f64::NAN, [f64::NAN; 4]));

    let nan_min = |acc: f64, v: f64| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.min(v) };
    let kappa_estimate = rows.iter().map(|r| r.0).fold(edge_ratio, nan_min);
    let convexity_margin = rows.iter().map(|r| r.1).fold(edge_jet[2], nan_min);
    let monotonicity_margin = rows.iter().map(|r| r.2).fold(edge_jet[0] - edge_jet[1], nan_min);

    let p_inequalities_ok = profile.as_power().map(|pp| {
        let (a, b) = exponent_inequalities(params, pp.p);
        a && b
    });

    let verdict = one_jet_ok
        && kappa_estimate > 0.0
        && second_deriv_margin > 0.0
        && convexity_margin > 0.0
        && monotonicity_margin > 0.0;

    CertificationReport {
        one_jet_ok,
        kappa_estimate,
        second_deriv_margin,
        convexity_margin,
        monotonicity_margin,
        p_inequalities_ok,
        sample_count: n,
        verdict,
    }
}

/// The point `s` with `phi'(s) = xi`, i.e. the derivative of the Legendre
/// transform of `phi` at `xi`.
pub fn legendre_slope(profile: &Profile, xi: f64) -> Result<f64> {
    if xi == 0.0 {
        return Ok(0.0);
    }
    let edge = 1.0 + LEGENDRE_MARGIN;
    let hi = profile.eval(edge, 1)?;
    let lo = -hi;
    if !(xi > lo && xi < hi) {
        return Err(Error::OutOfRange { value: xi, lo, hi });
    }
    // odd symmetry: solve on the positive half
    let target = xi.abs();
    let s = monotone_root(0.0, edge, 1e-16, |s| {
        let j = profile.jet(s)?;
        Ok((j[1] - target, j[2]))
    })?;
    Ok(s.copysign(xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::profile::{power_profile, Side};

    fn p11() -> ConeParams {
        ConeParams::new(1, 1).unwrap()
    }

    #[test]
    fn trapping_quantity_vanishes_at_one_under_one_jet() {
        for (k, l) in [(1, 1), (1, 2), (2, 3), (3, 1)] {
            let params = ConeParams::new(k, l).unwrap();
            let phi = power_profile(params, Side::Phi, 7.0, 0.01).unwrap();
            assert!(trapping_quantity(&phi, params, 1.0).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn trapping_quantity_hand_value_at_zero() {
        let phi = power_profile(p11(), Side::Phi, 6.0, 0.01).unwrap();
        let e = trapping_quantity(&phi, p11(), 0.0).unwrap();
        assert!((e - (0.91 / 3.0 - 1.5 * 0.02)).abs() < 1e-15);
    }

    #[test]
    fn area_profile_fails_one_jet() {
        // phi'(1)/phi(1) = 1/2 = l/(k+l), so E vanishes at 1 even though phi(1) = sqrt 2
        let e = trapping_quantity(&Profile::Area, p11(), 1.0).unwrap();
        assert!(e.abs() < 1e-15);
        assert!((Profile::Area.eval(1.0, 1).unwrap() - 0.5).abs() > 0.2);
        assert!(!certify_profile(&Profile::Area, p11()).one_jet_ok);
    }

    #[test]
    fn certification_of_default_profile() {
        let phi = power_profile(p11(), Side::Phi, 6.0, 0.01).unwrap();
        let r = certify_profile(&phi, p11());
        assert!(r.one_jet_ok);
        assert!((r.second_deriv_margin - 0.42).abs() < 1e-13);
        assert!(r.kappa_estimate > 0.0);
        assert!((r.convexity_margin - 0.02).abs() < 1e-15);
        assert!(r.monotonicity_margin > 0.0);
        assert_eq!(r.p_inequalities_ok, Some(true));
        assert_eq!(r.sample_count, 10_001);
        assert!(r.verdict);
    }

    #[test]
    fn large_quadratic_term_breaks_second_derivative_bound() {
        let phi = power_profile(p11(), Side::Phi, 6.0, 0.1).unwrap();
        let r = certify_profile(&phi, p11());
        assert!((r.second_deriv_margin - (1.7 - 2.0)).abs() < 1e-13);
        assert!(!r.verdict);
    }

    #[test]
    fn exponent_inequality_anchors() {
        assert_eq!(exponent_inequalities(p11(), 6.0), (true, true));
        assert!(!exponent_inequalities(p11(), 5.0).0);
        // (p-1)^2 - 4.5 (p-1) + 2 at p = 6
        let m: f64 = 5.0;
        assert!((m * m - 4.5 * m + 2.0 - 4.5).abs() < 1e-15);
    }

    #[test]
    fn legendre_slope_examples() {
        assert!((legendre_slope(&Profile::Area, 0.6).unwrap() - 0.75).abs() < 1e-14);
        let phi = power_profile(p11(), Side::Phi, 6.0, 0.01).unwrap();
        assert_eq!(legendre_slope(&phi, 0.0).unwrap(), 0.0);
        assert!((legendre_slope(&phi, 0.5).unwrap() - 1.0).abs() < 1e-14);
        assert!((legendre_slope(&phi, -0.5).unwrap() + 1.0).abs() < 1e-14);
        assert!(matches!(legendre_slope(&Profile::Area, 0.9), Err(Error::OutOfRange { .. })));
        for &xi in &[1e-6, 0.01, 0.3, 1.2] {
            let s = legendre_slope(&phi, xi).unwrap();
            assert!((phi.eval(s, 1).unwrap() - xi).abs() <= 1e-12);
        }
    }
}
