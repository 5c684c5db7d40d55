//! One-variable even convex profiles and their derivative jets.
//!
//! Every variant is evaluated on `|s|`; odd-order derivatives pick up the
//! sign of `s`, so evenness holds by construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrand::fourier::FourierSeries;
use crate::integrand::glue::GluedProfile;
use crate::integrand::ConeParams;

/// Which half of the integrand a profile describes: `Phi` is used where
/// `|y| >= |x|`, `Psi` where `|x| > |y|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Phi,
    Psi,
}

impl Side {
    /// Target slope at `s = 1` for this side.
    pub fn slope_at_one(self, params: ConeParams) -> f64 {
        let (k, l) = (params.k as f64, params.l as f64);
        match self {
            Side::Phi => l / (k + l),
            Side::Psi => k / (k + l),
        }
    }
}

/// `a + b s^2 + c |s|^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerProfile {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PowerProfile {
    fn jet(&self, s: f64) -> [f64; 4] {
        let p = self.p;
        let sp3 = s.powf(p - 3.0);
        let sp2 = sp3 * s;
        let sp1 = sp2 * s;
        let sp = sp1 * s;
        // 0^(p-3) with p < 3 is infinite; only the third derivative sees it
        let sp2 = if s == 0.0 { 0.0 } else { sp2 };
        let sp1 = if s == 0.0 { 0.0 } else { sp1 };
        let sp = if s == 0.0 { 0.0 } else { sp };
        [
            self.a + self.b * s * s + self.c * sp,
            2.0 * self.b * s + self.c * p * sp1,
            2.0 * self.b + self.c * p * (p - 1.0) * sp2,
            self.c * p * (p - 1.0) * (p - 2.0) * sp3,
        ]
    }
}

/// A profile given by an arbitrary closure; derivatives come from central
/// differences.
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CustomProfile {
    const H: f64 = 1e-3;

    fn jet(&self, s: f64) -> [f64; 4] {
        let h = Self::H;
        let f = |x: f64| (self.f)(x);
        let (m2, m1, z, p1, p2) = (f(s - 2.0 * h), f(s - h), f(s), f(s + h), f(s + 2.0 * h));
        let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        let d2 = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h);
        let (m3, p3) = (f(s - 3.0 * h), f(s + 3.0 * h));
        let d3 = (-p3 + 8.0 * p2 - 13.0 * p1 + 13.0 * m1 - 8.0 * m2 + m3) / (8.0 * h * h * h);
        [z, d1, d2, d3]
    }
}

/// Even convex profile `phi` (or `psi`) of one variable.
#[derive(Clone)]
pub enum Profile {
    Power(PowerProfile),
    /// `sqrt(1 + s^2)`, the profile of the area integrand.
    Area,
    /// `s -> s * inner(1/s)`, defined for `|s| > eps`.
    Reflected { inner: Arc<Profile>, eps: f64 },
    Glued(Arc<GluedProfile>),
    /// Restriction of a one-homogeneous trigonometric polynomial to the
    /// tangent line `v = 1` (`Phi`) or `u = 1` (`Psi`).
    Fourier { series: Arc<FourierSeries>, side: Side },
    Custom(CustomProfile),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Profile({})", self.label())
    }
}

/// Smallest `|s|` at which a reflected profile may be evaluated.
pub const REFLECT_EPS: f64 = 1e-3;

impl Profile {
    pub fn area() -> Profile {
        Profile::Area
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Profile {
        Profile::Custom(CustomProfile { name: name.into(), f: Arc::new(f) })
    }

    /// Variant tag used in reports and serialized documents.
    pub fn variant(&self) -> &'static str {
        match self {
            Profile::Power(_) => "power",
            Profile::Area => "area",
            Profile::Reflected { .. } => "reflected",
            Profile::Glued(_) => "glued",
            Profile::Fourier { .. } => "fourier",
            Profile::Custom(_) => "custom",
        }
    }

    pub fn label(&self) -> String {
        match self {
            Profile::Power(pp) => format!("power(p={}, a={}, b={}, c={})", pp.p, pp.a, pp.b, pp.c),
            Profile::Area => "area".to_string(),
            Profile::Reflected { inner, .. } => format!("reflected({})", inner.label()),
            Profile::Glued(g) => format!("glued(delta={})", g.delta()),
            Profile::Fourier { series, side } => format!("fourier(N={}, {:?})", series.n, side),
            Profile::Custom(c) => format!("custom({})", c.name),
        }
    }

    pub fn as_power(&self) -> Option<&PowerProfile> {
        match self {
            Profile::Power(pp) => Some(pp),
            _ => None,
        }
    }

    /// Value and derivatives of orders 0..=3 at `s`.
    pub fn jet(&self, s: f64) -> Result<[f64; 4]> {
        if !s.is_finite() {
            return Err(Error::OutOfDomain { s, reason: "non-finite argument" });
        }
        let x = s.abs();
        let mut j = self.jet_nonneg(x)?;
        if s < 0.0 {
            j[1] = -j[1];
            j[3] = -j[3];
        }
        Ok(j)
    }

    /// The `order`-th derivative at `s`, `order` in 0..=3.
    pub fn eval(&self, s: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::InvalidParameter(format!("derivative order {order} > 3")));
        }
        Ok(self.jet(s)?[order])
    }

    fn jet_nonneg(&self, s: f64) -> Result<[f64; 4]> {
        match self {
            Profile::Power(pp) => Ok(pp.jet(s)),
            Profile::Area => {
                let r2 = 1.0 + s * s;
                let r = r2.sqrt();
                let r3 = r2 * r;
                Ok([r, s / r, 1.0 / r3, -3.0 * s / (r3 * r2)])
            }
            Profile::Reflected { inner, eps } => {
                if s <= *eps {
                    return Err(Error::OutOfDomain { s, reason: "reflection is singular near 0" });
                }
                let u = 1.0 / s;
                let [p0, p1, p2, p3] = inner.jet(u)?;
                let u2 = u * u;
                let u3 = u2 * u;
                Ok([s * p0, p0 - u * p1, u3 * p2, -3.0 * u2 * u2 * p2 - u3 * u2 * p3])
            }
            Profile::Glued(g) => g.jet_nonneg(s),
            Profile::Fourier { series, side } => Ok(series.restricted_jet(*side, s)),
            Profile::Custom(c) => Ok(c.jet(s)),
        }
    }
}

/// Power profile for one side of the integrand: `a + b s^2 + c |s|^p` with
/// `a`, `c` fixed by `phi(1) = 1` and `phi'(1) = r`, where `r = l/(k+l)`
/// for the `Phi` side and `k/(k+l)` for the `Psi` side.
pub fn power_profile(params: ConeParams, side: Side, p: f64, b: f64) -> Result<Profile> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 2")));
    }
    if !(b >= 0.0) {
        return Err(Error::InvalidParameter(format!("quadratic coefficient b = {b} must be >= 0")));
    }
    let r = side.slope_at_one(params);
    let c = (r - 2.0 * b) / p;
    let a = 1.0 - b - c;
    if c <= 0.0 || a <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "b = {b} outside the admissible interval (a = {a}, c = {c})"
        )));
    }
    Ok(Profile::Power(PowerProfile { p, a, b, c }))
}

/// Evaluates the `order`-th derivative of `profile` at `s`.
pub fn profile_eval(profile: &Profile, s: f64, order: usize) -> Result<f64> {
    profile.eval(s, order)
}

/// `s -> s * profile(1/s)`, with derivatives from the chain rule.
pub fn reflect_profile(profile: &Profile) -> Profile {
    Profile::Reflected { inner: Arc::new(profile.clone()), eps: REFLECT_EPS }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p11() -> ConeParams {
        ConeParams::new(1, 1).unwrap()
    }

    #[test]
    fn power_coefficients_match_closed_forms() {
        let Profile::Power(pp) = power_profile(p11(), Side::Phi, 6.0, 0.0).unwrap() else {
            unreachable!()
        };
        assert!((pp.a - 11.0 / 12.0).abs() < 1e-15);
        assert!((pp.c - 1.0 / 12.0).abs() < 1e-15);
        let phi = Profile::Power(pp);
        assert!((phi.eval(1.0, 2).unwrap() - 2.5).abs() < 1e-14);

        let phi = power_profile(p11(), Side::Phi, 6.0, 0.01).unwrap();
        let pp = phi.as_power().unwrap();
        assert!((pp.a - 0.91).abs() < 1e-15);
        assert!((pp.c - 0.08).abs() < 1e-15);
        assert!((phi.eval(1.0, 2).unwrap() - 2.42).abs() < 1e-13);
        assert_eq!(phi.eval(0.0, 1).unwrap(), 0.0);
        assert!((phi.eval(1.0, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((phi.eval(1.0, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn power_rejects_bad_parameters() {
        assert!(power_profile(p11(), Side::Phi, 2.0, 0.01).is_err());
        assert!(power_profile(p11(), Side::Phi, 6.0, 0.25).is_err());
        assert!(power_profile(p11(), Side::Phi, 6.0, -0.1).is_err());
        // b = 0.1 is constructible; certification rejects it later
        let phi = power_profile(p11(), Side::Phi, 6.0, 0.1).unwrap();
        assert!((phi.eval(1.0, 2).unwrap() - 1.7).abs() < 1e-13);
    }

    #[test]
    fn area_second_derivative_at_one() {
        let v = Profile::Area.eval(1.0, 2).unwrap();
        assert!((v - 2f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn reflection_of_area_is_area() {
        let r = reflect_profile(&Profile::Area);
        for &s in &[0.1, 0.5, 0.9, 1.0, 1.7] {
            let a = Profile::Area.jet(s).unwrap();
            let b = r.jet(s).unwrap();
            for o in 0..4 {
                assert!((a[o] - b[o]).abs() < 1e-12, "order {o} at {s}");
            }
        }
        assert!(r.eval(1e-4, 0).is_err());
    }

    #[test]
    fn reflected_power_closed_form() {
        let psi = power_profile(p11(), Side::Psi, 6.0, 0.0).unwrap();
        let r = reflect_profile(&psi);
        for &s in &[0.3f64, 0.7, 1.0] {
            let expect = s * 11.0 / 12.0 + s.powi(-5) / 12.0;
            assert!((r.eval(s, 0).unwrap() - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn custom_profile_derivatives() {
        let c = Profile::custom("cosh", |s: f64| s.cosh());
        let j = c.jet(0.4).unwrap();
        assert!((j[1] - 0.4f64.sinh()).abs() < 1e-10);
        assert!((j[2] - 0.4f64.cosh()).abs() < 1e-8);
        assert!((j[3] - 0.4f64.sinh()).abs() < 1e-5);
    }

    #[test]
    fn odd_derivatives_flip_sign() {
        let phi = power_profile(p11(), Side::Phi, 6.0, 0.01).unwrap();
        let a = phi.jet(0.3).unwrap();
        let b = phi.jet(-0.3).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], -b[1]);
        assert_eq!(a[2], b[2]);
        assert_eq!(a[3], -b[3]);
    }
}
