//! Profiles `phi`, `psi` and the integrand `F(u, v)` they define on the
//! reduced quarter plane `u = |x|`, `v = |y|`.

pub mod certify;
pub mod fourier;
pub mod glue;
pub mod profile;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use certify::{
    certify_profile, certify_profile_with, exponent_inequalities, legendre_slope,
    second_derivative_threshold, trapping_quantity, CertificationReport, CertifyOptions,
};
pub use fourier::{
    approximation_error, fourier_approximate, fourier_approximate_with, fourier_series, min_reduced_convexity, solve_corrector,
    FourierRecipe,
    FourierSeries,
};
pub use glue::{glue_profiles, jet_mismatch_at_one, GluingParams};
pub use profile::{power_profile, profile_eval, reflect_profile, PowerProfile, Profile, Side};

/// Tolerance on the value/first/second derivative mismatch across the diagonal.
pub const JET_TOL: f64 = 1e-8;

/// Tolerance on `l(p-1) = k(q-1)` when no gluing is requested.
pub const COMPAT_TOL: f64 = 1e-12;

/// Sphere dimensions of the two factors of the cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConeParams {
    pub k: u32,
    pub l: u32,
}

impl ConeParams {
    pub fn new(k: u32, l: u32) -> Result<Self> {
        if k < 1 || l < 1 {
            return Err(Error::InvalidParameter(format!("k = {k}, l = {l}: both must be >= 1")));
        }
        Ok(Self { k, l })
    }

    pub fn swapped(self) -> Self {
        Self { k: self.l, l: self.k }
    }

    /// Dimension `k + l + 2` of the ambient space.
    pub fn ambient_dim(self) -> u32 {
        self.k + self.l + 2
    }
}

/// `q = 1 + l(p-1)/k`.
pub fn compat_q(params: ConeParams, p: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 2")));
    }
    let q = 1.0 + params.l as f64 * (p - 1.0) / params.k as f64;
    if q <= 2.0 {
        return Err(Error::InvalidParameter(format!("compatible q = {q} must exceed 2")));
    }
    Ok(q)
}

/// Exponent pair for the standard suite: `p` itself when `compat_q(p) >= 6`,
/// otherwise the smallest even `p` with `compat_q(p) >= 6`.
pub fn suite_exponents(params: ConeParams, p: f64) -> Result<(f64, f64)> {
    let q = compat_q(params, p)?;
    if q >= 6.0 {
        return Ok((p, q));
    }
    // q >= 6 iff p >= 1 + 5k/l
    let need = 1.0 + 5.0 * params.k as f64 / params.l as f64;
    let p = 2.0 * (need / 2.0).ceil();
    Ok((p, compat_q(params, p)?))
}

/// Quadratic coefficient for the `psi` side that keeps the second derivative
/// across the diagonal continuous when both sides carry a quadratic term:
/// `b_psi = b_phi (p-2)/(q-2)`. Equal to `b_phi` when `p = q`.
pub fn matched_b_psi(p: f64, q: f64, b_phi: f64) -> f64 {
    if p == q {
        b_phi
    } else {
        b_phi * (p - 2.0) / (q - 2.0)
    }
}

/// Construction parameters, sufficient to rebuild an [`Integrand`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrandRecipe {
    pub variant: String,
    pub k: u32,
    pub l: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier: Option<FourierRecipe>,
}

impl IntegrandRecipe {
    fn bare(variant: &str, params: ConeParams) -> Self {
        Self {
            variant: variant.to_string(),
            k: params.k,
            l: params.l,
            p: None,
            q: None,
            b_phi: None,
            b_psi: None,
            delta: None,
            fourier: None,
        }
    }
}

/// `F(u, v) = v phi(u/v)` for `v >= u`, `u psi(v/u)` for `u > v`.
#[derive(Debug, Clone)]
pub struct Integrand {
    pub params: ConeParams,
    pub phi: Profile,
    pub psi: Profile,
    /// `phi - reflect(psi)` at `s = 1` for orders 0..=2.
    pub jet_mismatch: [f64; 3],
    pub recipe: IntegrandRecipe,
}

impl Integrand {
    pub(crate) fn assemble(params: ConeParams, phi: Profile, psi: Profile, recipe: IntegrandRecipe) -> Result<Self> {
        let jet_mismatch = jet_mismatch_at_one(&phi, &reflect_profile(&psi))?;
        Ok(Self { params, phi, psi, jet_mismatch, recipe })
    }

    /// The area integrand `sqrt(u^2 + v^2)`.
    pub fn area(params: ConeParams) -> Self {
        Self {
            params,
            phi: Profile::Area,
            psi: Profile::Area,
            jet_mismatch: [0.0; 3],
            recipe: IntegrandRecipe::bare("area", params),
        }
    }

    /// Profile and cone parameters of the requested side; the `Psi` side
    /// comes with `k` and `l` exchanged.
    pub fn side(&self, side: Side) -> (&Profile, ConeParams) {
        match side {
            Side::Phi => (&self.phi, self.params),
            Side::Psi => (&self.psi, self.params.swapped()),
        }
    }

    /// Rebuilds an integrand from its recipe.
    pub fn from_recipe(recipe: &IntegrandRecipe) -> Result<Self> {
        let params = ConeParams::new(recipe.k, recipe.l)?;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Parse(format!("recipe variant {} needs field {name}", recipe.variant)))
        };
        match recipe.variant.as_str() {
            "area" => Ok(Self::area(params)),
            "power" | "glued" => {
                let p = need(recipe.p, "p")?;
                let q = match recipe.q {
                    Some(q) => q,
                    None => compat_q(params, p)?,
                };
                let b_phi = recipe.b_phi.unwrap_or(0.0);
                let b_psi = recipe.b_psi.unwrap_or_else(|| matched_b_psi(p, q, b_phi));
                let gluing = match recipe.variant.as_str() {
                    "glued" => Some(GluingParams::new(need(recipe.delta, "delta")?)?),
                    _ => None,
                };
                build_integrand(params, p, q, b_phi, b_psi, gluing)
            }
            "fourier" => {
                let f = recipe
                    .fourier
                    .as_ref()
                    .ok_or_else(|| Error::Parse("fourier recipe without coefficients".into()))?;
                let mut series = FourierSeries {
                    n: f.n,
                    coeffs: f.coeffs.clone(),
                    correctors: f.correctors,
                    min_reduced_convexity: f64::NAN,
                };
                series.min_reduced_convexity = fourier::min_reduced_convexity(&series).0;
                let series = Arc::new(series);
                Self::assemble(
                    params,
                    Profile::Fourier { series: series.clone(), side: Side::Phi },
                    Profile::Fourier { series, side: Side::Psi },
                    recipe.clone(),
                )
            }
            other => Err(Error::Parse(format!("unknown integrand variant {other:?}"))),
        }
    }
}

/// Power integrand with `phi = a + b_phi s^2 + c|s|^p` and `psi` of exponent
/// `q`, optionally smoothed across the diagonal by gluing `phi` to the
/// reflection of `psi`.
pub fn build_integrand(
    params: ConeParams,
    p: f64,
    q: f64,
    b_phi: f64,
    b_psi: f64,
    gluing: Option<GluingParams>,
) -> Result<Integrand> {
    let phi = power_profile(params, Side::Phi, p, b_phi)?;
    let psi = power_profile(params, Side::Psi, q, b_psi)?;
    let (k, l) = (params.k as f64, params.l as f64);
    let defect = l * (p - 1.0) - k * (q - 1.0);
    if gluing.is_none() && defect.abs() > COMPAT_TOL * (1.0 + l * p) {
        let mismatch = jet_mismatch_at_one(&phi, &reflect_profile(&psi))?;
        return Err(Error::Incompatible { mismatch, tol: JET_TOL });
    }
    let mut recipe = IntegrandRecipe::bare("power", params);
    recipe.p = Some(p);
    recipe.q = Some(q);
    recipe.b_phi = Some(b_phi);
    recipe.b_psi = Some(b_psi);
    let phi = match gluing {
        Some(g) => {
            recipe.variant = "glued".into();
            recipe.delta = Some(g.delta);
            glue_profiles(&phi, &reflect_profile(&psi), g)?
        }
        None => phi,
    };
    let it = Integrand::assemble(params, phi, psi, recipe)?;
    if it.jet_mismatch.iter().any(|m| m.abs() > JET_TOL) {
        return Err(Error::Incompatible { mismatch: it.jet_mismatch, tol: JET_TOL });
    }
    Ok(it)
}

/// `F(u, v)` and its gradient. Signed arguments are allowed: `F` depends
/// on `|u|`, `|v|` only.
pub fn phi_full(integrand: &Integrand, u: f64, v: f64) -> Result<(f64, [f64; 2])> {
    let (f, g, _) = phi_full_hessian(integrand, u, v)?;
    Ok((f, g))
}

/// `F(u, v)`, its gradient and its Hessian.
pub fn phi_full_hessian(integrand: &Integrand, u: f64, v: f64) -> Result<(f64, [f64; 2], [[f64; 2]; 2])> {
    if u == 0.0 && v == 0.0 {
        return Err(Error::InvalidParameter("F is not differentiable at the origin".into()));
    }
    let (au, av) = (u.abs(), v.abs());
    let (su, sv) = (if u < 0.0 { -1.0 } else { 1.0 }, if v < 0.0 { -1.0 } else { 1.0 });
    let (f, g, h) = if av >= au {
        let s = au / av;
        let j = integrand.phi.jet(s)?;
        let c = j[2] / av;
        (av * j[0], [j[1], j[0] - s * j[1]], [[c, -s * c], [-s * c, s * s * c]])
    } else {
        let s = av / au;
        let j = integrand.psi.jet(s)?;
        let c = j[2] / au;
        (au * j[0], [j[0] - s * j[1], j[1]], [[s * s * c, -s * c], [-s * c, c]])
    };
    let grad = [su * g[0], sv * g[1]];
    let hess = [[h[0][0], su * sv * h[0][1]], [su * sv * h[1][0], h[1][1]]];
    Ok((f, grad, hess))
}

/// Certification of both sides: `phi` against `(k, l)` and `psi` against `(l, k)`.
pub fn certify_integrand(integrand: &Integrand, opts: &CertifyOptions) -> [CertificationReport; 2] {
    [
        certify_profile_with(&integrand.phi, integrand.params, opts),
        certify_profile_with(&integrand.psi, integrand.params.swapped(), opts),
    ]
}
