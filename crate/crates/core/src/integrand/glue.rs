//! Smooth gluing of `phi` to the reflection of `psi` near `s = 1`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrand::certify::trapping_quantity;
use crate::integrand::profile::Profile;
use crate::integrand::{ConeParams, JET_TOL};

/// Name of the cutoff family, recorded in reports.
pub const CUTOFF_NAME: &str = "exp-ratio smoothstep e(t)/(e(t)+e(1-t)), e(t)=exp(-1/t)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GluingParams {
    pub delta: f64,
}

impl GluingParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.25) {
            return Err(Error::InvalidParameter(format!("delta = {delta} must lie in (0, 1/4)")));
        }
        Ok(Self { delta })
    }

    /// Derivative jet of the cutoff `eta_delta` at `s >= 0`: equal to 1 on
    /// `[0, 1-2delta]` and to 0 on `[1-delta, inf)`.
    pub fn cutoff_jet(&self, s: f64) -> [f64; 4] {
        let d = self.delta;
        let t = (s - (1.0 - 2.0 * d)) / d;
        let g = smoothstep_jet(t);
        [1.0 - g[0], -g[1] / d, -g[2] / (d * d), -g[3] / (d * d * d)]
    }
}

/// `exp(-1/t)` and its first three derivatives, zero for `t <= 0`.
fn exp_jet(t: f64) -> [f64; 4] {
    if t <= 0.0 {
        return [0.0; 4];
    }
    let f = (-1.0 / t).exp();
    if f == 0.0 {
        return [0.0; 4];
    }
    let t2 = t * t;
    let t4 = t2 * t2;
    [f, f / t2, f * (1.0 - 2.0 * t) / t4, f * (1.0 - 6.0 * t + 6.0 * t2) / (t4 * t2)]
}

/// Monotone C-infinity step from 0 (t <= 0) to 1 (t >= 1).
pub(crate) fn smoothstep_jet(t: f64) -> [f64; 4] {
    if t <= 0.0 {
        return [0.0; 4];
    }
    if t >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let n = exp_jet(t);
    let m = exp_jet(1.0 - t);
    let h = [m[0], -m[1], m[2], -m[3]];
    let d = [n[0] + h[0], n[1] + h[1], n[2] + h[2], n[3] + h[3]];
    let g0 = n[0] / d[0];
    let g1 = (n[1] - g0 * d[1]) / d[0];
    let g2 = (n[2] - 2.0 * g1 * d[1] - g0 * d[2]) / d[0];
    let g3 = (n[3] - 3.0 * g2 * d[1] - 3.0 * g1 * d[2] - g0 * d[3]) / d[0];
    [g0, g1, g2, g3]
}

/// `eta * phi + (1 - eta) * phi_tilde`.
#[derive(Debug)]
pub struct GluedProfile {
    phi: Profile,
    phi_tilde: Profile,
    gluing: GluingParams,
}

impl GluedProfile {
    pub fn delta(&self) -> f64 {
        self.gluing.delta
    }

    pub fn gluing(&self) -> GluingParams {
        self.gluing
    }

    pub fn inner(&self) -> (&Profile, &Profile) {
        (&self.phi, &self.phi_tilde)
    }

    pub(crate) fn jet_nonneg(&self, s: f64) -> Result<[f64; 4]> {
        let d = self.gluing.delta;
        if s <= 1.0 - 2.0 * d {
            return self.phi.jet(s);
        }
        if s >= 1.0 - d {
            return self.phi_tilde.jet(s);
        }
        let e = self.gluing.cutoff_jet(s);
        let a = self.phi.jet(s)?;
        let b = self.phi_tilde.jet(s)?;
        // eta*a + (1-eta)*b = b + eta*(a-b)
        let diff = [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]];
        Ok([
            b[0] + e[0] * diff[0],
            b[1] + e[1] * diff[0] + e[0] * diff[1],
            b[2] + e[2] * diff[0] + 2.0 * e[1] * diff[1] + e[0] * diff[2],
            b[3] + e[3] * diff[0] + 3.0 * e[2] * diff[1] + 3.0 * e[1] * diff[2] + e[0] * diff[3],
        ])
    }
}

/// Difference of the value, first and second derivative of two profiles at `s = 1`.
pub fn jet_mismatch_at_one(a: &Profile, b: &Profile) -> Result<[f64; 3]> {
    let ja = a.jet(1.0)?;
    let jb = b.jet(1.0)?;
    Ok([ja[0] - jb[0], ja[1] - jb[1], ja[2] - jb[2]])
}

/// Blends `phi` into `phi_tilde` on `[1-2delta, 1-delta]`.
pub fn glue_profiles(phi: &Profile, phi_tilde: &Profile, gluing: GluingParams) -> Result<Profile> {
    let gluing = GluingParams::new(gluing.delta)?;
    let mismatch = jet_mismatch_at_one(phi, phi_tilde)?;
    if mismatch.iter().any(|m| m.abs() > JET_TOL) {
        return Err(Error::Incompatible { mismatch, tol: JET_TOL });
    }
    Ok(Profile::Glued(Arc::new(GluedProfile {
        phi: phi.clone(),
        phi_tilde: phi_tilde.clone(),
        gluing,
    })))
}

/// Max of `|E_kl(glued) - E_kl(phi)|` over the transition interval,
/// sampled at `samples` points.
pub fn trapping_deviation(
    phi: &Profile,
    glued: &Profile,
    params: ConeParams,
    delta: f64,
    samples: usize,
) -> Result<f64> {
    let lo = 1.0 - 2.0 * delta;
    let mut worst = 0.0f64;
    for i in 0..samples {
        let s = lo + delta * i as f64 / (samples - 1) as f64;
        let dev = (trapping_quantity(glued, params, s)? - trapping_quantity(phi, params, s)?).abs();
        worst = worst.max(dev);
    }
    Ok(worst)
}
