//! Linearization of the phase system at the fixed point `(1, 1)`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrand::{ConeParams, Profile};
use crate::ode::phase_field;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationData {
    pub m: [[f64; 2]; 2],
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub mu: f64,
    /// `(1 + lambda_+, 1 + lambda_-)`.
    pub slopes: [f64; 2],
    /// Eigenvalues of `m` from a Schur decomposition, ascending.
    pub numeric_lambdas: [f64; 2],
    /// `z/w` slopes of numerically computed eigenvectors, matching `numeric_lambdas`.
    pub numeric_slopes: [f64; 2],
}

impl LinearizationData {
    /// Largest deviation between closed-form and numeric eigen data.
    pub fn max_deviation(&self) -> (f64, f64) {
        let dl = (self.numeric_lambdas[0] - self.lambda_minus)
            .abs()
            .max((self.numeric_lambdas[1] - self.lambda_plus).abs());
        let ds = (self.numeric_slopes[0] - self.slopes[1])
            .abs()
            .max((self.numeric_slopes[1] - self.slopes[0]).abs());
        (dl, ds)
    }
}

/// `M = [[-1, 1], [-kl/(phi''(1)(k+l)), -k-l]]`, its eigenvalues
/// `lambda_+- = -(k+l+1)/2 +- sqrt(((k+l-1)/2)^2 - kl/(phi''(1)(k+l)))`
/// and `mu = -(1 + lambda_+)`.
pub fn linearization(profile: &Profile, params: ConeParams) -> Result<LinearizationData> {
    let (k, l) = (params.k as f64, params.l as f64);
    let d2 = profile.eval(1.0, 2)?;
    if !(d2 > 0.0) {
        return Err(Error::DegenerateConvexity { s: 1.0, value: d2 });
    }
    let c = k * l / (d2 * (k + l));
    let half = (k + l - 1.0) / 2.0;
    let disc = half * half - c;
    if !(disc > 0.0) {
        return Err(Error::Discriminant(disc));
    }
    let root = disc.sqrt();
    let lambda_plus = -(k + l + 1.0) / 2.0 + root;
    let lambda_minus = -(k + l + 1.0) / 2.0 - root;
    let m = [[-1.0, 1.0], [-c, -k - l]];

    let mat = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
    let ev = mat
        .eigenvalues()
        .ok_or(Error::Discriminant(disc))?;
    let mut numeric_lambdas = [ev[0], ev[1]];
    numeric_lambdas.sort_by(f64::total_cmp);
    let numeric_slopes = numeric_lambdas.map(|lam| null_direction_slope(&mat, lam));

    Ok(LinearizationData {
        m,
        lambda_plus,
        lambda_minus,
        mu: -(1.0 + lambda_plus),
        slopes: [1.0 + lambda_plus, 1.0 + lambda_minus],
        numeric_lambdas,
        numeric_slopes,
    })
}

/// `z/w` slope of the right singular vector of `M - lambda I` with the
/// smallest singular value.
fn null_direction_slope(m: &Matrix2<f64>, lambda: f64) -> f64 {
    let shifted = m - Matrix2::identity() * lambda;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let i = if svd.singular_values[0] < svd.singular_values[1] { 0 } else { 1 };
    vt[(i, 1)] / vt[(i, 0)]
}

/// Jacobian of the phase field at `(1, 1)` by centered differences.
pub fn field_jacobian(profile: &Profile, params: ConeParams, h: f64) -> Result<[[f64; 2]; 2]> {
    let f = |w: f64, z: f64| phase_field(profile, params, (w, z));
    let (wp, wm) = (f(1.0 + h, 1.0)?, f(1.0 - h, 1.0)?);
    let (zp, zm) = (f(1.0, 1.0 + h)?, f(1.0, 1.0 - h)?);
    Ok([
        [(wp[0] - wm[0]) / (2.0 * h), (zp[0] - zm[0]) / (2.0 * h)],
        [(wp[1] - wm[1]) / (2.0 * h), (zp[1] - zm[1]) / (2.0 * h)],
    ])
}
