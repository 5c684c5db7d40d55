//! Trigonometric-polynomial approximation of an integrand on the unit circle.
//!
//! The integrand restricted to the circle, `f(theta) = F(cos theta, sin theta)`,
//! is even and pi-periodic, so it expands in `cos(2 n theta)`. The partial sum
//! up to `cos(N theta)` is corrected by `a + b cos 2theta + c cos 4theta` so
//! that it agrees with `f` to second order at `theta = pi/4`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrand::profile::{Profile, Side};
use crate::integrand::{phi_full_hessian, Integrand, IntegrandRecipe};
use crate::numerics::composite_gauss;

/// Gauss nodes per panel; there are `n` panels, so `16 n` nodes in total.
pub const NODES_PER_PANEL: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    /// Highest frequency of the partial sum (`cos(n theta)`).
    pub n: usize,
    /// Coefficient of `cos(2 m theta)`, `m = 0..=n/2`.
    pub coeffs: Vec<f64>,
    /// `(a, b, c)` of the corrector `a + b cos 2theta + c cos 4theta`.
    pub correctors: [f64; 3],
    /// Minimum of `f + f''` over the circle ("reduced-plane convexity").
    pub min_reduced_convexity: f64,
}

impl FourierSeries {
    /// `f` and its first three theta-derivatives, correctors included.
    pub fn theta_jet(&self, theta: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        let [a, b, c] = self.correctors;
        let terms = self.coeffs.iter().enumerate().map(|(m, &am)| (2 * m, am));
        let extra = [(0usize, a), (2, b), (4, c)];
        for (freq, coef) in terms.chain(extra) {
            let w = freq as f64;
            let (sn, cs) = (w * theta).sin_cos();
            out[0] += coef * cs;
            out[1] -= coef * w * sn;
            out[2] -= coef * w * w * cs;
            out[3] += coef * w * w * w * sn;
        }
        out
    }

    /// Jet of `s -> T(s, 1)` (`Phi`) or `s -> T(1, s)` (`Psi`) for `s >= 0`,
    /// where `T` is the one-homogeneous extension.
    pub fn restricted_jet(&self, side: Side, s: f64) -> [f64; 4] {
        let r = (1.0 + s * s).sqrt();
        let r3 = r * r * r;
        let r5 = r3 * r * r;
        let (theta, cos_t, sin_t) = match side {
            Side::Phi => (1f64.atan2(s), s / r, 1.0 / r),
            Side::Psi => (s.atan2(1.0), 1.0 / r, s / r),
        };
        let [f0, f1, f2, f3] = self.theta_jet(theta);
        let curv = f0 + f2;
        match side {
            Side::Phi => [
                r * f0,
                f0 * cos_t - f1 * sin_t,
                curv / r3,
                -(f1 + f3) / r5 - 3.0 * s * curv / r5,
            ],
            Side::Psi => [
                r * f0,
                f0 * sin_t + f1 * cos_t,
                curv / r3,
                (f1 + f3) / r5 - 3.0 * s * curv / r5,
            ],
        }
    }
}

/// Corrector coefficients `(a, b, c)` cancelling a mismatch `(dv, d1, d2)` in
/// value, first and second theta-derivative at `pi/4`.
///
/// At `pi/4` the basis `1, cos 2theta, cos 4theta` has values `(1, 0, -1)`,
/// first derivatives `(0, -2, 0)` and second derivatives `(0, 0, 16)`.
pub fn solve_corrector(mismatch: [f64; 3]) -> [f64; 3] {
    let c = mismatch[2] / 16.0;
    let b = -mismatch[1] / 2.0;
    let a = mismatch[0] + c;
    [a, b, c]
}

/// `f(theta) = F(cos theta, sin theta)` and its first two derivatives.
pub(crate) fn circle_jet(integrand: &Integrand, theta: f64) -> Result<[f64; 3]> {
    let (sn, cs) = if theta == FRAC_PI_4 { (FRAC_1_SQRT_2, FRAC_1_SQRT_2) } else { theta.sin_cos() };
    let (v, g, h) = phi_full_hessian(integrand, cs, sn)?;
    let d1 = -sn * g[0] + cs * g[1];
    let d2 = sn * sn * h[0][0] - 2.0 * sn * cs * h[0][1] + cs * cs * h[1][1] - cs * g[0] - sn * g[1];
    Ok([v, d1, d2])
}

/// Replaces the integrand by its corrected Fourier partial sum of order `n`.
pub fn fourier_approximate(integrand: &Integrand, n: usize) -> Result<Integrand> {
    fourier_approximate_with(integrand, n, n)
}

/// As [`fourier_approximate`], with `panels` Gauss panels on `[0, pi/2]`.
pub fn fourier_approximate_with(integrand: &Integrand, n: usize, panels: usize) -> Result<Integrand> {
    let series = fourier_series(integrand, n, panels)?;
    if !(series.min_reduced_convexity > 0.0) {
        let (min_value, theta) = min_reduced_convexity(&series);
        return Err(Error::NonConvexApproximation { min_value, theta });
    }
    let series = Arc::new(series);
    let phi = Profile::Fourier { series: series.clone(), side: Side::Phi };
    let psi = Profile::Fourier { series: series.clone(), side: Side::Psi };
    let recipe = IntegrandRecipe {
        variant: "fourier".into(),
        fourier: Some(FourierRecipe {
            n,
            coeffs: series.coeffs.clone(),
            correctors: series.correctors,
        }),
        ..integrand.recipe.clone()
    };
    Integrand::assemble(integrand.params, phi, psi, recipe)
}

/// Corrected partial sum of order `n` without the convexity gate;
/// `min_reduced_convexity` is filled in.
pub fn fourier_series(integrand: &Integrand, n: usize, panels: usize) -> Result<FourierSeries> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("N = {n} must be even and >= 4")));
    }
    let (nodes, weights) = composite_gauss(0.0, FRAC_PI_2, panels.max(1), NODES_PER_PANEL);
    let values = nodes
        .iter()
        .map(|&t| Ok(circle_jet(integrand, t)?[0]))
        .collect::<Result<Vec<f64>>>()?;
    let coeffs: Vec<f64> = (0..=n / 2)
        .map(|m| {
            let scale = if m == 0 { 2.0 / PI } else { 4.0 / PI };
            let w = 2.0 * m as f64;
            scale * nodes.iter().zip(&weights).zip(&values).map(|((t, wt), f)| wt * f * (w * t).cos()).sum::<f64>()
        })
        .collect();

    let mut series = FourierSeries { n, coeffs, correctors: [0.0; 3], min_reduced_convexity: f64::NAN };
    let target = circle_jet(integrand, FRAC_PI_4)?;
    let partial = series.theta_jet(FRAC_PI_4);
    series.correctors = solve_corrector([target[0] - partial[0], target[1] - partial[1], target[2] - partial[2]]);

    series.min_reduced_convexity = min_reduced_convexity(&series).0;
    Ok(series)
}

/// Minimum of `f + f''` on `[0, pi/2]` over `64 n + 1` samples, with its location.
pub fn min_reduced_convexity(series: &FourierSeries) -> (f64, f64) {
    let checks = 64 * series.n.max(4) + 1;
    let (mut min_val, mut min_theta) = (f64::INFINITY, 0.0);
    for i in 0..checks {
        let theta = FRAC_PI_2 * i as f64 / (checks - 1) as f64;
        let j = series.theta_jet(theta);
        if !(j[0] + j[2] >= min_val) {
            min_val = j[0] + j[2];
            min_theta = theta;
        }
    }
    (min_val, min_theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierRecipe {
    #[serde(rename = "N")]
    pub n: usize,
    pub coeffs: Vec<f64>,
    pub correctors: [f64; 3],
}

/// Max over `s` in `[0, 1]` of `|approx^(m)(s) - original^(m)(s)|` for `m = 0, 1, 2`.
pub fn approximation_error(original: &Profile, approx: &Profile, samples: usize) -> Result<[f64; 3]> {
    let mut worst = [0.0f64; 3];
    for i in 0..samples {
        let s = i as f64 / (samples - 1) as f64;
        let a = original.jet(s)?;
        let b = approx.jet(s)?;
        for o in 0..3 {
            worst[o] = worst[o].max((a[o] - b[o]).abs());
        }
    }
    Ok(worst)
}
