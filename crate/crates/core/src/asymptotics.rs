//! Tail behaviour `sigma(t) = t + a t^(-mu) + o(t^(-mu))` of computed leaves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrand::{ConeParams, Profile};
use crate::ode::{PhaseTrajectory, ProfileTable};

/// Default fit window.
pub const DEFAULT_WINDOW: [f64; 2] = [1e2, 1e4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub a_hat: f64,
    pub mu_hat: f64,
    /// NaN until compared with a closed-form rate.
    pub mu_theory: f64,
    pub rel_err: f64,
    pub window: [f64; 2],
    /// Root-mean-square residual of the log-log regression.
    pub residual: f64,
    pub samples: usize,
    /// Rate from the decay of `|(w, z) - (1, 1)|` in `tau`, when available.
    pub mu_phase: Option<f64>,
}

impl AsymptoticFit {
    pub fn with_theory(mut self, mu_theory: f64) -> Self {
        self.mu_theory = mu_theory;
        self.rel_err = (self.mu_hat - mu_theory).abs() / mu_theory;
        self
    }
}

/// Least-squares line through `(x_i, y_i)`: `(slope, intercept, rms residual)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    (slope, icpt, (rss / n).sqrt())
}

/// Fits `log(sigma - t) = log a - mu log t` over the table samples in `window`.
pub fn fit_tail(table: &ProfileTable, window: [f64; 2]) -> Result<AsymptoticFit> {
    let [lo, hi] = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("bad window [{lo}, {hi}]")));
    }
    let (t0, t1) = table.range();
    if lo < t0 || hi > t1 * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("window [{lo}, {hi}] outside table range [{t0}, {t1}]")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..table.len() {
        let t = table.t[i];
        if t < lo || t > hi * (1.0 + 1e-12) {
            continue;
        }
        let excess = table.sigma[i] - t;
        if !(excess > 0.0) {
            return Err(Error::Precondition(format!("nonpositive excess sigma - t = {excess} at t = {t}")));
        }
        xs.push(t.ln());
        ys.push(excess.ln());
    }
    if xs.len() < 3 {
        return Err(Error::Precondition(format!("only {} samples in window", xs.len())));
    }
    let (slope, icpt, residual) = linear_fit(&xs, &ys);
    Ok(AsymptoticFit {
        a_hat: icpt.exp(),
        mu_hat: -slope,
        mu_theory: f64::NAN,
        rel_err: f64::NAN,
        window,
        residual,
        samples: xs.len(),
        mu_phase: None,
    })
}

/// Rate from `|(w, z) - (1, 1)| ~ e^(lambda_+ tau)`: returns `-(1 + lambda_+)`.
pub fn phase_rate(trajectory: &PhaseTrajectory, window: [f64; 2]) -> Result<f64> {
    let (lo, hi) = (window[0].ln(), window[1].ln());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in &trajectory.points {
        if p.tau < lo || p.tau > hi {
            continue;
        }
        let d = (p.w - 1.0).hypot(p.z - 1.0);
        if d > 0.0 {
            xs.push(p.tau);
            ys.push(d.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Precondition(format!("only {} phase samples in window", xs.len())));
    }
    Ok(-(1.0 + linear_fit(&xs, &ys).0))
}

/// `fit_tail` plus the phase-space cross-check.
pub fn fit_leaf(table: &ProfileTable, trajectory: &PhaseTrajectory, window: [f64; 2]) -> Result<AsymptoticFit> {
    let mut fit = fit_tail(table, window)?;
    fit.mu_phase = phase_rate(trajectory, window).ok();
    Ok(fit)
}

/// `(k+l-1)/2 - sqrt(((k+l-1)/2)^2 - c)`.
fn rate_from(params: ConeParams, c: f64) -> Result<f64> {
    let half = (params.k + params.l - 1) as f64 / 2.0;
    let disc = half * half - c;
    if !(disc > 0.0) {
        return Err(Error::Discriminant(disc));
    }
    Ok(half - disc.sqrt())
}

/// `mu = (k+l-1)/2 - sqrt(((k+l-1)/2)^2 - kl/(phi''(1)(k+l)))`.
pub fn mu_theory(profile: &Profile, params: ConeParams) -> Result<f64> {
    let (k, l) = (params.k as f64, params.l as f64);
    let d2 = profile.eval(1.0, 2)?;
    rate_from(params, k * l / (d2 * (k + l)))
}

/// The same rate for `phi / phi(1)`. The equation is invariant under
/// scaling of `phi`, so this is the rate of the leaf for profiles that do
/// not satisfy `phi(1) = 1` (the area profile has `phi(1) = sqrt 2`).
pub fn mu_theory_normalized(profile: &Profile, params: ConeParams) -> Result<f64> {
    let (k, l) = (params.k as f64, params.l as f64);
    let j = profile.jet(1.0)?;
    rate_from(params, k * l / (j[2] / j[0] * (k + l)))
}

/// Rate of a raw power profile of exponent `p`: `kl/(phi''(1)(k+l)) = k/(p-1)`.
pub fn mu_theory_power(params: ConeParams, p: f64) -> Result<f64> {
    rate_from(params, params.k as f64 / (p - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuMaxReport {
    pub mu_max: f64,
    /// Every sampled compatible raw pair with `p, q >= 6` stays below `mu_max`.
    pub sup_ok: bool,
    /// `mu_max - mu_theory` at the smallest admissible exponent pair.
    pub gap_at_boundary: f64,
    pub samples: usize,
}

/// `(k+l-1)/2 - sqrt(((k+l-1)/2)^2 - min(k,l)/5)`.
pub fn mu_max(params: ConeParams) -> f64 {
    let half = (params.k + params.l - 1) as f64 / 2.0;
    half - (half * half - params.k.min(params.l) as f64 / 5.0).sqrt()
}

/// `mu_max` together with the supremum check over compatible raw power
/// pairs `l(p-1) = k(q-1)` with `p, q >= 6`.
pub fn mu_max_report(params: ConeParams, samples: usize) -> Result<MuMaxReport> {
    let m = mu_max(params);
    let (k, l) = (params.k as f64, params.l as f64);
    // q >= 6 iff p - 1 >= 5k/l
    let p_min = 1.0 + 5.0 * (k / l).max(1.0);
    let mut sup_ok = true;
    let mut gap_at_boundary = f64::NAN;
    for i in 0..samples.max(1) {
        let p = p_min * (1.0 + 3.0 * i as f64 / samples.max(1) as f64);
        let mu = mu_theory_power(params, p)?;
        if i == 0 {
            gap_at_boundary = m - mu;
        }
        sup_ok &= mu < m + 1e-12;
    }
    Ok(MuMaxReport { mu_max: m, sup_ok, gap_at_boundary, samples: samples.max(1) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionReport {
    pub k: u32,
    pub t: Vec<f64>,
    pub l_values: Vec<f64>,
    pub max_l: f64,
    pub argmax_t: f64,
    /// `L <= 0` at every sample.
    pub supersolution: bool,
}

/// `n` log-spaced points on `[a, b]`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}

/// Default supersolution sample: 400 log-spaced points on `[1e-2, 1e3]`.
pub fn default_supersolution_grid() -> Vec<f64> {
    log_grid(1e-2, 1e3, 400)
}

/// `L(t) = s0'' + k P(s0') s0'/t + k Q(s0')/s0` for `s0 = (1 + t^4)^(1/4)`
/// with the area coefficients `P = -Q = 1 + s^2`. With `u = 1 + t^4` and
/// `r = sqrt u` this simplifies to
/// `u^(-9/4) ((3-k)(r^3 + t^6) - 3/(t^2 + r)) / (t^2 + r)`, which is free of
/// the cancellation between the three terms for large `t`.
pub fn area_supersolution_check(k: u32, t_samples: &[f64]) -> Result<SupersolutionReport> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let kf = k as f64;
    let mut l_values = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("sample t = {t} must be positive")));
        }
        l_values.push(area_l(kf, t));
    }
    let (argmax, max_l) = l_values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok(SupersolutionReport {
        k,
        t: t_samples.to_vec(),
        supersolution: max_l <= 0.0,
        argmax_t: t_samples.get(argmax).copied().unwrap_or(f64::NAN),
        max_l,
        l_values,
    })
}

fn area_l(k: f64, t: f64) -> f64 {
    let t2 = t * t;
    let u = 1.0 + t2 * t2;
    let r = u.sqrt();
    let d = t2 + r;
    u.powf(-2.25) * ((3.0 - k) * (r * u + t2 * t2 * t2) - 3.0 / d) / d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{power_profile, Side};
    use crate::ode::{coefficients, linearization, PhasePoint, Termination};

    #[test]
    fn synthetic_tail_is_recovered() {
        let mut table = ProfileTable::default();
        for t in log_grid(1.0, 1e5, 500) {
            table.push(t, t + 2.0 * t.powf(-0.5), 1.0 - t.powf(-1.5));
        }
        let fit = fit_tail(&table, [1e2, 1e4]).unwrap();
        assert!((fit.a_hat - 2.0).abs() < 1e-10);
        assert!((fit.mu_hat - 0.5).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
        let fit = fit.with_theory(0.5);
        assert!(fit.rel_err < 1e-10);
    }

    #[test]
    fn window_must_fit_table() {
        let mut table = ProfileTable::default();
        for t in log_grid(1.0, 1e3, 50) {
            table.push(t, t + 1.0 / t, 0.5);
        }
        assert!(fit_tail(&table, [1e2, 1e4]).is_err());
        let mut bad = table.clone();
        bad.sigma[40] = bad.t[40];
        assert!(fit_tail(&bad, [1e1, 1e3]).is_err());
    }

    #[test]
    fn phase_rate_of_synthetic_decay() {
        let points = (0..1000)
            .map(|i| {
                let tau = i as f64 * 0.01;
                let d = (-1.3 * tau).exp();
                PhasePoint { tau, w: 1.0 + 0.6 * d, z: 1.0 - 0.8 * d }
            })
            .collect();
        let tr = PhaseTrajectory { points, offsets: vec![], termination: Termination::Converged };
        assert!((phase_rate(&tr, [1.0, 1e4]).unwrap() - 0.3).abs() < 1e-10);
    }

    #[test]
    fn rate_anchors() {
        let p11 = ConeParams::new(1, 1).unwrap();
        let raw = power_profile(p11, Side::Phi, 6.0, 0.0).unwrap();
        assert!((mu_theory(&raw, p11).unwrap() - 0.2763932).abs() < 1e-7);
        let p33 = ConeParams::new(3, 3).unwrap();
        assert!((mu_theory(&Profile::Area, p33).unwrap() - 1.083187).abs() < 1e-6);
        assert!((mu_theory_normalized(&Profile::Area, p33).unwrap() - 2.0).abs() < 1e-12);
        assert!((mu_max(p11) - 0.2763932).abs() < 1e-7);
        assert!((mu_max(p33) - 0.1230266).abs() < 1e-6);
    }

    #[test]
    fn power_rate_simplification() {
        for (k, l, p) in [(1, 1, 6.0), (2, 3, 7.5), (3, 1, 16.0)] {
            let params = ConeParams::new(k, l).unwrap();
            let raw = power_profile(params, Side::Phi, p, 0.0).unwrap();
            let a = mu_theory(&raw, params).unwrap();
            let b = mu_theory_power(params, p).unwrap();
            assert!((a - b).abs() < 1e-12);
            let lin = linearization(&raw, params).unwrap();
            assert!((a + 1.0 + lin.lambda_plus).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_rate_limit() {
        let p11 = ConeParams::new(1, 1).unwrap();
        let near = mu_theory_power(p11, 5.0 + 1e-9).unwrap();
        assert!((near - 0.5).abs() < 1e-4);
    }

    #[test]
    fn supremum_check() {
        for (k, l) in [(1, 1), (1, 3), (3, 2), (2, 2)] {
            let r = mu_max_report(ConeParams::new(k, l).unwrap(), 50).unwrap();
            assert!(r.sup_ok);
            assert!(r.gap_at_boundary.abs() < 1e-12);
        }
    }

    #[test]
    fn supersolution_value_at_one() {
        let r = area_supersolution_check(3, &[1.0]).unwrap();
        let c = 1.0 + 2f64.powf(-1.5);
        let expect = 3.0 * 2f64.powf(-1.75) + 3.0 * c * 2f64.powf(-0.75) - 3.0 * c / 2f64.powf(0.25);
        assert!((r.l_values[0] - expect).abs() < 1e-14);
        assert!((r.l_values[0] + 0.1082).abs() < 1e-3);
    }

    #[test]
    fn simplified_form_matches_coefficients() {
        for k in [1u32, 3, 5] {
            for t in log_grid(1e-2, 5.0, 40) {
                let u = 1.0 + t.powi(4);
                let s0 = u.powf(0.25);
                let d1 = t.powi(3) * u.powf(-0.75);
                let d2 = 3.0 * t * t * u.powf(-1.75);
                let (p, q) = coefficients(&Profile::Area, d1).unwrap();
                let direct = d2 + k as f64 * (p * d1 / t + q / s0);
                let l = area_supersolution_check(k, &[t]).unwrap().l_values[0];
                assert!((l - direct).abs() < 1e-12, "k={k} t={t}: {l} vs {direct}");
            }
        }
    }

    #[test]
    fn supersolution_in_high_dimension_only() {
        let grid = default_supersolution_grid();
        assert_eq!(grid.len(), 400);
        let r3 = area_supersolution_check(3, &grid).unwrap();
        assert!(r3.supersolution);
        let tail: Vec<f64> = r3.t.iter().zip(&r3.l_values).filter(|(t, _)| **t >= 10.0).map(|(_, l)| l.abs()).collect();
        assert!(tail.windows(2).all(|w| w[1] < w[0]));
        let r1 = area_supersolution_check(1, &log_grid(0.5, 2.0, 50)).unwrap();
        assert!(!r1.supersolution && r1.max_l > 0.0);
    }
}
