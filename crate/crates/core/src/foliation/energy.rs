//! The reduced energy `int t^k sigma^l phi(sigma') dt` and its response to
//! compactly supported perturbations.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::interp;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::integrand::{ConeParams, Profile};
use crate::ode::ProfileTable;

/// Simpson panels per table interval; Richardson uses this and twice this.
const PANELS: usize = 8;

/// Quintic Hermite interpolant of a table, with `sigma''` from five-point
/// differences of the `sigma'` column.
struct Interpolant<'a> {
    table: &'a ProfileTable,
    d2: Vec<f64>,
}

impl<'a> Interpolant<'a> {
    fn new(table: &'a ProfileTable) -> Self {
        Interpolant { d2: interp::node_derivatives(&table.t, &table.dsigma), table }
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let tb = self.table;
        let i = tb.interval(x);
        let j = interp::quintic(
            [tb.t[i], tb.t[i + 1]],
            [tb.sigma[i], tb.sigma[i + 1]],
            [tb.dsigma[i], tb.dsigma[i + 1]],
            [self.d2[i], self.d2[i + 1]],
            x,
        );
        (j[0], j[1])
    }
}

fn check_interval(table: &ProfileTable, interval: [f64; 2]) -> Result<()> {
    let (lo, hi) = table.range();
    let [a, b] = interval;
    if !(a <= b && a >= lo && b <= hi) {
        return Err(Error::Precondition(format!("interval [{a}, {b}] outside table range [{lo}, {hi}]")));
    }
    Ok(())
}

/// Table nodes strictly inside `(a, b)` together with `a` and `b`.
fn breakpoints(table: &ProfileTable, a: f64, b: f64) -> Vec<f64> {
    let mut xs = vec![a];
    xs.extend(table.t.iter().copied().filter(|&t| t > a && t < b));
    xs.push(b);
    xs
}

/// Composite Simpson with `PANELS` and `2 PANELS` panels per break
/// interval, Richardson-combined. Returns `(value, error estimate)`.
fn integrate<F>(breaks: &[f64], f: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let simpson = |a: f64, b: f64, m: usize| -> Result<f64> {
        let h = (b - a) / m as f64;
        let mut s = f(a)? + f(b)?;
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64)?;
        }
        Ok(s * h / 3.0)
    };
    let mut total = 0.0;
    let mut est = 0.0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let coarse = simpson(w[0], w[1], PANELS)?;
        let fine = simpson(w[0], w[1], 2 * PANELS)?;
        total += fine + (fine - coarse) / 15.0;
        est += (fine - coarse).abs() / 15.0;
    }
    Ok((total, est))
}

fn density(profile: &Profile, params: ConeParams, t: f64, s: f64, d: f64) -> Result<f64> {
    Ok(t.powi(params.k as i32) * s.powi(params.l as i32) * profile.eval(d, 0)?)
}

/// `int_a^b t^k sigma^l phi(sigma') dt` with the Richardson error estimate.
pub fn reduced_energy_estimate(
    profile: &Profile,
    params: ConeParams,
    table: &ProfileTable,
    interval: [f64; 2],
) -> Result<(f64, f64)> {
    check_interval(table, interval)?;
    let [a, b] = interval;
    if a == b {
        return Ok((0.0, 0.0));
    }
    let ip = Interpolant::new(table);
    integrate(&breakpoints(table, a, b), |t| {
        let (s, d) = ip.eval(t);
        density(profile, params, t, s, d)
    })
}

/// `int_a^b t^k sigma^l phi(sigma') dt` over the interpolated table.
pub fn reduced_energy(profile: &Profile, params: ConeParams, table: &ProfileTable, interval: [f64; 2]) -> Result<f64> {
    Ok(reduced_energy_estimate(profile, params, table, interval)?.0)
}

/// `sign amp exp(1 - 1/(1 - x^2))` with `x = (t - center)/width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Bump {
    /// `(eta, eta')`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let x = (t - self.center) / self.width;
        if x.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - x * x;
        let e = self.amplitude * (1.0 - 1.0 / q).exp();
        (e, e * (-2.0 * x / (q * q)) / self.width)
    }

    pub fn support(&self) -> [f64; 2] {
        [self.center - self.width, self.center + self.width]
    }
}

/// `E(sigma + eps eta) - E(sigma)`, integrated as a difference over the
/// support of the bump.
pub fn delta_energy(profile: &Profile, params: ConeParams, table: &ProfileTable, bump: &Bump, eps: f64) -> Result<f64> {
    delta_with(profile, params, &Interpolant::new(table), bump, eps)
}

fn delta_with(profile: &Profile, params: ConeParams, ip: &Interpolant, bump: &Bump, eps: f64) -> Result<f64> {
    if eps == 0.0 {
        return Ok(0.0);
    }
    let [a, b] = bump.support();
    check_interval(ip.table, [a, b])?;
    let (v, _) = integrate(&breakpoints(ip.table, a, b), |t| {
        let (s, d) = ip.eval(t);
        let (e, de) = bump.eval(t);
        Ok(density(profile, params, t, s + eps * e, d + eps * de)? - density(profile, params, t, s, d)?)
    })?;
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOptions {
    pub trials: usize,
    pub eps: f64,
    pub seed: u64,
    /// Smallest allowed `Delta E`.
    pub q_tol: f64,
    pub max_redraws: usize,
    pub exec: Execution,
}

impl Default for PerturbationOptions {
    fn default() -> Self {
        PerturbationOptions { trials: 20, eps: 0.01, seed: 0, q_tol: 1e-10, max_redraws: 200, exec: Execution::Parallel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub bump: Bump,
    /// `eps`, `-eps`, `eps/2`, `-eps/2`.
    pub eps: [f64; 4],
    pub delta_e: [f64; 4],
    pub min_delta_e: f64,
    /// Least-squares `c` in `Delta E = c eps^2`.
    pub c_fit: f64,
    /// `|Delta E - c eps^2|_2 / |Delta E|_2`.
    pub fit_residual: f64,
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub interval: [f64; 2],
    pub eps: f64,
    pub seed: u64,
    pub q_tol: f64,
    pub trials: Vec<TrialReport>,
    pub min_delta_e: f64,
    pub min_c: f64,
    /// Every `Delta E >= -q_tol` and every `c > 0`.
    pub passed: bool,
}

/// Random exp-bump perturbations of the table on `interval`. Bumps whose
/// perturbed slope leaves `(-1, 1)` or whose height turns nonpositive are
/// redrawn.
pub fn perturbation_test(
    profile: &Profile,
    params: ConeParams,
    table: &ProfileTable,
    interval: [f64; 2],
    opts: &PerturbationOptions,
) -> Result<PerturbationReport> {
    let [a, b] = interval;
    let (lo, hi) = table.range();
    if !(a > lo && b < hi && a < b) {
        return Err(Error::Precondition(format!("interval [{a}, {b}] not strictly inside [{lo}, {hi}]")));
    }
    if !(opts.eps > 0.0 && opts.eps <= 0.01) {
        return Err(Error::InvalidParameter(format!("eps = {} must lie in (0, 0.01]", opts.eps)));
    }
    let ip = Interpolant::new(table);
    let (i0, i1) = (table.interval(a), table.interval(b));
    let spacing = (i0..=i1).map(|i| table.t[i + 1] - table.t[i]).fold(0.0, f64::max);
    let w_min = 5.0 * spacing;
    let w_max = 0.5 * (b - a);
    if w_min >= w_max {
        return Err(Error::Precondition(format!("interval [{a}, {b}] too short for bumps of width {w_min}")));
    }
    let eps = [opts.eps, -opts.eps, opts.eps / 2.0, -opts.eps / 2.0];

    let admissible = |bump: &Bump| {
        let [sa, sb] = bump.support();
        (0..=400).all(|i| {
            let t = sa + (sb - sa) * i as f64 / 400.0;
            let (s, d) = ip.eval(t);
            let (e, de) = bump.eval(t);
            eps[..2].iter().all(|&x| (d + x * de).abs() < 1.0 && s + x * e > 0.0)
        })
    };

    let trials = exec::map_range(opts.exec, opts.trials, |i| -> Result<TrialReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        for redraws in 0..=opts.max_redraws {
            let width = rng.gen_range(w_min..w_max);
            let center = rng.gen_range(a + width..b - width);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let bump = Bump { center, width, amplitude: sign * rng.gen_range(0.05..0.2) * ip.eval(center).0 };
            if !admissible(&bump) {
                continue;
            }
            let mut delta_e = [0.0; 4];
            for (d, &e) in delta_e.iter_mut().zip(&eps) {
                *d = delta_with(profile, params, &ip, &bump, e)?;
            }
            let c_fit = eps.iter().zip(&delta_e).map(|(e, d)| d * e * e).sum::<f64>() / eps.iter().map(|e| e.powi(4)).sum::<f64>();
            let norm = delta_e.iter().map(|d| d * d).sum::<f64>().sqrt();
            let res = eps.iter().zip(&delta_e).map(|(e, d)| (d - c_fit * e * e).powi(2)).sum::<f64>().sqrt();
            return Ok(TrialReport {
                bump,
                eps,
                min_delta_e: delta_e.iter().copied().fold(f64::INFINITY, f64::min),
                delta_e,
                c_fit,
                fit_residual: if norm > 0.0 { res / norm } else { 0.0 },
                redraws,
            });
        }
        Err(Error::Precondition(format!("no admissible bump after {} draws", opts.max_redraws + 1)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let min_delta_e = trials.iter().map(|t| t.min_delta_e).fold(f64::INFINITY, f64::min);
    let min_c = trials.iter().map(|t| t.c_fit).fold(f64::INFINITY, f64::min);
    Ok(PerturbationReport {
        interval,
        eps: opts.eps,
        seed: opts.seed,
        q_tol: opts.q_tol,
        passed: min_delta_e >= -opts.q_tol && min_c > 0.0,
        trials,
        min_delta_e,
        min_c,
    })
}
