//! The Euler–Lagrange equation of the reduced functional
//! `int t^k sigma^l phi(sigma') dt`,
//!
//! `sigma'' + k P(sigma') sigma'/t + l Q(sigma')/sigma = 0`,
//!
//! solved from the regular start `sigma(0) = 1`, `sigma'(0) = 0`, first in
//! `t` and then in the phase variables `w = sigma(t)/t`, `z = sigma'(t)`,
//! `tau = log t`.

pub mod linear;
pub mod region;
pub mod rk;
pub mod table;

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrand::{legendre_slope, ConeParams, Profile};

pub use linear::{linearization, LinearizationData};
pub use region::{trapping_region, FlowSample, Gamma3, TrappingRegion};
pub use table::{PhasePoint, PhaseTrajectory, ProfileTable, TableCheck, TableMeta, Termination};

/// `P(s) = phi'(s)/(s phi''(s))` (with `P(0) = 1`) and
/// `Q(s) = (s phi'(s) - phi(s))/phi''(s)`.
pub fn coefficients(profile: &Profile, s: f64) -> Result<(f64, f64)> {
    let j = profile.jet(s)?;
    if !(j[2] > 0.0) {
        return Err(Error::DegenerateConvexity { s, value: j[2] });
    }
    let p = if s == 0.0 { 1.0 } else { j[1] / (s * j[2]) };
    Ok((p, (s * j[1] - j[0]) / j[2]))
}

/// `(s P(s), Q(s)) = (phi'/phi'', (s phi' - phi)/phi'')`, regular at `s = 0`.
fn field_terms(profile: &Profile, s: f64) -> Result<(f64, f64)> {
    let j = profile.jet(s)?;
    if !(j[2] > 0.0) {
        return Err(Error::DegenerateConvexity { s, value: j[2] });
    }
    Ok((j[1] / j[2], (s * j[1] - j[0]) / j[2]))
}

/// `sigma''` from the equation, for `t > 0`.
pub fn el_rhs(profile: &Profile, params: ConeParams, t: f64, sigma: f64, dsigma: f64) -> Result<f64> {
    let (sp, q) = field_terms(profile, dsigma)?;
    Ok(-(params.k as f64) * sp / t - params.l as f64 * q / sigma)
}

/// `sigma''(0) = l phi(0) / ((k+1) phi''(0))`; infinite when `phi''(0) = 0`.
pub fn sigma2_at_zero(profile: &Profile, params: ConeParams) -> Result<f64> {
    let j = profile.jet(0.0)?;
    Ok(params.l as f64 * j[0] / ((params.k as f64 + 1.0) * j[2]))
}

/// Second-order Taylor start `(1 + sigma''(0) t0^2/2, sigma''(0) t0)`.
pub fn taylor_start(profile: &Profile, params: ConeParams, t0: f64) -> Result<(f64, f64)> {
    let s2 = sigma2_at_zero(profile, params)?;
    Ok((1.0 + 0.5 * s2 * t0 * t0, s2 * t0))
}

/// Default number of Picard grid intervals.
pub const PICARD_NODES: usize = 512;
const PICARD_MAX_ITER: usize = 200;

/// Fixed point of
/// `G(sigma')(t) = (phi*)'( l/(t^k S^l) int_0^t s^k S^(l-1) phi(sigma') ds )`,
/// `S = 1 + int_0^t sigma'`, on a uniform grid over `[0, t0]`.
pub fn picard_start(profile: &Profile, params: ConeParams, t0: f64, tol: f64) -> Result<ProfileTable> {
    picard_start_with(profile, params, t0, tol, PICARD_NODES).map(|(t, _)| t)
}

/// As [`picard_start`] with `n` grid intervals; also returns the number of iterations.
pub fn picard_start_with(
    profile: &Profile,
    params: ConeParams,
    t0: f64,
    tol: f64,
    n: usize,
) -> Result<(ProfileTable, usize)> {
    if !(t0 > 0.0) || !(tol > 0.0) || n < 4 {
        return Err(Error::InvalidParameter(format!("picard start needs t0 > 0, tol > 0, n >= 4 (t0 = {t0}, tol = {tol}, n = {n})")));
    }
    let (k, l) = (params.k as i32, params.l as i32);
    let h = t0 / n as f64;
    let t: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let mut ds = vec![0.0; n + 1];
    let mut last_step = f64::INFINITY;
    for iter in 1..=PICARD_MAX_ITER {
        let s = cumulative(&ds, h, 1.0);
        let g: Vec<f64> = (0..=n)
            .map(|i| Ok(s[i].powi(l - 1) * profile.eval(ds[i], 0)?))
            .collect::<Result<_>>()?;
        let acc = cumulative_weighted(&g, h, k);
        let mut next = vec![0.0; n + 1];
        for i in 1..=n {
            let xi = l as f64 * acc[i] / (t[i].powi(k) * s[i].powi(l));
            next[i] = legendre_slope(profile, xi)?;
            if !(next[i].abs() < 1.0) {
                return Err(Error::NoContraction { iterations: iter, last_step: next[i] });
            }
        }
        let step = next.iter().zip(&ds).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        ds = next;
        if step <= tol {
            let sigma = cumulative(&ds, h, 1.0);
            let mut table = ProfileTable::default();
            for i in 0..=n {
                table.push(t[i], sigma[i], ds[i]);
            }
            return Ok((table, iter));
        }
        if iter > 3 && step > last_step {
            return Err(Error::NoContraction { iterations: iter, last_step: step });
        }
        last_step = step;
    }
    Err(Error::NoContraction { iterations: PICARD_MAX_ITER, last_step })
}

/// `c + int_0^{t_i} f` on a uniform grid, third-order local rule.
fn cumulative(f: &[f64], h: f64, c: f64) -> Vec<f64> {
    let mut out = vec![c; f.len()];
    for i in 1..f.len() {
        let piece = if i == 1 {
            h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f.get(2).copied().unwrap_or(f[1]))
        } else {
            h / 12.0 * (-f[i - 2] + 8.0 * f[i - 1] + 5.0 * f[i])
        };
        out[i] = out[i - 1] + piece;
    }
    out
}

/// `int_0^{t_i} s^k g(s) ds` on the uniform grid `t_i = i h`, with `g`
/// interpolated quadratically on each interval and the weight integrated
/// exactly.
fn cumulative_weighted(g: &[f64], h: f64, k: i32) -> Vec<f64> {
    let (gx, gw) = crate::numerics::gauss_legendre((k as usize + 4) / 2);
    let mut out = vec![0.0; g.len()];
    for i in 1..g.len() {
        // stencil nodes j0, j0+1, j0+2 containing [i-1, i]
        let j0 = if i == 1 { 0 } else { i - 2 };
        let j0 = j0.min(g.len().saturating_sub(3));
        let (a, b) = ((i - 1) as f64 * h, i as f64 * h);
        let mut piece = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let u = s / h - j0 as f64;
            let q = g[j0] * (u - 1.0) * (u - 2.0) / 2.0 - g[j0 + 1] * u * (u - 2.0) + g[j0 + 2] * u * (u - 1.0) / 2.0;
            piece += w * s.powi(k) * q;
        }
        out[i] = out[i - 1] + 0.5 * (b - a) * piece;
    }
    out
}

/// `(w', z') = (z - w, -l Q(z)/w - k z P(z))`.
pub fn phase_field(profile: &Profile, params: ConeParams, point: (f64, f64)) -> Result<[f64; 2]> {
    let (w, z) = point;
    if !(w > 0.0) {
        return Err(Error::InvalidParameter(format!("phase field needs w > 0, got {w}")));
    }
    let (sp, q) = field_terms(profile, z)?;
    Ok([z - w, -(params.l as f64) * q / w - params.k as f64 * sp])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// End of the Picard start interval.
    pub t_switch: f64,
    /// Relative tolerance of the Runge–Kutta pair.
    pub rk_tol: f64,
    /// Distance to `(1, 1)` at which the phase integration stops.
    pub converge_tol: f64,
    /// Allowed negative offset from the trapping-region boundaries.
    pub region_tol: f64,
    pub tau_max: f64,
    /// Log-spaced output samples on `[t_switch, 1]`.
    pub t_samples: usize,
    /// Output spacing in `tau` for `t > 1`.
    pub dtau: f64,
    /// Phase integration continues at least until `t = t_end`, so that tail
    /// fits have data beyond convergence.
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_nodes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            t_switch: 1e-3,
            rk_tol: 1e-10,
            converge_tol: 1e-10,
            region_tol: 1e-8,
            tau_max: 40.0,
            t_samples: 10_000,
            dtau: 0.01,
            t_end: 1e4,
            picard_tol: 1e-14,
            picard_nodes: PICARD_NODES,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_switch > 0.0
            && self.t_switch < 0.5
            && self.rk_tol > 0.0
            && self.converge_tol > 0.0
            && self.region_tol >= 0.0
            && self.tau_max > 0.0
            && self.t_samples >= 10
            && self.dtau > 0.0
            && self.t_end >= 1.0
            && self.picard_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid solver options {self:?}")))
        }
    }
}

/// Summary of a leaf computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafDiagnostics {
    pub termination: Termination,
    pub final_distance: f64,
    pub final_tau: f64,
    pub region_violations: usize,
    pub min_region_offset: f64,
    pub picard_iterations: usize,
    /// `|sigma'_picard(t_switch) / sigma'_taylor(t_switch) - 1|`; NaN when the
    /// Taylor start is singular.
    pub taylor_rel_diff: f64,
    /// Max relative difference of `sigma` between the `t` and phase
    /// integrations on `[1/2, 1]`.
    pub overlap_rel_err: f64,
    pub rk_steps: usize,
}

#[derive(Debug, Clone)]
pub struct LeafSolution {
    pub table: ProfileTable,
    pub trajectory: PhaseTrajectory,
    pub diagnostics: LeafDiagnostics,
}

/// Builds the leaf, failing on region exit or non-convergence.
pub fn integrate_leaf(profile: &Profile, params: ConeParams, opts: &SolverOptions) -> Result<(ProfileTable, PhaseTrajectory)> {
    let sol = integrate_leaf_report(profile, params, opts)?;
    match sol.diagnostics.termination {
        Termination::Converged => Ok((sol.table, sol.trajectory)),
        Termination::RegionExit => Err(Error::Integrator {
            at: sol.diagnostics.final_tau,
            reason: format!("trajectory left the trapping region (offset {:e})", sol.diagnostics.min_region_offset),
        }),
        Termination::TauMax => Err(Error::Integrator {
            at: sol.diagnostics.final_tau,
            reason: format!("not converged by tau_max; distance to (1, 1) is {:e}", sol.diagnostics.final_distance),
        }),
    }
}

/// Builds the leaf and returns whatever was computed together with the
/// termination reason; only setup and integrator failures are errors.
pub fn integrate_leaf_report(profile: &Profile, params: ConeParams, opts: &SolverOptions) -> Result<LeafSolution> {
    opts.validate()?;
    let region = trapping_region(profile, params);

    let (mut table, picard_iterations) =
        picard_start_with(profile, params, opts.t_switch, opts.picard_tol, opts.picard_nodes)?;
    table.meta = TableMeta {
        profile: profile.label(),
        k: params.k,
        l: params.l,
        rk_tol: opts.rk_tol,
        t_switch: opts.t_switch,
    };
    let (t0, s0, d0) = (opts.t_switch, *table.sigma.last().unwrap(), *table.dsigma.last().unwrap());
    let taylor_rel_diff = match taylor_start(profile, params, t0) {
        Ok((_, d)) if d.is_finite() => (d0 / d - 1.0).abs(),
        _ => f64::NAN,
    };

    // t-outputs: the log-spaced table grid plus the overlap times e^{tau_j}
    let lspan = -t0.ln();
    let mut outputs: Vec<(f64, bool)> = (1..opts.t_samples)
        .map(|i| ((t0.ln() + lspan * i as f64 / (opts.t_samples - 1) as f64).exp(), true))
        .collect();
    outputs.last_mut().unwrap().0 = 1.0;
    let j0 = (0.5f64.ln() / opts.dtau).ceil() as i64;
    for j in j0..0 {
        outputs.push(((j as f64 * opts.dtau).exp(), false));
    }
    // first phase output sits just above t = 1/2
    outputs.push((0.5, false));
    outputs.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    outputs.dedup_by(|a, b| a.0 == b.0);
    let times: Vec<f64> = outputs.iter().map(|o| o.0).collect();
    let mut overlap_times: Vec<f64> = (j0..=0).map(|j| (j as f64 * opts.dtau).exp()).collect();
    overlap_times.sort_by(f64::total_cmp);

    let mut overlap_ref: Vec<(f64, f64)> = Vec::new();
    let mut traj = PhaseTrajectory { points: Vec::new(), offsets: Vec::new(), termination: Termination::Converged };
    let mut exited = false;
    let record = |traj: &mut PhaseTrajectory, tau: f64, w: f64, z: f64| -> Result<bool> {
        let off = region.membership(w, z)?;
        traj.points.push(PhasePoint { tau, w, z });
        traj.offsets.push(off);
        Ok(off.iter().all(|&d| d >= -opts.region_tol))
    };
    for i in 1..table.len() {
        let (t, s, d) = (table.t[i], table.sigma[i], table.dsigma[i]);
        if !record(&mut traj, t.ln(), s / t, d)? {
            exited = true;
            break;
        }
    }

    let tol = rk::RkTolerances::new(opts.rk_tol);
    let mut start_phase = None;
    let mut idx = 0usize;
    let mut rk_steps = 0;
    if !exited {
        rk_steps += rk::integrate(
            |t, y| Ok([y[1], el_rhs(profile, params, t, y[0], y[1])?]),
            t0,
            [s0, d0],
            &times,
            &tol,
            |t, y| {
                let in_table = outputs[idx].1;
                idx += 1;
                if t == 0.5 {
                    start_phase = Some(*y);
                }
                if overlap_times.binary_search_by(|x| x.total_cmp(&t)).is_ok() {
                    overlap_ref.push((t, y[0]));
                }
                if in_table {
                    table.push(t, y[0], y[1]);
                    if !record(&mut traj, t.ln(), y[0] / t, y[1])? {
                        exited = true;
                        return Ok(ControlFlow::Break(()));
                    }
                }
                Ok(ControlFlow::Continue(()))
            },
        )?;
    }

    let mut overlap_rel_err = 0.0f64;
    if !exited {
        let y = start_phase.ok_or_else(|| Error::Integrator { at: 0.5, reason: "missed phase start".into() })?;
        let tau_s = 0.5f64.ln();
        let j_end = (opts.tau_max / opts.dtau).ceil() as i64;
        let taus: Vec<f64> = (j0..=j_end).map(|j| j as f64 * opts.dtau).collect();
        let mut ov = overlap_ref.iter();
        rk_steps += rk::integrate(
            |_, y| {
                let v = phase_field(profile, params, (1.0 + y[0], 1.0 + y[1]))?;
                Ok(v)
            },
            tau_s,
            [y[0] / 0.5 - 1.0, y[1] - 1.0],
            &taus,
            &tol,
            |tau, y| {
                let (w, z) = (1.0 + y[0], 1.0 + y[1]);
                let t = tau.exp();
                if tau <= 1e-12 {
                    if let Some(&(tr, sr)) = ov.next() {
                        let sp = tr * w;
                        overlap_rel_err = overlap_rel_err.max((sp / sr - 1.0).abs());
                    }
                    return Ok(ControlFlow::Continue(()));
                }
                table.push(t, t * w, z);
                if !record(&mut traj, tau, w, z)? {
                    exited = true;
                    return Ok(ControlFlow::Break(()));
                }
                let dist = y[0].hypot(y[1]);
                if dist <= opts.converge_tol && t >= opts.t_end {
                    return Ok(ControlFlow::Break(()));
                }
                Ok(ControlFlow::Continue(()))
            },
        )?;
    }

    let final_distance = traj.final_distance();
    traj.termination = if exited {
        Termination::RegionExit
    } else if final_distance <= opts.converge_tol {
        Termination::Converged
    } else {
        Termination::TauMax
    };
    let diagnostics = LeafDiagnostics {
        termination: traj.termination,
        final_distance,
        final_tau: traj.points.last().map_or(f64::NAN, |p| p.tau),
        region_violations: traj.violations(opts.region_tol),
        min_region_offset: traj.min_offset(),
        picard_iterations,
        taylor_rel_diff,
        overlap_rel_err,
        rk_steps,
    };
    Ok(LeafSolution { table, trajectory: traj, diagnostics })
}

/// Max of `|sigma'' + k P sigma'/t + l Q/sigma|` over the table, with
/// `sigma''` from five-point differences of the `sigma'` column on runs
/// that are uniform in `t` or in `log t`. Returns `(max, samples used)`.
pub fn el_residual_max(profile: &Profile, params: ConeParams, table: &ProfileTable) -> Result<(f64, usize)> {
    let (k, l) = (params.k as f64, params.l as f64);
    let n = table.len();
    let mut worst = 0.0f64;
    let mut used = 0usize;
    let uniform = |x: &[f64]| {
        let h = x[1] - x[0];
        x.windows(2).all(|p| ((p[1] - p[0]) - h).abs() <= 1e-9 * h.abs())
    };
    for i in 2..n.saturating_sub(2) {
        let ts = &table.t[i - 2..=i + 2];
        if ts[0] <= 0.0 {
            continue;
        }
        let f = &table.dsigma[i - 2..=i + 2];
        let fd = |h: f64| (-f[4] + 8.0 * f[3] - 8.0 * f[1] + f[0]) / (12.0 * h);
        let t = table.t[i];
        let d2 = if uniform(ts) {
            fd(ts[1] - ts[0])
        } else {
            let logs: Vec<f64> = ts.iter().map(|x| x.ln()).collect();
            if !uniform(&logs) {
                continue;
            }
            fd(logs[1] - logs[0]) / t
        };
        let (sp, q) = field_terms(profile, table.dsigma[i])?;
        let r = d2 + k * sp / t + l * q / table.sigma[i];
        worst = worst.max(r.abs());
        used += 1;
    }
    Ok((worst, used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{power_profile, Side};

    fn p11() -> ConeParams {
        ConeParams::new(1, 1).unwrap()
    }

    fn default_phi() -> Profile {
        power_profile(p11(), Side::Phi, 6.0, 0.01).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        let (p, q) = coefficients(&Profile::Area, 1.0).unwrap();
        assert!((p - 2.0).abs() < 1e-14 && (q + 2.0).abs() < 1e-14);
        for &s in &[0.0, 0.3, 0.9] {
            let (p, q) = coefficients(&Profile::Area, s).unwrap();
            assert!((p - (1.0 + s * s)).abs() < 1e-13);
            assert!((q + (1.0 + s * s)).abs() < 1e-13);
        }
        let (p0, q0) = coefficients(&default_phi(), 0.0).unwrap();
        assert_eq!(p0, 1.0);
        assert!((q0 + 45.5).abs() < 1e-12);
        let raw = power_profile(p11(), Side::Phi, 6.0, 0.0).unwrap();
        assert!(matches!(coefficients(&raw, 0.0), Err(Error::DegenerateConvexity { .. })));
    }

    #[test]
    fn taylor_start_examples() {
        assert!((sigma2_at_zero(&default_phi(), p11()).unwrap() - 22.75).abs() < 1e-12);
        let p33 = ConeParams::new(3, 3).unwrap();
        assert!((sigma2_at_zero(&Profile::Area, p33).unwrap() - 0.75).abs() < 1e-15);
        let (s, d) = taylor_start(&Profile::Area, p33, 1e-9).unwrap();
        assert!((s - 1.0).abs() < 1e-15 && d.abs() < 1e-9);
    }

    #[test]
    fn picard_matches_taylor_jet() {
        let phi = default_phi();
        let t0 = 1e-3;
        let (table, iters) = picard_start_with(&phi, p11(), t0, 1e-14, 256).unwrap();
        assert!(iters > 1);
        let (ts, td) = taylor_start(&phi, p11(), t0).unwrap();
        let n = table.len() - 1;
        assert!((table.dsigma[n] / td - 1.0).abs() < 1e-3);
        assert!((table.sigma[n] - ts).abs() / (ts - 1.0) < 1e-3);
        // sigma'(t)/t -> sigma''(0)
        assert!((table.dsigma[1] / table.t[1] / 22.75 - 1.0).abs() < 1e-2);
        assert!(table.dsigma.iter().all(|d| d.abs() < 1.0));
    }

    #[test]
    fn picard_handles_flat_profile() {
        let params = ConeParams::new(1, 2).unwrap();
        let raw = power_profile(params, Side::Phi, 6.0, 0.0).unwrap();
        let table = picard_start(&raw, params, 1e-3, 1e-14).unwrap();
        assert!(table.dsigma.windows(2).all(|w| w[1] >= w[0]));
        // phi'(sigma') ~ l phi(0) t/(k+1) to leading order
        let c = raw.as_power().unwrap().c;
        let xi = 2.0 * raw.eval(0.0, 0).unwrap() * 1e-3 / 2.0;
        let lead = (xi / (6.0 * c)).powf(0.2);
        assert!((table.dsigma.last().unwrap() / lead - 1.0).abs() < 1e-2);
    }

    #[test]
    fn phase_field_examples() {
        let phi = default_phi();
        let v = phase_field(&phi, p11(), (1.0, 1.0)).unwrap();
        assert!(v[0] == 0.0 && v[1].abs() < 1e-14);
        let v = phase_field(&phi, p11(), (2.0, 0.0)).unwrap();
        assert!((v[1] - 45.5 / 2.0).abs() < 1e-12);
        assert!(phase_field(&phi, p11(), (0.0, 0.5)).is_err());
        assert!(phase_field(&phi, p11(), (1.5, 0.5)).unwrap()[0] < 0.0);
    }

    #[test]
    fn weighted_rule_is_exact_for_quadratic_factor() {
        let h = 0.01;
        for k in 1..=5 {
            let g: Vec<f64> = (0..=20).map(|i| 1.0 + 2.0 * i as f64 * h - (i as f64 * h).powi(2)).collect();
            let c = cumulative_weighted(&g, h, k);
            for (i, v) in c.iter().enumerate() {
                let t = i as f64 * h;
                let kf = k as f64;
                let exact = t.powi(k + 1) / (kf + 1.0) + 2.0 * t.powi(k + 2) / (kf + 2.0) - t.powi(k + 3) / (kf + 3.0);
                assert!((v - exact).abs() <= 1e-15 * exact.abs().max(1e-300) + 1e-300, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn cumulative_rule_is_exact_for_quadratics() {
        let h = 0.1;
        let f: Vec<f64> = (0..=10).map(|i| (i as f64 * h).powi(2)).collect();
        let c = cumulative(&f, h, 0.0);
        for (i, v) in c.iter().enumerate() {
            assert!((v - (i as f64 * h).powi(3) / 3.0).abs() < 1e-15);
        }
    }
}
