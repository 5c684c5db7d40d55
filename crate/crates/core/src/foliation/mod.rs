//! Leaves, their dilations, and the calibration built from the foliation.
//!
//! Points are written in the reduced plane `(u, v) = (|x|, |y|)`. A y-side
//! leaf is `{v = lambda sigma(u / lambda)}`; an x-side leaf is the mirror
//! image `{u = lambda sigma(v / lambda)}` built from `(psi, (l, k))`.

mod calibration;
mod energy;
mod interp;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrand::{ConeParams, Integrand, Profile, Side};
use crate::numerics::monotone_root;
use crate::ode::{el_rhs, integrate_leaf_report, sigma2_at_zero, LeafSolution, ProfileTable, SolverOptions, Termination};

pub use calibration::{calibration_field, divergence_check, divergence_of, CalibrationOptions, CalibrationReport, GridSpec};
pub use energy::{
    delta_energy, perturbation_test, reduced_energy, reduced_energy_estimate, Bump, PerturbationOptions, PerturbationReport, TrialReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafSide {
    /// `|y| > |x|`, built from `phi`.
    YSide,
    /// `|x| > |y|`, built from `psi` with `k` and `l` exchanged.
    XSide,
}

impl LeafSide {
    pub fn profile_side(self) -> Side {
        match self {
            LeafSide::YSide => Side::Phi,
            LeafSide::XSide => Side::Psi,
        }
    }

    /// `(u, v)` to leaf-local `(t, height)` coordinates and back.
    fn local(self, u: f64, v: f64) -> (f64, f64) {
        match self {
            LeafSide::YSide => (u, v),
            LeafSide::XSide => (v, u),
        }
    }
}

/// A dilation of a unit leaf. The table and its second-derivative column
/// are shared between dilations.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub side: LeafSide,
    pub scale: f64,
    pub table: Arc<ProfileTable>,
    d2: Arc<Vec<f64>>,
    d3: Arc<Vec<f64>>,
}

impl PartialEq for Leaf {
    fn eq(&self, other: &Self) -> bool {
        self.side == other.side && self.scale == other.scale && self.table == other.table
    }
}

impl Leaf {
    /// Unit leaf from a table starting at `(0, 1, 0)`.
    pub fn unit(side: LeafSide, table: ProfileTable) -> Result<Leaf> {
        if table.len() < 5 {
            return Err(Error::InvalidParameter(format!("leaf table has only {} rows", table.len())));
        }
        let check = table.check();
        if check.bad_start || check.non_increasing_t > 0 {
            return Err(Error::InvalidParameter(format!("table is not a unit leaf: {check:?}")));
        }
        let d2 = interp::node_derivatives(&table.t, &table.dsigma);
        let d3 = interp::node_derivatives(&table.t, &d2);
        Ok(Leaf { side, scale: 1.0, table: Arc::new(table), d2: Arc::new(d2), d3: Arc::new(d3) })
    }

    /// Unit leaf of a solution table, with `sigma''` at the nodes taken from
    /// the equation instead of differences of the `sigma'` column (which
    /// amplify its integration noise). Nodes where the equation gives no
    /// finite value keep the difference estimate.
    pub fn solution(side: LeafSide, table: ProfileTable, profile: &Profile, params: ConeParams) -> Result<Leaf> {
        let mut leaf = Leaf::unit(side, table)?;
        let tab = &leaf.table;
        let mut d2 = (*leaf.d2).clone();
        for (i, d) in d2.iter_mut().enumerate() {
            let v = if tab.t[i] == 0.0 {
                sigma2_at_zero(profile, params)
            } else {
                el_rhs(profile, params, tab.t[i], tab.sigma[i], tab.dsigma[i])
            };
            if let Ok(v) = v.map_err(|_| ()).and_then(|v| if v.is_finite() { Ok(v) } else { Err(()) }) {
                *d = v;
            }
        }
        leaf.d3 = Arc::new(interp::node_derivatives(&tab.t, &d2));
        leaf.d2 = Arc::new(d2);
        Ok(leaf)
    }

    /// Largest local parameter covered by this dilation.
    pub fn t_max(&self) -> f64 {
        self.scale * self.table.range().1
    }

    /// `(sigma(s), sigma'(s), sigma''(s))` of the unit leaf. `sigma` is the
    /// quintic through `(sigma, sigma', sigma'')`; the derivatives come from
    /// the quintic through `(sigma', sigma'', sigma''')`, which keeps rounding
    /// noise in the `sigma` column out of `sigma''`.
    pub fn unit_jet(&self, s: f64) -> Result<[f64; 3]> {
        let s = s.abs();
        let t = &self.table.t;
        if s > t[t.len() - 1] {
            return Err(Error::OutOfDomain { s, reason: "beyond the end of the leaf table" });
        }
        let i = self.table.interval(s);
        let (ti, d, d2, d3) = ([t[i], t[i + 1]], &self.table.dsigma, &self.d2, &self.d3);
        let v = interp::quintic(ti, [self.table.sigma[i], self.table.sigma[i + 1]], [d[i], d[i + 1]], [d2[i], d2[i + 1]], s);
        let g = interp::quintic(ti, [d[i], d[i + 1]], [d2[i], d2[i + 1]], [d3[i], d3[i + 1]], s);
        Ok([v[0], g[0], g[1]])
    }

    /// Height `lambda sigma(t / lambda)` and slope `sigma'(t / lambda)` at
    /// the local parameter `t`.
    pub fn graph(&self, t: f64) -> Result<(f64, f64)> {
        let j = self.unit_jet(t / self.scale)?;
        Ok((self.scale * j[0], j[1]))
    }

    /// Point of the leaf over the local parameter `t`, in `(u, v)`.
    pub fn point(&self, t: f64) -> Result<(f64, f64)> {
        let (h, _) = self.graph(t)?;
        Ok(self.side.local(t, h))
    }

    /// `n` points with local parameter log-spaced on `[t_min, t_max]`.
    pub fn sample_curve(&self, n: usize, t_min: f64, t_max: f64) -> Result<Vec<(f64, f64)>> {
        if !(t_min > 0.0 && t_max > t_min) || n < 2 {
            return Err(Error::InvalidParameter(format!("bad curve sample [{t_min}, {t_max}] x {n}")));
        }
        crate::asymptotics::log_grid(t_min, t_max, n).into_iter().map(|t| self.point(t)).collect()
    }
}

/// Builds the unit leaf of one side of `integrand`.
pub fn unit_leaf(integrand: &Integrand, side: LeafSide, opts: &SolverOptions) -> Result<(Leaf, LeafSolution)> {
    let (profile, params) = integrand.side(side.profile_side());
    let sol = integrate_leaf_report(profile, params, opts)?;
    if sol.diagnostics.termination != Termination::Converged {
        return Err(Error::Integrator {
            at: sol.diagnostics.final_tau,
            reason: format!("leaf did not converge ({:?})", sol.diagnostics.termination),
        });
    }
    Ok((Leaf::solution(side, sol.table.clone(), profile, params)?, sol))
}

/// Leaf with scale multiplied by `lambda`.
pub fn dilate_leaf(leaf: &Leaf, lambda: f64) -> Result<Leaf> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("dilation factor {lambda} must be positive")));
    }
    Ok(Leaf { scale: leaf.scale * lambda, ..leaf.clone() })
}

/// The unique `lambda` whose dilation of `unit_leaf` passes through `point`.
/// `lambda sigma(u / lambda)` increases in `lambda` with derivative
/// `sigma(s) - s sigma'(s)` in `(0, 1]`.
pub fn leaf_through_point(unit_leaf: &Leaf, point: (f64, f64)) -> Result<f64> {
    let (t, h) = unit_leaf.side.local(point.0, point.1);
    if !(t >= 0.0 && h > t) {
        return Err(Error::InvalidParameter(format!("point {point:?} is not strictly inside the {:?}", unit_leaf.side)));
    }
    let base = unit_leaf.scale;
    if t == 0.0 {
        return Ok(h / (base * unit_leaf.table.sigma[0]));
    }
    // lambda sigma(t / lambda) - h as a function of the total scale
    let t_last = unit_leaf.table.range().1;
    let f = |lam: f64| -> Result<(f64, f64)> {
        let s = (t / lam).min(t_last);
        let j = unit_leaf.unit_jet(s)?;
        Ok((lam * j[0] - h, j[0] - s * j[1]))
    };
    let lo = t / t_last;
    let hi = h;
    if f(lo)?.0 > 0.0 {
        return Err(Error::OutOfDomain { s: t / lo, reason: "leaf through this point lies beyond the table" });
    }
    let lam = monotone_root(lo, hi, 1e-15, f)?;
    Ok(lam / base)
}

/// Unit normal `(-sigma', 1)/sqrt(1 + sigma'^2)` of the leaf at local
/// parameter `t`, in `(u, v)` order; x-side normals are mirrored.
pub fn normal_at(leaf: &Leaf, t: f64) -> Result<[f64; 2]> {
    let (_, d) = leaf.graph(t)?;
    let n = d.hypot(1.0);
    Ok(match leaf.side {
        LeafSide::YSide => [-d / n, 1.0 / n],
        LeafSide::XSide => [1.0 / n, -d / n],
    })
}

/// Anisotropic mean curvature `phi''(sigma') R` of the unit leaf at the
/// table nodes, where `R` is the residual of the Euler-Lagrange equation.
/// Returns the maximum over nodes with `t > 0`.
pub fn curvature_residual(leaf: &Leaf, profile: &Profile, params: ConeParams) -> Result<f64> {
    let tab = &leaf.table;
    let mut worst = 0.0f64;
    for i in 1..tab.len() {
        let (t, s, d) = (tab.t[i], tab.sigma[i], tab.dsigma[i]);
        let r = leaf.d2[i] - crate::ode::el_rhs(profile, params, t, s, d)?;
        worst = worst.max((profile.eval(d, 2)? * r).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{build_integrand, compat_q, matched_b_psi};

    pub(crate) fn default_integrand() -> Integrand {
        let params = ConeParams::new(1, 1).unwrap();
        let q = compat_q(params, 6.0).unwrap();
        build_integrand(params, 6.0, q, 0.01, matched_b_psi(6.0, q, 0.01), None).unwrap()
    }

    pub(crate) fn default_leaf() -> Leaf {
        unit_leaf(&default_integrand(), LeafSide::YSide, &SolverOptions::default()).unwrap().0
    }

    #[test]
    fn dilation_group() {
        let leaf = default_leaf();
        assert_eq!(dilate_leaf(&leaf, 1.0).unwrap(), leaf);
        let back = dilate_leaf(&dilate_leaf(&leaf, 2.0).unwrap(), 0.5).unwrap();
        assert_eq!(back, leaf);
        let big = dilate_leaf(&leaf, 3.0).unwrap();
        assert_eq!(big.point(0.0).unwrap(), (0.0, 3.0));
        assert!(dilate_leaf(&leaf, 0.0).is_err() && dilate_leaf(&leaf, -1.0).is_err());
    }

    #[test]
    fn dilation_maps_samples() {
        let leaf = default_leaf();
        let d = dilate_leaf(&leaf, 2.5).unwrap();
        for &t in &[0.1, 0.4, 2.0] {
            let (u, v) = leaf.point(t).unwrap();
            let (u2, v2) = d.point(2.5 * t).unwrap();
            assert!((u2 - 2.5 * u).abs() < 1e-14 && (v2 - 2.5 * v).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let leaf = default_leaf();
        for i in [0, 10, 600, 5000, leaf.table.len() - 1] {
            let j = leaf.unit_jet(leaf.table.t[i]).unwrap();
            assert!((j[0] - leaf.table.sigma[i]).abs() <= 1e-15 * leaf.table.sigma[i]);
            assert!((j[1] - leaf.table.dsigma[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn leaf_through_known_points() {
        let leaf = default_leaf();
        assert!((leaf_through_point(&leaf, (0.0, 3.0)).unwrap() - 3.0).abs() < 1e-15);
        for i in [100, 3000, 9000, 10500] {
            let (t, s) = (leaf.table.t[i], leaf.table.sigma[i]);
            let lam = leaf_through_point(&leaf, (t, s)).unwrap();
            assert!((lam - 1.0).abs() < 1e-12, "node {i}: {lam}");
        }
        assert!(leaf_through_point(&leaf, (1.0, 1.0)).is_err());
        assert!(leaf_through_point(&leaf, (1.0, 0.5)).is_err());
    }

    #[test]
    fn leaf_through_point_residual() {
        let leaf = default_leaf();
        for &(u, v) in &[(0.3, 1.5), (0.79, 1.21), (5.0, 5.5), (0.01, 0.02)] {
            let lam = leaf_through_point(&leaf, (u, v)).unwrap();
            let through = dilate_leaf(&leaf, lam).unwrap();
            let (h, _) = through.graph(u).unwrap();
            assert!((h - v).abs() <= 1e-12 * v, "({u}, {v}): {}", h - v);
        }
    }

    #[test]
    fn normals() {
        let leaf = default_leaf();
        assert_eq!(normal_at(&leaf, 0.0).unwrap(), [0.0, 1.0]);
        let far = normal_at(&leaf, leaf.t_max()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((far[0] + r).abs() < 1e-4 && (far[1] - r).abs() < 1e-4);
        for &t in &[0.01, 0.5, 1.0, 30.0] {
            let n = normal_at(&leaf, t).unwrap();
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn x_side_is_mirrored() {
        let it = default_integrand();
        let (leaf, _) = unit_leaf(&it, LeafSide::XSide, &SolverOptions::default()).unwrap();
        let (u, v) = leaf.point(0.5).unwrap();
        assert!(u > v && v == 0.5);
        let lam = leaf_through_point(&leaf, (1.5, 0.3)).unwrap();
        let (u2, _) = dilate_leaf(&leaf, lam).unwrap().point(0.3).unwrap();
        assert!((u2 - 1.5).abs() < 1e-12);
        let n = normal_at(&leaf, 0.0).unwrap();
        assert_eq!(n, [1.0, 0.0]);
    }

    #[test]
    fn leaf_has_small_mean_curvature() {
        let it = default_integrand();
        let leaf = default_leaf();
        let (profile, params) = it.side(Side::Phi);
        assert!(curvature_residual(&leaf, profile, params).unwrap() < 1e-6);
    }
}
