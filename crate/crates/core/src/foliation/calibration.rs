//! The calibration field `grad F(nu)` and its divergence.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{leaf_through_point, normal_at, Leaf, LeafSide};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::integrand::{phi_full, ConeParams, Integrand};

/// Evaluation grid: `nodes x nodes` points on the rectangle, with `h` the
/// finite-difference spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub h: f64,
    pub nodes: usize,
}

impl GridSpec {
    pub fn new(u: [f64; 2], v: [f64; 2], h: f64) -> Self {
        GridSpec { u_min: u[0], u_max: u[1], v_min: v[0], v_max: v[1], h, nodes: 41 }
    }

    /// Parses `u_min,u_max,v_min,v_max,h`.
    pub fn parse(s: &str) -> Result<Self> {
        let xs = s
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("grid field {f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if xs.len() != 5 {
            return Err(Error::Parse(format!("grid needs 5 fields, got {}", xs.len())));
        }
        Ok(GridSpec::new([xs[0], xs[1]], [xs[2], xs[3]], xs[4]))
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.nodes.max(2);
        let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (n - 1) as f64;
        (0..n * n).map(|i| (lin(self.u_min, self.u_max, i / n), lin(self.v_min, self.v_max, i % n))).collect()
    }

    /// The rectangle must keep `10 h` away from the cone and from both axes.
    fn validate(&self, side: LeafSide) -> Result<()> {
        let m = 10.0 * self.h;
        let gap = match side {
            LeafSide::YSide => self.v_min - self.u_max,
            LeafSide::XSide => self.u_min - self.v_max,
        };
        let ok = self.h > 0.0
            && self.u_max > self.u_min
            && self.v_max > self.v_min
            && self.u_min >= m
            && self.v_min >= m
            && gap >= m;
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("grid {self:?} must stay 10h inside the {side:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Random unit directions per grid point for the support inequality.
    pub support_samples: usize,
    /// Allowed excess in `<grad F(nu), w> <= F(w)`.
    pub support_tol: f64,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { support_samples: 64, support_tol: 1e-12, seed: 0, exec: Execution::Parallel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub grid: GridSpec,
    pub side: LeafSide,
    /// Max `|div|` at spacing `h`.
    pub max_abs_divergence: f64,
    pub spacings: [f64; 3],
    /// Max `|div|` at `h`, `h/2`, `h/4`.
    pub divergence_by_spacing: [f64; 3],
    /// `div(h)/div(h/2)` and `div(h/2)/div(h/4)`.
    pub refinement_ratios: [f64; 2],
    /// `log2` of the mean refinement ratio.
    pub order: f64,
    /// Richardson limit `d(h/4) + (d(h/4) - d(h/2))/(2^order - 1)` of the
    /// max divergence as `h -> 0`, in absolute value.
    pub extrapolated_limit: f64,
    pub euler_identity_max_error: f64,
    pub support_inequality_violations: usize,
    pub support_checks: usize,
    pub points: usize,
}

/// `grad F(nu)` at `point`, where `nu` is the unit normal of the leaf
/// through `point`.
pub fn calibration_field(integrand: &Integrand, unit_leaf: &Leaf, point: (f64, f64)) -> Result<[f64; 2]> {
    Ok(field_and_normal(integrand, unit_leaf, point)?.0)
}

fn field_and_normal(integrand: &Integrand, unit_leaf: &Leaf, point: (f64, f64)) -> Result<([f64; 2], [f64; 2])> {
    let lam = leaf_through_point(unit_leaf, point)?;
    let t = match unit_leaf.side {
        LeafSide::YSide => point.0,
        LeafSide::XSide => point.1,
    };
    // the normal of the dilated leaf at t is the unit normal at t / lambda
    let nu = normal_at(unit_leaf, t / lam)?;
    let (_, g) = phi_full(integrand, nu[0], nu[1])?;
    Ok((g, nu))
}

/// Reduced divergence `dg1/du + k g1/u + dg2/dv + l g2/v` of an equivariant
/// field `(g1 x/|x|, g2 y/|y|)`, by centered differences at spacing `h`.
pub fn divergence_of<F>(field: F, params: ConeParams, point: (f64, f64), h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<[f64; 2]>,
{
    let (u, v) = point;
    let c = field(u, v)?;
    let up = field(u + h, v)?;
    let um = field(u - h, v)?;
    let vp = field(u, v + h)?;
    let vm = field(u, v - h)?;
    Ok((up[0] - um[0]) / (2.0 * h)
        + params.k as f64 * c[0] / u
        + (vp[1] - vm[1]) / (2.0 * h)
        + params.l as f64 * c[1] / v)
}

/// Divergence of the calibration field over `grid` at `h`, `h/2`, `h/4`,
/// plus the Euler identity and support inequality at the grid points.
pub fn divergence_check(
    integrand: &Integrand,
    unit_leaf: &Leaf,
    grid: &GridSpec,
    opts: &CalibrationOptions,
) -> Result<CalibrationReport> {
    grid.validate(unit_leaf.side)?;
    let pts = grid.points();
    let spacings = [grid.h, grid.h / 2.0, grid.h / 4.0];
    let field = |u: f64, v: f64| calibration_field(integrand, unit_leaf, (u, v));

    let per_point = exec::map_range(opts.exec, pts.len(), |i| -> Result<([f64; 3], f64, usize)> {
        let p = pts[i];
        let mut div = [0.0; 3];
        for (d, &h) in div.iter_mut().zip(&spacings) {
            *d = divergence_of(field, integrand.params, p, h)?.abs();
        }
        let (g, nu) = field_and_normal(integrand, unit_leaf, p)?;
        let (f_nu, _) = phi_full(integrand, nu[0], nu[1])?;
        let euler = (g[0] * nu[0] + g[1] * nu[1] - f_nu).abs();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        let mut bad = 0;
        for _ in 0..opts.support_samples {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let w = [th.cos(), th.sin()];
            let (f_w, _) = phi_full(integrand, w[0], w[1])?;
            if g[0] * w[0] + g[1] * w[1] > f_w + opts.support_tol {
                bad += 1;
            }
        }
        Ok((div, euler, bad))
    });

    let mut div = [0.0f64; 3];
    let mut euler = 0.0f64;
    let mut bad = 0;
    for r in per_point {
        let (d, e, b) = r?;
        for j in 0..3 {
            div[j] = div[j].max(d[j]);
        }
        euler = euler.max(e);
        bad += b;
    }
    let ratios = [div[0] / div[1], div[1] / div[2]];
    let order = (0.5 * (ratios[0] + ratios[1])).log2();
    Ok(CalibrationReport {
        grid: *grid,
        side: unit_leaf.side,
        max_abs_divergence: div[0],
        spacings,
        divergence_by_spacing: div,
        refinement_ratios: ratios,
        order,
        extrapolated_limit: (div[2] + (div[2] - div[1]) / (order.exp2() - 1.0)).abs(),
        euler_identity_max_error: euler,
        support_inequality_violations: bad,
        support_checks: pts.len() * opts.support_samples,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::tests::{default_integrand, default_leaf};

    #[test]
    fn grid_parsing_and_points() {
        let g = GridSpec::parse("0.2,0.8,1.2,2.0,1e-3").unwrap();
        assert_eq!(g.h, 1e-3);
        let pts = g.points();
        assert_eq!(pts.len(), 41 * 41);
        assert_eq!(pts[0], (0.2, 1.2));
        assert_eq!(*pts.last().unwrap(), (0.8, 2.0));
        assert!(GridSpec::parse("0.2,0.8,1.2").is_err());
        assert!(GridSpec::new([0.2, 1.5], [1.2, 2.0], 1e-3).validate(LeafSide::YSide).is_err());
        assert!(GridSpec::new([0.0, 0.5], [1.2, 2.0], 1e-3).validate(LeafSide::YSide).is_err());
    }

    #[test]
    fn constant_field_control() {
        let params = ConeParams::new(1, 2).unwrap();
        let d = divergence_of(|_, _| Ok([0.0, 0.7]), params, (0.4, 1.6), 1e-3).unwrap();
        assert!((d - 2.0 * 0.7 / 1.6).abs() < 1e-14);
    }

    #[test]
    fn euler_and_support_at_points() {
        let it = default_integrand();
        let leaf = default_leaf();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &p in &[(0.3, 1.4), (0.05, 0.2), (2.0, 2.3)] {
            let (g, nu) = field_and_normal(&it, &leaf, p).unwrap();
            let (f, _) = phi_full(&it, nu[0], nu[1]).unwrap();
            assert!((g[0] * nu[0] + g[1] * nu[1] - f).abs() < 1e-10);
            for _ in 0..1000 {
                let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let w = [th.cos(), th.sin()];
                let (fw, _) = phi_full(&it, w[0], w[1]).unwrap();
                assert!(g[0] * w[0] + g[1] * w[1] < fw);
            }
        }
    }

    #[test]
    fn axis_field_is_constant() {
        let it = default_integrand();
        let leaf = default_leaf();
        let (_, g0) = phi_full(&it, 0.0, 1.0).unwrap();
        for &v in &[0.5, 1.0, 7.0] {
            assert_eq!(calibration_field(&it, &leaf, (0.0, v)).unwrap(), g0);
        }
    }

    #[test]
    fn divergence_converges_at_second_order() {
        let it = default_integrand();
        let leaf = default_leaf();
        let mut grid = GridSpec::new([0.2, 0.8], [1.2, 2.0], 1e-3);
        grid.nodes = 11;
        let r = divergence_check(&it, &leaf, &grid, &CalibrationOptions::default()).unwrap();
        assert!(r.max_abs_divergence < 1e-4, "{r:?}");
        assert!(r.refinement_ratios.iter().all(|&q| q > 3.0 && q < 5.0), "{r:?}");
        assert!(r.euler_identity_max_error <= 1e-10);
        assert!(r.extrapolated_limit < 0.1 * r.divergence_by_spacing[2]);
        assert_eq!(r.support_inequality_violations, 0);
    }

    #[test]
    fn modes_agree() {
        let it = default_integrand();
        let leaf = default_leaf();
        let mut grid = GridSpec::new([0.2, 0.8], [1.2, 2.0], 1e-3);
        grid.nodes = 5;
        let mut opts = CalibrationOptions::default();
        let a = divergence_check(&it, &leaf, &grid, &opts).unwrap();
        opts.exec = Execution::Sequential;
        let b = divergence_check(&it, &leaf, &grid, &opts).unwrap();
        assert_eq!(a, b);
    }
}
