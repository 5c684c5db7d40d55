//! The trapping region in the `(w, z)` phase plane.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integrand::{ConeParams, Profile};
use crate::ode::phase_field;

/// Shape of the third boundary curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma3 {
    /// `w = (k+l+1)/(k+l-1) - 2z/(k+l-1)`.
    Line,
    /// Image of `sigma_0 = (1+t^4)^(1/4)`, i.e. `w = z^(-1/3)`; used for
    /// the area integrand.
    AreaBarrier,
}

#[derive(Debug, Clone)]
pub struct TrappingRegion {
    pub params: ConeParams,
    pub profile: Profile,
    pub gamma3: Gamma3,
}

/// `Gamma_3` flow check at one sample of the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub z: f64,
    pub w: f64,
    /// Positive when the field points into the region.
    pub margin: f64,
}

pub fn trapping_region(profile: &Profile, params: ConeParams) -> TrappingRegion {
    let gamma3 = match profile {
        Profile::Area if params.k == params.l && params.k >= 3 => Gamma3::AreaBarrier,
        _ => Gamma3::Line,
    };
    TrappingRegion { params, profile: profile.clone(), gamma3 }
}

impl TrappingRegion {
    /// `w = (l/k)(phi(z)/phi'(z) - z)`, infinite at `z = 0`.
    pub fn gamma2_w(&self, z: f64) -> Result<f64> {
        if z == 0.0 {
            return Ok(f64::INFINITY);
        }
        let j = self.profile.jet(z)?;
        Ok(self.params.l as f64 / self.params.k as f64 * (j[0] / j[1] - z))
    }

    pub fn gamma3_w(&self, z: f64) -> f64 {
        match self.gamma3 {
            Gamma3::Line => {
                let n = (self.params.k + self.params.l) as f64;
                (n + 1.0) / (n - 1.0) - 2.0 * z / (n - 1.0)
            }
            Gamma3::AreaBarrier => z.powf(-1.0 / 3.0),
        }
    }

    fn gamma3_slope(&self, z: f64) -> f64 {
        match self.gamma3 {
            Gamma3::Line => -2.0 / ((self.params.k + self.params.l) as f64 - 1.0),
            Gamma3::AreaBarrier => -z.powf(-4.0 / 3.0) / 3.0,
        }
    }

    /// Signed offsets `(z, Gamma2_w(z) - w, w - Gamma3_w(z))`, positive inside.
    pub fn membership(&self, w: f64, z: f64) -> Result<[f64; 3]> {
        Ok([z, self.gamma2_w(z)? - w, w - self.gamma3_w(z)])
    }

    /// Samples `z` uniformly in `(0, 1)` along `Gamma_3`. For the line the
    /// margin is `1 + (lambda_+ + lambda_-)/2 - V2/V1`; for the area barrier
    /// it is the inward flux `(V1 - g'(z) V2)/|V1|`.
    pub fn gamma3_flow(&self, samples: usize) -> Result<Vec<FlowSample>> {
        let n = (self.params.k + self.params.l) as f64;
        (1..=samples)
            .map(|i| {
                let z = i as f64 / (samples + 1) as f64;
                let w = self.gamma3_w(z);
                let v = phase_field(&self.profile, self.params, (w, z))?;
                let margin = match self.gamma3 {
                    Gamma3::Line => (1.0 - (n + 1.0) / 2.0) - v[1] / v[0],
                    Gamma3::AreaBarrier => (v[0] - self.gamma3_slope(z) * v[1]) / v[0].abs(),
                };
                Ok(FlowSample { z, w, margin })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{power_profile, Side};

    #[test]
    fn boundaries_pass_through_fixed_point() {
        for (k, l) in [(1, 1), (1, 2), (3, 2)] {
            let params = ConeParams::new(k, l).unwrap();
            let phi = power_profile(params, Side::Phi, 6.0, 0.01).unwrap();
            let r = trapping_region(&phi, params);
            assert!((r.gamma2_w(1.0).unwrap() - 1.0).abs() < 1e-14);
            assert!((r.gamma3_w(1.0) - 1.0).abs() < 1e-15);
            let m = r.membership(1.0, 1.0).unwrap();
            assert!(m[1].abs() < 1e-14 && m[2].abs() < 1e-15);
        }
        let p33 = ConeParams::new(3, 3).unwrap();
        let r = trapping_region(&Profile::Area, p33);
        assert_eq!(r.gamma3, Gamma3::AreaBarrier);
        assert!((r.gamma2_w(0.5).unwrap() - 2.0).abs() < 1e-14);
        assert!((r.gamma3_w(0.125) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gamma2_has_negative_slope() {
        let params = ConeParams::new(1, 1).unwrap();
        let r = trapping_region(&power_profile(params, Side::Phi, 6.0, 0.01).unwrap(), params);
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let w = r.gamma2_w(i as f64 / 100.0).unwrap();
            assert!(w < prev);
            prev = w;
        }
    }

    #[test]
    fn flow_enters_through_gamma3_for_default_profile() {
        let params = ConeParams::new(1, 1).unwrap();
        let r = trapping_region(&power_profile(params, Side::Phi, 6.0, 0.01).unwrap(), params);
        let flow = r.gamma3_flow(1001).unwrap();
        assert_eq!(flow.len(), 1001);
        assert!(flow.iter().all(|f| f.margin > 0.0));
    }

    #[test]
    fn area_barrier_matches_sigma0_parametrization() {
        let r = trapping_region(&Profile::Area, ConeParams::new(3, 3).unwrap());
        for &t in &[0.1f64, 0.7, 1.0, 3.0] {
            let s0 = (1.0 + t.powi(4)).powf(0.25);
            let ds0 = t.powi(3) / (1.0 + t.powi(4)).powf(0.75);
            assert!((r.gamma3_w(ds0) - s0 / t).abs() < 1e-12 * s0 / t);
        }
    }
}
