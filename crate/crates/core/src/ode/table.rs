//! Sampled leaves and phase trajectories, with CSV round trips.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples `(t, sigma, sigma')` of a leaf profile, `t` strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileTable {
    pub t: Vec<f64>,
    pub sigma: Vec<f64>,
    pub dsigma: Vec<f64>,
    pub meta: TableMeta,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TableMeta {
    pub profile: String,
    pub k: u32,
    pub l: u32,
    pub rk_tol: f64,
    pub t_switch: f64,
}

/// Violations of the table invariants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableCheck {
    pub non_increasing_t: usize,
    pub below_cone: usize,
    pub slope_out_of_range: usize,
    pub non_monotone_slope: usize,
    pub bad_start: bool,
}

impl TableCheck {
    pub fn ok(&self) -> bool {
        *self == TableCheck::default()
    }
}

impl ProfileTable {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, t: f64, sigma: f64, dsigma: f64) {
        self.t.push(t);
        self.sigma.push(sigma);
        self.dsigma.push(dsigma);
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.len() - 1])
    }

    /// Index `i` with `t[i] <= x < t[i+1]`, clamped to valid intervals.
    pub fn interval(&self, x: f64) -> usize {
        match self.t.partition_point(|&ti| ti <= x) {
            0 => 0,
            i => (i - 1).min(self.len() - 2),
        }
    }

    /// Checks `sigma(0) = 1`, `sigma'(0) = 0`, `sigma > t`, `0 <= sigma' < 1`,
    /// monotone `sigma'` and increasing `t`.
    pub fn check(&self) -> TableCheck {
        let mut c = TableCheck {
            bad_start: self.is_empty() || self.t[0] != 0.0 || self.sigma[0] != 1.0 || self.dsigma[0] != 0.0,
            ..Default::default()
        };
        for i in 0..self.len() {
            if self.sigma[i] <= self.t[i] {
                c.below_cone += 1;
            }
            if !(self.dsigma[i] >= 0.0 && self.dsigma[i] < 1.0) {
                c.slope_out_of_range += 1;
            }
            if i > 0 {
                if self.t[i] <= self.t[i - 1] {
                    c.non_increasing_t += 1;
                }
                if self.dsigma[i] < self.dsigma[i - 1] {
                    c.non_monotone_slope += 1;
                }
            }
        }
        c
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * self.len() + 32);
        s.push_str("t,sigma,dsigma\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", self.t[i], self.sigma[i], self.dsigma[i]);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_csv(text, &["t", "sigma", "dsigma"])?;
        let mut table = ProfileTable::default();
        for r in rows {
            table.push(r[0], r[1], r[2]);
        }
        if table.len() < 2 {
            return Err(Error::Parse("profile table needs at least two rows".into()));
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    TauMax,
    RegionExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub tau: f64,
    pub w: f64,
    pub z: f64,
}

/// Phase samples with signed offsets to `Gamma_1`, `Gamma_2`, `Gamma_3`
/// (positive inside the trapping region).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub points: Vec<PhasePoint>,
    pub offsets: Vec<[f64; 3]>,
    pub termination: Termination,
}

impl PhaseTrajectory {
    pub fn final_distance(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| (p.w - 1.0).hypot(p.z - 1.0))
    }

    /// Smallest offset over all samples and boundaries.
    pub fn min_offset(&self) -> f64 {
        self.offsets.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn violations(&self, tol: f64) -> usize {
        self.offsets.iter().filter(|o| o.iter().any(|&d| d < -tol)).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(128 * self.points.len() + 64);
        s.push_str("tau,w,z,dist_gamma1,dist_gamma2,dist_gamma3\n");
        for (p, o) in self.points.iter().zip(&self.offsets) {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.tau, p.w, p.z, o[0], o[1], o[2]
            );
        }
        s
    }

    /// Reads samples back; the termination reason is not stored in the CSV.
    pub fn from_csv(text: &str, termination: Termination) -> Result<Self> {
        let rows = parse_csv(text, &["tau", "w", "z", "dist_gamma1", "dist_gamma2", "dist_gamma3"])?;
        let points = rows.iter().map(|r| PhasePoint { tau: r[0], w: r[1], z: r[2] }).collect();
        let offsets = rows.iter().map(|r| [r[3], r[4], r[5]]).collect();
        Ok(Self { points, offsets, termination })
    }
}

fn parse_csv(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols != header {
        return Err(Error::Parse(format!("expected header {:?}, found {head:?}", header.join(","))));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 2))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != header.len() {
                return Err(Error::Parse(format!("row {} has {} fields", i + 2, row.len())));
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut t = ProfileTable::default();
        t.push(0.0, 1.0, 0.0);
        t.push(0.1, 1.0 + 1.0 / 3.0, std::f64::consts::PI / 10.0);
        t.push(1e-300, 5e300, 0.1 + 0.2);
        let back = ProfileTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.t, t.t);
        assert_eq!(back.sigma, t.sigma);
        assert_eq!(back.dsigma, t.dsigma);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(ProfileTable::from_csv("t,s,ds\n0,1,0\n1,2,0.5\n").is_err());
        assert!(ProfileTable::from_csv("t,sigma,dsigma\n0,1\n").is_err());
    }

    #[test]
    fn invariant_check_flags_problems() {
        let mut t = ProfileTable::default();
        t.push(0.0, 1.0, 0.0);
        t.push(1.0, 1.5, 0.4);
        t.push(2.0, 2.2, 0.3);
        t.push(2.0, 1.9, 1.0);
        let c = t.check();
        assert!(!c.bad_start);
        assert_eq!(c.non_increasing_t, 1);
        assert_eq!(c.below_cone, 1);
        assert_eq!(c.slope_out_of_range, 1);
        assert_eq!(c.non_monotone_slope, 1);
        assert_eq!(t.interval(1.5), 1);
        assert_eq!(t.interval(-1.0), 0);
    }

    #[test]
    fn phase_csv_round_trip() {
        let tr = PhaseTrajectory {
            points: vec![PhasePoint { tau: 0.0, w: 1.5, z: 0.5 }, PhasePoint { tau: 0.01, w: 1.49, z: 0.51 }],
            offsets: vec![[0.5, 0.1, 0.2], [0.51, 0.09, 0.19]],
            termination: Termination::TauMax,
        };
        let back = PhaseTrajectory::from_csv(&tr.to_csv(), Termination::TauMax).unwrap();
        assert_eq!(back, tr);
        assert_eq!(tr.violations(0.0), 0);
    }
}
