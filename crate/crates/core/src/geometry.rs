//! Users, feed points and pinching-antenna deployments.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Slack allowed on placement checks, in metres.
pub const PLACEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLayout {
    pub primary: Vec<Point3>,
    pub secondary: Vec<Point3>,
    /// Feed point `[0, y_n, d_h]` of each waveguide.
    pub feeds: Vec<Point3>,
}

impl UserLayout {
    /// Builds a layout with the feeds implied by `cfg`, checking that every
    /// user lies on the ground inside the service area.
    pub fn new(cfg: &ScenarioConfig, primary: Vec<Point3>, secondary: Vec<Point3>) -> Result<Self> {
        if primary.len() != cfg.num_primary || secondary.len() != cfg.num_secondary {
            return Err(Error::Dimension(format!(
                "layout has {} primary / {} secondary users, scenario expects {} / {}",
                primary.len(),
                secondary.len(),
                cfg.num_primary,
                cfg.num_secondary
            )));
        }
        for p in primary.iter().chain(&secondary) {
            let inside = (0.0..=cfg.area_x).contains(&p.x) && (0.0..=cfg.area_y).contains(&p.y);
            if !inside || p.z != 0.0 {
                return Err(Error::Config(format!(
                    "user at ({}, {}, {}) is outside the service area",
                    p.x, p.y, p.z
                )));
            }
        }
        let feeds = cfg
            .feed_y()
            .into_iter()
            .map(|y| Point3::new(0.0, y, cfg.waveguide_height))
            .collect();
        Ok(Self {
            primary,
            secondary,
            feeds,
        })
    }

    /// Same users, feeds recomputed for `cfg` (used when sweeping `N`).
    pub fn with_feeds_for(&self, cfg: &ScenarioConfig) -> Result<Self> {
        Self::new(cfg, self.primary.clone(), self.secondary.clone())
    }
}

/// `M × N` matrix of antenna positions; entry `(m, n)` is the x-coordinate of
/// the `m`-th antenna on waveguide `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment(pub DMatrix<f64>);

impl Deployment {
    pub fn from_fn(m: usize, n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self(DMatrix::from_fn(m, n, f))
    }

    /// Builds from per-waveguide columns.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.len();
        let m = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != m) {
            return Err(Error::Dimension("ragged deployment columns".into()));
        }
        Ok(Self::from_fn(m, n, |i, j| cols[j][i]))
    }

    pub fn pas_per_waveguide(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_waveguides(&self) -> usize {
        self.0.ncols()
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.0[(m, n)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, x: f64) {
        self.0[(m, n)] = x;
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        self.0.column_iter().map(|c| c.iter().copied().collect()).collect()
    }

    /// Interval `[lo, hi]` that keeps antenna `(m, n)` feasible with its
    /// neighbours held fixed. `lo > hi` means no feasible position exists.
    pub fn feasible_interval(&self, m: usize, n: usize, length: f64, spacing: f64) -> (f64, f64) {
        let lo = if m > 0 {
            (self.get(m - 1, n) + spacing).max(0.0)
        } else {
            0.0
        };
        let hi = if m + 1 < self.pas_per_waveguide() {
            (self.get(m + 1, n) - spacing).min(length)
        } else {
            length
        };
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Position outside `[0, L]`.
    Range,
    /// Closer than `δ` to the previous antenna on the same waveguide.
    Spacing,
}

/// A violated placement constraint at 0-based antenna index `(m, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub m: usize,
    pub n: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::Range => "outside [0, L]",
            ViolationKind::Spacing => "too close to previous antenna",
        };
        write!(f, "(m={}, n={}) {what}", self.m, self.n)
    }
}

/// Checks `0 ≤ x_n^m ≤ L` and `x_n^m - x_n^{m-1} ≥ δ` for every antenna.
pub fn validate_deployment(x: &Deployment, cfg: &ScenarioConfig) -> Result<()> {
    let violations = deployment_violations(x, cfg)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidDeployment(violations))
    }
}

pub fn deployment_violations(x: &Deployment, cfg: &ScenarioConfig) -> Result<Vec<Violation>> {
    if x.pas_per_waveguide() != cfg.pas_per_waveguide || x.num_waveguides() != cfg.num_waveguides {
        return Err(Error::Dimension(format!(
            "deployment is {}x{}, scenario expects {}x{}",
            x.pas_per_waveguide(),
            x.num_waveguides(),
            cfg.pas_per_waveguide,
            cfg.num_waveguides
        )));
    }
    let mut out = Vec::new();
    for n in 0..x.num_waveguides() {
        for m in 0..x.pas_per_waveguide() {
            let v = x.get(m, n);
            if !(v >= -PLACEMENT_TOL && v <= cfg.waveguide_length + PLACEMENT_TOL) {
                out.push(Violation { m, n, kind: ViolationKind::Range });
            }
            if m > 0 && !(v - x.get(m - 1, n) >= cfg.min_pa_spacing - PLACEMENT_TOL) {
                out.push(Violation { m, n, kind: ViolationKind::Spacing });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, n: usize) -> ScenarioConfig {
        let mut c = ScenarioConfig::paper_default();
        c.pas_per_waveguide = m;
        c.num_waveguides = n;
        c
    }

    #[test]
    fn exact_spacing_is_feasible() {
        let c = cfg(2, 1);
        let d = c.min_pa_spacing;
        assert!(validate_deployment(&Deployment::from_columns(&[vec![0.0, d]]).unwrap(), &c).is_ok());
    }

    #[test]
    fn half_spacing_is_reported_at_second_antenna() {
        let c = cfg(2, 1);
        let d = c.min_pa_spacing;
        let err = validate_deployment(&Deployment::from_columns(&[vec![0.0, d / 2.0]]).unwrap(), &c);
        match err {
            Err(Error::InvalidDeployment(v)) => {
                assert_eq!(v, vec![Violation { m: 1, n: 0, kind: ViolationKind::Spacing }])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn beyond_waveguide_end_is_range_violation() {
        let c = cfg(1, 1);
        let x = Deployment::from_columns(&[vec![c.waveguide_length + 1e-6]]).unwrap();
        match validate_deployment(&x, &c) {
            Err(Error::InvalidDeployment(v)) => assert_eq!(v[0].kind, ViolationKind::Range),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let c = cfg(2, 2);
        let x = Deployment::from_columns(&[vec![0.0, 1.0]]).unwrap();
        assert!(matches!(validate_deployment(&x, &c), Err(Error::Dimension(_))));
    }

    #[test]
    fn feasible_interval_uses_neighbours() {
        let x = Deployment::from_columns(&[vec![1.0, 5.0, 9.0]]).unwrap();
        assert_eq!(x.feasible_interval(0, 0, 15.0, 0.5), (0.0, 4.5));
        assert_eq!(x.feasible_interval(1, 0, 15.0, 0.5), (1.5, 8.5));
        assert_eq!(x.feasible_interval(2, 0, 15.0, 0.5), (5.5, 15.0));
    }

    #[test]
    fn users_outside_area_are_rejected() {
        let c = cfg(4, 4);
        let ok = Point3::new(1.0, 1.0, 0.0);
        let bad = Point3::new(16.0, 1.0, 0.0);
        assert!(UserLayout::new(&c, vec![ok, ok], vec![ok, ok]).is_ok());
        assert!(UserLayout::new(&c, vec![ok, bad], vec![ok, ok]).is_err());
        assert!(UserLayout::new(&c, vec![ok], vec![ok, ok]).is_err());
    }
}
