//! Spherical-wave PASS channel model.
//!
//! Each antenna contributes `ρ e^{-jκ_g x} · e^{-jκ_c r} / (2κ_c r)` to the
//! channel of its own waveguide: the first factor is the in-waveguide path
//! from the feed at `x = 0`, the second the free-space link to the user. The
//! block-diagonal feed structure is implicit in only summing antennas of the
//! same waveguide.

use crate::config::ScenarioConfig;
use crate::geometry::{validate_deployment, Deployment, Point3, UserLayout};
use crate::{CMatrix, Error, Result, C64};

/// Propagation distances below this are clamped (m).
pub const MIN_DISTANCE: f64 = 1e-3;

/// In-waveguide response `(1/√M) e^{-jκ_g x}` of an antenna at distance `x`
/// from its feed.
pub fn in_waveguide_element(x_pa: f64, guided_wave_number: f64, pas_per_waveguide: usize) -> C64 {
    let rho = 1.0 / (pas_per_waveguide as f64).sqrt();
    C64::from_polar(rho, -guided_wave_number * x_pa)
}

/// Free-space response `e^{-jκ_c r} / (2κ_c r)` between two points.
pub fn wireless_element(pa: &Point3, user: &Point3, wave_number: f64) -> Result<C64> {
    let r = nalgebra::distance(pa, user);
    if r == 0.0 {
        return Err(Error::Singular("antenna and user coincide".into()));
    }
    Ok(wireless_at_distance(r, wave_number))
}

#[inline]
fn wireless_at_distance(r: f64, wave_number: f64) -> C64 {
    C64::from_polar(1.0 / (2.0 * wave_number * r), -wave_number * r)
}

/// All channels of one scenario. Column `k` of `h` is `h_k`, column `p` of `g`
/// is `g_p`; `per_pa_h[m]` holds the contribution of the `m`-th antenna of
/// every waveguide, so `h = Σ_m per_pa_h[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: CMatrix,
    pub g: CMatrix,
    pub per_pa_h: Vec<CMatrix>,
    pub per_pa_g: Vec<CMatrix>,
    pub power_split: f64,
}

impl ChannelSet {
    /// Builds the effective channels by summing per-antenna slices.
    pub fn from_slices(per_pa_h: Vec<CMatrix>, per_pa_g: Vec<CMatrix>, power_split: f64) -> Result<Self> {
        let first_h = per_pa_h
            .first()
            .ok_or_else(|| Error::Dimension("channel set needs at least one antenna slice".into()))?;
        let (n, k) = first_h.shape();
        let p = per_pa_g.first().map_or(0, |g| g.ncols());
        if per_pa_g.len() != per_pa_h.len()
            || per_pa_h.iter().any(|m| m.shape() != (n, k))
            || per_pa_g.iter().any(|m| m.shape() != (n, p))
        {
            return Err(Error::Dimension("inconsistent per-antenna channel slices".into()));
        }
        let mut h = CMatrix::zeros(n, k);
        let mut g = CMatrix::zeros(n, p);
        for (hm, gm) in per_pa_h.iter().zip(&per_pa_g) {
            h += hm;
            g += gm;
        }
        Ok(Self {
            h,
            g,
            per_pa_h,
            per_pa_g,
            power_split,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_secondary(&self) -> usize {
        self.h.ncols()
    }

    pub fn num_primary(&self) -> usize {
        self.g.ncols()
    }

    pub fn pas_per_waveguide(&self) -> usize {
        self.per_pa_h.len()
    }

    /// Every channel multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let s = C64::new(s, 0.0);
        Self {
            h: &self.h * s,
            g: &self.g * s,
            per_pa_h: self.per_pa_h.iter().map(|m| m * s).collect(),
            per_pa_g: self.per_pa_g.iter().map(|m| m * s).collect(),
            power_split: self.power_split,
        }
    }
}

/// PASS channel evaluator for a fixed user layout. Optionally scales every
/// channel by a constant, which the solver uses to work in noise-normalized
/// units.
#[derive(Debug, Clone)]
pub struct PassChannelModel {
    cfg: ScenarioConfig,
    feed_y: Vec<f64>,
    secondary: Vec<Point3>,
    primary: Vec<Point3>,
    amplitude: f64,
    scale: f64,
}

impl PassChannelModel {
    pub fn new(cfg: &ScenarioConfig, layout: &UserLayout) -> Self {
        Self {
            cfg: cfg.clone(),
            feed_y: layout.feeds.iter().map(|f| f.y).collect(),
            secondary: layout.secondary.clone(),
            primary: layout.primary.clone(),
            amplitude: 1.0 / ((cfg.pas_per_waveguide as f64).sqrt() * 2.0 * cfg.consts.wave_number),
            scale: 1.0,
        }
    }

    /// Channels scaled by `1/σ`, so the noise power becomes 1 and thresholds
    /// become `γ_p / σ²`. SINRs and rates are unchanged.
    pub fn normalized(mut self) -> Self {
        self.scale = 1.0 / self.cfg.noise_power.sqrt();
        self
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn secondary_users(&self) -> &[Point3] {
        &self.secondary
    }

    pub fn primary_users(&self) -> &[Point3] {
        &self.primary
    }

    /// Channel contribution of an antenna at `x` on waveguide `n` to `user`.
    #[inline]
    pub fn pa_entry(&self, n: usize, x: f64, user: &Point3) -> C64 {
        let consts = &self.cfg.consts;
        let dx = x - user.x;
        let dy = self.feed_y[n] - user.y;
        let dz = self.cfg.waveguide_height - user.z;
        let r = (dx * dx + dy * dy + dz * dz).sqrt().max(MIN_DISTANCE);
        let mag = self.scale * self.amplitude / r;
        C64::from_polar(mag, -(consts.guided_wave_number * x + consts.wave_number * r))
    }

    /// Row `n` of `H^m` and `G^m` for an antenna at `x`.
    pub fn pa_response(&self, n: usize, x: f64, h_row: &mut [C64], g_row: &mut [C64]) {
        for (out, u) in h_row.iter_mut().zip(&self.secondary) {
            *out = self.pa_entry(n, x, u);
        }
        for (out, u) in g_row.iter_mut().zip(&self.primary) {
            *out = self.pa_entry(n, x, u);
        }
    }

    pub fn assemble(&self, x: &Deployment) -> Result<ChannelSet> {
        validate_deployment(x, &self.cfg)?;
        let (m_count, n_count) = (x.pas_per_waveguide(), x.num_waveguides());
        let (k_count, p_count) = (self.secondary.len(), self.primary.len());
        let mut per_pa_h = Vec::with_capacity(m_count);
        let mut per_pa_g = Vec::with_capacity(m_count);
        for m in 0..m_count {
            per_pa_h.push(CMatrix::from_fn(n_count, k_count, |n, k| {
                self.pa_entry(n, x.get(m, n), &self.secondary[k])
            }));
            per_pa_g.push(CMatrix::from_fn(n_count, p_count, |n, p| {
                self.pa_entry(n, x.get(m, n), &self.primary[p])
            }));
        }
        ChannelSet::from_slices(per_pa_h, per_pa_g, 1.0 / (m_count as f64).sqrt())
    }
}

/// Assembles the PASS channels for deployment `x` in physical units.
pub fn assemble_channels(x: &Deployment, layout: &UserLayout, cfg: &ScenarioConfig) -> Result<ChannelSet> {
    PassChannelModel::new(cfg, layout).assemble(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use crate::constants::PhysicalConstants;

    #[test]
    fn in_waveguide_zero_phase_even_split() {
        let f = in_waveguide_element(0.0, 821.0, 4);
        assert!((f - C64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn in_waveguide_half_period() {
        let kg = 821.59;
        let f = in_waveguide_element(PI / kg, kg, 1);
        assert!((f - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn in_waveguide_one_metre_at_28ghz() {
        let c = PhysicalConstants::new(28e9, 1.4).unwrap();
        let f = in_waveguide_element(1.0, c.guided_wave_number, 4);
        assert!((f.norm() - 0.5).abs() < 1e-15);
        let expected = (-c.guided_wave_number).rem_euclid(2.0 * PI);
        assert!((f.arg().rem_euclid(2.0 * PI) - expected).abs() < 1e-9);
    }

    #[test]
    fn wireless_magnitude_at_three_metres() {
        let c = PhysicalConstants::new(28e9, 1.4).unwrap();
        let pa = Point3::new(2.0, 5.0, 3.0);
        let below = Point3::new(2.0, 5.0, 0.0);
        let h = wireless_element(&pa, &below, c.wave_number).unwrap();
        let expected = c.wavelength / (4.0 * PI * 3.0);
        assert!((h.norm() - expected).abs() < 1e-18);
        assert!((h.norm() - 2.840e-4).abs() < 1e-7);
        let phase = (-c.wave_number * 3.0).rem_euclid(2.0 * PI);
        assert!((h.arg().rem_euclid(2.0 * PI) - phase).abs() < 1e-9);
    }

    #[test]
    fn wireless_inverse_distance_law() {
        let k = 586.85;
        let a = Point3::new(0.0, 0.0, 3.0);
        let h1 = wireless_element(&a, &Point3::new(0.0, 4.0, 3.0), k).unwrap();
        let h2 = wireless_element(&a, &Point3::new(0.0, 8.0, 3.0), k).unwrap();
        assert!((h1.norm() / h2.norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn coincident_points_are_singular() {
        let a = Point3::new(1.0, 1.0, 1.0);
        assert!(matches!(wireless_element(&a, &a, 1.0), Err(Error::Singular(_))));
    }
}
