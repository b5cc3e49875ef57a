//! The proposed scheme and its baselines.
//!
//! * `continuous_pass`: positions optimized over the whole waveguide.
//! * `discrete_pass:Z`: positions restricted to `Z` equally spaced sockets.
//! * `uniform_pass`: antennas fixed at `x_m = (2m - 1) L / (2M)`, precoder only.
//! * `mimo_ula`: a conventional `N`-antenna half-wavelength array at the feed
//!   corner, one antenna per RF chain, precoder only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{wireless_element, ChannelSet, PassChannelModel};
use crate::config::ScenarioConfig;
use crate::geometry::{Deployment, Point3, UserLayout, PLACEMENT_TOL};
use crate::wmmse::{solve, AlgoParams, ChannelSource, Placement, SolveReport, SolveSetup};
use crate::{CMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchemeId {
    ContinuousPass,
    DiscretePass(usize),
    UniformPass,
    MimoUla,
}

impl SchemeId {
    pub fn is_pass(self) -> bool {
        !matches!(self, SchemeId::MimoUla)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeId::ContinuousPass => f.write_str("continuous_pass"),
            SchemeId::DiscretePass(z) => write!(f, "discrete_pass:{z}"),
            SchemeId::UniformPass => f.write_str("uniform_pass"),
            SchemeId::MimoUla => f.write_str("mimo_ula"),
        }
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "continuous_pass" => Ok(SchemeId::ContinuousPass),
            "uniform_pass" => Ok(SchemeId::UniformPass),
            "mimo_ula" => Ok(SchemeId::MimoUla),
            other => {
                let z = other
                    .strip_prefix("discrete_pass:")
                    .ok_or_else(|| Error::Parse(format!("unknown scheme `{other}`")))?;
                let z: usize = z
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad socket count in `{other}`")))?;
                if z < 2 {
                    return Err(Error::Parse(format!("`{other}` needs at least 2 sockets")));
                }
                Ok(SchemeId::DiscretePass(z))
            }
        }
    }
}

impl TryFrom<String> for SchemeId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SchemeId> for String {
    fn from(s: SchemeId) -> String {
        s.to_string()
    }
}

/// `x_n^m = (2m - 1) L / (2M)` on every waveguide.
pub fn uniform_deployment(cfg: &ScenarioConfig) -> Deployment {
    let m_count = cfg.pas_per_waveguide as f64;
    Deployment::from_fn(cfg.pas_per_waveguide, cfg.num_waveguides, |m, _| {
        (2.0 * m as f64 + 1.0) * cfg.waveguide_length / (2.0 * m_count)
    })
}

/// `z_i = (i - 1) L / (Z - 1)`, `i = 1..Z`.
pub fn socket_grid(cfg: &ScenarioConfig, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::Config(format!("need at least 2 sockets, got {count}")));
    }
    let step = cfg.waveguide_length / (count - 1) as f64;
    if step < cfg.min_pa_spacing - PLACEMENT_TOL {
        return Err(Error::Config(format!(
            "{count} sockets are closer than the minimum antenna spacing"
        )));
    }
    Ok((0..count)
        .map(|i| if i + 1 == count { cfg.waveguide_length } else { i as f64 * step })
        .collect())
}

/// Moves every antenna to the nearest socket that keeps the spacing to the
/// previous antenna, waveguide by waveguide.
pub fn snap_to_sockets(x: &Deployment, sockets: &[f64], cfg: &ScenarioConfig) -> Result<Deployment> {
    let mut out = x.clone();
    for n in 0..x.num_waveguides() {
        let mut prev: Option<f64> = None;
        for m in 0..x.pas_per_waveguide() {
            let lo = prev.map_or(f64::NEG_INFINITY, |p| p + cfg.min_pa_spacing - PLACEMENT_TOL);
            let target = x.get(m, n);
            let z = sockets
                .iter()
                .copied()
                .filter(|&z| z >= lo)
                .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
                .ok_or_else(|| {
                    Error::Config(format!(
                        "{} antennas do not fit on {} sockets",
                        x.pas_per_waveguide(),
                        sockets.len()
                    ))
                })?;
            out.set(m, n, z);
            prev = Some(z);
        }
    }
    Ok(out)
}

/// Positions of the conventional array: `N` antennas along y at half-wavelength
/// spacing, centred on `D_y/2`, at `x = 0` and the waveguide height.
pub fn ula_positions(cfg: &ScenarioConfig) -> Vec<Point3> {
    let n_count = cfg.num_waveguides as f64;
    let half = cfg.consts.half_wavelength();
    (0..cfg.num_waveguides)
        .map(|i| {
            let offset = (i as f64 + 1.0 - (n_count + 1.0) / 2.0) * half;
            Point3::new(0.0, cfg.area_y / 2.0 + offset, cfg.waveguide_height)
        })
        .collect()
}

/// Free-space channels of the conventional array in physical units.
pub fn mimo_ula_channels(cfg: &ScenarioConfig, layout: &UserLayout) -> Result<ChannelSet> {
    let antennas = ula_positions(cfg);
    let kc = cfg.consts.wave_number;
    let build = |users: &[Point3]| -> Result<CMatrix> {
        let mut out = CMatrix::zeros(antennas.len(), users.len());
        for (n, a) in antennas.iter().enumerate() {
            for (k, u) in users.iter().enumerate() {
                out[(n, k)] = wireless_element(a, u, kc)?;
            }
        }
        Ok(out)
    };
    ChannelSet::from_slices(vec![build(&layout.secondary)?], vec![build(&layout.primary)?], 1.0)
}

/// Solver input for `scheme` on the given user drop.
pub fn setup_for(scheme: SchemeId, cfg: &ScenarioConfig, layout: &UserLayout) -> Result<SolveSetup> {
    let channels = match scheme {
        SchemeId::MimoUla => ChannelSource::Fixed(mimo_ula_channels(cfg, layout)?),
        pass => {
            let model = PassChannelModel::new(cfg, layout);
            let uniform = uniform_deployment(cfg);
            let (initial, placement) = match pass {
                SchemeId::ContinuousPass => (uniform, Placement::Grid),
                SchemeId::UniformPass => (uniform, Placement::Frozen),
                SchemeId::DiscretePass(z) => {
                    let sockets = socket_grid(cfg, z)?;
                    (snap_to_sockets(&uniform, &sockets, cfg)?, Placement::Sockets(sockets))
                }
                SchemeId::MimoUla => unreachable!(),
            };
            ChannelSource::Pass {
                model,
                initial,
                placement,
            }
        }
    };
    Ok(SolveSetup {
        cfg: cfg.clone(),
        channels,
    })
}

pub fn solve_scheme(
    scheme: SchemeId,
    cfg: &ScenarioConfig,
    layout: &UserLayout,
    params: &AlgoParams,
) -> Result<SolveReport> {
    solve(&setup_for(scheme, cfg, layout)?, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::validate_deployment;

    #[test]
    fn scheme_names_round_trip() {
        for s in ["continuous_pass", "discrete_pass:16", "uniform_pass", "mimo_ula"] {
            assert_eq!(s.parse::<SchemeId>().unwrap().to_string(), s);
        }
        assert!("discrete_pass:1".parse::<SchemeId>().is_err());
        assert!("pass".parse::<SchemeId>().is_err());
    }

    #[test]
    fn uniform_positions_default() {
        let cfg = ScenarioConfig::paper_default();
        let x = uniform_deployment(&cfg);
        let expected = [1.875, 5.625, 9.375, 13.125];
        for n in 0..cfg.num_waveguides {
            for (m, e) in expected.iter().enumerate() {
                assert!((x.get(m, n) - e).abs() < 1e-12);
            }
        }
        validate_deployment(&x, &cfg).unwrap();
    }

    #[test]
    fn snapped_deployment_is_valid_and_on_sockets() {
        let cfg = ScenarioConfig::paper_default();
        for z in [2usize, 4, 16, 64] {
            let sockets = socket_grid(&cfg, z).unwrap();
            let x = snap_to_sockets(&uniform_deployment(&cfg), &sockets, &cfg);
            if z < cfg.pas_per_waveguide {
                assert!(x.is_err());
                continue;
            }
            let x = x.unwrap();
            validate_deployment(&x, &cfg).unwrap();
            assert!(x.0.iter().all(|v| sockets.contains(v)));
        }
    }

    #[test]
    fn ula_is_centred() {
        let cfg = ScenarioConfig::paper_default();
        let p = ula_positions(&cfg);
        let mean_y: f64 = p.iter().map(|a| a.y).sum::<f64>() / p.len() as f64;
        assert!((mean_y - cfg.area_y / 2.0).abs() < 1e-12);
        let d = p[1].y - p[0].y;
        assert!((d - cfg.consts.half_wavelength()).abs() < 1e-15);
    }
}
