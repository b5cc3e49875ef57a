use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ScenarioConfig, ScenarioFile};
use crate::geometry::{Point3, UserLayout};
use crate::Result;

/// Drops primary users, then secondary users, uniformly over the service
/// area. The same seed always yields the same layout.
pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<UserLayout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drop = |count: usize| -> Vec<Point3> {
        (0..count)
            .map(|_| {
                let x = rng.gen_range(0.0..=cfg.area_x);
                let y = rng.gen_range(0.0..=cfg.area_y);
                Point3::new(x, y, 0.0)
            })
            .collect()
    };
    let primary = drop(cfg.num_primary);
    let secondary = drop(cfg.num_secondary);
    UserLayout::new(cfg, primary, secondary)
}

/// Configuration and layout described by a scenario file: the fixed user
/// positions if given, otherwise a random drop from the file's seed.
pub fn scenario_from_file(file: &ScenarioFile) -> Result<(ScenarioConfig, UserLayout)> {
    let cfg = file.to_config()?;
    let layout = match file.fixed_layout(&cfg)? {
        Some(l) => l,
        None => generate_scenario(&cfg, file.seed)?,
    };
    Ok((cfg, layout))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_layout() {
        let cfg = ScenarioConfig::paper_default();
        assert_eq!(generate_scenario(&cfg, 9).unwrap(), generate_scenario(&cfg, 9).unwrap());
        assert_ne!(generate_scenario(&cfg, 9).unwrap(), generate_scenario(&cfg, 10).unwrap());
    }

    #[test]
    fn users_inside_area() {
        let cfg = ScenarioConfig::paper_default();
        for seed in 0..50 {
            let l = generate_scenario(&cfg, seed).unwrap();
            assert_eq!(l.primary.len(), cfg.num_primary);
            assert_eq!(l.secondary.len(), cfg.num_secondary);
        }
    }
}
