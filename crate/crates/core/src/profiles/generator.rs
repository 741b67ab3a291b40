//! Seeded synthetic profile datasets.
//!
//! Each agent draws a global latent level, each main capability mixes that
//! level with its own noise, and each detail mixes its main latent with
//! detail noise. Scores are the rounded, clamped latents on the 0..=6 scale.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Phase, Profile, ProfileDataset, ProfileError};
use crate::taxonomy::{sitting_over_table_set, CapabilityCatalog, CapabilityId, Quantification};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    /// Number of agents.
    pub count: usize,
    /// Emit only the pre-rehab phase instead of pre/post pairs.
    pub pre_only: bool,
    pub ids: Vec<CapabilityId>,
    /// Mean of the latent score.
    pub center: f64,
    /// Scale of the latent score in quantification units.
    pub spread: f64,
    /// Share of a main latent explained by the agent's global level.
    pub agent_weight: f64,
    /// Share of a detail latent explained by its main latent.
    pub within_main: f64,
    /// Fraction of profiles turned constant or hole-punched.
    pub degenerate_fraction: f64,
    /// Mean score gain between pre and post phase.
    pub improvement: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            count: 1040,
            pre_only: false,
            ids: sitting_over_table_set(&CapabilityCatalog::reference()),
            center: 3.5,
            spread: 1.2,
            agent_weight: 0.5,
            within_main: 0.9,
            degenerate_fraction: 0.1,
            improvement: 0.5,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ProfileError::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("within_main", self.within_main)?;
        unit("agent_weight", self.agent_weight)?;
        unit("degenerate_fraction", self.degenerate_fraction)?;
        if !(0.0..=6.0).contains(&self.center) {
            return Err(ProfileError::Config(format!("center must lie in [0, 6], got {}", self.center)));
        }
        if !(self.spread.is_finite() && self.spread >= 0.0) {
            return Err(ProfileError::Config(format!("spread must be non-negative, got {}", self.spread)));
        }
        if !self.improvement.is_finite() {
            return Err(ProfileError::Config("improvement must be finite".into()));
        }
        if self.ids.is_empty() && self.count > 0 {
            return Err(ProfileError::Config("no capability ids to generate".into()));
        }
        Ok(())
    }
}

fn score(latent: f64) -> Quantification {
    let v = latent.round().clamp(Quantification::MIN.value() as f64, Quantification::MAX.value() as f64);
    Quantification::new(v as i64).expect("clamped")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Applies the degenerate transform to a profile with the configured probability.
fn maybe_degenerate(p: &mut Profile, ids: &[CapabilityId], cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) {
    if !rng.random_bool(cfg.degenerate_fraction) {
        return;
    }
    if rng.random_bool(0.5) {
        let level = score(cfg.center + cfg.spread * normal(rng));
        for id in ids {
            p.set(*id, level);
        }
    } else {
        let holes = rng.random_range(1..=3.min(ids.len()));
        for _ in 0..holes {
            let id = ids[rng.random_range(0..ids.len())];
            p.set_missing(id);
        }
    }
}

pub fn generate_synthetic_profiles(config: &GeneratorConfig, seed: u64) -> Result<ProfileDataset, ProfileError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = config.ids.clone();
    ids.sort();
    ids.dedup();

    let aw = config.agent_weight;
    let rho = config.within_main;
    let mut profiles = Vec::with_capacity(config.count * 2);
    for agent in 0..config.count {
        let global = normal(&mut rng);
        let mut mains: BTreeMap<CapabilityId, f64> = BTreeMap::new();
        let mut latent = Vec::with_capacity(ids.len());
        for id in &ids {
            let main = *mains
                .entry(id.main_level())
                .or_insert_with(|| aw.sqrt() * global + (1.0 - aw).sqrt() * normal(&mut rng));
            latent.push(rho.sqrt() * main + (1.0 - rho).sqrt() * normal(&mut rng));
        }

        let agent_id = format!("agent{agent:05}");
        let mut pre = Profile::new(&agent_id, Phase::PreRehab);
        for (id, z) in ids.iter().zip(&latent) {
            pre.set(*id, score(config.center + config.spread * z));
        }
        let mut post = None;
        if !config.pre_only {
            let mut p = Profile::new(&agent_id, Phase::PostRehab);
            for (id, z) in ids.iter().zip(&latent) {
                let gain = config.improvement + 0.5 * normal(&mut rng);
                p.set(*id, score(config.center + config.spread * z + gain));
            }
            post = Some(p);
        }
        maybe_degenerate(&mut pre, &ids, config, &mut rng);
        profiles.push(pre);
        if let Some(mut p) = post {
            maybe_degenerate(&mut p, &ids, config, &mut rng);
            profiles.push(p);
        }
    }
    ProfileDataset::new(ids, profiles, format!("synthetic seed={seed} count={}", config.count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_count_is_empty() {
        let cfg = GeneratorConfig { count: 0, ..Default::default() };
        let ds = generate_synthetic_profiles(&cfg, 1).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn same_seed_same_dataset() {
        let cfg = GeneratorConfig { count: 50, ..Default::default() };
        let a = generate_synthetic_profiles(&cfg, 7).unwrap();
        let b = generate_synthetic_profiles(&cfg, 7).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let c = generate_synthetic_profiles(&cfg, 8).unwrap();
        assert_ne!(a.to_csv_string(), c.to_csv_string());
    }

    #[test]
    fn emits_phase_pairs() {
        let cfg = GeneratorConfig { count: 3, ..Default::default() };
        let ds = generate_synthetic_profiles(&cfg, 0).unwrap();
        let phases: Vec<_> = ds.profiles().iter().map(|p| p.phase).collect();
        assert_eq!(phases.len(), 6);
        assert_eq!(phases[0], Phase::PreRehab);
        assert_eq!(phases[1], Phase::PostRehab);
        let pre = GeneratorConfig { pre_only: true, ..cfg };
        assert_eq!(generate_synthetic_profiles(&pre, 0).unwrap().len(), 3);
    }

    #[test]
    fn degenerate_fraction_one_yields_degenerate_profiles() {
        let cfg = GeneratorConfig { count: 40, degenerate_fraction: 1.0, ..Default::default() };
        let ds = generate_synthetic_profiles(&cfg, 3).unwrap();
        let ids = ds.columns().to_vec();
        for p in ds.profiles() {
            let incomplete = !p.is_complete_over(&ids);
            let constant = !incomplete && crate::profiles::profile_std(p, &ids).unwrap() == 0.0;
            assert!(incomplete || constant, "{}", p.agent_id);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            GeneratorConfig { within_main: 1.5, ..Default::default() },
            GeneratorConfig { within_main: -0.1, ..Default::default() },
            GeneratorConfig { degenerate_fraction: 2.0, ..Default::default() },
            GeneratorConfig { spread: -1.0, ..Default::default() },
        ] {
            assert!(matches!(generate_synthetic_profiles(&cfg, 0), Err(ProfileError::Config(_))));
        }
    }
}
