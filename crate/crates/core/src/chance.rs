//! Scenario approximation of the chance-constrained variant.
//!
//! Instead of chaining historical windows, `J` windows are drawn i.i.d. from
//! a pool, each with its own random initial state of charge, and only the
//! design is kept in consensus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::BoundaryMap;
use crate::model::{InitialSoc, ScenarioData, SystemSpec};

#[derive(Debug, Error, PartialEq)]
pub enum ChanceError {
    #[error("alpha = {0} must lie in (0, 1]")]
    Alpha(f64),
    #[error("epsilon = {0} must lie in (0, 1)")]
    Epsilon(f64),
    #[error("the number of design parameters must be at least 1")]
    DesignCount,
    #[error("scenario pool is empty")]
    EmptyPool,
    #[error("at least one scenario must be drawn")]
    ZeroCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChanceConfig {
    /// Largest admissible probability of a shortage beyond the threshold.
    pub alpha: f64,
    /// One minus the confidence of the guarantee.
    pub epsilon: f64,
    /// Number of design parameters.
    pub n_design: usize,
}

impl ChanceConfig {
    pub fn validate(&self) -> Result<(), ChanceError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ChanceError::Alpha(self.alpha));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ChanceError::Epsilon(self.epsilon));
        }
        if self.n_design == 0 {
            return Err(ChanceError::DesignCount);
        }
        Ok(())
    }

    /// `2N/α ln(2/α) + 2/α ln(1/ε) + 2N`, before rounding up.
    pub fn bound(&self) -> f64 {
        let n = self.n_design as f64;
        let a = self.alpha;
        2.0 * n / a * (2.0 / a).ln() + 2.0 / a * (1.0 / self.epsilon).ln() + 2.0 * n
    }
}

/// Smallest scenario count meeting the sampling bound.
pub fn required_scenario_count(cfg: &ChanceConfig) -> Result<usize, ChanceError> {
    cfg.validate()?;
    Ok(cfg.bound().ceil() as usize)
}

/// How the initial state of charge of a drawn scenario is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialSocDraw {
    /// Uniform on `[0, cap_max]` MWh.
    #[default]
    Absolute,
    /// Uniform fraction of whatever capacity is installed.
    FractionOfCapacity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IidScenarios {
    pub scenarios: Vec<ScenarioData>,
    /// No boundary consensus: every scenario is unbound.
    pub map: BoundaryMap,
    /// Pool index of every drawn scenario.
    pub picks: Vec<usize>,
}

/// Draws `count` scenarios with replacement from `pool`, each with a random
/// initial state of charge per storage.
pub fn build_iid_scenarios(
    pool: &[ScenarioData],
    count: usize,
    seed: u64,
    system: &SystemSpec,
    draw: InitialSocDraw,
) -> Result<IidScenarios, ChanceError> {
    if pool.is_empty() {
        return Err(ChanceError::EmptyPool);
    }
    if count == 0 {
        return Err(ChanceError::ZeroCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenarios = Vec::with_capacity(count);
    let mut picks = Vec::with_capacity(count);
    for j in 0..count {
        let pick = rng.gen_range(0..pool.len());
        let fractions: Vec<f64> = system.storages.iter().map(|_| rng.gen::<f64>()).collect();
        let initial = match draw {
            InitialSocDraw::Absolute => InitialSoc::Fixed(
                fractions
                    .iter()
                    .zip(&system.storages)
                    .map(|(u, s)| u * s.cap_max)
                    .collect(),
            ),
            InitialSocDraw::FractionOfCapacity => InitialSoc::Fraction(fractions),
        };
        scenarios.push(ScenarioData {
            index: j,
            initial_soc: Some(initial),
            ..pool[pick].clone()
        });
        picks.push(pick);
    }
    Ok(IidScenarios {
        scenarios,
        map: BoundaryMap::independent(count, system.storages.len()),
        picks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StorageSpec;

    fn cfg(n: usize, alpha: f64, epsilon: f64) -> ChanceConfig {
        ChanceConfig {
            alpha,
            epsilon,
            n_design: n,
        }
    }

    fn pool(n: usize) -> Vec<ScenarioData> {
        (0..n)
            .map(|j| ScenarioData {
                index: j,
                demand: vec![j as f64; 4],
                per_unit_gen: vec![],
                dt: 1.0,
                initial_soc: None,
            })
            .collect()
    }

    fn one_storage() -> SystemSpec {
        SystemSpec {
            storages: vec![StorageSpec {
                id: "s".into(),
                eta: 0.9,
                delta: 0.25,
                xi: 0.0,
                inv_cost: 1.0,
                amort: 1.0,
                om_coeff: 1.0,
                cap_min: 0.0,
                cap_max: 8.0,
            }],
            ..Default::default()
        }
    }

    #[test]
    fn count_examples() {
        assert_eq!(required_scenario_count(&cfg(1, 0.5, 0.5)).unwrap(), 11);
        assert_eq!(required_scenario_count(&cfg(6, 0.05, 0.01)).unwrap(), 1082);
        let one = cfg(3, 0.1, 0.05).bound();
        let two = cfg(6, 0.1, 0.05).bound();
        let per_n = 2.0 / 0.1 * (2.0_f64 / 0.1).ln() + 2.0;
        assert!((two - one - 3.0 * per_n).abs() < 1e-9);
    }

    #[test]
    fn count_rejects_bad_config() {
        assert_eq!(required_scenario_count(&cfg(1, 0.0, 0.5)), Err(ChanceError::Alpha(0.0)));
        assert!(required_scenario_count(&cfg(1, 0.5, 1.0)).is_err());
        assert_eq!(
            required_scenario_count(&cfg(0, 0.5, 0.5)),
            Err(ChanceError::DesignCount)
        );
    }

    #[test]
    fn iid_examples() {
        let sys = one_storage();
        let one = build_iid_scenarios(&pool(3), 1, 7, &sys, InitialSocDraw::Absolute).unwrap();
        assert_eq!(one.scenarios.len(), 1);
        assert_eq!(one.map.groups, 0);
        assert!(!one.map.is_bound(0));

        let a = build_iid_scenarios(&pool(5), 20, 42, &sys, InitialSocDraw::Absolute).unwrap();
        let b = build_iid_scenarios(&pool(5), 20, 42, &sys, InitialSocDraw::Absolute).unwrap();
        assert_eq!(a, b);
        for s in &a.scenarios {
            match &s.initial_soc {
                Some(InitialSoc::Fixed(v)) => assert!(v[0] >= 0.0 && v[0] <= 8.0),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(build_iid_scenarios(&[], 3, 0, &sys, InitialSocDraw::Absolute).is_err());
    }
}
