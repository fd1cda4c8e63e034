//! Run configuration and its validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{PolicyConfig, SignModel};
use crate::settlement::CoefficientScope;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BalanceDistribution {
    Constant { value: f64 },
    Uniform { min: f64, max: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_agents: usize,
    pub n_rounds: usize,
    pub n_treatments: usize,
    pub initial_balance: BalanceDistribution,
    pub policy: PolicyConfig,
    /// Flat fee burned per submitted action or rating.
    pub fee: f64,
    pub seed: u64,
    pub n_replicates: usize,
    pub coefficient_scope: CoefficientScope,
    /// Fraction of agents that are pure investors (hold balance, never act).
    #[serde(default)]
    pub investor_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_agents: 100,
            n_rounds: 500,
            n_treatments: 5,
            initial_balance: BalanceDistribution::Uniform { min: 50.0, max: 150.0 },
            policy: PolicyConfig::default(),
            fee: 0.0,
            seed: 0,
            n_replicates: 8,
            coefficient_scope: CoefficientScope::PerAgent,
            investor_fraction: 0.0,
        }
    }
}

/// Invalid configuration, naming the offending field.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

fn check(ok: bool, field: &'static str, message: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError {
            field,
            message: message.into(),
        })
    }
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        let config: SimConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Number of pure investors; the rest are doctors who both act and rate.
    pub fn n_investors(&self) -> usize {
        (self.investor_fraction * self.n_agents as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.n_agents >= 2, "n_agents", "must be at least 2")?;
        check(self.n_rounds >= 1, "n_rounds", "must be at least 1")?;
        check(self.n_treatments >= 1, "n_treatments", "must be at least 1")?;
        check(self.n_replicates >= 1, "n_replicates", "must be at least 1")?;
        check(
            self.fee.is_finite() && self.fee >= 0.0,
            "fee",
            "must be finite and non-negative",
        )?;
        match self.initial_balance {
            BalanceDistribution::Constant { value } => check(
                value.is_finite() && value >= 0.0,
                "initial_balance",
                "constant must be finite and non-negative",
            )?,
            BalanceDistribution::Uniform { min, max } => check(
                min.is_finite() && max.is_finite() && min >= 0.0 && min <= max,
                "initial_balance",
                "uniform bounds need 0 <= min <= max",
            )?,
        }
        check(
            unit(self.investor_fraction) && self.n_agents - self.n_investors() >= 2,
            "investor_fraction",
            "must be in [0,1] and leave at least 2 doctors",
        )?;

        let p = &self.policy;
        check(
            p.learning_rate > 0.0 && p.learning_rate < 1.0,
            "policy.learning_rate",
            "must be in (0,1)",
        )?;
        let b = p.staking_rate_bounds;
        check(
            unit(b.min) && unit(b.max) && b.min <= b.max,
            "policy.staking_rate_bounds",
            "need 0 <= min <= max <= 1",
        )?;
        check(unit(p.skip_probability), "policy.skip_probability", "must be in [0,1]")?;
        if let SignModel::NoisyQuality { epsilon } = p.rating_sign_model {
            check(unit(epsilon), "policy.rating_sign_model", "epsilon must be in [0,1]")?;
        }
        check(
            p.treatment_quality.len() == self.n_treatments,
            "policy.treatment_quality",
            format!("needs exactly n_treatments = {} entries", self.n_treatments),
        )?;
        check(
            p.treatment_quality.iter().all(|&q| unit(q)),
            "policy.treatment_quality",
            "every quality must be in [0,1]",
        )?;
        check(
            p.perception_spread.is_finite() && p.perception_spread >= 0.0,
            "policy.perception_spread",
            "must be finite and non-negative",
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn shipped_default_file_matches_default() {
        let text = include_str!("../configs/default.json");
        assert_eq!(SimConfig::from_json(text).unwrap(), SimConfig::default());
    }

    #[test]
    fn schema_lists_every_field() {
        let schema: serde_json::Value = serde_json::from_str(include_str!("../configs/config.schema.json")).unwrap();
        let config = serde_json::to_value(SimConfig::default()).unwrap();
        let keys = |v: &serde_json::Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
        assert_eq!(keys(&schema["properties"]), keys(&config));
        assert_eq!(
            keys(&schema["properties"]["policy"]["properties"]),
            keys(&config["policy"])
        );
    }

    #[test]
    fn field_level_errors() {
        type Edit = Box<dyn Fn(&mut SimConfig)>;
        let cases: Vec<(Edit, &str)> = vec![
            (Box::new(|c| c.n_agents = 1), "n_agents"),
            (Box::new(|c| c.n_rounds = 0), "n_rounds"),
            (Box::new(|c| c.n_replicates = 0), "n_replicates"),
            (Box::new(|c| c.policy.learning_rate = 1.0), "policy.learning_rate"),
            (
                Box::new(|c| c.initial_balance = BalanceDistribution::Uniform { min: 5.0, max: 1.0 }),
                "initial_balance",
            ),
            (
                Box::new(|c| c.policy.treatment_quality.pop().map(|_| ()).unwrap()),
                "policy.treatment_quality",
            ),
            (
                Box::new(|c| c.policy.staking_rate_bounds.min = 0.9),
                "policy.staking_rate_bounds",
            ),
            (Box::new(|c| c.investor_fraction = 0.99), "investor_fraction"),
        ];
        for (mutate, field) in cases {
            let mut c = SimConfig::default();
            mutate(&mut c);
            assert_eq!(c.validate().unwrap_err().field, field);
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v = serde_json::to_value(SimConfig::default()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(matches!(SimConfig::from_json(&v.to_string()), Err(LoadError::Parse(_))));
    }
}
