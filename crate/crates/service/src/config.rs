//! Service configuration: a TOML file plus environment overrides.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use htn_tutor::{BandThresholds, ScaffoldPolicy, SkillParams, Sym};
use serde::{Deserialize, Serialize};

pub const ENV_LISTEN: &str = "HTN_TUTOR_LISTEN";
pub const ENV_DATA_DIR: &str = "HTN_TUTOR_DATA_DIR";
pub const ENV_API_TOKEN: &str = "HTN_TUTOR_API_TOKEN";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BktConfig {
    #[serde(default)]
    pub default: SkillParams,
    /// Per-skill overrides.
    #[serde(default)]
    pub skills: BTreeMap<Sym, SkillParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub api_token: Option<String>,
    pub default_policy: String,
    /// Student-model snapshot interval, in recorded updates.
    pub snapshot_every: u64,
    pub bkt: BktConfig,
    pub bands: BandThresholds,
    /// Added to the built-in policies. An entry with a built-in name
    /// replaces that policy.
    pub policies: BTreeMap<String, ScaffoldPolicy>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("data"),
            api_token: None,
            default_policy: "adaptive".into(),
            snapshot_every: 50,
            bkt: BktConfig::default(),
            bands: BandThresholds::default(),
            policies: default_policies(),
        }
    }
}

pub fn default_policies() -> BTreeMap<String, ScaffoldPolicy> {
    BTreeMap::from([
        (
            "adaptive".to_owned(),
            ScaffoldPolicy::Adaptive {
                thresholds: BandThresholds::default(),
            },
        ),
        ("static-full".to_owned(), ScaffoldPolicy::Static { depth: 64 }),
        ("static-step".to_owned(), ScaffoldPolicy::Static { depth: 1 }),
        ("static-answer".to_owned(), ScaffoldPolicy::Static { depth: 0 }),
        (
            "u-shaped".to_owned(),
            ScaffoldPolicy::UShaped {
                d_max: 3,
                d_min: 0,
                midpoint: 10.0,
                width: 10.0,
            },
        ),
        (
            "sigmoid".to_owned(),
            ScaffoldPolicy::Sigmoid {
                d_min: 0,
                d_max: 3,
                midpoint: 5.0,
                steepness: 1.0,
            },
        ),
    ])
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<ServiceConfig, ConfigError> {
        let mut config: ServiceConfig = toml::from_str(text)?;
        for (name, policy) in default_policies() {
            config.policies.entry(name).or_insert(policy);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ServiceConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        ServiceConfig::from_toml(&text)
    }

    /// Applies `HTN_TUTOR_LISTEN`, `HTN_TUTOR_DATA_DIR` and
    /// `HTN_TUTOR_API_TOKEN` from `vars`.
    pub fn apply_env(
        &mut self,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(), ConfigError> {
        for (key, value) in vars {
            match key.as_str() {
                ENV_LISTEN => {
                    self.listen = value
                        .parse()
                        .map_err(|_| ConfigError::Invalid(format!("{ENV_LISTEN}: bad address {value:?}")))?;
                }
                ENV_DATA_DIR => self.data_dir = PathBuf::from(value),
                ENV_API_TOKEN => self.api_token = Some(value).filter(|t| !t.is_empty()),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.policies.contains_key(&self.default_policy) {
            return Err(ConfigError::Invalid(format!(
                "default_policy {:?} is not among the configured policies",
                self.default_policy
            )));
        }
        for (name, p) in &self.policies {
            p.validate()
                .map_err(|e| ConfigError::Invalid(format!("policy {name}: {e}")))?;
        }
        if self.snapshot_every == 0 {
            return Err(ConfigError::Invalid("snapshot_every must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let c = ServiceConfig::from_toml(
            r#"
            listen = "0.0.0.0:9000"
            data_dir = "/var/lib/tutor"
            default_policy = "fade"
            [bkt.default]
            p_init = 0.2
            p_transit = 0.1
            p_guess = 0.2
            p_slip = 0.1
            [bkt.skills.findLCD]
            p_init = 0.5
            p_transit = 0.1
            p_guess = 0.2
            p_slip = 0.1
            [bands]
            low_hi = 0.3
            high_lo = 0.9
            [policies.fade]
            kind = "sigmoid"
            d_min = 0
            d_max = 2
            midpoint = 4.0
            steepness = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(c.listen.port(), 9000);
        assert_eq!(c.bkt.default.p_init, 0.2);
        assert_eq!(c.bkt.skills[&Sym::new("findLCD")].p_init, 0.5);
        assert_eq!(c.bands.high_lo, 0.9);
        assert_eq!(c.policies.len(), default_policies().len() + 1);
        assert!(matches!(c.policies["fade"], ScaffoldPolicy::Sigmoid { d_max: 2, .. }));
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ServiceConfig::from_toml("").unwrap(), ServiceConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ServiceConfig::from_toml("default_policy = \"nope\"").is_err());
        assert!(ServiceConfig::from_toml("[bands]\nlow_hi = 0.9\nhigh_lo = 0.1").is_err());
        assert!(ServiceConfig::from_toml("[bkt.default]\np_init = 2.0\np_transit = 0.1\np_guess = 0.1\np_slip = 0.1").is_err());
        assert!(ServiceConfig::from_toml("colour = 1").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut c = ServiceConfig::default();
        c.apply_env([
            (ENV_LISTEN.to_owned(), "127.0.0.1:3000".to_owned()),
            (ENV_DATA_DIR.to_owned(), "/tmp/x".to_owned()),
            ("PATH".to_owned(), "/bin".to_owned()),
        ])
        .unwrap();
        assert_eq!(c.listen.port(), 3000);
        assert_eq!(c.data_dir, PathBuf::from("/tmp/x"));
        assert!(c.apply_env([(ENV_LISTEN.to_owned(), "nope".to_owned())]).is_err());
    }
}
