use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dstkit::backends::{BackendDescriptor, BackendKind};
use dstkit::corpus::{DEFAULT_DOMAINS, KNOWN_DOMAINS};
use dstkit::negsample::SamplerConfig;
use dstkit::prompting::PromptConfig;
use dstkit::selftrain::SelfTrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Overrides the endpoint of every remote backend.
pub const ENDPOINT_ENV: &str = "DSTKIT_BACKEND_ENDPOINT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub work_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            ratio: 0.05,
            seed: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Backends {
    pub values: BackendDescriptor,
    pub slots: BackendDescriptor,
}

impl Default for Backends {
    fn default() -> Self {
        Self {
            values: BackendDescriptor::oracle(),
            slots: BackendDescriptor::oracle(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub domains: Vec<String>,
    pub split: SplitParams,
    pub prompt: PromptConfig,
    pub sampler: SamplerConfig,
    pub selftrain: SelfTrainConfig,
    pub backends: Backends,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            domains: DEFAULT_DOMAINS.iter().map(|d| d.to_string()).collect(),
            split: SplitParams::default(),
            prompt: PromptConfig::default(),
            sampler: SamplerConfig::default(),
            selftrain: SelfTrainConfig::default(),
            backends: Backends::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&raw)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(raw: &str) -> Result<Self, CliError> {
        toml::from_str(raw).map_err(|e| CliError::config(e.to_string().replace('\n', " ")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::config(format!("cannot render config: {e}")))
    }

    pub fn domain_filter(&self) -> BTreeSet<String> {
        self.domains.iter().cloned().collect()
    }

    /// Point every remote descriptor at `endpoint`.
    pub fn override_endpoint(&mut self, endpoint: &str) {
        for d in [
            &mut self.backends.values,
            &mut self.backends.slots,
            &mut self.selftrain.teacher,
            &mut self.selftrain.estimator,
        ] {
            if d.kind == BackendKind::Remote {
                d.endpoint = Some(endpoint.to_string());
            }
        }
    }

    pub fn apply_env(&mut self) {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            if !endpoint.trim().is_empty() {
                self.override_endpoint(endpoint.trim());
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.domains.is_empty() {
            return Err(CliError::config("domains must not be empty"));
        }
        if let Some(d) = self
            .domains
            .iter()
            .find(|d| !KNOWN_DOMAINS.contains(&d.as_str()))
        {
            return Err(CliError::config(format!("unknown domain {d:?}")));
        }
        if !(self.split.ratio > 0.0 && self.split.ratio <= 1.0) {
            return Err(CliError::config(format!(
                "split.ratio {} outside (0, 1]",
                self.split.ratio
            )));
        }
        self.prompt.validate().map_err(CliError::config_from)?;
        self.selftrain.validate().map_err(CliError::config_from)?;
        self.backends
            .values
            .validate()
            .map_err(CliError::config_from)?;
        self.backends
            .slots
            .validate()
            .map_err(CliError::config_from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Oracle,
    Noisy,
    Remote,
}

/// Replace a descriptor's kind, keeping whatever settings still apply.
pub fn with_kind(d: &BackendDescriptor, kind: KindArg) -> Result<BackendDescriptor, CliError> {
    let base = match kind {
        KindArg::Oracle => BackendDescriptor::oracle(),
        KindArg::Noisy => BackendDescriptor::noisy(d.profile.clone().unwrap_or_default()),
        KindArg::Remote => {
            let endpoint = d
                .endpoint
                .clone()
                .or_else(|| std::env::var(ENDPOINT_ENV).ok())
                .ok_or_else(|| {
                    CliError::config(format!(
                        "remote backend needs an endpoint (config or {ENDPOINT_ENV})"
                    ))
                })?;
            BackendDescriptor::remote(endpoint)
        }
    };
    Ok(BackendDescriptor {
        timeout_ms: d.timeout_ms,
        max_concurrency: d.max_concurrency,
        ..base
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("[split]\nratio = 0.1\nsed = 3").is_err());
        assert!(RunConfig::parse("[selftrain.teacher]\nkind = \"oracle\"\nextra = 1").is_err());
    }

    #[test]
    fn nested_sections_parse() {
        let cfg = RunConfig::parse(
            r#"
            domains = ["hotel", "train"]
            [split]
            ratio = 0.01
            [selftrain]
            threshold = 0.9
            [selftrain.teacher]
            kind = "noisy"
            profile = { drop_prob = 0.3, seed = 7 }
            [selftrain.trainer]
            kind = "scheduled"
            profiles = [{ drop_prob = 0.1 }]
            [backends.values]
            kind = "remote"
            endpoint = "http://localhost:8000"
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.split.seed, 10);
        assert_eq!(
            cfg.selftrain.teacher.profile.as_ref().unwrap().drop_prob,
            0.3
        );
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg = RunConfig {
            domains: vec!["spaceport".into()],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.split.ratio = 1.5;
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::parse("[backends.values]\nkind = \"remote\"").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn endpoint_override_touches_remote_only() {
        let mut cfg =
            RunConfig::parse("[backends.values]\nkind = \"remote\"\nendpoint = \"http://a\"")
                .unwrap();
        cfg.override_endpoint("http://b");
        assert_eq!(cfg.backends.values.endpoint.as_deref(), Some("http://b"));
        assert_eq!(cfg.backends.slots.endpoint, None);
    }
}
