use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::tls::{CipherPolicy, ExtensionRegistry, TlsError};
use crate::validation::ValidationConfig;

/// Runtime configuration: extension registry, recognized critical OIDs and
/// ciphersuite lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub validation: ValidationConfig,
    pub registry: ExtensionRegistry,
    pub ciphers: CipherPolicy,
}

/// On-disk form; every field is optional and IDs are hex strings.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extension_registry: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    registry_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recognized_critical_oids: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weak_ciphersuites: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    malware_favored_ciphersuites: Option<Vec<String>>,
}

fn hex(id: u16) -> String {
    format!("0x{id:04x}")
}

fn parse_hex_list(list: &[String], what: &str) -> Result<Vec<u16>, PipelineError> {
    list.iter()
        .map(|s| {
            let digits = s.trim().trim_start_matches("0x").trim_start_matches("0X");
            u16::from_str_radix(digits, 16).map_err(|_| PipelineError::Config(format!("{what}: bad hex value {s:?}")))
        })
        .collect()
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut cfg = PipelineConfig::default();
        if let Some(ids) = &file.extension_registry {
            let version = file.registry_version.clone().unwrap_or_else(|| "custom".into());
            cfg.registry = ExtensionRegistry::new(version, parse_hex_list(ids, "extension_registry")?)
                .map_err(|e: TlsError| PipelineError::Config(e.to_string()))?;
        }
        if let Some(oids) = file.recognized_critical_oids {
            cfg.validation.recognized_critical_oids = oids;
        }
        if let Some(list) = &file.weak_ciphersuites {
            cfg.ciphers.weak = parse_hex_list(list, "weak_ciphersuites")?;
        }
        if let Some(list) = &file.malware_favored_ciphersuites {
            cfg.ciphers.malware_favored = parse_hex_list(list, "malware_favored_ciphersuites")?;
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let file = ConfigFile {
            extension_registry: Some(self.registry.ids().iter().copied().map(hex).collect()),
            registry_version: Some(self.registry.version.clone()),
            recognized_critical_oids: Some(self.validation.recognized_critical_oids.clone()),
            weak_ciphersuites: Some(self.ciphers.weak.iter().copied().map(hex).collect()),
            malware_favored_ciphersuites: Some(self.ciphers.malware_favored.iter().copied().map(hex).collect()),
        };
        serde_json::to_string_pretty(&file).expect("config serializes")
    }
}
