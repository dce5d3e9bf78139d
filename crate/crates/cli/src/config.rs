//! Optional TOML config file. Every field may be omitted; command-line flags
//! win over file values, which win over built-in defaults.

use std::path::Path;

use rof_accel::channel::ChannelConfig;
use rof_accel::cost_model::ResourceProfile;
use rof_accel::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub arithmetic: Option<String>,
    pub schedule: Option<String>,
    pub profile: Option<ProfileSpec>,
    pub symbols: Option<usize>,
    pub channel: Option<ChannelConfig>,
    pub train: Option<TrainConfig>,
}

/// A preset name (`vc709`, `arty7`, `unit`) or a full table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Preset(String),
    Custom(ResourceProfile),
}

impl ProfileSpec {
    pub fn resolve(&self) -> Result<ResourceProfile, Failure> {
        let p = match self {
            ProfileSpec::Preset(name) => ResourceProfile::preset(name)?,
            ProfileSpec::Custom(p) => p.clone(),
        };
        p.validate()?;
        Ok(p)
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
    }
}

/// Flag if given, else file value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// `value` as TOML with every line prefixed by `# `.
pub fn header<S: Serialize>(command: &str, value: &S) -> Result<String, Failure> {
    let body = toml::to_string(value).map_err(|e| Failure::Invalid(e.to_string()))?;
    let mut out = format!("# rof-accel {command}\n");
    for line in body.lines().filter(|l| !l.is_empty()) {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}
