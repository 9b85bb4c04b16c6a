// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use camoforge::device::DeviceConfig;
use camoforge::simulate::{WrongKey, DEFAULT_VECTORS, DEFAULT_VECTOR_SEED};
use camoforge::timing::DelayTable;
use serde::{Deserialize, Serialize};

/// Optional run settings read from `--config` or `CAMOFORGE_CONFIG`.
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub delays: Option<PathBuf>,
    pub device: Option<PathBuf>,
    pub seed: Option<u64>,
    pub vectors: Option<usize>,
    pub k: Option<usize>,
    pub wrong_key: Option<WrongKey>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.delays, &mut cfg.device, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub vectors: Option<usize>,
    pub k: Option<usize>,
    pub wrong_key: Option<WrongKey>,
    pub out: Option<PathBuf>,
}

/// Fully resolved settings, echoed next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub config_file: Option<PathBuf>,
    pub delays_file: Option<PathBuf>,
    pub device_file: Option<PathBuf>,
    pub seed: u64,
    pub vectors: usize,
    pub k: usize,
    pub wrong_key: WrongKey,
    pub out: PathBuf,
    #[serde(skip)]
    pub delays: DelayTable<f64>,
    pub device: DeviceConfig,
}

impl Settings {
    pub fn resolve(config_file: Option<&Path>, o: Overrides) -> Result<Self> {
        let cfg = match config_file {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let delays = match &cfg.delays {
            Some(p) => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                DelayTable::from_json(&text).with_context(|| format!("loading {}", p.display()))?
            }
            None => DelayTable::standard(),
        };
        let device = match &cfg.device {
            Some(p) => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                DeviceConfig::from_json(&text)
                    .with_context(|| format!("loading {}", p.display()))?
            }
            None => DeviceConfig::default(),
        };
        let k = o.k.or(cfg.k).unwrap_or(100);
        if k == 0 {
            bail!("k must be at least 1");
        }
        Ok(Settings {
            config_file: config_file.map(Path::to_path_buf),
            delays_file: cfg.delays,
            device_file: cfg.device,
            seed: o.seed.or(cfg.seed).unwrap_or(DEFAULT_VECTOR_SEED),
            vectors: o.vectors.or(cfg.vectors).unwrap_or(DEFAULT_VECTORS),
            k,
            wrong_key: o.wrong_key.or(cfg.wrong_key).unwrap_or(WrongKey::AllInvert),
            out: o.out.or(cfg.out).unwrap_or_else(|| PathBuf::from("out")),
            delays,
            device,
        })
    }

    /// Writes `config.json` into the output directory.
    pub fn echo(&self, command: &[String]) -> Result<()> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let value = serde_json::json!({
            "command": command,
            "settings": self,
            "delays": serde_json::from_str::<serde_json::Value>(&self.delays.to_json())?,
        });
        let path = self.out.join("config.json");
        fs::write(&path, serde_json::to_string_pretty(&value)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}
