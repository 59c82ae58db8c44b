use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{rt, CliError};

/// Record of one command run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Fully resolved settings; feed back through `--config` to repeat.
    pub config: serde_json::Value,
    /// SHA-256 of each input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    /// Command-specific facts (row counts, class balance, ...).
    pub summary: serde_json::Value,
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: impl AsRef<Path>) -> crate::Result<String> {
    Ok(digest_bytes(&read_bytes(path.as_ref())?))
}

pub(crate) fn read_bytes(path: &Path) -> crate::Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| crate::Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads command settings from TOML, JSON or a manifest of the same command.
pub(crate) fn load_settings<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T, CliError> {
    let bytes = read_bytes(path).map_err(rt)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Usage(format!("{} is not UTF-8 text", path.display())))?;
    let bad = |e: String| CliError::Usage(format!("cannot read settings from {}: {e}", path.display()));
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let value: serde_json::Value = if is_toml {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    let value = match value.get("command").and_then(|c| c.as_str()) {
        Some(c) if value.get("config").is_some() => {
            if c != command {
                return Err(CliError::Usage(format!(
                    "{} is a manifest of `{c}`, not `{command}`",
                    path.display()
                )));
            }
            value["config"].clone()
        }
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

/// Accumulates output files and their digests.
pub(crate) struct Outputs<'a> {
    dir: &'a Path,
    pub digests: BTreeMap<String, String>,
}

impl<'a> Outputs<'a> {
    pub fn new(dir: &'a Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| {
            rt(crate::Error::Io {
                path: dir.display().to_string(),
                source,
            })
        })?;
        Ok(Outputs {
            dir,
            digests: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| {
            rt(crate::Error::Io {
                path: path.display().to_string(),
                source,
            })
        })?;
        self.digests.insert(name.to_string(), digest_bytes(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(rt)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` (not itself listed among the outputs).
    pub fn finish<C: Serialize>(
        self,
        command: &str,
        seed: Option<u64>,
        config: &C,
        inputs: BTreeMap<String, String>,
        summary: serde_json::Value,
    ) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config).map_err(rt)?,
            inputs,
            outputs: self.digests.clone(),
            summary,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(rt)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|source| {
            rt(crate::Error::Io {
                path: path.display().to_string(),
                source,
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            digest_bytes(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default)]
    struct S {
        seed: u64,
        name: String,
    }

    #[test]
    fn settings_from_toml_json_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("a.toml");
        std::fs::write(&toml_path, "seed = 4\n").unwrap();
        let s: S = load_settings(&toml_path, "x").unwrap();
        assert_eq!(s, S { seed: 4, name: String::new() });

        let json_path = dir.path().join("b.json");
        std::fs::write(&json_path, r#"{"command":"x","config":{"name":"n"}}"#).unwrap();
        let s: S = load_settings(&json_path, "x").unwrap();
        assert_eq!(s.name, "n");
        assert!(matches!(load_settings::<S>(&json_path, "y"), Err(CliError::Usage(_))));

        std::fs::write(&json_path, "{not json").unwrap();
        assert!(matches!(load_settings::<S>(&json_path, "x"), Err(CliError::Usage(_))));
    }
}
