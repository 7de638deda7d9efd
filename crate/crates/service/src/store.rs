//! File-backed scenario and result storage.
//!
//! ```text
//! <data>/scenarios/<id>/v<version>.json
//! <data>/results/<run>.json
//! ```
//!
//! Every file is written to a temporary name and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use supsim_core::experiments::ScenarioResult;
use supsim_core::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredScenario {
    pub id: String,
    pub version: u32,
    pub config: ScenarioConfig,
}

pub struct Store {
    root: PathBuf,
    /// All versions of each scenario, oldest first.
    scenarios: Mutex<BTreeMap<String, Vec<ScenarioConfig>>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().ok_or_else(|| io::Error::other("no parent directory"))?;
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file")
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl Store {
    /// Open `root`, loading any scenarios already stored there.
    pub fn open(root: PathBuf) -> io::Result<Store> {
        fs::create_dir_all(root.join("scenarios"))?;
        fs::create_dir_all(root.join("results"))?;
        let mut scenarios = BTreeMap::new();
        for entry in fs::read_dir(root.join("scenarios"))? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            let id = entry.file_name().to_string_lossy().into_owned();
            let mut versions = Vec::new();
            for v in 1.. {
                let p = entry.path().join(format!("v{v}.json"));
                if !p.exists() {
                    break;
                }
                let text = fs::read_to_string(&p)?;
                let config = ScenarioConfig::from_json(&text)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", p.display())))?;
                versions.push(config);
            }
            if !versions.is_empty() {
                scenarios.insert(id, versions);
            }
        }
        Ok(Store {
            root,
            scenarios: Mutex::new(scenarios),
        })
    }

    fn version_path(&self, id: &str, version: u32) -> PathBuf {
        self.root.join("scenarios").join(id).join(format!("v{version}.json"))
    }

    /// Store a new scenario. An identical first version returns the existing
    /// entry and `false`.
    pub fn create(&self, config: ScenarioConfig) -> io::Result<(StoredScenario, bool)> {
        let id = config.digest()[..16].to_string();
        let mut map = self.scenarios.lock().unwrap();
        if let Some(versions) = map.get(&id) {
            let version = versions.len() as u32;
            return Ok((
                StoredScenario {
                    id,
                    version,
                    config: versions[version as usize - 1].clone(),
                },
                false,
            ));
        }
        write_atomic(&self.version_path(&id, 1), config.to_json_pretty().as_bytes())?;
        map.insert(id.clone(), vec![config.clone()]);
        Ok((StoredScenario { id, version: 1, config }, true))
    }

    /// Add a version. Earlier versions stay readable, so runs started from
    /// them are unaffected.
    pub fn update(&self, id: &str, config: ScenarioConfig) -> io::Result<Option<StoredScenario>> {
        let mut map = self.scenarios.lock().unwrap();
        let Some(versions) = map.get_mut(id) else {
            return Ok(None);
        };
        let version = versions.len() as u32 + 1;
        write_atomic(&self.version_path(id, version), config.to_json_pretty().as_bytes())?;
        versions.push(config.clone());
        Ok(Some(StoredScenario {
            id: id.to_string(),
            version,
            config,
        }))
    }

    /// Latest version unless `version` is given.
    pub fn get(&self, id: &str, version: Option<u32>) -> Option<StoredScenario> {
        let map = self.scenarios.lock().unwrap();
        let versions = map.get(id)?;
        let v = version.unwrap_or(versions.len() as u32);
        let config = versions.get((v as usize).checked_sub(1)?)?.clone();
        Some(StoredScenario {
            id: id.to_string(),
            version: v,
            config,
        })
    }

    pub fn list(&self) -> Vec<StoredScenario> {
        let map = self.scenarios.lock().unwrap();
        map.iter()
            .map(|(id, versions)| StoredScenario {
                id: id.clone(),
                version: versions.len() as u32,
                config: versions[versions.len() - 1].clone(),
            })
            .collect()
    }

    fn results_path(&self, run_id: &str) -> PathBuf {
        self.root.join("results").join(format!("{run_id}.json"))
    }

    pub fn publish_results(&self, run_id: &str, result: &ScenarioResult) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(result)?;
        text.push('\n');
        write_atomic(&self.results_path(run_id), text.as_bytes())
    }

    pub fn results_json(&self, run_id: &str) -> io::Result<String> {
        fs::read_to_string(self.results_path(run_id))
    }

    pub fn results(&self, run_id: &str) -> io::Result<ScenarioResult> {
        Ok(serde_json::from_str(&self.results_json(run_id)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versions_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path().into()).unwrap();
        let (s, created) = store.create(ScenarioConfig::reduced()).unwrap();
        assert!(created);
        let (again, created) = store.create(ScenarioConfig::reduced()).unwrap();
        assert!(!created);
        assert_eq!(again.id, s.id);
        let mut c = ScenarioConfig::reduced();
        c.run.replications = 5;
        assert_eq!(store.update(&s.id, c.clone()).unwrap().unwrap().version, 2);
        drop(store);

        let store = Store::open(dir.path().into()).unwrap();
        assert_eq!(store.get(&s.id, None).unwrap().config, c);
        assert_eq!(store.get(&s.id, Some(1)).unwrap().config, ScenarioConfig::reduced());
        assert!(store.get(&s.id, Some(3)).is_none());
        assert!(store.get(&s.id, Some(0)).is_none());
    }
}
