use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GenerationTrace, SampleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "record", rename_all = "snake_case")]
pub enum CacheEntry {
    Trace(GenerationTrace),
    Samples(SampleSet),
}

impl CacheEntry {
    pub fn into_trace(self) -> Option<GenerationTrace> {
        match self {
            CacheEntry::Trace(t) => Some(t),
            CacheEntry::Samples(_) => None,
        }
    }

    pub fn into_samples(self) -> Option<SampleSet> {
        match self {
            CacheEntry::Samples(s) => Some(s),
            CacheEntry::Trace(_) => None,
        }
    }
}

/// On-disk store laid out as `<dir>/<first 2 hex of key>/<key>.json`.
#[derive(Debug, Clone)]
pub struct GenerationCache {
    dir: PathBuf,
}

impl GenerationCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(GenerationCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> Result<PathBuf> {
        if key.len() < 2 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::invalid(format!("cache key {key:?} is not a hex digest")));
        }
        Ok(self.dir.join(&key[..2]).join(format!("{key}.json")))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.path_for(key).map(|p| p.is_file()).unwrap_or(false)
    }

    pub fn get_bytes(&self, key: &str) -> Result<Option<Vec<u8>>> {
        let path = self.path_for(key)?;
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>> {
        match self.get_bytes(key)? {
            Some(bytes) => Ok(Some(
                serde_json::from_slice(&bytes).map_err(|e| Error::from(e).context(format!("cache entry {key}")))?,
            )),
            None => Ok(None),
        }
    }

    /// Stores the entry atomically and returns the exact bytes written.
    pub fn put(&self, key: &str, entry: &CacheEntry) -> Result<Vec<u8>> {
        let path = self.path_for(key)?;
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent)?;
        let bytes = serde_json::to_vec(entry)?;
        let tmp = parent.join(format!(".{key}.{}.tmp", std::process::id()));
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TokenStep;

    #[test]
    fn layout_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GenerationCache::open(dir.path()).unwrap();
        let key = "ab".to_owned() + &"0".repeat(62);
        let step = TokenStep {
            token_text: "x".into(),
            chosen_logprob: -0.1234567890123,
            alternatives: vec![("x".into(), -0.1234567890123)],
            tail_mass: 1.0 - (-0.1234567890123f64).exp(),
        };
        let entry = CacheEntry::Trace(GenerationTrace::from_steps("p", vec![step], false));
        assert!(!cache.contains(&key));
        let bytes = cache.put(&key, &entry).unwrap();
        assert!(dir.path().join("ab").join(format!("{key}.json")).is_file());
        assert_eq!(cache.get_bytes(&key).unwrap().unwrap(), bytes);
        assert_eq!(cache.get(&key).unwrap().unwrap(), entry);
        assert!(cache.path_for("../etc").is_err());
    }
}
