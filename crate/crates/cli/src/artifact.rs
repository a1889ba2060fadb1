//! Content-addressed cache for expensive upstream results.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::OnStale;
use crate::error::{CliError, Result};

/// SHA-256 of the JSON encoding of `value`, as lowercase hex.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let hash = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in hash.iter() {
        write!(out, "{b:02x}").expect("writing to a String");
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    key: String,
    content_hash: String,
    payload: T,
}

#[derive(Debug, Clone)]
pub struct Cache {
    pub dir: PathBuf,
    pub enabled: bool,
    pub on_stale: OnStale,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fetched {
    pub content_hash: String,
    pub hit: bool,
}

impl Cache {
    fn path(&self, kind: &str, key: &str) -> PathBuf {
        self.dir.join(format!("{kind}-{}.json", &key[..16]))
    }

    /// Loads the artifact for `inputs`, or computes and stores it. A file
    /// whose key or content hash does not match is stale.
    pub fn fetch<T, I, F>(&self, kind: &str, inputs: &I, compute: F) -> Result<(T, Fetched)>
    where
        T: Serialize + DeserializeOwned,
        I: Serialize + ?Sized,
        F: FnOnce() -> Result<T>,
    {
        let key = digest(&(kind, env!("CARGO_PKG_VERSION"), inputs))?;
        let path = self.path(kind, &key);
        if self.enabled && path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
            match serde_json::from_str::<Envelope<T>>(&text) {
                Ok(env) => {
                    let found = digest(&env.payload)?;
                    if env.key == key && found == env.content_hash {
                        log::info!("using cached {kind} {}", path.display());
                        return Ok((env.payload, Fetched { content_hash: found, hit: true }));
                    }
                    self.stale(&path, &env.content_hash, &found)?;
                }
                Err(_) => self.stale(&path, &key, "unreadable")?,
            }
        }
        let payload = compute()?;
        let content_hash = digest(&payload)?;
        if self.enabled {
            fs::create_dir_all(&self.dir).map_err(|e| CliError::Io { path: self.dir.display().to_string(), source: e })?;
            let env = Envelope { key, content_hash: content_hash.clone(), payload };
            fs::write(&path, serde_json::to_vec(&env)?).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
            return Ok((env.payload, Fetched { content_hash, hit: false }));
        }
        Ok((payload, Fetched { content_hash, hit: false }))
    }

    fn stale(&self, path: &std::path::Path, expected: &str, found: &str) -> Result<()> {
        match self.on_stale {
            OnStale::Abort => {
                Err(CliError::StaleArtifact { path: path.display().to_string(), expected: expected.into(), found: found.into() })
            }
            OnStale::Recompute => {
                log::warn!("recomputing stale artifact {}", path.display());
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cache(dir: &std::path::Path, on_stale: OnStale) -> Cache {
        Cache { dir: dir.to_path_buf(), enabled: true, on_stale }
    }

    #[test]
    fn second_fetch_hits() {
        let tmp = tempfile::tempdir().unwrap();
        let c = cache(tmp.path(), OnStale::Abort);
        let (a, f) = c.fetch("x", &1u32, || Ok(vec![1.5f64, 2.25])).unwrap();
        assert!(!f.hit);
        let (b, g): (Vec<f64>, _) = c.fetch("x", &1u32, || panic!("should be cached")).unwrap();
        assert!(g.hit);
        assert_eq!(a, b);
        assert_eq!(f.content_hash, g.content_hash);
        let (_, h): (Vec<f64>, _) = c.fetch("x", &2u32, || Ok(vec![0.0])).unwrap();
        assert!(!h.hit);
    }

    #[test]
    fn tampered_artifact_is_stale() {
        let tmp = tempfile::tempdir().unwrap();
        let c = cache(tmp.path(), OnStale::Abort);
        c.fetch("x", "k", || Ok(vec![1.0f64])).unwrap();
        let file = fs::read_dir(tmp.path()).unwrap().next().unwrap().unwrap().path();
        let text = fs::read_to_string(&file).unwrap().replace("[1.0]", "[2.0]");
        fs::write(&file, text).unwrap();
        let err = c.fetch::<Vec<f64>, _, _>("x", "k", || Ok(vec![1.0])).unwrap_err();
        assert!(matches!(err, CliError::StaleArtifact { .. }));
        assert_eq!(err.exit_code(), 1);
        let (v, f) = cache(tmp.path(), OnStale::Recompute).fetch("x", "k", || Ok(vec![1.0f64])).unwrap();
        assert_eq!(v, vec![1.0]);
        assert!(!f.hit);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest(&[1, 2, 3]).unwrap(), digest(&vec![1, 2, 3]).unwrap());
        assert_eq!(digest("").unwrap().len(), 64);
    }
}
