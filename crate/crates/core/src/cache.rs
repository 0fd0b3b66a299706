//! Content-addressed string cache: in-memory map, optionally mirrored to disk.
//!
//! Values are pure functions of their keys, so concurrent writers racing on
//! one key are benign (last write wins). Disk writes go to a temp file in
//! the target directory and are renamed into place.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Default)]
pub struct ContentCache {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<String, String>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ContentCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ContentCache {
            dir: Some(dir),
            ..Self::default()
        })
    }

    /// Disk-backed under `root/namespace` when `root` is given, else memory only.
    pub fn open(root: Option<&Path>, namespace: &str) -> Result<Self> {
        match root {
            Some(root) => Self::on_disk(root.join(namespace)),
            None => Ok(Self::in_memory()),
        }
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        let shard = key.get(..2).unwrap_or("__");
        Some(dir.join(shard).join(key))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let in_memory = self.memory.read().expect("cache lock poisoned").get(key).cloned();
        let found = in_memory.or_else(|| {
            let value = std::fs::read_to_string(self.path_for(key)?).ok()?;
            self.memory
                .write()
                .expect("cache lock poisoned")
                .insert(key.to_string(), value.clone());
            Some(value)
        });
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    pub fn put(&self, key: &str, value: &str) -> Result<()> {
        if let Some(path) = self.path_for(key) {
            let parent = path.parent().expect("sharded path has a parent");
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
            tmp.write_all(value.as_bytes()).map_err(|e| Error::io(&path, e))?;
            tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        }
        self.memory
            .write()
            .expect("cache lock poisoned")
            .insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }
}
