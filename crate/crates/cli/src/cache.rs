//! On-disk cache of deterministic point sets.
//!
//! Files live in `$QSW_CACHE_DIR` when set, else `$XDG_CACHE_HOME/qsw`, else
//! `$HOME/.cache/qsw`, else `.qsw-cache` in the working directory. Each set
//! is stored as `<construction>_d<dim>_L<len>_<config hash>.txt` in the
//! point-set text format. Unreadable or mismatching files count as misses;
//! failed writes are recorded but never abort a computation.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use qsw_core::sphere::{CacheKey, PointSetCache, SpherePointSet};

use crate::text::{format_pointset, matches_key, parse_pointset};

pub const CACHE_DIR_ENV: &str = "QSW_CACHE_DIR";

pub fn default_cache_dir() -> PathBuf {
    let from = |var: &str| env::var_os(var).filter(|v| !v.is_empty()).map(PathBuf::from);
    if let Some(dir) = from(CACHE_DIR_ENV) {
        return dir;
    }
    if let Some(dir) = from("XDG_CACHE_HOME") {
        return dir.join("qsw");
    }
    match from("HOME") {
        Some(home) => home.join(".cache").join("qsw"),
        None => PathBuf::from(".qsw-cache"),
    }
}

#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
    pub hits: usize,
    pub misses: usize,
    pub write_errors: Vec<String>,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), hits: 0, misses: 0, write_errors: Vec::new() }
    }

    /// Cache in [`default_cache_dir`].
    pub fn from_env() -> Self {
        Self::new(default_cache_dir())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.txt", key.file_stem()))
    }

    fn try_store(&self, key: &CacheKey, set: &SpherePointSet) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(key);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, format_pointset(set, key.config_hash))?;
        fs::rename(&tmp, &path)
    }
}

impl PointSetCache for DiskCache {
    fn load(&mut self, key: &CacheKey) -> Option<SpherePointSet> {
        let found = fs::read_to_string(self.path_for(key))
            .ok()
            .and_then(|text| parse_pointset(&text).ok())
            .filter(|(set, hash)| matches_key(set, *hash, key))
            .map(|(set, _)| set);
        match found {
            Some(_) => self.hits += 1,
            None => self.misses += 1,
        }
        found
    }

    fn store(&mut self, key: &CacheKey, set: &SpherePointSet) {
        if let Err(e) = self.try_store(key, set) {
            self.write_errors.push(format!("{}: {e}", self.path_for(key).display()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsw_core::sphere::{cached_construction, Construction, OptimizerConfig};

    #[test]
    fn second_lookup_hits_and_matches() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = OptimizerConfig { iterations: 20, ..OptimizerConfig::default() };
        let mut cache = DiskCache::new(dir.path());
        let first = cached_construction(Construction::MinCoulomb, 3, 12, &cfg, &mut cache).unwrap();
        assert_eq!((cache.hits, cache.misses), (0, 1));
        let key = CacheKey::new(Construction::MinCoulomb, 3, 12, &cfg);
        let bytes = fs::read(cache.path_for(&key)).unwrap();
        let mut fresh = DiskCache::new(dir.path());
        let second = cached_construction(Construction::MinCoulomb, 3, 12, &cfg, &mut fresh).unwrap();
        assert_eq!((fresh.hits, fresh.misses), (1, 0));
        assert_eq!(first, second);
        assert_eq!(fs::read(cache.path_for(&key)).unwrap(), bytes);
    }

    #[test]
    fn corrupt_or_foreign_files_are_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = OptimizerConfig::default();
        let mut cache = DiskCache::new(dir.path());
        let key = CacheKey::new(Construction::Spiral, 3, 8, &cfg);
        fs::write(cache.path_for(&key), "garbage").unwrap();
        assert!(cache.load(&key).is_none());
        let other = qsw_core::sphere::spiral_points(9).unwrap();
        fs::write(cache.path_for(&key), format_pointset(&other, 0)).unwrap();
        assert!(cache.load(&key).is_none());
        assert_eq!(cache.misses, 2);
    }

    #[test]
    fn unwritable_directory_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let mut cache = DiskCache::new(blocker.join("sub"));
        let set = cached_construction(Construction::Spiral, 3, 5, &OptimizerConfig::default(), &mut cache).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(cache.write_errors.len(), 1);
    }
}
