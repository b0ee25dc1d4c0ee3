//! Timestamped run directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ini::Ini;
use sha2::{Digest, Sha256};

use crate::config::Config;

/// Environment variable naming the root of all run directories.
pub const OUTPUT_ROOT_VAR: &str = "DIRAC_FRONT_OUTPUT";
const DEFAULT_ROOT: &str = "runs";
pub const MANIFEST: &str = "manifest.ini";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .filter(|v| !v.is_empty())
        .map_or_else(|| PathBuf::from(DEFAULT_ROOT), PathBuf::from)
}

pub struct RunDir {
    pub dir: PathBuf,
    created: String,
    files: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
}

impl RunDir {
    /// `<root>/<command>-<timestamp>`, suffixed when the name is taken.
    pub fn create(root: &Path, command: &str) -> Result<Self> {
        let now = chrono::Local::now();
        let stamp = now.format("%Y%m%dT%H%M%S").to_string();
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let mut dir = root.join(format!("{command}-{stamp}"));
        let mut k = 1;
        while dir.exists() {
            k += 1;
            dir = root.join(format!("{command}-{stamp}-{k}"));
        }
        fs::create_dir(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            created: now.to_rfc3339(),
            files: Vec::new(),
            inputs: Vec::new(),
        })
    }

    /// Path of a new output file, recorded for the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        path
    }

    /// Record files written by a library call that returns its own paths.
    pub fn adopt(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.files.extend(paths);
    }

    pub fn subdir(&self, name: &str) -> Result<PathBuf> {
        let d = self.dir.join(name);
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn finish(self, config: &Config) -> Result<PathBuf> {
        let mut ini = Ini::new();
        ini.with_section(Some("run"))
            .set("command", config.command.as_str())
            .set("created", self.created.as_str())
            .set("config_hash", config.hash())
            .set(
                "config_file",
                config.file.as_ref().map_or(String::new(), |p| p.display().to_string()),
            );
        for (key, value) in config.entries() {
            ini.with_section(Some("config")).set(key, value);
        }
        for input in &self.inputs {
            ini.with_section(Some("inputs"))
                .set(input.display().to_string(), hash_path(input)?);
        }
        let mut files = self.files.clone();
        files.sort();
        files.dedup();
        for f in &files {
            let rel = f.strip_prefix(&self.dir).unwrap_or(f);
            ini.with_section(Some("files"))
                .set(rel.display().to_string(), hash_path(f)?);
        }
        ini.write_to_file(self.dir.join(MANIFEST))
            .with_context(|| format!("writing manifest in {}", self.dir.display()))?;
        Ok(self.dir)
    }
}

/// SHA-256 of a file, or of the sorted files below a directory.
pub fn hash_path(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for e in entries {
            h.update(
                e.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
                    .as_bytes(),
            );
            h.update(hash_path(&e)?.as_bytes());
        }
    } else {
        h.update(fs::read(path).with_context(|| format!("reading {}", path.display()))?);
    }
    Ok(hex::encode(h.finalize()))
}
