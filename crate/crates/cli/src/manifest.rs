use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use ssoct::io::{read_file, write_file};
use ssoct::Result;

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
struct Entry {
    path: String,
    bytes: u64,
    sha256: String,
}

/// Content hashes of every file a command wrote, with the configuration
/// that produced them. Paths are relative and use `/`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    command: String,
    config: RunConfig,
    files: Vec<Entry>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let mut config = config.clone();
        config.output_root = None;
        Self {
            command: command.to_string(),
            config,
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, root: &Path, file: &Path) -> Result<()> {
        let bytes = read_file(file)?;
        let rel = file.strip_prefix(root).unwrap_or(file);
        let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        self.files.push(Entry {
            path,
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn write(mut self, path: &Path) -> Result<()> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let mut text = serde_json::to_string_pretty(&self).expect("serializable");
        text.push('\n');
        write_file(path, text.as_bytes())
    }
}
