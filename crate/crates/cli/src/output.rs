//! Run directory writer. Every file starts with provenance: tool version,
//! config hash and a hash of the file's own content.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use moire_core::csv::{comment_block, Table};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::hex_sha256;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct RunWriter {
    dir: PathBuf,
    config_hash: String,
}

impl RunWriter {
    pub fn create(dir: &Path, config_hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_string(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `table` preceded by `# key=value` provenance lines.
    pub fn csv(&self, name: &str, table: &Table) -> Result<()> {
        let body = table.as_str();
        let content_hash = hex_sha256(body.as_bytes());
        let mut text = comment_block(&[
            ("tool", "moire-spectra"),
            ("version", VERSION),
            ("config_hash", &self.config_hash),
            ("content_hash", &content_hash),
        ]);
        text.push_str(body);
        self.write(name, &text)
    }

    /// Writes a JSON object with a `provenance` member added. The content
    /// hash covers the compact form of the object without that member.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<()> {
        let mut value = serde_json::to_value(body)?;
        let content_hash = hex_sha256(value.to_string().as_bytes());
        let Value::Object(map) = &mut value else {
            anyhow::bail!("{name}: expected a JSON object");
        };
        map.insert(
            "provenance".into(),
            json!({
                "tool": "moire-spectra",
                "version": VERSION,
                "config_hash": self.config_hash,
                "content_hash": content_hash,
            }),
        );
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
