use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use anyhow::Context;
use polynet::FeatureTable;
use serde::Serialize;

pub fn read_table(path: &Path) -> anyhow::Result<FeatureTable> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    FeatureTable::read_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

pub fn write_table(path: &Path, table: &FeatureTable) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_bytes(path, &buf)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

/// `<path>.<suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    s.into()
}
