//! JSONL files, sharded outputs and content digests.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    let mut file = BufReader::new(File::open(path)?);
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}: {error}")]
    Io {
        path: PathBuf,
        error: std::io::Error,
    },
    #[error("{path}:{line}: {error}")]
    Parse {
        path: PathBuf,
        line: usize,
        error: serde_json::Error,
    },
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let io = |error| JsonlError::Io {
        path: path.to_path_buf(),
        error,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|error| JsonlError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                error,
            })?,
        );
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialize");
        out.push(b'\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(File::create(path)?);
    file.write_all(&to_jsonl(items))?;
    file.flush()
}

/// One written output file, with its path relative to the run directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardInfo {
    pub path: String,
    pub records: usize,
    pub sha256: String,
}

/// Writes `items` as `<dir>/<stem>-NNNNN.jsonl` files of at most
/// `shard_size` records each. An empty input still writes one empty shard.
/// Each written shard is appended to `written` as soon as it exists.
pub fn write_shards<T: Serialize>(
    root: &Path,
    dir: &str,
    stem: &str,
    items: &[T],
    shard_size: usize,
    written: &mut Vec<ShardInfo>,
) -> std::io::Result<()> {
    std::fs::create_dir_all(root.join(dir))?;
    let chunks: Vec<&[T]> = if items.is_empty() {
        vec![&[]]
    } else {
        items.chunks(shard_size.max(1)).collect()
    };
    for (i, chunk) in chunks.into_iter().enumerate() {
        let rel = format!("{dir}/{stem}-{i:05}.jsonl");
        let bytes = to_jsonl(chunk);
        write_bytes(root, &rel, &bytes, chunk.len(), written)?;
    }
    Ok(())
}

pub fn write_bytes(
    root: &Path,
    rel: &str,
    bytes: &[u8],
    records: usize,
    written: &mut Vec<ShardInfo>,
) -> std::io::Result<()> {
    let path = root.join(rel);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&path, bytes)?;
    written.push(ShardInfo {
        path: rel.to_string(),
        records,
        sha256: sha256_hex(bytes),
    });
    Ok(())
}

/// Reads every shard listed, in order.
pub fn read_shards<T: DeserializeOwned>(
    root: &Path,
    shards: &[ShardInfo],
) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for s in shards {
        out.extend(read_jsonl(&root.join(&s.path))?);
    }
    Ok(out)
}
