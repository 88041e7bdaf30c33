//! On-disk formats: matrix text files, checkpoints, CSV tables and the manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use phydrl_core::agent::{AgentConfig, AgentParams};
use phydrl_core::Mat;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, bytes).map_err(CliError::io(path))
}

/// Whitespace-separated rows, 17 significant digits (round-trips every `f64`).
pub fn matrix_to_text(m: &Mat) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn matrix_from_text(text: &str, path: &Path) -> Result<Mat, CliError> {
    let bad = |msg: String| CliError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number `{t}`"))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(bad("ragged or empty matrix".into()));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<(), CliError> {
    write_file(path, matrix_to_text(m).as_bytes())
}

pub fn read_matrix(path: &Path) -> Result<Mat, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    matrix_from_text(&text, path)
}

const MAGIC: &[u8; 8] = b"PHYDRLCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub seed: u64,
    /// SHA-256 of the resolved configuration text.
    pub config_hash: [u8; 32],
    pub state_dim: u32,
    pub hidden_sizes: Vec<u32>,
    pub action_scale: f64,
    pub updates: u64,
    pub optimizer_steps: (u64, u64),
}

/// Little-endian binary: header, then every parameter array as `rows, cols, data` (column-major).
pub fn encode_checkpoint(agent: &AgentParams, config_hash: [u8; 32]) -> Vec<u8> {
    let cfg = agent.config();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out.extend_from_slice(&config_hash);
    out.extend_from_slice(&(cfg.state_dim as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.hidden_sizes.len() as u32).to_le_bytes());
    for h in &cfg.hidden_sizes {
        out.extend_from_slice(&(*h as u32).to_le_bytes());
    }
    out.extend_from_slice(&cfg.action_scale.to_le_bytes());
    out.extend_from_slice(&agent.updates().to_le_bytes());
    let (sa, sc) = agent.optimizer_steps();
    out.extend_from_slice(&sa.to_le_bytes());
    out.extend_from_slice(&sc.to_le_bytes());
    let tensors = agent.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CliError> {
        if self.bytes.len() < n {
            return Err(CliError::Format {
                path: self.path.to_path_buf(),
                msg: "truncated checkpoint".into(),
            });
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decodes a checkpoint into an agent built from `cfg`; shapes must match exactly.
pub fn decode_checkpoint(bytes: &[u8], cfg: &AgentConfig, path: &Path) -> Result<(CheckpointHeader, AgentParams), CliError> {
    let bad = |msg: String| CliError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut r = Reader { bytes, path };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let seed = r.u64()?;
    let config_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let state_dim = r.u32()?;
    let layers = r.u32()? as usize;
    let hidden_sizes = (0..layers).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let action_scale = r.f64()?;
    let updates = r.u64()?;
    let optimizer_steps = (r.u64()?, r.u64()?);
    let header = CheckpointHeader {
        version,
        seed,
        config_hash,
        state_dim,
        hidden_sizes,
        action_scale,
        updates,
        optimizer_steps,
    };
    let expected: Vec<u32> = cfg.hidden_sizes.iter().map(|h| *h as u32).collect();
    if header.state_dim as usize != cfg.state_dim || header.hidden_sizes != expected {
        return Err(bad("checkpoint architecture does not match the configuration".into()));
    }
    let mut agent_cfg = cfg.clone();
    agent_cfg.seed = seed;
    agent_cfg.action_scale = action_scale;
    let mut agent = AgentParams::new(agent_cfg)?;
    let count = r.u32()? as usize;
    let mut tensors = agent.tensors_mut();
    if count != tensors.len() {
        return Err(bad(format!("expected {} arrays, found {count}", tensors.len())));
    }
    for t in tensors.iter_mut() {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if (rows, cols) != t.shape() {
            return Err(bad(format!("array shape {rows}x{cols} does not match {:?}", t.shape())));
        }
        for v in t.iter_mut() {
            *v = r.f64()?;
        }
    }
    if !r.bytes.is_empty() {
        return Err(bad("trailing bytes after checkpoint".into()));
    }
    drop(tensors);
    agent.set_updates(updates);
    agent.set_optimizer_steps(optimizer_steps.0, optimizer_steps.1);
    Ok((header, agent))
}

pub fn read_checkpoint(path: &Path, cfg: &AgentConfig) -> Result<(CheckpointHeader, AgentParams), CliError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(CliError::io(path))?;
    decode_checkpoint(&bytes, cfg, path)
}

/// Formats a float for CSV output; round-trips exactly.
pub fn csv_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Buffered CSV table written in one go.
#[derive(Debug, Clone)]
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            columns: header.len(),
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "CSV row width");
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, self.text.as_bytes())
    }
}

/// `manifest.txt`: one `sha256  schema  relative/path` line per artifact.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    dir: PathBuf,
    entries: BTreeMap<String, (String, String)>,
}

pub const MANIFEST: &str = "manifest.txt";

impl Manifest {
    /// Loads the existing manifest of `dir`, if any.
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let mut m = Self {
            dir: dir.to_path_buf(),
            entries: BTreeMap::new(),
        };
        let path = dir.join(MANIFEST);
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(CliError::Format {
                        path,
                        msg: format!("bad manifest line `{line}`"),
                    });
                }
                m.entries
                    .insert(parts[2].to_string(), (parts[0].to_string(), parts[1].to_string()));
            }
        }
        Ok(m)
    }

    /// Writes `bytes` to `dir/rel` and records its hash.
    pub fn write(&mut self, rel: &str, schema: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_file(&self.dir.join(rel), bytes)?;
        self.entries
            .insert(rel.to_string(), (sha256_hex(bytes), schema.to_string()));
        Ok(())
    }

    pub fn get(&self, rel: &str) -> Option<&str> {
        self.entries.get(rel).map(|(h, _)| h.as_str())
    }

    pub fn save(&self) -> Result<(), CliError> {
        let mut text = String::new();
        for (rel, (hash, schema)) in &self.entries {
            let _ = writeln!(text, "{hash}  {schema}  {rel}");
        }
        let path = self.dir.join(MANIFEST);
        let mut f = fs::File::create(&path).map_err(CliError::io(&path))?;
        f.write_all(text.as_bytes()).map_err(CliError::io(&path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_text_round_trip() {
        let m = Mat::from_row_slice(2, 3, &[1.0 / 3.0, -2e-17, 5.0, 0.1, 1e300, -0.0]);
        let back = matrix_from_text(&matrix_to_text(&m), Path::new("m")).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ragged_matrix_rejected() {
        assert!(matrix_from_text("1 2\n3\n", Path::new("m")).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = AgentConfig {
            hidden_sizes: vec![5, 3],
            seed: 42,
            ..AgentConfig::new(4, 15.0)
        };
        let mut agent = AgentParams::new(cfg.clone()).unwrap();
        agent.set_updates(7);
        agent.set_optimizer_steps(7, 7);
        let bytes = encode_checkpoint(&agent, [9; 32]);
        let (header, back) = decode_checkpoint(&bytes, &cfg, Path::new("ck")).unwrap();
        assert_eq!(back, agent);
        assert_eq!(header.seed, 42);
        assert_eq!(header.config_hash, [9; 32]);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1], &cfg, Path::new("ck")).is_err());
        let other = AgentConfig {
            hidden_sizes: vec![5],
            ..cfg
        };
        assert!(decode_checkpoint(&bytes, &other, Path::new("ck")).is_err());
    }
}
