//! Run outputs: CSV state dumps, the per-run manifest, and the output
//! directory bookkeeping shared by all pipelines.
//!
//! Dumps carry `#`-prefixed metadata lines, then a header row, then one row
//! per state: real parts row-major, imaginary parts row-major, and any extra
//! per-state columns. Floats are printed in shortest-round-trip form, so
//! loading a dump reproduces the written matrices bit for bit.

use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};
use crate::error::{Error, Result};
use crate::qstate::{CMatrix, DensityMatrix};

/// Identifies the producing build in metadata and manifests. Overridable via
/// `SCMC_BUILD_DESCRIBE` so packaged builds can embed a VCS description.
pub fn build_describe() -> String {
    match std::env::var("SCMC_BUILD_DESCRIBE") {
        Ok(v) if !v.is_empty() => v,
        _ => format!("scmc {}", env!("CARGO_PKG_VERSION")),
    }
}

pub fn write_state_dump<W: io::Write>(
    w: W,
    metadata: &[String],
    dim: usize,
    states: &[DensityMatrix],
    extras: &[(&str, &[f64])],
) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidInput("state dump needs dim > 0".into()));
    }
    for (name, values) in extras {
        if values.len() != states.len() {
            return Err(Error::InvalidInput(format!(
                "extra column {name} has {} values for {} states",
                values.len(),
                states.len()
            )));
        }
    }
    let mut w = io::BufWriter::new(w);
    for line in metadata {
        writeln!(w, "# {line}")?;
    }
    let mut cols = Vec::with_capacity(2 * dim * dim + extras.len());
    for part in ["re", "im"] {
        for i in 0..dim {
            for j in 0..dim {
                cols.push(format!("{part}_{i}_{j}"));
            }
        }
    }
    cols.extend(extras.iter().map(|(name, _)| name.to_string()));
    writeln!(w, "{}", cols.join(","))?;

    let mut fields: Vec<String> = Vec::with_capacity(cols.len());
    for (k, state) in states.iter().enumerate() {
        if state.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "state {k} has dim {} in a dim-{dim} dump",
                state.dim()
            )));
        }
        fields.clear();
        let m = state.matrix();
        for i in 0..dim {
            for j in 0..dim {
                fields.push(format!("{:e}", m[(i, j)].re));
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                fields.push(format!("{:e}", m[(i, j)].im));
            }
        }
        for (_, values) in extras {
            fields.push(format!("{:e}", values[k]));
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct StateDump {
    /// Metadata lines with the leading `# ` stripped.
    pub comments: Vec<String>,
    pub dim: usize,
    pub states: Vec<DensityMatrix>,
    pub extras: Vec<(String, Vec<f64>)>,
}

pub fn load_state_dump<R: io::Read>(mut r: R) -> Result<StateDump> {
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    let text = std::str::from_utf8(&raw)
        .map_err(|_| Error::InvalidSample("state dump is not valid UTF-8".into()))?;

    let mut comments = Vec::new();
    let mut body = String::with_capacity(text.len());
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            comments.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidSample(format!("unreadable dump header: {e}")))?
        .clone();
    let n_re = headers.iter().take_while(|h| h.starts_with("re_")).count();
    let dim = (n_re as f64).sqrt().round() as usize;
    if dim == 0 || dim * dim != n_re || headers.len() < 2 * n_re {
        return Err(Error::InvalidSample(format!(
            "dump header starts with {n_re} re_ columns; expected a square count \
             followed by as many im_ columns"
        )));
    }
    let mut expected = Vec::with_capacity(2 * n_re);
    for part in ["re", "im"] {
        for i in 0..dim {
            for j in 0..dim {
                expected.push(format!("{part}_{i}_{j}"));
            }
        }
    }
    for (k, want) in expected.iter().enumerate() {
        if headers.get(k) != Some(want.as_str()) {
            return Err(Error::InvalidSample(format!(
                "dump column {k} is {:?}, expected {want}",
                headers.get(k).unwrap_or("<missing>")
            )));
        }
    }
    let extra_names: Vec<String> = headers.iter().skip(2 * n_re).map(String::from).collect();

    let mut states = Vec::new();
    let mut extras: Vec<(String, Vec<f64>)> =
        extra_names.into_iter().map(|n| (n, Vec::new())).collect();
    for (row_idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::InvalidSample(format!("dump row {row_idx}: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::InvalidSample(format!(
                "dump row {row_idx} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        let parse = |k: usize| -> Result<f64> {
            record[k].trim().parse::<f64>().map_err(|_| {
                Error::InvalidSample(format!(
                    "dump row {row_idx}, column {}: {:?} is not a number",
                    headers.get(k).unwrap_or(""),
                    &record[k]
                ))
            })
        };
        let mut m = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let k = i * dim + j;
                m[(i, j)] = Complex64::new(parse(k)?, parse(n_re + k)?);
            }
        }
        let state = DensityMatrix::new(m)
            .map_err(|e| Error::InvalidSample(format!("dump row {row_idx}: {e}")))?;
        states.push(state);
        for (col, (_, values)) in extras.iter_mut().enumerate() {
            values.push(parse(2 * n_re + col)?);
        }
    }
    Ok(StateDump {
        comments,
        dim,
        states,
        extras,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// `manifest.json`: what a run produced, hashed so reruns can be compared
/// byte for byte. Deliberately carries no timestamps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub build: String,
    pub config_hash: String,
    pub outputs: Vec<ManifestEntry>,
}

/// An output directory that records every file written into it.
pub struct RunDir {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl RunDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            entries: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_file(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents),
        });
        Ok(())
    }

    /// Writes `resolved_config.json` and `manifest.json` (which lists every
    /// file except itself) and returns the manifest.
    pub fn finish(mut self, config: &RunConfig) -> Result<Manifest> {
        let config_json = config.to_pretty_json()?;
        self.write_file("resolved_config.json", config_json.as_bytes())?;
        let mut outputs = self.entries;
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            build: build_describe(),
            config_hash: sha256_hex(config_json.as_bytes()),
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}
