//! Binary embedding checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes   b"TRANSCKG"
//! version    u32       1
//! model      u32       0 = transc, 1 = transe baseline
//! dim        u64
//! instances  u64
//! relations  u64       instance relations only
//! rel_rows   u64       relations + baseline isA translation rows
//! concepts   u64
//! f64 * instances*dim  instance vectors
//! f64 * rel_rows*dim   relation vectors
//! f64 * concepts*dim   sphere centers
//! f64 * concepts       radii
//! ```
//!
//! A checkpoint directory holds `embeddings.bin` plus `config.json` (the
//! training configuration) and `trace.json` (epochs completed and per-epoch losses).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EmbeddingSpace, ModelKind};
use crate::training::{LossBreakdown, TrainConfig, TrainState};

pub const MAGIC: &[u8; 8] = b"TRANSCKG";
pub const VERSION: u32 = 1;
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.json";

pub fn encode_space(space: &EmbeddingSpace) -> Vec<u8> {
    let floats = space.instances.len() + space.relations.len() + space.centers.len() + space.radii.len();
    let mut out = Vec::with_capacity(8 + 4 * 2 + 8 * 5 + 8 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let model: u32 = match space.model {
        ModelKind::TransC => 0,
        ModelKind::TransE => 1,
    };
    out.extend_from_slice(&model.to_le_bytes());
    let dim = space.dim;
    for n in [
        dim,
        space.num_instances(),
        space.num_relations,
        space.relations.len() / dim,
        space.num_concepts(),
    ] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for table in [&space.instances, &space.relations, &space.centers, &space.radii] {
        for x in table.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<usize> {
        usize::try_from(u64::from_le_bytes(self.take(8)?.try_into().ok()?)).ok()
    }

    fn f64s(&mut self, n: usize) -> Option<Vec<f64>> {
        let raw = self.take(n.checked_mul(8)?)?;
        Some(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }
}

pub fn decode_space(bytes: &[u8], path: &Path) -> Result<EmbeddingSpace> {
    let fail = |message: &str| Error::Checkpoint {
        path: path.to_owned(),
        message: message.to_owned(),
    };
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8) != Some(MAGIC.as_slice()) {
        return Err(fail("bad magic"));
    }
    let version = c.u32().ok_or_else(|| fail("truncated header"))?;
    if version != VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let model = match c.u32().ok_or_else(|| fail("truncated header"))? {
        0 => ModelKind::TransC,
        1 => ModelKind::TransE,
        other => return Err(fail(&format!("unknown model tag {other}"))),
    };
    let mut header = [0usize; 5];
    for slot in header.iter_mut() {
        *slot = c.u64().ok_or_else(|| fail("truncated header"))?;
    }
    let [dim, ni, nr, rel_rows, nc] = header;
    if dim == 0 || rel_rows != nr + model.extra_relation_rows() {
        return Err(fail("inconsistent header"));
    }
    let mut table = |rows: usize, cols: usize| {
        rows.checked_mul(cols)
            .and_then(|n| c.f64s(n))
            .ok_or_else(|| fail("truncated data"))
    };
    let instances = table(ni, dim)?;
    let relations = table(rel_rows, dim)?;
    let centers = table(nc, dim)?;
    let radii = table(nc, 1)?;
    if c.pos != bytes.len() {
        return Err(fail("trailing bytes"));
    }
    Ok(EmbeddingSpace {
        dim,
        model,
        num_relations: nr,
        instances,
        relations,
        centers,
        radii,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs_completed: usize,
    pub losses: Vec<LossBreakdown>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn save_space(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_space(space))
}

pub fn load_space(path: impl AsRef<Path>) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_space(&bytes, path)
}

/// Writes `embeddings.bin`, `config.json` and `trace.json` into `dir`.
pub fn save_checkpoint(dir: impl AsRef<Path>, state: &TrainState, config: &TrainConfig) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_space(&state.space, dir.join(EMBEDDINGS_FILE))?;
    write_json(&dir.join(CONFIG_FILE), config)?;
    write_json(
        &dir.join(TRACE_FILE),
        &TrainTrace {
            epochs_completed: state.epoch,
            losses: state.losses.clone(),
        },
    )
}

pub struct Checkpoint {
    pub space: EmbeddingSpace,
    pub config: TrainConfig,
    pub trace: Option<TrainTrace>,
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let space = load_space(dir.join(EMBEDDINGS_FILE))?;
    let config: TrainConfig = read_json(&dir.join(CONFIG_FILE))?;
    let trace_path = dir.join(TRACE_FILE);
    let trace = if trace_path.exists() {
        Some(read_json(&trace_path)?)
    } else {
        None
    };
    if config.dim != space.dim || config.model != space.model {
        return Err(Error::Checkpoint {
            path: dir.to_owned(),
            message: "config.json does not match embeddings header".into(),
        });
    }
    Ok(Checkpoint { space, config, trace })
}

/// Serializes any JSON-able value with a trailing newline.
pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_json(path.as_ref(), value)
}
