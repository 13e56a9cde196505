//! Binary layout, little-endian:
//!
//! ```text
//! "PEFN" | version u32 | n_traj u32 | T u32 | C u32 | H u32 | W u32 | dtype u8 | 7 reserved
//! payload: n_traj * T * C * H * W values, C-order (traj, t, c, y, x)
//! CRC32 of the payload, u32
//! ```
//!
//! Spacing, record interval, channel names and the generating config live in
//! a JSON sidecar next to the file.

use std::path::{Path, PathBuf};

use ndarray::Array4;
use serde::{Deserialize, Serialize};

use super::{read_file, write_atomic, Reader};
use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, TrajectoryInfo};

pub const DATASET_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 36;
const MAGIC: &[u8; 4] = b"PEFN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn from_code(c: u8) -> Result<Dtype> {
        match c {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            _ => Err(Error::Data(format!("unknown dtype code {c}"))),
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub version: u32,
    pub trajectories: usize,
    pub slices: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub dtype: Dtype,
}

impl DatasetHeader {
    pub fn values(&self) -> usize {
        self.trajectories * self.slices * self.channels * self.height * self.width
    }
}

/// Contents of the `.meta.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// What produced the data, e.g. `"swe"`.
    pub source: String,
    pub trajectories: usize,
    pub shape: [usize; 4],
    pub dtype: Dtype,
    pub crc32: u32,
    pub info: TrajectoryInfo,
    /// Resolved configuration of the producing command.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub meta: Option<DatasetMeta>,
    pub trajectories: Vec<Trajectory>,
}

/// `data.pefn` -> `data.pefn.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Data(format!("{what} = {v} does not fit the header")))
}

pub fn encode_dataset(trajectories: &[Trajectory], dtype: Dtype) -> Result<Vec<u8>> {
    let first = trajectories.first().ok_or_else(|| Error::Data("dataset has no trajectories".into()))?;
    let (t, c, h, w) = first.shape();
    if let Some(i) = trajectories.iter().position(|tr| tr.shape() != (t, c, h, w)) {
        return Err(Error::shape(format!("trajectory {i} is {:?}, trajectory 0 is {:?}", trajectories[i].shape(), (t, c, h, w))));
    }
    let n = trajectories.len() * t * c * h * w;
    let mut out = Vec::with_capacity(HEADER_LEN + n * dtype.width() + 4);
    out.extend_from_slice(MAGIC);
    for (v, what) in [
        (DATASET_VERSION as usize, "version"),
        (trajectories.len(), "trajectories"),
        (t, "T"),
        (c, "C"),
        (h, "H"),
        (w, "W"),
    ] {
        out.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
    }
    out.push(dtype.code());
    out.extend_from_slice(&[0; 7]);
    for tr in trajectories {
        // `iter` walks logical order, so non-standard layouts are fine.
        for &v in tr.data.iter() {
            match dtype {
                Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    let crc = crc32fast::hash(&out[HEADER_LEN..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parses and checksums a dataset. Spacing and names come from `info`, or
/// default to a unit square with `c0, c1, ...` when absent.
pub fn decode_dataset(bytes: &[u8], info: Option<&TrajectoryInfo>) -> Result<(DatasetHeader, Vec<Trajectory>)> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Data("not a dataset file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Data(format!("unsupported dataset version {version}")));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let dtype = Dtype::from_code(r.take(1)?[0])?;
    if r.take(7)?.iter().any(|&b| b != 0) {
        return Err(Error::Data("reserved header bytes are not zero".into()));
    }
    let header = DatasetHeader {
        version,
        trajectories: dims[0],
        slices: dims[1],
        channels: dims[2],
        height: dims[3],
        width: dims[4],
        dtype,
    };
    let payload_len = header
        .values()
        .checked_mul(dtype.width())
        .ok_or_else(|| Error::Data("declared sizes overflow".into()))?;
    if r.remaining() != payload_len + 4 {
        return Err(Error::Data(format!(
            "header declares {payload_len} payload bytes, file holds {}",
            r.remaining().saturating_sub(4)
        )));
    }
    let start = r.position();
    let payload = r.take(payload_len)?;
    let stored = r.u32()?;
    let computed = crc32fast::hash(&bytes[start..start + payload_len]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let values: Vec<f64> = match dtype {
        Dtype::F32 => payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        Dtype::F64 => payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
    };
    let (t, c, h, w) = (header.slices, header.channels, header.height, header.width);
    let default_info = TrajectoryInfo {
        dt_record: 1.0,
        dx: 1.0 / w.max(1) as f64,
        dy: 1.0 / h.max(1) as f64,
        channels: (0..c).map(|i| format!("c{i}")).collect(),
    };
    let info = info.unwrap_or(&default_info);
    let per = t * c * h * w;
    let trajectories = (0..header.trajectories)
        .map(|i| {
            let data = Array4::from_shape_vec((t, c, h, w), values[i * per..(i + 1) * per].to_vec())
                .expect("payload length checked");
            Trajectory::new(data, info.dt_record, info.dx, info.dy, info.channels.clone())
        })
        .collect::<Result<_>>()?;
    Ok((header, trajectories))
}

/// Writes the dataset and its sidecar, both atomically.
pub fn write_dataset(
    path: &Path,
    trajectories: &[Trajectory],
    dtype: Dtype,
    source: &str,
    config: serde_json::Value,
) -> Result<DatasetMeta> {
    let bytes = encode_dataset(trajectories, dtype)?;
    let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let (t, c, h, w) = trajectories[0].shape();
    let meta = DatasetMeta {
        source: source.to_string(),
        trajectories: trajectories.len(),
        shape: [t, c, h, w],
        dtype,
        crc32: crc,
        info: trajectories[0].info(),
        config,
    };
    write_atomic(path, &bytes)?;
    let json = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
    write_atomic(&sidecar_path(path), &json)?;
    Ok(meta)
}

/// Reads a dataset, picking up its sidecar when present.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = read_file(path)?;
    let side = sidecar_path(path);
    let meta: Option<DatasetMeta> = if side.exists() {
        let raw = read_file(&side)?;
        Some(serde_json::from_slice(&raw).map_err(|e| Error::Data(format!("{}: {e}", side.display())))?)
    } else {
        None
    };
    let (header, trajectories) = decode_dataset(&bytes, meta.as_ref().map(|m| &m.info))?;
    Ok(Dataset { header, meta, trajectories })
}
