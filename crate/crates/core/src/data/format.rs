//! Canonical window file.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic        4 bytes  "DGW1"
//! version      u32      1
//! channels     u32
//! timesteps    u32
//! num_windows  u64
//! num_classes  u32
//! num_domains  u32
//! per window:
//!   activity   u16
//!   domain     u16      0xFFFF = unknown
//!   values     f64 × channels × timesteps, channel-major
//! ```
//!
//! A plain-text sidecar `<file>.meta` holds `key=value` lines (dataset name,
//! grouping, windowing parameters, normalization statistics).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{DomainDataset, SensorWindow, UNKNOWN_DOMAIN};
use crate::error::{Error, Result};

pub const WINDOW_MAGIC: &[u8; 4] = b"DGW1";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 4 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowFile {
    pub channels: usize,
    pub timesteps: usize,
    pub num_classes: usize,
    pub num_domains: usize,
    pub windows: Vec<SensorWindow>,
}

/// Ordered `key=value` metadata stored next to a window file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sidecar(pub BTreeMap<String, String>);

impl Sidecar {
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.0.insert(key.into(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn path_for(window_file: &Path) -> PathBuf {
        let mut s = window_file.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    pub fn to_text(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "expected key=value".into(),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Sidecar(map))
    }
}

impl WindowFile {
    pub fn from_domains(domains: &[DomainDataset], num_classes: usize) -> Result<Self> {
        let first = domains
            .first()
            .ok_or_else(|| Error::InvalidArgument("no domains to store".into()))?;
        let (channels, timesteps) = first.shape();
        let num_domains = domains
            .iter()
            .map(|d| d.domain_id as usize + 1)
            .max()
            .unwrap_or(0);
        let windows = domains.iter().flat_map(|d| d.windows.iter().cloned()).collect();
        let file = WindowFile {
            channels,
            timesteps,
            num_classes,
            num_domains,
            windows,
        };
        file.check()?;
        Ok(file)
    }

    /// Groups windows back into per-domain datasets, ordered by domain id.
    /// Names are taken from `domain.<id>.name` sidecar keys when present.
    pub fn into_domains(self, sidecar: &Sidecar) -> Result<Vec<DomainDataset>> {
        let mut groups: Vec<Vec<SensorWindow>> = vec![Vec::new(); self.num_domains];
        for w in self.windows {
            let d = w.domain.ok_or_else(|| {
                Error::InvalidArgument("window file contains windows with unknown domain".into())
            })?;
            groups[d as usize].push(w);
        }
        groups
            .into_iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .map(|(id, g)| {
                let name = sidecar
                    .get(&format!("domain.{id}.name"))
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("domain-{id}"));
                DomainDataset::new(name, id as u16, g)
            })
            .collect()
    }

    fn check(&self) -> Result<()> {
        if self.num_domains > UNKNOWN_DOMAIN as usize || self.num_classes > u16::MAX as usize {
            return Err(Error::InvalidArgument("too many classes or domains".into()));
        }
        for (i, w) in self.windows.iter().enumerate() {
            if w.channels() != self.channels || w.timesteps() != self.timesteps {
                return Err(Error::shape("window file", format!("window {i} has the wrong shape")));
            }
            if w.activity as usize >= self.num_classes {
                return Err(Error::InvalidArgument(format!(
                    "window {i}: activity {} >= {}",
                    w.activity, self.num_classes
                )));
            }
            if matches!(w.domain, Some(d) if d as usize >= self.num_domains) {
                return Err(Error::InvalidArgument(format!("window {i}: domain out of range")));
            }
        }
        Ok(())
    }
}

pub fn write_window_file(path: &Path, file: &WindowFile, sidecar: &Sidecar) -> Result<()> {
    file.check()?;
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(f);
    let mut write = |bytes: &[u8]| out.write_all(bytes).map_err(|e| Error::io(path, e));
    write(WINDOW_MAGIC)?;
    write(&VERSION.to_le_bytes())?;
    write(&(file.channels as u32).to_le_bytes())?;
    write(&(file.timesteps as u32).to_le_bytes())?;
    write(&(file.windows.len() as u64).to_le_bytes())?;
    write(&(file.num_classes as u32).to_le_bytes())?;
    write(&(file.num_domains as u32).to_le_bytes())?;
    for w in &file.windows {
        write(&w.activity.to_le_bytes())?;
        write(&w.domain.unwrap_or(UNKNOWN_DOMAIN).to_le_bytes())?;
        for v in w.values.iter() {
            write(&v.to_le_bytes())?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    let meta = Sidecar::path_for(path);
    fs::write(&meta, sidecar.to_text()).map_err(|e| Error::io(&meta, e))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Corrupt {
                path: self.path.to_path_buf(),
                reason: format!("truncated at byte {}", self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a window file and its sidecar (an absent sidecar reads as empty).
pub fn read_window_file(path: &Path) -> Result<(WindowFile, Sidecar)> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let mut cur = Cursor { buf: &buf, pos: 0, path };
    if cur.take(4)? != WINDOW_MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let channels = cur.u32()? as usize;
    let timesteps = cur.u32()? as usize;
    let n = cur.u64()? as usize;
    let num_classes = cur.u32()? as usize;
    let num_domains = cur.u32()? as usize;
    let per_window = 4 + 8 * channels * timesteps;
    if buf.len() != HEADER_LEN + n * per_window {
        return Err(corrupt(format!(
            "expected {} bytes for {n} windows, found {}",
            HEADER_LEN + n * per_window,
            buf.len()
        )));
    }
    let mut windows = Vec::with_capacity(n);
    for i in 0..n {
        let activity = cur.u16()?;
        let domain = match cur.u16()? {
            UNKNOWN_DOMAIN => None,
            d => Some(d),
        };
        let mut values = Vec::with_capacity(channels * timesteps);
        for _ in 0..channels * timesteps {
            let v = cur.f64()?;
            if !v.is_finite() {
                return Err(corrupt(format!("window {i} has a non-finite value")));
            }
            values.push(v);
        }
        let values = Array2::from_shape_vec((channels, timesteps), values)
            .map_err(|e| corrupt(e.to_string()))?;
        windows.push(SensorWindow::new(values, activity, domain));
    }
    let file = WindowFile {
        channels,
        timesteps,
        num_classes,
        num_domains,
        windows,
    };
    file.check().map_err(|e| corrupt(e.to_string()))?;
    let meta = Sidecar::path_for(path);
    let sidecar = match fs::read_to_string(&meta) {
        Ok(text) => Sidecar::parse(&text, &meta)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Sidecar::default(),
        Err(e) => return Err(Error::io(&meta, e)),
    };
    Ok((file, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> WindowFile {
        WindowFile {
            channels: 2,
            timesteps: 3,
            num_classes: 4,
            num_domains: 2,
            windows: vec![
                SensorWindow::new(array![[1.0, 2.0, 3.0], [-0.5, 1e-300, 7.0]], 3, Some(1)),
                SensorWindow::new(array![[0.0, 0.0, 0.0], [9.0, 8.0, 7.0]], 0, None),
            ],
        }
    }

    #[test]
    fn header_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.dgw");
        write_window_file(&path, &sample(), &Sidecar::default()).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"DGW1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        // first window: activity 3, domain 1, then values[0][0] = 1.0
        assert_eq!(&bytes[32..36], &[3, 0, 1, 0]);
        assert_eq!(f64::from_le_bytes(bytes[36..44].try_into().unwrap()), 1.0);
        // channel-major: second value is values[0][1]
        assert_eq!(f64::from_le_bytes(bytes[44..52].try_into().unwrap()), 2.0);
        let second = 32 + 4 + 6 * 8;
        assert_eq!(&bytes[second..second + 4], &[0, 0, 0xFF, 0xFF]);
        assert_eq!(bytes.len(), HEADER_LEN + 2 * (4 + 48));
    }

    #[test]
    fn round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.dgw");
        let mut meta = Sidecar::default();
        meta.set("dataset", "toy").set("window_len", 3);
        write_window_file(&path, &sample(), &meta).unwrap();
        let (file, side) = read_window_file(&path).unwrap();
        assert_eq!(file, sample());
        assert_eq!(side, meta);
        for (a, b) in file.windows[0].values.iter().zip(sample().windows[0].values.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncation_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.dgw");
        write_window_file(&path, &sample(), &Sidecar::default()).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_window_file(&path), Err(Error::Corrupt { .. })));
        fs::write(&path, b"XXXX").unwrap();
        assert!(matches!(read_window_file(&path), Err(Error::Corrupt { .. })));
    }
}
