//! Importer for the USC human activity dataset.
//!
//! Expected layout: `<root>/Subject<N>/a<activity>t<trial>.mat`, each file a
//! MATLAB v5 file with a `sensor_readings` matrix of `samples × 6` (triaxial
//! accelerometer and gyroscope). Trials are cut into windows with
//! [`window_stream`](super::window_stream).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use super::{window_stream, DomainDataset, SensorWindow};
use crate::error::{Error, Result};

pub const CHANNELS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct UschadOptions {
    pub groups: Vec<Vec<u32>>,
    pub activities: Vec<u32>,
    pub window_len: usize,
    pub stride: usize,
}

impl Default for UschadOptions {
    fn default() -> Self {
        Self {
            groups: vec![
                vec![1, 2, 3],
                vec![4, 5, 6],
                vec![7, 8, 9],
                vec![10, 11, 12],
                vec![13, 14],
            ],
            activities: (1..=12).collect(),
            window_len: 128,
            stride: 64,
        }
    }
}

pub fn import_uschad(root: &Path) -> Result<Vec<DomainDataset>> {
    import_uschad_with(root, &UschadOptions::default())
}

/// Parses `a<activity>t<trial>.mat`.
fn trial_name(name: &str) -> Option<(u32, u32)> {
    let stem = name.strip_prefix('a')?.strip_suffix(".mat")?;
    let (a, t) = stem.split_once('t')?;
    Some((a.parse().ok()?, t.parse().ok()?))
}

fn trials(subject_dir: &Path) -> Result<Vec<(u32, u32, PathBuf)>> {
    let mut out: Vec<(u32, u32, PathBuf)> = fs::read_dir(subject_dir)
        .map_err(|e| Error::io(subject_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let (a, t) = trial_name(p.file_name()?.to_str()?)?;
            Some((a, t, p))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Reads `sensor_readings` as a `channels × samples` matrix.
pub fn read_sensor_readings(path: &Path) -> Result<Array2<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        line: 0,
        reason,
    };
    let mat = matfile::MatFile::parse(std::io::BufReader::new(file))
        .map_err(|e| malformed(format!("not a readable MAT file: {e:?}")))?;
    let arr = mat
        .find_by_name("sensor_readings")
        .ok_or_else(|| malformed("no `sensor_readings` variable".into()))?;
    let size = arr.size();
    if size.len() != 2 || size[1] != CHANNELS {
        return Err(malformed(format!("sensor_readings has size {size:?}, expected [n, {CHANNELS}]")));
    }
    let n = size[0];
    let data: Vec<f64> = match arr.data() {
        matfile::NumericData::Double { real, .. } => real.clone(),
        matfile::NumericData::Single { real, .. } => real.iter().map(|&v| v as f64).collect(),
        _ => return Err(malformed("sensor_readings is not floating point".into())),
    };
    if data.len() != n * CHANNELS {
        return Err(malformed("sensor_readings element count mismatch".into()));
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(malformed(format!(
            "non-finite value at sample {} channel {}",
            i % n.max(1),
            i / n.max(1)
        )));
    }
    // MAT data is column-major, so each channel is already contiguous.
    Array2::from_shape_vec((CHANNELS, n), data).map_err(|e| malformed(e.to_string()))
}

/// Writes a minimal uncompressed MATLAB v5 file holding one double matrix
/// `sensor_readings` given as `channels × samples`. Useful for fixtures.
pub fn write_sensor_mat(path: &Path, readings: &Array2<f64>) -> Result<()> {
    fn tag(buf: &mut Vec<u8>, ty: u32, len: u32) {
        buf.extend_from_slice(&ty.to_le_bytes());
        buf.extend_from_slice(&len.to_le_bytes());
    }
    fn pad8(buf: &mut Vec<u8>) {
        while buf.len() % 8 != 0 {
            buf.push(0);
        }
    }
    let (channels, n) = readings.dim();
    let name = b"sensor_readings";
    let mut body = Vec::new();
    // array flags: mxDOUBLE_CLASS
    tag(&mut body, 6, 8);
    body.extend_from_slice(&6u32.to_le_bytes());
    body.extend_from_slice(&0u32.to_le_bytes());
    // dimensions
    tag(&mut body, 5, 8);
    body.extend_from_slice(&(n as i32).to_le_bytes());
    body.extend_from_slice(&(channels as i32).to_le_bytes());
    // name
    tag(&mut body, 1, name.len() as u32);
    body.extend_from_slice(name);
    pad8(&mut body);
    // real part, column-major
    tag(&mut body, 9, (n * channels * 8) as u32);
    for v in readings.iter() {
        body.extend_from_slice(&v.to_le_bytes());
    }
    pad8(&mut body);

    let mut out = Vec::with_capacity(128 + 8 + body.len());
    let mut text = b"MATLAB 5.0 MAT-file, fixture".to_vec();
    text.resize(116, b' ');
    out.extend_from_slice(&text);
    out.extend_from_slice(&[0u8; 8]);
    out.extend_from_slice(&0x0100u16.to_le_bytes());
    out.extend_from_slice(b"IM");
    tag(&mut out, 14, body.len() as u32);
    out.extend_from_slice(&body);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn import_uschad_with(root: &Path, opts: &UschadOptions) -> Result<Vec<DomainDataset>> {
    if !root.is_dir() {
        return Err(Error::Missing(root.to_path_buf()));
    }
    let mut jobs = Vec::new();
    for (g, subjects) in opts.groups.iter().enumerate() {
        for &s in subjects {
            let dir = root.join(format!("Subject{s}"));
            if !dir.is_dir() {
                return Err(Error::Ingest(format!(
                    "subject {s} missing: {} not found",
                    dir.display()
                )));
            }
            let found = trials(&dir)?;
            for (class, &act) in opts.activities.iter().enumerate() {
                let mut any = false;
                for (a, _, path) in &found {
                    if *a == act {
                        jobs.push((g, class, path.clone()));
                        any = true;
                    }
                }
                if !any {
                    return Err(Error::Missing(dir.join(format!("a{act}t1.mat"))));
                }
            }
        }
    }
    let windowed: Vec<Result<(usize, Vec<SensorWindow>)>> = jobs
        .par_iter()
        .map(|(g, class, path)| {
            let signal = read_sensor_readings(path)?;
            if signal.ncols() < opts.window_len {
                return Ok((*g, Vec::new()));
            }
            let labels = vec![*class as u16; signal.ncols()];
            let w = window_stream(&signal, &labels, opts.window_len, opts.stride, Some(*g as u16))?;
            Ok((*g, w))
        })
        .collect();
    let mut per_domain: Vec<Vec<SensorWindow>> = vec![Vec::new(); opts.groups.len()];
    for r in windowed {
        let (g, w) = r?;
        per_domain[g].extend(w);
    }
    per_domain
        .into_iter()
        .enumerate()
        .map(|(g, windows)| {
            let subjects: Vec<String> = opts.groups[g].iter().map(|s| s.to_string()).collect();
            DomainDataset::new(format!("uschad-subjects-{}", subjects.join("-")), g as u16, windows)
        })
        .collect()
}
