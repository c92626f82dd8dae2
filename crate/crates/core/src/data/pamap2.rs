//! Importer for the PAMAP2 physical activity monitoring dataset.
//!
//! Expected layout: `<root>/Protocol/subject1NN.dat` (the `Protocol/` level is
//! optional). Each row has 54 space-separated columns: timestamp, activity
//! id, heart rate, then 17 columns for each of the hand, chest and ankle
//! IMUs (temperature, two 3-axis accelerometers, gyroscope, magnetometer,
//! 4 orientation values). Only the 12 motion channels of each IMU are kept.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use tracing::info;

use super::{window_stream, DomainDataset, SensorWindow};
use crate::error::{Error, Result};

pub const COLUMNS: usize = 54;
pub const CHANNELS: usize = 36;
const IMU_STARTS: [usize; 3] = [3, 20, 37];
const IMU_NAMES: [&str; 3] = ["hand", "chest", "ankle"];
const IMU_FIELDS: [&str; 12] = [
    "acc16_x", "acc16_y", "acc16_z", "acc6_x", "acc6_y", "acc6_z", "gyro_x", "gyro_y", "gyro_z",
    "mag_x", "mag_y", "mag_z",
];

/// Source column of each retained channel.
fn channel_columns() -> impl Iterator<Item = usize> {
    IMU_STARTS.into_iter().flat_map(|s| s + 1..s + 13)
}

pub fn channel_name(ch: usize) -> String {
    format!("{}_{}", IMU_NAMES[ch / 12], IMU_FIELDS[ch % 12])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pamap2Options {
    pub groups: Vec<Vec<u32>>,
    /// Retained activity IDs; class index is the position in this list.
    pub activities: Vec<u32>,
    pub window_len: usize,
    pub stride: usize,
}

impl Default for Pamap2Options {
    fn default() -> Self {
        Self {
            groups: vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![7, 8]],
            // lying, sitting, standing, walking, ascending stairs,
            // descending stairs, vacuum cleaning, ironing
            activities: vec![1, 2, 3, 4, 12, 13, 16, 17],
            window_len: 128,
            stride: 64,
        }
    }
}

pub fn import_pamap2(root: &Path) -> Result<Vec<DomainDataset>> {
    import_pamap2_with(root, &Pamap2Options::default())
}

/// Fills NaN runs by linear interpolation between the nearest finite
/// neighbours, extending the edge values at either end. Returns `false` when
/// the series has no finite value at all.
pub fn interpolate_missing(series: &mut [f64]) -> bool {
    let known: Vec<usize> = (0..series.len()).filter(|&i| series[i].is_finite()).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return series.is_empty();
    };
    for i in 0..first {
        series[i] = series[first];
    }
    for i in last + 1..series.len() {
        series[i] = series[last];
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a > 1 {
            let (va, vb) = (series[a], series[b]);
            for i in a + 1..b {
                let f = (i - a) as f64 / (b - a) as f64;
                series[i] = va + (vb - va) * f;
            }
        }
    }
    true
}

struct Recording {
    /// class per row, `None` for rows outside the retained activity set
    labels: Vec<Option<u16>>,
    /// channel-major, one vector per channel
    channels: Vec<Vec<f64>>,
}

fn parse_recording(path: &Path, subject: u32, activities: &[u32]) -> Result<Recording> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    let mut channels = vec![Vec::new(); CHANNELS];
    let mut excluded = 0usize;
    let mut fields = Vec::with_capacity(COLUMNS);
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        fields.clear();
        for f in line.split_whitespace() {
            let v: f64 = if f.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                f.parse().map_err(|_| Error::Malformed {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: format!("bad number `{f}`"),
                })?
            };
            fields.push(v);
        }
        if fields.len() != COLUMNS {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("expected {COLUMNS} columns, found {}", fields.len()),
            });
        }
        let act = fields[1];
        let class = activities
            .iter()
            .position(|&a| act.is_finite() && a as f64 == act)
            .map(|c| c as u16);
        if class.is_none() {
            excluded += 1;
        }
        labels.push(class);
        for (ch, col) in channel_columns().enumerate() {
            channels[ch].push(fields[col]);
        }
    }
    if excluded > 0 {
        info!(subject, excluded, "excluded rows outside the retained activity set");
    }
    for (ch, series) in channels.iter_mut().enumerate() {
        if !interpolate_missing(series) {
            return Err(Error::Ingest(format!(
                "subject {subject}: channel {} ({}) has no valid values",
                ch,
                channel_name(ch)
            )));
        }
    }
    Ok(Recording { labels, channels })
}

fn window_recording(
    rec: &Recording,
    opts: &Pamap2Options,
    domain: u16,
) -> Result<Vec<SensorWindow>> {
    let mut out = Vec::new();
    let n = rec.labels.len();
    let mut start = 0;
    // windows never cross a stretch of excluded rows
    while start < n {
        if rec.labels[start].is_none() {
            start += 1;
            continue;
        }
        let mut end = start;
        while end < n && rec.labels[end].is_some() {
            end += 1;
        }
        if end - start >= opts.window_len {
            let signal = Array2::from_shape_fn((CHANNELS, end - start), |(c, t)| {
                rec.channels[c][start + t]
            });
            let labels: Vec<u16> = rec.labels[start..end].iter().map(|l| l.unwrap()).collect();
            out.extend(window_stream(&signal, &labels, opts.window_len, opts.stride, Some(domain))?);
        }
        start = end;
    }
    Ok(out)
}

fn resolve_file(root: &Path, subject: u32) -> PathBuf {
    let name = format!("subject{}.dat", 100 + subject);
    let nested = root.join("Protocol").join(&name);
    if nested.is_file() {
        nested
    } else {
        root.join(name)
    }
}

pub fn import_pamap2_with(root: &Path, opts: &Pamap2Options) -> Result<Vec<DomainDataset>> {
    if !root.is_dir() {
        return Err(Error::Missing(root.to_path_buf()));
    }
    let mut jobs = Vec::new();
    for (g, subjects) in opts.groups.iter().enumerate() {
        for &s in subjects {
            let path = resolve_file(root, s);
            if !path.is_file() {
                return Err(Error::Missing(path));
            }
            jobs.push((g, s, path));
        }
    }
    let results: Vec<Result<(usize, Vec<SensorWindow>)>> = jobs
        .par_iter()
        .map(|(g, s, path)| {
            let rec = parse_recording(path, *s, &opts.activities)?;
            Ok((*g, window_recording(&rec, opts, *g as u16)?))
        })
        .collect();
    let mut per_domain: Vec<Vec<SensorWindow>> = vec![Vec::new(); opts.groups.len()];
    for r in results {
        let (g, w) = r?;
        per_domain[g].extend(w);
    }
    per_domain
        .into_iter()
        .enumerate()
        .map(|(g, windows)| {
            let subjects: Vec<String> = opts.groups[g].iter().map(|s| s.to_string()).collect();
            DomainDataset::new(format!("pamap2-subjects-{}", subjects.join("-")), g as u16, windows)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    /// One row; every IMU channel carries `value + channel`.
    fn row(t: usize, activity: u32, value: f64) -> String {
        let mut fields = vec![format!("{}", t as f64 * 0.01), activity.to_string(), "NaN".into()];
        let mut ch = 0;
        for col in 3..COLUMNS {
            let in_imu = IMU_STARTS.iter().any(|&s| col > s && col <= s + 12);
            if in_imu {
                fields.push(format!("{}", value + ch as f64));
                ch += 1;
            } else {
                fields.push("1.0".into());
            }
        }
        fields.join(" ")
    }

    fn write_subject(dir: &Path, subject: u32, rows: &[(u32, f64)]) {
        let mut s = String::new();
        for (t, &(a, v)) in rows.iter().enumerate() {
            writeln!(s, "{}", row(t, a, v)).unwrap();
        }
        let p = dir.join("Protocol");
        fs::create_dir_all(&p).unwrap();
        fs::write(p.join(format!("subject{}.dat", 100 + subject)), s).unwrap();
    }

    fn small_opts(groups: Vec<Vec<u32>>) -> Pamap2Options {
        Pamap2Options {
            groups,
            window_len: 8,
            stride: 4,
            ..Default::default()
        }
    }

    #[test]
    fn interpolation_is_linear_with_edge_extension() {
        let mut s = vec![f64::NAN, 1.0, f64::NAN, f64::NAN, f64::NAN, 9.0, f64::NAN];
        assert!(interpolate_missing(&mut s));
        assert_eq!(s, vec![1.0, 1.0, 3.0, 5.0, 7.0, 9.0, 9.0]);
        let mut all = vec![f64::NAN; 3];
        assert!(!interpolate_missing(&mut all));
    }

    #[test]
    fn nan_run_inside_window_is_interpolated() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<(u32, f64)> = (0..8).map(|t| (4, t as f64 * 2.0)).collect();
        write_subject(dir.path(), 1, &rows);
        // blank out timesteps 3..6 of the first IMU channel
        let path = dir.path().join("Protocol/subject101.dat");
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<String> = text
            .lines()
            .enumerate()
            .map(|(t, l)| {
                let mut f: Vec<&str> = l.split(' ').collect();
                if (3..6).contains(&t) {
                    f[4] = "NaN";
                }
                f.join(" ")
            })
            .collect();
        fs::write(&path, lines.join("\n")).unwrap();
        let doms = import_pamap2_with(dir.path(), &small_opts(vec![vec![1]])).unwrap();
        let w = &doms[0].windows[0];
        // neighbours at t=2 (4.0) and t=6 (12.0)
        let got: Vec<f64> = (2..=6).map(|t| w.values[[0, t]]).collect();
        assert_eq!(got, vec![4.0, 6.0, 8.0, 10.0, 12.0]);
        assert_eq!(w.activity, 3); // walking is the 4th retained activity
    }

    #[test]
    fn unknown_activities_are_excluded() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows = vec![(1u32, 0.0); 8];
        rows.extend(vec![(0u32, 5.0); 6]); // transient
        rows.extend(vec![(24u32, 5.0); 6]); // rope jumping, not retained
        rows.extend(vec![(17u32, 1.0); 12]);
        write_subject(dir.path(), 1, &rows);
        let doms = import_pamap2_with(dir.path(), &small_opts(vec![vec![1]])).unwrap();
        let labels: Vec<u16> = doms[0].windows.iter().map(|w| w.activity).collect();
        // 8 rows of lying -> 1 window; 12 rows of ironing -> 2 windows
        assert_eq!(labels, vec![0, 7, 7]);
        assert_eq!(doms[0].shape(), (36, 8));
    }

    #[test]
    fn all_missing_channel_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_subject(dir.path(), 2, &vec![(1u32, 0.0); 10]);
        let path = dir.path().join("Protocol/subject102.dat");
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<String> = text
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(' ').collect();
                f[21] = "NaN";
                f.join(" ")
            })
            .collect();
        fs::write(&path, lines.join("\n")).unwrap();
        let err = import_pamap2_with(dir.path(), &small_opts(vec![vec![2]]))
            .unwrap_err()
            .to_string();
        assert!(err.contains("subject 2") && err.contains("chest_acc16_x"), "{err}");
    }

    #[test]
    fn missing_subject_file() {
        let dir = tempfile::tempdir().unwrap();
        write_subject(dir.path(), 1, &vec![(1u32, 0.0); 10]);
        let err = import_pamap2_with(dir.path(), &small_opts(vec![vec![1, 2]])).unwrap_err();
        assert!(err.to_string().contains("subject102.dat"));
    }
}
