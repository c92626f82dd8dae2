//! Importer for the Daily and Sports Activities dataset.
//!
//! Expected layout (the `data/` level is optional):
//!
//! ```text
//! <root>/data/a01/p1/s01.txt   125 rows × 45 comma-separated values
//!             ...
//!             a19/p8/s60.txt
//! ```
//!
//! Every 5-second segment file becomes one window.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use super::{DomainDataset, SensorWindow};
use crate::error::{Error, Result};

pub const CHANNELS: usize = 45;
pub const SEGMENT_LEN: usize = 125;

#[derive(Debug, Clone, PartialEq)]
pub struct DsadsOptions {
    /// Subject IDs per domain, in domain order.
    pub groups: Vec<Vec<u32>>,
    /// Activity IDs; class index is the position in this list.
    pub activities: Vec<u32>,
}

impl Default for DsadsOptions {
    fn default() -> Self {
        Self {
            groups: vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![7, 8]],
            activities: (1..=19).collect(),
        }
    }
}

pub fn import_dsads(root: &Path) -> Result<Vec<DomainDataset>> {
    import_dsads_with(root, &DsadsOptions::default())
}

fn resolve_base(root: &Path) -> Result<PathBuf> {
    if !root.is_dir() {
        return Err(Error::Missing(root.to_path_buf()));
    }
    let nested = root.join("data");
    if !root.join("a01").is_dir() && nested.is_dir() {
        Ok(nested)
    } else {
        Ok(root.to_path_buf())
    }
}

fn segment_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with('s') && n.ends_with(".txt"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Missing(dir.join("s01.txt")));
    }
    Ok(files)
}

fn parse_segment(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, reason: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut values = Array2::zeros((CHANNELS, SEGMENT_LEN));
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if rows == SEGMENT_LEN {
            return Err(malformed(i + 1, format!("more than {SEGMENT_LEN} rows")));
        }
        let mut n = 0;
        for (c, field) in line.split(',').enumerate() {
            if c >= CHANNELS {
                return Err(malformed(i + 1, format!("more than {CHANNELS} columns")));
            }
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| malformed(i + 1, format!("bad number `{}`", field.trim())))?;
            if !v.is_finite() {
                return Err(malformed(i + 1, "non-finite value".into()));
            }
            values[[c, rows]] = v;
            n += 1;
        }
        if n != CHANNELS {
            return Err(malformed(i + 1, format!("expected {CHANNELS} columns, found {n}")));
        }
        rows += 1;
    }
    if rows != SEGMENT_LEN {
        return Err(malformed(rows, format!("expected {SEGMENT_LEN} rows, found {rows}")));
    }
    Ok(values)
}

/// Imports the subject groups listed in `opts`, one domain per group.
pub fn import_dsads_with(root: &Path, opts: &DsadsOptions) -> Result<Vec<DomainDataset>> {
    let base = resolve_base(root)?;
    // (domain, class, file) in deterministic order
    let mut jobs = Vec::new();
    for (g, subjects) in opts.groups.iter().enumerate() {
        for (class, &act) in opts.activities.iter().enumerate() {
            let act_dir = base.join(format!("a{act:02}"));
            if !act_dir.is_dir() {
                return Err(Error::Missing(act_dir));
            }
            for &s in subjects {
                let subj_dir = act_dir.join(format!("p{s}"));
                if !subj_dir.is_dir() {
                    return Err(Error::Ingest(format!(
                        "subject p{s} missing: {} not found",
                        subj_dir.display()
                    )));
                }
                for f in segment_files(&subj_dir)? {
                    jobs.push((g, class, f));
                }
            }
        }
    }
    let parsed: Vec<Result<(usize, usize, Array2<f64>)>> = jobs
        .par_iter()
        .map(|(g, c, f)| parse_segment(f).map(|v| (*g, *c, v)))
        .collect();
    let mut per_domain: Vec<Vec<SensorWindow>> = vec![Vec::new(); opts.groups.len()];
    for p in parsed {
        let (g, c, values) = p?;
        per_domain[g].push(SensorWindow::new(values, c as u16, Some(g as u16)));
    }
    per_domain
        .into_iter()
        .enumerate()
        .map(|(g, windows)| {
            let subjects: Vec<String> = opts.groups[g].iter().map(|s| s.to_string()).collect();
            DomainDataset::new(
                format!("dsads-subjects-{}", subjects.join("-")),
                g as u16,
                windows,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn write_segment(path: &Path, base: f64) {
        let mut s = String::new();
        for r in 0..SEGMENT_LEN {
            let row: Vec<String> = (0..CHANNELS)
                .map(|c| format!("{}", base + r as f64 * 0.01 + c as f64))
                .collect();
            writeln!(s, "{}", row.join(",")).unwrap();
        }
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, s).unwrap();
    }

    fn fixture(subjects: &[u32], activities: &[u32], segments: usize) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for &a in activities {
            for &p in subjects {
                for s in 1..=segments {
                    let path = dir
                        .path()
                        .join("data")
                        .join(format!("a{a:02}/p{p}/s{s:02}.txt"));
                    write_segment(&path, (a * 100 + p) as f64);
                }
            }
        }
        dir
    }

    #[test]
    fn miniature_two_subjects() {
        let dir = fixture(&[1, 2], &[1, 2], 3);
        let opts = DsadsOptions {
            groups: vec![vec![1, 2]],
            activities: vec![1, 2],
        };
        let doms = import_dsads_with(dir.path(), &opts).unwrap();
        assert_eq!(doms.len(), 1);
        // 2 activities × 2 subjects × 3 segments
        assert_eq!(doms[0].len(), 12);
        assert_eq!(doms[0].shape(), (45, 125));
        assert_eq!(doms[0].class_counts(2), vec![6, 6]);
        let w = &doms[0].windows[0];
        assert_eq!(w.values[[3, 2]], 101.0 + 0.02 + 3.0);
    }

    #[test]
    fn missing_subject_is_named() {
        let dir = fixture(&[1, 2, 3, 4], &[1], 1);
        fs::remove_dir_all(dir.path().join("data/a01/p3")).unwrap();
        let opts = DsadsOptions {
            groups: vec![vec![1, 2], vec![3, 4]],
            activities: vec![1],
        };
        let err = import_dsads_with(dir.path(), &opts).unwrap_err().to_string();
        assert!(err.contains("p3"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = fixture(&[1], &[1], 1);
        let path = dir.path().join("data/a01/p1/s01.txt");
        let mut text = fs::read_to_string(&path).unwrap();
        text = text.replacen("101.01,", "oops,", 1);
        fs::write(&path, text).unwrap();
        let opts = DsadsOptions {
            groups: vec![vec![1]],
            activities: vec![1],
        };
        match import_dsads_with(dir.path(), &opts) {
            Err(Error::Malformed { line, path: p, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(p, path);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn idempotent() {
        let dir = fixture(&[1, 2], &[1, 2], 2);
        let opts = DsadsOptions {
            groups: vec![vec![1], vec![2]],
            activities: vec![1, 2],
        };
        assert_eq!(
            import_dsads_with(dir.path(), &opts).unwrap(),
            import_dsads_with(dir.path(), &opts).unwrap()
        );
    }
}
