use ndarray::{s, Array2};

use super::SensorWindow;
use crate::error::{Error, Result};

/// Minimum share (in percent) of timesteps that must carry the majority label.
pub const PURITY_PERCENT: usize = 95;

/// Cuts a `channels × L` stream into windows of `window_len` at offsets
/// `0, stride, 2·stride, …`.
///
/// A window is kept only if at least [`PURITY_PERCENT`] of its timesteps share
/// one activity label, which becomes the window label. Before filtering there
/// are `floor((L − window_len) / stride) + 1` candidate windows.
pub fn window_stream(
    signal: &Array2<f64>,
    labels: &[u16],
    window_len: usize,
    stride: usize,
    domain: Option<u16>,
) -> Result<Vec<SensorWindow>> {
    let len = signal.ncols();
    if labels.len() != len {
        return Err(Error::shape(
            "window_stream",
            format!("{} labels for a stream of length {len}", labels.len()),
        ));
    }
    if window_len == 0 || stride == 0 {
        return Err(Error::InvalidArgument(
            "window length and stride must be at least 1".into(),
        ));
    }
    if len < window_len {
        return Err(Error::InvalidArgument(format!(
            "stream of length {len} is shorter than the window length {window_len}"
        )));
    }
    let count = (len - window_len) / stride + 1;
    let mut out = Vec::with_capacity(count);
    let mut tally = std::collections::BTreeMap::new();
    for i in 0..count {
        let start = i * stride;
        let end = start + window_len;
        tally.clear();
        for &l in &labels[start..end] {
            *tally.entry(l).or_insert(0usize) += 1;
        }
        // BTreeMap iteration makes ties resolve to the lowest label.
        let (label, n) = tally
            .iter()
            .fold((0u16, 0usize), |best, (&l, &n)| if n > best.1 { (l, n) } else { best });
        if n * 100 >= PURITY_PERCENT * window_len {
            out.push(SensorWindow::new(
                signal.slice(s![.., start..end]).to_owned(),
                label,
                domain,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(channels: usize, len: usize) -> Array2<f64> {
        Array2::from_shape_fn((channels, len), |(c, t)| (c * 1000 + t) as f64)
    }

    #[test]
    fn exact_length_gives_one_window() {
        let sig = ramp(2, 7);
        for stride in [1, 3, 100] {
            let w = window_stream(&sig, &[1; 7], 7, stride, Some(0)).unwrap();
            assert_eq!(w.len(), 1);
            assert_eq!(w[0].values, sig);
        }
    }

    #[test]
    fn offsets_follow_stride() {
        let sig = ramp(1, 10);
        let w = window_stream(&sig, &[0; 10], 4, 2, None).unwrap();
        assert_eq!(w.len(), 4);
        let starts: Vec<f64> = w.iter().map(|w| w.values[[0, 0]]).collect();
        assert_eq!(starts, vec![0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn mixed_label_window_is_dropped() {
        let sig = ramp(1, 8);
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let w = window_stream(&sig, &labels, 8, 1, None).unwrap();
        assert!(w.is_empty());
        let w = window_stream(&sig, &labels, 4, 4, None).unwrap();
        assert_eq!(w.iter().map(|w| w.activity).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn purity_threshold_is_inclusive() {
        let sig = ramp(1, 20);
        let mut labels = vec![3u16; 20];
        labels[19] = 4;
        // 19/20 = 95%
        assert_eq!(window_stream(&sig, &labels, 20, 1, None).unwrap().len(), 1);
        labels[18] = 4;
        assert!(window_stream(&sig, &labels, 20, 1, None).unwrap().is_empty());
    }

    #[test]
    fn short_stream_is_an_error() {
        let sig = ramp(1, 3);
        assert!(window_stream(&sig, &[0; 3], 4, 1, None).is_err());
        assert!(window_stream(&sig, &[0; 3], 2, 0, None).is_err());
    }

    #[test]
    fn count_formula_on_uniform_labels() {
        for len in 5..40 {
            for t in 1..=5 {
                for stride in 1..6 {
                    let sig = ramp(1, len);
                    let w = window_stream(&sig, &vec![2; len], t, stride, None).unwrap();
                    assert_eq!(w.len(), (len - t) / stride + 1);
                }
            }
        }
    }
}
