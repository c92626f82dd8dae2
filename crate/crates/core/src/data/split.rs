use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DomainDataset;
use crate::error::{Error, Result};

/// Stratified train/validation split, per domain and per class.
///
/// Each `(domain, class)` cell contributes `round(n · fraction)` windows to the
/// validation side, clamped so both sides keep at least one window. Window
/// order within each side follows the input order.
pub fn split_train_val(
    domains: &[DomainDataset],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<DomainDataset>, Vec<DomainDataset>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {fraction} must lie in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(domains.len());
    let mut val = Vec::with_capacity(domains.len());
    for d in domains {
        let mut cells: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
        for (i, w) in d.windows.iter().enumerate() {
            cells.entry(w.activity).or_default().push(i);
        }
        let mut in_val = vec![false; d.len()];
        for (class, mut idx) in cells {
            let n = idx.len();
            if n < 2 {
                return Err(Error::InvalidArgument(format!(
                    "domain `{}` (id {}) class {class} has {n} window(s); at least 2 are needed to split",
                    d.name, d.domain_id
                )));
            }
            let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
            idx.shuffle(&mut rng);
            for &i in &idx[..n_val] {
                in_val[i] = true;
            }
        }
        let (mut tr, mut va) = (Vec::new(), Vec::new());
        for (w, v) in d.windows.iter().zip(in_val) {
            if v {
                va.push(w.clone());
            } else {
                tr.push(w.clone());
            }
        }
        train.push(DomainDataset {
            windows: tr,
            domain_id: d.domain_id,
            name: d.name.clone(),
        });
        val.push(DomainDataset {
            windows: va,
            domain_id: d.domain_id,
            name: d.name.clone(),
        });
    }
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SensorWindow;
    use ndarray::Array2;

    fn domain(id: u16, per_class: &[usize]) -> DomainDataset {
        let mut windows = Vec::new();
        let mut k = 0.0;
        for (c, &n) in per_class.iter().enumerate() {
            for _ in 0..n {
                windows.push(SensorWindow::new(
                    Array2::from_elem((1, 2), k),
                    c as u16,
                    Some(id),
                ));
                k += 1.0;
            }
        }
        DomainDataset::new(format!("d{id}"), id, windows).unwrap()
    }

    #[test]
    fn eighty_twenty_per_domain() {
        let doms = vec![domain(0, &[25; 4]), domain(1, &[50, 50])];
        let (tr, va) = split_train_val(&doms, 0.2, 7).unwrap();
        for (t, v) in tr.iter().zip(&va) {
            assert_eq!(t.len(), 80);
            assert_eq!(v.len(), 20);
            assert!(v.windows.iter().all(|w| w.domain == Some(v.domain_id)));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let doms = vec![domain(0, &[13, 7, 22]), domain(1, &[9, 9, 9])];
        let a = split_train_val(&doms, 0.2, 42).unwrap();
        let b = split_train_val(&doms, 0.2, 42).unwrap();
        assert_eq!(a, b);
        let c = split_train_val(&doms, 0.2, 43).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn class_proportions_are_preserved() {
        let counts = [13, 7, 22, 2, 31];
        let doms = vec![domain(0, &counts)];
        let (tr, va) = split_train_val(&doms, 0.2, 1).unwrap();
        let vc = va[0].class_counts(5);
        let tc = tr[0].class_counts(5);
        for c in 0..5 {
            assert_eq!(vc[c] + tc[c], counts[c]);
            let expected = counts[c] as f64 * 0.2;
            assert!((vc[c] as f64 - expected).abs() <= 1.0, "class {c}");
        }
    }

    #[test]
    fn tiny_cell_is_named_in_error() {
        let doms = vec![domain(3, &[5, 1])];
        let err = split_train_val(&doms, 0.2, 0).unwrap_err().to_string();
        assert!(err.contains("id 3") && err.contains("class 1"), "{err}");
    }
}
