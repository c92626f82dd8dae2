use super::{fit_normalizer, split_train_val, DomainDataset, NormStats};
use crate::error::{Error, Result};

/// A domain-generalization task: `K` training domains (already split into
/// training and validation parts) and one held-out test domain.
///
/// Training domains are re-indexed to `0..K` in their original order, so the
/// domain label of a training window is also the index of its branch. The
/// test domain gets id `K` and its windows carry no domain label.
#[derive(Debug, Clone, PartialEq)]
pub struct DgTask {
    pub train_domains: Vec<DomainDataset>,
    pub val_domains: Vec<DomainDataset>,
    pub test_domain: DomainDataset,
    pub val_fraction: f64,
    pub num_classes: usize,
    /// Fitted on `train_domains` only; applied unchanged everywhere else.
    pub stats: NormStats,
}

impl DgTask {
    /// Holds out `domains[target]` and trains on the rest.
    pub fn leave_one_out(
        domains: &[DomainDataset],
        target: usize,
        num_classes: usize,
        val_fraction: f64,
        seed: u64,
    ) -> Result<DgTask> {
        if target >= domains.len() {
            return Err(Error::InvalidArgument(format!(
                "target domain {target} out of range for {} domains",
                domains.len()
            )));
        }
        let sources: Vec<DomainDataset> = domains
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != target)
            .enumerate()
            .map(|(k, (_, d))| d.relabeled(k as u16, Some(k as u16)))
            .collect();
        let k = sources.len() as u16;
        let test_domain = domains[target].relabeled(k, None);
        let (train_domains, val_domains) = split_train_val(&sources, val_fraction, seed)?;
        let stats = fit_normalizer(&train_domains)?;
        let task = DgTask {
            train_domains,
            val_domains,
            test_domain,
            val_fraction,
            num_classes,
            stats,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn num_domains(&self) -> usize {
        self.train_domains.len()
    }

    /// `(channels, timesteps)` of every window in the task.
    pub fn shape(&self) -> (usize, usize) {
        self.test_domain.shape()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.train_domains.len();
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "a task needs at least 2 training domains, got {k}"
            )));
        }
        if self.val_domains.len() != k {
            return Err(Error::InvalidArgument(
                "validation split must cover every training domain".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument("a task needs at least 2 classes".into()));
        }
        let shape = self.test_domain.shape();
        let mut seen = vec![false; self.num_classes];
        for (i, d) in self.train_domains.iter().enumerate() {
            if d.domain_id as usize != i || self.val_domains[i].domain_id as usize != i {
                return Err(Error::InvalidArgument(format!(
                    "training domain at position {i} has id {}",
                    d.domain_id
                )));
            }
            if d.is_empty() || self.val_domains[i].is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "training domain `{}` has an empty split",
                    d.name
                )));
            }
            for w in d.windows.iter().chain(&self.val_domains[i].windows) {
                if (w.channels(), w.timesteps()) != shape {
                    return Err(Error::shape(
                        "DgTask",
                        format!("domain `{}` disagrees with the test domain shape", d.name),
                    ));
                }
                if w.domain != Some(i as u16) {
                    return Err(Error::InvalidArgument(format!(
                        "window in domain `{}` carries domain {:?}",
                        d.name, w.domain
                    )));
                }
                match seen.get_mut(w.activity as usize) {
                    Some(s) => *s = true,
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "activity {} out of range for {} classes",
                            w.activity, self.num_classes
                        )))
                    }
                }
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "class {c} does not occur in the training domains"
            )));
        }
        if (self.test_domain.domain_id as usize) < k {
            return Err(Error::InvalidArgument(
                "test domain id collides with a training domain id".into(),
            ));
        }
        if self
            .test_domain
            .windows
            .iter()
            .any(|w| w.activity as usize >= self.num_classes)
        {
            return Err(Error::InvalidArgument(
                "test domain contains an out-of-range activity".into(),
            ));
        }
        if self.stats.channels() != shape.0 {
            return Err(Error::shape("DgTask", "normalization statistics channel count"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SensorWindow;
    use ndarray::Array2;

    fn domain(id: u16, offset: f64) -> DomainDataset {
        let windows = (0..20)
            .map(|i| {
                SensorWindow::new(
                    Array2::from_elem((2, 3), offset + i as f64),
                    (i % 2) as u16,
                    Some(id),
                )
            })
            .collect();
        DomainDataset::new(format!("g{id}"), id, windows).unwrap()
    }

    #[test]
    fn leave_one_out_reindexes_sources() {
        let doms: Vec<_> = (0..4).map(|i| domain(i, i as f64 * 100.0)).collect();
        let task = DgTask::leave_one_out(&doms, 1, 2, 0.2, 3).unwrap();
        assert_eq!(task.num_domains(), 3);
        assert_eq!(task.test_domain.name, "g1");
        assert_eq!(task.test_domain.domain_id, 3);
        assert!(task.test_domain.windows.iter().all(|w| w.domain.is_none()));
        let names: Vec<_> = task.train_domains.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["g0", "g2", "g3"]);
        assert_eq!(task.train_domains[0].len() + task.val_domains[0].len(), 20);
    }

    #[test]
    fn stats_ignore_test_domain() {
        let mut doms: Vec<_> = (0..3).map(|i| domain(i, i as f64)).collect();
        let a = DgTask::leave_one_out(&doms, 2, 2, 0.2, 3).unwrap();
        doms[2] = domain(2, 1e6);
        let b = DgTask::leave_one_out(&doms, 2, 2, 0.2, 3).unwrap();
        assert_eq!(a.stats, b.stats);
        for (x, y) in a.stats.mean.iter().zip(&b.stats.mean) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn needs_two_sources_and_all_classes() {
        let doms: Vec<_> = (0..2).map(|i| domain(i, 0.0)).collect();
        assert!(DgTask::leave_one_out(&doms, 0, 2, 0.2, 0).is_err());
        let doms: Vec<_> = (0..3).map(|i| domain(i, 0.0)).collect();
        assert!(DgTask::leave_one_out(&doms, 0, 3, 0.2, 0).is_err());
        assert!(DgTask::leave_one_out(&doms, 5, 2, 0.2, 0).is_err());
    }
}
