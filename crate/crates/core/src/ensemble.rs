//! Ordered, panic-isolating parallel map over sample indices.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sample whose task failed or panicked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub message: String,
}

/// Per-index results of [`ensemble_map`], in index order.
#[derive(Debug, Clone)]
pub struct EnsembleOutcome<T> {
    pub results: Vec<Option<T>>,
    pub failures: Vec<SampleFailure>,
}

impl<T> EnsembleOutcome<T> {
    pub fn successes(&self) -> impl Iterator<Item = (usize, &T)> {
        self.results
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().map(|r| (i, r)))
    }

    pub fn success_count(&self) -> usize {
        self.results.iter().filter(|r| r.is_some()).count()
    }

    pub fn exclusion_rate(&self) -> f64 {
        if self.results.is_empty() {
            0.0
        } else {
            self.failures.len() as f64 / self.results.len() as f64
        }
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with non-string payload".to_string()
    }
}

/// Runs `task(i)` for `i in 0..count` on a pool of `workers` threads.
///
/// Results come back in index order whatever the completion order; a task that
/// errors or panics is recorded in `failures` without disturbing the others.
/// Outputs do not depend on `workers` as long as `task` depends only on `i`.
pub fn ensemble_map<T, F>(count: usize, workers: usize, task: F) -> Result<EnsembleOutcome<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if count == 0 {
        return Err(Error::InvalidArgument("ensemble must contain at least one sample".into()));
    }
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    let run = |i: usize| -> std::result::Result<T, String> {
        match catch_unwind(AssertUnwindSafe(|| task(i))) {
            Ok(Ok(v)) => Ok(v),
            Ok(Err(e)) => Err(e.to_string()),
            Err(p) => Err(panic_message(p)),
        }
    };
    let raw: Vec<std::result::Result<T, String>> = if workers == 1 {
        (0..count).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..count).into_par_iter().map(run).collect())
    };
    let mut results = Vec::with_capacity(count);
    let mut failures = Vec::new();
    for (index, r) in raw.into_iter().enumerate() {
        match r {
            Ok(v) => results.push(Some(v)),
            Err(message) => {
                failures.push(SampleFailure { index, message });
                results.push(None);
            }
        }
    }
    Ok(EnsembleOutcome { results, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let f = |i: usize| Ok((i as f64).sqrt().sin());
        let a = ensemble_map(500, 1, f).unwrap();
        let b = ensemble_map(500, 8, f).unwrap();
        assert_eq!(a.results, b.results);
    }

    #[test]
    fn failures_are_isolated() {
        let out = ensemble_map(10, 4, |i| {
            if i == 3 {
                panic!("boom at {i}");
            }
            if i == 5 {
                return Err(Error::InvalidArgument("bad sample".into()));
            }
            Ok(i)
        })
        .unwrap();
        assert_eq!(out.failures.len(), 2);
        assert_eq!(out.failures[0].index, 3);
        assert!(out.failures[0].message.contains("boom"));
        assert_eq!(out.failures[1].index, 5);
        assert_eq!(out.success_count(), 8);
        assert_eq!(out.results[9], Some(9));
    }

    #[test]
    fn empty_ensemble_rejected() {
        assert!(ensemble_map(0, 1, |i| Ok(i)).is_err());
        assert!(ensemble_map(3, 0, |i| Ok(i)).is_err());
    }
}
