//! Batch-means Monte Carlo estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_BATCHES: usize = 10;

/// A Monte Carlo scalar with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub batches: usize,
    /// Lag-1 autocorrelation of the batch means (`0` when undefined).
    pub batch_autocorr: f64,
    /// One-sided 95% upper confidence bound, reported when no sample hit.
    pub upper_bound: Option<f64>,
}

impl Estimate {
    /// Exact value (zero error), e.g. from enumeration.
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            stderr: 0.0,
            samples: 0,
            batches: 0,
            batch_autocorr: 0.0,
            upper_bound: None,
        }
    }

    pub fn with_stderr(mean: f64, stderr: f64) -> Self {
        Estimate {
            stderr,
            ..Estimate::exact(mean)
        }
    }

    /// Batch-means estimate from a per-sample series. Samples beyond the
    /// last full batch are discarded.
    pub fn from_series(values: &[f64], batches: usize) -> Result<Self> {
        let mut acc = BatchMeans::new(batches, values.len() as u64)?;
        values.iter().for_each(|&v| acc.push(v));
        acc.finish()
    }

    /// Whether `value` lies within `z` standard errors (or under the
    /// upper bound for zero-hit estimates).
    pub fn agrees_with(&self, value: f64, z: f64) -> bool {
        match self.upper_bound {
            Some(ub) if self.mean == 0.0 => value >= 0.0 && value <= ub,
            _ => (self.mean - value).abs() <= z * self.stderr,
        }
    }
}

/// Streaming batch-means accumulator for a fixed number of samples.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_len: u64,
    batches: usize,
    sums: Vec<f64>,
    current: f64,
    in_batch: u64,
    seen: u64,
    all_zero: bool,
}

impl BatchMeans {
    pub fn new(batches: usize, total_samples: u64) -> Result<Self> {
        if batches < MIN_BATCHES {
            return Err(Error::TooFewBatches {
                got: batches,
                need: MIN_BATCHES,
            });
        }
        let batch_len = total_samples / batches as u64;
        if batch_len == 0 {
            return Err(Error::InvalidParameter(format!(
                "{total_samples} samples cannot fill {batches} batches"
            )));
        }
        Ok(BatchMeans {
            batch_len,
            batches,
            sums: Vec::with_capacity(batches),
            current: 0.0,
            in_batch: 0,
            seen: 0,
            all_zero: true,
        })
    }

    pub fn push(&mut self, v: f64) {
        if self.sums.len() == self.batches {
            return;
        }
        self.current += v;
        self.in_batch += 1;
        self.seen += 1;
        if v != 0.0 {
            self.all_zero = false;
        }
        if self.in_batch == self.batch_len {
            self.sums.push(self.current / self.batch_len as f64);
            self.current = 0.0;
            self.in_batch = 0;
        }
    }

    pub fn finish(self) -> Result<Estimate> {
        let b = self.sums.len();
        if b < MIN_BATCHES {
            return Err(Error::TooFewBatches {
                got: b,
                need: MIN_BATCHES,
            });
        }
        let samples = self.batch_len * b as u64;
        let mean = self.sums.iter().sum::<f64>() / b as f64;
        let var = self.sums.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        let stderr = (var / b as f64).sqrt();
        let batch_autocorr = if var > 0.0 {
            let c1: f64 = self
                .sums
                .windows(2)
                .map(|w| (w[0] - mean) * (w[1] - mean))
                .sum::<f64>()
                / (b - 1) as f64;
            c1 / var
        } else {
            0.0
        };
        // rule of three for a zero count; conservative under autocorrelation
        let upper_bound = self.all_zero.then(|| 3.0 / self.batch_len as f64 / b as f64);
        Ok(Estimate {
            mean,
            stderr,
            samples,
            batches: b,
            batch_autocorr,
            upper_bound,
        })
    }
}
