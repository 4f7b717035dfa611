//! Deterministic Monte Carlo plumbing.
//!
//! Random streams come from ChaCha8 keyed by the user seed with one stream id
//! per chunk (or per sample, for common random numbers). Chunks may run on
//! any number of threads; partial moments are merged in chunk order, so a
//! fixed seed gives bit-identical estimates regardless of parallelism.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub(crate) const CHUNK: usize = 4096;

/// Random stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub(crate) fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn merge(self, other: Moments) -> Moments {
        if other.count == 0.0 {
            return self;
        }
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + d * other.count / count,
            m2: self.m2 + other.m2 + d * d * self.count * other.count / count,
        }
    }

    pub(crate) fn estimate(&self) -> Estimate {
        let var = if self.count > 1.0 { self.m2 / (self.count - 1.0) } else { 0.0 };
        Estimate {
            estimate: self.mean,
            stderr: (var / self.count).sqrt(),
            samples: self.count as usize,
        }
    }
}

/// Averages `draw` over `samples` draws, one RNG stream per chunk.
pub(crate) fn chunked_mean<F>(samples: usize, seed: u64, draw: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(draw(&mut rng));
            }
            m
        })
        .collect();
    parts
        .into_iter()
        .fold(Moments::default(), Moments::merge)
        .estimate()
}

/// Like [`chunked_mean`] but evaluates several estimands per sample from a
/// per-sample stream, so every estimand sees the same random numbers.
pub(crate) fn common_random_means<F>(samples: usize, seed: u64, width: usize, draw: F) -> Vec<Estimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); width];
            let mut out = vec![0.0; width];
            let start = c * CHUNK;
            let end = (start + CHUNK).min(samples);
            for s in start..end {
                let mut rng = stream_rng(seed, s as u64);
                draw(&mut rng, &mut out);
                for (m, &x) in acc.iter_mut().zip(&out) {
                    m.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); width];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t = t.merge(p);
        }
    }
    total.iter().map(Moments::estimate).collect()
}
