//! Block-structured Monte Carlo driver and mergeable moment accumulators.
//!
//! Replicates are cut into blocks of [`BLOCK_SIZE`]. Block `b` draws from
//! `spec.fork(b)` and owns its accumulator; accumulators are merged in block
//! order. The result is therefore identical whether blocks run on one thread
//! or many.

use crate::rng::{Rng, RngSpec};

pub const BLOCK_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Accumulators that can absorb another accumulator of the same shape.
pub trait Merge {
    fn merge(&mut self, other: Self);
}

/// Streaming central moments up to fourth order (pairwise-mergeable).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2 - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2 / (self.n as f64 - 1.0)
    }

    /// Fourth central moment (plug-in).
    pub fn central4(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.m4 / self.n as f64
    }

    pub fn se_mean(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }

    /// Large-sample standard error of the sample variance,
    /// `sqrt((mu4 - sigma^4) / n)`.
    pub fn se_variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let s2 = self.m2 / self.n as f64;
        ((self.central4() - s2 * s2).max(0.0) / self.n as f64).sqrt()
    }
}

impl Merge for Moments {
    fn merge(&mut self, other: Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        let m3 = self.m3
            + other.m3
            + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        self.mean += delta * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.n += other.n;
    }
}

impl<T: Merge> Merge for Vec<T> {
    fn merge(&mut self, other: Self) {
        assert_eq!(self.len(), other.len(), "accumulator shapes differ");
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

/// Bivariate co-moment accumulator for covariance estimates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoMoments {
    pub x: Moments,
    pub y: Moments,
    cxy: f64,
    prod: Moments,
}

impl CoMoments {
    pub fn push(&mut self, x: f64, y: f64) {
        let dx = x - self.x.mean();
        self.x.push(x);
        self.y.push(y);
        self.cxy += dx * (y - self.y.mean());
        // Running means stand in for the final ones; only the spread of the
        // products matters here.
        self.prod.push((x - self.x.mean()) * (y - self.y.mean()));
    }

    pub fn covariance(&self) -> f64 {
        let n = self.x.count();
        if n < 2 {
            return 0.0;
        }
        self.cxy / (n as f64 - 1.0)
    }

    /// Standard error of the covariance estimate, from the spread of the
    /// centered products.
    pub fn se_covariance(&self) -> f64 {
        let n = self.x.count();
        if n < 2 {
            return 0.0;
        }
        (self.prod.variance() / n as f64).sqrt()
    }
}

impl Merge for CoMoments {
    fn merge(&mut self, other: Self) {
        let (na, nb) = (self.x.count() as f64, other.x.count() as f64);
        if nb == 0.0 {
            return;
        }
        if na == 0.0 {
            *self = other;
            return;
        }
        let n = na + nb;
        let dx = other.x.mean() - self.x.mean();
        let dy = other.y.mean() - self.y.mean();
        self.cxy += other.cxy + dx * dy * na * nb / n;
        self.x.merge(other.x);
        self.y.merge(other.y);
        self.prod.merge(other.prod);
    }
}

/// Run `replicates` calls of `body`, block by block, and reduce in order.
pub fn run_blocks<A, I, F>(replicates: u64, spec: RngSpec, exec: Execution, init: I, body: F) -> A
where
    A: Merge + Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut Rng, &mut A) + Sync,
{
    let blocks = replicates.div_ceil(BLOCK_SIZE);
    let one_block = |b: u64| {
        let mut acc = init();
        let mut rng = spec.fork(b).rng();
        let start = b * BLOCK_SIZE;
        let end = (start + BLOCK_SIZE).min(replicates);
        for _ in start..end {
            body(&mut rng, &mut acc);
        }
        acc
    };
    let partials: Vec<A> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..blocks).into_par_iter().map(one_block).collect()
        }
        _ => (0..blocks).map(one_block).collect(),
    };
    let mut total = init();
    for p in partials {
        total.merge(p);
    }
    total
}
