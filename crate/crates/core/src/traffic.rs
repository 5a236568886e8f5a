//! Offered traffic: correlated per-provider arrival rates, Poisson arrivals
//! and exponential holding times, all drawn from seeded per-purpose streams.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::world::{CellId, ProviderId};

pub type SimRng = ChaCha8Rng;

/// Independent random streams. Each purpose gets its own ChaCha stream so
/// that the order in which the engine consumes one never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Rates,
    Sensing,
    Arrivals(ProviderId),
    Holding(ProviderId),
    CellChoice(ProviderId),
}

impl Stream {
    fn index(self) -> u64 {
        match self {
            Stream::Rates => 0,
            Stream::Sensing => 1,
            Stream::Arrivals(p) => 16 + 3 * p.0 as u64,
            Stream::Holding(p) => 17 + 3 * p.0 as u64,
            Stream::CellChoice(p) => 18 + 3 * p.0 as u64,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.index());
    rng
}

/// Seed for replication `rep` of a sweep rooted at `base`.
pub fn replication_seed(base: u64, rep: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(u64::MAX);
    rng.set_word_pos(2 * rep as u128);
    rng.next_u64()
}

/// Lower-triangular `L` with `L Lᵀ = cov` for a symmetric positive
/// semi-definite matrix. Zero pivots (rank deficiency) yield zero columns.
pub fn psd_cholesky(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = cov.len();
    if cov.iter().any(|row| row.len() != n) {
        return Err(Error::config("covariance matrix must be square"));
    }
    let scale = (0..n).map(|i| cov[i][i].abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    for (i, row) in cov.iter().enumerate() {
        for (j, &x) in row.iter().enumerate().take(i) {
            if !x.is_finite() || (x - cov[j][i]).abs() > tol {
                return Err(Error::config("covariance matrix must be finite and symmetric"));
            }
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = cov[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -tol {
            return Err(Error::config("covariance matrix is not positive semi-definite"));
        }
        if d <= tol {
            // rank-deficient direction: the rest of the column must vanish
            for i in j + 1..n {
                let r = cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if r.abs() > tol.sqrt() * scale.sqrt() {
                    return Err(Error::config("covariance matrix is not positive semi-definite"));
                }
            }
            continue;
        }
        let pivot = d.sqrt();
        l[j][j] = pivot;
        for i in j + 1..n {
            let r = cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = r / pivot;
        }
    }
    Ok(l)
}

/// Covariance of equicorrelated rates with common standard deviation.
pub fn equicorrelated(n: usize, std: f64, rho: f64) -> Vec<Vec<f64>> {
    let var = std * std;
    (0..n).map(|i| (0..n).map(|j| if i == j { var } else { rho * var }).collect()).collect()
}

#[derive(Debug, Clone)]
pub struct TrafficModel {
    pub mean_rates: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Mean call duration, seconds.
    pub mean_holding: f64,
    /// Seconds between rate re-draws; `None` keeps the first draw forever.
    pub epoch_length: Option<f64>,
    pub rate_floor: f64,
    chol: Vec<Vec<f64>>,
}

impl TrafficModel {
    pub fn new(
        mean_rates: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        mean_holding: f64,
        epoch_length: Option<f64>,
        rate_floor: f64,
    ) -> Result<Self> {
        if mean_rates.is_empty() {
            return Err(Error::config("mean_rates must not be empty"));
        }
        if covariance.len() != mean_rates.len() {
            return Err(Error::config("covariance dimension does not match mean_rates"));
        }
        if mean_rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::config("mean rates must be finite and >= 0"));
        }
        if !(mean_holding.is_finite() && mean_holding > 0.0) {
            return Err(Error::config("mean_holding must be > 0"));
        }
        if let Some(e) = epoch_length {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::config("epoch_length must be > 0"));
            }
        }
        if !(rate_floor.is_finite() && rate_floor > 0.0) {
            return Err(Error::config("rate_floor must be > 0"));
        }
        let chol = psd_cholesky(&covariance)?;
        Ok(TrafficModel { mean_rates, covariance, mean_holding, epoch_length, rate_floor, chol })
    }

    pub fn n_providers(&self) -> usize {
        self.mean_rates.len()
    }

    /// `μ + L z` before clamping.
    pub fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n_providers()).map(|_| rng.sample(StandardNormal)).collect();
        self.mean_rates
            .iter()
            .zip(&self.chol)
            .map(|(mu, row)| mu + row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>())
            .collect()
    }

    /// Per-provider arrival rates, clamped to `rate_floor`.
    pub fn sample_rates<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_raw(rng).into_iter().map(|r| r.max(self.rate_floor)).collect()
    }
}

/// Inverse-CDF exponential variate for a uniform `u` in (0, 1).
pub fn exp_from_uniform(u: f64, rate: f64) -> f64 {
    -u.ln() / rate
}

pub fn next_arrival<R: Rng + ?Sized>(rate: f64, now: f64, rng: &mut R) -> f64 {
    debug_assert!(rate > 0.0);
    let u: f64 = rng.sample(Open01);
    now + exp_from_uniform(u, rate)
}

pub fn draw_holding<R: Rng + ?Sized>(mean_holding: f64, rng: &mut R) -> f64 {
    debug_assert!(mean_holding > 0.0);
    let u: f64 = rng.sample(Open01);
    exp_from_uniform(u, 1.0 / mean_holding)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Call {
    pub id: u64,
    pub provider: ProviderId,
    pub cell: CellId,
    pub arrival_time: f64,
    pub holding_time: f64,
}
