use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Driver, Interpolation, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Generator for stream `stream` of `seed`; distinct streams are independent.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `sqrt(kappa) * B` on `n` equal steps of `[0, 1]`, linearly interpolated.
pub fn sample_brownian_driver<T: Real>(kappa: T, n: usize, seed: u64) -> Result<Driver<T>> {
    sample_brownian_on(kappa, TimeGrid::uniform(n, T::one())?, seed)
}

/// `sqrt(kappa) * B` at the knots of `grid`.
///
/// Increments are drawn in `f64` in knot order, so a longer grid that extends
/// a shorter one reproduces the shorter path on the common knots.
pub fn sample_brownian_on<T: Real>(kappa: T, grid: TimeGrid<T>, seed: u64) -> Result<Driver<T>> {
    if !(kappa >= T::zero()) || !kappa.is_finite() {
        return Err(Error::invalid(format!("kappa must be >= 0, got {kappa}")));
    }
    let mut rng = rng_for(seed, 0);
    let k = kappa.as_f64();
    let times = grid.times();
    let mut values = Vec::with_capacity(times.len());
    let mut b = 0.0f64;
    values.push(T::zero());
    for w in times.windows(2) {
        let dt = (w[1] - w[0]).as_f64();
        let z: f64 = rng.sample(StandardNormal);
        b += (k * dt).sqrt() * z;
        values.push(T::lit(b));
    }
    Driver::new(grid, values, Interpolation::PiecewiseLinear)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kappa_gives_zero_driver() {
        let d = sample_brownian_driver(0.0f64, 64, 9).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_kappa_rejected() {
        assert!(sample_brownian_driver(-1.0f64, 8, 1).is_err());
    }

    #[test]
    fn same_seed_same_path() {
        let a = sample_brownian_driver(2.0f64, 100, 42).unwrap();
        let b = sample_brownian_driver(2.0f64, 100, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_brownian_driver(2.0f64, 100, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn increment_variance_matches_kappa_dt() {
        // Sample variance of n i.i.d. N(0, s2) has standard error s2 * sqrt(2 / (n - 1)).
        let n = 1000;
        let d = sample_brownian_driver(2.0f64, n, 2024).unwrap();
        let dt = 1.0 / n as f64;
        let inc: Vec<f64> = d.values().windows(2).map(|w| w[1] - w[0]).collect();
        let mean = inc.iter().sum::<f64>() / n as f64;
        let var = inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let target = 2.0 * dt;
        let se = target * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - target).abs() < 3.0 * se, "var {var} target {target}");
    }

    #[test]
    fn extended_grid_reproduces_prefix() {
        let short = sample_brownian_driver(3.0f64, 50, 5).unwrap();
        let long = sample_brownian_on(3.0f64, TimeGrid::uniform(60, 1.2).unwrap(), 5).unwrap();
        for k in 0..=50 {
            assert!((short.values()[k] - long.values()[k]).abs() < 1e-12);
        }
    }
}
