//! Seeded random streams and the handful of distributions the simulation needs.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Exp, Gamma, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Deterministic generator. Equal seeds (and stream ids) give equal draws.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    /// Independent stream `stream` under `master_seed`. ChaCha streams with the
    /// same key never overlap.
    pub fn with_stream(master_seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream);
        Self {
            inner,
            seed: master_seed,
        }
    }

    /// Sub-stream `sub` (0..16) of replication `rep`.
    pub fn for_replication(master_seed: u64, rep: u64, sub: u64) -> Self {
        debug_assert!(sub < 16);
        Self::with_stream(master_seed, rep.wrapping_mul(16).wrapping_add(sub))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }

    pub fn sample(&mut self, dist: &Dist) -> Result<f64, NumericsError> {
        Ok(dist.prepare()?.draw(self))
    }
}

/// Distribution specs. Normal takes a standard deviation; exponential and
/// gamma take rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dist {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Bernoulli { p: f64 },
}

impl Dist {
    pub fn validate(&self) -> Result<(), NumericsError> {
        let ok = match *self {
            Dist::Uniform { low, high } => low.is_finite() && high.is_finite() && high > low,
            Dist::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Dist::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Dist::Gamma { shape, rate } => {
                shape.is_finite() && rate.is_finite() && shape > 0.0 && rate > 0.0
            }
            Dist::Bernoulli { p } => (0.0..=1.0).contains(&p),
        };
        if ok {
            Ok(())
        } else {
            Err(NumericsError::Domain(format!("invalid parameters: {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Dist::Uniform { low, high } => 0.5 * (low + high),
            Dist::Normal { mean, .. } => mean,
            Dist::Exponential { rate } => 1.0 / rate,
            Dist::Gamma { shape, rate } => shape / rate,
            Dist::Bernoulli { p } => p,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Dist::Uniform { low, high } => (high - low).powi(2) / 12.0,
            Dist::Normal { sd, .. } => sd * sd,
            Dist::Exponential { rate } => 1.0 / (rate * rate),
            Dist::Gamma { shape, rate } => shape / (rate * rate),
            Dist::Bernoulli { p } => p * (1.0 - p),
        }
    }

    /// Validated sampler that can be reused across many draws.
    pub fn prepare(&self) -> Result<Sampler, NumericsError> {
        self.validate()?;
        let bad = |e: String| NumericsError::Domain(e);
        Ok(match *self {
            Dist::Uniform { low, high } => {
                Sampler::Uniform(Uniform::new(low, high).map_err(|e| bad(e.to_string()))?)
            }
            Dist::Normal { mean, sd } => {
                Sampler::Normal(Normal::new(mean, sd).map_err(|e| bad(e.to_string()))?)
            }
            Dist::Exponential { rate } => {
                Sampler::Exponential(Exp::new(rate).map_err(|e| bad(e.to_string()))?)
            }
            Dist::Gamma { shape, rate } => Sampler::Gamma(
                Gamma::new(shape, 1.0 / rate).map_err(|e| bad(e.to_string()))?,
            ),
            Dist::Bernoulli { p } => {
                Sampler::Bernoulli(Bernoulli::new(p).map_err(|e| bad(e.to_string()))?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
    Exponential(Exp<f64>),
    Gamma(Gamma<f64>),
    Bernoulli(Bernoulli),
}

impl Sampler {
    pub fn draw(&self, rng: &mut Rng) -> f64 {
        let r = &mut rng.inner;
        match self {
            Sampler::Uniform(d) => d.sample(r),
            Sampler::Normal(d) => d.sample(r),
            Sampler::Exponential(d) => d.sample(r),
            Sampler::Gamma(d) => d.sample(r),
            Sampler::Bernoulli(d) => {
                if d.sample(r) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRAWS: usize = 1_000_000;

    fn moments(dist: Dist, seed: u64) -> (f64, f64, f64, f64) {
        let s = dist.prepare().unwrap();
        let mut rng = Rng::new(seed);
        let xs: Vec<f64> = (0..DRAWS).map(|_| s.draw(&mut rng)).collect();
        let n = DRAWS as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (mean, var, min, max)
    }

    /// Mean and variance within 4 Monte Carlo standard errors. The variance SE
    /// uses the analytic fourth central moment.
    fn check_moments(dist: Dist, mu4: f64) {
        let (mean, var, _, _) = moments(dist, 99);
        let n = DRAWS as f64;
        let se_mean = (dist.variance() / n).sqrt();
        let se_var = ((mu4 - dist.variance().powi(2)) / n).sqrt();
        assert!(
            (mean - dist.mean()).abs() < 4.0 * se_mean,
            "{dist:?}: mean {mean}"
        );
        // second-order term covers the Bernoulli(0.5) case where the first-order SE vanishes
        assert!(
            (var - dist.variance()).abs() < 4.0 * se_var + 16.0 * se_mean * se_mean,
            "{dist:?}: var {var}"
        );
    }

    #[test]
    fn bernoulli_half() {
        let (mean, ..) = moments(Dist::Bernoulli { p: 0.5 }, 1);
        assert!((mean - 0.5).abs() < 0.002);
    }

    #[test]
    fn gamma_5_10() {
        let (mean, var, min, _) = moments(Dist::Gamma { shape: 5.0, rate: 10.0 }, 2);
        assert!((mean - 0.5).abs() < 0.001);
        assert!((var - 0.05).abs() < 0.002);
        assert!(min > 0.0);
    }

    #[test]
    fn uniform_minus2_1() {
        let (mean, _, min, max) = moments(Dist::Uniform { low: -2.0, high: 1.0 }, 3);
        assert!(min >= -2.0 && max <= 1.0);
        assert!((mean + 0.5).abs() < 0.004);
    }

    #[test]
    fn dgp_distribution_moments() {
        // fourth central moments: uniform (b-a)^4/80, normal 3σ⁴, exp 9/λ⁴,
        // gamma 3k(k+2)/λ⁴, bernoulli p(1-p)(1-3p+3p²)
        check_moments(Dist::Uniform { low: -2.0, high: 1.0 }, 81.0 / 80.0);
        check_moments(Dist::Uniform { low: 1.0, high: 2.0 }, 1.0 / 80.0);
        check_moments(Dist::Uniform { low: 0.0, high: 1.0 }, 1.0 / 80.0);
        check_moments(Dist::Normal { mean: 0.0, sd: 3.0 }, 3.0 * 81.0);
        check_moments(Dist::Normal { mean: 0.0, sd: 1.3 }, 3.0 * 1.3f64.powi(4));
        check_moments(Dist::Exponential { rate: 0.8 }, 9.0 / 0.8f64.powi(4));
        check_moments(Dist::Gamma { shape: 5.0, rate: 10.0 }, 3.0 * 5.0 * 7.0 / 1e4);
        check_moments(Dist::Bernoulli { p: 0.5 }, 0.0625);
    }

    #[test]
    fn equal_seeds_give_equal_streams() {
        let dists = [
            Dist::Uniform { low: -2.0, high: 1.0 },
            Dist::Normal { mean: 0.0, sd: 3.0 },
            Dist::Exponential { rate: 0.8 },
            Dist::Gamma { shape: 5.0, rate: 10.0 },
            Dist::Bernoulli { p: 0.5 },
        ];
        for d in dists {
            let s = d.prepare().unwrap();
            let mut a = Rng::new(42);
            let mut b = Rng::new(42);
            for _ in 0..10_000 {
                assert_eq!(s.draw(&mut a).to_bits(), s.draw(&mut b).to_bits());
            }
        }
    }

    #[test]
    fn replication_streams_differ() {
        let mut seen = std::collections::HashSet::new();
        for rep in 0..50 {
            let mut r = Rng::for_replication(7, rep, 0);
            for _ in 0..1000 {
                assert!(seen.insert(r.next_u64()));
            }
        }
    }

    #[test]
    fn invalid_parameters() {
        let mut rng = Rng::new(0);
        for d in [
            Dist::Uniform { low: 1.0, high: 1.0 },
            Dist::Normal { mean: 0.0, sd: 0.0 },
            Dist::Exponential { rate: -1.0 },
            Dist::Gamma { shape: 0.0, rate: 1.0 },
            Dist::Bernoulli { p: 1.2 },
        ] {
            assert!(rng.sample(&d).is_err(), "{d:?}");
        }
    }
}
