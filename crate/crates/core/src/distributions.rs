//! Random samplers for the stochastic primitives of the population and
//! recruitment models.
//!
//! Each sampler is a pure function of its parameters and the caller's RNG.
//! The exact probability mass functions live next to the samplers so tests can
//! compare empirical frequencies against them.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Poisson};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Number of risk levels (blocks) in the cliques-and-blocks model.
pub const LEVEL_COUNT: usize = 10;

/// Trials of the overdispersed binomial behind the level distribution.
pub const LEVEL_TRIALS: u32 = 9;

/// Overdispersion used for every level draw.
pub const LEVEL_RHO: f64 = 0.3;

/// Household size is `Poisson(CLIQUE_LAMBDA) + 1`.
pub const CLIQUE_LAMBDA: f64 = 1.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("parameter `{name}` out of domain: {value} ({expected})")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
}

fn domain(name: &'static str, value: f64, expected: &'static str) -> DistError {
    DistError::ParameterDomain {
        name,
        value,
        expected,
    }
}

/// Beta-binomial in the intra-class correlation parameterisation.
///
/// A draw is `Binomial(trials, q)` with `q ~ Beta(p(1/rho - 1), (1-p)(1/rho - 1))`,
/// so the mean is `trials * p` and the variance is inflated by
/// `1 + (trials - 1) * rho` relative to the plain binomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverdispersedBinomial {
    trials: u32,
    p: f64,
    rho: f64,
}

impl OverdispersedBinomial {
    pub fn new(trials: u32, p: f64, rho: f64) -> Result<Self, DistError> {
        if trials == 0 {
            return Err(domain("trials", 0.0, "trials >= 1"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(domain("p", p, "0 <= p <= 1"));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(domain("rho", rho, "0 < rho < 1"));
        }
        Ok(Self { trials, p, rho })
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mean(&self) -> f64 {
        f64::from(self.trials) * self.p
    }

    pub fn variance(&self) -> f64 {
        let n = f64::from(self.trials);
        n * self.p * (1.0 - self.p) * (1.0 + (n - 1.0) * self.rho)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        // Beta is undefined at the endpoints; the law degenerates there.
        if self.p == 0.0 {
            return 0;
        }
        if self.p == 1.0 {
            return self.trials;
        }
        let scale = 1.0 / self.rho - 1.0;
        let q = Beta::new(self.p * scale, (1.0 - self.p) * scale)
            .expect("validated shape parameters")
            .sample(rng);
        Binomial::new(u64::from(self.trials), q)
            .expect("beta draw lies in [0, 1]")
            .sample(rng) as u32
    }
}

/// One of the ten ordinal risk levels `0.05, 0.15, ..., 0.95`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(u8);

impl Level {
    pub const ALL: [Level; LEVEL_COUNT] = [
        Level(0),
        Level(1),
        Level(2),
        Level(3),
        Level(4),
        Level(5),
        Level(6),
        Level(7),
        Level(8),
        Level(9),
    ];

    pub fn new(index: u8) -> Option<Self> {
        (usize::from(index) < LEVEL_COUNT).then_some(Self(index))
    }

    /// Zero-based block index.
    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    /// Level value on the unit interval: `index * 0.1 + 0.05`, computed as
    /// `(2 * index + 1) / 20` so each value is the nearest double.
    pub fn value(self) -> f64 {
        f64::from(2 * u32::from(self.0) + 1) / 20.0
    }

    /// Inverse of [`Level::value`], tolerant to rounding.
    pub fn from_value(value: f64) -> Option<Self> {
        let idx = ((value - 0.05) * 10.0).round();
        if !(0.0..LEVEL_COUNT as f64).contains(&idx) || (idx * 0.1 + 0.05 - value).abs() > 1e-9 {
            return None;
        }
        Some(Self(idx as u8))
    }
}

/// Draws a risk level: `OverBin(9, p_d, 0.3) * 0.1 + 0.05`.
pub fn sample_block_level<R: Rng + ?Sized>(p_d: f64, rng: &mut R) -> Result<Level, DistError> {
    let dist = OverdispersedBinomial::new(LEVEL_TRIALS, p_d, LEVEL_RHO)?;
    Ok(Level(dist.sample(rng) as u8))
}

/// Same as [`sample_block_level`] with a pre-validated distribution, for hot loops.
pub(crate) fn sample_level_with<R: Rng + ?Sized>(
    dist: &OverdispersedBinomial,
    rng: &mut R,
) -> Level {
    debug_assert_eq!(dist.trials(), LEVEL_TRIALS);
    Level(dist.sample(rng) as u8)
}

fn check_yule_lambda(lambda: f64) -> Result<(), DistError> {
    if lambda > 2.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(domain("lambda", lambda, "lambda > 2"))
    }
}

/// Shifted Yule PMF `lambda * Gamma(lambda+1) * Gamma(k+1) / Gamma(lambda+k+2)`.
pub fn yule_pmf(k: u64, lambda: f64) -> Result<f64, DistError> {
    check_yule_lambda(lambda)?;
    let k = k as f64;
    let ln = lambda.ln() + ln_gamma(lambda + 1.0) + ln_gamma(k + 1.0) - ln_gamma(lambda + k + 2.0);
    Ok(ln.exp())
}

/// Shifted Yule recruit-count distribution on `{0, 1, 2, ...}`.
///
/// Sampling inverts the survival function `S(k) = P(K >= k)`, which obeys
/// `S(k+1) = S(k) * (k+1) / (lambda+k+1)`. Walking the recurrence from `k = 0`
/// is exact and costs `1 + E(K)` steps on average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedYule {
    lambda: f64,
}

impl ShiftedYule {
    pub fn new(lambda: f64) -> Result<Self, DistError> {
        check_yule_lambda(lambda)?;
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `lambda / (lambda - 1) - 1`.
    pub fn mean(&self) -> f64 {
        self.lambda / (self.lambda - 1.0) - 1.0
    }

    pub fn pmf(&self, k: u64) -> f64 {
        yule_pmf(k, self.lambda).expect("validated lambda")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        // v in (0, 1]; K = min { k : S(k+1) < v }.
        let v = 1.0 - rng.random::<f64>();
        let mut k = 0u64;
        let mut survival_next = 1.0 / (self.lambda + 1.0);
        while survival_next >= v {
            k += 1;
            survival_next *= (k + 1) as f64 / (self.lambda + k as f64 + 1.0);
        }
        k
    }
}

/// Convenience wrapper for [`ShiftedYule::sample`].
pub fn sample_shifted_yule<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64, DistError> {
    Ok(ShiftedYule::new(lambda)?.sample(rng))
}

/// Standard Poisson draw; `lambda = 0` always yields 0.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64, DistError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(domain("lambda", lambda, "finite lambda >= 0"));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    let draw: f64 = Poisson::new(lambda).expect("validated rate").sample(rng);
    Ok(draw as u64)
}

/// Household size: `Poisson(1.2) + 1`.
pub fn sample_clique_size<R: Rng + ?Sized>(rng: &mut R) -> u32 {
    sample_poisson(CLIQUE_LAMBDA, rng).expect("constant rate") as u32 + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DRAWS: usize = 1_000_000;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn moments(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for x in xs {
            n += 1;
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = (sumsq - n as f64 * mean * mean) / (n as f64 - 1.0);
        (mean, var, n)
    }

    #[test]
    fn overdispersed_binomial_mean_and_inflated_variance() {
        let dist = OverdispersedBinomial::new(9, 0.275, 0.3).unwrap();
        let mut r = rng(1);
        let (mean, var, _) = moments((0..DRAWS).map(|_| f64::from(dist.sample(&mut r))));
        assert!((mean - 2.475).abs() < 0.01, "mean {mean}");
        assert!(var > 9.0 * 0.275 * 0.725, "variance {var}");
        // n p (1-p) (1 + (n-1) rho) = 1.794375 * 3.4
        assert!((var - dist.variance()).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn overdispersed_binomial_degenerate_endpoints() {
        let mut r = rng(2);
        let zero = OverdispersedBinomial::new(9, 0.0, 0.3).unwrap();
        let one = OverdispersedBinomial::new(9, 1.0, 0.3).unwrap();
        for _ in 0..1000 {
            assert_eq!(zero.sample(&mut r), 0);
            assert_eq!(one.sample(&mut r), 9);
        }
    }

    #[test]
    fn overdispersed_binomial_rejects_bad_params() {
        assert!(OverdispersedBinomial::new(0, 0.5, 0.3).is_err());
        assert!(OverdispersedBinomial::new(9, -0.1, 0.3).is_err());
        assert!(OverdispersedBinomial::new(9, 1.1, 0.3).is_err());
        assert!(OverdispersedBinomial::new(9, 0.5, 0.0).is_err());
        assert!(OverdispersedBinomial::new(9, 0.5, 1.0).is_err());
        assert!(OverdispersedBinomial::new(9, f64::NAN, 0.3).is_err());
    }

    #[test]
    fn level_values_map_affinely() {
        assert_eq!(Level::new(0).unwrap().value(), 0.05);
        assert!((Level::new(9).unwrap().value() - 0.95).abs() < 1e-15);
        assert!(Level::new(10).is_none());
        for level in Level::ALL {
            assert_eq!(Level::from_value(level.value()), Some(level));
        }
        assert_eq!(Level::from_value(0.5), None);
    }

    #[test]
    fn block_level_mean_tracks_p() {
        let mut r = rng(3);
        let (mean, _, _) =
            moments((0..DRAWS).map(|_| sample_block_level(0.275, &mut r).unwrap().value()));
        assert!((mean - 0.2975).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn block_level_rejects_bad_p() {
        let mut r = rng(4);
        assert!(sample_block_level(1.5, &mut r).is_err());
    }

    #[test]
    fn yule_pmf_closed_form_points() {
        assert!((yule_pmf(0, 3.0).unwrap() - 0.75).abs() < 1e-12);
        assert!((yule_pmf(1, 3.0).unwrap() - 0.15).abs() < 1e-12);
        // 3 * 6 * 2 / 720
        assert!((yule_pmf(2, 3.0).unwrap() - 0.05).abs() < 1e-12);
        assert!(yule_pmf(0, 2.0).is_err());
        assert!(yule_pmf(0, 1.5).is_err());
    }

    #[test]
    fn yule_pmf_sums_to_one() {
        let total: f64 = (0..=10_000u64).map(|k| yule_pmf(k, 3.0).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-6, "total {total}");
    }

    #[test]
    fn yule_sampler_matches_pmf() {
        let dist = ShiftedYule::new(3.0).unwrap();
        let mut r = rng(5);
        let mut zeros = 0usize;
        let mut ones = 0usize;
        let mut sum = 0u64;
        for _ in 0..DRAWS {
            let k = dist.sample(&mut r);
            sum += k;
            match k {
                0 => zeros += 1,
                1 => ones += 1,
                _ => {}
            }
        }
        let mean = sum as f64 / DRAWS as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!((zeros as f64 / DRAWS as f64 - 0.75).abs() < 0.005);
        assert!((ones as f64 / DRAWS as f64 - 0.15).abs() < 0.005);
    }

    #[test]
    fn yule_large_lambda_is_nearly_degenerate() {
        let dist = ShiftedYule::new(1000.0).unwrap();
        assert!((dist.mean() - 1.0 / 999.0).abs() < 1e-12);
        let mut r = rng(6);
        let n = 200_000;
        let mean = (0..n).map(|_| dist.sample(&mut r)).sum::<u64>() as f64 / n as f64;
        assert!((mean - 0.001).abs() < 0.0005, "mean {mean}");
    }

    #[test]
    fn yule_rejects_heavy_tail_without_mean() {
        let mut r = rng(7);
        assert!(sample_shifted_yule(2.0, &mut r).is_err());
        assert!(ShiftedYule::new(f64::INFINITY).is_err());
    }

    #[test]
    fn clique_size_is_shifted_poisson() {
        let mut r = rng(8);
        let mut ones = 0usize;
        let mut sum = 0u64;
        for _ in 0..DRAWS {
            let s = sample_clique_size(&mut r);
            assert!(s >= 1);
            sum += u64::from(s);
            ones += usize::from(s == 1);
        }
        let mean = sum as f64 / DRAWS as f64;
        assert!((mean - 2.2).abs() < 0.01, "mean {mean}");
        assert!((ones as f64 / DRAWS as f64 - (-1.2f64).exp()).abs() < 0.005);
    }

    #[test]
    fn poisson_moments_and_zero_rate() {
        let mut r = rng(9);
        for _ in 0..1000 {
            assert_eq!(sample_poisson(0.0, &mut r).unwrap(), 0);
        }
        let mut zeros = 0usize;
        let mut sum = 0u64;
        for _ in 0..DRAWS {
            let k = sample_poisson(0.5, &mut r).unwrap();
            sum += k;
            zeros += usize::from(k == 0);
        }
        assert!((sum as f64 / DRAWS as f64 - 0.5).abs() < 0.005);
        assert!((zeros as f64 / DRAWS as f64 - (-0.5f64).exp()).abs() < 0.005);
        assert!(sample_poisson(-1.0, &mut r).is_err());
    }

    #[test]
    fn identical_seeds_give_identical_streams() {
        let a: Vec<u64> = {
            let mut r = rng(10);
            (0..100)
                .map(|_| sample_shifted_yule(3.0, &mut r).unwrap())
                .collect()
        };
        let b: Vec<u64> = {
            let mut r = rng(10);
            (0..100)
                .map(|_| sample_shifted_yule(3.0, &mut r).unwrap())
                .collect()
        };
        assert_eq!(a, b);
    }
}
