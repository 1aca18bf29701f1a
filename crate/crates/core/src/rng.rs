//! Reproducible, splittable random streams and the sampling distributions
//! used by the samplers.
//!
//! Streams are ChaCha8 instances: the master seed fixes the key and the
//! stream id selects one of 2^64 non-overlapping keystreams, so deriving a
//! stream is O(1) and independent of how many draws other streams made.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
    master_seed: u64,
    stream_id: u64,
}

/// Stream `stream_id` of the generator keyed by `master_seed`.
pub fn derive_stream(master_seed: u64, stream_id: u64) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
    inner.set_stream(stream_id);
    RngStream {
        inner,
        master_seed,
        stream_id,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream `k`. Depends only on `(master_seed, stream_id, k)`, not on
    /// how far this stream has advanced.
    pub fn child(&self, k: u64) -> RngStream {
        let key = splitmix64(splitmix64(self.master_seed) ^ splitmix64(!self.stream_id));
        derive_stream(key, k)
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    #[inline]
    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(self)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`; `n` must be positive.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.random_range(0..n)
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                return i;
            }
            u -= w;
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    pub fn gamma(&mut self, shape: f64) -> f64 {
        Gamma::new(shape, 1.0).unwrap().sample(self)
    }

    pub fn chi_squared(&mut self, df: f64) -> f64 {
        2.0 * self.gamma(df / 2.0)
    }

    /// `df * scale / X` with `X ~ chi2(df)`.
    pub fn scaled_inv_chi_squared(&mut self, df: f64, scale: f64) -> f64 {
        df * scale / self.chi_squared(df)
    }

    /// Dirichlet draw, computed in log space so that tiny concentrations do
    /// not underflow to an all-zero vector.
    pub fn dirichlet(&mut self, alpha: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = alpha
            .iter()
            .map(|&a| {
                if a < 1.0 {
                    // Gamma(a) = Gamma(a + 1) * U^(1/a)
                    self.gamma(a + 1.0).ln() + self.uniform_open().ln() / a
                } else {
                    self.gamma(a).ln()
                }
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }

    pub fn truncated_normal(&mut self, mean: f64, sd: f64, side: Side) -> f64 {
        match side {
            Side::Positive => mean + sd * std_normal_above(self, -mean / sd),
            Side::Negative => mean - sd * std_normal_above(self, mean / sd),
        }
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
#[inline]
pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

const TAIL_SWITCH: f64 = 4.0;

/// `Z ~ N(0,1)` conditioned on `Z > a`.
///
/// Inverse CDF for `|a| <= 4`, Robert's translated-exponential rejection
/// for `a > 4`, plain rejection for `a < -4` (acceptance above 0.9999).
pub fn std_normal_above<R: Rng + ?Sized>(rng: &mut R, a: f64) -> f64 {
    if a > TAIL_SWITCH {
        let rate = (a + (a * a + 4.0).sqrt()) / 2.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            let z = a + e / rate;
            let rho = (-(z - rate) * (z - rate) / 2.0).exp();
            if rng.random::<f64>() <= rho {
                return z;
            }
        }
    } else if a < -TAIL_SWITCH {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > a {
                return z;
            }
        }
    } else {
        let upper = norm_cdf(-a);
        loop {
            let u: f64 = rng.random();
            if u == 0.0 {
                continue;
            }
            let z = -norm_quantile(u * upper);
            if z > a && z.is_finite() {
                return z;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

/// Parameterized distribution, validated before sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Normal { mean: f64, sd: f64 },
    TruncatedNormal { mean: f64, sd: f64, side: Side },
    Bernoulli { p: f64 },
    Categorical { weights: Vec<f64> },
    Dirichlet { alpha: Vec<f64> },
    ScaledInvChiSq { df: f64, scale: f64 },
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Draw {
    Real(f64),
    Index(usize),
    Vector(Vec<f64>),
}

impl Draw {
    pub fn real(&self) -> Option<f64> {
        match self {
            Draw::Real(v) => Some(*v),
            Draw::Index(i) => Some(*i as f64),
            Draw::Vector(_) => None,
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exponential { rate } => positive("rate", *rate),
            Self::Normal { mean, sd } | Self::TruncatedNormal { mean, sd, .. } => {
                finite("mean", *mean)?;
                positive("sd", *sd)
            }
            Self::Bernoulli { p } => {
                if (0.0..=1.0).contains(p) {
                    Ok(())
                } else {
                    Err(invalid("p", format!("must lie in [0, 1], got {p}")))
                }
            }
            Self::Categorical { weights } => {
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(invalid("weights", "must be nonnegative and finite"));
                }
                if !weights.iter().any(|w| *w > 0.0) {
                    return Err(invalid("weights", "must not all be zero"));
                }
                Ok(())
            }
            Self::Dirichlet { alpha } => {
                if alpha.is_empty() {
                    return Err(invalid("alpha", "must be nonempty"));
                }
                alpha.iter().try_for_each(|a| positive("alpha", *a))
            }
            Self::ScaledInvChiSq { df, scale } => {
                positive("df", *df)?;
                positive("scale", *scale)
            }
            Self::Uniform { low, high } => {
                finite("low", *low)?;
                finite("high", *high)?;
                if low < high {
                    Ok(())
                } else {
                    Err(invalid("high", format!("must exceed low ({low}), got {high}")))
                }
            }
        }
    }
}

/// One exact draw from `dist`.
pub fn sample(rng: &mut RngStream, dist: &DistributionSpec) -> Result<Draw> {
    dist.validate()?;
    Ok(match dist {
        DistributionSpec::Exponential { rate } => Draw::Real(rng.exp1() / rate),
        DistributionSpec::Normal { mean, sd } => Draw::Real(rng.normal(*mean, *sd)),
        DistributionSpec::TruncatedNormal { mean, sd, side } => {
            Draw::Real(rng.truncated_normal(*mean, *sd, *side))
        }
        DistributionSpec::Bernoulli { p } => Draw::Real(if rng.bernoulli(*p) { 1.0 } else { 0.0 }),
        DistributionSpec::Categorical { weights } => Draw::Index(rng.categorical(weights)),
        DistributionSpec::Dirichlet { alpha } => Draw::Vector(rng.dirichlet(alpha)),
        DistributionSpec::ScaledInvChiSq { df, scale } => {
            Draw::Real(rng.scaled_inv_chi_squared(*df, *scale))
        }
        DistributionSpec::Uniform { low, high } => Draw::Real(low + (high - low) * rng.uniform()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ks_one_sample, mean};
    use statrs::distribution::{Beta, ChiSquared, ContinuousCDF, Exp, Gamma as GammaDist};

    fn draws(dist: &DistributionSpec, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = derive_stream(seed, 0);
        (0..n)
            .map(|_| sample(&mut rng, dist).unwrap().real().unwrap())
            .collect()
    }

    #[test]
    fn same_seed_and_stream_is_deterministic() {
        let mut a = derive_stream(42, 0);
        let mut b = derive_stream(42, 0);
        let va: Vec<f64> = (0..100).map(|_| a.uniform()).collect();
        let vb: Vec<f64> = (0..100).map(|_| b.uniform()).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn streams_differ_in_first_draw() {
        let mut a = derive_stream(42, 0);
        let mut b = derive_stream(42, 1);
        assert_ne!(a.uniform(), b.uniform());
    }

    #[test]
    fn golden_first_uniform() {
        let u = derive_stream(42, 7).uniform();
        assert!((0.0..1.0).contains(&u));
        assert_eq!(u.to_bits(), GOLDEN_42_7);
    }
    const GOLDEN_42_7: u64 = 4_593_797_953_228_562_192;

    #[test]
    fn child_streams_ignore_consumption() {
        let a = derive_stream(9, 3);
        let mut b = derive_stream(9, 3);
        b.uniform();
        assert_eq!(a.child(5).uniform(), b.child(5).uniform());
        assert_ne!(a.child(5).uniform(), a.child(6).uniform());
        assert_ne!(a.child(0).uniform(), derive_stream(9, 0).uniform());
    }

    #[test]
    fn invalid_parameters_name_the_field() {
        let mut rng = derive_stream(1, 0);
        let err = sample(&mut rng, &DistributionSpec::Exponential { rate: 0.0 }).unwrap_err();
        assert!(err.to_string().contains("`rate`"));
        let err = sample(&mut rng, &DistributionSpec::Normal { mean: 0.0, sd: -1.0 }).unwrap_err();
        assert!(err.to_string().contains("`sd`"));
        let err = sample(&mut rng, &DistributionSpec::Categorical { weights: vec![0.0, 0.0] })
            .unwrap_err();
        assert!(err.to_string().contains("`weights`"));
        let err = sample(&mut rng, &DistributionSpec::Dirichlet { alpha: vec![1.0, -1.0] })
            .unwrap_err();
        assert!(err.to_string().contains("`alpha`"));
        let err = sample(&mut rng, &DistributionSpec::ScaledInvChiSq { df: 3.0, scale: 0.0 })
            .unwrap_err();
        assert!(err.to_string().contains("`scale`"));
    }

    #[test]
    fn exponential_mean() {
        let xs = draws(&DistributionSpec::Exponential { rate: 1.0 }, 1_000_000, 11);
        assert!((mean(&xs) - 1.0).abs() < 0.005);
    }

    #[test]
    fn half_normal_mean_and_support() {
        let dist = DistributionSpec::TruncatedNormal {
            mean: 0.0,
            sd: 1.0,
            side: Side::Positive,
        };
        let xs = draws(&dist, 1_000_000, 12);
        assert!(xs.iter().all(|&x| x > 0.0));
        let expected = (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean(&xs) - expected).abs() < 0.005);
    }

    fn truncated_cdf(mean: f64, sd: f64, side: Side) -> impl Fn(f64) -> f64 {
        move |x| {
            let z = (x - mean) / sd;
            let a = -mean / sd;
            match side {
                Side::Positive => {
                    let lo = norm_cdf(a);
                    ((norm_cdf(z) - lo) / (1.0 - lo)).clamp(0.0, 1.0)
                }
                Side::Negative => (norm_cdf(z) / norm_cdf(a)).clamp(0.0, 1.0),
            }
        }
    }

    #[test]
    fn truncated_normal_ks_across_regimes() {
        for (i, &(m, s, side)) in [
            (0.0, 1.0, Side::Positive),
            (1.5, 0.7, Side::Negative),
            (-2.0, 1.0, Side::Positive),
            (5.0, 1.0, Side::Positive),
        ]
        .iter()
        .enumerate()
        {
            let xs = draws(&DistributionSpec::TruncatedNormal { mean: m, sd: s, side }, 100_000, 20 + i as u64);
            let r = ks_one_sample(&xs, truncated_cdf(m, s, side));
            assert!(r.p_value > 0.001, "({m},{s},{side:?}) p={}", r.p_value);
        }
    }

    #[test]
    fn far_tail_uses_rejection_and_stays_in_support() {
        // mean -6 truncated to the positive half: the truncation point sits 6 sd out.
        let dist = DistributionSpec::TruncatedNormal {
            mean: -6.0,
            sd: 1.0,
            side: Side::Positive,
        };
        let xs = draws(&dist, 100_000, 30);
        assert!(xs.iter().all(|&x| x > 0.0));
        let r = ks_one_sample(&xs, truncated_cdf(-6.0, 1.0, Side::Positive));
        assert!(r.p_value > 0.001, "p={}", r.p_value);
    }

    #[test]
    fn continuous_samplers_pass_ks() {
        let exp = draws(&DistributionSpec::Exponential { rate: 2.5 }, 100_000, 40);
        let d = Exp::new(2.5).unwrap();
        assert!(ks_one_sample(&exp, |x| d.cdf(x)).p_value > 0.001);

        let nrm = draws(&DistributionSpec::Normal { mean: 1.0, sd: 2.0 }, 100_000, 41);
        assert!(ks_one_sample(&nrm, |x| norm_cdf((x - 1.0) / 2.0)).p_value > 0.001);

        let uni = draws(&DistributionSpec::Uniform { low: -1.0, high: 3.0 }, 100_000, 42);
        assert!(ks_one_sample(&uni, |x| ((x + 1.0) / 4.0).clamp(0.0, 1.0)).p_value > 0.001);
    }

    #[test]
    fn scaled_inverse_chi_square_via_chi_square() {
        let (df, scale) = (3.0, 0.7);
        let xs = draws(&DistributionSpec::ScaledInvChiSq { df, scale }, 100_000, 43);
        let transformed: Vec<f64> = xs.iter().map(|v| df * scale / v).collect();
        let chi2 = ChiSquared::new(df).unwrap();
        assert!(ks_one_sample(&transformed, |x| chi2.cdf(x)).p_value > 0.001);
    }

    #[test]
    fn gamma_small_shape_ks() {
        let mut rng = derive_stream(44, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.gamma(0.3)).collect();
        let g = GammaDist::new(0.3, 1.0).unwrap();
        assert!(ks_one_sample(&xs, |x| g.cdf(x)).p_value > 0.001);
    }

    #[test]
    fn dirichlet_simplex_and_beta_marginal() {
        let mut rng = derive_stream(45, 0);
        let dist = DistributionSpec::Dirichlet {
            alpha: vec![1.0, 1.0, 1.0],
        };
        let mut first = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let Draw::Vector(w) = sample(&mut rng, &dist).unwrap() else {
                panic!("vector expected")
            };
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&v| v >= 0.0));
            first.push(w[0]);
        }
        let beta = Beta::new(1.0, 2.0).unwrap();
        assert!(ks_one_sample(&first, |x| beta.cdf(x)).p_value > 0.001);
    }

    #[test]
    fn dirichlet_tiny_concentration_stays_on_simplex() {
        let mut rng = derive_stream(46, 0);
        for _ in 0..1000 {
            let w = rng.dirichlet(&[1e-3; 10]);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn categorical_frequencies() {
        let mut rng = derive_stream(47, 0);
        let mut counts = [0u64; 3];
        for _ in 0..100_000 {
            counts[rng.categorical(&[1.0, 0.0, 3.0])] += 1;
        }
        assert_eq!(counts[1], 0);
        let r = crate::diagnostics::chi_square_gof(&counts, &[0.25, 0.0, 0.75]);
        assert!(r.p_value > 0.001);
    }
}
