use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_gamma_unchecked;

/// Kernel family of the fitted mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[default]
    Gamma,
    /// Inverse-Gamma kernels, fitted as a Gamma mixture on `1/x`.
    #[serde(rename = "invgamma")]
    InverseGamma,
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(Model::Gamma),
            "invgamma" | "inverse-gamma" => Ok(Model::InverseGamma),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected gamma or invgamma)"
            ))),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::Gamma => "gamma",
            Model::InverseGamma => "invgamma",
        })
    }
}

/// Hyperparameters of the DP mixture prior and the `z` proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// DP mass `m`.
    pub mass: f64,
    /// Base-measure exponent `a > 1`.
    pub base_a: f64,
    /// `√z ~ Gamma(zb, zc)` (shape, rate).
    pub zb: f64,
    pub zc: f64,
    /// Weight of the random-walk component of the `z` proposal.
    pub w_z: f64,
    /// Concentration of the random-walk component.
    pub b_z: f64,
    pub model: Model,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            base_a: 2.0,
            zb: 1.0,
            zc: 1.0,
            w_z: 0.01,
            b_z: 10.0,
            model: Model::Gamma,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("zb", self.zb),
            ("zc", self.zc),
            ("b_z", self.b_z),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if !(self.base_a > 1.0) || !self.base_a.is_finite() {
            return Err(Error::Config(format!(
                "base measure exponent must exceed 1 for a proper prior, got {}",
                self.base_a
            )));
        }
        if !(0.0..1.0).contains(&self.w_z) {
            return Err(Error::Config(format!(
                "w_z must lie in [0, 1), got {}",
                self.w_z
            )));
        }
        Ok(())
    }
}

fn check_base_a(a: f64) -> Result<()> {
    if a > 1.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "base measure exponent (improper for a <= 1)",
            value: a,
            expected: "a > 1",
        })
    }
}

/// `ln(1/(a+1) + 1/(a-1))`.
fn base_ln_norm(a: f64) -> f64 {
    (1.0 / (a + 1.0) + 1.0 / (a - 1.0)).ln()
}

/// Log density of `G ∝ x^a 1{x ≤ 1} + x^{-a} 1{x > 1}`.
pub fn base_measure_logpdf(x: f64, a: f64) -> Result<f64> {
    check_base_a(a)?;
    if !(x > 0.0) {
        return Err(Error::Domain {
            what: "base measure argument",
            value: x,
            expected: "> 0",
        });
    }
    Ok(base_logpdf_unchecked(x.ln(), a))
}

#[inline]
fn base_logpdf_unchecked(ln_x: f64, a: f64) -> f64 {
    -a * ln_x.abs() - base_ln_norm(a)
}

pub fn base_measure_cdf(x: f64, a: f64) -> Result<f64> {
    check_base_a(a)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let z = 1.0 / (a + 1.0) + 1.0 / (a - 1.0);
    Ok(if x <= 1.0 {
        x.powf(a + 1.0) / ((a + 1.0) * z)
    } else {
        (1.0 / (a + 1.0) + (1.0 - x.powf(1.0 - a)) / (a - 1.0)) / z
    })
}

/// Exact draw from `G` by inversion.
pub fn base_measure_sample<R: Rng + ?Sized>(rng: &mut R, a: f64) -> Result<f64> {
    check_base_a(a)?;
    Ok(base_sample_unchecked(rng, a))
}

fn base_sample_unchecked<R: Rng + ?Sized>(rng: &mut R, a: f64) -> f64 {
    let z = 1.0 / (a + 1.0) + 1.0 / (a - 1.0);
    let p1 = 1.0 / ((a + 1.0) * z);
    let u: f64 = rng.sample(rand::distr::Open01);
    if u <= p1 {
        ((a + 1.0) * z * u).powf(1.0 / (a + 1.0))
    } else {
        (1.0 - (u - p1) * (a - 1.0) * z).powf(-1.0 / (a - 1.0))
    }
}

/// Prior on the atoms `ε_j`. For the inverse-Gamma model the Gamma mixture
/// is fitted to reciprocals, so its atoms are `1/ξ` with `ξ ~ G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseMeasure {
    a: f64,
    mirrored: bool,
}

impl BaseMeasure {
    pub fn standard(a: f64) -> Result<Self> {
        check_base_a(a)?;
        Ok(Self { a, mirrored: false })
    }

    /// Law of `1/ξ` for `ξ ~ G`: density `G(1/ε) ε^{-2}`.
    pub fn mirrored(a: f64) -> Result<Self> {
        check_base_a(a)?;
        Ok(Self { a, mirrored: true })
    }

    pub fn for_model(prior: &PriorConfig) -> Result<Self> {
        match prior.model {
            Model::Gamma => Self::standard(prior.base_a),
            Model::InverseGamma => Self::mirrored(prior.base_a),
        }
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    /// Log density at `ε` given `ln ε`.
    #[inline]
    pub fn ln_density(&self, ln_eps: f64) -> f64 {
        if self.mirrored {
            base_logpdf_unchecked(-ln_eps, self.a) - 2.0 * ln_eps
        } else {
            base_logpdf_unchecked(ln_eps, self.a)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = base_sample_unchecked(rng, self.a);
        if self.mirrored {
            1.0 / x
        } else {
            x
        }
    }
}

/// Log density of `z` when `√z ~ Gamma(b, c)` (shape, rate).
pub fn z_prior_logpdf(z: f64, b: f64, c: f64) -> Result<f64> {
    for (what, v) in [("z", z), ("b", b), ("c", c)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain {
                what: if what == "z" {
                    "z prior argument"
                } else {
                    "z prior hyperparameter"
                },
                value: v,
                expected: "finite and > 0",
            });
        }
    }
    Ok(z_prior_unchecked(z, b, c))
}

#[inline]
pub(crate) fn z_prior_unchecked(z: f64, b: f64, c: f64) -> f64 {
    let s = z.sqrt();
    b * c.ln() - ln_gamma_unchecked(b) + (b - 1.0) * 0.5 * z.ln() - c * s - (2.0 * s).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_half_line, HalfLine, QuadOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn base_measure_values() {
        assert!((base_measure_logpdf(1.0, 2.0).unwrap() - 0.75f64.ln()).abs() < 1e-15);
        assert!((base_measure_cdf(1.0, 2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(base_measure_logpdf(1.0, 1.0).is_err());
        assert!(base_measure_logpdf(0.0, 2.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(base_measure_sample(&mut rng, 0.5).is_err());
    }

    #[test]
    fn base_measure_integrates_to_one() {
        for a in [1.5, 2.0, 4.0] {
            let r = integrate_half_line(
                |x| base_measure_logpdf(x, a).unwrap().exp(),
                &HalfLine::new(vec![1.0]),
                &QuadOptions::with_abs_tol(1e-11),
            );
            assert!((r.value - 1.0).abs() < 1e-8, "a={a}: {r:?}");
        }
    }

    #[test]
    fn base_sampler_matches_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| base_measure_sample(&mut rng, 2.0).unwrap())
            .collect();
        let below = xs.iter().filter(|x| **x <= 1.0).count() as f64 / n as f64;
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((below - 0.25).abs() < 4.0 * se, "{below}");
        for q in [0.1, 0.5, 2.0, 10.0] {
            let emp = xs.iter().filter(|x| **x <= q).count() as f64 / n as f64;
            let p = base_measure_cdf(q, 2.0).unwrap();
            assert!((emp - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-4);
        }
    }

    #[test]
    fn mirrored_is_law_of_reciprocal() {
        let b = BaseMeasure::mirrored(2.0).unwrap();
        let s = BaseMeasure::standard(2.0).unwrap();
        for e in [0.3f64, 1.0, 4.0] {
            let want = s.ln_density(-e.ln()) - 2.0 * e.ln();
            assert_eq!(b.ln_density(e.ln()), want);
        }
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(b.sample(&mut r1), 1.0 / s.sample(&mut r2));
    }

    #[test]
    fn z_prior_values() {
        let v = z_prior_logpdf(1.0, 1.0, 1.0).unwrap();
        assert!((v - ((-1.0f64).exp() / 2.0).ln()).abs() < 1e-14);
        let r = integrate_half_line(
            |z| z_prior_logpdf(z, 1.0, 1.0).unwrap().exp(),
            &HalfLine::new(vec![0.1, 1.0, 4.0, 20.0]).singular(0.5),
            &QuadOptions::with_abs_tol(1e-11),
        );
        assert!((r.value - 1.0).abs() < 1e-8, "{r:?}");
        // log Π([x, ∞)) / √x → -c
        let x: f64 = 400.0;
        let tail = crate::quadrature::integrate_to_infinity(
            |z| z_prior_logpdf(z, 1.0, 1.0).unwrap().exp(),
            x,
            &QuadOptions {
                abs_tol: 1e-25,
                rel_tol: 1e-10,
                max_intervals: 2000,
            },
        );
        let ratio = tail.value.ln() / x.sqrt();
        assert!((ratio + 1.0).abs() < 0.25, "{ratio}");
        assert!(z_prior_logpdf(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn z_prior_matches_squared_gamma_draws() {
        use rand_distr::{Distribution, Gamma};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Gamma::new(2.0, 1.0 / 1.5).unwrap();
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                let s: f64 = g.sample(&mut rng);
                s * s <= 1.0
            })
            .count() as f64
            / n as f64;
        let p = crate::quadrature::integrate(
            |z| z_prior_logpdf(z, 2.0, 1.5).unwrap().exp(),
            0.0,
            1.0,
            &QuadOptions::with_abs_tol(1e-12),
        )
        .value;
        assert!((hits - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn config_validation() {
        assert!(PriorConfig::default().validate().is_ok());
        let bad = PriorConfig {
            base_a: 1.0,
            ..PriorConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PriorConfig {
            w_z: 1.0,
            ..PriorConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("invgamma".parse::<Model>().unwrap(), Model::InverseGamma);
        assert!("lognormal".parse::<Model>().is_err());
    }
}
