//! Reference densities on `(0, ∞)` used as simulation truths.
//!
//! Each member exposes its log density, CDF, an exact sampler, the
//! unboundedness exponent `α` and derivatives up to order three of
//! `h(x) = x^{1-α} f(x)`. Members are built from a compact text grammar:
//!
//! ```text
//! exp | folded-cauchy | gamma:<shape>:<rate> | gamma-mix:<w>:<sh1>:<r1>:<sh2>:<r2>
//!     | weibull:<a>:<b> | folded-t:<nu> | frechet:<b>
//! ```

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StudentT};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::quadrature::{integrate_half_line, HalfLine, QuadOptions};
use crate::special::{gamma_p, ln_gamma_unchecked};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Exp,
    FoldedCauchy,
    Gamma {
        shape: f64,
        rate: f64,
    },
    GammaMix {
        w: f64,
        sh1: f64,
        r1: f64,
        sh2: f64,
        r2: f64,
    },
    /// `C x^{a-1} e^{-x^b}`
    Weibull {
        a: f64,
        b: f64,
    },
    /// `c_ν (1 + x²)^{-(ν+1)/2}`
    FoldedT {
        nu: f64,
    },
    /// `b x^{-b-1} e^{-x^{-b}}`
    Frechet {
        b: f64,
    },
}

/// A named reference density; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothDensity {
    kind: Kind,
    spec: String,
    alpha: f64,
    ln_norm: f64,
}

fn gamma_ln_norm(shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma_unchecked(shape)
}

/// Builds a density from its spec string.
pub fn make_density(spec: &str) -> Result<SmoothDensity> {
    let trimmed = spec.trim();
    let mut parts = trimmed.split(':');
    let head = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();

    let parse_error = |token: &str, reason: &str| Error::Parse {
        spec: spec.to_string(),
        token: token.to_string(),
        reason: reason.to_string(),
    };
    let expect_args = |n: usize| -> Result<Vec<f64>> {
        if args.len() != n {
            let token = if args.len() > n { args[n] } else { head };
            return Err(parse_error(
                token,
                &format!("`{head}` takes {n} parameter(s), got {}", args.len()),
            ));
        }
        args.iter()
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(a, "not a finite number"))
            })
            .collect()
    };
    let positive = |v: f64, token: &str| -> Result<f64> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(parse_error(token, "must be > 0"))
        }
    };

    let kind = match head {
        "exp" => {
            expect_args(0)?;
            Kind::Exp
        }
        "folded-cauchy" => {
            expect_args(0)?;
            Kind::FoldedCauchy
        }
        "gamma" => {
            let v = expect_args(2)?;
            Kind::Gamma {
                shape: positive(v[0], args[0])?,
                rate: positive(v[1], args[1])?,
            }
        }
        "gamma-mix" => {
            let v = expect_args(5)?;
            if !(0.0..=1.0).contains(&v[0]) {
                return Err(parse_error(args[0], "weight must lie in [0, 1]"));
            }
            Kind::GammaMix {
                w: v[0],
                sh1: positive(v[1], args[1])?,
                r1: positive(v[2], args[2])?,
                sh2: positive(v[3], args[3])?,
                r2: positive(v[4], args[4])?,
            }
        }
        "weibull" => {
            let v = expect_args(2)?;
            Kind::Weibull {
                a: positive(v[0], args[0])?,
                b: positive(v[1], args[1])?,
            }
        }
        "folded-t" => {
            let v = expect_args(1)?;
            Kind::FoldedT {
                nu: positive(v[0], args[0])?,
            }
        }
        "frechet" => {
            let v = expect_args(1)?;
            Kind::Frechet {
                b: positive(v[0], args[0])?,
            }
        }
        other => return Err(parse_error(other, "unknown density family")),
    };
    Ok(SmoothDensity::from_kind(kind, trimmed.to_string()))
}

impl SmoothDensity {
    fn from_kind(kind: Kind, spec: String) -> Self {
        let (alpha, ln_norm) = match kind {
            Kind::Exp => (1.0, 0.0),
            Kind::FoldedCauchy => (1.0, (2.0 / PI).ln()),
            Kind::Gamma { shape, rate } => (shape.min(1.0), gamma_ln_norm(shape, rate)),
            Kind::GammaMix { sh1, sh2, .. } => (sh1.min(sh2).min(1.0), 0.0),
            Kind::Weibull { a, b } => (a.min(1.0), b.ln() - ln_gamma_unchecked(a / b)),
            Kind::FoldedT { nu } => (
                1.0,
                2f64.ln() + ln_gamma_unchecked((nu + 1.0) / 2.0)
                    - 0.5 * PI.ln()
                    - ln_gamma_unchecked(nu / 2.0),
            ),
            Kind::Frechet { b } => (1.0, b.ln()),
        };
        Self {
            kind,
            spec,
            alpha,
            ln_norm,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::Exp => "exp",
            Kind::FoldedCauchy => "folded-cauchy",
            Kind::Gamma { .. } => "gamma",
            Kind::GammaMix { .. } => "gamma-mix",
            Kind::Weibull { .. } => "weibull",
            Kind::FoldedT { .. } => "folded-t",
            Kind::Frechet { .. } => "frechet",
        }
    }

    /// The spec string this density was built from.
    pub fn spec(&self) -> &str {
        &self.spec
    }

    pub fn params(&self) -> Vec<f64> {
        match self.kind {
            Kind::Exp | Kind::FoldedCauchy => vec![],
            Kind::Gamma { shape, rate } => vec![shape, rate],
            Kind::GammaMix {
                w,
                sh1,
                r1,
                sh2,
                r2,
            } => vec![w, sh1, r1, sh2, r2],
            Kind::Weibull { a, b } => vec![a, b],
            Kind::FoldedT { nu } => vec![nu],
            Kind::Frechet { b } => vec![b],
        }
    }

    /// Unboundedness exponent; `1` means bounded at the origin.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        match self.kind {
            Kind::Exp => -x,
            Kind::FoldedCauchy => self.ln_norm - (x * x).ln_1p(),
            Kind::Gamma { shape, rate } => self.ln_norm + (shape - 1.0) * x.ln() - rate * x,
            Kind::GammaMix {
                w,
                sh1,
                r1,
                sh2,
                r2,
            } => {
                let lx = x.ln();
                let l1 = w.ln() + gamma_ln_norm(sh1, r1) + (sh1 - 1.0) * lx - r1 * x;
                let l2 = (1.0 - w).ln() + gamma_ln_norm(sh2, r2) + (sh2 - 1.0) * lx - r2 * x;
                log_add(l1, l2)
            }
            Kind::Weibull { a, b } => self.ln_norm + (a - 1.0) * x.ln() - x.powf(b),
            Kind::FoldedT { nu } => self.ln_norm - 0.5 * (nu + 1.0) * (x * x).ln_1p(),
            Kind::Frechet { b } => self.ln_norm - (b + 1.0) * x.ln() - x.powf(-b),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.logpdf(x).exp()
    }

    /// Limit of the density at `0⁺` (infinite when `α < 1`).
    pub fn pdf_at_zero(&self) -> f64 {
        match self.kind {
            Kind::Exp => 1.0,
            Kind::FoldedCauchy | Kind::FoldedT { .. } => self.ln_norm.exp(),
            Kind::Frechet { .. } => 0.0,
            Kind::Gamma { shape, rate } => match shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => rate,
                _ => 0.0,
            },
            Kind::GammaMix {
                w,
                sh1,
                r1,
                sh2,
                r2,
            } => {
                let at0 = |sh: f64, r: f64| {
                    if sh < 1.0 {
                        f64::INFINITY
                    } else if sh == 1.0 {
                        r
                    } else {
                        0.0
                    }
                };
                w * at0(sh1, r1) + (1.0 - w) * at0(sh2, r2)
            }
            Kind::Weibull { a, .. } => {
                if a < 1.0 {
                    f64::INFINITY
                } else if a == 1.0 {
                    self.ln_norm.exp()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        match self.kind {
            Kind::Exp => -(-x).exp_m1(),
            Kind::FoldedCauchy => 2.0 / PI * x.atan(),
            Kind::Gamma { shape, rate } => gamma_p(shape, rate * x).unwrap_or(f64::NAN),
            Kind::GammaMix {
                w,
                sh1,
                r1,
                sh2,
                r2,
            } => {
                w * gamma_p(sh1, r1 * x).unwrap_or(f64::NAN)
                    + (1.0 - w) * gamma_p(sh2, r2 * x).unwrap_or(f64::NAN)
            }
            Kind::Weibull { a, b } => gamma_p(a / b, x.powf(b)).unwrap_or(f64::NAN),
            Kind::Frechet { b } => (-x.powf(-b)).exp(),
            Kind::FoldedT { .. } => {
                let opts = QuadOptions {
                    abs_tol: 1e-13,
                    rel_tol: 1e-13,
                    max_intervals: 2000,
                };
                crate::quadrature::integrate(|t| self.pdf(t), 0.0, x, &opts).value
            }
        }
    }

    /// One exact draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.sample_raw(rng);
            if x > 0.0 && x.is_finite() {
                return x;
            }
        }
    }

    fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            Kind::Exp => Exp1.sample(rng),
            Kind::FoldedCauchy => (0.5 * PI * rng.random::<f64>()).tan(),
            Kind::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).unwrap().sample(rng),
            Kind::GammaMix {
                w,
                sh1,
                r1,
                sh2,
                r2,
            } => {
                let (sh, r) = if rng.random::<f64>() < w {
                    (sh1, r1)
                } else {
                    (sh2, r2)
                };
                Gamma::new(sh, 1.0 / r).unwrap().sample(rng)
            }
            Kind::Weibull { a, b } => {
                let y: f64 = Gamma::new(a / b, 1.0).unwrap().sample(rng);
                y.powf(1.0 / b)
            }
            Kind::FoldedT { nu } => {
                let t: f64 = StudentT::new(nu).unwrap().sample(rng);
                t.abs() / nu.sqrt()
            }
            Kind::Frechet { b } => {
                let u: f64 = rng.random();
                (-u.ln()).powf(-1.0 / b)
            }
        }
    }

    /// Taylor jet of `h(x) = x^{1-α} f(x)` at `x`.
    pub fn h_jet(&self, x: f64) -> Jet {
        let v = Jet::variable(x);
        let ln_v = v.ln();
        let shift = 1.0 - self.alpha;
        let gamma_term = |weight: f64, sh: f64, r: f64| {
            // weight · r^sh/Γ(sh) · x^{sh-1+shift} e^{-r x}
            let c = weight.ln() + gamma_ln_norm(sh, r);
            (ln_v.scale(sh - 1.0 + shift) - v.scale(r) + c).exp()
        };
        match self.kind {
            Kind::Exp => (-v).exp(),
            Kind::FoldedCauchy => ((v * v + 1.0).ln().scale(-1.0) + self.ln_norm).exp(),
            Kind::Gamma { shape, rate } => gamma_term(1.0, shape, rate),
            Kind::GammaMix {
                w,
                sh1,
                r1,
                sh2,
                r2,
            } => {
                let mut h = Jet::constant(0.0);
                if w > 0.0 {
                    h = h + gamma_term(w, sh1, r1);
                }
                if w < 1.0 {
                    h = h + gamma_term(1.0 - w, sh2, r2);
                }
                h
            }
            Kind::Weibull { a, b } => {
                (ln_v.scale(a - 1.0 + shift) - ln_v.scale(b).exp() + self.ln_norm).exp()
            }
            Kind::FoldedT { nu } => {
                ((v * v + 1.0).ln().scale(-0.5 * (nu + 1.0)) + self.ln_norm).exp()
            }
            Kind::Frechet { b } => {
                (ln_v.scale(-b - 1.0) - ln_v.scale(-b).exp() + self.ln_norm).exp()
            }
        }
    }

    /// `h(x) = x^{1-α} f(x)`.
    pub fn h(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        (self.logpdf(x) + (1.0 - self.alpha) * x.ln()).exp()
    }

    /// `j`-th derivative of `h` at `x`, `j ≤ 3`.
    pub fn h_derivative(&self, j: usize, x: f64) -> Result<f64> {
        if j > crate::jet::ORDER {
            return Err(Error::Unsupported(format!(
                "derivatives of order {j} (maximum is {})",
                crate::jet::ORDER
            )));
        }
        if !(x > 0.0) {
            return Err(Error::Domain {
                what: "h_derivative",
                value: x,
                expected: "> 0",
            });
        }
        Ok(self.h_jet(x).derivative(j))
    }

    /// Typical length scale used to place quadrature breakpoints.
    pub fn scale(&self) -> f64 {
        match self.kind {
            Kind::Exp | Kind::FoldedCauchy | Kind::FoldedT { .. } | Kind::Frechet { .. } => 1.0,
            Kind::Gamma { shape, rate } => shape.max(0.2) / rate,
            Kind::GammaMix {
                sh1, r1, sh2, r2, ..
            } => (sh1 / r1).max(sh2 / r2),
            Kind::Weibull { a, b } => (a / b).powf(1.0 / b),
        }
    }

    /// Quadrature breakpoints spanning the bulk of the mass.
    pub fn quadrature_breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = [0.05, 0.2, 0.5, 1.0, 2.0, 5.0]
            .iter()
            .map(|m| m * self.scale())
            .collect();
        if let Kind::GammaMix {
            sh1, r1, sh2, r2, ..
        } = self.kind
        {
            pts.extend([0.2, 0.5, 1.0, 2.0, 5.0].iter().map(|m| m * sh1 / r1));
            pts.extend([0.2, 0.5, 1.0, 2.0, 5.0].iter().map(|m| m * sh2 / r2));
        }
        pts
    }
}

impl fmt::Display for SmoothDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

impl Density for SmoothDensity {
    fn pdf(&self, x: f64) -> f64 {
        SmoothDensity::pdf(self, x)
    }
    fn ln_pdf(&self, x: f64) -> f64 {
        self.logpdf(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.quadrature_breakpoints()
    }
    fn singular_alpha(&self) -> Option<f64> {
        (self.alpha < 1.0).then_some(self.alpha)
    }
}

/// `ln(e^a + e^b)` without overflow.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `n` i.i.d. draws, reproducible for a given seed.
pub fn sample_dataset(d: &SmoothDensity, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

/// Central finite-difference derivative of order `j ≤ 3`; the fallback for
/// functions without analytic derivatives.
pub fn finite_difference_derivative<F: Fn(f64) -> f64>(f: F, x: f64, j: usize) -> f64 {
    let base = match j {
        0 => return f(x),
        1 => 1e-5,
        2 => 1e-4,
        _ => 1e-3,
    };
    let h = (base * x.abs().max(1e-3)).min(x.abs() / 4.0).max(1e-12);
    match j {
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        _ => {
            (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h)
        }
    }
}

/// `∫ f` over `(0, ∞)` with the singular map when `α < 1`.
pub fn total_mass(d: &SmoothDensity, abs_tol: f64) -> Result<f64> {
    let layout = HalfLine::new(d.quadrature_breakpoints()).singular(d.alpha());
    integrate_half_line(|x| d.pdf(x), &layout, &QuadOptions::with_abs_tol(abs_tol)).into_result()
}
