//! L1, Hellinger, Kullback–Leibler and V (variance of the log ratio) distances
//! between densities on `(0, ∞)`, plus empirical quantiles.
//!
//! Distances are integrated with [`crate::quadrature`] on a layout built from
//! both densities' breakpoints and the caller's split points. When the
//! adaptive scheme fails to converge the integral is re-estimated by
//! importance sampling and the result is flagged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_half_line, HalfLine, QuadOptions, QuadResult};

/// Seed of the importance-sampling fallback; fixed so results are reproducible.
const MC_SEED: u64 = 0x6d63_5f66_616c_6c62;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceOptions {
    pub abs_tol: f64,
    /// Extra breakpoints, ascending.
    pub split_points: Vec<f64>,
    pub mc_samples: usize,
    pub max_intervals: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-7,
            split_points: Vec::new(),
            mc_samples: 200_000,
            max_intervals: 4000,
        }
    }
}

impl DistanceOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::Config(format!(
                "abs_tol must be > 0, got {}",
                self.abs_tol
            )));
        }
        if self.split_points.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config(
                "split_points must be sorted ascending".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

/// A distance value with its error estimate (quadrature error bound or MC
/// standard error) and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Distance {
    pub value: f64,
    pub error: f64,
    pub method: Method,
    /// Set when the quadrature failed and the MC fallback was used, or when
    /// the divergence is infinite.
    pub flagged: bool,
    pub diagnostic: Option<String>,
}

impl Distance {
    fn quadrature(r: QuadResult) -> Self {
        Self {
            value: r.value,
            error: r.error,
            method: Method::Quadrature,
            flagged: false,
            diagnostic: None,
        }
    }
}

fn layout<F: Density, G: Density>(f: &F, g: &G, opts: &DistanceOptions) -> HalfLine {
    let mut points = f.breakpoints();
    points.extend(g.breakpoints());
    points.extend(opts.split_points.iter().copied());
    let alpha = [f.singular_alpha(), g.singular_alpha()]
        .into_iter()
        .flatten()
        .fold(1.0f64, f64::min);
    HalfLine::new(points).singular(alpha)
}

fn quad_opts(opts: &DistanceOptions) -> QuadOptions {
    QuadOptions {
        abs_tol: opts.abs_tol,
        rel_tol: 1e-12,
        max_intervals: opts.max_intervals,
    }
}

/// Importance-sampling estimate of `∫_0^∞ φ(x) dx` with a proposal mixing a
/// folded Cauchy of scale `s` and a power law `∝ x^{a-1}` on `(0, s]`.
fn monte_carlo<P: Fn(f64) -> f64>(phi: P, scale: f64, alpha: f64, n: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
    let a = 0.5 * alpha.min(1.0);
    let q = |x: f64| {
        let cauchy = 2.0 / (std::f64::consts::PI * scale) / (1.0 + (x / scale).powi(2));
        let power = if x <= scale {
            a * x.powf(a - 1.0) / scale.powf(a)
        } else {
            0.0
        };
        0.5 * cauchy + 0.5 * power
    };
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let n = n.max(2);
    for _ in 0..n {
        let u: f64 = rng.random();
        let x = if rng.random::<bool>() {
            scale * (0.5 * std::f64::consts::PI * u).tan()
        } else {
            scale * u.powf(1.0 / a)
        };
        let w = if x > 0.0 && x.is_finite() {
            phi(x) / q(x)
        } else {
            0.0
        };
        let w = if w.is_finite() { w } else { 0.0 };
        sum += w;
        sum_sq += w * w;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

fn integrate_or_fallback<F, G, P>(f: &F, g: &G, opts: &DistanceOptions, phi: P) -> Distance
where
    F: Density,
    G: Density,
    P: Fn(f64) -> f64,
{
    let layout = layout(f, g, opts);
    let r = integrate_half_line(&phi, &layout, &quad_opts(opts));
    if r.converged {
        return Distance::quadrature(r);
    }
    let mut pts = layout.breakpoints.clone();
    pts.sort_by(f64::total_cmp);
    let scale = pts.get(pts.len() / 2).copied().unwrap_or(1.0).max(1e-12);
    let alpha = layout.singular_alpha.unwrap_or(1.0);
    let (value, se) = monte_carlo(&phi, scale, alpha, opts.mc_samples);
    log::warn!(
        "quadrature did not converge (estimate {}, error {}); Monte Carlo fallback {} ± {}",
        r.value,
        r.error,
        value,
        se
    );
    Distance {
        value,
        error: se,
        method: Method::MonteCarlo,
        flagged: true,
        diagnostic: Some(format!(
            "quadrature stopped at {} intervals with error {:.3e}",
            r.intervals, r.error
        )),
    }
}

/// `‖f - g‖₁ = ∫ |f - g|`.
pub fn l1_distance<F: Density, G: Density>(f: &F, g: &G, opts: &DistanceOptions) -> Distance {
    integrate_or_fallback(f, g, opts, |x| (f.pdf(x) - g.pdf(x)).abs())
}

/// Importance-sampling estimate of `‖f - g‖₁`, bypassing quadrature.
pub fn l1_distance_mc<F: Density, G: Density>(f: &F, g: &G, opts: &DistanceOptions) -> Distance {
    let layout = layout(f, g, opts);
    let mut pts = layout.breakpoints.clone();
    pts.sort_by(f64::total_cmp);
    let scale = pts.get(pts.len() / 2).copied().unwrap_or(1.0).max(1e-12);
    let (value, error) = monte_carlo(
        |x| (f.pdf(x) - g.pdf(x)).abs(),
        scale,
        layout.singular_alpha.unwrap_or(1.0),
        opts.mc_samples,
    );
    Distance {
        value,
        error,
        method: Method::MonteCarlo,
        flagged: false,
        diagnostic: None,
    }
}

/// `D_H = sqrt(∫ (√f - √g)²)`.
pub fn hellinger<F: Density, G: Density>(f: &F, g: &G, opts: &DistanceOptions) -> Distance {
    let mut d = integrate_or_fallback(f, g, opts, |x| {
        let (a, b) = (f.pdf(x), g.pdf(x));
        let s = a.sqrt() + b.sqrt();
        if s > 0.0 {
            // (√a - √b)² written to avoid cancellation
            let diff = (a - b) / s;
            diff * diff
        } else {
            0.0
        }
    });
    let squared = d.value.max(0.0);
    d.value = squared.sqrt();
    d.error = if d.value > 0.0 {
        d.error / (2.0 * d.value)
    } else {
        d.error.sqrt()
    };
    d
}

/// Integrand `f log(f/g)^power` in log space; `None` when g vanishes under f.
fn log_ratio_term<F: Density, G: Density>(f: &F, g: &G, x: f64, power: i32) -> Option<f64> {
    let lf = f.ln_pdf(x);
    if lf == f64::NEG_INFINITY || lf.is_nan() {
        return Some(0.0);
    }
    let lg = g.ln_pdf(x);
    if lg == f64::NEG_INFINITY || lg.is_nan() {
        // numerically negligible f does not count as a support violation
        return if lf < -690.0 { Some(0.0) } else { None };
    }
    Some(lf.exp() * (lf - lg).powi(power))
}

fn support_check<F: Density, G: Density>(f: &F, g: &G, opts: &DistanceOptions) -> Option<f64> {
    let layout = layout(f, g, opts);
    let mut probe = layout.breakpoints.clone();
    probe.extend((-40..=40).map(|k| 10f64.powf(k as f64 / 8.0)));
    probe
        .into_iter()
        .filter(|x| *x > 0.0)
        .find(|&x| log_ratio_term(f, g, x, 1).is_none())
}

fn infinite(x: f64) -> Distance {
    Distance {
        value: f64::INFINITY,
        error: 0.0,
        method: Method::Quadrature,
        flagged: true,
        diagnostic: Some(format!(
            "second density vanishes at x = {x} where the first is positive"
        )),
    }
}

/// `KL(f ‖ g) = ∫ f log(f/g)`.
pub fn kl_divergence<F: Density, G: Density>(f: &F, g: &G, opts: &DistanceOptions) -> Distance {
    if let Some(x) = support_check(f, g, opts) {
        return infinite(x);
    }
    let mut d = integrate_or_fallback(f, g, opts, |x| {
        log_ratio_term(f, g, x, 1).unwrap_or(f64::INFINITY)
    });
    d.value = d.value.max(0.0);
    d
}

/// `V(f, g) = ∫ f log²(f/g) - KL(f ‖ g)²`, clamped at 0.
pub fn v_divergence<F: Density, G: Density>(f: &F, g: &G, opts: &DistanceOptions) -> Distance {
    if let Some(x) = support_check(f, g, opts) {
        return infinite(x);
    }
    let kl = kl_divergence(f, g, opts);
    let mut second = integrate_or_fallback(f, g, opts, |x| {
        log_ratio_term(f, g, x, 2).unwrap_or(f64::INFINITY)
    });
    second.value = (second.value - kl.value * kl.value).max(0.0);
    second.error += 2.0 * kl.value.abs() * kl.error;
    second.flagged |= kl.flagged;
    second
}

/// Empirical quantiles with the inclusive (linear interpolation between
/// order statistics, `h = (n-1)p`) rule.
pub fn weighted_quantiles(values: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Config("quantiles of an empty sample".into()));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    probs
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("quantile level {p} outside [0, 1]")));
            }
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::FnDensity;
    use crate::zoo::make_density;

    fn exp_rate(rate: f64) -> FnDensity<impl Fn(f64) -> f64 + Sync> {
        FnDensity::new(move |x: f64| rate * (-rate * x).exp()).with_breakpoints(vec![1.0 / rate])
    }

    #[test]
    fn self_distances_vanish() {
        let e = make_density("exp").unwrap();
        let o = DistanceOptions::default();
        assert!(l1_distance(&e, &e, &o).value.abs() < 1e-9);
        assert!(hellinger(&e, &e, &o).value.abs() < 1e-9);
        assert!(kl_divergence(&e, &e, &o).value.abs() < 1e-9);
        assert!(v_divergence(&e, &e, &o).value.abs() < 1e-9);
    }

    #[test]
    fn exponential_rates_closed_form() {
        // crossing at x = ln 2: ∫|e^{-x} - 2e^{-2x}| = 2(1/2 - 1/4) = 0.5
        let d = l1_distance(&exp_rate(1.0), &exp_rate(2.0), &DistanceOptions::default());
        assert!((d.value - 0.5).abs() < 1e-6, "{d:?}");
        assert_eq!(d.method, Method::Quadrature);
    }

    #[test]
    fn singular_self_distance() {
        let g = make_density("gamma:0.4:1").unwrap();
        let d = l1_distance(&g, &g, &DistanceOptions::default());
        assert!(d.value.abs() < 1e-6);
    }

    #[test]
    fn kl_infinite_when_support_broken() {
        let f = exp_rate(1.0);
        let g =
            FnDensity::new(|x: f64| if x < 1.0 { 1.0 } else { 0.0 }).with_breakpoints(vec![1.0]);
        let d = kl_divergence(&f, &g, &DistanceOptions::default());
        assert!(d.value.is_infinite());
        assert!(d.flagged);
        assert!(d.diagnostic.is_some());
    }

    #[test]
    fn quantile_rules() {
        let q = weighted_quantiles(&[4.0, 1.0, 3.0, 2.0], &[0.5, 0.0, 1.0]).unwrap();
        assert_eq!(q, vec![2.5, 1.0, 4.0]);
        assert!(weighted_quantiles(&[], &[0.5]).is_err());
        assert!(weighted_quantiles(&[1.0], &[1.5]).is_err());
    }

    #[test]
    fn options_validation() {
        let mut o = DistanceOptions::default();
        assert!(o.validate().is_ok());
        o.split_points = vec![2.0, 1.0];
        assert!(o.validate().is_err());
        assert!(DistanceOptions::with_abs_tol(0.0).validate().is_err());
    }

    #[test]
    fn fallback_path_is_flagged() {
        let f = exp_rate(1.0);
        let g = exp_rate(3.0);
        let opts = DistanceOptions {
            abs_tol: 1e-300,
            max_intervals: 2,
            mc_samples: 50_000,
            ..DistanceOptions::default()
        };
        let d = l1_distance(&f, &g, &opts);
        assert!(d.flagged);
        assert_eq!(d.method, Method::MonteCarlo);
        let exact = l1_distance(&f, &g, &DistanceOptions::default()).value;
        assert!((d.value - exact).abs() < 4.0 * d.error, "{d:?} vs {exact}");
    }
}
