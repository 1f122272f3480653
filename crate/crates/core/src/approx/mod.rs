//! The smoothing operator `K_z f(x) = ∫ g_{z,ε}(x) f(ε) dε` and the
//! constructions built on it: the power-law representation for densities
//! unbounded at zero, Taylor-corrected and thresholded approximants, finite
//! moment-matched mixing measures, and empirical rate studies.

mod discretize;

pub use discretize::{discretize_mixing, interval_edges, DiscretizeOptions, MixingMeasure};

use rayon::prelude::*;

use crate::density::{Density, FnDensity};
use crate::error::{check_positive, Error, Result};
use crate::kernels::{kernel_moment_mu, shape_log_norm};
use crate::metrics::{hellinger, l1_distance, DistanceOptions};
use crate::quadrature::{integrate_half_line, HalfLine, QuadOptions, QuadResult};
use crate::special::ln_gamma_unchecked;
use crate::zoo::SmoothDensity;

const KZ_OPTIONS: QuadOptions = QuadOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-11,
    max_intervals: 4000,
};

/// `K_z f(x)` by quadrature.
///
/// With `ε = x/u` the integral becomes `z^z/Γ(z) ∫ u^{z-2} e^{-zu} f(x/u) du`,
/// whose weight decays exponentially in `u` whatever the tail of `f`.
pub fn kz_point<D: Density + ?Sized>(f: &D, z: f64, x: f64) -> QuadResult {
    let norm = shape_log_norm(z);
    let sd = 1.0 / z.sqrt();
    let mut breaks: Vec<f64> = [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 12.0]
        .iter()
        .map(|j| 1.0 + j * sd)
        .filter(|u| *u > 0.0)
        .collect();
    breaks.extend(
        f.breakpoints()
            .into_iter()
            .filter(|b| *b > 0.0)
            .map(|b| x / b),
    );
    let mut layout = HalfLine::new(breaks);
    if z < 2.0 {
        layout = layout.singular(z - 1.0);
    }
    integrate_half_line(
        |u| {
            let w = ((z - 2.0) * u.ln() - z * u + norm).exp();
            if w == 0.0 {
                0.0
            } else {
                w * f.pdf(x / u)
            }
        },
        &layout,
        &KZ_OPTIONS,
    )
}

/// `K_z f` on a grid. Points whose quadrature did not converge are returned
/// with `converged == false` rather than failing the whole grid.
pub fn apply_kz<D: Density + ?Sized>(f: &D, z: f64, xs: &[f64]) -> Result<Vec<QuadResult>> {
    if !(z > 1.0) || !z.is_finite() {
        return Err(Error::Domain {
            what: "apply_kz shape",
            value: z,
            expected: "z > 1",
        });
    }
    for &x in xs {
        check_positive("apply_kz grid point", x)?;
    }
    Ok(xs.iter().map(|&x| kz_point(f, z, x)).collect())
}

/// `K_z f` viewed as a density in its own right.
pub struct Smoothed<D> {
    inner: D,
    z: f64,
}

impl<D: Density> Smoothed<D> {
    pub fn new(inner: D, z: f64) -> Result<Self> {
        if !(z > 1.0) || !z.is_finite() {
            return Err(Error::Domain {
                what: "smoothing shape",
                value: z,
                expected: "z > 1",
            });
        }
        Ok(Self { inner, z })
    }
}

impl<D: Density> Density for Smoothed<D> {
    fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        kz_point(&self.inner, self.z, x).value
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints()
    }
    fn singular_alpha(&self) -> Option<f64> {
        self.inner.singular_alpha()
    }
}

/// `z^α Γ(z-α) / Γ(z)`, the leading-order prefactor `1 + O(1/z)`.
pub fn leading_prefactor(z: f64, alpha: f64) -> f64 {
    (alpha * z.ln() + ln_gamma_unchecked(z - alpha) - ln_gamma_unchecked(z)).exp()
}

/// Exact prefactor `P` in `K_z f(x) = x^{α-1} P K_{z+1-α} h(x / C_z)`:
/// `z^α Γ(z+1-α) / ((z+1-α) Γ(z))`. It differs from [`leading_prefactor`]
/// by the factor `(z-α)/(z+1-α)`.
pub fn representation_prefactor(z: f64, alpha: f64) -> f64 {
    let zp = z + 1.0 - alpha;
    (alpha * z.ln() + ln_gamma_unchecked(zp) - ln_gamma_unchecked(z) - zp.ln()).exp()
}

/// `C_z = 1 + (1-α)/z`.
pub fn scale_factor(z: f64, alpha: f64) -> f64 {
    1.0 + (1.0 - alpha) / z
}

/// Relative residuals of the power-law representation of `K_z f`, both sides
/// computed by independent quadratures.
pub fn representation_check(f: &SmoothDensity, z: f64, xs: &[f64]) -> Result<Vec<f64>> {
    if !(z > 2.0) || !z.is_finite() {
        return Err(Error::Domain {
            what: "representation_check shape",
            value: z,
            expected: "z > 2",
        });
    }
    let alpha = f.alpha();
    let c_z = scale_factor(z, alpha);
    let prefactor = representation_prefactor(z, alpha);
    let z_shift = z + 1.0 - alpha;
    let h = FnDensity::new(|x: f64| f.h(x)).with_breakpoints(f.quadrature_breakpoints());
    let lhs = apply_kz(f, z, xs)?;
    let rhs_inner = apply_kz(&h, z_shift, &xs.iter().map(|x| x / c_z).collect::<Vec<_>>())?;
    xs.iter()
        .zip(lhs.iter().zip(&rhs_inner))
        .map(|(&x, (l, r))| {
            if !l.converged || !r.converged {
                return Err(Error::Quadrature {
                    estimate: l.value,
                    error: l.error.max(r.error),
                    intervals: l.intervals.max(r.intervals),
                });
            }
            let rhs = x.powf(alpha - 1.0) * prefactor * r.value;
            Ok((l.value - rhs).abs() / l.value.abs())
        })
        .collect()
}

/// Rescaled (and for `β > 2`, Taylor-corrected) approximant of `f`.
#[derive(Debug, Clone)]
pub struct CorrectedDensity {
    f: SmoothDensity,
    z: f64,
    beta: f64,
    c_z: f64,
    /// `μ₂(z)`; present only when the second-order correction is active.
    mu2: Option<f64>,
}

/// Builds `f̃(x) = C_z f(C_z x)` for `β ≤ 2`, or the one-step correction
/// `C_z f_{β,α}(C_z x)` with
/// `f_{β,α}(y) = f(y) - y^{α-1} [h(y)/(z-1) + y² h''(y) μ₂(z)/(2z)]` for `β ∈ (2, 4]`.
pub fn build_corrected_density(f: &SmoothDensity, beta: f64, z: f64) -> Result<CorrectedDensity> {
    if !(beta > 0.0) {
        return Err(Error::Domain {
            what: "smoothness beta",
            value: beta,
            expected: "in (0, 4]",
        });
    }
    if beta > 4.0 {
        return Err(Error::Unsupported(format!(
            "corrections beyond first order (beta = {beta} > 4)"
        )));
    }
    let alpha = f.alpha();
    if !(z > 1.0 - alpha) || !z.is_finite() {
        return Err(Error::Domain {
            what: "corrected density shape",
            value: z,
            expected: "z > 1 - alpha",
        });
    }
    let mu2 = if beta > 2.0 {
        Some(kernel_moment_mu(z, 2)?)
    } else {
        None
    };
    Ok(CorrectedDensity {
        f: f.clone(),
        z,
        beta,
        c_z: scale_factor(z, alpha),
        mu2,
    })
}

impl CorrectedDensity {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn truth(&self) -> &SmoothDensity {
        &self.f
    }

    /// `f̃(x) = C_z f(C_z x)`.
    pub fn plain(&self, x: f64) -> f64 {
        self.c_z * self.f.pdf(self.c_z * x)
    }

    fn unscaled(&self, y: f64) -> f64 {
        let base = self.f.pdf(y);
        let Some(mu2) = self.mu2 else { return base };
        let jet = self.f.h_jet(y);
        let correction =
            jet.value() / (self.z - 1.0) + y * y * jet.derivative(2) * mu2 / (2.0 * self.z);
        base - y.powf(self.f.alpha() - 1.0) * correction
    }

    /// Value of the (possibly negative) corrected function at `x`.
    pub fn value(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        self.c_z * self.unscaled(self.c_z * x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.f
            .quadrature_breakpoints()
            .into_iter()
            .map(|b| b / self.c_z)
            .collect()
    }
}

/// `c_β max(f_corr, f̃/2)`, normalized to unit mass.
#[derive(Debug, Clone)]
pub struct ThresholdDensity {
    corrected: CorrectedDensity,
    c_beta: f64,
}

impl ThresholdDensity {
    pub fn c_beta(&self) -> f64 {
        self.c_beta
    }

    fn raw(&self, x: f64) -> f64 {
        let floor = 0.5 * self.corrected.plain(x);
        let v = self.corrected.value(x);
        if v >= floor {
            v
        } else {
            floor
        }
    }
}

impl Density for ThresholdDensity {
    fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        self.c_beta * self.raw(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.corrected.breakpoints()
    }
    fn singular_alpha(&self) -> Option<f64> {
        Some(self.corrected.f.alpha()).filter(|a| *a < 1.0)
    }
}

/// Floors `f_corr` at half the rescaled truth and renormalizes by quadrature.
pub fn threshold_normalize(
    f_corr: &CorrectedDensity,
    f: &SmoothDensity,
    z: f64,
) -> Result<ThresholdDensity> {
    if f_corr.f != *f || f_corr.z != z {
        return Err(Error::InvalidState(format!(
            "corrected density was built for ({}, z = {}), not ({f}, z = {z})",
            f_corr.f, f_corr.z
        )));
    }
    let unnormalized = ThresholdDensity {
        corrected: f_corr.clone(),
        c_beta: 1.0,
    };
    let mut layout = HalfLine::new(unnormalized.breakpoints());
    if let Some(a) = unnormalized.singular_alpha() {
        layout = layout.singular(a);
    }
    let mass = integrate_half_line(
        |x| unnormalized.raw(x),
        &layout,
        &QuadOptions {
            abs_tol: 1e-11,
            rel_tol: 1e-12,
            max_intervals: 4000,
        },
    )
    .into_result()?;
    if !(mass > 0.0) {
        return Err(Error::InvalidState(format!(
            "thresholded mass {mass} is not positive"
        )));
    }
    Ok(ThresholdDensity {
        c_beta: 1.0 / mass,
        ..unnormalized
    })
}

/// Errors of `K_z f̄_β` against `f` over a list of shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxReport {
    pub z_values: Vec<f64>,
    pub hellinger_errors: Vec<f64>,
    pub l1_errors: Vec<f64>,
    /// Least-squares slope of `ln D_H` against `ln z`.
    pub fitted_slope: f64,
    pub l1_slope: f64,
    pub beta_used: f64,
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

impl ApproxReport {
    /// CSV with header `z,hellinger,l1` and a final `slope` row holding the
    /// Hellinger and L1 slopes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,hellinger,l1\n");
        for i in 0..self.z_values.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.z_values[i], self.hellinger_errors[i], self.l1_errors[i]
            ));
        }
        out.push_str(&format!("slope,{},{}\n", self.fitted_slope, self.l1_slope));
        out
    }

    /// Inverse of [`ApproxReport::to_csv`]; `beta` is not stored in the file.
    pub fn from_csv(text: &str, beta: f64) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("z,hellinger,l1") {
            return Err(Error::Config("missing `z,hellinger,l1` header".into()));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number `{s}`: {e}")))
        };
        let mut report = ApproxReport {
            z_values: vec![],
            hellinger_errors: vec![],
            l1_errors: vec![],
            fitted_slope: f64::NAN,
            l1_slope: f64::NAN,
            beta_used: beta,
        };
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Config(format!("expected 3 columns in `{line}`")));
            }
            if cols[0] == "slope" {
                report.fitted_slope = num(cols[1])?;
                report.l1_slope = num(cols[2])?;
            } else {
                report.z_values.push(num(cols[0])?);
                report.hellinger_errors.push(num(cols[1])?);
                report.l1_errors.push(num(cols[2])?);
            }
        }
        if report.fitted_slope.is_nan() {
            return Err(Error::Config("missing slope footer row".into()));
        }
        Ok(report)
    }
}

/// For each `z`, builds `f̄_β`, smooths it with `K_z` and measures the
/// Hellinger and L1 errors against `f`; shapes are processed in parallel.
pub fn rate_study(f: &SmoothDensity, beta: f64, z_list: &[f64]) -> Result<ApproxReport> {
    if z_list.len() < 4 {
        return Err(Error::Config(format!(
            "rate study needs at least 4 shapes, got {}",
            z_list.len()
        )));
    }
    if z_list.windows(2).any(|w| w[0] >= w[1]) || z_list.iter().any(|z| !(*z > 10.0)) {
        return Err(Error::Config(
            "rate study shapes must be increasing and all > 10".into(),
        ));
    }
    let opts = DistanceOptions {
        abs_tol: 1e-11,
        split_points: f.quadrature_breakpoints(),
        mc_samples: 20_000,
        max_intervals: 4000,
    };
    let rows: Vec<Result<(f64, f64)>> = z_list
        .par_iter()
        .map(|&z| {
            let corrected = build_corrected_density(f, beta, z)?;
            let fbar = threshold_normalize(&corrected, f, z)?;
            let smoothed = Smoothed::new(fbar, z)?;
            let dh = hellinger(&smoothed, f, &opts);
            let l1 = l1_distance(&smoothed, f, &opts);
            if dh.flagged || l1.flagged {
                log::warn!("rate study at z = {z}: distance fell back to Monte Carlo");
            }
            Ok((dh.value, l1.value))
        })
        .collect();
    let mut hellinger_errors = Vec::with_capacity(z_list.len());
    let mut l1_errors = Vec::with_capacity(z_list.len());
    for row in rows {
        let (h, l) = row?;
        hellinger_errors.push(h);
        l1_errors.push(l);
    }
    Ok(ApproxReport {
        z_values: z_list.to_vec(),
        fitted_slope: log_log_slope(z_list, &hellinger_errors),
        l1_slope: log_log_slope(z_list, &l1_errors),
        hellinger_errors,
        l1_errors,
        beta_used: beta,
    })
}
