//! Gamma kernels parameterized by shape `z` and mean `ε`, their inverse-Gamma
//! mirror, closed-form Kullback–Leibler divergences and the kernel moments
//! `I_k(z, x) = ∫ (ε - x)^k g_{z,ε}(x) dε`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::quadrature::{integrate_half_line, HalfLine, QuadOptions};
use crate::special::{digamma_unchecked, ln_gamma_unchecked};

/// One Gamma kernel: shape `z`, mean `epsilon` (variance `epsilon²/z`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    z: f64,
    epsilon: f64,
}

impl KernelParams {
    pub fn new(z: f64, epsilon: f64) -> Result<Self> {
        check_positive("kernel shape z", z)?;
        check_positive("kernel mean epsilon", epsilon)?;
        Ok(Self { z, epsilon })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mean(&self) -> f64 {
        self.epsilon
    }

    pub fn variance(&self) -> f64 {
        self.epsilon * self.epsilon / self.z
    }
}

/// `z ln z - ln Γ(z)`: the part of the log normalizer that depends on `z` only.
#[inline]
pub fn shape_log_norm(z: f64) -> f64 {
    z * z.ln() - ln_gamma_unchecked(z)
}

/// Log kernel with every `z`-only term precomputed by the caller.
#[inline]
pub(crate) fn gamma_logpdf_parts(
    x: f64,
    ln_x: f64,
    z: f64,
    eps: f64,
    ln_eps: f64,
    norm: f64,
) -> f64 {
    (z - 1.0) * ln_x - z * x / eps - z * ln_eps + norm
}

/// `ln g_{z,ε}(x) = (z-1) ln x - z x/ε + z ln(z/ε) - ln Γ(z)`.
pub fn gamma_kernel_logpdf(x: f64, p: KernelParams) -> Result<f64> {
    check_positive("gamma kernel argument", x)?;
    Ok(gamma_logpdf_parts(
        x,
        x.ln(),
        p.z,
        p.epsilon,
        p.epsilon.ln(),
        shape_log_norm(p.z),
    ))
}

/// Draws from Gamma(shape = z, rate = z/ε).
pub fn gamma_kernel_sample<R: Rng + ?Sized>(rng: &mut R, p: KernelParams) -> f64 {
    let dist = Gamma::new(p.z, p.epsilon / p.z).expect("validated kernel parameters");
    loop {
        let x = dist.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

/// Log density of the inverse-Gamma kernel
/// `ḡ_{z,ξ}(x) = x^{-z-1} e^{-zξ/x} (zξ)^z / Γ(z)`.
pub fn inv_gamma_kernel_logpdf(x: f64, z: f64, xi: f64) -> Result<f64> {
    check_positive("inverse-gamma kernel argument", x)?;
    check_positive("kernel shape z", z)?;
    check_positive("inverse-gamma location xi", xi)?;
    Ok(inv_gamma_logpdf_parts(
        x.ln(),
        x,
        z,
        xi,
        ln_gamma_unchecked(z),
    ))
}

#[inline]
pub(crate) fn inv_gamma_logpdf_parts(ln_x: f64, x: f64, z: f64, xi: f64, ln_gamma_z: f64) -> f64 {
    -(z + 1.0) * ln_x - z * xi / x + z * (z * xi).ln() - ln_gamma_z
}

/// `KL(g_{z,ε₁} ‖ g_{z,ε₂}) = z (ε₁/ε₂ - 1 - ln(ε₁/ε₂))`.
pub fn kl_gamma_same_z(z: f64, eps1: f64, eps2: f64) -> Result<f64> {
    check_positive("kernel shape z", z)?;
    check_positive("eps1", eps1)?;
    check_positive("eps2", eps2)?;
    let d = (eps1 - eps2) / eps2;
    Ok((z * (d - d.ln_1p())).max(0.0))
}

/// `KL(g_{z,ε} ‖ g_{ẑ,ε})`; independent of `ε`.
pub fn kl_gamma_same_eps(z: f64, z_hat: f64, eps: f64) -> Result<f64> {
    check_positive("kernel shape z", z)?;
    check_positive("kernel shape z_hat", z_hat)?;
    check_positive("kernel mean eps", eps)?;
    let log_ratio =
        -z_hat * z_hat.ln() + ln_gamma_unchecked(z_hat) + z * z.ln() - ln_gamma_unchecked(z);
    let value = log_ratio - (z_hat - z) * (digamma_unchecked(z) - z.ln() - 1.0);
    Ok(value.max(0.0))
}

/// Largest moment order supported by [`kernel_moment_ik`].
pub const MAX_MOMENT_ORDER: u32 = 8;

/// `I_k(z, x) = ∫_0^∞ (ε - x)^k g_{z,ε}(x) dε` by adaptive quadrature in `ε`.
pub fn kernel_moment_ik(z: f64, x: f64, k: u32) -> Result<f64> {
    check_positive("kernel argument x", x)?;
    if k > MAX_MOMENT_ORDER {
        return Err(Error::Unsupported(format!(
            "kernel moments are implemented for k <= {MAX_MOMENT_ORDER}, got {k}"
        )));
    }
    let bound = 1.0f64.max(k as f64 + 1.0);
    if !(z > bound) || !z.is_finite() {
        return Err(Error::Domain {
            what: "kernel_moment_ik (z must exceed max(1, k+1) for integrability)",
            value: z,
            expected: "z > max(1, k+1)",
        });
    }
    // ε = x/u turns the integral into x^k ∫ (1-u)^k u^{z-2-k} e^{-zu} z^z/Γ(z) du,
    // whose tail is exponential instead of algebraic
    let norm = shape_log_norm(z);
    let sd = 1.0 / z.sqrt();
    let mut breaks = vec![1.0];
    for j in [-6.0, -3.0, -1.0, 1.0, 3.0, 6.0, 12.0] {
        let u = 1.0 + j * sd;
        if u > 0.0 {
            breaks.push(u);
        }
    }
    let ki = k as i32;
    let opts = QuadOptions {
        abs_tol: 1e-14 * sd.powi(ki),
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let expo = z - 2.0 - k as f64;
    let r = integrate_half_line(
        |u| (1.0 - u).powi(ki) * (expo * u.ln() - z * u + norm).exp(),
        &HalfLine::new(breaks).singular(z - 1.0 - k as f64),
        &opts,
    );
    Ok(x.powi(ki) * r.into_result()?)
}

/// `μ_k(z) = z^{k/2} I_k(z, 1)`; free of `x` because `I_k(z, x) = x^k I_k(z, 1)`.
pub fn kernel_moment_mu(z: f64, k: u32) -> Result<f64> {
    Ok(z.powf(k as f64 / 2.0) * kernel_moment_ik(z, 1.0, k)?)
}
