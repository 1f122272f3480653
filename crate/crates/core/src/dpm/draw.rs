use serde::{Deserialize, Serialize};

use super::prior::Model;
use crate::density::Density;
use crate::error::{check_positive, Error, Result};
use crate::kernels::{gamma_logpdf_parts, inv_gamma_logpdf_parts, shape_log_norm};
use crate::metrics::weighted_quantiles;
use crate::special::ln_gamma_unchecked;
use crate::zoo::log_add;

/// Components below this weight are ignored when placing quadrature hints.
const SIGNIFICANT_WEIGHT: f64 = 1e-6;

/// One retained posterior sample of the mixing measure, truncated so the
/// listed weights cover all but `residual_weight` of the mass.
///
/// Atoms are kernel means `ε` for the Gamma model and locations `ξ` for the
/// inverse-Gamma model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub z: f64,
    pub components: Vec<(f64, f64)>,
    pub residual_weight: f64,
    #[serde(skip, default)]
    pub model: Model,
}

impl PosteriorDraw {
    pub fn new(
        z: f64,
        components: Vec<(f64, f64)>,
        residual_weight: f64,
        model: Model,
    ) -> Result<Self> {
        check_positive("draw shape z", z)?;
        for &(w, a) in &components {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Domain {
                    what: "draw weight",
                    value: w,
                    expected: "finite and >= 0",
                });
            }
            check_positive("draw atom", a)?;
        }
        Ok(Self {
            z,
            components,
            residual_weight,
            model,
        })
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.0).sum()
    }

    /// `ln Σ_j w_j g(x)` by log-sum-exp; the residual weight is ignored.
    pub fn logpdf(&self, x: f64) -> Result<f64> {
        check_positive("mixture argument", x)?;
        Ok(self.logpdf_unchecked(x))
    }

    fn logpdf_unchecked(&self, x: f64) -> f64 {
        let z = self.z;
        let ln_x = x.ln();
        let mut acc = f64::NEG_INFINITY;
        match self.model {
            Model::Gamma => {
                let norm = shape_log_norm(z);
                for &(w, e) in &self.components {
                    if w > 0.0 {
                        let l = gamma_logpdf_parts(x, ln_x, z, e, e.ln(), norm);
                        acc = log_add(acc, w.ln() + l);
                    }
                }
            }
            Model::InverseGamma => {
                let lg = ln_gamma_unchecked(z);
                for &(w, xi) in &self.components {
                    if w > 0.0 {
                        acc = log_add(acc, w.ln() + inv_gamma_logpdf_parts(ln_x, x, z, xi, lg));
                    }
                }
            }
        }
        acc
    }
}

/// Free-function form of [`PosteriorDraw::logpdf`].
pub fn mixture_logpdf(draw: &PosteriorDraw, x: f64) -> Result<f64> {
    draw.logpdf(x)
}

impl Density for PosteriorDraw {
    fn pdf(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.logpdf_unchecked(x).exp()
        } else {
            0.0
        }
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.logpdf_unchecked(x)
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Kernel centres and points three kernel widths either side.
    fn breakpoints(&self) -> Vec<f64> {
        let s = self.z.sqrt();
        let mut out = vec![];
        for &(w, a) in &self.components {
            if w <= SIGNIFICANT_WEIGHT {
                continue;
            }
            for k in [-3.0, 0.0, 3.0] {
                let f = 1.0 + k / s;
                if f > 0.0 {
                    out.push(match self.model {
                        Model::Gamma => a * f,
                        Model::InverseGamma => a / f,
                    });
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn singular_alpha(&self) -> Option<f64> {
        (self.model == Model::Gamma && self.z < 1.0).then_some(self.z)
    }
}

/// Pointwise average of several draws: the posterior mean density.
#[derive(Debug, Clone, Copy)]
pub struct MixtureDensity<'a> {
    draws: &'a [PosteriorDraw],
}

impl<'a> MixtureDensity<'a> {
    pub fn new(draws: &'a [PosteriorDraw]) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Config("no posterior draws".into()));
        }
        Ok(Self { draws })
    }
}

impl Density for MixtureDensity<'_> {
    fn pdf(&self, x: f64) -> f64 {
        self.draws.iter().map(|d| d.pdf(x)).sum::<f64>() / self.draws.len() as f64
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.draws.iter().flat_map(|d| d.breakpoints()).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn singular_alpha(&self) -> Option<f64> {
        self.draws
            .iter()
            .filter_map(|d| d.singular_alpha())
            .reduce(f64::min)
    }
}

/// Posterior density summary on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
}

/// Mean and 5/50/95% pointwise quantiles of the draw densities at `xs`.
pub fn density_grid(draws: &[PosteriorDraw], xs: &[f64]) -> Result<GridSummary> {
    if draws.is_empty() {
        return Err(Error::Config("no posterior draws".into()));
    }
    let mut out = GridSummary {
        x: xs.to_vec(),
        mean: Vec::with_capacity(xs.len()),
        q05: Vec::with_capacity(xs.len()),
        q50: Vec::with_capacity(xs.len()),
        q95: Vec::with_capacity(xs.len()),
    };
    let mut vals = vec![0.0; draws.len()];
    for &x in xs {
        check_positive("grid point", x)?;
        for (v, d) in vals.iter_mut().zip(draws) {
            *v = d.pdf(x);
        }
        out.mean.push(vals.iter().sum::<f64>() / vals.len() as f64);
        let q = weighted_quantiles(&vals, &[0.05, 0.5, 0.95])?;
        out.q05.push(q[0]);
        out.q50.push(q[1]);
        out.q95.push(q[2]);
    }
    Ok(out)
}
