//! A minimal interface for functions on `(0, ∞)` that the distance and
//! smoothing routines integrate.

/// A nonnegative function on `(0, ∞)`, usually a probability density.
pub trait Density: Sync {
    fn pdf(&self, x: f64) -> f64;

    /// Natural log of [`Density::pdf`]; override when a direct formula avoids underflow.
    fn ln_pdf(&self, x: f64) -> f64 {
        self.pdf(x).ln()
    }

    /// Points where the integrand changes scale (modes, kernel centers).
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Exponent `α < 1` when the function behaves like `x^{α-1}` near 0.
    fn singular_alpha(&self) -> Option<f64> {
        None
    }
}

impl<D: Density + ?Sized> Density for &D {
    fn pdf(&self, x: f64) -> f64 {
        (**self).pdf(x)
    }
    fn ln_pdf(&self, x: f64) -> f64 {
        (**self).ln_pdf(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
    fn singular_alpha(&self) -> Option<f64> {
        (**self).singular_alpha()
    }
}

/// Wraps a closure with optional quadrature hints.
pub struct FnDensity<F> {
    f: F,
    breakpoints: Vec<f64>,
    alpha: Option<f64>,
}

impl<F: Fn(f64) -> f64 + Sync> FnDensity<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            breakpoints: Vec::new(),
            alpha: None,
        }
    }

    pub fn with_breakpoints(mut self, points: Vec<f64>) -> Self {
        self.breakpoints = points;
        self
    }

    pub fn with_singular_alpha(mut self, alpha: f64) -> Self {
        if alpha < 1.0 {
            self.alpha = Some(alpha);
        }
        self
    }
}

impl<F: Fn(f64) -> f64 + Sync> Density for FnDensity<F> {
    fn pdf(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
    fn singular_alpha(&self) -> Option<f64> {
        self.alpha
    }
}
