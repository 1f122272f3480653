//! Truncated Taylor arithmetic (order 3) used to get exact derivatives of the
//! reference densities without hand-expanding product and chain rules.

use std::ops::{Add, Mul, Neg, Sub};

pub const ORDER: usize = 3;

/// Taylor coefficients `c[k] = f^{(k)}(x₀) / k!` for `k ≤ 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; ORDER + 1],
}

const FACTORIAL: [f64; ORDER + 1] = [1.0, 1.0, 2.0, 6.0];

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self {
            c: [v, 0.0, 0.0, 0.0],
        }
    }

    /// The identity function expanded at `x`.
    pub fn variable(x: f64) -> Self {
        Self {
            c: [x, 1.0, 0.0, 0.0],
        }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.c[k] * FACTORIAL[k]
    }

    pub fn scale(self, s: f64) -> Self {
        Self {
            c: self.c.map(|v| v * s),
        }
    }

    pub fn exp(self) -> Self {
        let a = &self.c;
        let mut e = [a[0].exp(), 0.0, 0.0, 0.0];
        for k in 1..=ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Self { c: e }
    }

    pub fn ln(self) -> Self {
        let a = &self.c;
        let mut l = [a[0].ln(), 0.0, 0.0, 0.0];
        for k in 1..=ORDER {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * l[j] * a[k - j];
            }
            l[k] = (a[k] - s / k as f64) / a[0];
        }
        Self { c: l }
    }

    /// `self^p` for a positive expansion value.
    pub fn powf(self, p: f64) -> Self {
        (self.ln().scale(p)).exp()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut c = [0.0; ORDER + 1];
        for (k, ck) in c.iter_mut().enumerate() {
            for j in 0..=k {
                *ck += self.c[j] * rhs.c[k - j];
            }
        }
        Jet { c }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}
