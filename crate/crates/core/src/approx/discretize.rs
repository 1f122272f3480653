//! Finite mixing measures whose low-order moments match a continuous one on
//! each cell of a geometric partition.
//!
//! Per cell the recurrence coefficients of the restricted measure come from
//! Legendre modified moments through the modified Chebyshev algorithm, and
//! the Gauss nodes and weights from the eigen-decomposition of the Jacobi
//! matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::density::Density;
use crate::error::{check_positive, Error, Result};
use crate::kernels::{gamma_logpdf_parts, shape_log_norm};
use crate::quadrature::{integrate, QuadOptions};

/// Largest number of nodes per cell.
pub const MAX_NODES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizeOptions {
    /// `M` in `δ_z = M sqrt(log z / z)`.
    pub growth: f64,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        Self { growth: 5.0 }
    }
}

/// `Σ p_i δ_{u_i}` scaled by `mass`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
    cells: Vec<(f64, f64)>,
}

impl MixingMeasure {
    /// Validates atoms (positive, strictly increasing) and weights
    /// (nonnegative, summing to 1 within 1e-12).
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::with_mass(atoms, weights, 1.0, Vec::new())
    }

    fn with_mass(
        atoms: Vec<f64>,
        weights: Vec<f64>,
        mass: f64,
        cells: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if atoms.len() != weights.len() || atoms.is_empty() {
            return Err(Error::InvalidState(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms[0] <= 0.0 || atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidState(
                "atoms must be positive and strictly increasing".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidState("negative mixing weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        Ok(Self {
            atoms,
            weights,
            mass,
            cells,
        })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass of the measure that was discretized.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Partition cells, empty for hand-built measures.
    pub fn cells(&self) -> &[(f64, f64)] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `∫ g_{z,ε}(x) dP(ε)` including the mass factor.
    pub fn kz(&self, z: f64, x: f64) -> f64 {
        let norm = shape_log_norm(z);
        let ln_x = x.ln();
        self.mass
            * self
                .atoms
                .iter()
                .zip(&self.weights)
                .map(|(&u, &w)| w * gamma_logpdf_parts(x, ln_x, z, u, u.ln(), norm).exp())
                .sum::<f64>()
    }
}

/// Cell edges `e (1 + δ_z/2)^j`, the last one clipped to `upper`.
pub fn interval_edges(lower: f64, upper: f64, z: f64, growth: f64) -> Result<Vec<f64>> {
    check_positive("partition lower edge", lower)?;
    check_positive("partition growth constant", growth)?;
    if !(upper > lower) || !upper.is_finite() {
        return Err(Error::Domain {
            what: "partition upper edge",
            value: upper,
            expected: "finite and > lower edge",
        });
    }
    if !(z > 1.0) || !z.is_finite() {
        return Err(Error::Domain {
            what: "partition shape",
            value: z,
            expected: "z > 1",
        });
    }
    let delta = growth * (z.ln() / z).sqrt();
    let ratio = 1.0 + 0.5 * delta;
    let mut edges = vec![lower];
    let mut j = 1;
    loop {
        let next = lower * ratio.powi(j);
        if next >= upper * (1.0 - 1e-12) {
            edges.push(upper);
            return Ok(edges);
        }
        edges.push(next);
        j += 1;
    }
}

/// Monic Legendre recurrence `π_{k+1} = t π_k - b_k π_{k-1}`.
fn legendre_b(k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        let k2 = (k * k) as f64;
        k2 / (4.0 * k2 - 1.0)
    }
}

fn monic_legendre(t: f64, out: &mut [f64]) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = cur;
        let next = t * cur - legendre_b(k) * prev;
        prev = cur;
        cur = next;
    }
}

/// Modified Chebyshev algorithm: recurrence coefficients `(α_k, β_k)` of the
/// measure with modified moments `nu` against monic Legendre polynomials.
/// Stops early (returning fewer coefficients) once some `β_k` is not positive.
fn modified_chebyshev(nu: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let width = 2 * n;
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut sigma_prev = vec![0.0; width + 1];
    let mut sigma = nu[..width].to_vec();
    sigma.push(0.0);
    alpha.push(nu[1] / nu[0]);
    beta.push(nu[0]);
    for k in 1..n {
        let mut next = vec![0.0; width + 1];
        for l in k..(width - k) {
            next[l] = sigma[l + 1] - (alpha[k - 1]) * sigma[l] - beta[k - 1] * sigma_prev[l]
                + legendre_b(l) * sigma[l - 1];
        }
        let b = next[k] / sigma[k - 1];
        if !(b > 0.0) || !b.is_finite() {
            break;
        }
        alpha.push(next[k + 1] / next[k] - sigma[k] / sigma[k - 1]);
        beta.push(b);
        sigma_prev = sigma;
        sigma = next;
    }
    (alpha, beta)
}

/// Gauss rule on `[-1, 1]` from recurrence coefficients (Golub–Welsch).
fn golub_welsch(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = alpha.len();
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = alpha[i];
        if i + 1 < n {
            let off = beta[i + 1].sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], beta[0] * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss rule for `H` restricted to `[lo, hi]`: up to `nodes` points matching
/// moments of order `< 2·nodes`. Returns `(mass, nodes, weights)` with
/// weights summing to 1.
fn cell_rule<D: Density + ?Sized>(
    h: &D,
    lo: f64,
    hi: f64,
    nodes: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    let mass = integrate(
        |t| r * h.pdf(c + r * t),
        -1.0,
        1.0,
        &QuadOptions {
            abs_tol: 1e-300,
            rel_tol: 1e-14,
            max_intervals: 2000,
        },
    );
    let mass = mass.value;
    if !(mass > 0.0) {
        return Ok((0.0, vec![], vec![]));
    }
    let count = 2 * nodes;
    let opts = QuadOptions {
        abs_tol: 1e-16,
        rel_tol: 1e-14,
        max_intervals: 2000,
    };
    let mut buf = vec![0.0; count];
    let nu: Vec<f64> = (0..count)
        .map(|k| {
            integrate(
                |t| {
                    monic_legendre(t, &mut buf[..=k]);
                    r * h.pdf(c + r * t) * buf[k] / mass
                },
                -1.0,
                1.0,
                &opts,
            )
            .value
        })
        .collect();
    let (alpha, beta) = modified_chebyshev(&nu, nodes);
    let mut n = alpha.len();
    if n < nodes {
        log::warn!("cell [{lo}, {hi}]: moment recursion broke down, using {n} of {nodes} nodes");
    }
    loop {
        let (t, w) = golub_welsch(&alpha[..n], &beta[..n]);
        let ok = t.iter().all(|x| *x > -1.0 && *x < 1.0) && w.iter().all(|v| *v >= 0.0);
        if ok {
            let total: f64 = w.iter().sum();
            let atoms = t.iter().map(|x| c + r * x).collect();
            let weights = w.iter().map(|v| v / total).collect();
            return Ok((mass, atoms, weights));
        }
        if n == 1 {
            return Err(Error::InvalidState(format!(
                "no valid quadrature for cell [{lo}, {hi}]"
            )));
        }
        log::warn!(
            "cell [{lo}, {hi}]: {n}-node rule invalid, retrying with {}",
            n - 1
        );
        n -= 1;
    }
}

/// Moment-matched discretization of `H` on `[lower, upper]`: each cell of the
/// geometric partition gets an `nodes`-point Gauss rule of its normalized
/// restriction, weighted by the cell's mass.
pub fn discretize_mixing<D: Density + ?Sized>(
    h: &D,
    lower: f64,
    upper: f64,
    z: f64,
    nodes: usize,
    opts: &DiscretizeOptions,
) -> Result<MixingMeasure> {
    if nodes == 0 || nodes > MAX_NODES {
        return Err(Error::Unsupported(format!(
            "{nodes} nodes per cell (supported: 1..={MAX_NODES})"
        )));
    }
    let edges = interval_edges(lower, upper, z, opts.growth)?;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut cells = Vec::new();
    for w in edges.windows(2) {
        let (mass, a, p) = cell_rule(h, w[0], w[1], nodes)?;
        cells.push((w[0], w[1]));
        if mass == 0.0 {
            continue;
        }
        atoms.extend(a);
        weights.extend(p.into_iter().map(|v| v * mass));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidState(format!(
            "mixing density has no mass on [{lower}, {upper}]"
        )));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    MixingMeasure::with_mass(atoms, weights, total, cells)
}
