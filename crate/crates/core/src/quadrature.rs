//! Adaptive Gauss–Kronrod quadrature on finite intervals and on the half line.
//!
//! Every integral is broken into segments, each carrying its own change of
//! variables: the identity on finite panels, `x = s + w·t/(1-t)` for the tail
//! past the last breakpoint, and `x = t^{1/α}` on `[0, b]` when the integrand
//! has an `x^{α-1}` pole at the origin. Segments are then refined together by
//! global bisection of the panel with the largest error estimate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances and limits for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

impl QuadResult {
    /// Turns a non-converged result into an error.
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Quadrature {
                estimate: self.value,
                error: self.error,
                intervals: self.intervals,
            })
        }
    }
}

/// Change of variables attached to a segment.
#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// x = start + scale·t/(1-t), t ∈ [0, 1)
    Tail {
        start: f64,
        scale: f64,
    },
    /// x = t^power, t ∈ [0, end^{1/power}]
    Power {
        power: f64,
    },
}

impl Map {
    #[inline]
    fn apply(&self, t: f64) -> (f64, f64) {
        match *self {
            Map::Identity => (t, 1.0),
            Map::Tail { start, scale } => {
                let s = 1.0 - t;
                (start + scale * t / s, scale / (s * s))
            }
            Map::Power { power } => {
                let x = t.powf(power);
                (x, power * t.powf(power - 1.0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    map: Map,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// 21-point Kronrod rule with the embedded 10-point Gauss rule; returns the
/// Kronrod estimate and a QUADPACK-style error estimate.
fn kronrod21<F: FnMut(f64) -> f64>(f: &mut F, map: Map, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |t: f64| {
        let (x, jac) = map.apply(t);
        if jac == 0.0 || !jac.is_finite() {
            return 0.0;
        }
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let fc = eval(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx);
        let f2 = eval(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

/// Describes how to split `(0, ∞)` for [`integrate_half_line`].
#[derive(Debug, Clone, Default)]
pub struct HalfLine {
    /// Interior breakpoints; need not be sorted or unique.
    pub breakpoints: Vec<f64>,
    /// When `Some(α)` with `α < 1`, the first panel uses `x = t^{1/α}` to
    /// absorb an `x^{α-1}` singularity at the origin.
    pub singular_alpha: Option<f64>,
    /// Scale of the tail map; defaults to the last breakpoint (or 1).
    pub tail_scale: Option<f64>,
}

impl HalfLine {
    pub fn new(breakpoints: Vec<f64>) -> Self {
        Self {
            breakpoints,
            ..Self::default()
        }
    }

    pub fn singular(mut self, alpha: f64) -> Self {
        if alpha < 1.0 {
            self.singular_alpha = Some(alpha);
        }
        self
    }
}

fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    segments: &[(f64, f64, Map)],
    opts: &QuadOptions,
) -> QuadResult {
    let mut heap = BinaryHeap::with_capacity(opts.max_intervals + segments.len());
    let mut total = 0.0;
    let mut total_err = 0.0;
    for &(a, b, map) in segments {
        if b <= a {
            continue;
        }
        let (value, error) = kronrod21(&mut f, map, a, b);
        total += value;
        total_err += error;
        heap.push(Panel {
            a,
            b,
            map,
            value,
            error,
        });
    }
    let mut intervals = heap.len();
    let tol = |total: f64| opts.abs_tol.max(opts.rel_tol * total.abs());
    while total_err > tol(total) && intervals < opts.max_intervals {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-14 * worst.a.abs() {
            // cannot be split further; keep it and give up on refinement
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod21(&mut f, worst.map, worst.a, mid);
        let (v2, e2) = kronrod21(&mut f, worst.map, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            map: worst.map,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            map: worst.map,
            value: v2,
            error: e2,
        });
        intervals += 1;
    }
    // resum to shed accumulated rounding from the running updates
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    QuadResult {
        value,
        error,
        intervals,
        converged: error <= tol(value),
    }
}

/// ∫_a^b f(x) dx.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> QuadResult {
    adaptive(f, &[(a, b, Map::Identity)], opts)
}

/// ∫_a^∞ f(x) dx, with the tail scale set to `max(|a|, 1)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(f: F, a: f64, opts: &QuadOptions) -> QuadResult {
    let scale = a.abs().max(1.0);
    adaptive(f, &[(0.0, 1.0, Map::Tail { start: a, scale })], opts)
}

/// ∫_0^∞ f(x) dx with breakpoints and an optional singular map at 0.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    f: F,
    layout: &HalfLine,
    opts: &QuadOptions,
) -> QuadResult {
    let mut points: Vec<f64> = layout
        .breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > 0.0)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    if points.is_empty() {
        points.push(1.0);
    }
    let mut segments = Vec::with_capacity(points.len() + 1);
    let first = points[0];
    match layout.singular_alpha {
        Some(alpha) if alpha < 1.0 && alpha > 0.0 => {
            let power = 1.0 / alpha;
            segments.push((0.0, first.powf(alpha), Map::Power { power }));
        }
        _ => segments.push((0.0, first, Map::Identity)),
    }
    for w in points.windows(2) {
        segments.push((w[0], w[1], Map::Identity));
    }
    let last = *points.last().expect("non-empty");
    let scale = layout.tail_scale.unwrap_or(last).max(1e-300);
    segments.push((0.0, 1.0, Map::Tail { start: last, scale }));
    adaptive(f, &segments, opts)
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n and P_n'
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, &QuadOptions::default());
        assert!(r.converged);
        assert!((r.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_to_infinity(|x| (-x).exp(), 0.0, &QuadOptions::default());
        assert!((r.value - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn cauchy_half_line() {
        let r = integrate_half_line(
            |x| 2.0 / (PI * (1.0 + x * x)),
            &HalfLine::new(vec![1.0]),
            &QuadOptions::default(),
        );
        assert!((r.value - 1.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn singular_origin_is_absorbed() {
        // ∫_0^∞ x^{-0.6} e^{-x} dx = Γ(0.4)
        let expected = crate::special::ln_gamma(0.4).unwrap().exp();
        let r = integrate_half_line(
            |x| x.powf(-0.6) * (-x).exp(),
            &HalfLine::new(vec![0.4, 2.0]).singular(0.4),
            &QuadOptions::default(),
        );
        assert!(r.converged);
        assert!((r.value - expected).abs() < 1e-10, "{r:?} vs {expected}");
    }

    #[test]
    fn narrow_peak_found_with_breakpoint() {
        let s = 1e-3;
        let f = |x: f64| (-(x - 5.0) * (x - 5.0) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        let r = integrate_half_line(
            f,
            &HalfLine::new(vec![
                5.0 - 10.0 * s,
                5.0 - 3.0 * s,
                5.0,
                5.0 + 3.0 * s,
                5.0 + 10.0 * s,
            ]),
            &QuadOptions::default(),
        );
        assert!((r.value - 1.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn nonconvergence_is_reported() {
        let opts = QuadOptions {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_intervals: 3,
        };
        let r = integrate(
            |x: f64| x.abs().sqrt().sin() / x.abs().max(1e-300),
            0.0,
            1.0,
            &opts,
        );
        assert!(!r.converged);
        assert!(r.into_result().is_err());
    }

    #[test]
    fn gauss_legendre_integrates_high_degree() {
        let (x, w) = gauss_legendre(12);
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        // degree 22 monomial: ∫ x^22 = 2/23
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((m - 2.0 / 23.0).abs() < 1e-14);
    }
}
