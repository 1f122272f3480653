use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use super::prior::{z_prior_unchecked, BaseMeasure, Model, PriorConfig};
use super::state::{ChainState, Data};
use crate::error::{Error, Result};
use crate::special::ln_gamma_unchecked;
use crate::zoo::log_add;

/// Hard cap on instantiated sticks.
pub const MAX_STICKS: usize = 10_000;

/// Sticks are kept inside `[MIN_POSITIVE, 1 - 2^-53]` so `ln V` and
/// `ln(1 - V)` stay finite.
fn clamp_stick(v: f64) -> f64 {
    v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma_unchecked(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Counters from one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepStats {
    pub atom_proposals: usize,
    pub atom_accepts: usize,
    pub atom_nonfinite: usize,
    pub z_accepted: bool,
    pub z_fallback: bool,
    pub sticks_added: usize,
}

/// Data, prior and base measure of one chain; every update and the joint
/// density oracle live here.
#[derive(Debug, Clone)]
pub struct Sampler {
    data: Data,
    prior: PriorConfig,
    base: BaseMeasure,
}

impl Sampler {
    /// Sampler on the given data with an explicit base measure.
    pub fn new(data: Data, prior: PriorConfig, base: BaseMeasure) -> Result<Self> {
        prior.validate()?;
        Ok(Self { data, prior, base })
    }

    /// For the inverse-Gamma model the chain runs on reciprocals with the
    /// mirrored base measure.
    pub fn for_model(raw: &Data, prior: PriorConfig) -> Result<Self> {
        let base = BaseMeasure::for_model(&prior)?;
        let data = match prior.model {
            Model::Gamma => raw.clone(),
            Model::InverseGamma => raw.reciprocal(),
        };
        Self::new(data, prior, base)
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    pub fn prior(&self) -> &PriorConfig {
        &self.prior
    }

    pub fn base(&self) -> &BaseMeasure {
        &self.base
    }

    /// One cluster at the sample mean, `z = 1`, its stick from the prior.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChainState> {
        let v = self.draw_prior_stick(rng);
        ChainState::new(
            1.0,
            vec![v],
            vec![self.data.mean()],
            vec![0; self.data.len()],
            &self.data,
        )
    }

    fn draw_prior_stick<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let beta = Beta::new(1.0, self.prior.mass).expect("validated mass");
        clamp_stick(beta.sample(rng))
    }

    /// Draws a stick and an atom from the prior.
    pub(crate) fn draw_prior_component<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let v = self.draw_prior_stick(rng);
        (v, self.base.sample(rng))
    }

    fn ln_stick_prior(&self, v: f64) -> f64 {
        let m = self.prior.mass;
        m.ln() + (m - 1.0) * (1.0 - v).ln()
    }

    /// Everything in the joint except the datum-level terms.
    fn log_prior(&self, s: &ChainState) -> f64 {
        let mut lp = z_prior_unchecked(s.z, self.prior.zb, self.prior.zc);
        for (&v, &e) in s.v.iter().zip(&s.eps) {
            lp += self.ln_stick_prior(v) + self.base.ln_density(e.ln());
        }
        lp
    }

    fn ln_kernel(&self, i: usize, z: f64, eps: f64, shape_norm: f64) -> f64 {
        let x = self.data.values()[i];
        (z - 1.0) * self.data.ln_values()[i] - z * x / eps - z * eps.ln() + shape_norm
    }

    fn check_structure(&self, s: &ChainState) -> Result<()> {
        s.check(&self.data)
    }

    /// Log joint density of `(X, u, c, V, ε, z)` under the slice-augmented
    /// model. A violated slice indicator gives `-∞`.
    pub fn log_joint(&self, s: &ChainState) -> Result<f64> {
        self.check_structure(s)?;
        let norm = s.z * s.z.ln() - ln_gamma_unchecked(s.z);
        let mut lj = self.log_prior(s);
        for (i, &c) in s.alloc.iter().enumerate() {
            if !(s.u[i] > 0.0 && s.u[i] < s.p[c]) {
                return Ok(f64::NEG_INFINITY);
            }
            lj += self.ln_kernel(i, s.z, s.eps[c], norm);
        }
        Ok(lj)
    }

    /// Log joint of `(X, c, V, ε, z)` with the slices integrated out.
    pub fn log_joint_marginal(&self, s: &ChainState) -> Result<f64> {
        self.check_structure(s)?;
        let norm = s.z * s.z.ln() - ln_gamma_unchecked(s.z);
        let mut lj = self.log_prior(s);
        for (i, &c) in s.alloc.iter().enumerate() {
            lj += s.p[c].ln() + self.ln_kernel(i, s.z, s.eps[c], norm);
        }
        Ok(lj)
    }

    // ---- atoms ----

    /// `ln G(ε) - z S_j/ε - z n_j ln ε`.
    pub fn atom_log_target(&self, s: &ChainState, j: usize, eps: f64) -> f64 {
        let ln_eps = eps.ln();
        self.base.ln_density(ln_eps) - s.z * s.sums[j] / eps - s.z * s.counts[j] as f64 * ln_eps
    }

    fn atom_proposal_params(&self, s: &ChainState, j: usize) -> (f64, f64) {
        (
            self.prior.base_a + s.z * s.counts[j] as f64,
            s.z * s.sums[j],
        )
    }

    /// Inverse-Gamma(shape `a + z n_j`, scale `z S_j`) proposal density.
    pub fn atom_proposal_logpdf(&self, s: &ChainState, j: usize, eps: f64) -> f64 {
        let (shape, scale) = self.atom_proposal_params(s, j);
        shape * scale.ln() - ln_gamma_unchecked(shape) - (shape + 1.0) * eps.ln() - scale / eps
    }

    /// Log MH ratio for moving atom `j` from `from` to `to`.
    pub fn atom_log_accept(&self, s: &ChainState, j: usize, from: f64, to: f64) -> f64 {
        self.atom_log_target(s, j, to) - self.atom_log_target(s, j, from)
            + self.atom_proposal_logpdf(s, j, from)
            - self.atom_proposal_logpdf(s, j, to)
    }

    /// Log density of the MH kernel from `from` to `to != from`.
    pub fn atom_transition_log_density(&self, s: &ChainState, j: usize, from: f64, to: f64) -> f64 {
        self.atom_proposal_logpdf(s, j, to) + self.atom_log_accept(s, j, from, to).min(0.0)
    }

    /// MH for occupied atoms, exact prior draws for empty ones.
    pub fn update_atoms<R: Rng + ?Sized>(
        &self,
        s: &mut ChainState,
        rng: &mut R,
        st: &mut SweepStats,
    ) {
        for j in 0..s.v.len() {
            if s.counts[j] == 0 {
                s.eps[j] = self.base.sample(rng);
                continue;
            }
            st.atom_proposals += 1;
            let (shape, scale) = self.atom_proposal_params(s, j);
            let g = Gamma::new(shape, 1.0).expect("positive proposal shape");
            let proposal = scale / g.sample(rng);
            let la = if proposal > 0.0 && proposal.is_finite() {
                self.atom_log_accept(s, j, s.eps[j], proposal)
            } else {
                f64::NAN
            };
            let ln_u = rng.sample::<f64, _>(Open01).ln();
            if !la.is_finite() && la != f64::INFINITY {
                st.atom_nonfinite += 1;
                log::debug!("atom {j}: nonfinite log acceptance ratio, proposal rejected");
                continue;
            }
            if ln_u < la {
                s.eps[j] = proposal;
                st.atom_accepts += 1;
            }
        }
    }

    // ---- sticks ----

    /// Parameters of `V_j | c ~ Beta(n_j + 1, Σ_{l>j} n_l + m)`.
    pub fn stick_conditional(&self, s: &ChainState, j: usize) -> (f64, f64) {
        let after: usize = s.counts[j + 1..].iter().sum();
        (s.counts[j] as f64 + 1.0, after as f64 + self.prior.mass)
    }

    pub fn update_sticks<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) {
        let mut after: usize = 0;
        for j in (0..s.v.len()).rev() {
            let beta = Beta::new(s.counts[j] as f64 + 1.0, after as f64 + self.prior.mass)
                .expect("positive Beta parameters");
            s.v[j] = clamp_stick(beta.sample(rng));
            after += s.counts[j];
        }
        s.refresh_weights();
    }

    // ---- slices ----

    pub fn update_slices<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) {
        for i in 0..s.alloc.len() {
            let p = s.p[s.alloc[i]];
            let r: f64 = rng.sample(Open01);
            s.u[i] = p * r;
        }
    }

    /// Appends prior sticks until the leftover mass is below every slice.
    pub fn extend_sticks<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R) -> Result<usize> {
        let min_u = s.u.iter().copied().fold(f64::INFINITY, f64::min);
        let mut added = 0;
        while s.rest >= min_u {
            if s.v.len() >= MAX_STICKS {
                return Err(Error::InvalidState(format!(
                    "stick count reached the cap of {MAX_STICKS} (leftover mass {}, smallest slice {min_u})",
                    s.rest
                )));
            }
            let (v, e) = self.draw_prior_component(rng);
            s.push_stick(v, e);
            added += 1;
        }
        Ok(added)
    }

    // ---- allocations ----

    /// Normalized log probabilities of `c_i` over `{j : p_j > u_i}`.
    pub fn allocation_log_probs(&self, s: &ChainState, i: usize) -> Vec<(usize, f64)> {
        let x = self.data.values()[i];
        let mut out: Vec<(usize, f64)> = (0..s.v.len())
            .filter(|&j| s.p[j] > s.u[i])
            .map(|j| (j, -s.z * x / s.eps[j] - s.z * s.eps[j].ln()))
            .collect();
        let total = out
            .iter()
            .fold(f64::NEG_INFINITY, |acc, (_, l)| log_add(acc, *l));
        for (_, l) in out.iter_mut() {
            *l -= total;
        }
        out
    }

    pub fn update_allocations<R: Rng + ?Sized>(
        &self,
        s: &mut ChainState,
        rng: &mut R,
    ) -> Result<()> {
        let z = s.z;
        let mut order: Vec<usize> = (0..s.v.len()).collect();
        order.sort_by(|&a, &b| s.p[b].total_cmp(&s.p[a]).then(a.cmp(&b)));
        let coef: Vec<(f64, f64)> = order
            .iter()
            .map(|&j| (-z * s.eps[j].ln(), z / s.eps[j]))
            .collect();
        let mut logw: Vec<f64> = Vec::with_capacity(order.len());
        for i in 0..s.alloc.len() {
            let x = self.data.values()[i];
            let u = s.u[i];
            logw.clear();
            let mut max = f64::NEG_INFINITY;
            for (k, &j) in order.iter().enumerate() {
                if s.p[j] <= u {
                    break;
                }
                let l = coef[k].0 - coef[k].1 * x;
                max = max.max(l);
                logw.push(l);
            }
            if logw.is_empty() {
                return Err(Error::InvalidState(format!(
                    "datum {i} has no component with weight above its slice {u}"
                )));
            }
            let total: f64 = logw.iter().map(|l| (l - max).exp()).sum();
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = logw.len() - 1;
            for (k, l) in logw.iter().enumerate() {
                acc += (l - max).exp();
                if acc > target {
                    pick = k;
                    break;
                }
            }
            let j = order[pick];
            if j != s.alloc[i] {
                s.set_allocation(i, j, &self.data);
            }
        }
        Ok(())
    }

    // ---- z ----

    /// `Σ_i (r_i - ln r_i - 1)` with `r_i = X_i / ε_{c_i}`; equals
    /// `Σ S_j/ε_j - n - Σ ln X_i + Σ n_j ln ε_j` and is never negative.
    pub fn z_rate(&self, s: &ChainState) -> f64 {
        s.alloc
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let r = self.data.values()[i] / s.eps[c];
                r - (self.data.ln_values()[i] - s.eps[c].ln()) - 1.0
            })
            .sum()
    }

    /// Log conditional target of `z` up to a constant.
    pub fn z_log_target(&self, s: &ChainState, z: f64) -> f64 {
        let n = self.data.len() as f64;
        z_prior_unchecked(z, self.prior.zb, self.prior.zc)
            + n * (z * z.ln() - ln_gamma_unchecked(z) - z)
            - z * self.z_rate(s)
    }

    fn z_main_shape(&self) -> f64 {
        0.5 * (self.prior.zb + self.data.len() as f64)
    }

    /// Log density of the mixture proposal for `to` given `from`; `rate` is
    /// [`Sampler::z_rate`], and a nonpositive rate leaves only the random walk.
    pub fn z_proposal_logpdf(&self, rate: f64, from: f64, to: f64) -> f64 {
        let w = self.prior.w_z;
        let bz = self.prior.b_z;
        let rw = gamma_ln_pdf(to, from * bz, bz);
        if !(rate > 0.0) || !rate.is_finite() {
            return rw;
        }
        let main = gamma_ln_pdf(to, self.z_main_shape(), rate);
        if w == 0.0 {
            main
        } else {
            log_add((1.0 - w).ln() + main, w.ln() + rw)
        }
    }

    pub fn z_log_accept(&self, s: &ChainState, from: f64, to: f64) -> f64 {
        let rate = self.z_rate(s);
        self.z_log_target(s, to) - self.z_log_target(s, from)
            + self.z_proposal_logpdf(rate, to, from)
            - self.z_proposal_logpdf(rate, from, to)
    }

    pub fn z_transition_log_density(&self, s: &ChainState, from: f64, to: f64) -> f64 {
        self.z_proposal_logpdf(self.z_rate(s), from, to) + self.z_log_accept(s, from, to).min(0.0)
    }

    pub fn update_z<R: Rng + ?Sized>(&self, s: &mut ChainState, rng: &mut R, st: &mut SweepStats) {
        let rate = self.z_rate(s);
        let main_ok = rate > 0.0 && rate.is_finite();
        if !main_ok {
            st.z_fallback = true;
            log::debug!("z proposal rate {rate} not positive; random-walk component only");
        }
        let from = s.z;
        let use_rw = !main_ok || rng.random::<f64>() < self.prior.w_z;
        let proposal = if use_rw {
            Gamma::new(from * self.prior.b_z, 1.0 / self.prior.b_z)
                .expect("positive random-walk parameters")
                .sample(rng)
        } else {
            Gamma::new(self.z_main_shape(), 1.0 / rate)
                .expect("positive proposal parameters")
                .sample(rng)
        };
        let ln_u = rng.sample::<f64, _>(Open01).ln();
        if !(proposal > 0.0) || !proposal.is_finite() {
            return;
        }
        let la = self.z_log_accept(s, from, proposal);
        if la.is_nan() {
            log::debug!("z: nonfinite log acceptance ratio, proposal rejected");
            return;
        }
        if ln_u < la {
            s.z = proposal;
            st.z_accepted = true;
        }
    }

    /// One sweep in the order atoms, sticks, slices, extension, allocations,
    /// z, then drops sticks after the last occupied one.
    pub fn gibbs_sweep<R: Rng + ?Sized>(
        &self,
        s: &mut ChainState,
        rng: &mut R,
    ) -> Result<SweepStats> {
        let mut st = SweepStats::default();
        self.update_atoms(s, rng, &mut st);
        self.debug_check(s, false);
        self.update_sticks(s, rng);
        self.debug_check(s, false);
        self.update_slices(s, rng);
        self.debug_check(s, true);
        st.sticks_added = self.extend_sticks(s, rng)?;
        self.debug_check(s, true);
        self.update_allocations(s, rng)?;
        self.debug_check(s, true);
        self.update_z(s, rng, &mut st);
        s.truncate_unoccupied_tail();
        self.debug_check(s, false);
        Ok(st)
    }

    #[inline]
    fn debug_check(&self, s: &ChainState, slices: bool) {
        if cfg!(debug_assertions) {
            let r = if slices {
                s.check_slices(&self.data)
            } else {
                s.check(&self.data)
            };
            if let Err(e) = r {
                panic!("chain invariant violated: {e}");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (Sampler, ChainState, ChaCha8Rng) {
        let d = crate::zoo::make_density("exp").unwrap();
        let data = Data::new(crate::zoo::sample_dataset(&d, n, 1)).unwrap();
        let sampler = Sampler::new(
            data,
            PriorConfig::default(),
            BaseMeasure::standard(2.0).unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = sampler.initial_state(&mut rng).unwrap();
        for _ in 0..5 {
            sampler.gibbs_sweep(&mut s, &mut rng).unwrap();
        }
        sampler.update_slices(&mut s, &mut rng);
        sampler.extend_sticks(&mut s, &mut rng).unwrap();
        (sampler, s, rng)
    }

    #[test]
    fn log_joint_finite_on_valid_state() {
        let (sampler, s, _) = setup(50);
        assert!(sampler.log_joint(&s).unwrap().is_finite());
        assert!(sampler.log_joint_marginal(&s).unwrap().is_finite());
    }

    #[test]
    fn zero_stick_only_adds_prior_factor() {
        let (sampler, mut s, _) = setup(50);
        let before = sampler.log_joint(&s).unwrap();
        s.push_stick(0.0, 1.3);
        let after = sampler.log_joint(&s).unwrap();
        let extra = sampler.ln_stick_prior(0.0) + sampler.base.ln_density(1.3f64.ln());
        assert!((after - before - extra).abs() < 1e-10);
    }

    #[test]
    fn slice_indicator() {
        let (sampler, mut s, _) = setup(20);
        let c = s.alloc[0];
        s.u[0] = 0.25 * s.p[c];
        let a = sampler.log_joint(&s).unwrap();
        s.u[0] = 0.75 * s.p[c];
        let b = sampler.log_joint(&s).unwrap();
        assert_eq!(a, b);
        s.u[0] = 1.5 * s.p[c];
        assert_eq!(sampler.log_joint(&s).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn identical_atom_proposal_has_zero_log_ratio() {
        let (sampler, s, _) = setup(30);
        let j = s.alloc[0];
        assert!(sampler.atom_log_accept(&s, j, s.eps[j], s.eps[j]).abs() < 1e-14);
    }

    #[test]
    fn stick_conditional_counts() {
        let data = Data::new(vec![1.0; 5]).unwrap();
        let sampler = Sampler::new(
            data.clone(),
            PriorConfig::default(),
            BaseMeasure::standard(2.0).unwrap(),
        )
        .unwrap();
        let s = ChainState::new(
            1.0,
            vec![0.5, 0.5],
            vec![1.0, 2.0],
            vec![0, 0, 0, 1, 1],
            &data,
        )
        .unwrap();
        assert_eq!(sampler.stick_conditional(&s, 0), (4.0, 3.0));
        assert_eq!(sampler.stick_conditional(&s, 1), (3.0, 1.0));
    }

    #[test]
    fn main_z_proposal_shape() {
        let (sampler, _, _) = setup(10);
        assert_eq!(sampler.z_main_shape(), 5.5);
    }

    #[test]
    fn no_extension_when_residual_below_slices() {
        let data = Data::new(vec![1.0, 2.0]).unwrap();
        let sampler = Sampler::new(
            data.clone(),
            PriorConfig::default(),
            BaseMeasure::standard(2.0).unwrap(),
        )
        .unwrap();
        let mut s = ChainState::new(1.0, vec![0.75], vec![1.0], vec![0, 0], &data).unwrap();
        s.u = vec![0.3, 0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sampler.extend_sticks(&mut s, &mut rng).unwrap(), 0);
        s.u = vec![0.1, 0.4];
        assert!(sampler.extend_sticks(&mut s, &mut rng).unwrap() > 0);
        assert!(s.residual() < 0.1);
    }

    #[test]
    fn single_candidate_allocation_is_deterministic() {
        let data = Data::new(vec![1.0]).unwrap();
        let sampler = Sampler::new(
            data.clone(),
            PriorConfig::default(),
            BaseMeasure::standard(2.0).unwrap(),
        )
        .unwrap();
        let mut s = ChainState::new(3.0, vec![0.6, 0.9], vec![5.0, 1.0], vec![0], &data).unwrap();
        s.u = vec![0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            sampler.update_allocations(&mut s, &mut rng).unwrap();
            assert_eq!(s.alloc[0], 0);
        }
    }

    #[test]
    fn sweep_is_reproducible() {
        let (sampler, _, _) = setup(40);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut s = sampler.initial_state(&mut rng).unwrap();
            for _ in 0..50 {
                sampler.gibbs_sweep(&mut s, &mut rng).unwrap();
            }
            s
        };
        assert_eq!(run(), run());
    }
}
