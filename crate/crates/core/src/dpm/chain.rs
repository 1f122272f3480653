use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::draw::PosteriorDraw;
use super::prior::{Model, PriorConfig};
use super::sampler::Sampler;
use super::state::{ChainState, Data};
use crate::error::{Error, Result};

/// Draws are extended with prior sticks until the untracked mass is below this.
pub const DRAW_RESIDUAL: f64 = 1e-8;

/// Starting state of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// All data in one cluster at the sample mean, `z = 1`.
    #[default]
    SingleCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: InitPolicy,
}

impl Default for FitOptions {
    /// Desk-scale run: 20000 sweeps, 10000 burn-in, every 10th kept.
    fn default() -> Self {
        Self {
            iters: 20_000,
            burnin: 10_000,
            thin: 10,
            seed: 1,
            init: InitPolicy::SingleCluster,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 || self.thin == 0 {
            return Err(Error::Config("iters and thin must be positive".into()));
        }
        if self.burnin >= self.iters {
            return Err(Error::Config(format!(
                "burnin {} must be below iters {}",
                self.burnin, self.iters
            )));
        }
        Ok(())
    }

    /// Number of retained draws, `(iters - burnin) / thin`.
    pub fn num_draws(&self) -> usize {
        (self.iters - self.burnin) / self.thin
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub atom_proposals: usize,
    pub atom_accepts: usize,
    pub atom_nonfinite: usize,
    pub z_accepts: usize,
    pub z_fallbacks: usize,
    pub sweeps: usize,
    pub max_sticks: usize,
    pub occupied_trace: Vec<usize>,
    pub z_trace: Vec<f64>,
}

impl Diagnostics {
    pub fn atom_acceptance(&self) -> f64 {
        if self.atom_proposals == 0 {
            0.0
        } else {
            self.atom_accepts as f64 / self.atom_proposals as f64
        }
    }

    pub fn z_acceptance(&self) -> f64 {
        if self.sweeps == 0 {
            0.0
        } else {
            self.z_accepts as f64 / self.sweeps as f64
        }
    }

    /// `(k, number of sweeps with k occupied clusters)`, ascending in `k`.
    pub fn occupied_histogram(&self) -> Vec<(usize, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for &k in &self.occupied_trace {
            *h.entry(k).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }

    pub fn modal_occupied(&self) -> Option<usize> {
        self.occupied_histogram()
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<PosteriorDraw>,
    pub diagnostics: Diagnostics,
}

/// RNG for chain `k` under master seed `seed`: stream `k + 1` of the ChaCha
/// generator seeded with `seed`. Stream 0 is left for dataset simulation.
pub fn chain_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k + 1);
    rng
}

/// Snapshot of the current mixing measure, extended from the prior until the
/// untracked mass is below [`DRAW_RESIDUAL`].
fn snapshot(
    sampler: &Sampler,
    s: &ChainState,
    rng: &mut ChaCha8Rng,
    model: Model,
) -> Result<PosteriorDraw> {
    let mut components: Vec<(f64, f64)> = s
        .weights()
        .iter()
        .copied()
        .zip(s.atoms().iter().copied())
        .collect();
    let mut rest = s.residual();
    while rest >= DRAW_RESIDUAL {
        if components.len() >= super::sampler::MAX_STICKS {
            return Err(Error::InvalidState(format!(
                "draw truncation needs more than {} sticks",
                super::sampler::MAX_STICKS
            )));
        }
        let (v, e) = sampler.draw_prior_component(rng);
        components.push((v * rest, e));
        rest *= 1.0 - v;
    }
    if model == Model::InverseGamma {
        for c in components.iter_mut() {
            c.1 = 1.0 / c.1;
        }
    }
    PosteriorDraw::new(s.z(), components, rest, model)
}

/// Runs a prepared sampler with the given generator. The Gamma engine works
/// on `sampler.data()`; `model` only decides how atoms are reported.
pub fn run_engine(
    sampler: &Sampler,
    opts: &FitOptions,
    rng: &mut ChaCha8Rng,
    model: Model,
) -> Result<ChainOutput> {
    opts.validate()?;
    let mut state = match opts.init {
        InitPolicy::SingleCluster => sampler.initial_state(rng)?,
    };
    let mut diag = Diagnostics {
        occupied_trace: Vec::with_capacity(opts.iters),
        z_trace: Vec::with_capacity(opts.iters),
        ..Default::default()
    };
    let mut draws = Vec::with_capacity(opts.num_draws());
    for t in 1..=opts.iters {
        let st = sampler.gibbs_sweep(&mut state, rng)?;
        diag.sweeps += 1;
        diag.atom_proposals += st.atom_proposals;
        diag.atom_accepts += st.atom_accepts;
        diag.atom_nonfinite += st.atom_nonfinite;
        diag.z_accepts += st.z_accepted as usize;
        diag.z_fallbacks += st.z_fallback as usize;
        diag.max_sticks = diag.max_sticks.max(state.num_sticks() + st.sticks_added);
        diag.occupied_trace.push(state.occupied());
        diag.z_trace.push(state.z());
        if t > opts.burnin && (t - opts.burnin) % opts.thin == 0 {
            draws.push(snapshot(sampler, &state, rng, model)?);
        }
    }
    Ok(ChainOutput {
        draws,
        diagnostics: diag,
    })
}

/// Fits the model to `data` on chain stream 0 of `opts.seed`. The
/// inverse-Gamma model runs the Gamma engine on reciprocals with the
/// mirrored base measure.
pub fn run_chain(data: &[f64], prior: &PriorConfig, opts: &FitOptions) -> Result<ChainOutput> {
    run_chain_stream(data, prior, opts, 0)
}

pub fn run_chain_stream(
    data: &[f64],
    prior: &PriorConfig,
    opts: &FitOptions,
    k: u64,
) -> Result<ChainOutput> {
    let data = Data::new(data.to_vec())?;
    let sampler = Sampler::for_model(&data, *prior)?;
    let mut rng = chain_rng(opts.seed, k);
    run_engine(&sampler, opts, &mut rng, prior.model)
}

/// `chains` independent chains in parallel, chain `k` on stream `k`.
pub fn run_chains(
    data: &[f64],
    prior: &PriorConfig,
    opts: &FitOptions,
    chains: usize,
) -> Result<Vec<ChainOutput>> {
    (0..chains as u64)
        .into_par_iter()
        .map(|k| run_chain_stream(data, prior, opts, k))
        .collect()
}
