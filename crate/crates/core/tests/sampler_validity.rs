use gammamix::dpm::{
    chain_rng, run_chain, run_engine, BaseMeasure, ChainState, Data, FitOptions, InitPolicy,
    MixtureDensity, Model, PriorConfig, Sampler,
};
use gammamix::metrics::{l1_distance, DistanceOptions};
use gammamix::special::ln_beta;
use gammamix::{make_density, sample_dataset, Density};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

/// A mid-chain state with fresh slices and extended sticks.
fn warm(n: usize, seed: u64) -> (Sampler, ChainState) {
    let x = sample_dataset(&make_density("exp").unwrap(), n, seed);
    let sampler = Sampler::for_model(&Data::new(x).unwrap(), PriorConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let mut s = sampler.initial_state(&mut rng).unwrap();
    for _ in 0..30 {
        sampler.gibbs_sweep(&mut s, &mut rng).unwrap();
    }
    sampler.update_slices(&mut s, &mut rng);
    sampler.extend_sticks(&mut s, &mut rng).unwrap();
    (sampler, s)
}

fn ln_beta_pdf(v: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * v.ln() + (b - 1.0) * (1.0 - v).ln() - ln_beta(a, b).unwrap()
}

#[test]
fn allocation_ratios_match_log_joint() {
    let (sampler, s) = warm(50, 1);
    let mut checked = 0;
    for i in 0..s.allocations().len() {
        let probs = sampler.allocation_log_probs(&s, i);
        let (j0, l0) = probs[0];
        let mut s0 = s.clone();
        s0.set_allocation(i, j0, sampler.data());
        let base = sampler.log_joint(&s0).unwrap();
        for &(j, l) in &probs[1..] {
            let mut t = s.clone();
            t.set_allocation(i, j, sampler.data());
            let d = sampler.log_joint(&t).unwrap() - base;
            assert!(
                (d - (l - l0)).abs() < TOL,
                "datum {i} {j0}->{j}: {d} vs {}",
                l - l0
            );
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn stick_ratios_match_marginal_joint() {
    let (sampler, s) = warm(50, 2);
    for j in 0..s.num_sticks() {
        let (a, b) = sampler.stick_conditional(&s, j);
        let v0 = s.sticks()[j];
        for v1 in [0.05, 0.3, 0.6, 0.95] {
            let mut t = s.clone();
            t.set_stick(j, v1);
            let d =
                sampler.log_joint_marginal(&t).unwrap() - sampler.log_joint_marginal(&s).unwrap();
            let want = ln_beta_pdf(v1, a, b) - ln_beta_pdf(v0, a, b);
            assert!((d - want).abs() < TOL, "stick {j}: {d} vs {want}");
        }
    }
}

#[test]
fn slice_ratio_is_flat_inside_support() {
    let (sampler, s) = warm(30, 3);
    let c = s.allocations()[4];
    let p = s.weights()[c];
    let mut t = s.clone();
    t.set_slice(4, 0.1 * p);
    let mut r = s.clone();
    r.set_slice(4, 0.9 * p);
    assert_eq!(
        sampler.log_joint(&t).unwrap(),
        sampler.log_joint(&r).unwrap()
    );
}

#[test]
fn atom_ratios_match_log_joint() {
    let (sampler, s) = warm(50, 4);
    for j in 0..s.num_sticks() {
        let e0 = s.atoms()[j];
        for e1 in [0.2, 0.9, 1.7, 6.0] {
            let mut t = s.clone();
            t.set_atom(j, e1);
            let d = sampler.log_joint(&t).unwrap() - sampler.log_joint(&s).unwrap();
            let want = sampler.atom_log_target(&s, j, e1) - sampler.atom_log_target(&s, j, e0);
            assert!((d - want).abs() < TOL, "atom {j}: {d} vs {want}");
        }
    }
}

#[test]
fn z_ratio_matches_log_joint() {
    let (sampler, s) = warm(50, 5);
    let z0 = s.z();
    for z1 in [0.3, 0.8, 1.6, 4.0, 25.0] {
        let mut t = s.clone();
        t.set_z(z1);
        let d = sampler.log_joint(&t).unwrap() - sampler.log_joint(&s).unwrap();
        let want = sampler.z_log_target(&s, z1) - sampler.z_log_target(&s, z0);
        assert!((d - want).abs() < TOL, "z {z0}->{z1}: {d} vs {want}");
    }
}

#[test]
fn atom_step_detailed_balance() {
    let (sampler, s) = warm(50, 6);
    let j = s.allocations()[0];
    for (a, b) in [(0.8, 1.1), (1.0, 2.5), (0.3, 0.31)] {
        let lhs =
            sampler.atom_log_target(&s, j, a) + sampler.atom_transition_log_density(&s, j, a, b);
        let rhs =
            sampler.atom_log_target(&s, j, b) + sampler.atom_transition_log_density(&s, j, b, a);
        assert!((lhs - rhs).abs() < TOL, "{a}<->{b}: {lhs} vs {rhs}");
    }
}

#[test]
fn z_step_detailed_balance() {
    let (sampler, s) = warm(50, 7);
    for (a, b) in [(0.9, 1.2), (1.0, 3.0), (5.0, 0.5)] {
        let lhs = sampler.z_log_target(&s, a) + sampler.z_transition_log_density(&s, a, b);
        let rhs = sampler.z_log_target(&s, b) + sampler.z_transition_log_density(&s, b, a);
        assert!((lhs - rhs).abs() < TOL, "{a}<->{b}: {lhs} vs {rhs}");
    }
}

#[test]
fn pure_main_z_proposal_when_walk_weight_zero() {
    let x = sample_dataset(&make_density("exp").unwrap(), 40, 8);
    let prior = PriorConfig {
        w_z: 0.0,
        ..Default::default()
    };
    let sampler = Sampler::for_model(&Data::new(x).unwrap(), prior).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = sampler.initial_state(&mut rng).unwrap();
    let rate = sampler.z_rate(&s);
    let (shape, z) = (20.5f64, 1.3f64);
    let want = shape * rate.ln() - gammamix::special::ln_gamma(shape).unwrap()
        + (shape - 1.0) * z.ln()
        - rate * z;
    let got = sampler.z_proposal_logpdf(rate, 7.0, z);
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn invariants_hold_over_many_sweeps() {
    let (sampler, mut s) = warm(100, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        sampler.gibbs_sweep(&mut s, &mut rng).unwrap();
        s.check(sampler.data()).unwrap();
        assert_eq!(s.allocations().len(), 100);
        assert!(s.weights().iter().sum::<f64>() <= 1.0 + 1e-12);
    }
}

#[test]
fn inverse_model_is_transformed_gamma_fit() {
    let x = sample_dataset(&make_density("folded-cauchy").unwrap(), 200, 11);
    let opts = FitOptions {
        iters: 400,
        burnin: 200,
        thin: 20,
        seed: 12,
        init: InitPolicy::SingleCluster,
    };
    let inv = PriorConfig {
        model: Model::InverseGamma,
        ..Default::default()
    };
    let fit = run_chain(&x, &inv, &opts).unwrap();

    let recip = Data::new(x.iter().map(|v| 1.0 / v).collect()).unwrap();
    let sampler = Sampler::new(
        recip,
        PriorConfig::default(),
        BaseMeasure::mirrored(2.0).unwrap(),
    )
    .unwrap();
    let q = run_engine(&sampler, &opts, &mut chain_rng(12, 0), Model::Gamma).unwrap();
    assert_eq!(fit.draws.len(), q.draws.len());
    for (f, g) in fit.draws.iter().zip(&q.draws) {
        for t in [0.01, 0.3, 1.0, 2.0, 40.0, 1e3] {
            let a = f.pdf(t);
            let b = g.pdf(1.0 / t) / (t * t);
            assert!(
                (a - b).abs() <= 1e-10 * a.abs().max(1e-300),
                "x={t}: {a} vs {b}"
            );
        }
    }
}

/// L1 of the posterior-mean density over the second half of `iters` sweeps.
/// The truth is bimodal: for Exp(1) the one-cluster start is already the
/// exponential MLE and leaves nothing to improve.
fn posterior_mean_l1(iters: usize, seed: u64) -> f64 {
    let f = make_density("gamma-mix:0.5:1:3:2:10").unwrap();
    let x = sample_dataset(&f, 200, seed);
    let opts = FitOptions {
        iters,
        burnin: iters / 2,
        thin: (iters / 100).max(1),
        seed,
        init: InitPolicy::SingleCluster,
    };
    let out = run_chain(&x, &PriorConfig::default(), &opts).unwrap();
    let mean = MixtureDensity::new(&out.draws).unwrap();
    l1_distance(&mean, &f, &DistanceOptions::default()).value
}

#[test]
fn sweeps_move_toward_truth() {
    let mut early: Vec<f64> = (1..=5).map(|s| posterior_mean_l1(10, s)).collect();
    let mut late: Vec<f64> = (1..=5).map(|s| posterior_mean_l1(2000, s)).collect();
    early.sort_by(f64::total_cmp);
    late.sort_by(f64::total_cmp);
    assert!(late[2] < early[2], "{late:?} vs {early:?}");
}

#[test]
fn posterior_is_mostly_one_cluster_for_small_mass() {
    let f = make_density("gamma:0.4:1").unwrap();
    let x = sample_dataset(&f, 1000, 21);
    let prior = PriorConfig {
        mass: 0.1,
        ..Default::default()
    };
    let opts = FitOptions {
        iters: 4000,
        burnin: 2000,
        thin: 10,
        seed: 22,
        init: InitPolicy::SingleCluster,
    };
    let out = run_chain(&x, &prior, &opts).unwrap();
    assert!(out.diagnostics.modal_occupied().unwrap() <= 2);
}
