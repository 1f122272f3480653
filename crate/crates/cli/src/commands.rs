use std::path::{Path, PathBuf};

use gammamix::approx::rate_study;
use gammamix::dpm::{density_grid, run_chain, Diagnostics, PosteriorDraw};
use gammamix::metrics::{l1_distance, weighted_quantiles, DistanceOptions};
use gammamix::{make_density, sample_dataset};
use rayon::prelude::*;
use serde_json::json;

use crate::args::{ApproxArgs, Command, FitArgs, L1Args, RerunArgs, SimulateArgs};
use crate::error::{CliError, CliResult};
use crate::io::{draws_jsonl, grid_csv, quantile_csv, read_x_csv, x_csv, QuantileRow};
use crate::manifest::{read_manifest, run_digest, unix_now, FileDigest, RunManifest};

/// Points in the default fit grid.
pub const DEFAULT_GRID_POINTS: usize = 400;

struct Artifact {
    name: String,
    bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: &str, text: String) -> Self {
        Self {
            name: name.to_string(),
            bytes: text.into_bytes(),
        }
    }
}

/// Where a command writes: a directory, and the manifest's file name in it.
struct Target {
    dir: PathBuf,
    manifest: String,
}

fn single_file(out: &Option<PathBuf>, outdir: &Path, default: &str) -> (Target, String) {
    let path = out.clone().unwrap_or_else(|| outdir.join(default));
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| default.to_string());
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    (
        Target {
            dir,
            manifest: format!("{name}.manifest.json"),
        },
        name,
    )
}

/// Runs `cmd`, writes its outputs and manifest, and returns the manifest.
pub fn execute(cmd: &Command) -> CliResult<RunManifest> {
    if let Command::Rerun(r) = cmd {
        return rerun(r);
    }
    let started = unix_now();
    let clock = std::time::Instant::now();
    let inputs = match cmd {
        Command::Fit(a) => vec![FileDigest::of_file(&a.input)?],
        _ => vec![],
    };
    let digest = run_digest(cmd, &inputs);
    let (target, artifacts, seeds) = match cmd {
        Command::Simulate(a) => simulate(a)?,
        Command::Fit(a) => fit(a, &digest)?,
        Command::L1Quantiles(a) => l1_quantiles(a)?,
        Command::ApproxStudy(a) => approx_study(a)?,
        Command::Rerun(_) => unreachable!(),
    };
    std::fs::create_dir_all(&target.dir).map_err(|e| CliError::write(&target.dir, e))?;
    let mut outputs = vec![];
    for a in &artifacts {
        let path = target.dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(|e| CliError::write(&path, e))?;
        outputs.push(FileDigest::of_bytes(a.name.clone(), &a.bytes));
    }
    let manifest = RunManifest {
        tool: "gammamix".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        config: cmd.clone(),
        seeds,
        run_digest: digest,
        started_unix: started,
        finished_unix: unix_now(),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        inputs,
        outputs,
    };
    let path = target.dir.join(&target.manifest);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::write(&path, e))?;
    log::info!("manifest written to {}", path.display());
    Ok(manifest)
}

type Planned = (Target, Vec<Artifact>, Vec<u64>);

fn simulate(a: &SimulateArgs) -> CliResult<Planned> {
    let f = make_density(&a.density)?;
    let x = sample_dataset(&f, a.n, a.seed);
    let (target, name) = single_file(&a.out, &a.dir.outdir, "sample.csv");
    Ok((target, vec![Artifact::new(&name, x_csv(&x))], vec![a.seed]))
}

/// `MIN:MAX:N` evenly spaced, or 400 log-spaced points on
/// `[min(x)/10, 3 max(x)]`.
pub fn resolve_grid(spec: Option<&str>, data: &[f64]) -> CliResult<Vec<f64>> {
    let Some(spec) = spec else {
        let lo = data.iter().copied().fold(f64::INFINITY, f64::min) / 10.0;
        let hi = data.iter().copied().fold(0.0, f64::max) * 3.0;
        let n = DEFAULT_GRID_POINTS;
        let r = (hi / lo).ln();
        return Ok((0..n)
            .map(|i| lo * (r * i as f64 / (n - 1) as f64).exp())
            .collect());
    };
    let bad = || {
        CliError::User(format!(
            "grid `{spec}`: expected MIN:MAX:N with 0 < MIN < MAX, N >= 2"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite() && n >= 2) {
        return Err(bad());
    }
    let h = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { hi } else { lo + h * i as f64 })
        .collect())
}

fn summary(
    a: &FitArgs,
    n: usize,
    draws: &[PosteriorDraw],
    d: &Diagnostics,
    digest: &str,
) -> String {
    let zs: Vec<f64> = draws.iter().map(|d| d.z).collect();
    let zq = weighted_quantiles(&zs, &[0.05, 0.5, 0.95]).unwrap_or_default();
    let v = json!({
        "model": a.prior.model,
        "n": n,
        "draws": draws.len(),
        "iters": a.chain.iters,
        "burnin": a.chain.burnin,
        "thin": a.chain.thin,
        "seed": a.seed,
        "atom_acceptance": d.atom_acceptance(),
        "z_acceptance": d.z_acceptance(),
        "z_random_walk_fallbacks": d.z_fallbacks,
        "atom_nonfinite_rejections": d.atom_nonfinite,
        "max_sticks": d.max_sticks,
        "occupied_histogram": d.occupied_histogram(),
        "modal_occupied": d.modal_occupied(),
        "z_posterior_quantiles": zq,
        "run_digest": digest,
    });
    serde_json::to_string_pretty(&v).expect("summary serializes") + "\n"
}

fn fit(a: &FitArgs, digest: &str) -> CliResult<Planned> {
    let x = read_x_csv(&a.input)?;
    let grid = resolve_grid(a.grid.as_deref(), &x)?;
    let out = run_chain(&x, &a.prior.prior(), &a.chain.options(a.seed))?;
    let g = density_grid(&out.draws, &grid)?;
    let target = Target {
        dir: a.dir.outdir.clone(),
        manifest: "manifest.json".into(),
    };
    let artifacts = vec![
        Artifact::new("draws.jsonl", draws_jsonl(&out.draws)),
        Artifact::new("grid.csv", grid_csv(&g)),
        Artifact::new(
            "summary.json",
            summary(a, x.len(), &out.draws, &out.diagnostics, digest),
        ),
    ];
    Ok((target, artifacts, vec![a.seed]))
}

/// One row per seed: simulate `n` points from the named density with that
/// seed, fit, and summarize the L1 distance of every retained draw to the
/// truth. Seeds run concurrently.
pub fn l1_quantile_rows(a: &L1Args) -> CliResult<Vec<QuantileRow>> {
    let f = make_density(&a.density)?;
    let prior = a.prior.prior();
    prior.validate()?;
    a.chain.options(0).validate()?;
    if a.seeds.is_empty() {
        return Err(CliError::User("no seeds given".into()));
    }
    let opts = DistanceOptions::default();
    a.seeds
        .par_iter()
        .map(|&seed| {
            let x = sample_dataset(&f, a.n, seed);
            let out = run_chain(&x, &prior, &a.chain.options(seed))?;
            let l1: Vec<f64> = out
                .draws
                .par_iter()
                .map(|d| l1_distance(d, &f, &opts).value)
                .collect();
            let q = weighted_quantiles(&l1, &[0.5, 0.95])?;
            Ok(QuantileRow {
                density: a.density.clone(),
                model: prior.model,
                mass: prior.mass,
                n: a.n,
                seed,
                median: q[0],
                q95: q[1],
            })
        })
        .collect()
}

fn l1_quantiles(a: &L1Args) -> CliResult<Planned> {
    let rows = l1_quantile_rows(a)?;
    println!(
        "{:<16} {:>8} {:>6} {:>6} {:>6} {:>10} {:>10}",
        "density", "model", "m", "n", "seed", "50%", "95%"
    );
    for r in &rows {
        println!(
            "{:<16} {:>8} {:>6} {:>6} {:>6} {:>10.4} {:>10.4}",
            r.density,
            r.model.to_string(),
            r.mass,
            r.n,
            r.seed,
            r.median,
            r.q95
        );
    }
    let (target, name) = single_file(&a.out, &a.dir.outdir, "l1_quantiles.csv");
    Ok((
        target,
        vec![Artifact::new(&name, quantile_csv(&rows))],
        a.seeds.clone(),
    ))
}

fn approx_study(a: &ApproxArgs) -> CliResult<Planned> {
    let f = make_density(&a.density)?;
    let report = rate_study(&f, a.beta, &a.z_list)?;
    let text = report.to_csv();
    print!("{text}");
    let (target, name) = single_file(&a.out, &a.dir.outdir, "approx_study.csv");
    Ok((target, vec![Artifact::new(&name, text)], vec![]))
}

/// Repeats the run recorded in a manifest into a fresh directory and checks
/// every output digest.
pub fn rerun(r: &RerunArgs) -> CliResult<RunManifest> {
    let old = read_manifest(&r.manifest)?;
    for input in &old.inputs {
        let now = FileDigest::of_file(Path::new(&input.path))?;
        if now.sha256 != input.sha256 {
            return Err(CliError::User(format!(
                "input {} changed since the original run",
                input.path
            )));
        }
    }
    let primary = old
        .outputs
        .first()
        .map(|o| o.path.clone())
        .ok_or_else(|| CliError::User("manifest lists no outputs".into()))?;
    let mut cmd = old.config.clone();
    match &mut cmd {
        Command::Simulate(a) => a.out = Some(r.outdir.join(&primary)),
        Command::Fit(a) => a.dir.outdir = r.outdir.clone(),
        Command::L1Quantiles(a) => a.out = Some(r.outdir.join(&primary)),
        Command::ApproxStudy(a) => a.out = Some(r.outdir.join(&primary)),
        Command::Rerun(_) => return Err(CliError::User("cannot rerun a rerun".into())),
    }
    let new = execute(&cmd)?;
    let mut diffs = vec![];
    for o in &old.outputs {
        match new.outputs.iter().find(|n| n.path == o.path) {
            Some(n) if n.sha256 == o.sha256 => println!("identical  {}", o.path),
            _ => {
                println!("DIFFERENT  {}", o.path);
                diffs.push(o.path.clone());
            }
        }
    }
    if diffs.is_empty() {
        Ok(new)
    } else {
        Err(CliError::Mismatch(format!(
            "outputs differ: {}",
            diffs.join(", ")
        )))
    }
}
