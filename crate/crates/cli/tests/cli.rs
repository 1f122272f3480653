use std::path::Path;
use std::process::{Command, Output};

use gammamix_cli::io::{parse_grid_csv, parse_x_csv};

fn gm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gammamix"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GAMMAMIX_OUTDIR")
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn simulate_is_reproducible_and_positive() {
    let t = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        ok(&gm(
            &[
                "simulate",
                "--density",
                "gamma:0.4:1",
                "--n",
                "300",
                "--seed",
                "5",
                "--out",
                name,
            ],
            t.path(),
        ));
    }
    let a = read(&t.path().join("a.csv"));
    assert_eq!(a, read(&t.path().join("b.csv")));
    let x = parse_x_csv(&a).unwrap();
    assert_eq!(x.len(), 300);
    assert!(x.iter().all(|v| *v > 0.0));

    ok(&gm(
        &[
            "simulate",
            "--density",
            "gamma-mix:0.5:1:3:2:10",
            "--n",
            "50",
            "--seed",
            "6",
            "--out",
            "c.csv",
        ],
        t.path(),
    ));
    assert_ne!(read(&t.path().join("c.csv")), a);
}

#[test]
fn user_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let o = gm(&["simulate", "--density", "bogus:1", "--n", "5"], t.path());
    assert_eq!(o.status.code(), Some(2));
    let o = gm(
        &["approx-study", "--density", "exp", "--z-list", "50,100,200"],
        t.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(t.path().join("bad.csv"), "x\n1.0\n0\n").unwrap();
    let o = gm(
        &[
            "fit", "--input", "bad.csv", "--iters", "20", "--burnin", "10",
        ],
        t.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("data row 2"));
    let o = gm(&["fit", "--input", "missing.csv"], t.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_outdir_exits_3() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("file"), "").unwrap();
    let o = gm(
        &[
            "simulate",
            "--density",
            "exp",
            "--n",
            "5",
            "--outdir",
            "file/sub",
        ],
        t.path(),
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn approx_study_writes_decreasing_errors() {
    let t = tempfile::tempdir().unwrap();
    ok(&gm(
        &[
            "approx-study",
            "--density",
            "exp",
            "--z-list",
            "50,100,200,400",
            "--out",
            "r.csv",
        ],
        t.path(),
    ));
    let r = gammamix::approx::ApproxReport::from_csv(&read(&t.path().join("r.csv")), 2.0).unwrap();
    assert_eq!(r.z_values, vec![50.0, 100.0, 200.0, 400.0]);
    assert!(r.hellinger_errors.windows(2).all(|w| w[1] < w[0]));
    assert!(r.fitted_slope < -0.75);
}

#[test]
fn fit_outputs_and_rerun() {
    let t = tempfile::tempdir().unwrap();
    ok(&gm(
        &[
            "simulate",
            "--density",
            "exp",
            "--n",
            "200",
            "--seed",
            "3",
            "--out",
            "s.csv",
        ],
        t.path(),
    ));
    ok(&gm(
        &[
            "fit",
            "--input",
            "s.csv",
            "--iters",
            "600",
            "--burnin",
            "300",
            "--thin",
            "3",
            "--grid",
            "0.001:30:3000",
            "--outdir",
            "fit",
        ],
        t.path(),
    ));
    let dir = t.path().join("fit");
    let g = parse_grid_csv(&read(&dir.join("grid.csv"))).unwrap();
    assert_eq!(g.x.len(), 3000);
    let mass: f64 =
        g.x.windows(2)
            .zip(g.mean.windows(2))
            .map(|(x, m)| 0.5 * (x[1] - x[0]) * (m[0] + m[1]))
            .sum();
    assert!((mass - 1.0).abs() < 5e-3, "grid mass {mass}");

    let draws = read(&dir.join("draws.jsonl"));
    assert_eq!(draws.lines().count(), 100);
    let first: serde_json::Value = serde_json::from_str(draws.lines().next().unwrap()).unwrap();
    let mut keys: Vec<&String> = first.as_object().unwrap().keys().collect();
    keys.sort();
    assert_eq!(keys, ["components", "residual_weight", "z"]);
    let summary: serde_json::Value =
        serde_json::from_str(&read(&dir.join("summary.json"))).unwrap();
    assert_eq!(summary["model"], "gamma");
    assert_eq!(summary["draws"], 100);

    let o = gm(
        &[
            "rerun",
            "--manifest",
            "fit/manifest.json",
            "--outdir",
            "again",
        ],
        t.path(),
    );
    ok(&o);
    assert!(!String::from_utf8_lossy(&o.stdout).contains("DIFFERENT"));
    for f in ["draws.jsonl", "grid.csv", "summary.json"] {
        assert_eq!(
            read(&dir.join(f)),
            read(&t.path().join("again").join(f)),
            "{f}"
        );
    }

    // a changed input is refused
    std::fs::write(t.path().join("s.csv"), "x\n1\n").unwrap();
    let o = gm(
        &[
            "rerun",
            "--manifest",
            "fit/manifest.json",
            "--outdir",
            "third",
        ],
        t.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(
        t.path().join("run.conf"),
        "# sim\ndensity=exp\nn=40\nseed=2\n",
    )
    .unwrap();
    ok(&gm(
        &["--config", "run.conf", "simulate", "--out", "cfg.csv"],
        t.path(),
    ));
    ok(&gm(
        &[
            "simulate",
            "--density",
            "exp",
            "--n",
            "40",
            "--seed",
            "2",
            "--out",
            "flags.csv",
        ],
        t.path(),
    ));
    assert_eq!(
        read(&t.path().join("cfg.csv")),
        read(&t.path().join("flags.csv"))
    );

    ok(&gm(
        &[
            "--config", "run.conf", "simulate", "--n", "7", "--out", "over.csv",
        ],
        t.path(),
    ));
    assert_eq!(
        parse_x_csv(&read(&t.path().join("over.csv")))
            .unwrap()
            .len(),
        7
    );
}

#[test]
fn outdir_comes_from_environment() {
    let t = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gammamix"))
        .args(["simulate", "--density", "exp", "--n", "5"])
        .current_dir(t.path())
        .env("GAMMAMIX_OUTDIR", "envdir")
        .output()
        .unwrap();
    ok(&o);
    assert!(t.path().join("envdir/sample.csv").exists());

    ok(&gm(&["simulate", "--density", "exp", "--n", "5"], t.path()));
    assert!(t.path().join("gammamix-out/sample.csv").exists());
}

#[test]
fn small_l1_table() {
    let t = tempfile::tempdir().unwrap();
    ok(&gm(
        &[
            "l1-quantiles",
            "--density",
            "exp",
            "--n",
            "100",
            "--iters",
            "400",
            "--burnin",
            "200",
            "--thin",
            "4",
            "--seeds",
            "1,2",
            "--out",
            "t.csv",
        ],
        t.path(),
    ));
    let rows = gammamix_cli::io::parse_quantile_csv(&read(&t.path().join("t.csv"))).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(
            r.median > 0.0 && r.median < 0.6 && r.q95 >= r.median,
            "{r:?}"
        );
    }
}
