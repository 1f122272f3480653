//! File formats: one-column `x` CSV, draws JSONL, grid and table CSVs.
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! file reads back bit for bit.

use std::path::Path;

use gammamix::dpm::{GridSummary, Model, PosteriorDraw};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn csv_err(what: &str, e: csv::Error) -> CliError {
    CliError::User(format!("{what}: {e}"))
}

/// Parses a CSV with an `x` column. Values must be positive and finite;
/// the error names the 1-based data row.
pub fn parse_x_csv(text: &str) -> CliResult<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| csv_err("input header", e))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h == "x")
        .ok_or_else(|| CliError::User("input CSV has no `x` column".into()))?;
    let mut out = vec![];
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(&format!("data row {}", k + 1), e))?;
        let field = rec.get(col).unwrap_or("");
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::User(format!("data row {}: cannot parse `{field}`", k + 1)))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(CliError::User(format!(
                "data row {}: {v} is not a positive finite number",
                k + 1
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::User("input CSV has no data rows".into()));
    }
    Ok(out)
}

pub fn read_x_csv(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    parse_x_csv(&text)
}

pub fn x_csv(values: &[f64]) -> String {
    let mut s = String::from("x\n");
    for v in values {
        s.push_str(&format!("{v}\n"));
    }
    s
}

pub fn grid_csv(g: &GridSummary) -> String {
    let mut s = String::from("x,mean,q05,q50,q95\n");
    for i in 0..g.x.len() {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            g.x[i], g.mean[i], g.q05[i], g.q50[i], g.q95[i]
        ));
    }
    s
}

pub fn parse_grid_csv(text: &str) -> CliResult<GridSummary> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut g = GridSummary {
        x: vec![],
        mean: vec![],
        q05: vec![],
        q50: vec![],
        q95: vec![],
    };
    for rec in rdr.deserialize::<(f64, f64, f64, f64, f64)>() {
        let (x, m, a, b, c) = rec.map_err(|e| csv_err("grid row", e))?;
        g.x.push(x);
        g.mean.push(m);
        g.q05.push(a);
        g.q50.push(b);
        g.q95.push(c);
    }
    Ok(g)
}

pub fn draws_jsonl(draws: &[PosteriorDraw]) -> String {
    let mut s = String::new();
    for d in draws {
        s.push_str(&serde_json::to_string(d).expect("draws serialize"));
        s.push('\n');
    }
    s
}

/// Reads draws back; the kernel family is not stored per line.
pub fn parse_draws_jsonl(text: &str, model: Model) -> CliResult<Vec<PosteriorDraw>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| {
            serde_json::from_str::<PosteriorDraw>(l)
                .map(|d| d.with_model(model))
                .map_err(|e| CliError::User(format!("draws line {}: {e}", k + 1)))
        })
        .collect()
}

/// One row of the posterior L1 table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub density: String,
    pub model: Model,
    pub mass: f64,
    pub n: usize,
    pub seed: u64,
    pub median: f64,
    pub q95: f64,
}

pub fn quantile_csv(rows: &[QuantileRow]) -> String {
    let mut s = String::from("density,model,mass,n,seed,median,q95\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.density, r.model, r.mass, r.n, r.seed, r.median, r.q95
        ));
    }
    s
}

pub fn parse_quantile_csv(text: &str) -> CliResult<Vec<QuantileRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .map(|r| r.map_err(|e| csv_err("quantile row", e)))
        .collect()
}
