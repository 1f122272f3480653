//! `key=value` config files. Every key is a long flag name; entries are
//! spliced into the argument list ahead of the user's own flags, so flags
//! given on the command line win.

use std::path::Path;

use crate::error::{CliError, CliResult};

/// Parses `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = vec![];
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::User(format!(
                "config line {}: expected key=value, got `{line}`",
                k + 1
            ))
        })?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            return Err(CliError::User(format!(
                "config line {}: bad key `{key}`",
                k + 1
            )));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> CliResult<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    parse_config(&text)
}

fn config_path(args: &[String]) -> CliResult<Option<(usize, usize, String)>> {
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            let v = args
                .get(i + 1)
                .ok_or_else(|| CliError::User("--config needs a path".into()))?;
            return Ok(Some((i, 2, v.clone())));
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Ok(Some((i, 1, v.to_string())));
        }
    }
    Ok(None)
}

/// Removes `--config PATH` from `args` and splices the file's entries in
/// right after the subcommand name.
pub fn expand_config(mut args: Vec<String>, subcommands: &[&str]) -> CliResult<Vec<String>> {
    let Some((at, len, path)) = config_path(&args)? else {
        return Ok(args);
    };
    args.drain(at..at + len);
    let entries = read_config(Path::new(&path))?;
    let Some(sub) = args
        .iter()
        .skip(1)
        .position(|a| subcommands.contains(&a.as_str()))
    else {
        return Ok(args);
    };
    let insert_at = sub + 2;
    let flags: Vec<String> = entries
        .into_iter()
        .flat_map(|(k, v)| [format!("--{k}"), v])
        .collect();
    args.splice(insert_at..insert_at, flags);
    Ok(args)
}
