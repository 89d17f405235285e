//! `--config` files. Entries become flags spliced in right after the
//! subcommand, so anything given on the command line overrides them.

use std::path::Path;

use serde_json::Value;

use crate::CliError;

const SUBCOMMANDS: [&str; 3] = ["estimate", "power", "simulate"];

pub fn expand(mut argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some((pos, path, width)) = find_config(&argv) else {
        return Ok(argv);
    };
    argv.drain(pos..pos + width);
    let flags = parse_file(Path::new(&path))?;
    let Some(sub) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let mut at = sub + 1;
    if argv[sub] == "simulate" && argv.get(at).is_some_and(|a| !a.starts_with('-')) {
        at += 1;
    }
    argv.splice(at..at, flags);
    Ok(argv)
}

fn find_config(argv: &[String]) -> Option<(usize, String, usize)> {
    for (i, a) in argv.iter().enumerate().skip(1) {
        if a == "--config" {
            return argv.get(i + 1).map(|p| (i, p.clone(), 2));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some((i, p.to_string(), 1));
        }
    }
    None
}

fn parse_file(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        parse_json(&text)
    } else {
        parse_key_value(&text)
    }
}

fn push_flag(out: &mut Vec<String>, key: &str, value: &str) {
    let key = key.trim().trim_start_matches("--").replace('_', "-");
    match value {
        "true" => out.push(format!("--{key}")),
        "false" => {}
        v => {
            out.push(format!("--{key}"));
            out.push(v.to_string());
        }
    }
}

pub fn parse_key_value(text: &str) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
        push_flag(&mut out, k, v.trim().trim_matches('"'));
    }
    Ok(out)
}

pub fn parse_json(text: &str) -> Result<Vec<String>, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
    let Value::Object(map) = root else {
        return Err(CliError::Config("config: expected a JSON object".into()));
    };
    let scalar = |v: &Value| match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(CliError::Config(format!("config: unsupported value {other}"))),
    };
    let mut out = Vec::new();
    for (k, v) in &map {
        let value = match v {
            Value::Array(items) => items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?.join(","),
            other => scalar(other)?,
        };
        push_flag(&mut out, k, &value);
    }
    Ok(out)
}
