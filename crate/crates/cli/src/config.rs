//! `--json-config`: a JSON object whose keys are flag names.
//!
//! The object is turned back into flags placed before the ones typed on the
//! command line, so typed flags override it. `subcommand` (or `command`)
//! picks the subcommand when none is typed. Arrays become comma lists and
//! arrays of arrays become `;`-separated comma lists, which is how
//! `window`, `heights` and `windows` are spelled on the command line.
//! Shared run fields that a subcommand has no flag for (`samples` for
//! `count`, say) are skipped, so a JSON output's `params` object can be fed
//! back in; any other unknown key is an error.

use std::fs;

use serde_json::{Map, Value};

/// Fields every JSON output carries in `params`.
const SHARED_FIELDS: [&str; 7] = ["n", "psi", "window", "samples", "seed", "format", "out"];

/// `accepts(subcommand, long_flag)` says whether the subcommand has that flag.
pub fn expand(args: Vec<String>, accepts: impl Fn(&str, &str) -> bool) -> Result<Vec<String>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--json-config" {
            path = Some(it.next().ok_or("--json-config needs a file path")?);
        } else if let Some(p) = a.strip_prefix("--json-config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };

    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read --json-config {path}: {e}"))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| format!("--json-config {path} is not valid JSON: {e}"))?;
    let Value::Object(map) = value else {
        return Err(format!("--json-config {path} must hold a JSON object"));
    };

    let mut out = vec![rest.first().cloned().unwrap_or_else(|| "kg-lab".into())];
    let typed_sub = rest.get(1).filter(|a| !a.starts_with('-')).cloned();
    let user_flags = &rest[1 + typed_sub.is_some() as usize..];
    let Some(sub) = typed_sub.or_else(|| config_subcommand(&map)) else {
        return Err(format!("--json-config {path} names no subcommand and none was given"));
    };
    out.push(sub.clone());
    for (key, v) in &map {
        if key == "subcommand" || key == "command" {
            continue;
        }
        let long = key.replace('_', "-");
        if !accepts(&sub, &long) {
            if SHARED_FIELDS.contains(&key.as_str()) {
                continue;
            }
            return Err(format!("--json-config key {key:?} is not a flag of {sub}"));
        }
        let flag = format!("--{long}");
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag),
            other => {
                out.push(flag);
                out.push(render(other).map_err(|e| format!("--json-config key {key:?}: {e}"))?);
            }
        }
    }
    out.extend_from_slice(user_flags);
    Ok(out)
}

fn config_subcommand(map: &Map<String, Value>) -> Option<String> {
    ["subcommand", "command"].iter().find_map(|k| map.get(*k).and_then(Value::as_str)).map(String::from)
}

fn render(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Array(items) => {
            let nested = items.iter().any(Value::is_array);
            let parts = items.iter().map(render).collect::<Result<Vec<_>, _>>()?;
            Ok(parts.join(if nested { ";" } else { "," }))
        }
        _ => Err("expected a string, number or array".into()),
    }
}
