//! `--config FILE`: TOML sections named after subcommands, keys named after
//! long flags. The values are turned into flags and inserted right after the
//! subcommand token. Keys whose flag also appears on the command line are
//! dropped, so typed flags win even for list-valued flags.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, Command};

use crate::CliError;

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
        if s == "--" {
            break;
        }
    }
    None
}

/// Index of the subcommand token, skipping `--config FILE`.
fn subcommand_index(cmd: &Command, argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return cmd.find_subcommand(&argv[i]).map(|_| i);
        }
        i += 1;
    }
    None
}

fn scalar(v: &toml::Value, section: &str, key: &str) -> Result<String, CliError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(CliError::usage(format!("config [{section}]: `{key}` must be a string, number or list of them"))),
    }
}

fn find_arg<'a>(sub: &'a Command, key: &str) -> Option<&'a Arg> {
    sub.get_arguments().filter(|a| a.get_id() != "config" && a.get_id() != "help").find(|a| {
        a.get_long() == Some(key) || a.get_all_aliases().is_some_and(|al| al.contains(&key))
    })
}

fn flag_tokens(
    sub: &Command,
    section: &str,
    key: &str,
    v: &toml::Value,
    typed: &[String],
) -> Result<Vec<OsString>, CliError> {
    let arg = find_arg(sub, key).ok_or_else(|| CliError::usage(format!("config [{section}]: unknown key `{key}`")))?;
    let long = arg.get_long().expect("matched by long name");
    let mut names = vec![long];
    names.extend(arg.get_all_aliases().unwrap_or_default());
    if typed.iter().any(|t| names.contains(&t.as_str())) {
        return Ok(Vec::new());
    }
    if !arg.get_action().takes_values() {
        return match v {
            toml::Value::Boolean(true) => Ok(vec![format!("--{long}").into()]),
            toml::Value::Boolean(false) => Ok(Vec::new()),
            _ => Err(CliError::usage(format!("config [{section}]: `{key}` is a switch and takes true or false"))),
        };
    }
    let multi = arg.get_num_args().is_some_and(|r| r.max_values() > 1);
    match v {
        toml::Value::Array(items) => {
            let parts = items.iter().map(|x| scalar(x, section, key)).collect::<Result<Vec<_>, _>>()?;
            if multi {
                let mut out = vec![OsString::from(format!("--{long}"))];
                out.extend(parts.into_iter().map(OsString::from));
                Ok(out)
            } else {
                Ok(vec![format!("--{long}={}", parts.join(",")).into()])
            }
        }
        _ => Ok(vec![format!("--{long}={}", scalar(v, section, key)?).into()]),
    }
}

/// Returns `argv` with the config file's flags for the chosen subcommand
/// spliced in. Every section is checked, not only the one in use.
pub fn merge(cmd: &Command, mut argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    let doc: toml::Table =
        text.parse().map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    let typed: Vec<String> = argv
        .iter()
        .filter_map(|a| a.to_str()?.strip_prefix("--").map(|s| s.split('=').next().unwrap_or(s).to_string()))
        .collect();
    let mut sections = Vec::new();
    for (name, value) in &doc {
        let sub = cmd
            .find_subcommand(name)
            .ok_or_else(|| CliError::usage(format!("config: unknown key `{name}` (expected a subcommand section)")))?;
        let toml::Value::Table(table) = value else {
            return Err(CliError::usage(format!("config: `{name}` must be a section")));
        };
        let mut tokens = Vec::new();
        for (key, v) in table {
            tokens.extend(flag_tokens(sub, name, key, v, &typed)?);
        }
        sections.push((sub.get_name().to_string(), tokens));
    }
    if let Some(i) = subcommand_index(cmd, &argv) {
        let name = cmd.find_subcommand(&argv[i]).expect("checked").get_name().to_string();
        if let Some((_, tokens)) = sections.into_iter().find(|(n, _)| *n == name) {
            argv.splice(i + 1..i + 1, tokens);
        }
    }
    Ok(argv)
}
