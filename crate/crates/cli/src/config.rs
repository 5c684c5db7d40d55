//! `--config FILE` expansion. Each `key = value` line becomes `--key value`
//! placed right after the subcommand, so flags given on the command line
//! override the file and unknown keys are rejected by the parser.

use std::ffi::OsString;

use crate::CliError;

pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let v = it.next().ok_or_else(|| CliError::Invalid("--config needs a file".into()))?;
            path = Some(v.clone());
            rest.push(a);
            rest.push(v);
        } else if let Some(v) = s.strip_prefix("--config=") {
            path = Some(OsString::from(v));
            rest.push(a);
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Invalid(format!("config {}: {e}", path.to_string_lossy())))?;
    let tokens = parse(&text)?;
    // argv[0], then the subcommand
    let at = 2.min(rest.len());
    rest.splice(at..at, tokens);
    Ok(rest)
}

fn parse(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("config line {}: expected key = value", n + 1)))?;
        let mut key = key.trim().replace('_', "-");
        if key.eq_ignore_ascii_case("fourier-n") {
            key = "fourier-N".into();
        }
        if key.is_empty() || key == "config" || key.starts_with('-') {
            return Err(CliError::Invalid(format!("config line {}: bad key {key:?}", n + 1)));
        }
        let value = value.trim().trim_matches('"');
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_become_flags() {
        let t = parse("k = 1\n# comment\nrk_tol=1e-9 # inline\nforce = true\nboth_sides = false\nfourier_N = 64\n").unwrap();
        let t: Vec<String> = t.into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(t, ["--k", "1", "--rk-tol", "1e-9", "--force", "--fourier-N", "64"]);
        assert!(parse("just words").is_err());
    }
}
