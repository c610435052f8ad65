use std::path::Path;

use abps_core::models::{AbpsParams, Mode};

use crate::error::InputError;

/// Parses `key=value`. The value may be a number or a fraction `a/b`.
pub fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(format!("missing key in '{s}'"));
    }
    Ok((key.to_string(), parse_number(v.trim())?))
}

fn parse_number(v: &str) -> Result<f64, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid number '{}'", t.trim()))
    };
    let x = match v.split_once('/') {
        Some((a, b)) => {
            let d = num(b)?;
            if d == 0.0 {
                return Err(format!("division by zero in '{v}'"));
            }
            num(a)? / d
        }
        None => num(v)?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("value '{v}' is not finite"))
    }
}

/// Parses a parameter file. `source_name` labels diagnostics.
pub fn parse_params(text: &str, source_name: &str) -> Result<Vec<(String, f64)>, InputError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_assignment(line).map_err(|m| InputError::line(source_name, i + 1, m))?);
    }
    Ok(out)
}

pub fn read_params(path: &Path) -> Result<Vec<(String, f64)>, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
    parse_params(&text, &path.display().to_string())
}

/// Starting parameters for `mode`: the appendix mode starts from the
/// values written in the model listings.
pub fn base_params(mode: Mode) -> AbpsParams {
    match mode {
        Mode::Text => abps_core::models::default_params(),
        Mode::Appendix => AbpsParams::appendix_listing(),
    }
}

/// Base parameters for `mode`, then the file overrides, then the
/// command-line ones.
pub fn resolve_params(mode: Mode, file: Option<&Path>, overrides: &[(String, f64)]) -> Result<AbpsParams, InputError> {
    let mut all = match file {
        Some(p) => read_params(p)?,
        None => Vec::new(),
    };
    all.extend(overrides.iter().cloned());
    let mut params = base_params(mode);
    params
        .apply_overrides(all.iter().map(|(k, v)| (k.as_str(), *v)))
        .map_err(|e| InputError::Invalid(e.to_string()))?;
    Ok(params)
}
