//! Flat `key = value` configuration files and flag overrides.
//!
//! Exactly eleven keys are recognized: `Q`, `A`, `B`, `C`, `T_c`, `M`, `eps`,
//! `dt`, `y_min`, `y_max`, `n_points`. Anything else is a hard error, so a
//! typo cannot silently fall back to a default. Blank lines and `#` comments
//! are ignored; later assignments win.

use std::path::Path;

use crate::error::ConfigError;
use crate::physics::{ParamValues, Params};

/// Flag-level overrides; every field mirrors one config key.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub q: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub t_c: Option<f64>,
    pub m: Option<f64>,
    pub eps: Option<f64>,
    pub dt: Option<f64>,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub n_points: Option<usize>,
}

fn apply_key(values: &mut ParamValues, key: &str, raw: &str, line: usize) -> Result<(), ConfigError> {
    let parse = |raw: &str| -> Result<f64, ConfigError> {
        raw.parse::<f64>().map_err(|_| ConfigError::BadNumber {
            key: key.to_string(),
            value: raw.to_string(),
        })
    };
    match key {
        "Q" => values.solar_constant = parse(raw)?,
        "A" => values.olr_intercept = parse(raw)?,
        "B" => values.olr_slope = parse(raw)?,
        "C" => values.transport_coeff = parse(raw)?,
        "T_c" => values.critical_temp = parse(raw)?,
        "M" => values.albedo_steepness = parse(raw)?,
        "eps" => values.iceline_rate = parse(raw)?,
        "dt" => values.time_step = parse(raw)?,
        "y_min" => values.y_min = parse(raw)?,
        "y_max" => values.y_max = parse(raw)?,
        "n_points" => {
            values.n_points = raw.parse::<usize>().map_err(|_| ConfigError::BadNumber {
                key: key.to_string(),
                value: raw.to_string(),
            })?
        }
        _ => {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            })
        }
    }
    Ok(())
}

/// Parse a config file into raw values, starting from the defaults.
pub fn parse_file(path: &Path) -> Result<ParamValues, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<ParamValues, ConfigError> {
    let mut values = ParamValues::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line: line_no,
            text: raw_line.to_string(),
        })?;
        apply_key(&mut values, key.trim(), value.trim(), line_no)?;
    }
    Ok(values)
}

/// Resolve a parameter set: file values (when given) under flag overrides,
/// then validate.
pub fn resolve(
    file: Option<&Path>,
    overrides: &ParamOverrides,
) -> Result<Params, ConfigError> {
    let mut values = match file {
        Some(path) => parse_file(path)?,
        None => ParamValues::default(),
    };
    if let Some(q) = overrides.q {
        values.solar_constant = q;
    }
    if let Some(a) = overrides.a {
        values.olr_intercept = a;
    }
    if let Some(b) = overrides.b {
        values.olr_slope = b;
    }
    if let Some(c) = overrides.c {
        values.transport_coeff = c;
    }
    if let Some(t_c) = overrides.t_c {
        values.critical_temp = t_c;
    }
    if let Some(m) = overrides.m {
        values.albedo_steepness = m;
    }
    if let Some(eps) = overrides.eps {
        values.iceline_rate = eps;
    }
    if let Some(dt) = overrides.dt {
        values.time_step = dt;
    }
    if let Some(y_min) = overrides.y_min {
        values.y_min = y_min;
    }
    if let Some(y_max) = overrides.y_max {
        values.y_max = y_max;
    }
    if let Some(n) = overrides.n_points {
        values.n_points = n;
    }
    Params::try_from(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let p = resolve(None, &ParamOverrides::default()).unwrap();
        assert_eq!(p.solar_constant(), 343.0);
        assert_eq!(p.olr_intercept(), 202.0);
        assert_eq!(p.olr_slope(), 1.9);
        assert_eq!(p.transport_coeff(), 3.04);
        assert_eq!(p.critical_temp(), -10.0);
        assert_eq!(p.albedo_steepness(), 25.0);
        assert_eq!(p.iceline_rate(), 0.025);
        assert_eq!(p.time_step(), 0.1);
    }

    #[test]
    fn parses_values_comments_and_blank_lines() {
        let text = "\n# present-day run\nQ = 400 # hotter sun\n eps=0.01\n";
        let v = parse_str(text).unwrap();
        assert_eq!(v.solar_constant, 400.0);
        assert_eq!(v.iceline_rate, 0.01);
        assert_eq!(v.olr_intercept, 202.0);
    }

    #[test]
    fn unknown_key_is_a_hard_error() {
        let err = parse_str("Qsolar = 343\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { key, line } => {
                assert_eq!(key, "Qsolar");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn bad_number_names_key_and_value() {
        let err = parse_str("M = fortytwo\n").unwrap_err();
        assert!(err.to_string().contains("M") && err.to_string().contains("fortytwo"));
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "Q = 343\n").unwrap();
        let overrides = ParamOverrides {
            q: Some(500.0),
            ..ParamOverrides::default()
        };
        let p = resolve(Some(&path), &overrides).unwrap();
        assert_eq!(p.solar_constant(), 500.0);
    }

    #[test]
    fn invalid_dt_is_rejected_with_the_constraint() {
        let err = parse_str("dt = 0.3\n")
            .and_then(Params::try_from)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dt") && msg.contains("1/(B+C)"), "{msg}");
    }
}
