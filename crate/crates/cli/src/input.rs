//! Parsing of family specs, sets and grids given on the command line.

use std::fs;

use multiples::{FamilySpec, FiniteSet};

use crate::error::{config_err, CliResult};

/// Accepts inline JSON, `@path` (JSON, or one integer per line), a
/// comma-separated list of integers, or one of the names `primes`,
/// `prime-squares`.
pub fn parse_spec(arg: &str) -> CliResult<FamilySpec> {
    let arg = arg.trim();
    if let Some(path) = arg.strip_prefix('@') {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {path}: {e}")))?;
        return if text.trim_start().starts_with('{') {
            Ok(FamilySpec::from_json(&text)?)
        } else {
            Ok(FiniteSet::parse_text(&text)?.into())
        };
    }
    if arg.starts_with('{') {
        return Ok(FamilySpec::from_json(arg)?);
    }
    match arg {
        "primes" => Ok(FamilySpec::primes()),
        "prime-squares" => Ok(FamilySpec::prime_powers(2)),
        _ => Ok(parse_set(arg)?.into()),
    }
}

pub fn parse_set(arg: &str) -> CliResult<FiniteSet> {
    Ok(FiniteSet::new(parse_list(arg)?)?)
}

/// `1000000`, `1_000_000` and `1e6` all parse to the same value.
pub fn parse_u64(s: &str) -> CliResult<u64> {
    let s = s.trim().replace('_', "");
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(f) if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 => Ok(f as u64),
        _ => Err(config_err(format!("not a nonnegative integer: {s:?}"))),
    }
}

pub fn parse_list(arg: &str) -> CliResult<Vec<u64>> {
    arg.split(',').filter(|s| !s.trim().is_empty()).map(parse_u64).collect()
}

pub fn parse_floats(arg: &str) -> CliResult<Vec<f64>> {
    arg.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| config_err(format!("not a number: {s:?}"))))
        .collect()
}

/// Strictly increasing positive grid.
pub fn parse_grid(arg: &str) -> CliResult<Vec<u64>> {
    let g = parse_list(arg)?;
    check_grid(&g)?;
    Ok(g)
}

pub fn check_grid(g: &[u64]) -> CliResult<()> {
    if g.is_empty() || g[0] == 0 || g.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err(format!("grid must be strictly increasing positive integers: {g:?}")));
    }
    Ok(())
}
