//! Run configuration: a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored; a `#` after a value
//! starts a comment. Keys may appear once. Relative paths are resolved
//! against the directory of the config file.
//!
//! | key | type | default |
//! |-----|------|---------|
//! | `psi` | terminal data expression (required) | |
//! | `n` | grid size | 32 |
//! | `steps` | time steps `L` | 32 |
//! | `outer_paths` | diagnostic paths | 32 |
//! | `inner_branches` | branches per expectation | 1000 |
//! | `nu`, `horizon` | viscosity, final time | 0.5, 0.25 |
//! | `alpha` | number or `auto` | `auto` |
//! | `picard_tol` | positive number | 2 |
//! | `picard_tol_mode` | `noise_multiple` or `absolute` | `noise_multiple` |
//! | `max_iter` | Picard iterations | 8 |
//! | `base_seed` | 64-bit seed | 2024 |
//! | `control_variate` | `true` / `false` | `true` |
//! | `workers` | threads, 0 for all cores | 0 |
//! | `oracle_steps` | oracle time steps | `steps` |
//! | `output_dir` | path | `<config stem>.out` |
//! | `solution` | solution bundle directory | |
//! | `trajectory` | oracle trajectory checkpoint | |
//! | `paths` | fresh comparison or residual paths | 0 |
//! | `path_dump` | outer paths written as CSV by `solve` | 0 |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use vorticity_bsde::engine::{PicardTolerance, SolverConfig};
use vorticity_bsde::field::{ScalarField, TrigTerm};
use vorticity_bsde::{Error, Result};

use crate::psi::{parse_psi, psi_field};

pub const MAX_CONFIG_LEN: usize = 1 << 20;

const KEYS: &[&str] = &[
    "psi",
    "n",
    "steps",
    "outer_paths",
    "inner_branches",
    "nu",
    "horizon",
    "alpha",
    "picard_tol",
    "picard_tol_mode",
    "max_iter",
    "base_seed",
    "control_variate",
    "workers",
    "oracle_steps",
    "output_dir",
    "solution",
    "trajectory",
    "paths",
    "path_dump",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub psi_terms: Vec<TrigTerm>,
    pub oracle_steps: usize,
    pub output_dir: Option<PathBuf>,
    pub solution: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub paths: usize,
    pub path_dump: usize,
    /// Every key as written, for the run manifest.
    pub entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn psi(&self) -> Result<ScalarField> {
        psi_field(&self.psi_terms, self.solver.n)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.output_dir,
            &mut self.solution,
            &mut self.trajectory,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

fn line_error(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn typed<T: FromStr>(line: usize, key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| line_error(line, format!("`{key}` expects {what}, got `{value}`")))
}

fn positive(line: usize, key: &str, value: &str) -> Result<f64> {
    let v: f64 = typed(line, key, value, "a number")?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(line_error(
            line,
            format!("`{key}` must be positive and finite"),
        ));
    }
    Ok(v)
}

/// Splits the text into `(line, key, value)` entries.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    if text.len() > MAX_CONFIG_LEN {
        return Err(Error::Config(format!(
            "config larger than {MAX_CONFIG_LEN} bytes"
        )));
    }
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(line_error(line, "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(line_error(line, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(line_error(line, format!("`{key}` has no value")));
        }
        if let Some((first, _, _)) = out.iter().find(|(_, k, _)| k == key) {
            return Err(line_error(
                line,
                format!("`{key}` already set on line {first}"),
            ));
        }
        out.push((line, key.to_string(), value.to_string()));
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let items = entries(text)?;
    let mut solver = SolverConfig::default();
    let mut psi: Option<(usize, Vec<TrigTerm>)> = None;
    let mut oracle_steps = None;
    let mut tol_value = None;
    let mut tol_mode = "noise_multiple".to_string();
    let mut cfg_paths = (None, None, None);
    let (mut paths, mut path_dump) = (0, 0);
    for (line, key, value) in &items {
        let (line, v) = (*line, value.as_str());
        match key.as_str() {
            "psi" => {
                let terms = parse_psi(v).map_err(|e| line_error(line, format!("`psi`: {e}")))?;
                psi = Some((line, terms));
            }
            "n" => solver.n = typed(line, key, v, "an integer")?,
            "steps" => solver.steps = typed(line, key, v, "an integer")?,
            "outer_paths" => solver.outer_paths = typed(line, key, v, "an integer")?,
            "inner_branches" => solver.inner_branches = typed(line, key, v, "an integer")?,
            "nu" => solver.nu = positive(line, key, v)?,
            "horizon" => solver.horizon = positive(line, key, v)?,
            "alpha" => {
                solver.alpha = if v == "auto" {
                    None
                } else {
                    let a: f64 = typed(line, key, v, "a number or `auto`")?;
                    if !(a >= 0.0 && a.is_finite()) {
                        return Err(line_error(line, "`alpha` must be non-negative"));
                    }
                    Some(a)
                }
            }
            "picard_tol" => tol_value = Some(positive(line, key, v)?),
            "picard_tol_mode" => match v {
                "absolute" | "noise_multiple" => tol_mode = v.to_string(),
                _ => {
                    return Err(line_error(
                        line,
                        "`picard_tol_mode` must be `absolute` or `noise_multiple`",
                    ))
                }
            },
            "max_iter" => solver.max_iter = typed(line, key, v, "an integer")?,
            "base_seed" => solver.base_seed = typed(line, key, v, "an unsigned integer")?,
            "control_variate" => solver.control_variate = typed(line, key, v, "`true` or `false`")?,
            "workers" => solver.workers = typed(line, key, v, "an integer")?,
            "oracle_steps" => {
                oracle_steps = Some((line, typed::<usize>(line, key, v, "an integer")?))
            }
            "output_dir" => cfg_paths.0 = Some(PathBuf::from(v)),
            "solution" => cfg_paths.1 = Some(PathBuf::from(v)),
            "trajectory" => cfg_paths.2 = Some(PathBuf::from(v)),
            "paths" => paths = typed(line, key, v, "an integer")?,
            "path_dump" => path_dump = typed(line, key, v, "an integer")?,
            _ => unreachable!("keys are checked in entries()"),
        }
    }
    solver.picard_tol = match (tol_mode.as_str(), tol_value) {
        ("absolute", Some(t)) => PicardTolerance::Absolute(t),
        ("absolute", None) => {
            return Err(Error::Config(
                "`picard_tol_mode = absolute` needs an explicit `picard_tol`".into(),
            ))
        }
        (_, t) => PicardTolerance::NoiseFloorMultiple(t.unwrap_or(2.0)),
    };
    solver.validate()?;
    let Some((psi_line, psi_terms)) = psi else {
        return Err(Error::Config("missing required key `psi`".into()));
    };
    psi_field(&psi_terms, solver.n).map_err(|e| line_error(psi_line, format!("`psi`: {e}")))?;
    if let Some((line, 0)) = oracle_steps {
        return Err(line_error(line, "`oracle_steps` must be at least 1"));
    }
    if path_dump > solver.outer_paths {
        return Err(Error::Config(format!(
            "`path_dump` = {path_dump} exceeds `outer_paths` = {}",
            solver.outer_paths
        )));
    }
    Ok(RunConfig {
        oracle_steps: oracle_steps.map_or(solver.steps, |(_, s)| s),
        solver,
        psi_terms,
        output_dir: cfg_paths.0,
        solution: cfg_paths.1,
        trajectory: cfg_paths.2,
        paths,
        path_dump,
        entries: items.into_iter().map(|(_, k, v)| (k, v)).collect(),
    })
}

/// Reads `output_dir` without validating anything else, so that a manifest
/// can be placed next to the intended outputs of a broken config.
pub fn salvage_output_dir(text: &str) -> Option<PathBuf> {
    text.lines().find_map(|raw| {
        let content = raw.split('#').next()?.trim();
        let (k, v) = content.split_once('=')?;
        (k.trim() == "output_dir" && !v.trim().is_empty()).then(|| PathBuf::from(v.trim()))
    })
}
