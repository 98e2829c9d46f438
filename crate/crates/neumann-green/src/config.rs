//! Line-based experiment configuration: bracketed section headers over
//! `key = value` pairs, validated before any solve is attempted.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Interval { a: f64, b: f64, cells: usize },
    Square { target_h: f64 },
    LShape { target_h: f64 },
    Polygon { vertices: Vec<[f64; 2]>, target_h: f64 },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub field_family: String,
    pub eps: f64,
    pub tau: f64,
    /// tabulation horizon; zero means the spectral default 8 rho^2 / lambda
    pub horizon: f64,
    pub poles: Vec<([f64; 2], f64)>,
    pub checks: Vec<String>,
    /// per-quantity threshold overrides, keys as they appear in report rows
    pub thresholds: BTreeMap<String, f64>,
    pub out_dir: String,
    pub seed: u64,
    pub workers: usize,
}

pub const KNOWN_CHECKS: &[&str] = &[
    "ellipticity",
    "coercivity",
    "conservation",
    "duality",
    "representation",
    "oracle_parabolic",
    "eps_stability",
    "positivity",
    "pointwise_bound",
    "holder_bound",
    "embedding_a1",
    "interior_holder_a2",
    "local_boundedness_a3",
    "gaussian_bound",
    "davies",
    "lp_scalings",
    "poincare",
    "elliptic_oracle",
    "elliptic_log_bound",
    "elliptic_symmetry",
    "elliptic_timebar",
];

fn err_at(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line: Some(line), message: message.into() }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut section = String::new();
    let mut domain: Option<DomainSpec> = None;
    let mut domain_kind: Option<String> = None;
    let mut domain_keys: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut field_family = String::new();
    let mut eps = f64::NAN;
    let mut tau = f64::NAN;
    let mut horizon = 0.0f64;
    let mut poles: Vec<([f64; 2], f64)> = Vec::new();
    let mut checks: Vec<String> = Vec::new();
    let mut thresholds = BTreeMap::new();
    let mut out_dir = "runs".to_string();
    let mut seed: Option<u64> = None;
    let mut workers = 1usize;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            match section.as_str() {
                "domain" | "field" | "discretization" | "poles" | "verify" | "output" => {}
                other => return Err(err_at(lineno, format!("unknown section [{other}]"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err_at(lineno, format!("expected key = value, got '{line}'")))?;
        let parse_f = |v: &str| -> Result<f64> {
            v.parse().map_err(|_| err_at(lineno, format!("bad number '{v}' for key {key}")))
        };
        match (section.as_str(), key) {
            ("domain", "kind") => domain_kind = Some(value.to_string()),
            ("domain", _) => {
                domain_keys.insert(key.to_string(), (lineno, value.to_string()));
            }
            ("field", "family") => field_family = value.to_string(),
            ("field", other) => return Err(err_at(lineno, format!("unknown field key '{other}'"))),
            ("discretization", "eps") => eps = parse_f(value)?,
            ("discretization", "tau") => tau = parse_f(value)?,
            ("discretization", "horizon") => horizon = parse_f(value)?,
            ("discretization", other) => {
                return Err(err_at(lineno, format!("unknown discretization key '{other}'")))
            }
            ("poles", "pole") => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| p.trim().parse().map_err(|_| err_at(lineno, format!("bad pole coordinate '{p}'"))))
                    .collect::<Result<_>>()?;
                match parts.len() {
                    2 => poles.push(([parts[0], 0.0], parts[1])),
                    3 => poles.push(([parts[0], parts[1]], parts[2])),
                    _ => {
                        return Err(err_at(
                            lineno,
                            "pole takes 'x, t' on intervals or 'x, y, t' on polygons",
                        ))
                    }
                }
            }
            ("poles", other) => return Err(err_at(lineno, format!("unknown poles key '{other}'"))),
            ("verify", "checks") => {
                for c in value.split(',') {
                    let c = c.trim().to_string();
                    if !KNOWN_CHECKS.contains(&c.as_str()) {
                        return Err(err_at(lineno, format!("unknown check '{c}'")));
                    }
                    checks.push(c);
                }
            }
            ("verify", key) if key.starts_with("tol.") => {
                thresholds.insert(key[4..].to_string(), parse_f(value)?);
            }
            ("verify", other) => return Err(err_at(lineno, format!("unknown verify key '{other}'"))),
            ("output", "dir") => out_dir = value.to_string(),
            ("output", "seed") => {
                seed = Some(
                    value.parse().map_err(|_| err_at(lineno, format!("bad seed '{value}'")))?,
                )
            }
            ("output", "workers") => {
                workers = value.parse().map_err(|_| err_at(lineno, format!("bad worker count '{value}'")))?
            }
            ("output", other) => return Err(err_at(lineno, format!("unknown output key '{other}'"))),
            ("", _) => return Err(err_at(lineno, "key outside of any section")),
            (s, k) => return Err(err_at(lineno, format!("unknown key '{k}' in section [{s}]"))),
        }
        if section == "domain" && domain.is_none() {
            // defer building until the section is complete; handled below
        }
    }

    // assemble the domain from collected keys
    let kind = domain_kind.ok_or_else(|| Error::Config { line: None, message: "missing domain kind".into() })?;
    let get = |k: &str| -> Option<&(usize, String)> { domain_keys.get(k) };
    let getf = |k: &str| -> Result<f64> {
        let (l, v) = get(k).ok_or_else(|| Error::Config { line: None, message: format!("missing domain key {k}") })?;
        v.parse().map_err(|_| err_at(*l, format!("bad number '{v}' for {k}")))
    };
    domain = Some(match kind.as_str() {
        "interval" => {
            let a = getf("a")?;
            let b = getf("b")?;
            let (l, cells_s) =
                get("cells").ok_or_else(|| Error::Config { line: None, message: "missing domain key cells".into() })?;
            let cells: usize =
                cells_s.parse().map_err(|_| err_at(*l, format!("bad cell count '{cells_s}'")))?;
            DomainSpec::Interval { a, b, cells }
        }
        "square" => DomainSpec::Square { target_h: getf("target_h")? },
        "lshape" => DomainSpec::LShape { target_h: getf("target_h")? },
        "polygon" => {
            let (l, vs) = get("vertices")
                .ok_or_else(|| Error::Config { line: None, message: "missing domain key vertices".into() })?;
            let nums: Vec<f64> = vs
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| err_at(*l, format!("bad vertex coordinate '{p}'"))))
                .collect::<Result<_>>()?;
            if nums.len() % 2 != 0 || nums.len() < 6 {
                return Err(err_at(*l, "vertices must list x, y pairs of at least three corners"));
            }
            let vertices = nums.chunks(2).map(|c| [c[0], c[1]]).collect();
            DomainSpec::Polygon { vertices, target_h: getf("target_h")? }
        }
        other => return Err(Error::Config { line: None, message: format!("unknown domain kind '{other}'") }),
    });

    let domain = domain.unwrap();
    if field_family.is_empty() {
        return Err(Error::Config { line: None, message: "missing field family".into() });
    }
    let seed = seed.ok_or_else(|| Error::Config { line: None, message: "seed is required".into() })?;
    if !(eps > 0.0) {
        return Err(Error::Config { line: None, message: "eps must be positive".into() });
    }
    if !(tau > 0.0) {
        return Err(Error::Config { line: None, message: "tau must be positive".into() });
    }
    // pole-time resolution: the march must resolve the mollification scale
    if tau > eps * eps + 1e-15 {
        return Err(Error::Config {
            line: None,
            message: format!("tau = {tau} exceeds eps^2 = {}; the pole transient would be unresolved", eps * eps),
        });
    }
    if checks.is_empty() {
        return Err(Error::Config { line: None, message: "no checks selected".into() });
    }
    if workers == 0 {
        return Err(Error::Config { line: None, message: "workers must be at least 1".into() });
    }
    Ok(ExperimentConfig {
        domain,
        field_family,
        eps,
        tau,
        horizon,
        poles,
        checks,
        thresholds,
        out_dir,
        seed,
        workers,
    })
}
