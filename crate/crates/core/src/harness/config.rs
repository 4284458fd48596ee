use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, Scheme};
use crate::grid::{DomainGrid, DomainShape, DomainSpec};

use super::scenarios::ScenarioKind;

const KEYS: &[&str] = &[
    "d", "D", "shape", "half_widths", "n", "scheme", "lambda", "kappa", "dt", "t_end",
    "cfl_safety", "stride", "scenario", "rho", "theta0", "slope", "amplitude", "value",
    "diagnostics", "delta",
];

const DIAGNOSTICS: &[&str] = &["energy_check", "one_sided", "weak_residual", "penalty"];

/// Time step: explicit, or the largest step the stability bounds allow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepChoice {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub target_dim: usize,
    pub scheme: Scheme,
    pub lambda: f64,
    pub kappa: f64,
    pub dt: StepChoice,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub stride: usize,
    pub scenario: ScenarioKind,
    pub diagnostics: Vec<String>,
    /// Hemisphere-confinement threshold for the one-sided monitor.
    pub delta: f64,
}

impl RunConfig {
    /// Flow parameters on `grid`, resolving `dt = auto`.
    pub fn flow_config(&self, grid: &DomainGrid) -> FlowConfig {
        let mut cfg = FlowConfig {
            scheme: self.scheme,
            lambda: self.lambda,
            kappa: self.kappa,
            dt: 0.0,
            t_end: self.t_end,
            cfl_safety: self.cfl_safety,
            stride: self.stride,
        };
        cfg.dt = match self.dt {
            StepChoice::Fixed(dt) => dt,
            StepChoice::Auto => {
                let rate: f64 = (0..grid.dim())
                    .map(|a| 2.0 / (grid.spacing(a) * grid.spacing(a)))
                    .sum();
                let stiff = 1.0 / (rate + 2.0 * cfg.penalty_coefficient());
                cfg.cfl_bound(grid).min(stiff)
            }
        };
        cfg
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|e| Error::Config(format!("{key} = {v}: {e}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|e| Error::Config(format!("{key} = {v}: {e}")))
}

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
/// keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map: BTreeMap<&str, &str> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key {k}", lineno + 1)));
        }
        if map.insert(k, v).is_some() {
            return Err(Error::Config(format!("line {}: repeated key {k}", lineno + 1)));
        }
    }
    let get = |k: &str| map.get(k).copied();

    let d = get("d").map(|v| parse_usize("d", v)).transpose()?.unwrap_or(3);
    let target_dim = get("D").map(|v| parse_usize("D", v)).transpose()?.unwrap_or(2);
    let n = get("n").map(|v| parse_usize("n", v)).transpose()?.unwrap_or(33);
    let shape = match get("shape").unwrap_or("ball") {
        "ball" => {
            if get("half_widths").is_some() {
                return Err(Error::Config("half_widths only applies to shape = box".into()));
            }
            DomainShape::UnitBall
        }
        "box" => {
            let hw = match get("half_widths") {
                Some(v) => parse_list("half_widths", v)?,
                None => vec![1.0; d],
            };
            let hw = if hw.len() == 1 { vec![hw[0]; d] } else { hw };
            DomainShape::Box { half_widths: hw }
        }
        other => return Err(Error::Config(format!("shape = {other}: expected ball or box"))),
    };
    let domain = DomainSpec { dim: d, shape, n };
    domain.validate()?;

    let scheme = match get("scheme").unwrap_or("glhf") {
        "glhf" => Scheme::Glhf,
        "hhf" | "projected" => Scheme::ProjectedHhf,
        other => return Err(Error::Config(format!("scheme = {other}: expected glhf or hhf"))),
    };
    let lambda = get("lambda").map(|v| parse_f64("lambda", v)).transpose()?.unwrap_or(1e3);
    let kappa = get("kappa").map(|v| parse_f64("kappa", v)).transpose()?.unwrap_or(0.5);
    let dt = match get("dt").unwrap_or("auto") {
        "auto" => StepChoice::Auto,
        v => StepChoice::Fixed(parse_f64("dt", v)?),
    };
    let t_end = get("t_end").map(|v| parse_f64("t_end", v)).transpose()?.unwrap_or(0.1);
    let cfl_safety = get("cfl_safety").map(|v| parse_f64("cfl_safety", v)).transpose()?.unwrap_or(0.5);
    let stride = get("stride").map(|v| parse_usize("stride", v)).transpose()?.unwrap_or(10);
    let delta = get("delta").map(|v| parse_f64("delta", v)).transpose()?.unwrap_or(crate::chart::DEFAULT_DELTA);

    let scenario_params = ["rho", "theta0", "slope", "amplitude", "value"];
    let scenario = match get("scenario") {
        None => return Err(Error::Config("missing key scenario".into())),
        Some("equator") => ScenarioKind::Equator,
        Some("smoothed_equator") => ScenarioKind::SmoothedEquator {
            rho: parse_f64("rho", get("rho").unwrap_or("0.25"))?,
        },
        Some("cap") => ScenarioKind::Cap {
            theta0: parse_f64("theta0", get("theta0").unwrap_or("0.9272952180016122"))?,
        },
        Some("great_circle") => ScenarioKind::GreatCircle {
            slope: match get("slope") {
                Some(v) => parse_list("slope", v)?,
                None => vec![0.5; d],
            },
            amplitude: parse_f64("amplitude", get("amplitude").unwrap_or("1"))?,
        },
        Some("constant") => ScenarioKind::Constant {
            value: match get("value") {
                Some(v) => parse_list("value", v)?,
                None => {
                    let mut v = vec![0.0; target_dim + 1];
                    v[target_dim] = 1.0;
                    v
                }
            },
        },
        Some(other) => return Err(Error::Config(format!("unknown scenario {other}"))),
    };
    let used: &[&str] = match &scenario {
        ScenarioKind::Equator => &[],
        ScenarioKind::SmoothedEquator { .. } => &["rho"],
        ScenarioKind::Cap { .. } => &["theta0"],
        ScenarioKind::GreatCircle { .. } => &["slope", "amplitude"],
        ScenarioKind::Constant { .. } => &["value"],
    };
    for p in scenario_params {
        if get(p).is_some() && !used.contains(&p) {
            return Err(Error::Config(format!("{p} does not apply to scenario {}", scenario.name())));
        }
    }
    let diagnostics: Vec<String> = match get("diagnostics") {
        None | Some("") => Vec::new(),
        Some(v) => v.split(',').map(|s| s.trim().to_string()).collect(),
    };
    for name in &diagnostics {
        if !DIAGNOSTICS.contains(&name.as_str()) {
            return Err(Error::Config(format!(
                "unknown diagnostic {name}; expected one of {}",
                DIAGNOSTICS.join(", ")
            )));
        }
    }
    Ok(RunConfig {
        domain,
        target_dim,
        scheme,
        lambda,
        kappa,
        dt,
        t_end,
        cfl_safety,
        stride,
        scenario,
        diagnostics,
        delta,
    })
}

/// One line of an anchors file: `kind=monotonicity t0=0.25 x0=0,0,0 radii=0.05,0.1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorSpec {
    pub kind: String,
    pub t0: f64,
    pub x0: Vec<f64>,
    pub radii: Vec<f64>,
    pub eps0: Vec<f64>,
    pub exponent: Option<f64>,
}

const ANCHOR_KINDS: &[&str] = &["monotonicity", "density", "reverse_poincare", "hybrid", "singular_set"];

pub fn parse_anchors(text: &str) -> Result<Vec<AnchorSpec>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse(format!("anchors line {}: {m}", lineno + 1));
        let mut kind = None;
        let mut t0 = None;
        let mut x0 = Vec::new();
        let mut radii = Vec::new();
        let mut eps0 = Vec::new();
        let mut exponent = None;
        for tok in line.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| bad(format!("bad token {tok}")))?;
            let list = |v: &str| -> Result<Vec<f64>> {
                v.split(',')
                    .map(|s| s.parse::<f64>().map_err(|e| bad(format!("{k}: {e}"))))
                    .collect()
            };
            match k {
                "kind" => kind = Some(v.to_string()),
                "t0" => t0 = Some(v.parse::<f64>().map_err(|e| bad(format!("t0: {e}")))?),
                "x0" => x0 = list(v)?,
                "radii" | "R" => radii = list(v)?,
                "eps0" => eps0 = list(v)?,
                "exponent" => exponent = Some(v.parse::<f64>().map_err(|e| bad(format!("exponent: {e}")))?),
                _ => return Err(bad(format!("unknown key {k}"))),
            }
        }
        let kind = kind.ok_or_else(|| bad("missing kind".into()))?;
        if !ANCHOR_KINDS.contains(&kind.as_str()) {
            return Err(bad(format!("unknown kind {kind}")));
        }
        if radii.is_empty() {
            return Err(bad("missing radii".into()));
        }
        let t0 = match (kind.as_str(), t0) {
            ("singular_set", t) => t.unwrap_or(f64::NAN),
            (_, Some(t)) => t,
            (_, None) => return Err(bad("missing t0".into())),
        };
        if kind != "singular_set" && x0.is_empty() {
            return Err(bad("missing x0".into()));
        }
        out.push(AnchorSpec {
            kind,
            t0,
            x0,
            radii,
            eps0,
            exponent,
        });
    }
    Ok(out)
}
