use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::chart::one_sided_monitor;
use crate::diagnostics::{
    hybrid_check, monotonicity_check, penalty_decay_exponent, penalty_integral,
    reverse_poincare_check, scaled_energy_density, singular_set, MeanTarget,
    MonotonicityOptions, ReportRecord,
};
use crate::error::{Error, Result};
use crate::field::SphereField;
use crate::flow::{global_energy_check, run_flow, weak_residual, FlowTrace, Scheme, StepLog, ENERGY_CHECK_C};
use crate::grid::build_grid;

use super::compare::trace_l2_distance;
use super::config::{parse_anchors, parse_config, RunConfig, StepChoice};
use super::harmonic::{harmonic_extension, HarmonicOptions};

/// Process exit status for an error: 1 configuration, 2 numerical, 3 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => 3,
        Error::Cfl { .. }
        | Error::NonFinite { .. }
        | Error::ProjectionSingularity { .. }
        | Error::NoConvergence { .. }
        | Error::ChartDomain { .. } => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NumericalFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config_digest: String,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub status: RunStatus,
    pub message: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Outputs {
    root: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(root: &Path) -> Result<Self> {
        create_dir(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            create_dir(parent)?;
        }
        write_file(&path, bytes)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn finish(
        mut self,
        command: &str,
        digest: String,
        started: Instant,
        status: RunStatus,
        message: Option<String>,
    ) -> Result<Manifest> {
        self.files.push("manifest.json".into());
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_digest: digest,
            outputs: self.files.clone(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            status,
            message,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_file(&self.root.join("manifest.json"), text.as_bytes())?;
        Ok(manifest)
    }
}

fn ndjson<I: IntoIterator<Item = String>>(lines: I) -> Vec<u8> {
    let mut out = Vec::new();
    for l in lines {
        out.extend_from_slice(l.as_bytes());
        out.push(b'\n');
    }
    out
}

fn snapshot_bytes(u: &SphereField) -> Vec<u8> {
    let mut buf = Vec::new();
    u.write_snapshot(&mut buf).expect("writing to memory");
    buf
}

fn json_f64(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Builds the grid and initial data for `config` and runs the flow.
pub fn execute(config: &RunConfig) -> Result<FlowTrace> {
    let grid = Arc::new(build_grid(config.domain.clone())?);
    let u0 = config.scenario.generate(&grid, config.target_dim)?;
    let cfg = config.flow_config(&grid);
    run_flow(&u0, &cfg)
}

fn summary(config: &RunConfig, trace: &FlowTrace) -> Value {
    let mut s = serde_json::Map::new();
    s.insert("scenario".into(), json!(config.scenario.name()));
    s.insert("dt".into(), json!(trace.config.dt));
    s.insert("checkpoints".into(), json!(trace.checkpoints.len()));
    for name in &config.diagnostics {
        let v = match name.as_str() {
            "energy_check" => serde_json::to_value(global_energy_check(trace, ENERGY_CHECK_C)).unwrap(),
            "one_sided" => match one_sided_monitor(trace, config.delta, 1.0) {
                Ok(r) => json!({
                    "holds": r.holds(),
                    "initial_sup_v": r.initial_sup_v,
                    "tolerance": r.tolerance,
                    "max_increase": r.max_increase,
                    "first_violation": r.first_violation,
                    "blow_up": r.blow_up,
                }),
                Err(e) => json!({ "error": e.to_string() }),
            },
            "weak_residual" => match weak_residual(trace, 8) {
                Ok(r) => json!({ "tests": 8, "residual": r }),
                Err(e) => json!({ "error": e.to_string() }),
            },
            "penalty" => match penalty_integral(trace, trace.config.lambda, trace.config.kappa) {
                Ok(p) => json!({ "lambda": trace.config.lambda, "penalty_integral": p }),
                Err(e) => json!({ "error": e.to_string() }),
            },
            _ => Value::Null,
        };
        s.insert(name.clone(), v);
    }
    Value::Object(s)
}

fn write_run(out: &mut Outputs, config_bytes: &[u8], config: &RunConfig, trace: &FlowTrace) -> Result<()> {
    out.write("config.cfg", config_bytes)?;
    out.write("steps.ndjson", &ndjson(trace.log.iter().map(StepLog::to_ndjson)))?;
    for (k, u) in trace.checkpoints.iter().enumerate() {
        out.write(&format!("snapshots/field_{k:05}.txt"), &snapshot_bytes(u))?;
    }
    let s = serde_json::to_string_pretty(&summary(config, trace)).expect("summary serializes");
    out.write("summary.json", s.as_bytes())
}

/// `run --config <path> --out <dir>`.
pub fn run_command(config_path: &Path, out_dir: &Path) -> Result<Manifest> {
    let started = Instant::now();
    let text = read_text(config_path)?;
    let config = parse_config(&text)?;
    let mut out = Outputs::new(out_dir)?;
    let trace = execute(&config)?;
    write_run(&mut out, text.as_bytes(), &config, &trace)?;
    let (status, message) = match &trace.failure {
        None => (RunStatus::Ok, None),
        Some(f) => (RunStatus::NumericalFailure, Some(format!("step {} at t = {}: {}", f.step, f.t, f.message))),
    };
    out.finish("run", sha256_hex(text.as_bytes()), started, status, message)
}

/// Reloads a trace written by [`run_command`].
pub fn load_trace(dir: &Path) -> Result<FlowTrace> {
    let text = read_text(&dir.join("config.cfg"))?;
    let config = parse_config(&text)?;
    let grid = Arc::new(build_grid(config.domain.clone())?);
    let cfg = config.flow_config(&grid);
    let snap_dir = dir.join("snapshots");
    let mut names: Vec<PathBuf> = fs::read_dir(&snap_dir)
        .map_err(|e| Error::io(&snap_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    names.sort();
    let mut checkpoints = Vec::with_capacity(names.len());
    for p in &names {
        let f = fs::File::open(p).map_err(|e| Error::io(p, e))?;
        checkpoints.push(SphereField::read_snapshot(grid.clone(), BufReader::new(f))?);
    }
    let mut trace = FlowTrace::from_checkpoints(cfg, checkpoints)?;
    let steps = dir.join("steps.ndjson");
    if steps.exists() {
        for (i, line) in read_text(&steps)?.lines().enumerate() {
            let entry: StepLog = serde_json::from_str(line)
                .map_err(|e| Error::Parse(format!("steps.ndjson line {}: {e}", i + 1)))?;
            trace.log.push(entry);
        }
    }
    Ok(trace)
}

/// Evaluates every anchor line against `trace`.
pub fn diagnose_records(trace: &FlowTrace, anchors_text: &str) -> Result<Vec<ReportRecord>> {
    let anchors = parse_anchors(anchors_text)?;
    let mut records = Vec::new();
    let mut h0: Option<SphereField> = None;
    for a in &anchors {
        let mut z0 = vec![a.t0];
        z0.extend(&a.x0);
        match a.kind.as_str() {
            "monotonicity" => {
                let opts = MonotonicityOptions {
                    exponent: a.exponent.unwrap_or(MonotonicityOptions::default().exponent),
                    ..MonotonicityOptions::default()
                };
                let rep = monotonicity_check(trace, a.t0, &a.x0, &a.radii, &opts)?;
                records.extend(rep.records());
            }
            "density" => {
                for &r in &a.radii {
                    let v = scaled_energy_density(trace, a.t0, &a.x0, r)?;
                    records.push(ReportRecord {
                        kind: "density".into(),
                        z0: z0.clone(),
                        r,
                        lhs: v,
                        rhs: a.eps0.first().copied().unwrap_or(f64::NAN),
                        defect: None,
                        fitted_c: v,
                    });
                }
            }
            "reverse_poincare" => {
                for &r in &a.radii {
                    let rep = reverse_poincare_check(trace, a.t0, &a.x0, r, &MeanTarget::SpatialMean)?;
                    records.push(rep.record());
                }
            }
            "hybrid" => {
                if h0.is_none() {
                    h0 = Some(harmonic_extension(trace.initial(), &HarmonicOptions::default())?.field);
                }
                let eps = if a.eps0.is_empty() { vec![0.4, 0.2, 0.1] } else { a.eps0.clone() };
                for &r in &a.radii {
                    let rep = hybrid_check(trace, a.t0, &a.x0, r, &eps, h0.as_ref().unwrap())?;
                    records.extend(rep.records());
                }
            }
            "singular_set" => {
                let eps = if a.eps0.is_empty() { vec![1.0] } else { a.eps0.clone() };
                for e in eps {
                    let s = singular_set(trace, e, &a.radii)?;
                    records.push(ReportRecord {
                        kind: format!("singular_set eps0={e}"),
                        z0: Vec::new(),
                        r: s.radii[0],
                        lhs: s.points.len() as f64,
                        rhs: s.space_time_points as f64,
                        defect: None,
                        fitted_c: s.flagged_fraction,
                    });
                }
            }
            other => return Err(Error::Parse(format!("unknown anchor kind {other}"))),
        }
    }
    Ok(records)
}

/// `diagnose --trace <dir> --anchors <path> --out <dir>`.
pub fn diagnose_command(trace_dir: &Path, anchors_path: &Path, out_dir: &Path) -> Result<Manifest> {
    let started = Instant::now();
    let anchors_text = read_text(anchors_path)?;
    let trace = load_trace(trace_dir)?;
    let records = diagnose_records(&trace, &anchors_text)?;
    let mut out = Outputs::new(out_dir)?;
    out.write("reports.ndjson", &ndjson(records.iter().map(ReportRecord::to_ndjson)))?;
    let config = read_text(&trace_dir.join("config.cfg"))?;
    let mut digest_input = config.into_bytes();
    digest_input.extend_from_slice(anchors_text.as_bytes());
    out.finish("diagnose", sha256_hex(&digest_input), started, RunStatus::Ok, None)
}

/// `sweep --config <path> --lambda 1e2,1e3,1e4 --out <dir>`: one GLHF run
/// per lambda (shared time step), penalty integrals, and the distance to the
/// projected flow when the initial data is sphere-valued.
pub fn sweep_command(config_path: &Path, lambdas: &[f64], out_dir: &Path) -> Result<Manifest> {
    let started = Instant::now();
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda ladder".into()));
    }
    let text = read_text(config_path)?;
    let base = parse_config(&text)?;
    let grid = Arc::new(build_grid(base.domain.clone())?);
    let u0 = base.scenario.generate(&grid, base.target_dim)?;
    // common step: the smallest admissible over the ladder
    let dt = match base.dt {
        StepChoice::Fixed(dt) => dt,
        StepChoice::Auto => lambdas
            .iter()
            .map(|&l| {
                RunConfig {
                    lambda: l,
                    scheme: Scheme::Glhf,
                    ..base.clone()
                }
                .flow_config(&grid)
                .dt
            })
            .fold(f64::INFINITY, f64::min),
    };
    let mut out = Outputs::new(out_dir)?;
    out.write("config.cfg", text.as_bytes())?;
    let reference = if u0.sphere_defect() <= 1e-12 {
        let mut cfg = base.flow_config(&grid);
        cfg.scheme = Scheme::ProjectedHhf;
        cfg.dt = dt;
        Some(run_flow(&u0, &cfg)?)
    } else {
        None
    };
    let mut lines = Vec::new();
    let mut samples = Vec::new();
    let mut failure = None;
    for &lambda in lambdas {
        let config = RunConfig {
            lambda,
            scheme: Scheme::Glhf,
            dt: StepChoice::Fixed(dt),
            ..base.clone()
        };
        let cfg = config.flow_config(&grid);
        let trace = run_flow(&u0, &cfg)?;
        if let Some(f) = &trace.failure {
            failure.get_or_insert_with(|| format!("lambda = {lambda}: {}", f.message));
        }
        let pen = penalty_integral(&trace, lambda, cfg.kappa)?;
        samples.push((lambda, pen));
        let dist = match &reference {
            Some(r) if trace.failure.is_none() && r.failure.is_none() => Some(trace_l2_distance(&trace, r)?),
            _ => None,
        };
        lines.push(
            json!({ "lambda": lambda, "dt": dt, "penalty": json_f64(pen), "l2_distance": dist.map(json_f64) })
                .to_string(),
        );
        let sub = format!("lambda_{lambda:e}");
        let mut sub_out = Outputs::new(&out.root.join(&sub))?;
        let sub_cfg = format!("{}\n# sweep override\n", strip_keys(&text, &["lambda", "scheme", "dt"]))
            + &format!("lambda = {lambda}\nscheme = glhf\ndt = {dt}\n");
        write_run(&mut sub_out, sub_cfg.as_bytes(), &config, &trace)?;
        sub_out.finish("run", sha256_hex(sub_cfg.as_bytes()), started, RunStatus::Ok, None)?;
        out.files.push(format!("{sub}/"));
    }
    out.write("sweep.ndjson", &ndjson(lines))?;
    let decreasing = samples.windows(2).all(|w| w[1].1 < w[0].1);
    let summary = json!({
        "lambdas": lambdas,
        "penalty_strictly_decreasing": decreasing,
        "penalty_decay_exponent": penalty_decay_exponent(&samples).ok().map(json_f64),
    });
    out.write("summary.json", serde_json::to_string_pretty(&summary).unwrap().as_bytes())?;
    let status = if failure.is_some() { RunStatus::NumericalFailure } else { RunStatus::Ok };
    out.finish("sweep", sha256_hex(text.as_bytes()), started, status, failure)
}

fn strip_keys(text: &str, keys: &[&str]) -> String {
    text.lines()
        .filter(|l| {
            let k = l.split('#').next().unwrap_or("").split('=').next().unwrap_or("").trim();
            !keys.contains(&k)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Writes records as NDJSON to any writer.
pub fn write_records<W: Write>(w: W, records: &[ReportRecord]) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    for r in records {
        writeln!(w, "{}", r.to_ndjson())?;
    }
    w.flush()
}
