use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use ricci_lab::flow::{
    check_comparison_chain, check_decay_estimate, check_f_ode_inequality, check_pinching_preserved, f_sigma_series,
    integrate_flow, write_trajectory_csv, FlowTrajectory, TrajectoryManifest,
};
use ricci_lab::geom::{ball_volume, collapse_radius, BallOptions};
use ricci_lab::rvol::{check_pointwise_monotone_and_limit, forward_reduced_volume, write_volume_csv, PointwiseOptions};
use ricci_lab::singularity::{classify_singularity, kappa_noncollapse_check, select_blowup_times, ClassifyOptions};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::plot::{Chart, Series};
use crate::scenario::{BackgroundSpec, EpsilonSpec, Scenario, Task};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskRecord {
    pub index: usize,
    pub kind: String,
    pub status: TaskStatus,
    pub error: Option<String>,
    pub outputs: Vec<String>,
    pub summary: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario_name: String,
    pub scenario_hash: String,
    pub started: String,
    pub finished: String,
    pub tasks: Vec<TaskRecord>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn failed_tasks(&self) -> usize {
        self.tasks.iter().filter(|t| t.status == TaskStatus::Failed).count()
    }
}

struct Output {
    name: String,
    bytes: Vec<u8>,
}

struct Outcome {
    outputs: Vec<Output>,
    summary: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write-temp-then-rename inside the destination directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(".{}.tmp", path.file_name().and_then(|n| n.to_str()).unwrap_or("out")));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn json_bytes<S: Serialize>(v: &S) -> anyhow::Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

pub struct RunError {
    pub io: bool,
    pub error: anyhow::Error,
}

/// Executes every task of a validated scenario and writes the outputs and the manifest to `out_dir`.
pub fn run_scenario(scenario: &Scenario, scenario_bytes: &[u8], out_dir: &Path, jobs: usize) -> Result<RunManifest, RunError> {
    let io = |e: anyhow::Error| RunError { io: true, error: e };
    let started = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display())).map_err(io)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RunError { io: false, error: e.into() })?;

    let mut records: Vec<Option<TaskRecord>> = vec![None; scenario.tasks.len()];
    let mut files = Vec::new();
    let mut store = |index: usize, kind: &str, result: anyhow::Result<Outcome>, files: &mut Vec<FileRecord>| -> Result<(), RunError> {
        let rec = match result {
            Ok(o) => {
                let mut names = Vec::new();
                for out in &o.outputs {
                    let path = out_dir.join(&out.name);
                    write_atomic(&path, &out.bytes).with_context(|| format!("writing {}", path.display())).map_err(io)?;
                    files.push(FileRecord { path: out.name.clone(), sha256: sha256_hex(&out.bytes), bytes: out.bytes.len() as u64 });
                    names.push(out.name.clone());
                }
                TaskRecord { index, kind: kind.into(), status: TaskStatus::Ok, error: None, outputs: names, summary: o.summary }
            }
            Err(e) => TaskRecord {
                index,
                kind: kind.into(),
                status: TaskStatus::Failed,
                error: Some(format!("{e:#}")),
                outputs: Vec::new(),
                summary: Value::Null,
            },
        };
        records[index] = Some(rec);
        Ok(())
    };

    // the flow runs first; everything that reads the trajectory depends on it
    let model = scenario.model().map_err(|e| RunError { io: false, error: e })?;
    let g0 = scenario.initial_metric().map_err(|e| RunError { io: false, error: e })?;
    let mut flow: Option<anyhow::Result<FlowTrajectory<f64>>> = None;
    if let Some(fi) = scenario.tasks.iter().position(|t| matches!(t, Task::Flow)) {
        let traj = pool.install(|| guarded(|| Ok(integrate_flow(&model, &g0, &scenario.controls())?)));
        let outcome = match &traj {
            Ok(t) => flow_outputs(scenario, fi, t),
            Err(e) => Err(anyhow::anyhow!("{e:#}")),
        };
        store(fi, "flow", outcome, &mut files)?;
        for (i, t) in scenario.tasks.iter().enumerate() {
            if i != fi && matches!(t, Task::Flow) {
                let again = match &traj {
                    Ok(t) => flow_outputs(scenario, i, t),
                    Err(e) => Err(anyhow::anyhow!("{e:#}")),
                };
                store(i, "flow", again, &mut files)?;
            }
        }
        flow = Some(traj);
    }

    let pending: Vec<(usize, &Task)> =
        scenario.tasks.iter().enumerate().filter(|(_, t)| !matches!(t, Task::Flow)).collect();
    let results: Vec<(usize, anyhow::Result<Outcome>)> = pool.install(|| {
        pending
            .par_iter()
            .map(|(i, task)| {
                let traj = match (&flow, task.needs_flow()) {
                    (Some(Ok(t)), _) => Some(t),
                    (Some(Err(e)), true) => return (*i, Err(anyhow::anyhow!("flow task failed: {e:#}"))),
                    _ => None,
                };
                (*i, guarded(|| run_task(scenario, *i, task, traj)))
            })
            .collect()
    });
    for (i, r) in results {
        store(i, scenario.tasks[i].kind(), r, &mut files)?;
    }

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_name: scenario.name.clone(),
        scenario_hash: sha256_hex(scenario_bytes),
        started,
        finished: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        tasks: records.into_iter().map(|r| r.expect("every task recorded")).collect(),
        files,
    };
    let bytes = json_bytes(&manifest).map_err(io)?;
    write_atomic(&out_dir.join(MANIFEST_NAME), &bytes).context("writing manifest").map_err(io)?;
    Ok(manifest)
}

/// Turns a panic inside a task into a task failure.
fn guarded<R>(f: impl FnOnce() -> anyhow::Result<R>) -> anyhow::Result<R> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(anyhow::anyhow!("task panicked: {msg}"))
        }
    }
}

fn stem(index: usize, kind: &str) -> String {
    format!("{index:02}-{kind}")
}

fn flow_outputs(scenario: &Scenario, index: usize, traj: &FlowTrajectory<f64>) -> anyhow::Result<Outcome> {
    let s = stem(index, "flow");
    let eps = scenario.csv_epsilon();
    let sigma = eps * eps;
    let mut csv = Vec::new();
    write_trajectory_csv(traj, sigma, eps, &mut csv)?;
    let mut outputs = vec![
        Output { name: format!("{s}.csv"), bytes: csv },
        Output { name: format!("{s}.json"), bytes: json_bytes(&TrajectoryManifest::new(traj, sigma, eps))? },
    ];
    let positive = traj.times.iter().zip(traj.scalar_curvatures()).filter(|(t, r)| **t > 0.0 && *r > 0.0).count();
    if sigma > 0.0 && positive >= 2 {
        let f = f_sigma_series(traj, sigma);
        let (t, f): (Vec<f64>, Vec<f64>) = traj.times.iter().zip(&f).filter(|(t, f)| **t > 0.0 && f.is_finite()).unzip();
        let bound: Vec<f64> = t.iter().map(|t| (3.0 / (2.0 * t)).powf(sigma)).collect();
        let chart = Chart {
            title: "f_σ against the decay bound",
            x_label: "t",
            y_label: "f_σ",
            log_x: true,
            log_y: true,
            series: vec![
                Series { label: "f_σ(t)", color: "#1f77b4", x: t.clone(), y: f, dashed: false },
                Series { label: "(3/(2t))^σ", color: "#d62728", x: t, y: bound, dashed: true },
            ],
        };
        outputs.push(Output { name: format!("{s}-fsigma.svg"), bytes: chart.render().into_bytes() });
    }
    let rm = traj.rm_norms();
    let (label, x, y): (&str, Vec<f64>, Vec<f64>) = match traj.t_est {
        Some(te) => {
            let (x, y) = traj.times.iter().zip(&rm).filter(|(t, _)| **t < te).map(|(t, r)| (te - t, (te - t) * r)).unzip();
            ("(T−t)|Rm|", x, y)
        }
        None => {
            let (x, y) = traj.times.iter().zip(&rm).filter(|(t, _)| **t > 0.0).map(|(t, r)| (*t, t * r)).unzip();
            ("t|Rm|", x, y)
        }
    };
    let chart = Chart {
        title: "curvature scale diagnostic",
        x_label: if traj.t_est.is_some() { "T − t" } else { "t" },
        y_label: label,
        log_x: true,
        log_y: false,
        series: vec![Series { label, color: "#2ca02c", x, y, dashed: false }],
    };
    outputs.push(Output { name: format!("{s}-rm.svg"), bytes: chart.render().into_bytes() });
    Ok(Outcome {
        outputs,
        summary: json!({
            "termination": traj.termination,
            "t_est": traj.t_est,
            "samples": traj.len(),
            "t_last": traj.t_last(),
        }),
    })
}

fn epsilon_of(scenario: &Scenario, spec: Option<EpsilonSpec>) -> anyhow::Result<f64> {
    scenario
        .resolve_epsilon(spec.unwrap_or(EpsilonSpec::Auto(crate::scenario::AutoKeyword::Auto)))
        .ok_or_else(|| anyhow::anyhow!("pinching precondition unsatisfiable"))
}

fn run_task(scenario: &Scenario, index: usize, task: &Task, traj: Option<&FlowTrajectory<f64>>) -> anyhow::Result<Outcome> {
    let s = stem(index, task.kind());
    let need = || traj.ok_or_else(|| anyhow::anyhow!("requires the flow task"));
    let single = |summary: Value| -> anyhow::Result<Outcome> {
        Ok(Outcome { outputs: vec![Output { name: format!("{s}.json"), bytes: json_bytes(&summary)? }], summary })
    };
    match task {
        Task::Flow => unreachable!("flow runs first"),
        Task::Pinching { epsilon } => {
            let eps = epsilon_of(scenario, Some(*epsilon))?;
            let margin = check_pinching_preserved(need()?, eps)?;
            single(json!({ "epsilon": eps, "min_normalized_margin": margin, "pass": margin >= -1e-8 }))
        }
        Task::Decay { omega, epsilon } => {
            let t = need()?;
            let eps = epsilon_of(scenario, *epsilon)?;
            let ratio = check_decay_estimate(t, eps, *omega)?;
            let ineq = check_f_ode_inequality(t, eps)?;
            let chain = check_comparison_chain(t, eps, *omega)?;
            single(json!({
                "epsilon": eps,
                "sigma": eps * eps,
                "omega": omega,
                "decay_ratio": ratio,
                "f_inequality": ineq,
                "comparison_chain": chain,
                "pass": ratio <= 1.0 + 1e-6 && ineq <= 1e-6,
            }))
        }
        Task::Classify => {
            let v = classify_singularity(need()?, &ClassifyOptions::default())?;
            single(serde_json::to_value(v)?)
        }
        Task::Blowup { gammas } => {
            let b = select_blowup_times(need()?, gammas)?;
            single(json!({
                "quantity": b.quantity,
                "gammas": b.gammas,
                "base_times": b.base_times,
                "base_indices": b.base_indices,
                "scales": b.scales,
            }))
        }
        Task::Noncollapse { t0, r, kappa } => {
            let rep = kappa_noncollapse_check(need()?, *t0, *r, *kappa, &BallOptions::default())?;
            let mut v = serde_json::to_value(rep)?;
            v["diagnosis"] = json!(rep.diagnosis());
            single(v)
        }
        Task::Ballvolume { r_max, grid } => {
            let curve = ball_volume(&scenario.model()?, &scenario.initial_metric()?, *r_max, *grid, &BallOptions::default())?;
            let mut csv = String::from("r,volume,ratio\n");
            for ((r, v), q) in curve.radii.iter().zip(&curve.volumes).zip(curve.ratios()) {
                csv.push_str(&format!("{r:e},{v:e},{q:e}\n"));
            }
            let summary = json!({
                "r_max": r_max,
                "conjugate_radius": curve.conjugate_radius,
                "quadrature_error": curve.quadrature_error,
                "volume_at_r_max": curve.volumes.last(),
            });
            Ok(Outcome {
                outputs: vec![
                    Output { name: format!("{s}.csv"), bytes: csv.into_bytes() },
                    Output { name: format!("{s}.json"), bytes: json_bytes(&summary)? },
                ],
                summary,
            })
        }
        Task::Collapse { eps0, r_cap } => {
            let r = collapse_radius(&scenario.model()?, &scenario.initial_metric()?, *eps0, *r_cap, &BallOptions::default())?;
            single(json!({ "eps0": eps0, "r_cap": r_cap, "collapse_radius": r }))
        }
        Task::Rvol { background, taus, quadrature } => {
            let bg = Scenario::background(background, traj)?;
            let opts = quadrature.options();
            let est = taus.iter().map(|t| forward_reduced_volume(*t, &bg, &opts)).collect::<Result<Vec<_>, _>>()?;
            let mut csv = Vec::new();
            write_volume_csv(&est, &mut csv)?;
            let values: Vec<f64> = est.iter().map(|e| e.value).collect();
            let errors: Vec<f64> = est.iter().map(|e| e.quadrature_error).collect();
            let mut order: Vec<usize> = (0..est.len()).collect();
            order.sort_by(|a, b| taus[*a].total_cmp(&taus[*b]));
            let monotone =
                order.windows(2).all(|w| values[w[1]] <= values[w[0]] + errors[w[0]] + errors[w[1]]);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let spread = values.iter().fold(0.0f64, |m, v| m.max((v - mean).abs())) / mean;
            let flat = matches!(background, BackgroundSpec::StaticFlat { .. });
            let mut summary = json!({
                "background": background,
                "taus": taus,
                "values": values,
                "errors": errors,
                "truncated_rays": est.iter().map(|e| e.truncated_rays).collect::<Vec<_>>(),
                "monotone_non_increasing": monotone,
                "constancy_spread": spread,
            });
            if let BackgroundSpec::StaticFlat { dim } = background {
                let exact = 2f64.powi(*dim as i32) * std::f64::consts::PI.powf(*dim as f64 / 2.0);
                summary["flat_value"] = json!(exact);
                summary["constancy_pass"] = json!(spread <= 5e-3 && values.iter().all(|v| (v / exact - 1.0).abs() <= 1e-2));
            }
            let fan: Vec<Value> = est
                .iter()
                .map(|e| json!({ "tau": e.tau, "domain_cutoff": e.domain_cutoff, "rays": e.fan }))
                .collect();
            let (x, y): (Vec<f64>, Vec<f64>) = order.iter().map(|i| (taus[*i], values[*i])).unzip();
            let chart = Chart {
                title: if flat { "reduced volume (flat)" } else { "reduced volume" },
                x_label: "τ",
                y_label: "V₊(τ)",
                log_x: x.first().is_some_and(|a| *a > 0.0) && x.last().zip(x.first()).is_some_and(|(b, a)| b / a > 20.0),
                log_y: false,
                series: vec![Series { label: "V₊", color: "#9467bd", x, y, dashed: false }],
            };
            Ok(Outcome {
                outputs: vec![
                    Output { name: format!("{s}.csv"), bytes: csv },
                    Output { name: format!("{s}-fan.json"), bytes: json_bytes(&fan)? },
                    Output { name: format!("{s}.svg"), bytes: chart.render().into_bytes() },
                    Output { name: format!("{s}.json"), bytes: json_bytes(&summary)? },
                ],
                summary,
            })
        }
        Task::Limitcheck { background, vs, taus } => {
            let bg = Scenario::background(background, traj)?;
            let reports = vs
                .iter()
                .map(|v| check_pointwise_monotone_and_limit(v, &bg, taus, &PointwiseOptions::default()))
                .collect::<Result<Vec<_>, _>>()?;
            let pass = reports.iter().all(|r| r.monotone && r.limit_ok);
            single(json!({ "background": background, "vs": vs, "reports": reports, "pass": pass }))
        }
    }
}

/// Directory holding the manifest for a `report` argument (file or directory).
pub fn manifest_path(arg: &Path) -> PathBuf {
    if arg.is_dir() {
        arg.join(MANIFEST_NAME)
    } else {
        arg.to_path_buf()
    }
}
