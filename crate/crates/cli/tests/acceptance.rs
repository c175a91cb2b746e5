//! End-to-end acceptance suite: one line per criterion, non-zero exit on any failure.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use ricci_lab::flow::{
    check_comparison_chain, check_decay_estimate, check_f_ode_inequality, check_pinching_preserved,
    check_scalar_evolution, fit_pinching_improvement, fit_pinching_samples, integrate_flow, FlowControls,
    FlowTrajectory, Termination,
};
use ricci_lab::geom::{
    ball_volume, collapse_radius, compute_curvature, f_sigma, max_epsilon, BallOptions, FrameMetric, HomogeneousModel,
};
use ricci_lab::rvol::variational::{minimize_lplus_length, sinusoidal_perturbation, MinimizeOptions};
use ricci_lab::rvol::{
    check_pointwise_monotone_and_limit, expander_residual, forward_reduced_volume, lplus_field, shoot_lplus_geodesic,
    BvpOptions, FlowBackground, PointwiseOptions, ShootOptions, VolumeOptions,
};
use ricci_lab::singularity::{classify_singularity, rescale_trajectory, ClassifyOptions, SingularityKind};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn su2_flow(g: &FrameMetric<f64>) -> FlowTrajectory<f64> {
    integrate_flow(&HomogeneousModel::su2(), g, &FlowControls::default()).expect("SU(2) flow")
}

/// Rotation from a random unit quaternion.
fn rotation(r: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let mut q = [0.0f64; 4];
    for x in &mut q {
        *x = r.gen_range(-1.0..1.0);
    }
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|c| c / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Random pinched SU(2) metrics; every second one is rotated off the Milnor axes.
fn pinched_su2_metrics(count: usize, seed: u64) -> Vec<FrameMetric<f64>> {
    let mut r = rng(seed);
    let model = HomogeneousModel::su2();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let d: [f64; 3] = std::array::from_fn(|_| r.gen_range(-0.35f64..0.35).exp());
        let g = if out.len() % 2 == 0 {
            FrameMetric::diagonal(d).unwrap()
        } else {
            let q = rotation(&mut r);
            let e: [[f64; 3]; 3] =
                std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| q[i][k] * d[k] * q[j][k]).sum()));
            FrameMetric::new(e).unwrap()
        };
        if max_epsilon(&compute_curvature(&model, &g)).is_some() {
            out.push(g);
        }
    }
    out
}

fn pinched_flows() -> &'static [(f64, FlowTrajectory<f64>)] {
    static FLOWS: std::sync::OnceLock<Vec<(f64, FlowTrajectory<f64>)>> = std::sync::OnceLock::new();
    FLOWS.get_or_init(|| {
        let model = HomogeneousModel::su2();
        pinched_su2_metrics(100, 4)
            .par_iter()
            .map(|g| (max_epsilon(&compute_curvature(&model, g)).unwrap(), su2_flow(g)))
            .collect()
    })
}

/// Principal Ricci curvatures of `diag(d)` from Milnor's table, written out per axis.
fn milnor_oracle(lambda: [f64; 3], d: [f64; 3]) -> [f64; 3] {
    let [l1, l2, l3] = lambda;
    let [a, b, c] = d;
    let p = [l1 * (a / (b * c)).sqrt(), l2 * (b / (a * c)).sqrt(), l3 * (c / (a * b)).sqrt()];
    let s = 0.5 * (p[0] + p[1] + p[2]);
    let mu = [s - p[0], s - p[1], s - p[2]];
    [2.0 * mu[1] * mu[2], 2.0 * mu[0] * mu[2], 2.0 * mu[0] * mu[1]]
}

fn c01_curvature_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for (k, model) in [HomogeneousModel::su2(), HomogeneousModel::nil(), HomogeneousModel::sol()].iter().enumerate() {
        let mut r = rng(100 + k as u64);
        for _ in 0..1000 {
            let d: [f64; 3] = std::array::from_fn(|_| r.gen_range(-2.0f64..2.0).exp());
            let rep = compute_curvature(model, &FrameMetric::diagonal(d).unwrap());
            let exact = milnor_oracle(model.lambda, d);
            let scale = exact.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for i in 0..3 {
                worst = worst.max((rep.ricci_eigs[i] - exact[i]).abs() / scale);
            }
            // in dimension three the curvature tensor is determined by Ricci
            let rc2: f64 = exact.iter().map(|x| x * x).sum();
            let s: f64 = exact.iter().sum();
            let rm = (4.0 * rc2 - s * s).sqrt();
            worst = worst.max((rep.rm_norm - rm).abs() / scale);
        }
    }
    ensure(worst <= 1e-10, format!("3000 metrics, max relative error {worst:.2e} (limit 1e-10)"))
}

fn c02_round_exact() -> Outcome {
    let mut worst_a = 0.0f64;
    let mut worst_t = 0.0f64;
    let mut worst_s = 0.0f64;
    let mut kinds = true;
    for a0 in [1.0, 2.5] {
        let traj = su2_flow(&FrameMetric::diagonal([a0; 3]).unwrap());
        for (t, g) in traj.times.iter().zip(&traj.metrics) {
            let a = a0 - 4.0 * t;
            let e = g.entries();
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { a } else { 0.0 };
                    worst_a = worst_a.max((e[i][j] - expect).abs() / a);
                }
            }
        }
        worst_t = worst_t.max((traj.t_est.unwrap_or(f64::NAN) - a0 / 4.0).abs());
        let v = classify_singularity(&traj, &ClassifyOptions::default()).unwrap();
        kinds &= v.kind == SingularityKind::TypeI;
        worst_s = worst_s.max((v.statistic - 3f64.sqrt() / 2.0).abs());
    }
    ensure(
        worst_a <= 1e-8 && worst_t <= 1e-6 && kinds && worst_s <= 1e-4,
        format!("A(t) rel err {worst_a:.2e}, |T_est − A₀/4| {worst_t:.2e}, TypeI {kinds}, |stat − √3/2| {worst_s:.2e}"),
    )
}

fn c03_scalar_evolution() -> Outcome {
    let round = su2_flow(&FrameMetric::identity());
    let nil = integrate_flow(&HomogeneousModel::nil(), &FrameMetric::identity(), &FlowControls::until(1000.0)).unwrap();
    let mut worst = check_scalar_evolution(&round).unwrap().max(check_scalar_evolution(&nil).unwrap());
    for (_, t) in pinched_flows().iter().take(20) {
        worst = worst.max(check_scalar_evolution(t).unwrap());
    }
    ensure(worst <= 1e-6, format!("round, Nil and 20 pinched flows: max normalized residual {worst:.2e}"))
}

fn c04_pinching() -> Outcome {
    let flows = pinched_flows();
    let worst = flows.iter().map(|(e, t)| check_pinching_preserved(t, *e).unwrap()).fold(f64::INFINITY, f64::min);
    let extinct = flows.iter().filter(|(_, t)| t.termination == Termination::CurvatureBlowup).count();
    ensure(
        worst >= -1e-8 && extinct == flows.len(),
        format!("{} flows ({extinct} to extinction), min normalized margin {worst:.2e}", flows.len()),
    )
}

fn c05_decay() -> Outcome {
    let mut ratio = 0.0f64;
    let mut excess = f64::NEG_INFINITY;
    let mut y_bound = 0.0f64;
    for (e, t) in pinched_flows() {
        ratio = ratio.max(check_decay_estimate(t, *e, 0.0).unwrap());
        let c = check_comparison_chain(t, *e, 0.0).unwrap();
        excess = excess.max(c.max_f_excess);
        y_bound = y_bound.max(c.max_y_over_bound);
    }
    ensure(
        ratio <= 1.0 + 1e-6 && excess <= 1e-6 && y_bound <= 1.0 + 1e-6,
        format!("max f_σ(2t/3)^σ {ratio:.6}, max (f − y)/y {excess:.2e}, max y/bound {y_bound:.6}"),
    )
}

fn c06_f_inequality() -> Outcome {
    let worst = pinched_flows().iter().map(|(e, t)| check_f_ode_inequality(t, *e).unwrap()).fold(f64::NEG_INFINITY, f64::max);
    ensure(worst <= 1e-6, format!("max normalized f′ + (2/3)σ f^(1+1/σ) {worst:.2e}"))
}

fn c07_pinching_fit() -> Outcome {
    let times: Vec<f64> = (0..60).map(|i| i as f64 * 0.01).collect();
    let r: Vec<f64> = times.iter().map(|t| 10f64.powf(1.0 + t * 6.0)).collect();
    let ratio: Vec<f64> = r.iter().map(|r| 2.0 * r.powf(-0.3)).collect();
    let fit = fit_pinching_samples(&times, &r, &ratio).unwrap();
    let synth_ok = (fit.delta_hat - 0.3).abs() <= 1e-3 && (fit.c_hat - 2.0).abs() <= 1e-3;
    let mut deltas = vec![fit_pinching_improvement(&su2_flow(&FrameMetric::diagonal([1.2, 1.0, 0.9]).unwrap())).unwrap()];
    for (_, t) in pinched_flows().iter().take(10) {
        let f = fit_pinching_improvement(t).unwrap();
        if !f.exact_zero {
            deltas.push(f);
        }
    }
    let min_delta = deltas.iter().map(|f| f.delta_hat).fold(f64::INFINITY, f64::min);
    ensure(
        synth_ok && min_delta > 0.0,
        format!(
            "synthetic δ̂ {:.6} Ĉ {:.6}; {} real flows, min δ̂ {min_delta:.3}",
            fit.delta_hat,
            fit.c_hat,
            deltas.len()
        ),
    )
}

fn c08_nil() -> Outcome {
    let traj: FlowTrajectory<f64> = integrate_flow(&HomogeneousModel::nil(), &FrameMetric::identity(), &FlowControls::until(1000.0)).unwrap();
    let v = classify_singularity(&traj, &ClassifyOptions::default()).unwrap();
    let rejected = check_pinching_preserved(&traj, 0.1).is_err()
        && max_epsilon(&compute_curvature(&HomogeneousModel::<f64>::nil(), &FrameMetric::identity())).is_none();
    ensure(
        v.kind == SingularityKind::TypeIII && v.slope.abs() < 0.05 && rejected,
        format!("verdict {:?}, log-slope {:.2e}, pinching rejected {rejected}", v.kind, v.slope),
    )
}

fn c09_rescaling() -> Outcome {
    let sigma = 0.04;
    let mut worst = 0.0f64;
    let mut f_samples = 0;
    let mut same = true;
    let runs = [
        su2_flow(&FrameMetric::identity()),
        su2_flow(&FrameMetric::diagonal([1.2, 1.0, 0.9]).unwrap()),
        su2_flow(&FrameMetric::diagonal([1.4, 1.0, 0.8]).unwrap()),
        integrate_flow(&HomogeneousModel::nil(), &FrameMetric::identity(), &FlowControls::until(1000.0)).unwrap(),
    ];
    for traj in &runs {
        let base = classify_singularity(traj, &ClassifyOptions::default()).unwrap();
        for (k, q) in [(traj.len() / 3, 7.5), (traj.len() / 2, 0.02)] {
            let scaled = rescale_trajectory(traj, traj.times[k], q).unwrap();
            for (a, b) in traj.reports.iter().zip(&scaled.reports) {
                worst = worst.max(rel(b.scalar * q, a.scalar)).max(rel(b.rm_norm * q, a.rm_norm));
                // |E| is a difference of O(R) terms; below |E|/R ~ 1e-4 it carries fewer than 12 digits
                if a.scalar > 0.0 && a.traceless_norm_sq.sqrt() >= 1e-4 * a.scalar {
                    let (fa, fb) = (f_sigma(a, sigma).unwrap(), f_sigma(b, sigma).unwrap());
                    worst = worst.max(rel(fb, fa * q.powf(-sigma)));
                    f_samples += 1;
                }
            }
            same &= classify_singularity(&scaled, &ClassifyOptions::default()).unwrap().kind == base.kind;
        }
    }
    ensure(
        worst <= 1e-10 && same && f_samples > 0,
        format!("max relative deviation {worst:.2e} ({f_samples} f_σ samples), verdicts invariant {same}"),
    )
}

fn c10_balls() -> Outcome {
    let grid = 64;
    let r_max = 3.5;
    let c = ball_volume(&HomogeneousModel::su2(), &FrameMetric::identity(), r_max, grid, &BallOptions::default()).unwrap();
    let mut worst = 0.0f64;
    for (r, v) in c.radii.iter().zip(&c.volumes) {
        if *r < PI {
            worst = worst.max((v - (2.0 * PI * r - PI * (2.0 * r).sin())).abs());
        }
    }
    let step = r_max / grid as f64;
    let conj = c.conjugate_radius.unwrap_or(f64::NAN);
    let flat = collapse_radius(&HomogeneousModel::abelian(), &FrameMetric::identity(), 0.1, 10.0, &BallOptions::default()).unwrap();
    ensure(
        worst <= 1e-6 && (conj - PI).abs() <= step && flat.is_none(),
        format!("max |Vol − (2πr − π sin 2r)| {worst:.2e}, conjugate radius {conj:.8}, flat collapse radius {flat:?}"),
    )
}

fn c11_flat_volume() -> Outcome {
    let exact = 8.0 * PI.powf(1.5);
    let bg = FlowBackground::flat(3);
    let values: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|t| forward_reduced_volume(*t, &bg, &VolumeOptions::default()).unwrap().value)
        .collect();
    let worst = values.iter().map(|v| rel(*v, exact)).fold(0.0, f64::max);
    let mean = values.iter().sum::<f64>() / 3.0;
    let spread = (values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values.iter().cloned().fold(f64::INFINITY, f64::min)) / mean;
    ensure(
        worst <= 1e-2 && spread <= 5e-3,
        format!("max |V₊/8π^(3/2) − 1| {worst:.2e}, spread {spread:.2e}"),
    )
}

fn c12_pointwise() -> Outcome {
    let mut worst = 0.0f64;
    let mut flat_ok = true;
    for v in [0.0, 0.5, 1.0] {
        let rep = check_pointwise_monotone_and_limit(&[v, 0.0, 0.0], &FlowBackground::flat(3), &[1e-3, 0.1, 1.0], &PointwiseOptions::default()).unwrap();
        worst = worst.max(rep.limit_relative_error);
        flat_ok &= rep.monotone && rel(rep.limit_target, 8.0 * (v * v).exp()) < 1e-14;
    }
    let grid = [1e-3, 0.01, 0.03, 0.06, 0.1, 0.15, 0.2];
    let mut round_ok = true;
    let mut max_inc = f64::NEG_INFINITY;
    for v in [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.3, -0.6, 0.2], [1.0, 0.0, 0.0]] {
        let rep = check_pointwise_monotone_and_limit(&v, &FlowBackground::round(1.0), &grid, &PointwiseOptions::default()).unwrap();
        round_ok &= rep.monotone;
        max_inc = max_inc.max(rep.max_relative_increase);
    }
    ensure(
        worst <= 1e-2 && flat_ok && round_ok,
        format!("flat limit max rel err {worst:.2e}; round max relative step increase {max_inc:.2e}"),
    )
}

fn c13_monotone() -> Outcome {
    let taus = [0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.13, 0.16, 0.2];
    let bg = FlowBackground::round(1.0);
    let est: Vec<_> = taus.iter().map(|t| forward_reduced_volume(*t, &bg, &VolumeOptions::default()).unwrap()).collect();
    let mut worst = f64::NEG_INFINITY;
    for w in est.windows(2) {
        worst = worst.max(w[1].value - w[0].value - w[0].quadrature_error - w[1].quadrature_error);
    }
    ensure(
        worst <= 0.0,
        format!(
            "V₊ from {:.4} to {:.4}; worst increase beyond combined error {worst:.2e}",
            est[0].value,
            est[est.len() - 1].value
        ),
    )
}

fn c14_minimization() -> Outcome {
    let numeric = FlowBackground::numeric(su2_flow(&FrameMetric::diagonal([1.2, 1.0, 0.9]).unwrap()));
    let cases = [
        ("flat", FlowBackground::flat(3), 1.0, (0.1, 1.0)),
        ("round", FlowBackground::round(1.0), 0.6, (0.03, 0.2)),
        ("numeric SU(2)", numeric, 0.6, (0.03, 0.2)),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, (name, bg, vmax, (t0, t1))) in cases.iter().enumerate() {
        let mut r = rng(1400 + k as u64);
        let draws: Vec<([f64; 3], f64, [f64; 3])> = (0..50)
            .map(|_| {
                (
                    std::array::from_fn(|_| r.gen_range(-vmax..*vmax)),
                    r.gen_range(*t0..*t1),
                    std::array::from_fn(|_| r.gen_range(-0.1..0.1)),
                )
            })
            .collect();
        let worst = draws
            .par_iter()
            .map(|(v, t, dir)| {
                let path = shoot_lplus_geodesic(v, *t, bg, &ShootOptions { steps: 64 }).unwrap();
                let pert = sinusoidal_perturbation(64, dir, 1.0);
                let m = minimize_lplus_length(bg, &path, &pert, &MinimizeOptions::default()).unwrap();
                rel(m.length, path.length)
            })
            .reduce(|| 0.0, f64::max);
        ok &= worst <= 1e-3;
        parts.push(format!("{name} {worst:.2e}"));
    }
    ensure(ok, format!("max relative L₊ gap over 50 draws: {}", parts.join(", ")))
}

fn c15_expander() -> Outcome {
    let bg = FlowBackground::flat(3);
    let base = lplus_field(&bg, 0.5, 0.1, 2, &BvpOptions::default()).unwrap();
    let with = |delta: f64| {
        let mut f = base.clone();
        for i in 0..f.len() {
            let r2: f64 = f.point(i).iter().map(|x| x * x).sum();
            f.values[i] += delta * r2 * r2;
        }
        expander_residual(&bg, &f, 1e-3).unwrap().residual
    };
    let r0 = expander_residual(&bg, &base, 1e-3).unwrap().residual;
    let (r1, r2, r4) = (with(1e-3), with(2e-3), with(4e-3));
    let (q1, q2) = (r2 / r1, r4 / r2);
    ensure(
        r0 <= 1e-6 && (q1 / 2.0 - 1.0).abs() <= 0.1 && (q2 / 2.0 - 1.0).abs() <= 0.1,
        format!("residual {r0:.2e}; doubling the quartic scales the residual by {q1:.4} and {q2:.4}"),
    )
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run_demo_set(out: &Path, jobs: &str) -> Result<(), String> {
    let mut entries: Vec<PathBuf> = fs::read_dir(demo_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err("no demo scenarios".into());
    }
    for s in entries {
        let name = s.file_stem().unwrap().to_string_lossy().into_owned();
        let o = Command::new(env!("CARGO_BIN_EXE_ricci-lab"))
            .args(["run", "--jobs", jobs, "--scenario"])
            .arg(&s)
            .arg("--out")
            .arg(out.join(&name))
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{name}: exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
        }
    }
    Ok(())
}

fn data_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for d in fs::read_dir(root).unwrap() {
        let d = d.unwrap().path();
        for f in fs::read_dir(&d).unwrap() {
            let f = f.unwrap().path();
            if f.file_name().is_some_and(|n| n != "manifest.json") {
                out.push(f.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn c16_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_demo_set(&a, "1")?;
    run_demo_set(&b, "4")?;
    let (fa, fb) = (data_files(&a), data_files(&b));
    if fa != fb {
        return Err("runs produced different file sets".into());
    }
    let differing: Vec<String> =
        fa.iter().filter(|p| fs::read(a.join(p)).ok() != fs::read(b.join(p)).ok()).map(|p| p.display().to_string()).collect();
    ensure(
        differing.is_empty() && !fa.is_empty(),
        format!("{} data files compared, {} differ {:?}", fa.len(), differing.len(), differing),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 16] = [
    (1, "curvature oracle", c01_curvature_oracle),
    (2, "round-sphere exact flow", c02_round_exact),
    (3, "scalar evolution", c03_scalar_evolution),
    (4, "pinching preservation", c04_pinching),
    (5, "decay estimate and comparison chain", c05_decay),
    (6, "f-inequality", c06_f_inequality),
    (7, "pinching improvement fit", c07_pinching_fit),
    (8, "Nil flow", c08_nil),
    (9, "rescaling laws", c09_rescaling),
    (10, "ball volumes", c10_balls),
    (11, "flat forward reduced volume", c11_flat_volume),
    (12, "pointwise limit and monotonicity", c12_pointwise),
    (13, "reduced volume monotonicity", c13_monotone),
    (14, "shooting vs minimization", c14_minimization),
    (15, "expander residual", c15_expander),
    (16, "CLI determinism", c16_determinism),
];

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<&Criterion> = CRITERIA
        .iter()
        .filter(|(n, name, _)| filter.is_empty() || filter.iter().any(|f| name.contains(f.as_str()) || n.to_string() == *f))
        .collect();
    let results: Vec<(u32, &str, Outcome, f64)> = selected
        .par_iter()
        .map(|(n, name, f)| {
            let start = Instant::now();
            let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
                Err(p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into()))
            });
            (*n, *name, r, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut failed = 0;
    for (n, name, r, secs) in &results {
        match r {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
