use super::*;
use crate::error::LabError;
use crate::flow::{f_sigma_series, integrate_flow, FlowControls, FlowTrajectory};
use crate::geom::{BallOptions, FrameMetric, HomogeneousModel};

fn run(model: HomogeneousModel<f64>, d: [f64; 3], controls: FlowControls<f64>) -> FlowTrajectory<f64> {
    integrate_flow(&model, &FrameMetric::diagonal(d).unwrap(), &controls).unwrap()
}

fn round(a0: f64) -> FlowTrajectory<f64> {
    run(HomogeneousModel::su2(), [a0; 3], FlowControls::default())
}

fn nil() -> FlowTrajectory<f64> {
    run(HomogeneousModel::nil(), [1.0; 3], FlowControls::until(1e5))
}

fn opts() -> BallOptions {
    BallOptions { n_polar: 8, n_azimuth: 16, ..BallOptions::default() }
}

#[test]
fn round_sphere_is_type_one() {
    let v = classify_singularity(&round(1.0), &ClassifyOptions::default()).unwrap();
    assert_eq!(v.kind, SingularityKind::TypeI);
    assert!((v.statistic - 3f64.sqrt() / 2.0).abs() < 1e-4, "{v:?}");
}

#[test]
fn round_statistic_is_constant_late() {
    let traj = round(1.0);
    let te = traj.t_est.unwrap();
    let last = *traj.rm_norms().last().unwrap();
    for (t, r) in traj.times.iter().zip(traj.rm_norms()) {
        if r >= last / 100.0 && *t < te {
            assert!(((te - t) * r - 3f64.sqrt() / 2.0).abs() < 1e-6);
        }
    }
}

#[test]
fn nil_is_type_three_and_flat_has_no_singularity() {
    let v = classify_singularity(&nil(), &ClassifyOptions::default()).unwrap();
    assert_eq!(v.kind, SingularityKind::TypeIII, "{v:?}");
    assert!(v.slope.abs() < 0.05);
    let flat = run(HomogeneousModel::abelian(), [1.0, 2.0, 3.0], FlowControls::until(1.0));
    let v = classify_singularity(&flat, &ClassifyOptions::default()).unwrap();
    assert_eq!(v.kind, SingularityKind::NoSingularityInWindow);
}

#[test]
fn short_runs_are_inconclusive() {
    let traj = run(HomogeneousModel::nil(), [1.0; 3], FlowControls::until(0.5));
    let mut short = traj.clone();
    let keep = short.times.iter().position(|t| *t > 0.0).unwrap() + 3;
    short.times.truncate(keep);
    short.metrics.truncate(keep);
    short.reports.truncate(keep);
    short.derivatives.truncate(keep);
    if short.t_last() < 100.0 * short.times[1] {
        assert!(matches!(
            classify_singularity(&short, &ClassifyOptions::default()),
            Err(LabError::Inconclusive(_))
        ));
    }
}

#[test]
fn rescaling_is_exact_and_keeps_verdicts() {
    let traj = run(HomogeneousModel::su2(), [1.2, 1.0, 0.9], FlowControls::default());
    let i = traj.len() / 2;
    let q = traj.reports[i].scalar;
    let resc = rescale_trajectory(&traj, traj.times[i], q).unwrap();
    assert_eq!(resc.times[i], 0.0);
    let sigma = 0.04;
    let f0 = f_sigma_series(&traj, sigma);
    let f1 = f_sigma_series(&resc, sigma);
    for j in 0..traj.len() {
        let (a, b) = (&traj.reports[j], &resc.reports[j]);
        assert!((b.scalar * q / a.scalar - 1.0).abs() < 1e-10);
        assert!((b.rm_norm * q / a.rm_norm - 1.0).abs() < 1e-10);
        let expected = f0[j] * q.powf(-sigma);
        let resolved = a.traceless_norm_sq.sqrt() / a.scalar >= 1e-4;
        let scale = if resolved { expected } else { b.scalar.powf(sigma) };
        assert!((f1[j] - expected).abs() <= 1e-10 * scale, "j={j}");
    }
    let c = ClassifyOptions::default();
    assert_eq!(classify_singularity(&traj, &c).unwrap().kind, classify_singularity(&resc, &c).unwrap().kind);

    let nil = nil();
    let base = classify_singularity(&nil, &c).unwrap();
    for (k, q) in [(5, 3.0), (nil.len() / 2, 0.02)] {
        let v = classify_singularity(&rescale_trajectory(&nil, nil.times[k], q).unwrap(), &c).unwrap();
        assert_eq!(v.kind, SingularityKind::TypeIII);
        assert!((v.statistic / base.statistic - 1.0).abs() < 1e-10);
    }

    let same = rescale_trajectory(&traj, 0.0, 1.0).unwrap();
    assert_eq!(same.times, traj.times);
    assert!(rescale_trajectory(&traj, traj.t_last() + 1.0, 1.0).is_err());
}

#[test]
fn blowup_sequence_on_round_sphere() {
    let traj = round(1.0);
    let gammas = [0.5, 0.75, 0.9, 0.99];
    let seq = select_blowup_times(&traj, &gammas).unwrap();
    assert_eq!(seq.quantity, BlowupQuantity::ScalarCurvature);
    let n = traj.len();
    assert_eq!(seq.base_indices, vec![n - 4, n - 3, n - 2, n - 1]);
    for (k, r) in seq.rescaled.iter().enumerate() {
        assert!((r.reports.last().unwrap().scalar - 1.0).abs() < 1e-10);
        assert_eq!(*r.times.last().unwrap(), 0.0);
        assert!(r.times[0] < 0.0);
        assert_eq!(r.len(), seq.base_indices[k] + 1);
    }
}

#[test]
fn blowup_sequence_matches_brute_force_on_nil() {
    let mut c = FlowControls::until(50.0);
    c.dense_output_stride = 0.01;
    let traj = run(HomogeneousModel::nil(), [1.0; 3], c);
    let gammas: Vec<f64> = (2..8).map(|k| 1.0 - 1.0 / k as f64).collect();
    let seq = select_blowup_times(&traj, &gammas).unwrap();
    assert_eq!(seq.quantity, BlowupQuantity::RmNorm);
    let q = traj.rm_norms();
    let qualifies = |k: usize, i: usize| {
        let sup = q[..=i].iter().copied().fold(0.0, f64::max);
        q[i] >= gammas[k] * sup
    };
    let mut upper = traj.len();
    for k in (0..gammas.len()).rev() {
        let expected = (0..upper).rev().find(|&i| qualifies(k, i)).unwrap();
        assert_eq!(seq.base_indices[k], expected);
        upper = expected;
    }
    assert!(seq.base_times.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn flat_has_no_blowup_scale() {
    let flat = run(HomogeneousModel::abelian(), [1.0; 3], FlowControls::until(1.0));
    assert!(matches!(select_blowup_times(&flat, &[0.5]), Err(LabError::Domain(_))));
    let traj = round(1.0);
    assert!(select_blowup_times(&traj, &[0.9, 0.5]).is_err());
}

#[test]
fn noncollapse_on_flat_and_round() {
    let flat = run(HomogeneousModel::abelian(), [1.0; 3], FlowControls::until(4.0));
    let rep = kappa_noncollapse_check(&flat, 3.0, 1.5, 1.0, &opts()).unwrap();
    assert!(rep.pass && rep.curvature_bound_ok);
    assert!((rep.kappa_achieved - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-6);

    let a0 = 8.0;
    let traj = round(a0);
    let t0 = 1.99;
    let rep = kappa_noncollapse_check(&traj, t0, 1.0, 0.1, &opts()).unwrap();
    assert!(!rep.curvature_bound_ok && !rep.pass);
    assert_eq!(rep.diagnosis(), Some("curvature hypothesis fails on the parabolic window"));

    let a = a0 - 4.0 * t0;
    let rm = 2.0 * 3f64.sqrt() / a;
    let r = rm.powf(-0.5) / 2.0;
    let rep = kappa_noncollapse_check(&traj, t0, r, 0.1, &opts()).unwrap();
    assert!(rep.curvature_bound_ok);
    let rho = r / a.sqrt();
    let exact = a.powf(1.5) * (2.0 * std::f64::consts::PI * rho - std::f64::consts::PI * (2.0 * rho).sin());
    assert!((rep.volume / exact - 1.0).abs() < 1e-6, "{} vs {exact}", rep.volume);
    assert!(rep.pass);
    let weaker = kappa_noncollapse_check(&traj, t0, r, 0.05, &opts()).unwrap();
    assert!(weaker.pass);
    assert!(kappa_noncollapse_check(&traj, 0.5, 1.0, 0.1, &opts()).is_err());
}

#[test]
fn volume_ratios() {
    let flat = run(HomogeneousModel::abelian(), [1.0; 3], FlowControls::until(8.0));
    let seq = volume_ratio_sequence(&flat, &[1.0, 2.0, 4.0, 8.0], &opts()).unwrap();
    for v in &seq.ratios {
        assert!((v - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-6);
    }
    let nil = nil();
    let times: Vec<f64> = (0..8).map(|n| 2f64.powi(n)).collect();
    let seq = volume_ratio_sequence(&nil, &times, &opts()).unwrap();
    assert!(seq.infimum > 0.0);
    let direct = crate::geom::ball_volume_at(
        &nil.model,
        &nil.metric_at(16.0).unwrap(),
        &[4.0],
        &opts(),
    )
    .unwrap()
    .volumes[0]
        / 64.0;
    assert!((seq.ratios[4] / direct - 1.0).abs() < 1e-9);
    assert!(matches!(volume_ratio_sequence(&round(1.0), &[0.1, 0.3], &opts()), Err(LabError::OutOfWindow(_))));
}
