//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dfcl::analysis::{df_direction_eigs, disturbance_term};
use dfcl::estimator::{
    df_update_information, normalization, InformationParams, InformationState, UpdateBranch,
};
use dfcl::harness::config::{EstimatorKind, ScenarioConfig};
use dfcl::harness::{run_scenario, Run};
use dfcl::linalg::{symmetry_residual, Spectrum};
use dfcl::plant::{DisturbanceKind, DisturbanceSpec, RegressorVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn theta_true(cfg: &ScenarioConfig) -> DVector<f64> {
    DVector::from_column_slice(&cfg.plant.theta)
}

fn zero_disturbance_run() -> (Run, Duration) {
    let mut cfg = ScenarioConfig::reference_experiment();
    cfg.disturbance = DisturbanceSpec::zero();
    cfg.simulation.horizon = 2000;
    cfg.simulation.diagnostics = true;
    let start = Instant::now();
    let run = run_scenario(&cfg).expect("zero-disturbance run");
    (run, start.elapsed())
}

fn always_on_run() -> Run {
    let mut cfg = ScenarioConfig::reference_experiment();
    cfg.disturbance.switch_step = usize::MAX;
    cfg.simulation.horizon = 5000;
    cfg.simulation.diagnostics = true;
    run_scenario(&cfg).expect("always-on disturbance run")
}

fn reference_run() -> Run {
    let mut cfg = ScenarioConfig::reference_experiment();
    cfg.simulation.diagnostics = true;
    run_scenario(&cfg).expect("reference run")
}

fn exponential_stability(run: &Run, elapsed: Duration) -> Outcome {
    let Some(k_e) = run.k_e else {
        return outcome(false, "information matrix never reached full rank");
    };
    let diag = run.diagnostics.as_ref().unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut missing = 0;
    for rec in diag.records.iter().filter(|r| r.k >= k_e) {
        match rec.contraction_residual {
            Some(r) => worst = worst.max(r),
            None => missing += 1,
        }
    }
    let theta_tilde = run.final_state.theta_tilde_norm;
    let e = run.final_state.e.abs();
    let pass = missing == 0
        && worst <= 1e-10
        && theta_tilde < 1e-6
        && e < 1e-6
        && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "k_e={k_e}, max V(k+1)-b6*V(k)={worst:.3e}, unchecked steps={missing}, |theta~(2000)|={theta_tilde:.3e}, \
             |e(2000)|={e:.3e}, runtime={:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn information_identity(run: &Run) -> Outcome {
    let theta = theta_true(&run.config);
    let worst = run
        .snapshots
        .iter()
        .map(|s| disturbance_term(&s.omega, &s.m_vec, &theta).norm())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-9,
        format!("max |Omega*theta - M| = {worst:.3e}"),
    )
}

fn asymptotic_bound(run: &Run) -> Outcome {
    let theta = theta_true(&run.config);
    let k_e = run.k_e.expect("full rank");
    let n = run.config.dim() as f64;
    let bound = n.sqrt() * 1.0 / (0.7 * 1.0f64.sqrt());
    let worst = run
        .snapshots
        .iter()
        .filter(|s| s.k >= k_e)
        .map(|s| disturbance_term(&s.omega, &s.m_vec, &theta).norm())
        .fold(0.0, f64::max);
    outcome(
        worst < bound,
        format!("max |W| for k>=k_e is {worst:.6} < {bound:.6}"),
    )
}

fn pre_rank_bound(run: &Run) -> Outcome {
    let theta = theta_true(&run.config);
    let k_e = run.k_e.expect("full rank");
    let s = run.snapshots.iter().find(|s| s.k == k_e).unwrap();
    let w = disturbance_term(&s.omega, &s.m_vec, &theta).norm();
    let bound = k_e as f64 * run.config.disturbance.bound / run.config.estimator.alpha.sqrt();
    outcome(
        w < bound,
        format!("|W(k_e)| = {w:.6} < k_e*W/sqrt(alpha) = {bound:.6} (k_e={k_e})"),
    )
}

fn psd_symmetry() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mus = [0.1, 0.5, 0.7, 1.0];
    let mut worst_psd = f64::NEG_INFINITY;
    let mut worst_sym: f64 = 0.0;
    let mut failures = 0usize;
    let sequences = 10_000;
    for i in 0..sequences {
        let mu = mus[i % mus.len()];
        let n = rng.random_range(1..=6);
        let mut info = InformationState::new(n, InformationParams::new(mu, 1.0)).unwrap();
        let len = rng.random_range(1..=30);
        for _ in 0..len {
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            let v: Vec<f64> = if rng.random_bool(0.3) {
                // Confined to a two-dimensional subspace so the forgetting branch runs.
                let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                (0..n)
                    .map(|j| if j % 2 == 0 { a } else { b } * scale)
                    .collect()
            } else {
                (0..n)
                    .map(|_| rng.random_range(-1.0..1.0) * scale)
                    .collect()
            };
            let phi = RegressorVector::from_slice(&v).unwrap();
            let m = normalization(&phi, 1.0).unwrap();
            info = df_update_information(&info, &phi, rng.random_range(-10.0..10.0), m).unwrap();
            let spec = Spectrum::of(&info.omega);
            let psd_margin = -spec.min() / spec.max().max(1.0);
            let sym = symmetry_residual(&info.omega);
            worst_psd = worst_psd.max(psd_margin);
            worst_sym = worst_sym.max(sym);
            if psd_margin > 1e-12 || sym > 1e-12 {
                failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < Duration::from_secs(10),
        format!(
            "{sequences} sequences, worst -lambda_min/max(1,lambda_max)={worst_psd:.3e}, \
             worst symmetry residual={worst_sym:.3e}, runtime={:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn closed_loop_identity(run: &Run) -> Outcome {
    let gamma_e = run.config.controller.gamma_e;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (k, rec) in run.records.iter().enumerate() {
        if rec.clamp_active {
            continue;
        }
        let e_next = run.records.get(k + 1).map_or(run.final_state.e, |r| r.e);
        let residual = (e_next - (gamma_e * rec.e - rec.q)).abs() / rec.e.abs().max(1.0);
        worst = worst.max(residual);
        checked += 1;
    }
    outcome(
        worst <= 1e-10 && checked > 0,
        format!("{checked} unclamped steps, max scaled residual = {worst:.3e}"),
    )
}

fn comparison_ordering() -> Outcome {
    let runs: Vec<Run> = [
        EstimatorKind::DfCl,
        EstimatorKind::StackManager,
        EstimatorKind::CondNumber,
    ]
    .into_iter()
    .map(|kind| run_scenario(&ScenarioConfig::reference_experiment().with_estimator(kind)).unwrap())
    .collect();
    // Window [550, 1000] includes the final error e(1000).
    let rmse = |run: &Run| {
        let errors: Vec<f64> = run
            .records
            .iter()
            .filter(|r| r.k >= 550)
            .map(|r| r.e)
            .chain(std::iter::once(run.final_state.e))
            .collect();
        (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
    };
    let (df, sm, cn) = (rmse(&runs[0]), rmse(&runs[1]), rmse(&runs[2]));
    // Recovery: the first return below 0.1 after the post-switch excursion, by k = 650.
    let records = &runs[0].records;
    let excursion = records
        .iter()
        .find(|r| r.k >= 500 && r.e.abs() >= 0.1)
        .map(|r| r.k);
    let recovery = match excursion {
        Some(start) => records
            .iter()
            .find(|r| r.k > start && r.k <= 650 && r.e.abs() < 0.1)
            .map(|r| r.k),
        None => Some(500),
    };
    outcome(
        df < sm && df < cn && recovery.is_some(),
        format!(
            "RMSE[550,1000]: df_cl={df:.4e}, stack_manager={sm:.4e}, cond_number={cn:.4e}; \
             excursion from k={}, back below 0.1 at k={}",
            excursion.map_or("none".into(), |k| k.to_string()),
            recovery.map_or("none".into(), |k| k.to_string())
        ),
    )
}

fn uub_containment(runs: &[(&str, &Run)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, run) in runs {
        let report = &run.diagnostics.as_ref().unwrap().report;
        let Some(constants) = report.constants else {
            return outcome(false, format!("{name}: no full-rank steps"));
        };
        let bound = report.initial_vartheta_norm.max(constants.theta_uub) + 1e-6;
        pass &= report.max_vartheta_norm <= bound;
        parts.push(format!(
            "{name}: max |vartheta|={:.4} <= max(|vartheta(0)|={:.4}, Theta={:.4e})",
            report.max_vartheta_norm, report.initial_vartheta_norm, constants.theta_uub
        ));
    }
    outcome(pass, parts.join("; "))
}

/// Brute-force expansion of the disturbance term as a sum of propagated
/// disturbance injections, checked against `Ωθ − M`.
fn product_sum_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut forget_steps = 0;
    for &mu in &[0.3, 0.7, 1.0] {
        for n in 1..=2usize {
            for _trial in 0..20 {
                let theta = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
                let mut info = InformationState::new(n, InformationParams::new(mu, 1.0)).unwrap();
                // (propagator applied after step i, injection at step i) for every past step.
                let mut injections: Vec<DVector<f64>> = Vec::new();
                let mut propagators: Vec<DMatrix<f64>> = Vec::new();
                for k in 0..20 {
                    let v: Vec<f64> = if k % 3 == 2 {
                        // Repeat-direction regressor to exercise forgetting.
                        vec![0.8; n]
                    } else {
                        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
                    };
                    let w = (0.37 * k as f64).sin() * 0.5;
                    let phi = RegressorVector::from_slice(&v).unwrap();
                    let pv = phi.as_vector().clone();
                    let m = normalization(&phi, 1.0).unwrap();
                    let y = theta.dot(&pv) + w;
                    let omega_before = info.omega.clone();
                    let branch = info.update(&phi, y, m).unwrap();
                    let u_tilde = if branch == UpdateBranch::Forget {
                        forget_steps += 1;
                        let op = &omega_before * &pv;
                        let d = pv.dot(&op);
                        DMatrix::identity(n, n) - (&op * pv.transpose()) * (mu / d)
                    } else {
                        DMatrix::identity(n, n)
                    };
                    for p in propagators.iter_mut() {
                        *p = &u_tilde * &*p;
                    }
                    propagators.push(DMatrix::identity(n, n));
                    injections.push(&pv * (-w / (m * m)));
                    let expanded = propagators
                        .iter()
                        .zip(&injections)
                        .fold(DVector::zeros(n), |acc, (p, inj)| acc + p * inj);
                    let direct = disturbance_term(&info.omega, &info.m_vec, &theta);
                    worst = worst.max((expanded - direct).norm());
                }
            }
        }
    }
    outcome(
        worst <= 1e-8 && forget_steps > 0,
        format!("max |expansion - (Omega*theta - M)| = {worst:.3e} over {forget_steps} forgetting steps"),
    )
}

fn direction_eigs(run: &Run) -> Outcome {
    let mu = run.config.estimator.mu;
    let mut worst_trace: f64 = 0.0;
    let mut worst_radius: f64 = 0.0;
    let mut checked = 0;
    for s in run.snapshots.iter().filter(|s| s.full_rank) {
        let Ok(eigs) = df_direction_eigs(&s.omega, &s.phi, mu) else {
            continue;
        };
        worst_trace = worst_trace.max((eigs.trace - mu).abs());
        worst_radius = worst_radius.max((eigs.spectral_radius - mu).abs());
        checked += 1;
    }
    outcome(
        checked > 0 && worst_trace <= 1e-9 && worst_radius <= 1e-9,
        format!("{checked} full-rank steps, max |trace-mu|={worst_trace:.3e}, max |rho-mu|={worst_radius:.3e}"),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_dfcl");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(bin)
            .args(["paper-fig1", "--out"])
            .arg(d.path())
            .stdout(std::process::Stdio::null())
            .status()
            .expect("spawn dfcl");
        if !status.success() {
            return outcome(false, format!("paper-fig1 exited with {status}"));
        }
    }
    let csvs = |p: &Path| {
        let mut names: Vec<_> = std::fs::read_dir(p)
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| e.file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        names
    };
    let names = csvs(dirs[0].path());
    if names.is_empty() || names != csvs(dirs[1].path()) {
        return outcome(false, "CSV file sets differ or are empty");
    }
    let differing: Vec<String> = names
        .iter()
        .filter(|n| {
            std::fs::read(dirs[0].path().join(n)).unwrap()
                != std::fs::read(dirs[1].path().join(n)).unwrap()
        })
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    outcome(
        differing.is_empty(),
        format!(
            "{} CSV files compared, differing: {:?}",
            names.len(),
            differing
        ),
    )
}

fn main() -> ExitCode {
    let (zero, zero_elapsed) = zero_disturbance_run();
    let always = always_on_run();
    let reference = reference_run();
    let mut bounded_noise = ScenarioConfig::reference_experiment();
    bounded_noise.disturbance = DisturbanceSpec {
        kind: DisturbanceKind::BoundedCustom,
        switch_step: 1000,
        amplitude: 1.0,
        bound: 1.0,
    };
    bounded_noise.simulation.seed = 7;
    bounded_noise.simulation.diagnostics = true;
    let noise = run_scenario(&bounded_noise).expect("bounded noise run");

    let criteria: Vec<(&str, Outcome)> = vec![
        (
            "zero-disturbance exponential stability",
            exponential_stability(&zero, zero_elapsed),
        ),
        ("exact information identity", information_identity(&zero)),
        (
            "asymptotic disturbance-term bound",
            asymptotic_bound(&always),
        ),
        ("pre-rank disturbance-term bound", pre_rank_bound(&always)),
        ("information matrix PSD and symmetry", psd_symmetry()),
        (
            "closed-loop error identity",
            closed_loop_identity(&reference),
        ),
        ("comparison ordering and recovery", comparison_ordering()),
        (
            "UUB containment",
            uub_containment(&[
                ("reference", &reference),
                ("always-on", &always),
                ("bounded noise", &noise),
            ]),
        ),
        ("product-sum oracle", product_sum_oracle()),
        (
            "forgetting-direction eigenvalues",
            direction_eigs(&reference),
        ),
        ("paper-fig1 determinism", determinism()),
    ];

    let mut failed = 0;
    for (i, (name, o)) in criteria.iter().enumerate() {
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
