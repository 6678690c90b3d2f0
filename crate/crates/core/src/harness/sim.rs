//! Closed-loop simulation driver.

use nalgebra::{DMatrix, DVector};

use super::config::{ControlLaw, EstimatorKind, ScenarioConfig};
use crate::analysis::{diagnose, Diagnostics, StepSnapshot};
use crate::baselines::{CondNumberStack, DataStack};
use crate::controller::{control, ideal_control, reference_step};
use crate::error::{Error, Result};
use crate::estimator::{
    cl_step_on, normalization, prediction_error, EstimatorState, InformationState, UpdateBranch,
};
use crate::linalg::Spectrum;
use crate::plant::{plant_step, DisturbanceSource, PlantState};

/// Outputs beyond this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Telemetry for step `k`. Signals are at time `k`, except `q = q(k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub r: f64,
    pub y_m: f64,
    pub y: f64,
    pub u: f64,
    pub e: f64,
    pub q: f64,
    pub theta_hat: DVector<f64>,
    pub theta_tilde_norm: f64,
    /// Numerical rank and extreme eigenvalues of `Ω(k)`.
    pub rank: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub clamp_active: bool,
}

/// State after the last step, at time `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalState {
    pub k: usize,
    pub y: f64,
    pub y_m: f64,
    pub e: f64,
    pub theta_hat: DVector<f64>,
    pub theta_tilde_norm: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub config: ScenarioConfig,
    pub records: Vec<StepRecord>,
    pub final_state: FinalState,
    /// First `k` at which `Ω(k)` has full numerical rank.
    pub k_e: Option<usize>,
    pub clamp_count: usize,
    pub eta_violations: usize,
    /// Per-step analysis inputs, kept only when diagnostics are enabled.
    pub snapshots: Vec<StepSnapshot>,
    pub diagnostics: Option<Diagnostics>,
}

enum Tracker {
    DfCl(InformationState),
    StackManager { stack: DataStack, tol: f64 },
    CondNumber(CondNumberStack),
}

impl Tracker {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let n = cfg.dim();
        Ok(match cfg.estimator.kind {
            EstimatorKind::DfCl => {
                Tracker::DfCl(InformationState::new(n, cfg.information_params())?)
            }
            EstimatorKind::StackManager => {
                let mut stack = DataStack::new(n, cfg.estimator.capacity)?;
                stack.eps_rank = cfg.estimator.eps_rank;
                Tracker::StackManager {
                    stack,
                    tol: cfg.estimator.tol,
                }
            }
            EstimatorKind::CondNumber => {
                Tracker::CondNumber(CondNumberStack::new(n, cfg.estimator.capacity)?)
            }
        })
    }

    fn omega(&self) -> &DMatrix<f64> {
        match self {
            Tracker::DfCl(info) => &info.omega,
            Tracker::StackManager { stack, .. } => &stack.omega,
            Tracker::CondNumber(stack) => &stack.omega,
        }
    }

    fn m_vec(&self) -> &DVector<f64> {
        match self {
            Tracker::DfCl(info) => &info.m_vec,
            Tracker::StackManager { stack, .. } => &stack.m_vec,
            Tracker::CondNumber(stack) => &stack.m_vec,
        }
    }

    fn absorb(
        &mut self,
        phi: &crate::plant::RegressorVector,
        y_next: f64,
        m: f64,
    ) -> Result<Option<UpdateBranch>> {
        match self {
            Tracker::DfCl(info) => info.update(phi, y_next, m).map(Some),
            Tracker::StackManager { stack, tol } => stack.admit(phi, y_next, m, *tol).map(|_| None),
            Tracker::CondNumber(stack) => stack.admit(phi, y_next, m).map(|_| None),
        }
    }
}

/// Runs the closed loop for `cfg.simulation.horizon` steps.
///
/// Per step: `r(k)` → `y_m(k+1)` → `u(k)` → `w(k)` → `y(k+1)` → `q(k+1)` →
/// `θ̂(k+1)` → `Ω(k+1), M(k+1)` → record. Diagnostics are evaluated afterwards
/// from snapshots and never feed back into the loop.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Run> {
    cfg.validate()?;
    let n = cfg.dim();
    let basis = &cfg.plant.basis;
    let params = cfg.true_parameters()?;
    let ctrl = cfg.controller_config()?;
    let mut reference = cfg.reference_model()?;
    let mut plant = PlantState::new(
        cfg.plant.initial_output,
        cfg.plant.prior_output,
        basis.max_lag(),
    );
    let mut disturbance = DisturbanceSource::new(cfg.disturbance.clone(), cfg.simulation.seed);
    let mut tracker = Tracker::new(cfg)?;
    let mut est = EstimatorState::new(
        DVector::from_column_slice(&cfg.estimator.theta_hat0),
        cfg.eta_policy()?,
    )?;
    let alpha = cfg.estimator.alpha;
    let keep_snapshots = cfg.simulation.diagnostics;
    let eps_rank = cfg.estimator.eps_rank;

    let horizon = cfg.simulation.horizon;
    let mut records = Vec::with_capacity(horizon);
    let mut snapshots = Vec::with_capacity(if keep_snapshots { horizon } else { 0 });
    let mut k_e = None;
    let mut clamp_count = 0;

    for k in 0..horizon {
        let r = cfg.controller.reference.at(k);
        let y = plant.y();
        let y_m = reference.y_m;
        let y_m_next = reference.peek(r);
        let e = y - y_m;

        let features = plant.evaluate_features(basis)?;
        let w = disturbance.sample(k, y);
        let (u, clamped) = match cfg.controller.law {
            ControlLaw::CertaintyEquivalence => {
                let out = control(
                    e,
                    features.f_of(&est.theta_hat),
                    features.g_of(&est.theta_hat),
                    y_m_next,
                    &ctrl,
                )
                .map_err(|err| at_step(err, k))?;
                (out.u, out.clamped)
            }
            ControlLaw::Ideal => (
                ideal_control(
                    e,
                    features.f_of(&params.theta),
                    features.g_of(&params.theta),
                    w,
                    y_m_next,
                    ctrl.gamma_e,
                    ctrl.g_lower,
                )?,
                false,
            ),
        };
        clamp_count += usize::from(clamped);

        let phi = features.regressor(u).map_err(|err| at_step(err, k))?;
        let y_next = plant_step(&params, &phi, w)?;
        if !y_next.is_finite() || y_next.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                step: k,
                what: format!("|y(k+1)| = {} exceeds {DIVERGENCE_LIMIT:e}", y_next.abs()),
            });
        }
        let m = normalization(&phi, alpha)?;
        let q = prediction_error(&est.theta_hat, &phi, y_next)?;

        let spectrum = Spectrum::of(tracker.omega());
        let rank = spectrum.rank(eps_rank);
        if k_e.is_none() && rank == n {
            k_e = Some(k);
        }

        let next_est = cl_step_on(&est, tracker.omega(), tracker.m_vec(), &phi, y_next, m)
            .map_err(|err| at_step(err, k))?;
        let snapshot = keep_snapshots.then(|| StepSnapshot {
            k,
            omega: tracker.omega().clone(),
            m_vec: tracker.m_vec().clone(),
            phi: phi.as_vector().clone(),
            m,
            eta: next_est.eta,
            eta_cl: next_est.eta_bar,
            w,
            theta_tilde: &est.theta_hat - &params.theta,
            theta_tilde_next: &next_est.theta_hat - &params.theta,
            e,
            e_next: y_next - y_m_next,
            full_rank: rank == n,
            branch: None,
        });
        let branch = tracker.absorb(&phi, y_next, m)?;
        if let Some(mut s) = snapshot {
            s.branch = branch;
            snapshots.push(s);
        }

        records.push(StepRecord {
            k,
            r,
            y_m,
            y,
            u,
            e,
            q,
            theta_tilde_norm: (&est.theta_hat - &params.theta).norm(),
            theta_hat: est.theta_hat.clone(),
            rank,
            lambda_min: spectrum.min(),
            lambda_max: spectrum.max(),
            clamp_active: clamped,
        });

        plant.advance(y_next, u);
        reference_step(&mut reference, r);
        est = next_est;
    }

    let final_rank = Spectrum::of(tracker.omega()).rank(eps_rank);
    if k_e.is_none() && final_rank == n {
        k_e = Some(horizon);
    }
    let final_state = FinalState {
        k: horizon,
        y: plant.y(),
        y_m: reference.y_m,
        e: plant.y() - reference.y_m,
        theta_tilde_norm: (&est.theta_hat - &params.theta).norm(),
        theta_hat: est.theta_hat.clone(),
        rank: final_rank,
    };

    let diagnostics = if keep_snapshots {
        Some(diagnose(
            &snapshots,
            &params.theta,
            &cfg.system_constants()?,
        )?)
    } else {
        None
    };

    Ok(Run {
        config: cfg.clone(),
        records,
        final_state,
        k_e,
        clamp_count,
        eta_violations: est.eta_violations,
        snapshots,
        diagnostics,
    })
}

fn at_step(err: Error, step: usize) -> Error {
    match err {
        Error::SignalCorruption { what, .. } => Error::SignalCorruption { step, what },
        Error::Divergence { what, .. } => Error::Divergence { step, what },
        other => other,
    }
}

/// Root-mean-square tracking error over the records whose `k` lies in `window`.
pub fn rmse(records: &[StepRecord], window: std::ops::Range<usize>) -> f64 {
    let (sum, count) = records
        .iter()
        .filter(|r| window.contains(&r.k))
        .fold((0.0, 0usize), |(s, c), r| (s + r.e * r.e, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        (sum / count as f64).sqrt()
    }
}
