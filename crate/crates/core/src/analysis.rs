//! Stability diagnostics evaluated on simulation snapshots.
//!
//! Everything here is read-only with respect to the closed loop: the simulation
//! records a [`StepSnapshot`] per step and [`diagnose`] evaluates the Lyapunov
//! functions, the one-step inequalities and the ultimate-bound constants afterwards.
//!
//! Conventions used throughout:
//!
//! * `W_Ωθ̃(k) = Ω(k)θ − M(k)`, so that `Ωθ̂ − M = Ωθ̃ + W_Ωθ̃`.
//! * `ε̄_w(k) = φw/m² − W_Ωθ̃(k)`, which makes `θ̃(k+1) = P(k)θ̃(k) + η ε̄_w(k)` exact.
//! * One-step inequalities evaluate `V_θ(k+1)` with the gain `η(k)` of the step that
//!   produced `θ̃(k+1)`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimator::{eta_bound, UpdateBranch};
use crate::linalg::{Spectrum, DEFAULT_EPS_RANK};

/// `Ωθ − M`; vanishes when every recorded sample is disturbance free.
pub fn disturbance_term(
    omega: &DMatrix<f64>,
    m_vec: &DVector<f64>,
    theta_true: &DVector<f64>,
) -> DVector<f64> {
    omega * theta_true - m_vec
}

/// Asymptotic bound `√n·W / (μ√α)` on `‖W_Ωθ̃‖`.
pub fn w_bound_asymptotic(n: usize, w_bound: f64, mu: f64, alpha: f64) -> f64 {
    (n as f64).sqrt() * w_bound / (mu * alpha.sqrt())
}

/// Bound `k_e·W/√α` on `‖W_Ωθ̃(k_e)‖` at the first full-rank step.
pub fn pre_rank_bound(k_e: usize, w_bound: f64, alpha: f64) -> f64 {
    k_e as f64 * w_bound / alpha.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValues {
    pub v_theta: f64,
    pub v_e: f64,
    pub v: f64,
}

/// `V_θ = θ̃ᵀθ̃/η`, `V_e = e²`, `V = β₅V_θ + V_e`.
pub fn lyapunov_quantities(
    theta_tilde: &DVector<f64>,
    e: f64,
    eta: f64,
    beta5: f64,
) -> Result<LyapunovValues> {
    if !(eta > 0.0) {
        return Err(Error::Precondition(format!("eta must be > 0, got {eta}")));
    }
    let v_theta = theta_tilde.norm_squared() / eta;
    let v_e = e * e;
    Ok(LyapunovValues {
        v_theta,
        v_e,
        v: beta5 * v_theta + v_e,
    })
}

/// Midpoint of the admissible interval `0 < ε < (1 − γ_e²)/γ_e²`.
pub fn default_epsilon(gamma_e: f64) -> f64 {
    let g2 = gamma_e * gamma_e;
    (1.0 - g2) / (2.0 * g2)
}

/// Loop-wide constants entering the stability bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConstants {
    pub gamma_e: f64,
    pub n: usize,
    /// Disturbance bound `W`.
    pub w_bound: f64,
    pub mu: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

impl SystemConstants {
    pub fn new(
        gamma_e: f64,
        n: usize,
        w_bound: f64,
        mu: f64,
        alpha: f64,
        epsilon: Option<f64>,
    ) -> Result<Self> {
        let g2 = gamma_e * gamma_e;
        let epsilon = epsilon.unwrap_or_else(|| default_epsilon(gamma_e));
        if !(epsilon > 0.0) || g2 * (1.0 + epsilon) >= 1.0 {
            return Err(Error::Infeasible(format!(
                "epsilon = {epsilon} outside (0, {}) for gamma_e = {gamma_e}",
                (1.0 - g2) / g2
            )));
        }
        Ok(SystemConstants {
            gamma_e,
            n,
            w_bound,
            mu,
            alpha,
            epsilon,
        })
    }

    /// `(μ + √n)W / (μ√α)`, the limiting bound on `‖ε̄_w‖`.
    pub fn eps_w_bound(&self) -> f64 {
        let sqrt_n = (self.n as f64).sqrt();
        (self.mu + sqrt_n) * self.w_bound / (self.mu * self.alpha.sqrt())
    }

    fn beta4(&self) -> f64 {
        self.gamma_e * self.gamma_e * (1.0 + self.epsilon)
    }

    fn inv_eps(&self) -> f64 {
        1.0 + 1.0 / self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta5: f64,
    pub beta6: f64,
    /// Twice the bound on `‖E(k)‖`.
    pub b_bar: f64,
    /// Bound on `E_w(k)`.
    pub c_bar: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Ultimate-bound radius `Θ`.
    pub theta_uub: f64,
}

/// Per-step constants. `eta_max_run` is the largest gain used over the run (`η̄`).
pub fn stability_constants(
    phi: &DVector<f64>,
    omega: &DMatrix<f64>,
    m: f64,
    eta: f64,
    eta_max_run: f64,
    sys: &SystemConstants,
) -> Result<StabilityConstants> {
    let spectrum = Spectrum::of(omega);
    if spectrum.rank(DEFAULT_EPS_RANK) < sys.n {
        return Err(Error::Precondition(
            "information matrix is not full rank".into(),
        ));
    }
    let m_sq = m * m;
    let phi_sq = phi.norm_squared();
    let (l_min, l_max) = (spectrum.min(), spectrum.max());
    let eta_cl = eta_bound(phi_sq, l_max, m_sq);
    if !(eta > 0.0 && eta < eta_cl) {
        return Err(Error::Precondition(format!(
            "eta = {eta} outside (0, {eta_cl})"
        )));
    }

    let beta1 = 1.0 - eta * l_min * (2.0 - 2.0 * eta * phi_sq / m_sq - eta * l_max);
    let beta2 = 2.0 - eta * phi_sq / m_sq;
    let beta4 = sys.beta4();
    let beta3 = 1.0 - beta4;
    let beta5 = m_sq * (1.0 + sys.epsilon) * sys.inv_eps() / beta2;
    let beta6 = beta1.max(beta4);

    let sqrt_n = (sys.n as f64).sqrt();
    let eps_w = sys.eps_w_bound();
    let p_bound = sqrt_n + eta_max_run * (1.0 + l_max * sqrt_n);
    let b_bar = 2.0 * p_bound * eps_w;
    let c_bar = eta_max_run * eps_w * eps_w;

    let a = beta6 - 1.0;
    let b = beta5 * b_bar;
    let c = beta5 * c_bar + sys.inv_eps().powi(2) * sys.w_bound * sys.w_bound;
    Ok(StabilityConstants {
        epsilon: sys.epsilon,
        beta1,
        beta2,
        beta3,
        beta4,
        beta5,
        beta6,
        b_bar,
        c_bar,
        a,
        b,
        c,
        theta_uub: uub_radius(a, b, c)?,
    })
}

/// Nonnegative root `(−B − √(B² − 4AC)) / (2A)` of `Ax² + Bx + C`.
pub fn uub_radius(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a < 0.0) {
        return Err(Error::Precondition(format!("A must be < 0, got {a}")));
    }
    if !(c >= 0.0) {
        return Err(Error::Precondition(format!("C must be >= 0, got {c}")));
    }
    Ok((-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionEigs {
    pub eigenvalues: Vec<Complex<f64>>,
    pub trace: f64,
    pub spectral_radius: f64,
}

/// Eigenvalues of the rank-one forgetting direction `U = μΩφφᵀ/(φᵀΩφ)`.
pub fn df_direction_eigs(
    omega: &DMatrix<f64>,
    phi: &DVector<f64>,
    mu: f64,
) -> Result<DirectionEigs> {
    let omega_phi = omega * phi;
    let denom = phi.dot(&omega_phi);
    if !(denom > 0.0) {
        return Err(Error::Precondition("phi' Omega phi must be > 0".into()));
    }
    let u = (omega_phi * phi.transpose()) * (mu / denom);
    let eigenvalues: Vec<Complex<f64>> = u.complex_eigenvalues().iter().copied().collect();
    let spectral_radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(DirectionEigs {
        trace: u.trace(),
        eigenvalues,
        spectral_radius,
    })
}

/// Per-step state captured by the simulation for post-run analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSnapshot {
    pub k: usize,
    /// `Ω(k)`, `M(k)` before this step's update.
    pub omega: DMatrix<f64>,
    pub m_vec: DVector<f64>,
    pub phi: DVector<f64>,
    pub m: f64,
    pub eta: f64,
    /// `η̄_CL(k)`.
    pub eta_cl: f64,
    pub w: f64,
    pub theta_tilde: DVector<f64>,
    pub theta_tilde_next: DVector<f64>,
    pub e: f64,
    pub e_next: f64,
    pub full_rank: bool,
    /// Directional-forgetting branch taken, when the estimator uses one.
    pub branch: Option<UpdateBranch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub k: usize,
    pub w: f64,
    pub eta: f64,
    pub eta_cl: f64,
    pub w_omega_term: DVector<f64>,
    pub vartheta_norm: f64,
    /// Lyapunov values at `k` with the run constant `β₅`; `None` before full rank.
    pub lyapunov: Option<LyapunovValues>,
    pub estimate_bound_residual: Option<f64>,
    pub error_bound_residual: Option<f64>,
    /// `V(k+1)/V(k)`.
    pub lyapunov_ratio: Option<f64>,
    /// `V(k+1) − β₆V(k)`.
    pub contraction_residual: Option<f64>,
    /// `V(k+1) − [β₆V + 2β₅θ̃ᵀE + β₅E_w + (1+1/ε)²w²]`.
    pub lyapunov_bound_residual: Option<f64>,
    pub beta6: Option<f64>,
    pub u_eigs: Option<DirectionEigs>,
}

/// Run-level summary of every checked inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub k_e: Option<usize>,
    pub constants: Option<StabilityConstants>,
    pub max_estimate_bound_residual: f64,
    pub max_error_bound_residual: f64,
    pub max_contraction_residual: f64,
    pub max_lyapunov_bound_residual: f64,
    /// `max ‖Ωθ − M‖` over full-rank steps, against `√n·W/(μ√α)`.
    pub max_w_omega_after_ke: f64,
    pub w_bound_asymptotic: f64,
    /// `‖Ωθ − M‖` at `k_e`, against `k_e·W/√α`.
    pub w_omega_at_ke: Option<f64>,
    pub pre_rank_bound: Option<f64>,
    pub max_vartheta_norm: f64,
    pub initial_vartheta_norm: f64,
    pub max_direction_trace_error: f64,
    pub max_direction_radius_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub records: Vec<DiagnosticsRecord>,
    pub report: DiagnosticsReport,
}

/// Evaluates every diagnostic over a finished run.
pub fn diagnose(
    snapshots: &[StepSnapshot],
    theta_true: &DVector<f64>,
    sys: &SystemConstants,
) -> Result<Diagnostics> {
    let eta_max_run = snapshots.iter().map(|s| s.eta).fold(0.0, f64::max);
    let k_e = snapshots.iter().find(|s| s.full_rank).map(|s| s.k);

    let per_step: Vec<Option<StabilityConstants>> = snapshots
        .iter()
        .map(|s| {
            if s.full_rank && s.eta < s.eta_cl {
                stability_constants(&s.phi, &s.omega, s.m, s.eta, eta_max_run, sys).ok()
            } else {
                None
            }
        })
        .collect();
    let run = aggregate(per_step.iter().flatten(), sys)?;
    let beta5 = run.map(|c| c.beta5).unwrap_or(0.0);
    let inv_eps = sys.inv_eps();

    let mut records = Vec::with_capacity(snapshots.len());
    for (s, constants) in snapshots.iter().zip(&per_step) {
        let w_omega = disturbance_term(&s.omega, &s.m_vec, theta_true);
        let vartheta_norm = (s.theta_tilde.norm_squared() + s.e * s.e).sqrt();
        let u_eigs = if s.full_rank {
            df_direction_eigs(&s.omega, &s.phi, sys.mu).ok()
        } else {
            None
        };
        let mut rec = DiagnosticsRecord {
            k: s.k,
            w: s.w,
            eta: s.eta,
            eta_cl: s.eta_cl,
            w_omega_term: w_omega.clone(),
            vartheta_norm,
            lyapunov: None,
            estimate_bound_residual: None,
            error_bound_residual: None,
            lyapunov_ratio: None,
            contraction_residual: None,
            lyapunov_bound_residual: None,
            beta6: None,
            u_eigs,
        };

        if let Some(c) = constants {
            let m_sq = s.m * s.m;
            let n = s.phi.len();
            let q_bar = s.theta_tilde.dot(&s.phi);
            let p = DMatrix::identity(n, n)
                - (&s.phi * s.phi.transpose()) * (s.eta / m_sq)
                - &s.omega * s.eta;
            let eps_w = &s.phi * (s.w / m_sq) - &w_omega;
            let e_vec = &p * &eps_w;
            let e_w = s.eta * eps_w.norm_squared();
            let cross = 2.0 * s.theta_tilde.dot(&e_vec);

            let now = lyapunov_quantities(&s.theta_tilde, s.e, s.eta, beta5)?;
            let next = lyapunov_quantities(&s.theta_tilde_next, s.e_next, s.eta, beta5)?;

            rec.estimate_bound_residual = Some(
                next.v_theta
                    - (c.beta1 * now.v_theta + cross + e_w - c.beta2 * q_bar * q_bar / m_sq),
            );
            rec.error_bound_residual = Some(
                next.v_e
                    - (c.beta4 * now.v_e
                        + (1.0 + c.epsilon) * inv_eps * q_bar * q_bar
                        + inv_eps * inv_eps * s.w * s.w),
            );
            rec.lyapunov_ratio = Some(next.v / now.v);
            rec.contraction_residual = Some(next.v - c.beta6 * now.v);
            rec.lyapunov_bound_residual = Some(
                next.v
                    - (c.beta6 * now.v
                        + beta5 * cross
                        + beta5 * e_w
                        + inv_eps * inv_eps * s.w * s.w),
            );
            rec.beta6 = Some(c.beta6);
            rec.lyapunov = Some(now);
        }
        records.push(rec);
    }

    let report = summarize(&records, snapshots, k_e, run, sys);
    Ok(Diagnostics { records, report })
}

/// Run-level constants: `β₅`, `β₆` and the `E`, `E_w` bounds at their maxima.
fn aggregate<'a>(
    steps: impl Iterator<Item = &'a StabilityConstants>,
    sys: &SystemConstants,
) -> Result<Option<StabilityConstants>> {
    let mut acc: Option<StabilityConstants> = None;
    for c in steps {
        acc = Some(match acc {
            None => *c,
            Some(a) => StabilityConstants {
                beta1: a.beta1.max(c.beta1),
                beta2: a.beta2.min(c.beta2),
                beta5: a.beta5.max(c.beta5),
                beta6: a.beta6.max(c.beta6),
                b_bar: a.b_bar.max(c.b_bar),
                c_bar: a.c_bar.max(c.c_bar),
                ..a
            },
        });
    }
    let Some(mut run) = acc else {
        return Ok(None);
    };
    let inv_eps = sys.inv_eps();
    run.a = run.beta6 - 1.0;
    run.b = run.beta5 * run.b_bar;
    run.c = run.beta5 * run.c_bar + inv_eps * inv_eps * sys.w_bound * sys.w_bound;
    run.theta_uub = uub_radius(run.a, run.b, run.c)?;
    Ok(Some(run))
}

fn summarize(
    records: &[DiagnosticsRecord],
    snapshots: &[StepSnapshot],
    k_e: Option<usize>,
    constants: Option<StabilityConstants>,
    sys: &SystemConstants,
) -> DiagnosticsReport {
    let max_of = |f: &dyn Fn(&DiagnosticsRecord) -> Option<f64>| {
        records
            .iter()
            .filter_map(f)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let full: Vec<&DiagnosticsRecord> = records
        .iter()
        .zip(snapshots)
        .filter(|(_, s)| s.full_rank)
        .map(|(r, _)| r)
        .collect();
    let w_omega_at_ke = k_e
        .and_then(|k| records.iter().find(|r| r.k == k))
        .map(|r| r.w_omega_term.norm());

    let mut vartheta_max = records.iter().map(|r| r.vartheta_norm).fold(0.0, f64::max);
    if let Some(last) = snapshots.last() {
        let final_norm = (last.theta_tilde_next.norm_squared() + last.e_next * last.e_next).sqrt();
        vartheta_max = vartheta_max.max(final_norm);
    }

    DiagnosticsReport {
        k_e,
        constants,
        max_estimate_bound_residual: max_of(&|r| r.estimate_bound_residual),
        max_error_bound_residual: max_of(&|r| r.error_bound_residual),
        max_contraction_residual: max_of(&|r| r.contraction_residual),
        max_lyapunov_bound_residual: max_of(&|r| r.lyapunov_bound_residual),
        max_w_omega_after_ke: full
            .iter()
            .map(|r| r.w_omega_term.norm())
            .fold(0.0, f64::max),
        w_bound_asymptotic: w_bound_asymptotic(sys.n, sys.w_bound, sys.mu, sys.alpha),
        w_omega_at_ke,
        pre_rank_bound: k_e.map(|k| pre_rank_bound(k, sys.w_bound, sys.alpha)),
        max_vartheta_norm: vartheta_max,
        initial_vartheta_norm: records.first().map(|r| r.vartheta_norm).unwrap_or(0.0),
        max_direction_trace_error: full
            .iter()
            .filter_map(|r| r.u_eigs.as_ref())
            .map(|u| (u.trace - sys.mu).abs())
            .fold(0.0, f64::max),
        max_direction_radius_error: full
            .iter()
            .filter_map(|r| r.u_eigs.as_ref())
            .map(|u| (u.spectral_radius - sys.mu).abs())
            .fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{normalization, InformationParams, InformationState};
    use crate::plant::RegressorVector;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn disturbance_term_examples() {
        let theta = dv(&[-2.0, 0.5, 1.0, 1.0]);
        assert_eq!(
            disturbance_term(&DMatrix::zeros(4, 4), &DVector::zeros(4), &theta),
            DVector::zeros(4)
        );

        let phi = dv(&[0.3, -1.2, 0.7, 2.0]);
        let m_sq = 1.0 + phi.norm_squared();
        let w = 0.4;
        let omega = &phi * phi.transpose() / m_sq;
        let m_vec = &phi * (theta.dot(&phi) + w) / m_sq;
        let got = disturbance_term(&omega, &m_vec, &theta);
        assert!((got + &phi * (w / m_sq)).norm() < 1e-15);
    }

    #[test]
    fn bound_examples() {
        assert_abs_diff_eq!(
            w_bound_asymptotic(4, 1.0, 0.7, 1.0),
            2.0 / 0.7,
            epsilon = 1e-15
        );
        assert_eq!(w_bound_asymptotic(4, 0.0, 0.7, 1.0), 0.0);
        assert_eq!(w_bound_asymptotic(1, 1.0, 1.0, 1.0), 1.0);
        assert_eq!(pre_rank_bound(0, 1.0, 1.0), 0.0);
        assert_eq!(pre_rank_bound(10, 1.0, 1.0), 10.0);
        assert_eq!(pre_rank_bound(10, 1.0, 4.0), 5.0);
    }

    #[test]
    fn lyapunov_examples() {
        let zero = lyapunov_quantities(&DVector::zeros(4), 0.0, 1.0, 1.0).unwrap();
        assert_eq!((zero.v_theta, zero.v_e, zero.v), (0.0, 0.0, 0.0));
        let e1 = dv(&[1.0, 0.0, 0.0, 0.0]);
        let l = lyapunov_quantities(&e1, 2.0, 1.0, 1.0).unwrap();
        assert_eq!((l.v_theta, l.v_e, l.v), (1.0, 4.0, 5.0));
        assert_eq!(
            lyapunov_quantities(&e1, 0.0, 0.5, 1.0).unwrap().v_theta,
            2.0
        );
        assert!(lyapunov_quantities(&e1, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn uub_radius_examples() {
        assert_abs_diff_eq!(uub_radius(-1.0, 0.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(uub_radius(-1.0, 2.0, 0.0).unwrap(), 2.0);
        assert_abs_diff_eq!(uub_radius(-0.5, 0.0, 0.125).unwrap(), 0.5);
        assert!(uub_radius(0.0, 1.0, 1.0).is_err());
        assert!(uub_radius(-1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn epsilon_midpoint_and_infeasible() {
        assert_abs_diff_eq!(default_epsilon(0.5), 1.5);
        let sys = SystemConstants::new(0.5, 4, 1.0, 0.7, 1.0, None).unwrap();
        assert_abs_diff_eq!(sys.beta4(), 0.625);
        assert!(SystemConstants::new(0.5, 4, 1.0, 0.7, 1.0, Some(3.0)).is_err());
        assert!(SystemConstants::new(0.5, 4, 1.0, 0.7, 1.0, Some(2.9)).is_ok());
    }

    #[test]
    fn stability_constants_examples() {
        let sys = SystemConstants::new(0.5, 4, 1.0, 0.7, 1.0, None).unwrap();
        let phi = dv(&[1.0, 0.0, 0.0, 0.0]);
        let omega = DMatrix::identity(4, 4);
        let m = 2f64.sqrt();
        // η̄_CL = 4/(2 + 2) = 1; half of it is 0.5.
        let c = stability_constants(&phi, &omega, m, 0.5, 0.5, &sys).unwrap();
        assert_abs_diff_eq!(c.beta2, 2.0 - 0.5 / 2.0, epsilon = 1e-15);
        assert!(c.beta1 > 0.0 && c.beta1 < 1.0);
        assert_abs_diff_eq!(c.beta3 + c.beta4, 1.0, epsilon = 1e-15);
        assert!(c.beta6 < 1.0 && c.a < 0.0);

        // With η = 4/6 the β₂ formula gives 5/3.
        let c = stability_constants(&phi, &omega, m, 4.0 / 6.0, 4.0 / 6.0, &sys).unwrap();
        assert_abs_diff_eq!(c.beta2, 5.0 / 3.0, epsilon = 1e-15);

        let quiet = SystemConstants::new(0.5, 4, 0.0, 0.7, 1.0, None).unwrap();
        let c = stability_constants(&phi, &omega, m, 0.5, 0.5, &quiet).unwrap();
        assert_eq!(c.b, 0.0);
        assert_eq!(c.c, 0.0);
        assert_eq!(c.theta_uub, 0.0);
    }

    #[test]
    fn stability_constants_preconditions() {
        let sys = SystemConstants::new(0.5, 2, 1.0, 0.7, 1.0, None).unwrap();
        let phi = dv(&[1.0, 0.0]);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(stability_constants(&phi, &singular, 1.5, 0.1, 0.1, &sys).is_err());
        assert!(stability_constants(&phi, &DMatrix::identity(2, 2), 1.5, 5.0, 5.0, &sys).is_err());
    }

    #[test]
    fn direction_eigs_examples() {
        let u = df_direction_eigs(&DMatrix::from_element(1, 1, 2.0), &dv(&[3.0]), 0.7).unwrap();
        assert_abs_diff_eq!(u.spectral_radius, 0.7, epsilon = 1e-15);
        let u = df_direction_eigs(&DMatrix::from_element(1, 1, 2.0), &dv(&[3.0]), 1.0).unwrap();
        assert_abs_diff_eq!(u.eigenvalues[0].re, 1.0, epsilon = 1e-15);

        let omega = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let u = df_direction_eigs(&omega, &dv(&[1.0, 0.0, 0.0]), 0.4).unwrap();
        assert_abs_diff_eq!(u.trace, 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(u.spectral_radius, 0.4, epsilon = 1e-12);
        assert!(df_direction_eigs(&DMatrix::zeros(2, 2), &dv(&[1.0, 0.0]), 0.5).is_err());
    }

    /// `Ωθ − M` rebuilt as `−Σ_i (Π_{j>i} Ũ(j)) φ(i)w(i)/m²(i)` with `Ũ(j) = I − U(j)` on
    /// forgetting steps and `I` otherwise.
    /// `(Ω before the update, φ, w, m, branch)` for one step.
    type Step = (DMatrix<f64>, DVector<f64>, f64, f64, UpdateBranch);

    fn product_sum(
        history: &[Step],
        mu: f64,
    ) -> DVector<f64> {
        let n = history[0].1.len();
        let mut total = DVector::zeros(n);
        for (i, (_, phi_i, w_i, m_i, _)) in history.iter().enumerate() {
            let mut term = phi_i * (w_i / (m_i * m_i));
            for (omega_j, phi_j, _, _, branch) in &history[i + 1..] {
                if *branch == UpdateBranch::Forget {
                    let op = omega_j * phi_j;
                    let u = (&op * phi_j.transpose()) * (mu / phi_j.dot(&op));
                    term = (DMatrix::identity(n, n) - u) * term;
                }
            }
            total -= term;
        }
        total
    }

    #[test]
    fn identity_matches_product_sum_expansion() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in 1..=2 {
            for &mu in &[0.3, 0.7, 1.0] {
                let theta = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                let mut info = InformationState::new(n, InformationParams::new(mu, 1.0)).unwrap();
                let mut history = Vec::new();
                for _ in 0..20 {
                    let phi = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
                    let w = rng.random_range(-1.0..1.0);
                    let rv = RegressorVector::new(phi.clone()).unwrap();
                    let m = normalization(&rv, 1.0).unwrap();
                    let omega_before = info.omega.clone();
                    let branch = info.update(&rv, theta.dot(&phi) + w, m).unwrap();
                    history.push((omega_before, phi, w, m, branch));
                    let identity = disturbance_term(&info.omega, &info.m_vec, &theta);
                    let oracle = product_sum(&history, mu);
                    assert!((identity - oracle).norm() <= 1e-8);
                }
            }
        }
    }
}
