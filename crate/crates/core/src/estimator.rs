//! Normalized concurrent-learning parameter update with a directional-forgetting
//! information matrix.
//!
//! Per step `k`, with `m(k) = √(α + φᵀφ)`:
//!
//! ```text
//! q(k+1)  = θ̂ᵀφ − y(k+1)
//! θ̂(k+1) = θ̂ − η φ q / m² − η (Ω θ̂ − M)
//! ```
//!
//! `Ω` and `M` start at zero and grow by `φφᵀ/m²`, `φ y/m²` while the regressor
//! adds a new direction. Once `φ` lies in the range of `Ω`, the information
//! already held along `Ωφ` is discounted by `μ` before the new sample is added, so
//! unexcited directions keep their information and `Ω` stays full rank.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{outer_scaled, Spectrum, DEFAULT_EPS_RANK};
use crate::plant::RegressorVector;

pub const DEFAULT_EPS_DIV: f64 = 1e-12;

/// `m(k) = √(α + φᵀφ)`.
pub fn normalization(phi: &RegressorVector, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Precondition(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    Ok((alpha + phi.norm_squared()).sqrt())
}

/// `q(k+1) = θ̂ᵀφ − y(k+1)`.
pub fn prediction_error(
    theta_hat: &DVector<f64>,
    phi: &RegressorVector,
    y_next: f64,
) -> Result<f64> {
    if theta_hat.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_hat.len(),
            got: phi.len(),
        });
    }
    Ok(theta_hat.dot(phi.as_vector()) - y_next)
}

/// Admissible step-gain bound `2m² / (2‖φ‖² + λ_max(Ω) m²)`.
///
/// Returns `+∞` when both `φ` and `Ω` vanish.
pub fn eta_max_cl(phi: &RegressorVector, omega: &DMatrix<f64>, m: f64) -> f64 {
    let lambda_max = Spectrum::of(omega).max().max(0.0);
    eta_bound(phi.norm_squared(), lambda_max, m * m)
}

pub(crate) fn eta_bound(phi_norm_sq: f64, lambda_max: f64, m_sq: f64) -> f64 {
    let denom = 2.0 * phi_norm_sq + lambda_max * m_sq;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        2.0 * m_sq / denom
    }
}

/// Which branch of the information update ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateBranch {
    /// `φ` added a new direction (or the forgetting denominator vanished).
    Accumulate,
    /// Directional forgetting along `Ωφ`, then accumulation.
    Forget,
    /// `φ = 0`; nothing changes.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationParams {
    /// Forgetting factor `μ ∈ (0, 1]`.
    pub mu: f64,
    /// Normalization constant `α > 0`.
    pub alpha: f64,
    pub eps_rank: f64,
    pub eps_div: f64,
}

impl InformationParams {
    pub fn new(mu: f64, alpha: f64) -> Self {
        InformationParams {
            mu,
            alpha,
            eps_rank: DEFAULT_EPS_RANK,
            eps_div: DEFAULT_EPS_DIV,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::config(format!(
                "mu must lie in (0, 1], got {}",
                self.mu
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.eps_rank > 0.0 && self.eps_rank < 1.0) {
            return Err(Error::config("eps_rank must lie in (0, 1)"));
        }
        if !(self.eps_div > 0.0 && self.eps_div < 1.0) {
            return Err(Error::config("eps_div must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Information matrix `Ω`, auxiliary vector `M` and rank bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationState {
    pub omega: DMatrix<f64>,
    pub m_vec: DVector<f64>,
    /// Numerical rank of `omega`.
    pub rank: usize,
    /// First update count at which `omega` reached full rank.
    pub k_e: Option<usize>,
    /// Number of updates applied so far; `omega` is `Ω(updates)`.
    pub updates: usize,
    pub params: InformationParams,
}

impl InformationState {
    pub fn new(n: usize, params: InformationParams) -> Result<Self> {
        params.validate()?;
        if n == 0 {
            return Err(Error::config("regressor dimension must be >= 1"));
        }
        Ok(InformationState {
            omega: DMatrix::zeros(n, n),
            m_vec: DVector::zeros(n),
            rank: 0,
            k_e: None,
            updates: 0,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.m_vec.len()
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::of(&self.omega)
    }

    /// `Ωθ̂ − M`.
    pub fn cl_residual(&self, theta_hat: &DVector<f64>) -> DVector<f64> {
        &self.omega * theta_hat - &self.m_vec
    }

    /// Applies one rank-gated update with sample `(φ(k), y(k+1))`.
    pub fn update(&mut self, phi: &RegressorVector, y_next: f64, m: f64) -> Result<UpdateBranch> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: phi.len(),
            });
        }
        if !(m > 0.0) {
            return Err(Error::Precondition(format!(
                "normalization m must be > 0, got {m}"
            )));
        }
        let v = phi.as_vector();
        let phi_sq = v.norm_squared();
        let m_sq = m * m;
        let spectrum = self.spectrum();

        let branch = if phi_sq == 0.0 {
            UpdateBranch::Skip
        } else if rank_increases(&spectrum, v, self.params.eps_rank) {
            UpdateBranch::Accumulate
        } else {
            let omega_phi = &self.omega * v;
            let denom = v.dot(&omega_phi);
            let floor = self.params.eps_div * phi_sq * spectrum.max().max(1.0);
            if denom <= floor {
                UpdateBranch::Accumulate
            } else {
                // Ω − μ(Ωφ)(Ωφ)ᵀ/(φᵀΩφ) and M − μ(Ωφ)(φᵀM)/(φᵀΩφ).
                let mu = self.params.mu;
                let mut omega = &self.omega - outer_scaled(&omega_phi, &omega_phi, denom / mu);
                let mut m_vec = self.m_vec.clone();
                m_vec.axpy(-mu * v.dot(&self.m_vec) / denom, &omega_phi, 1.0);
                omega += outer_scaled(v, v, m_sq);
                m_vec.axpy(y_next / m_sq, v, 1.0);
                symmetrize(&mut omega);
                // Exact arithmetic keeps the rank; a tiny φ with μ near 1 can still push
                // the replacement eigenvalue under the rank threshold.
                let rank = Spectrum::of(&omega).rank(self.params.eps_rank);
                if rank >= self.rank {
                    self.omega = omega;
                    self.m_vec = m_vec;
                    return Ok(self.finish(UpdateBranch::Forget, rank));
                }
                UpdateBranch::Accumulate
            }
        };

        if branch != UpdateBranch::Skip {
            self.omega += outer_scaled(v, v, m_sq);
            self.m_vec.axpy(y_next / m_sq, v, 1.0);
            symmetrize(&mut self.omega);
        }
        let rank = self.spectrum().rank(self.params.eps_rank);
        Ok(self.finish(branch, rank))
    }

    fn finish(&mut self, branch: UpdateBranch, rank: usize) -> UpdateBranch {
        self.updates += 1;
        self.rank = rank;
        if self.k_e.is_none() && self.rank == self.dim() {
            self.k_e = Some(self.updates);
        }
        branch
    }
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

fn rank_increases(spectrum: &Spectrum, v: &DVector<f64>, eps_rank: f64) -> bool {
    let phi_sq = v.norm_squared();
    phi_sq > 0.0 && spectrum.orthogonal_residual_sq(v, eps_rank) > eps_rank * phi_sq
}

/// Whether `rank(Ω + φφᵀ/m²) > rank(Ω)`, judged by the part of `φ` outside the
/// numerical column space of `Ω`.
pub fn rank_would_increase(info: &InformationState, phi: &RegressorVector, _m: f64) -> bool {
    rank_increases(&info.spectrum(), phi.as_vector(), info.params.eps_rank)
}

/// Value-returning form of [`InformationState::update`].
pub fn df_update_information(
    info: &InformationState,
    phi: &RegressorVector,
    y_next: f64,
    m: f64,
) -> Result<InformationState> {
    let mut next = info.clone();
    next.update(phi, y_next, m)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPolicy {
    /// `η(k) = η̄_CL(k)/2`.
    HalfOfMax,
    /// Constant gain; checked against `η̄_CL(k)` each step.
    Fixed(f64),
}

/// Gain used when `η̄_CL` is unbounded (`φ = 0`, `Ω = 0`); the update is a no-op then.
const UNBOUNDED_ETA: f64 = 1.0;

/// Parameter estimate `θ̂(k)` and step-gain bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub theta_hat: DVector<f64>,
    /// Gain used by the most recent step.
    pub eta: f64,
    /// `η̄_CL` at the most recent step.
    pub eta_bar: f64,
    pub policy: EtaPolicy,
    /// Steps taken so far.
    pub step: usize,
    /// Steps at which a fixed gain was outside `(0, η̄_CL)`.
    pub eta_violations: usize,
}

impl EstimatorState {
    pub fn new(theta_hat: DVector<f64>, policy: EtaPolicy) -> Result<Self> {
        if let EtaPolicy::Fixed(eta) = policy {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::config(format!("fixed eta must be > 0, got {eta}")));
            }
        }
        if theta_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("initial estimate must be finite"));
        }
        Ok(EstimatorState {
            eta: match policy {
                EtaPolicy::Fixed(eta) => eta,
                EtaPolicy::HalfOfMax => 0.0,
            },
            theta_hat,
            eta_bar: f64::INFINITY,
            policy,
            step: 0,
            eta_violations: 0,
        })
    }

    /// Gain for the current step given `η̄_CL`.
    pub fn select_eta(&self, eta_bar: f64) -> f64 {
        match self.policy {
            EtaPolicy::HalfOfMax if eta_bar.is_finite() => eta_bar / 2.0,
            EtaPolicy::HalfOfMax => UNBOUNDED_ETA,
            EtaPolicy::Fixed(eta) => eta,
        }
    }
}

/// One concurrent-learning step using the pre-update `Ω(k)`, `M(k)`.
pub fn cl_step(
    est: &EstimatorState,
    info: &InformationState,
    phi: &RegressorVector,
    y_next: f64,
    m: f64,
) -> Result<EstimatorState> {
    cl_step_on(est, &info.omega, &info.m_vec, phi, y_next, m)
}

/// [`cl_step`] against any recorded `(Ω, M)` pair, e.g. a baseline's data stack.
pub fn cl_step_on(
    est: &EstimatorState,
    omega: &DMatrix<f64>,
    m_vec: &DVector<f64>,
    phi: &RegressorVector,
    y_next: f64,
    m: f64,
) -> Result<EstimatorState> {
    if !(m > 0.0) {
        return Err(Error::Precondition(format!(
            "normalization m must be > 0, got {m}"
        )));
    }
    if m_vec.len() != phi.len() || omega.nrows() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: m_vec.len(),
            got: phi.len(),
        });
    }
    let q = prediction_error(&est.theta_hat, phi, y_next)?;
    let m_sq = m * m;
    let eta_bar = eta_bound(phi.norm_squared(), Spectrum::of(omega).max().max(0.0), m_sq);
    let eta = est.select_eta(eta_bar);

    let mut next = est.clone();
    if let EtaPolicy::Fixed(_) = est.policy {
        if eta >= eta_bar {
            next.eta_violations += 1;
            log::warn!(
                "step {}: fixed eta {eta} outside the admissible bound {eta_bar}",
                est.step
            );
        }
    }

    let cl_term = omega * &est.theta_hat - m_vec;
    let mut theta = est.theta_hat.clone();
    theta.axpy(-eta * q / m_sq, phi.as_vector(), 1.0);
    theta.axpy(-eta, &cl_term, 1.0);
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            step: est.step,
            what: "parameter estimate became non-finite".into(),
        });
    }
    next.theta_hat = theta;
    next.eta = eta;
    next.eta_bar = eta_bar;
    next.step += 1;
    Ok(next)
}
