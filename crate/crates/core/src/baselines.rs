//! Conventional concurrent-learning data selection used for comparison runs.
//!
//! Both schemes keep a bounded stack of recorded samples and rebuild
//! `Ω = Σ φφᵀ/m²`, `M = Σ φy/m²` from it; they differ only in which samples are
//! admitted. The parameter update itself is the shared [`crate::estimator::cl_step`].

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{outer_scaled, Spectrum, DEFAULT_EPS_RANK};
use crate::plant::RegressorVector;

pub const DEFAULT_CAPACITY: usize = 20;
pub const DEFAULT_NOVELTY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct StackEntry {
    pub phi: DVector<f64>,
    pub y_next: f64,
    pub m: f64,
}

fn sums(entries: impl Iterator<Item = StackEntry>, n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut omega = DMatrix::zeros(n, n);
    let mut m_vec = DVector::zeros(n);
    for e in entries {
        let m_sq = e.m * e.m;
        omega += outer_scaled(&e.phi, &e.phi, m_sq);
        m_vec.axpy(e.y_next / m_sq, &e.phi, 1.0);
    }
    (omega, m_vec)
}

fn adds_rank(spectrum: &Spectrum, phi: &DVector<f64>, eps_rank: f64) -> bool {
    let phi_sq = phi.norm_squared();
    phi_sq > 0.0 && spectrum.orthogonal_residual_sq(phi, eps_rank) > eps_rank * phi_sq
}

fn check_sample(n: usize, phi: &RegressorVector, m: f64) -> Result<()> {
    if phi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: phi.len(),
        });
    }
    if !(m > 0.0) {
        return Err(Error::Precondition(format!(
            "normalization m must be > 0, got {m}"
        )));
    }
    Ok(())
}

/// Stack-manager recording: admit on rank gain or when the regressor differs from
/// the last admitted one by a relative margin of at least `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataStack {
    pub entries: VecDeque<StackEntry>,
    pub capacity: usize,
    pub last_phi: Option<DVector<f64>>,
    pub omega: DMatrix<f64>,
    pub m_vec: DVector<f64>,
    pub eps_rank: f64,
}

impl DataStack {
    pub fn new(n: usize, capacity: usize) -> Result<Self> {
        if capacity < n {
            return Err(Error::config(format!(
                "stack capacity {capacity} is below the regressor dimension {n}"
            )));
        }
        Ok(DataStack {
            entries: VecDeque::with_capacity(capacity + 1),
            capacity,
            last_phi: None,
            omega: DMatrix::zeros(n, n),
            m_vec: DVector::zeros(n),
            eps_rank: DEFAULT_EPS_RANK,
        })
    }

    pub fn dim(&self) -> usize {
        self.m_vec.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rank(&self) -> usize {
        Spectrum::of(&self.omega).rank(self.eps_rank)
    }

    /// Admits the sample if it qualifies; returns whether it was admitted.
    pub fn admit(&mut self, phi: &RegressorVector, y_next: f64, m: f64, tol: f64) -> Result<bool> {
        check_sample(self.dim(), phi, m)?;
        if !(tol > 0.0) {
            return Err(Error::Precondition(format!(
                "novelty tolerance must be > 0, got {tol}"
            )));
        }
        let v = phi.as_vector();
        let norm = v.norm();
        if norm == 0.0 {
            return Ok(false);
        }
        let spectrum = Spectrum::of(&self.omega);
        let rank = spectrum.rank(self.eps_rank);
        let rank_branch = rank < self.dim() && adds_rank(&spectrum, v, self.eps_rank);
        let novel = match &self.last_phi {
            None => true,
            Some(last) => (v - last).norm() / norm >= tol,
        };
        if !(rank_branch || novel) {
            return Ok(false);
        }

        self.entries.push_back(StackEntry {
            phi: v.clone(),
            y_next,
            m,
        });
        self.last_phi = Some(v.clone());
        if self.entries.len() > self.capacity {
            self.evict(rank);
        }
        let (omega, m_vec) = sums(self.entries.iter().cloned(), self.dim());
        self.omega = omega;
        self.m_vec = m_vec;
        Ok(true)
    }

    /// Drops the oldest entry whose removal keeps the rank at least `rank_before`.
    fn evict(&mut self, rank_before: usize) {
        let n = self.dim();
        let newest = self.entries.len() - 1;
        let victim = (0..newest)
            .find(|&i| {
                let rest = self
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, e)| e.clone());
                let (omega, _) = sums(rest, n);
                Spectrum::of(&omega).rank(self.eps_rank) >= rank_before
            })
            .unwrap_or(0);
        self.entries.remove(victim);
    }
}

/// Value-returning form of [`DataStack::admit`].
pub fn stack_manager_admit(
    stack: &DataStack,
    phi: &RegressorVector,
    y_next: f64,
    m: f64,
    tol: f64,
) -> Result<DataStack> {
    let mut next = stack.clone();
    next.admit(phi, y_next, m, tol)?;
    Ok(next)
}

/// Unbounded condition-number admission on raw `(Ω, M)`: accept when the candidate
/// `Ω + φφᵀ/m²` raises `λ_min/λ_max`, or when `Ω` is rank deficient and `φ` adds rank.
pub fn cond_number_admit(
    omega: &DMatrix<f64>,
    m_vec: &DVector<f64>,
    phi: &RegressorVector,
    y_next: f64,
    m: f64,
) -> Result<(DMatrix<f64>, DVector<f64>, bool)> {
    check_sample(m_vec.len(), phi, m)?;
    let v = phi.as_vector();
    let m_sq = m * m;
    let spectrum = Spectrum::of(omega);
    let candidate = omega + outer_scaled(v, v, m_sq);
    let accept = if spectrum.rank(DEFAULT_EPS_RANK) < m_vec.len() {
        adds_rank(&spectrum, v, DEFAULT_EPS_RANK)
    } else {
        Spectrum::of(&candidate).inverse_condition(DEFAULT_EPS_RANK)
            > spectrum.inverse_condition(DEFAULT_EPS_RANK)
    };
    if accept {
        let mut m_next = m_vec.clone();
        m_next.axpy(y_next / m_sq, v, 1.0);
        Ok((candidate, m_next, true))
    } else {
        Ok((omega.clone(), m_vec.clone(), false))
    }
}

/// Bounded stack maximizing the inverse condition number of `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondNumberStack {
    pub entries: Vec<StackEntry>,
    pub capacity: usize,
    pub omega: DMatrix<f64>,
    pub m_vec: DVector<f64>,
}

impl CondNumberStack {
    pub fn new(n: usize, capacity: usize) -> Result<Self> {
        if capacity < n {
            return Err(Error::config(format!(
                "stack capacity {capacity} is below the regressor dimension {n}"
            )));
        }
        Ok(CondNumberStack {
            entries: Vec::with_capacity(capacity),
            capacity,
            omega: DMatrix::zeros(n, n),
            m_vec: DVector::zeros(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.m_vec.len()
    }

    pub fn rank(&self) -> usize {
        Spectrum::of(&self.omega).rank(DEFAULT_EPS_RANK)
    }

    pub fn admit(&mut self, phi: &RegressorVector, y_next: f64, m: f64) -> Result<bool> {
        check_sample(self.dim(), phi, m)?;
        let entry = StackEntry {
            phi: phi.as_vector().clone(),
            y_next,
            m,
        };
        if self.entries.len() < self.capacity {
            let (omega, m_vec, accepted) =
                cond_number_admit(&self.omega, &self.m_vec, phi, y_next, m)?;
            if accepted {
                self.entries.push(entry);
                self.omega = omega;
                self.m_vec = m_vec;
            }
            return Ok(accepted);
        }

        // Full stack: greedy single swap.
        let n = self.dim();
        let mut best = Spectrum::of(&self.omega).inverse_condition(DEFAULT_EPS_RANK);
        let mut choice = None;
        for i in 0..self.entries.len() {
            let trial =
                self.entries
                    .iter()
                    .enumerate()
                    .map(|(j, e)| if j == i { entry.clone() } else { e.clone() });
            let (omega, _) = sums(trial, n);
            let score = Spectrum::of(&omega).inverse_condition(DEFAULT_EPS_RANK);
            if score > best {
                best = score;
                choice = Some(i);
            }
        }
        match choice {
            Some(i) => {
                self.entries[i] = entry;
                let (omega, m_vec) = sums(self.entries.iter().cloned(), n);
                self.omega = omega;
                self.m_vec = m_vec;
                Ok(true)
            }
            None => Ok(false),
        }
    }
}
