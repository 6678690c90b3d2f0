//! Structured SISO plant `y(k+1) = θᵀφ(k) + w(k)` with declarative basis functions.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One scalar feature of the output history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisFunction {
    /// `y(k - lag)`.
    Lag {
        lag: usize,
    },
    /// `exp(-(y(k - lag) - center)² / width)`.
    Gaussian {
        #[serde(default)]
        lag: usize,
        center: f64,
        width: f64,
    },
    Constant {
        value: f64,
    },
}

impl BasisFunction {
    fn lag(&self) -> usize {
        match self {
            BasisFunction::Lag { lag } | BasisFunction::Gaussian { lag, .. } => *lag,
            BasisFunction::Constant { .. } => 0,
        }
    }

    fn eval(&self, state: &PlantState) -> f64 {
        match *self {
            BasisFunction::Lag { lag } => state.output(lag),
            BasisFunction::Gaussian { lag, center, width } => {
                let d = state.output(lag) - center;
                (-(d * d) / width).exp()
            }
            BasisFunction::Constant { value } => value,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            BasisFunction::Gaussian { center, width, .. } => {
                if !center.is_finite() || !(width > 0.0 && width.is_finite()) {
                    return Err(Error::config(
                        "gaussian basis needs finite center and width > 0",
                    ));
                }
            }
            BasisFunction::Constant { value } if !value.is_finite() => {
                return Err(Error::config("constant basis must be finite"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Basis for `φ_f` plus the scalar input gain feature `φ_g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub functions: Vec<BasisFunction>,
    #[serde(default = "BasisConfig::unit_gain")]
    pub input_gain: BasisFunction,
}

impl BasisConfig {
    fn unit_gain() -> BasisFunction {
        BasisFunction::Constant { value: 1.0 }
    }

    /// The basis used in the reference experiment:
    /// `φ_f = [y(k), y(k-1), exp(-(y(k) - π/2)²/4)]`, `φ_g = 1`.
    pub fn reference_experiment() -> Self {
        BasisConfig {
            functions: vec![
                BasisFunction::Lag { lag: 0 },
                BasisFunction::Lag { lag: 1 },
                BasisFunction::Gaussian {
                    lag: 0,
                    center: std::f64::consts::FRAC_PI_2,
                    width: 4.0,
                },
            ],
            input_gain: Self::unit_gain(),
        }
    }

    /// Regressor dimension `n = dim(φ_f) + 1`.
    pub fn dim(&self) -> usize {
        self.functions.len() + 1
    }

    pub fn max_lag(&self) -> usize {
        self.functions
            .iter()
            .chain(std::iter::once(&self.input_gain))
            .map(BasisFunction::lag)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.functions
            .iter()
            .try_for_each(BasisFunction::validate)?;
        self.input_gain.validate()
    }
}

/// `φ(k)`: basis outputs followed by the input slot `φ_g·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorVector(DVector<f64>);

impl RegressorVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::SignalCorruption {
                step: 0,
                what: "regressor entry",
            });
        }
        Ok(RegressorVector(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }
}

/// Features known before the input is chosen: `φ_f(k)` and `φ_g(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub phi_f: DVector<f64>,
    pub phi_g: f64,
}

impl Features {
    pub fn regressor(&self, u: f64) -> Result<RegressorVector> {
        if !u.is_finite() {
            return Err(Error::SignalCorruption {
                step: 0,
                what: "control input",
            });
        }
        let n = self.phi_f.len() + 1;
        let mut values = self.phi_f.clone().resize_vertically(n, 0.0);
        values[n - 1] = self.phi_g * u;
        RegressorVector::new(values)
    }

    /// `θ_fᵀφ_f` for any parameter vector of length `n`.
    pub fn f_of(&self, theta: &DVector<f64>) -> f64 {
        theta.rows(0, self.phi_f.len()).dot(&self.phi_f)
    }

    /// `θ_g·φ_g` for any parameter vector of length `n`.
    pub fn g_of(&self, theta: &DVector<f64>) -> f64 {
        theta[self.phi_f.len()] * self.phi_g
    }
}

/// Output history, newest first, and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    y_history: VecDeque<f64>,
    pub u_last: f64,
    pub k: usize,
}

impl PlantState {
    /// History of depth `max_lag + 1` holding `y(0) = initial_output` and
    /// `y(-j) = prior_output` for every older slot.
    pub fn new(initial_output: f64, prior_output: f64, max_lag: usize) -> Self {
        let mut y_history = VecDeque::with_capacity(max_lag + 1);
        y_history.push_back(initial_output);
        for _ in 0..max_lag {
            y_history.push_back(prior_output);
        }
        PlantState {
            y_history,
            u_last: 0.0,
            k: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.y_history.len()
    }

    /// `y(k - lag)`. Panics when `lag` exceeds the history depth.
    pub fn output(&self, lag: usize) -> f64 {
        self.y_history[lag]
    }

    pub fn y(&self) -> f64 {
        self.y_history[0]
    }

    /// Shift in `y(k+1)` after applying `u(k)`.
    pub fn advance(&mut self, y_next: f64, u: f64) {
        self.y_history.pop_back();
        self.y_history.push_front(y_next);
        self.u_last = u;
        self.k += 1;
    }

    pub fn evaluate_features(&self, basis: &BasisConfig) -> Result<Features> {
        if basis.max_lag() >= self.depth() {
            return Err(Error::Precondition(format!(
                "history depth {} too shallow for lag {}",
                self.depth(),
                basis.max_lag()
            )));
        }
        if self.y_history.iter().any(|y| !y.is_finite()) {
            return Err(Error::SignalCorruption {
                step: self.k,
                what: "output history",
            });
        }
        let phi_f = DVector::from_iterator(
            basis.functions.len(),
            basis.functions.iter().map(|b| b.eval(self)),
        );
        Ok(Features {
            phi_f,
            phi_g: basis.input_gain.eval(self),
        })
    }
}

pub fn build_regressor(state: &PlantState, u: f64, basis: &BasisConfig) -> Result<RegressorVector> {
    state
        .evaluate_features(basis)?
        .regressor(u)
        .map_err(|e| match e {
            Error::SignalCorruption { what, .. } => Error::SignalCorruption {
                step: state.k,
                what,
            },
            other => other,
        })
}

/// True parameter vector and the known lower bound `g̲` on `|g(k)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueParameters {
    pub theta: DVector<f64>,
    pub g_lower: f64,
}

impl TrueParameters {
    pub fn new(theta: DVector<f64>, g_lower: f64, basis: &BasisConfig) -> Result<Self> {
        if theta.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: theta.len(),
            });
        }
        if !(g_lower > 0.0 && g_lower.is_finite()) {
            return Err(Error::config("g_lower must be positive"));
        }
        if let BasisFunction::Constant { value } = basis.input_gain {
            let g = theta[theta.len() - 1] * value;
            if g.abs() < g_lower {
                return Err(Error::config(format!(
                    "|g| = {} violates the lower bound g_lower = {g_lower}",
                    g.abs()
                )));
            }
        }
        Ok(TrueParameters { theta, g_lower })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// `θᵀφ + w`.
pub fn plant_step(params: &TrueParameters, phi: &RegressorVector, w: f64) -> Result<f64> {
    if params.dim() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: phi.len(),
        });
    }
    Ok(params.theta.dot(phi.as_vector()) + w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    Zero,
    /// `amplitude·sin(y(k))` before `switch_step`, zero afterwards.
    PiecewiseOutputDependent,
    /// Seeded uniform noise on `[-amplitude, amplitude]` before `switch_step`.
    BoundedCustom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    #[serde(default)]
    pub switch_step: usize,
    #[serde(default)]
    pub amplitude: f64,
    /// Declared bound `W`; read only by the analysis module.
    #[serde(default)]
    pub bound: f64,
}

impl DisturbanceSpec {
    pub fn zero() -> Self {
        DisturbanceSpec {
            kind: DisturbanceKind::Zero,
            switch_step: 0,
            amplitude: 0.0,
            bound: 0.0,
        }
    }

    /// `sin(y(k))` for `k < 500`, zero afterwards.
    pub fn reference_experiment() -> Self {
        DisturbanceSpec {
            kind: DisturbanceKind::PiecewiseOutputDependent,
            switch_step: 500,
            amplitude: 1.0,
            bound: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::config(
                "disturbance amplitude must be finite and >= 0",
            ));
        }
        if !(self.bound >= 0.0 && self.bound.is_finite()) {
            return Err(Error::config("disturbance bound W must be finite and >= 0"));
        }
        if self.kind != DisturbanceKind::Zero && self.amplitude > self.bound {
            return Err(Error::config(format!(
                "amplitude {} exceeds the declared bound W = {}",
                self.amplitude, self.bound
            )));
        }
        Ok(())
    }
}

/// One disturbance sample; `rng` is drawn from only by [`DisturbanceKind::BoundedCustom`].
pub fn disturbance_sample<R: RngCore + ?Sized>(
    spec: &DisturbanceSpec,
    k: usize,
    y: f64,
    rng: &mut R,
) -> f64 {
    if k >= spec.switch_step {
        return 0.0;
    }
    match spec.kind {
        DisturbanceKind::Zero => 0.0,
        DisturbanceKind::PiecewiseOutputDependent => spec.amplitude * y.sin(),
        DisturbanceKind::BoundedCustom => {
            if spec.amplitude == 0.0 {
                0.0
            } else {
                rng.random_range(-spec.amplitude..=spec.amplitude)
            }
        }
    }
}

/// Disturbance generator owning its noise stream.
#[derive(Debug, Clone)]
pub struct DisturbanceSource {
    spec: DisturbanceSpec,
    rng: rand_chacha::ChaCha8Rng,
}

impl DisturbanceSource {
    pub fn new(spec: DisturbanceSpec, seed: u64) -> Self {
        use rand::SeedableRng;
        DisturbanceSource {
            spec,
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn spec(&self) -> &DisturbanceSpec {
        &self.spec
    }

    pub fn sample(&mut self, k: usize, y: f64) -> f64 {
        disturbance_sample(&self.spec, k, y, &mut self.rng)
    }
}
