//! Scenario configuration: a TOML file with the sections `plant`, `disturbance`,
//! `estimator`, `controller` and `simulation`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::SystemConstants;
use crate::baselines::{DEFAULT_CAPACITY, DEFAULT_NOVELTY_TOL};
use crate::controller::{ControllerConfig, ReferenceModel, ReferenceSignal};
use crate::error::{Error, Result};
use crate::estimator::{EtaPolicy, InformationParams, DEFAULT_EPS_DIV};
use crate::linalg::DEFAULT_EPS_RANK;
use crate::plant::{BasisConfig, DisturbanceSpec, TrueParameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: PlantSection,
    pub disturbance: DisturbanceSpec,
    pub estimator: EstimatorSection,
    pub controller: ControllerSection,
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub theta: Vec<f64>,
    /// `y(0)`.
    #[serde(default)]
    pub initial_output: f64,
    /// `y(-j)` for every lag `j ≥ 1`.
    #[serde(default)]
    pub prior_output: f64,
    pub basis: BasisConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    DfCl,
    StackManager,
    CondNumber,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::DfCl => "df_cl",
            EstimatorKind::StackManager => "stack_manager",
            EstimatorKind::CondNumber => "cond_number",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaPolicyKind {
    HalfOfMax,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub kind: EstimatorKind,
    pub mu: f64,
    pub alpha: f64,
    pub eta_policy: EtaPolicyKind,
    /// Gain for `eta_policy = "fixed"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// `θ̂(0)`.
    pub theta_hat0: Vec<f64>,
    #[serde(default = "default_eps_rank")]
    pub eps_rank: f64,
    #[serde(default = "default_eps_div")]
    pub eps_div: f64,
    /// Novelty threshold of the stack-manager baseline.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Stack capacity of both baselines.
    #[serde(default = "default_capacity")]
    pub capacity: usize,
}

fn default_eps_rank() -> f64 {
    DEFAULT_EPS_RANK
}
fn default_eps_div() -> f64 {
    DEFAULT_EPS_DIV
}
fn default_tol() -> f64 {
    DEFAULT_NOVELTY_TOL
}
fn default_capacity() -> usize {
    DEFAULT_CAPACITY
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlLaw {
    #[default]
    CertaintyEquivalence,
    /// Oracle law with true `f`, `g` and `w`; for diagnostics.
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub gamma_e: f64,
    pub a_m: f64,
    pub b_m: f64,
    pub g_lower: f64,
    #[serde(default)]
    pub y_m0: f64,
    #[serde(default)]
    pub law: ControlLaw,
    #[serde(default)]
    pub reference: ReferenceSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub diagnostics: bool,
    /// Override for the `ε` of the tracking-error bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PathBuf>,
}

impl ScenarioConfig {
    /// The reference experiment: unstable plant with `w(k) = sin(y(k))` until step
    /// 500, DF-CL with `α = 1`, `μ = 0.7`, `η = η̄_CL/2`, `γ_e = 0.5`,
    /// `a_m = −0.5`, `b_m = 0.5`, `θ̂(0) = [0, 0, 0, 1]`, horizon 1000.
    pub fn reference_experiment() -> Self {
        ScenarioConfig {
            plant: PlantSection {
                theta: vec![-2.0, 0.5, 1.0, 1.0],
                initial_output: 0.0,
                prior_output: 0.0,
                basis: BasisConfig::reference_experiment(),
            },
            disturbance: DisturbanceSpec::reference_experiment(),
            estimator: EstimatorSection {
                kind: EstimatorKind::DfCl,
                mu: 0.7,
                alpha: 1.0,
                eta_policy: EtaPolicyKind::HalfOfMax,
                eta: None,
                theta_hat0: vec![0.0, 0.0, 0.0, 1.0],
                eps_rank: DEFAULT_EPS_RANK,
                eps_div: DEFAULT_EPS_DIV,
                tol: DEFAULT_NOVELTY_TOL,
                capacity: DEFAULT_CAPACITY,
            },
            controller: ControllerSection {
                gamma_e: 0.5,
                a_m: -0.5,
                b_m: 0.5,
                g_lower: 0.1,
                y_m0: 0.0,
                law: ControlLaw::CertaintyEquivalence,
                reference: ReferenceSignal::default(),
            },
            simulation: SimulationSection {
                horizon: 1000,
                seed: 0,
                diagnostics: false,
                epsilon: None,
                csv: None,
                plot: None,
            },
        }
    }

    pub fn with_estimator(mut self, kind: EstimatorKind) -> Self {
        self.estimator.kind = kind;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn dim(&self) -> usize {
        self.plant.basis.dim()
    }

    pub fn true_parameters(&self) -> Result<TrueParameters> {
        TrueParameters::new(
            DVector::from_column_slice(&self.plant.theta),
            self.controller.g_lower,
            &self.plant.basis,
        )
    }

    pub fn information_params(&self) -> InformationParams {
        InformationParams {
            mu: self.estimator.mu,
            alpha: self.estimator.alpha,
            eps_rank: self.estimator.eps_rank,
            eps_div: self.estimator.eps_div,
        }
    }

    pub fn eta_policy(&self) -> Result<EtaPolicy> {
        match (self.estimator.eta_policy, self.estimator.eta) {
            (EtaPolicyKind::HalfOfMax, None) => Ok(EtaPolicy::HalfOfMax),
            (EtaPolicyKind::HalfOfMax, Some(_)) => Err(Error::config(
                "estimator.eta is only valid with eta_policy = \"fixed\"",
            )),
            (EtaPolicyKind::Fixed, Some(eta)) if eta > 0.0 && eta.is_finite() => {
                Ok(EtaPolicy::Fixed(eta))
            }
            (EtaPolicyKind::Fixed, _) => Err(Error::config(
                "eta_policy = \"fixed\" needs estimator.eta > 0",
            )),
        }
    }

    pub fn controller_config(&self) -> Result<ControllerConfig> {
        ControllerConfig::new(self.controller.gamma_e, self.controller.g_lower)
    }

    pub fn reference_model(&self) -> Result<ReferenceModel> {
        ReferenceModel::new(
            self.controller.a_m,
            self.controller.b_m,
            self.controller.y_m0,
        )
    }

    pub fn system_constants(&self) -> Result<SystemConstants> {
        SystemConstants::new(
            self.controller.gamma_e,
            self.dim(),
            self.disturbance.bound,
            self.estimator.mu,
            self.estimator.alpha,
            self.simulation.epsilon,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        self.plant.basis.validate()?;
        if !self.plant.initial_output.is_finite() || !self.plant.prior_output.is_finite() {
            return Err(Error::config("initial outputs must be finite"));
        }
        self.true_parameters()?;
        if self.estimator.theta_hat0.len() != n {
            return Err(Error::config(format!(
                "estimator.theta_hat0 has length {}, expected {n}",
                self.estimator.theta_hat0.len()
            )));
        }
        if self.estimator.theta_hat0.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("estimator.theta_hat0 must be finite"));
        }
        self.information_params().validate()?;
        self.eta_policy()?;
        if !(self.estimator.tol > 0.0) {
            return Err(Error::config("estimator.tol must be > 0"));
        }
        if self.estimator.capacity < n {
            return Err(Error::config(format!(
                "estimator.capacity {} below the regressor dimension {n}",
                self.estimator.capacity
            )));
        }
        self.disturbance.validate()?;
        self.controller_config()?;
        self.reference_model()?;
        self.controller.reference.validate()?;
        if self.simulation.horizon < 1 {
            return Err(Error::config("simulation.horizon must be >= 1"));
        }
        self.system_constants()
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }
}
