//! Reference model, certainty-equivalence control law and the ideal controller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First-order reference model `y_m(k+1) = −a_m y_m(k) + b_m r(k)` with unity DC gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceModel {
    a_m: f64,
    b_m: f64,
    pub y_m: f64,
}

impl ReferenceModel {
    pub fn new(a_m: f64, b_m: f64, y_m: f64) -> Result<Self> {
        if !(a_m.abs() < 1.0) {
            return Err(Error::config(format!("|a_m| must be < 1, got {a_m}")));
        }
        if b_m != 1.0 + a_m {
            return Err(Error::config(format!(
                "b_m must equal 1 + a_m = {}, got {b_m}",
                1.0 + a_m
            )));
        }
        if !y_m.is_finite() {
            return Err(Error::config("initial reference output must be finite"));
        }
        Ok(ReferenceModel { a_m, b_m, y_m })
    }

    pub fn a_m(&self) -> f64 {
        self.a_m
    }

    pub fn b_m(&self) -> f64 {
        self.b_m
    }

    /// `y_m(k+1)` without advancing.
    pub fn peek(&self, r: f64) -> f64 {
        -self.a_m * self.y_m + self.b_m * r
    }
}

pub fn reference_step(model: &mut ReferenceModel, r: f64) -> f64 {
    model.y_m = model.peek(r);
    model.y_m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    /// Desired error contraction `e(k+1) = γ_e e(k)`.
    pub gamma_e: f64,
    /// Known lower bound `g̲` on `|g(k)|`, used to clamp `ĝ`.
    pub g_lower: f64,
}

impl ControllerConfig {
    pub fn new(gamma_e: f64, g_lower: f64) -> Result<Self> {
        if !(gamma_e != 0.0 && gamma_e.abs() < 1.0) {
            return Err(Error::config(format!(
                "0 < |gamma_e| < 1 required, got {gamma_e}"
            )));
        }
        if !(g_lower > 0.0 && g_lower.is_finite()) {
            return Err(Error::config(format!("g_lower must be > 0, got {g_lower}")));
        }
        Ok(ControllerConfig { gamma_e, g_lower })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    /// `ĝ` was replaced by `±g̲`.
    pub clamped: bool,
}

/// `u_p = (γ_e e − f̂ + y_m(k+1)) / ĝ_safe`, with `ĝ_safe = sign(ĝ)·max(|ĝ|, g̲)`.
pub fn control(
    e: f64,
    f_hat: f64,
    g_hat: f64,
    y_m_next: f64,
    cfg: &ControllerConfig,
) -> Result<ControlOutput> {
    if ![e, f_hat, g_hat, y_m_next].iter().all(|v| v.is_finite()) {
        return Err(Error::SignalCorruption {
            step: 0,
            what: "controller input",
        });
    }
    let sign = if g_hat < 0.0 { -1.0 } else { 1.0 };
    let clamped = g_hat.abs() < cfg.g_lower;
    let g_safe = if clamped { sign * cfg.g_lower } else { g_hat };
    Ok(ControlOutput {
        u: (cfg.gamma_e * e - f_hat + y_m_next) / g_safe,
        clamped,
    })
}

/// Oracle control using the true `f`, `g` and the actual disturbance sample.
pub fn ideal_control(
    e: f64,
    f_true: f64,
    g_true: f64,
    w: f64,
    y_m_next: f64,
    gamma_e: f64,
    g_lower: f64,
) -> Result<f64> {
    if g_true.abs() < g_lower {
        return Err(Error::config(format!(
            "|g| = {} below the lower bound {g_lower}",
            g_true.abs()
        )));
    }
    Ok((gamma_e * e - f_true - w + y_m_next) / g_true)
}

/// Reference trajectory `r(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSignal {
    Constant {
        value: f64,
    },
    /// `+amplitude` for the first half of each period, `−amplitude` for the second.
    Square {
        amplitude: f64,
        period: usize,
    },
    Sine {
        amplitude: f64,
        period: usize,
    },
}

impl Default for ReferenceSignal {
    fn default() -> Self {
        ReferenceSignal::Square {
            amplitude: 1.0,
            period: 200,
        }
    }
}

impl ReferenceSignal {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            ReferenceSignal::Constant { value } => value,
            ReferenceSignal::Square { amplitude, period } => {
                if (k % period) < period.div_ceil(2) {
                    amplitude
                } else {
                    -amplitude
                }
            }
            ReferenceSignal::Sine { amplitude, period } => {
                amplitude * (2.0 * std::f64::consts::PI * (k % period) as f64 / period as f64).sin()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ReferenceSignal::Constant { value } if !value.is_finite() => {
                Err(Error::config("reference value must be finite"))
            }
            ReferenceSignal::Square { amplitude, period }
            | ReferenceSignal::Sine { amplitude, period } => {
                if period == 0 || !amplitude.is_finite() {
                    Err(Error::config(
                        "reference needs a finite amplitude and period >= 1",
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}
