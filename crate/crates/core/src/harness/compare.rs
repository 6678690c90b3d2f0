//! Side-by-side runs of several estimators on one closed-loop scenario.

use std::ops::Range;

use super::config::ScenarioConfig;
use super::sim::{rmse, run_scenario, Run};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    /// One entry per window, in the order given to [`compare`].
    pub rmse: Vec<f64>,
    pub max_abs_e: f64,
    pub final_theta_tilde_norm: f64,
    pub k_e: Option<usize>,
    pub clamp_count: usize,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub windows: Vec<Range<usize>>,
    /// Ordered by RMSE over the last window, ascending.
    pub rows: Vec<ComparisonRow>,
    pub runs: Vec<Run>,
}

/// Default windows: before and after the disturbance switch.
pub fn default_windows(cfg: &ScenarioConfig) -> Vec<Range<usize>> {
    let h = cfg.simulation.horizon;
    let s = cfg.disturbance.switch_step.min(h);
    if s == 0 || s == h {
        std::iter::once(0..h).collect()
    } else {
        vec![0..s, s..h]
    }
}

/// Runs every scenario and ranks them. All scenarios must share plant,
/// disturbance, controller, horizon and seed; only the estimator may differ.
pub fn compare(
    scenarios: &[ScenarioConfig],
    windows: Option<Vec<Range<usize>>>,
) -> Result<Comparison> {
    let first = scenarios
        .first()
        .ok_or_else(|| Error::config("comparison needs at least one scenario"))?;
    for (i, cfg) in scenarios.iter().enumerate().skip(1) {
        let differs = if cfg.plant != first.plant {
            Some("plant")
        } else if cfg.disturbance != first.disturbance {
            Some("disturbance")
        } else if cfg.controller != first.controller {
            Some("controller")
        } else if cfg.simulation.horizon != first.simulation.horizon
            || cfg.simulation.seed != first.simulation.seed
        {
            Some("simulation horizon/seed")
        } else {
            None
        };
        if let Some(section) = differs {
            return Err(Error::config(format!(
                "scenario {i} differs from scenario 0 in its {section} section"
            )));
        }
    }
    let windows = windows.unwrap_or_else(|| default_windows(first));
    if windows.is_empty()
        || windows
            .iter()
            .any(|w| w.is_empty() || w.end > first.simulation.horizon)
    {
        return Err(Error::config(
            "comparison windows must be non-empty and inside the horizon",
        ));
    }

    let results: Vec<Result<Run>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|cfg| scope.spawn(move || run_scenario(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let labels = labels(scenarios);
    let mut rows: Vec<ComparisonRow> = runs
        .iter()
        .zip(labels)
        .map(|(run, label)| ComparisonRow {
            label,
            rmse: windows
                .iter()
                .map(|w| rmse(&run.records, w.clone()))
                .collect(),
            max_abs_e: run.records.iter().map(|r| r.e.abs()).fold(0.0, f64::max),
            final_theta_tilde_norm: run.final_state.theta_tilde_norm,
            k_e: run.k_e,
            clamp_count: run.clamp_count,
        })
        .collect();
    rows.sort_by(|a, b| a.rmse.last().unwrap().total_cmp(b.rmse.last().unwrap()));

    Ok(Comparison {
        windows,
        rows,
        runs,
    })
}

fn labels(scenarios: &[ScenarioConfig]) -> Vec<String> {
    let base: Vec<&str> = scenarios.iter().map(|c| c.estimator.kind.name()).collect();
    base.iter()
        .enumerate()
        .map(|(i, name)| {
            if base.iter().filter(|b| *b == name).count() > 1 {
                let ordinal = base[..i].iter().filter(|b| *b == name).count() + 1;
                format!("{name}-{ordinal}")
            } else {
                (*name).to_string()
            }
        })
        .collect()
}
