//! CSV export. Every file starts with the scenario TOML as `# ` comment lines,
//! followed by a header row. Floats use `{:.16e}` so values round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::compare::Comparison;
use super::sim::Run;
use crate::error::{Error, Result};

fn float(out: &mut String, v: f64) {
    write!(out, ",{v:.16e}").unwrap();
}

fn opt_float(out: &mut String, v: Option<f64>) {
    match v {
        Some(v) => float(out, v),
        None => out.push(','),
    }
}

fn config_echo(out: &mut String, toml: &str) {
    for line in toml.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
}

/// Per-step trajectory of a run, one row per `k`.
pub fn run_csv(run: &Run) -> Result<String> {
    if run.records.is_empty() {
        return Err(Error::Precondition("run has no records to export".into()));
    }
    let n = run.config.dim();
    let diag = run.diagnostics.as_ref();

    let mut out = String::new();
    config_echo(&mut out, &run.config.to_toml_string());
    out.push_str("k,r,y_m,y,u,e,q");
    for i in 0..n {
        write!(out, ",theta_hat_{i}").unwrap();
    }
    out.push_str(",theta_tilde_norm,rank,lambda_min,lambda_max,clamp_active");
    if diag.is_some() {
        out.push_str(",w,eta,eta_cl");
        for i in 0..n {
            write!(out, ",w_omega_{i}").unwrap();
        }
        out.push_str(
            ",w_omega_norm,vartheta_norm,v_theta,v_e,v,estimate_bound_residual,error_bound_residual,\
             lyapunov_ratio,contraction_residual,lyapunov_bound_residual,beta6,u_trace,u_spectral_radius",
        );
    }
    out.push('\n');

    for (idx, rec) in run.records.iter().enumerate() {
        write!(out, "{}", rec.k).unwrap();
        for v in [rec.r, rec.y_m, rec.y, rec.u, rec.e, rec.q] {
            float(&mut out, v);
        }
        for v in rec.theta_hat.iter() {
            float(&mut out, *v);
        }
        float(&mut out, rec.theta_tilde_norm);
        write!(out, ",{}", rec.rank).unwrap();
        float(&mut out, rec.lambda_min);
        float(&mut out, rec.lambda_max);
        write!(out, ",{}", u8::from(rec.clamp_active)).unwrap();
        if let Some(d) = diag {
            let dr = &d.records[idx];
            float(&mut out, dr.w);
            float(&mut out, dr.eta);
            float(&mut out, dr.eta_cl);
            for v in dr.w_omega_term.iter() {
                float(&mut out, *v);
            }
            float(&mut out, dr.w_omega_term.norm());
            float(&mut out, dr.vartheta_norm);
            opt_float(&mut out, dr.lyapunov.map(|l| l.v_theta));
            opt_float(&mut out, dr.lyapunov.map(|l| l.v_e));
            opt_float(&mut out, dr.lyapunov.map(|l| l.v));
            opt_float(&mut out, dr.estimate_bound_residual);
            opt_float(&mut out, dr.error_bound_residual);
            opt_float(&mut out, dr.lyapunov_ratio);
            opt_float(&mut out, dr.contraction_residual);
            opt_float(&mut out, dr.lyapunov_bound_residual);
            opt_float(&mut out, dr.beta6);
            opt_float(&mut out, dr.u_eigs.as_ref().map(|u| u.trace));
            opt_float(&mut out, dr.u_eigs.as_ref().map(|u| u.spectral_radius));
        }
        out.push('\n');
    }
    Ok(out)
}

/// One row per method with per-window RMSE and run summaries.
pub fn summary_csv(cmp: &Comparison) -> String {
    let mut out = String::new();
    if let Some(run) = cmp.runs.first() {
        config_echo(&mut out, &run.config.to_toml_string());
    }
    out.push_str("method");
    for w in &cmp.windows {
        write!(out, ",rmse_{}_{}", w.start, w.end).unwrap();
    }
    out.push_str(",max_abs_e,final_theta_tilde_norm,k_e,clamp_count\n");
    for row in &cmp.rows {
        out.push_str(&row.label);
        for v in &row.rmse {
            float(&mut out, *v);
        }
        float(&mut out, row.max_abs_e);
        float(&mut out, row.final_theta_tilde_norm);
        match row.k_e {
            Some(k) => write!(out, ",{k}").unwrap(),
            None => out.push(','),
        }
        writeln!(out, ",{}", row.clamp_count).unwrap();
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScenarioConfig;
    use crate::harness::sim::run_scenario;

    fn run(diagnostics: bool) -> Run {
        let mut cfg = ScenarioConfig::reference_experiment();
        cfg.simulation.horizon = 50;
        cfg.simulation.diagnostics = diagnostics;
        run_scenario(&cfg).unwrap()
    }

    fn data_lines(csv: &str) -> Vec<&str> {
        csv.lines().filter(|l| !l.starts_with('#')).collect()
    }

    #[test]
    fn header_and_rows_have_equal_width() {
        for diag in [false, true] {
            let csv = run_csv(&run(diag)).unwrap();
            let lines = data_lines(&csv);
            assert_eq!(lines.len(), 51);
            let width = lines[0].split(',').count();
            assert!(lines.iter().all(|l| l.split(',').count() == width));
        }
    }

    #[test]
    fn echoed_config_parses_back() {
        let r = run(false);
        let csv = run_csv(&r).unwrap();
        let toml: String = csv
            .lines()
            .filter_map(|l| l.strip_prefix("# "))
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(ScenarioConfig::from_toml_str(&toml).unwrap(), r.config);
    }

    #[test]
    fn floats_round_trip() {
        let r = run(false);
        let csv = run_csv(&r).unwrap();
        let row: Vec<&str> = data_lines(&csv)[10].split(',').collect();
        assert_eq!(row[3].parse::<f64>().unwrap(), r.records[9].y);
    }

    #[test]
    fn empty_run_is_an_error() {
        let mut r = run(false);
        r.records.clear();
        assert!(run_csv(&r).is_err());
    }
}
