//! One function per subcommand. Each returns the rendered output text;
//! `main` writes it through the atomic emitter.

use herald_core::analysis::{
    fidelity_vs_lambda_ratio, fidelity_vs_theta, optimal_tau, sweep_ptotal, AnalysisError, Grid,
};
use herald_core::atom_cavity::no_jump_amplitudes;
use herald_core::optics::DetectorId;
use herald_core::protocol::{run_cascade, ClickSequence, QutritPairState};
use herald_core::trajectories::{ensemble, write_ensemble_csv, TrajectoryError};
use serde_json::{json, Value};

use crate::config::{resolve_sequence, resolve_taus, Format, Resolved, ScanAxis, TauSpec};
use crate::output::{comment_block, json_envelope};
use crate::AppError;

fn analysis_error(e: AnalysisError) -> AppError {
    match e {
        AnalysisError::Overdamped { omega_k_sq } => crate::config::overdamped_error(omega_k_sq),
        AnalysisError::EmptyGrid
        | AnalysisError::BadGrid { .. }
        | AnalysisError::NegativeGridTime(_)
        | AnalysisError::BadRatio(_)
        | AnalysisError::BadEfficiency(_)
        | AnalysisError::Model(_) => AppError::usage(e.to_string()),
        other => AppError::domain(other.to_string()),
    }
}

fn trajectory_error(e: TrajectoryError) -> AppError {
    AppError::domain(e.to_string())
}

fn grid_or(resolved: &mut Resolved, fallback: Grid) -> Grid {
    let grid = resolved.config.grid.unwrap_or(fallback);
    resolved.config.grid = Some(grid);
    grid
}

/// Enforces the τ window resolution for commands whose contract ties the
/// "optimal" token to the underdamped regime, without requiring explicit
/// windows otherwise.
fn resolve_optimal_if_requested(resolved: &mut Resolved) -> Result<(), AppError> {
    if matches!(&resolved.config.taus, TauSpec::Token(t) if t == "optimal") {
        resolve_taus(resolved)?;
    }
    Ok(())
}

/// No-jump amplitude series (t, |x|², |y|², |z|², P_j) on the time grid.
pub fn amplitudes(resolved: &mut Resolved) -> Result<String, AppError> {
    let grid = grid_or(resolved, Grid::default_tau());
    if grid.start < 0.0 {
        return Err(AppError::usage(format!(
            "time grid must start at or after 0, got {}",
            grid.start
        )));
    }
    let mut rows = Vec::with_capacity(grid.count);
    for t in grid.points() {
        let amps =
            no_jump_amplitudes(&resolved.params, t).map_err(|e| AppError::domain(e.to_string()))?;
        rows.push([
            t,
            amps.x.norm_sqr(),
            amps.y.norm_sqr(),
            amps.z.norm_sqr(),
            amps.survival(),
        ]);
    }
    match resolved.format() {
        Format::Csv => {
            let mut out = comment_block(
                resolved,
                &[("columns", "t,x_sq,y_sq,z_sq,p_survive".to_string())],
            );
            for row in rows {
                out.push_str(&format!(
                    "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}\n",
                    row[0], row[1], row[2], row[3], row[4]
                ));
            }
            Ok(out)
        }
        Format::Json => json_envelope(
            resolved,
            json!({
                "columns": ["t", "x_sq", "y_sq", "z_sq", "p_survive"],
                "rows": rows,
            }),
        ),
    }
}

/// Jump-unraveled ensemble, one record per trajectory.
pub fn trajectories(resolved: &mut Resolved) -> Result<String, AppError> {
    let t_max = match resolved.config.trajectories.t_max {
        Some(t) => t,
        None => resolve_taus(resolved)?[0],
    };
    resolved.config.trajectories.t_max = Some(t_max);
    let n = resolved.config.trajectories.n;
    let records =
        ensemble(&resolved.params, t_max, n, resolved.config.seed).map_err(trajectory_error)?;
    match resolved.format() {
        Format::Csv => {
            let mut out = comment_block(
                resolved,
                &[("n", n.to_string()), ("t_max", t_max.to_string())],
            );
            let mut body = Vec::new();
            write_ensemble_csv(&records, &mut body).map_err(trajectory_error)?;
            out.push_str(&String::from_utf8(body).expect("csv is utf-8"));
            Ok(out)
        }
        Format::Json => {
            let rows: Vec<Value> = records
                .iter()
                .map(|r| match r.first_jump() {
                    Some(event) => json!({
                        "index": r.index,
                        "first_jump_time": event.time,
                        "channel": event.channel.label(),
                        "survived": false,
                    }),
                    None => json!({
                        "index": r.index,
                        "first_jump_time": Value::Null,
                        "channel": Value::Null,
                        "survived": true,
                    }),
                })
                .collect();
            json_envelope(resolved, json!({ "records": rows }))
        }
    }
}

/// The four-click cascade: probability, fidelity to the target, decoded
/// register, and the intermediate collapse chain.
pub fn cascade(resolved: &mut Resolved) -> Result<String, AppError> {
    let clicks = resolve_sequence(resolved)?;
    let names: Vec<String> = clicks.iter().map(DetectorId::to_string).collect();
    resolved.config.sequence = Some(names.clone());
    let result = run_cascade(
        &resolved.params,
        resolved.angle,
        &ClickSequence::new(clicks),
    )
    .map_err(|e| AppError::domain(e.to_string()))?;
    let fidelity = result
        .decoded
        .as_ref()
        .map(|d| d.fidelity(&QutritPairState::target()))
        .transpose()
        .map_err(|e| AppError::domain(e.to_string()))?;
    match resolved.format() {
        Format::Csv => {
            let mut out = comment_block(resolved, &[("sequence", names.join(" "))]);
            out.push_str(&format!("probability,{:.11e}\n", result.probability));
            match fidelity {
                Some(f) => out.push_str(&format!("fidelity,{f:.11e}\n")),
                None => out.push_str("fidelity,\n"),
            }
            for (k, state) in result.intermediate_states.iter().enumerate() {
                out.push_str(&format!(
                    "intermediate_norm_sq_{k},{:.11e}\n",
                    state.norm_sq()
                ));
            }
            if let Some(decoded) = &result.decoded {
                for a in 0..3 {
                    for b in 0..3 {
                        out.push_str(&format!(
                            "decoded_{a}{b}_re,{:.11e}\n",
                            decoded.amps[a][b].re
                        ));
                        out.push_str(&format!(
                            "decoded_{a}{b}_im,{:.11e}\n",
                            decoded.amps[a][b].im
                        ));
                    }
                }
            }
            Ok(out)
        }
        Format::Json => {
            let mut data = result.to_json();
            data["fidelity"] = match fidelity {
                Some(f) => json!(f),
                None => Value::Null,
            };
            data["sequence"] = json!(names);
            json_envelope(resolved, data)
        }
    }
}

/// The full 35-pattern photon-counting distribution.
pub fn outcomes(resolved: &mut Resolved) -> Result<String, AppError> {
    let list = herald_core::protocol::enumerate_outcomes(&resolved.params, resolved.angle)
        .map_err(|e| AppError::domain(e.to_string()))?;
    match resolved.format() {
        Format::Csv => {
            let mut out = comment_block(
                resolved,
                &[(
                    "columns",
                    "n_da_f,n_da_s,n_db_f,n_db_s,probability".to_string(),
                )],
            );
            for outcome in &list {
                out.push_str(&format!(
                    "{},{},{},{},{:.11e}\n",
                    outcome.pattern[0],
                    outcome.pattern[1],
                    outcome.pattern[2],
                    outcome.pattern[3],
                    outcome.probability
                ));
            }
            Ok(out)
        }
        Format::Json => {
            let rows: Vec<Value> = list
                .iter()
                .map(|o| {
                    json!({
                        "pattern": o.pattern.to_vec(),
                        "probability": o.probability,
                        "conditional": o
                            .conditional
                            .as_ref()
                            .map(|c| c.to_json())
                            .unwrap_or(Value::Null),
                    })
                })
                .collect();
            json_envelope(resolved, json!({ "outcomes": rows }))
        }
    }
}

/// P_total versus the shared emission window.
pub fn sweep(resolved: &mut Resolved) -> Result<String, AppError> {
    resolve_optimal_if_requested(resolved)?;
    let grid = grid_or(resolved, Grid::default_tau());
    let mut series =
        sweep_ptotal(&resolved.params, resolved.angle, grid).map_err(analysis_error)?;
    series
        .params_echo
        .insert("seed".to_string(), resolved.config.seed.to_string());
    if let Ok(tau_star) = optimal_tau(&resolved.params) {
        series
            .params_echo
            .insert("tau_star".to_string(), format!("{tau_star:.15}"));
        if let Some((argmax, max)) = series.peak() {
            series
                .params_echo
                .insert("grid_argmax".to_string(), format!("{argmax:.15}"));
            series
                .params_echo
                .insert("grid_max".to_string(), format!("{max:.15e}"));
        }
    }
    match resolved.format() {
        Format::Csv => Ok(series.to_csv()),
        Format::Json => json_envelope(resolved, series.to_json()),
    }
}

/// Fidelity scans over the splitter angle or the coupling ratio.
pub fn fidelity_scan(resolved: &mut Resolved, axis: ScanAxis) -> Result<String, AppError> {
    resolve_optimal_if_requested(resolved)?;
    resolved.config.axis = Some(axis);
    let mut series = match axis {
        ScanAxis::Theta => {
            let grid = grid_or(
                resolved,
                Grid {
                    start: 0.0,
                    stop: 1.5,
                    count: 301,
                },
            );
            fidelity_vs_theta(&resolved.params, grid).map_err(analysis_error)?
        }
        ScanAxis::Ratio => {
            let grid = grid_or(
                resolved,
                Grid {
                    start: 0.5,
                    stop: 2.0,
                    count: 301,
                },
            );
            fidelity_vs_lambda_ratio(resolved.angle, grid).map_err(analysis_error)?
        }
    };
    series
        .params_echo
        .insert("seed".to_string(), resolved.config.seed.to_string());
    match resolved.format() {
        Format::Csv => Ok(series.to_csv()),
        Format::Json => json_envelope(resolved, series.to_json()),
    }
}
