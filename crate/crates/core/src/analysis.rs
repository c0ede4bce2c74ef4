//! Parameter sweeps and derived figures of merit: total success probability
//! versus the emission window, the closed-form optimal window, fidelity
//! scans over the splitter angle and the coupling ratio, and the detector
//! efficiency budget.

use std::collections::BTreeMap;

use crate::atom_cavity::{ModelError, SystemParams};
use crate::exec;
use crate::optics::{OpticsError, SplitterAngle};
use crate::protocol::{
    emission_probability_p2, run_cascade, ClickSequence, ProtocolError, QutritPairState,
    PROBABILITY_FLOOR,
};
use serde_json::{json, Value};
use thiserror::Error;

/// Default emission-window sweep: κτ from 0 to 0.5, which brackets the
/// probability peak for couplings in the 10κ..15κ range.
pub const DEFAULT_SWEEP_STOP: f64 = 0.5;
pub const DEFAULT_SWEEP_POINTS: usize = 1000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("grid has no points")]
    EmptyGrid,
    #[error("grid [{start}, {stop}] is not a finite increasing range")]
    BadGrid { start: f64, stop: f64 },
    #[error("grid values must be non-negative times, got {0}")]
    NegativeGridTime(f64),
    #[error(
        "overdamped regime (squared oscillation rate {omega_k_sq:.6e} ≤ 0): the closed-form \
         optimum does not apply; locate the maximum with sweep_ptotal instead"
    )]
    Overdamped { omega_k_sq: f64 },
    #[error("detector efficiency must lie in [0, 1], got {0}")]
    BadEfficiency(f64),
    #[error("coupling ratio must be positive and finite, got {0}")]
    BadRatio(f64),
    #[error("cascade probability vanishes; no conditional state to score")]
    DegenerateCascade,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

/// An inclusive linear grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self, AnalysisError> {
        if count == 0 {
            return Err(AnalysisError::EmptyGrid);
        }
        if !start.is_finite() || !stop.is_finite() {
            return Err(AnalysisError::BadGrid { start, stop });
        }
        if count >= 2 && stop <= start {
            return Err(AnalysisError::BadGrid { start, stop });
        }
        if count == 1 && stop < start {
            return Err(AnalysisError::BadGrid { start, stop });
        }
        Ok(Grid { start, stop, count })
    }

    pub fn default_tau() -> Self {
        Grid {
            start: 0.0,
            stop: DEFAULT_SWEEP_STOP,
            count: DEFAULT_SWEEP_POINTS,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = self.step();
        (0..self.count)
            .map(|i| {
                if i == self.count - 1 {
                    self.stop
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.stop - self.start) / (self.count - 1) as f64
        } else {
            0.0
        }
    }
}

/// One swept curve with provenance. `points` are (x, y) in grid order;
/// `params_echo` records every input needed to regenerate the series.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSeries {
    pub axis: String,
    pub unit: String,
    pub value: String,
    pub points: Vec<(f64, f64)>,
    pub params_echo: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl SweepSeries {
    /// The (x, y) pair with the largest y; the earliest on exact ties.
    pub fn peak(&self) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for &(x, y) in &self.points {
            if best.is_none_or(|(_, by)| y > by) {
                best = Some((x, y));
            }
        }
        best
    }

    /// Comment header (`# key=value`) followed by `x,y` rows at 12
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# axis={}\n", self.axis));
        out.push_str(&format!("# unit={}\n", self.unit));
        out.push_str(&format!("# value={}\n", self.value));
        for (key, value) in &self.params_echo {
            out.push_str(&format!("# {key}={value}\n"));
        }
        for note in &self.notes {
            out.push_str(&format!("# note={note}\n"));
        }
        for (x, y) in &self.points {
            out.push_str(&format!("{x:.11e},{y:.11e}\n"));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "axis": self.axis,
            "unit": self.unit,
            "value": self.value,
            "params": self.params_echo,
            "notes": self.notes,
            "points": self.points.iter().map(|(x, y)| json!([x, y])).collect::<Vec<_>>(),
        })
    }
}

fn echo_params(p: &SystemParams) -> BTreeMap<String, String> {
    let mut echo = BTreeMap::new();
    echo.insert("lambda_l".to_string(), p.lambda_l.to_string());
    echo.insert("lambda_r".to_string(), p.lambda_r.to_string());
    echo.insert("kappa".to_string(), p.kappa.to_string());
    echo.insert("gamma_l".to_string(), p.gamma_l.to_string());
    echo.insert("gamma_r".to_string(), p.gamma_r.to_string());
    echo
}

/// P_total(τ) with all four emission windows equal to τ. The cascade factor
/// is τ-independent and computed once; the window factor is the fourth
/// power of the per-system emission weight.
pub fn sweep_ptotal(
    p: &SystemParams,
    angle: SplitterAngle,
    tau_grid: Grid,
) -> Result<SweepSeries, AnalysisError> {
    p.validate()?;
    let taus = tau_grid.points();
    for &tau in &taus {
        if tau < 0.0 {
            return Err(AnalysisError::NegativeGridTime(tau));
        }
    }
    let p3 = run_cascade(p, angle, &ClickSequence::golden())?.probability;
    let ys = exec::map_slice(&taus, |tau| {
        p3 * emission_probability_p2(p, &[*tau; 4]).expect("validated grid")
    });
    let mut echo = echo_params(p);
    echo.insert("theta".to_string(), format!("{:.15}", angle.theta()));
    echo.insert("cascade_probability".to_string(), p3.to_string());
    Ok(SweepSeries {
        axis: "kappa_tau".to_string(),
        unit: "dimensionless".to_string(),
        value: "p_total".to_string(),
        points: taus.into_iter().zip(ys).collect(),
        params_echo: echo,
        notes: Vec::new(),
    })
}

/// The closed-form probability-maximizing emission window
/// arctan(2Ω_k/Γ)/Ω_k, valid in the underdamped regime.
pub fn optimal_tau(p: &SystemParams) -> Result<f64, AnalysisError> {
    p.validate()?;
    let rates = p.rates();
    if !rates.is_underdamped() {
        return Err(AnalysisError::Overdamped {
            omega_k_sq: rates.omega_k_sq,
        });
    }
    let omega_k = rates.omega_k_magnitude();
    Ok((2.0 * omega_k / rates.total_decay).atan() / omega_k)
}

/// Comparison of the closed-form optimum against a grid maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakReport {
    pub tau_star: f64,
    pub grid_argmax: f64,
    pub grid_max: f64,
    pub within_one_step: bool,
}

pub fn peak_report(
    p: &SystemParams,
    angle: SplitterAngle,
    tau_grid: Grid,
) -> Result<PeakReport, AnalysisError> {
    let tau_star = optimal_tau(p)?;
    let series = sweep_ptotal(p, angle, tau_grid)?;
    let (grid_argmax, grid_max) = series.peak().ok_or(AnalysisError::EmptyGrid)?;
    let within_one_step = (grid_argmax - tau_star).abs() <= tau_grid.step() + 1e-15;
    Ok(PeakReport {
        tau_star,
        grid_argmax,
        grid_max,
        within_one_step,
    })
}

/// Fidelity of the heralded register against the maximally entangled
/// target as a function of the splitter angle. Angles whose cascade
/// probability vanishes are omitted from the series with a note.
pub fn fidelity_vs_theta(p: &SystemParams, theta_grid: Grid) -> Result<SweepSeries, AnalysisError> {
    p.validate()?;
    let target = QutritPairState::target();
    let mut points = Vec::with_capacity(theta_grid.count);
    let mut notes = Vec::new();
    for theta in theta_grid.points() {
        let angle = SplitterAngle::new(theta)?;
        let result = run_cascade(p, angle, &ClickSequence::golden())?;
        match &result.decoded {
            Some(decoded) if result.probability > PROBABILITY_FLOOR => {
                points.push((theta, decoded.fidelity(&target)?));
            }
            _ => notes.push(format!(
                "theta={theta:.11e} omitted: cascade probability is zero"
            )),
        }
    }
    let mut echo = echo_params(p);
    echo.insert(
        "target".to_string(),
        "maximally_entangled_qutrits".to_string(),
    );
    Ok(SweepSeries {
        axis: "theta".to_string(),
        unit: "rad".to_string(),
        value: "fidelity".to_string(),
        points,
        params_echo: echo,
        notes,
    })
}

/// Fidelity versus the coupling ratio r = λ_L/λ_R at a fixed splitter
/// angle, computed from the decoded cascade with λ_L = r, λ_R = 1.
/// The fidelity depends only on the ratio, so the absolute scale and the
/// dissipation rates are irrelevant and set to unit κ with no spontaneous
/// emission.
pub fn fidelity_vs_lambda_ratio(
    angle: SplitterAngle,
    ratio_grid: Grid,
) -> Result<SweepSeries, AnalysisError> {
    let target = QutritPairState::target();
    let mut points = Vec::with_capacity(ratio_grid.count);
    for ratio in ratio_grid.points() {
        if !ratio.is_finite() || ratio <= 0.0 {
            return Err(AnalysisError::BadRatio(ratio));
        }
        let p = SystemParams::new(ratio, 1.0, 1.0, 0.0, 0.0)?;
        let result = run_cascade(&p, angle, &ClickSequence::golden())?;
        let decoded = result.decoded.ok_or(AnalysisError::DegenerateCascade)?;
        points.push((ratio, decoded.fidelity(&target)?));
    }
    let mut echo = BTreeMap::new();
    echo.insert("theta".to_string(), format!("{:.15}", angle.theta()));
    echo.insert("lambda_r".to_string(), "1".to_string());
    Ok(SweepSeries {
        axis: "lambda_ratio".to_string(),
        unit: "dimensionless".to_string(),
        value: "fidelity".to_string(),
        points,
        params_echo: echo,
        notes: Vec::new(),
    })
}

/// Success probability and fidelity under independent detector losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyEffect {
    pub probability: f64,
    pub fidelity: f64,
}

/// Each of the four clicks registers independently with probability η, so
/// the herald probability scales by η⁴ while the conditioned state, hence
/// the fidelity, is untouched.
pub fn detector_efficiency_effect(
    p: &SystemParams,
    angle: SplitterAngle,
    taus: &[f64; 4],
    eta: f64,
) -> Result<EfficiencyEffect, AnalysisError> {
    if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
        return Err(AnalysisError::BadEfficiency(eta));
    }
    let cascade = run_cascade(p, angle, &ClickSequence::golden())?;
    let decoded = cascade.decoded.ok_or(AnalysisError::DegenerateCascade)?;
    let fidelity = decoded.fidelity(&QutritPairState::target())?;
    let probability = cascade.probability * emission_probability_p2(p, taus)? * eta.powi(4);
    Ok(EfficiencyEffect {
        probability,
        fidelity,
    })
}
