//! Quantum-jump unraveling of one atom-cavity system, plus the direct
//! master-equation integrator that validates it.
//!
//! Jumps leave the single-excitation subspace, so the state space grows to
//! five levels: the three coherent basis states plus the two dark states
//! |g_l,0⟩ and |g_r,0⟩ reached after a photon leak or a free-space
//! spontaneous emission. Both dark states are stationary (no coupling, no
//! decay), which means every trajectory carries at most one jump event.
//!
//! Sampling uses the standard inverse-transform scheme: draw r uniform in
//! (0,1) and fire the jump at the time where the closed-form no-jump
//! survival probability crosses r, located by a coarse scan plus bisection.
//! Using the closed form instead of step-wise integration removes timing
//! bias entirely; the closed form itself is pinned against the numeric
//! propagator in `atom_cavity`.

use crate::atom_cavity::{no_jump_amplitudes, survival_probability, ModelError, SystemParams};
use crate::exec;
use crate::optics::Polarization;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use thiserror::Error;

/// Time resolution of the bisection locating a jump.
pub const JUMP_TIME_TOLERANCE: f64 = 1e-10;

/// Minimum ensemble size for fraction estimates.
pub const MIN_FRACTION_ENSEMBLE: usize = 1000;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("simulation horizon {0} must be positive")]
    BadHorizon(f64),
    #[error("{n} trajectories is below the statistical minimum of {min}")]
    TooFewTrajectories { n: usize, min: usize },
    #[error("integrator trace drifted by {drift:.3e} (limit 1e-6); reduce the step")]
    Accuracy { drift: f64 },
    #[error("time {t} lies beyond the simulated horizon {t_max}")]
    TimeBeyondHorizon { t: f64, t_max: f64 },
    #[error("ensemble is empty or too small for error bars")]
    DegenerateEnsemble,
    #[error("snapshot times must be finite, non-negative and sorted")]
    UnsortedTimes,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The five-level basis {|e,0⟩, |g_l,V⟩, |g_r,H⟩, |g_l,0⟩, |g_r,0⟩}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis5 {
    E0,
    GlV,
    GrH,
    Gl0,
    Gr0,
}

impl Basis5 {
    pub const ALL: [Basis5; 5] = [
        Basis5::E0,
        Basis5::GlV,
        Basis5::GrH,
        Basis5::Gl0,
        Basis5::Gr0,
    ];

    pub fn index(&self) -> usize {
        match self {
            Basis5::E0 => 0,
            Basis5::GlV => 1,
            Basis5::GrH => 2,
            Basis5::Gl0 => 3,
            Basis5::Gr0 => 4,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Basis5::E0 => "e0",
            Basis5::GlV => "glV",
            Basis5::GrH => "grH",
            Basis5::Gl0 => "gl0",
            Basis5::Gr0 => "gr0",
        }
    }
}

/// The four dissipation channels of the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpChannel {
    CavityLeakL,
    CavityLeakR,
    SpontEmitL,
    SpontEmitR,
}

impl JumpChannel {
    pub const ALL: [JumpChannel; 4] = [
        JumpChannel::CavityLeakL,
        JumpChannel::CavityLeakR,
        JumpChannel::SpontEmitL,
        JumpChannel::SpontEmitR,
    ];

    /// The rate multiplying the source population: 2κ for leaks, 2γ for
    /// spontaneous emission.
    pub fn rate_factor(&self, p: &SystemParams) -> f64 {
        match self {
            JumpChannel::CavityLeakL | JumpChannel::CavityLeakR => 2.0 * p.kappa,
            JumpChannel::SpontEmitL => 2.0 * p.gamma_l,
            JumpChannel::SpontEmitR => 2.0 * p.gamma_r,
        }
    }

    pub fn source(&self) -> Basis5 {
        match self {
            JumpChannel::CavityLeakL => Basis5::GlV,
            JumpChannel::CavityLeakR => Basis5::GrH,
            JumpChannel::SpontEmitL | JumpChannel::SpontEmitR => Basis5::E0,
        }
    }

    pub fn target(&self) -> Basis5 {
        match self {
            JumpChannel::CavityLeakL | JumpChannel::SpontEmitL => Basis5::Gl0,
            JumpChannel::CavityLeakR | JumpChannel::SpontEmitR => Basis5::Gr0,
        }
    }

    /// The polarization of the photon sent toward the detectors, if any.
    /// Spontaneous emission goes into free space in a random direction and
    /// can never register a click.
    pub fn leaked_photon(&self) -> Option<Polarization> {
        match self {
            JumpChannel::CavityLeakL => Some(Polarization::V),
            JumpChannel::CavityLeakR => Some(Polarization::H),
            JumpChannel::SpontEmitL | JumpChannel::SpontEmitR => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            JumpChannel::CavityLeakL => "cavity_leak_l",
            JumpChannel::CavityLeakR => "cavity_leak_r",
            JumpChannel::SpontEmitL => "spont_emit_l",
            JumpChannel::SpontEmitR => "spont_emit_r",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: JumpChannel,
}

/// One Monte Carlo run. `final_state` is the basis state reached by a jump,
/// or `None` while the trajectory is still in the coherent superposition at
/// the horizon. Reproducibility is pinned by `(master_seed, index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub master_seed: u64,
    pub t_max: f64,
    pub events: Vec<JumpEvent>,
    pub final_state: Option<Basis5>,
    pub survived_no_jump_until: Option<f64>,
    pub leaked_photon: Option<Polarization>,
}

impl TrajectoryRecord {
    pub fn survived(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_jump(&self) -> Option<&JumpEvent> {
        self.events.first()
    }
}

fn draw_unit_open(rng: &mut ChaCha8Rng) -> f64 {
    // gen::<f64>() covers [0,1); reject the single value that would demand
    // a jump at infinite time.
    loop {
        let r: f64 = rng.gen();
        if r > 0.0 {
            return r;
        }
    }
}

/// Locates the time where the survival probability crosses `r`, assuming
/// survival(lo) >= r > survival(hi) with survival monotone non-increasing.
fn bisect_jump_time(p: &SystemParams, mut lo: f64, mut hi: f64, r: f64) -> f64 {
    while hi - lo > JUMP_TIME_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if survival_probability(p, mid).expect("validated params") >= r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Runs one trajectory of the jump unraveling up to `t_max`.
///
/// The per-trajectory random stream is `ChaCha8` seeded with `master_seed`
/// on stream `index`, so ensembles are reproducible no matter how the index
/// range is partitioned over workers.
pub fn simulate_trajectory(
    p: &SystemParams,
    t_max: f64,
    master_seed: u64,
    index: u64,
) -> Result<TrajectoryRecord, TrajectoryError> {
    p.validate()?;
    if !t_max.is_finite() || t_max <= 0.0 {
        return Err(TrajectoryError::BadHorizon(t_max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    let r = draw_unit_open(&mut rng);

    if survival_probability(p, t_max)? >= r {
        return Ok(TrajectoryRecord {
            index,
            master_seed,
            t_max,
            events: Vec::new(),
            final_state: None,
            survived_no_jump_until: Some(t_max),
            leaked_photon: None,
        });
    }

    // Coarse scan for a bracket, then bisection. 64 intervals are plenty:
    // the survival curve has at most a few oscillation periods per interval
    // for any parameters of interest, and monotonicity makes the first
    // crossing the only crossing.
    let coarse = t_max / 64.0;
    let mut lo = 0.0;
    let mut hi = t_max;
    for k in 1..=64 {
        let t = coarse * k as f64;
        if survival_probability(p, t)? < r {
            lo = coarse * (k - 1) as f64;
            hi = t;
            break;
        }
    }
    let mut t_jump = bisect_jump_time(p, lo, hi, r);

    // Channel weights at the jump time. At isolated zeros of the photon
    // amplitudes every weight can vanish; nudging forward restores finite
    // rates without measurable bias at the 1e-10 timing tolerance.
    let mut weights = channel_weights(p, t_jump)?;
    let mut guard = 0;
    while weights.iter().sum::<f64>() <= 0.0 {
        guard += 1;
        assert!(guard < 100, "jump rates identically zero near t={t_jump}");
        t_jump = (t_jump + 1e-8).min(t_max);
        weights = channel_weights(p, t_jump)?;
    }
    let total: f64 = weights.iter().sum();
    let mut pick = draw_unit_open(&mut rng) * total;
    let mut channel = JumpChannel::CavityLeakL;
    for (c, w) in JumpChannel::ALL.iter().zip(weights.iter()) {
        if pick <= *w {
            channel = *c;
            break;
        }
        pick -= w;
    }

    // Both dark states are stationary: no second jump can follow.
    Ok(TrajectoryRecord {
        index,
        master_seed,
        t_max,
        events: vec![JumpEvent {
            time: t_jump,
            channel,
        }],
        final_state: Some(channel.target()),
        survived_no_jump_until: None,
        leaked_photon: channel.leaked_photon(),
    })
}

fn channel_weights(p: &SystemParams, t: f64) -> Result<[f64; 4], TrajectoryError> {
    let amps = no_jump_amplitudes(p, t)?;
    let e = amps.x.norm_sqr();
    Ok([
        2.0 * p.kappa * amps.y.norm_sqr(),
        2.0 * p.kappa * amps.z.norm_sqr(),
        2.0 * p.gamma_l * e,
        2.0 * p.gamma_r * e,
    ])
}

/// Simulates `n` independent trajectories. Work items are distributed over
/// the worker pool when the `parallel` feature is on; the result vector is
/// in index order either way, and every entry depends only on
/// `(master_seed, index)`, so the output is identical regardless of
/// scheduling.
pub fn ensemble(
    p: &SystemParams,
    t_max: f64,
    n: usize,
    master_seed: u64,
) -> Result<Vec<TrajectoryRecord>, TrajectoryError> {
    p.validate()?;
    if !t_max.is_finite() || t_max <= 0.0 {
        return Err(TrajectoryError::BadHorizon(t_max));
    }
    let results = exec::map_indexed(n, |i| {
        simulate_trajectory(p, t_max, master_seed, i as u64).expect("validated inputs")
    });
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoJumpEstimate {
    pub fraction: f64,
    pub standard_error: f64,
    pub n: usize,
}

/// Fraction of trajectories with no jump before `t`, with its binomial
/// standard error.
pub fn no_jump_fraction(
    p: &SystemParams,
    t: f64,
    n: usize,
    master_seed: u64,
) -> Result<NoJumpEstimate, TrajectoryError> {
    p.validate()?;
    if n < MIN_FRACTION_ENSEMBLE {
        return Err(TrajectoryError::TooFewTrajectories {
            n,
            min: MIN_FRACTION_ENSEMBLE,
        });
    }
    if t == 0.0 {
        // Survival at t=0 is exactly 1, above any draw from the open unit
        // interval.
        return Ok(NoJumpEstimate {
            fraction: 1.0,
            standard_error: 0.0,
            n,
        });
    }
    let records = ensemble(p, t, n, master_seed)?;
    let survived = records.iter().filter(|r| r.survived()).count();
    let fraction = survived as f64 / n as f64;
    Ok(NoJumpEstimate {
        fraction,
        standard_error: (fraction * (1.0 - fraction) / n as f64).sqrt(),
        n,
    })
}

/// The pure state of one recorded trajectory at an intermediate time, as a
/// normalized 5-vector in the [`Basis5`] ordering.
pub fn trajectory_state_at(
    p: &SystemParams,
    record: &TrajectoryRecord,
    t: f64,
) -> Result<[Complex64; 5], TrajectoryError> {
    if t < 0.0 || !t.is_finite() {
        return Err(ModelError::NegativeTime(t).into());
    }
    if t > record.t_max + 1e-12 {
        return Err(TrajectoryError::TimeBeyondHorizon {
            t,
            t_max: record.t_max,
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    if let Some(event) = record.first_jump() {
        if event.time <= t {
            let mut v = [zero; 5];
            v[event.channel.target().index()] = Complex64::new(1.0, 0.0);
            return Ok(v);
        }
    }
    let amps = no_jump_amplitudes(p, t)?;
    let norm = amps.survival().sqrt();
    Ok([amps.x / norm, amps.y / norm, amps.z / norm, zero, zero])
}

/// 5×5 density matrix over the [`Basis5`] ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub [[Complex64; 5]; 5]);

impl DensityMatrix {
    pub fn zero() -> Self {
        DensityMatrix([[Complex64::new(0.0, 0.0); 5]; 5])
    }

    /// The initial condition |e,0⟩⟨e,0|.
    pub fn excited() -> Self {
        let mut m = DensityMatrix::zero();
        m.0[0][0] = Complex64::new(1.0, 0.0);
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..5).map(|i| self.0[i][i]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                worst = worst.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn entry(&self, row: Basis5, col: Basis5) -> Complex64 {
        self.0[row.index()][col.index()]
    }
}

fn effective_hamiltonian(p: &SystemParams) -> [[Complex64; 5]; 5] {
    let zero = Complex64::new(0.0, 0.0);
    let mut h = [[zero; 5]; 5];
    h[0][0] = Complex64::new(0.0, -(p.gamma_l + p.gamma_r));
    h[1][1] = Complex64::new(0.0, -p.kappa);
    h[2][2] = Complex64::new(0.0, -p.kappa);
    h[0][1] = Complex64::new(p.lambda_l, 0.0);
    h[1][0] = h[0][1];
    h[0][2] = Complex64::new(p.lambda_r, 0.0);
    h[2][0] = h[0][2];
    h
}

fn master_rhs(p: &SystemParams, rho: &[[Complex64; 5]; 5]) -> [[Complex64; 5]; 5] {
    let h = effective_hamiltonian(p);
    let i = Complex64::new(0.0, 1.0);
    let mut out = [[Complex64::new(0.0, 0.0); 5]; 5];
    // -i (H rho - rho H†)
    for r in 0..5 {
        for c in 0..5 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..5 {
                acc += h[r][k] * rho[k][c] - rho[r][k] * h[c][k].conj();
            }
            out[r][c] = -i * acc;
        }
    }
    // Jump feeding terms: each collapse operator has a single matrix
    // element, so L rho L† only moves diagonal population.
    out[3][3] += 2.0 * p.kappa * rho[1][1] + 2.0 * p.gamma_l * rho[0][0];
    out[4][4] += 2.0 * p.kappa * rho[2][2] + 2.0 * p.gamma_r * rho[0][0];
    out
}

fn rk4_density_step(p: &SystemParams, rho: &[[Complex64; 5]; 5], h: f64) -> [[Complex64; 5]; 5] {
    let shifted = |base: &[[Complex64; 5]; 5], k: &[[Complex64; 5]; 5], f: f64| {
        let mut out = *base;
        for r in 0..5 {
            for c in 0..5 {
                out[r][c] += f * k[r][c];
            }
        }
        out
    };
    let k1 = master_rhs(p, rho);
    let k2 = master_rhs(p, &shifted(rho, &k1, 0.5 * h));
    let k3 = master_rhs(p, &shifted(rho, &k2, 0.5 * h));
    let k4 = master_rhs(p, &shifted(rho, &k3, h));
    let mut out = *rho;
    for r in 0..5 {
        for c in 0..5 {
            out[r][c] += (h / 6.0) * (k1[r][c] + 2.0 * k2[r][c] + 2.0 * k3[r][c] + k4[r][c]);
        }
    }
    out
}

/// Fixed-step fourth-order integration of the master equation from
/// ρ(0) = |e,0⟩⟨e,0|. The trace is conserved exactly by the equation;
/// numerical drift beyond 1e-6 reports an accuracy error.
pub fn integrate_master_equation(
    p: &SystemParams,
    t: f64,
    dt: f64,
) -> Result<DensityMatrix, TrajectoryError> {
    Ok(master_equation_at_times(p, &[t], dt)?
        .pop()
        .expect("one snapshot"))
}

/// Integrates once and snapshots the density matrix at each requested time.
/// Times must be finite, non-negative and sorted ascending.
pub fn master_equation_at_times(
    p: &SystemParams,
    times: &[f64],
    dt: f64,
) -> Result<Vec<DensityMatrix>, TrajectoryError> {
    p.validate()?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(TrajectoryError::UnsortedTimes);
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(ModelError::BadStep {
            dt,
            t: times.last().copied().unwrap_or(0.0),
        }
        .into());
    }
    let mut rho = DensityMatrix::excited().0;
    let mut now = 0.0;
    let mut snapshots = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - now;
        if span > 0.0 {
            let n = ((span / dt).round() as usize).max(1);
            let h = span / n as f64;
            for _ in 0..n {
                rho = rk4_density_step(p, &rho, h);
            }
            now = target;
        }
        let snapshot = DensityMatrix(rho);
        // The feeding terms exactly balance the anti-Hermitian decay at the
        // level of the vector field, so the trace survives even an unstable
        // integration; an oversized step instead drives matrix entries out
        // of the physical range |ρ_ij| ≤ 1. Both defects report as drift.
        let trace_drift = (snapshot.trace() - Complex64::new(1.0, 0.0)).norm();
        let overshoot = rho
            .iter()
            .flatten()
            .map(|e| e.norm())
            .fold(0.0f64, f64::max)
            - 1.0;
        let drift = trace_drift.max(overshoot);
        if drift.is_nan() || drift > 1e-6 {
            return Err(TrajectoryError::Accuracy { drift });
        }
        snapshots.push(snapshot);
    }
    Ok(snapshots)
}

/// Trajectory-ensemble average at time `t` with per-entry standard errors
/// (real and imaginary parts separately).
///
/// A trajectory contributes the outer product of its pure state. Only three
/// distinct states occur at any fixed time (the shared coherent state and
/// the two dark states), so the mean and the sample variance are
/// accumulated from exact class counts; the result is bit-identical for
/// any ensemble ordering or partitioning.
#[derive(Debug, Clone)]
pub struct EnsembleDensity {
    pub mean: DensityMatrix,
    pub std_err_re: [[f64; 5]; 5],
    pub std_err_im: [[f64; 5]; 5],
    pub n: usize,
}

pub fn ensemble_density_matrix(
    p: &SystemParams,
    records: &[TrajectoryRecord],
    t: f64,
) -> Result<EnsembleDensity, TrajectoryError> {
    if records.len() < 2 {
        return Err(TrajectoryError::DegenerateEnsemble);
    }
    let n = records.len();
    let mut counts = [0usize; 3];
    let mut coherent_state = None;
    for record in records {
        let class = match record.first_jump() {
            Some(event) if event.time <= t => match event.channel.target() {
                Basis5::Gl0 => 1,
                Basis5::Gr0 => 2,
                _ => unreachable!("jump targets are dark states"),
            },
            _ => 0,
        };
        counts[class] += 1;
        if class == 0 && coherent_state.is_none() {
            coherent_state = Some(trajectory_state_at(p, record, t)?);
        }
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut class_rho = [[[zero; 5]; 5]; 3];
    if let Some(v) = coherent_state {
        for r in 0..5 {
            for c in 0..5 {
                class_rho[0][r][c] = v[r] * v[c].conj();
            }
        }
    }
    class_rho[1][3][3] = Complex64::new(1.0, 0.0);
    class_rho[2][4][4] = Complex64::new(1.0, 0.0);

    let mut mean = DensityMatrix::zero();
    let mut std_err_re = [[0.0; 5]; 5];
    let mut std_err_im = [[0.0; 5]; 5];
    for r in 0..5 {
        for c in 0..5 {
            let mut sum = zero;
            for class in 0..3 {
                sum += class_rho[class][r][c] * counts[class] as f64;
            }
            let avg = sum / n as f64;
            mean.0[r][c] = avg;
            let mut var_re = 0.0;
            let mut var_im = 0.0;
            for class in 0..3 {
                let dre = class_rho[class][r][c].re - avg.re;
                let dim = class_rho[class][r][c].im - avg.im;
                var_re += counts[class] as f64 * dre * dre;
                var_im += counts[class] as f64 * dim * dim;
            }
            let scale = 1.0 / ((n - 1) as f64 * n as f64);
            std_err_re[r][c] = (var_re * scale).sqrt();
            std_err_im[r][c] = (var_im * scale).sqrt();
        }
    }
    Ok(EnsembleDensity {
        mean,
        std_err_re,
        std_err_im,
        n,
    })
}

/// Writes an ensemble as CSV with columns
/// `index,first_jump_time,channel,survived`. Jump fields are empty for
/// surviving trajectories.
pub fn write_ensemble_csv<W: Write>(
    records: &[TrajectoryRecord],
    out: &mut W,
) -> Result<(), TrajectoryError> {
    writeln!(out, "index,first_jump_time,channel,survived")?;
    for record in records {
        match record.first_jump() {
            Some(event) => writeln!(
                out,
                "{},{:.11e},{},0",
                record.index,
                event.time,
                event.channel.label()
            )?,
            None => writeln!(out, "{},,,1", record.index)?,
        }
    }
    Ok(())
}
