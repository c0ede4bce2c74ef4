//! Numerical simulator for a heralded scheme that entangles two distant
//! qutrits encoded in pairs of Λ-type atoms inside leaky one-sided cavities.
//!
//! Each of the four atom-cavity systems deposits one photon into its cavity
//! mode via an adiabatically eliminated Raman transition; the leaked photons
//! interfere on a polarization network and four detector clicks herald a
//! maximally entangled state of the two remote atom pairs.
//!
//! The crate is organized along the physical pipeline:
//!
//! * [`statespace`]: sparse labeled tensor-product state vectors.
//! * [`atom_cavity`]: single-system no-jump dynamics, closed form and RK4.
//! * [`trajectories`]: quantum-jump unraveling and the master-equation
//!   cross-check.
//! * [`optics`]: quarter-wave plates, routing, rotated polarizing
//!   splitters, and the detector amplitude table.
//! * [`protocol`]: the four-click cascade, qutrit decoding, and the full
//!   outcome distribution.
//! * [`analysis`]: sweeps, the optimal emission window, fidelity scans,
//!   and detector-efficiency budgets.
//!
//! Data-parallel loops run on rayon when the default `parallel` feature is
//! enabled and fall back to sequential iteration otherwise; results are
//! bit-identical either way.

pub mod analysis;
pub mod atom_cavity;
pub mod exec;
pub mod optics;
pub mod protocol;
pub mod statespace;
pub mod trajectories;

pub use analysis::{
    detector_efficiency_effect, fidelity_vs_lambda_ratio, fidelity_vs_theta, optimal_tau,
    peak_report, sweep_ptotal, AnalysisError, EfficiencyEffect, Grid, PeakReport, SweepSeries,
};
pub use atom_cavity::{
    emission_state, emission_weight, no_jump_amplitudes, propagate_numeric, survival_probability,
    DerivedRates, ModelError, NoJumpAmplitudes, SystemParams,
};
pub use optics::{
    detector_amplitude, fs_pbs_amplitudes, qwp_map, route, DetectorId, OpticsError, Party, Path,
    PhotonSource, Polarization, SplitterAngle,
};
pub use protocol::{
    apply_click, encode_qutrits, enumerate_outcomes, joint_emission_state, run_cascade,
    target_state, total_probability, CascadeResult, ClickSequence, Outcome, ProtocolError,
    QutritPairState,
};
pub use statespace::{Ket, Space, StateError, Subsystem};
pub use trajectories::{
    ensemble, integrate_master_equation, no_jump_fraction, simulate_trajectory, DensityMatrix,
    JumpChannel, TrajectoryError, TrajectoryRecord,
};
