//! One Λ-type atom coupled to a leaky one-sided cavity.
//!
//! The atom starts in its excited state |e⟩ and can decay along two Raman
//! branches, depositing a V- or H-polarized photon into the cavity mode.
//! Conditioned on no photon actually leaving the system, the state stays in
//! the three-dimensional single-excitation subspace {|e,0⟩, |g_l,V⟩, |g_r,H⟩}
//! and evolves under a non-Hermitian Hamiltonian whose solution is closed
//! form. This module holds the parameters, the derived rate combinations,
//! the analytic amplitudes, and an independent fixed-step integrator used to
//! cross-check them.
//!
//! All rates are quoted in units of the cavity field decay rate κ and all
//! times in units of 1/κ, so κ = 1 in every preset.

use crate::statespace::{Ket, Space, StateError, Subsystem};
use num_complex::Complex64;
use thiserror::Error;

/// Atomic level alphabet: excited, left ground, right ground.
pub const ATOM_LEVELS: [&str; 3] = ["e", "gl", "gr"];

/// Cavity/flying photon alphabet. `used` marks a photon consumed by a
/// detector click downstream.
pub const PHOTON_LEVELS: [&str; 4] = ["vac", "V", "H", "used"];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter {name} = {value} rejected: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("time {0} is negative")]
    NegativeTime(f64),
    #[error("step {dt} is unusable for horizon {t} (need 0 < dt <= t)")]
    BadStep { dt: f64, t: f64 },
    #[error(transparent)]
    State(#[from] StateError),
}

/// Physical rates of a single atom-cavity system, all in units of κ.
///
/// `lambda_l` and `lambda_r` are the effective couplings of the two Raman
/// branches, `kappa` the cavity field decay rate (photon leakage rate 2κ),
/// and `gamma_l`, `gamma_r` the free-space spontaneous emission rates into
/// the two ground states (emission rates 2γ).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub lambda_l: f64,
    pub lambda_r: f64,
    pub kappa: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
}

impl SystemParams {
    pub fn new(
        lambda_l: f64,
        lambda_r: f64,
        kappa: f64,
        gamma_l: f64,
        gamma_r: f64,
    ) -> Result<Self, ModelError> {
        let params = SystemParams {
            lambda_l,
            lambda_r,
            kappa,
            gamma_l,
            gamma_r,
        };
        params.validate()?;
        Ok(params)
    }

    /// Symmetric preset: λ_L = λ_R = `lambda`, γ_l = γ_r = `gamma`.
    pub fn balanced(lambda: f64, gamma: f64, kappa: f64) -> Result<Self, ModelError> {
        SystemParams::new(lambda, lambda, kappa, gamma, gamma)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let named = [
            ("lambda_l", self.lambda_l),
            ("lambda_r", self.lambda_r),
            ("kappa", self.kappa),
            ("gamma_l", self.gamma_l),
            ("gamma_r", self.gamma_r),
        ];
        for (name, value) in named {
            if !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if value < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "rates cannot be negative",
                });
            }
        }
        if self.kappa <= 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "kappa",
                value: self.kappa,
                reason: "cavity decay must be positive",
            });
        }
        if self.lambda_l == 0.0 && self.lambda_r == 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "lambda_l",
                value: 0.0,
                reason: "at least one coupling must be nonzero",
            });
        }
        Ok(())
    }

    pub fn rates(&self) -> DerivedRates {
        let omega_sq = self.lambda_l * self.lambda_l + self.lambda_r * self.lambda_r;
        let atomic = self.gamma_l + self.gamma_r;
        let delta = self.kappa - atomic;
        DerivedRates {
            omega: omega_sq.sqrt(),
            total_decay: atomic + self.kappa,
            delta,
            omega_k_sq: omega_sq - 0.25 * delta * delta,
        }
    }
}

/// Rate combinations governing the no-jump evolution.
///
/// `omega` is the quadrature coupling Ω = √(λ_L²+λ_R²), `total_decay` the
/// full width Γ = γ_l+γ_r+κ, `delta` the decay imbalance Δ = κ−γ_l−γ_r, and
/// `omega_k_sq` the signed square Ω² − Δ²/4 of the oscillation frequency.
/// A positive `omega_k_sq` means underdamped (trigonometric) evolution; a
/// negative value means the overdamped (hyperbolic) branch. The magnitude
/// |Ω_k| is exposed separately so callers never take a square root of a
/// negative number by accident.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    pub omega: f64,
    pub total_decay: f64,
    pub delta: f64,
    pub omega_k_sq: f64,
}

impl DerivedRates {
    pub fn omega_k_magnitude(&self) -> f64 {
        self.omega_k_sq.abs().sqrt()
    }

    pub fn is_underdamped(&self) -> bool {
        self.omega_k_sq > 0.0
    }
}

/// Evaluates c(t) = cos(Ω_k t) and s(t) = sin(Ω_k t)/Ω_k for the signed
/// square `u` = Ω_k², continued to cosh/sinh when u < 0 and to the series
/// limit near the critically damped point u = 0.
///
/// Both branches and the series agree to machine precision near the
/// switchover because c and s are entire functions of u.
pub fn osc_kernel(u: f64, t: f64) -> (f64, f64) {
    let ut2 = u * t * t;
    if ut2.abs() < 1e-8 {
        let c = 1.0 - ut2 / 2.0 + ut2 * ut2 / 24.0;
        let s = t * (1.0 - ut2 / 6.0 + ut2 * ut2 / 120.0);
        (c, s)
    } else if u > 0.0 {
        let w = u.sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else {
        let w = (-u).sqrt();
        ((w * t).cosh(), (w * t).sinh() / w)
    }
}

/// The three no-jump amplitudes at time `t`: x on |e,0⟩, y on |g_l,V⟩,
/// z on |g_r,H⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoJumpAmplitudes {
    pub t: f64,
    pub x: Complex64,
    pub y: Complex64,
    pub z: Complex64,
}

impl NoJumpAmplitudes {
    /// Squared norm of the conditional state: the probability that no photon
    /// has left the system by time `t`.
    pub fn survival(&self) -> f64 {
        self.x.norm_sqr() + self.y.norm_sqr() + self.z.norm_sqr()
    }

    /// Weight of the photon-in-cavity components, |y|² + |z|².
    pub fn emission_weight(&self) -> f64 {
        self.y.norm_sqr() + self.z.norm_sqr()
    }

    pub fn as_array(&self) -> [Complex64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Closed-form solution of the no-jump evolution from |e,0⟩:
///
/// x = e^{−Γt/2} [c(t) + (Δ/2) s(t)]
/// y = −i e^{−Γt/2} λ_L s(t)
/// z = −i e^{−Γt/2} λ_R s(t)
///
/// with c, s from [`osc_kernel`] at u = Ω_k².
pub fn no_jump_amplitudes(p: &SystemParams, t: f64) -> Result<NoJumpAmplitudes, ModelError> {
    p.validate()?;
    if t < 0.0 || !t.is_finite() {
        return Err(ModelError::NegativeTime(t));
    }
    let rates = p.rates();
    let (c, s) = osc_kernel(rates.omega_k_sq, t);
    let envelope = (-0.5 * rates.total_decay * t).exp();
    let x = Complex64::new(envelope * (c + 0.5 * rates.delta * s), 0.0);
    let y = Complex64::new(0.0, -envelope * p.lambda_l * s);
    let z = Complex64::new(0.0, -envelope * p.lambda_r * s);
    Ok(NoJumpAmplitudes { t, x, y, z })
}

/// P_j(t) = e^{−Γt} {[c + (Δ/2)s]² + s²Ω²}, the no-jump survival
/// probability. Agrees with `no_jump_amplitudes(..).survival()` to 1e-12.
pub fn survival_probability(p: &SystemParams, t: f64) -> Result<f64, ModelError> {
    p.validate()?;
    if t < 0.0 || !t.is_finite() {
        return Err(ModelError::NegativeTime(t));
    }
    let rates = p.rates();
    let (c, s) = osc_kernel(rates.omega_k_sq, t);
    let coherent = c + 0.5 * rates.delta * s;
    Ok((-rates.total_decay * t).exp() * (coherent * coherent + s * s * rates.omega * rates.omega))
}

/// The photon-in-cavity weight e^{−Γt} s(t)² Ω², i.e. |y|²+|z|². One factor
/// of the protocol's per-attempt emission probability.
pub fn emission_weight(p: &SystemParams, t: f64) -> Result<f64, ModelError> {
    let amps = no_jump_amplitudes(p, t)?;
    Ok(amps.emission_weight())
}

fn rhs(p: &SystemParams, v: [Complex64; 3]) -> [Complex64; 3] {
    let i = Complex64::new(0.0, 1.0);
    let atomic = p.gamma_l + p.gamma_r;
    [
        -atomic * v[0] - i * p.lambda_l * v[1] - i * p.lambda_r * v[2],
        -i * p.lambda_l * v[0] - p.kappa * v[1],
        -i * p.lambda_r * v[0] - p.kappa * v[2],
    ]
}

/// Independent oracle for [`no_jump_amplitudes`]: classical fourth-order
/// Runge-Kutta integration of i d|ψ⟩/dt = H_eff |ψ⟩ on the basis
/// {|e,0⟩, |g_l,V⟩, |g_r,H⟩}, starting from (1, 0, 0).
///
/// The horizon is covered by n = round(t/dt) uniform steps (at least one),
/// so the requested step is matched as closely as an exact landing on `t`
/// allows. Global error converges at order dt⁴.
pub fn propagate_numeric(
    p: &SystemParams,
    t: f64,
    dt: f64,
) -> Result<NoJumpAmplitudes, ModelError> {
    p.validate()?;
    if t < 0.0 || !t.is_finite() {
        return Err(ModelError::NegativeTime(t));
    }
    let mut v = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    ];
    if t == 0.0 {
        return Ok(NoJumpAmplitudes {
            t,
            x: v[0],
            y: v[1],
            z: v[2],
        });
    }
    if !(dt > 0.0 && dt <= t && dt.is_finite()) {
        return Err(ModelError::BadStep { dt, t });
    }
    let n = ((t / dt).round() as usize).max(1);
    let h = t / n as f64;
    for _ in 0..n {
        v = rk4_step(p, v, h);
    }
    Ok(NoJumpAmplitudes {
        t,
        x: v[0],
        y: v[1],
        z: v[2],
    })
}

fn rk4_step(p: &SystemParams, v: [Complex64; 3], h: f64) -> [Complex64; 3] {
    let add = |a: [Complex64; 3], b: [Complex64; 3], f: f64| {
        [a[0] + f * b[0], a[1] + f * b[1], a[2] + f * b[2]]
    };
    let k1 = rhs(p, v);
    let k2 = rhs(p, add(v, k1, 0.5 * h));
    let k3 = rhs(p, add(v, k2, 0.5 * h));
    let k4 = rhs(p, add(v, k3, h));
    let mut out = v;
    for j in 0..3 {
        out[j] = v[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    out
}

/// The tensor factor pair describing one atom-cavity system, registered as
/// `{id}.atom` and `{id}.photon`.
pub fn system_space(system_id: &str) -> Result<Space, StateError> {
    Space::new(vec![
        Subsystem::new(&format!("{system_id}.atom"), &ATOM_LEVELS),
        Subsystem::new(&format!("{system_id}.photon"), &PHOTON_LEVELS),
    ])
}

/// The normalized single-system state conditioned on a photon being present
/// in the cavity: (λ_L|g_l,V⟩ + λ_R|g_r,H⟩)/Ω. The still-excited component
/// contributes no detectable photon, so it drops out of the conditioning.
pub fn emission_state(p: &SystemParams) -> Result<Ket, ModelError> {
    emission_state_for(p, "sys")
}

/// [`emission_state`] with caller-chosen subsystem naming, so four systems
/// can be tensored without id collisions.
pub fn emission_state_for(p: &SystemParams, system_id: &str) -> Result<Ket, ModelError> {
    p.validate()?;
    let space = system_space(system_id)?;
    let atom = format!("{system_id}.atom");
    let photon = format!("{system_id}.photon");
    let omega = p.rates().omega;
    let ket = Ket::from_terms(
        &space,
        &[
            (
                &[(atom.as_str(), "gl"), (photon.as_str(), "V")],
                Complex64::new(p.lambda_l / omega, 0.0),
            ),
            (
                &[(atom.as_str(), "gr"), (photon.as_str(), "H")],
                Complex64::new(p.lambda_r / omega, 0.0),
            ),
        ],
    )?;
    Ok(ket)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn canonical_10() -> SystemParams {
        SystemParams::balanced(10.0, 0.1, 1.0).unwrap()
    }

    fn canonical_15() -> SystemParams {
        SystemParams::balanced(15.0, 0.1, 1.0).unwrap()
    }

    fn max_component_deviation(a: &NoJumpAmplitudes, b: &NoJumpAmplitudes) -> f64 {
        (a.x - b.x)
            .norm()
            .max((a.y - b.y).norm())
            .max((a.z - b.z).norm())
    }

    #[test]
    fn derived_rates_for_reference_parameter_sets() {
        let rates = canonical_10().rates();
        assert!((rates.omega * rates.omega - 200.0).abs() < 1e-12);
        assert!((rates.total_decay - 1.2).abs() < 1e-15);
        assert!((rates.delta - 0.8).abs() < 1e-15);
        assert!((rates.omega_k_sq - 199.84).abs() < 1e-12);
        assert!(rates.is_underdamped());

        let rates15 = canonical_15().rates();
        assert!((rates15.omega * rates15.omega - 450.0).abs() < 1e-12);

        let lossless = SystemParams::new(2.0, 1.0, 1.0, 0.0, 0.0).unwrap().rates();
        assert!((lossless.delta - 1.0).abs() < 1e-15);
        assert!((lossless.total_decay - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parameter_validation_rejects_bad_rates() {
        assert!(matches!(
            SystemParams::new(1.0, 1.0, 0.0, 0.1, 0.1),
            Err(ModelError::InvalidParameter { name: "kappa", .. })
        ));
        assert!(matches!(
            SystemParams::new(0.0, 0.0, 1.0, 0.1, 0.1),
            Err(ModelError::InvalidParameter { .. })
        ));
        assert!(matches!(
            SystemParams::new(-1.0, 1.0, 1.0, 0.1, 0.1),
            Err(ModelError::InvalidParameter { .. })
        ));
        assert!(matches!(
            SystemParams::new(f64::NAN, 1.0, 1.0, 0.1, 0.1),
            Err(ModelError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn amplitudes_start_at_excited_state() {
        let amps = no_jump_amplitudes(&canonical_10(), 0.0).unwrap();
        assert_eq!(amps.x, Complex64::new(1.0, 0.0));
        assert_eq!(amps.y, Complex64::new(0.0, 0.0));
        assert_eq!(amps.z, Complex64::new(0.0, 0.0));
        assert!((amps.survival() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_branch_stays_empty() {
        let p = SystemParams::new(3.0, 0.0, 1.0, 0.05, 0.05).unwrap();
        for k in 0..200 {
            let t = k as f64 * 0.01;
            let amps = no_jump_amplitudes(&p, t).unwrap();
            assert_eq!(amps.z, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn negative_time_is_rejected() {
        assert!(matches!(
            no_jump_amplitudes(&canonical_10(), -0.1),
            Err(ModelError::NegativeTime(_))
        ));
        assert!(matches!(
            survival_probability(&canonical_10(), -1e-9),
            Err(ModelError::NegativeTime(_))
        ));
    }

    #[test]
    fn analytic_matches_numeric_at_reference_time() {
        let p = canonical_10();
        let t = 0.1081;
        let analytic = no_jump_amplitudes(&p, t).unwrap();
        let numeric = propagate_numeric(&p, t, 1e-5).unwrap();
        assert!(max_component_deviation(&analytic, &numeric) < 1e-8);
    }

    #[test]
    fn numeric_oracle_converges_at_fourth_order() {
        let p = canonical_10();
        let t = 0.3;
        let exact = no_jump_amplitudes(&p, t).unwrap();
        let coarse = max_component_deviation(&exact, &propagate_numeric(&p, t, 1e-3).unwrap());
        let fine = max_component_deviation(&exact, &propagate_numeric(&p, t, 5e-4).unwrap());
        let ratio = coarse / fine;
        assert!(
            (8.0..32.0).contains(&ratio),
            "expected ~16x error reduction per halving, got {ratio}"
        );
    }

    #[test]
    fn overdamped_branch_matches_numeric() {
        let p = SystemParams::new(0.1, 0.1, 1.0, 0.0, 0.0).unwrap();
        let rates = p.rates();
        assert!(rates.omega_k_sq < 0.0);
        for k in 1..=10 {
            let t = k as f64 * 0.5;
            let analytic = no_jump_amplitudes(&p, t).unwrap();
            let numeric = propagate_numeric(&p, t, 1e-5).unwrap();
            assert!(max_component_deviation(&analytic, &numeric) < 1e-8);
        }
    }

    #[test]
    fn bad_step_is_rejected() {
        let p = canonical_10();
        assert!(matches!(
            propagate_numeric(&p, 1.0, 0.0),
            Err(ModelError::BadStep { .. })
        ));
        assert!(matches!(
            propagate_numeric(&p, 1.0, 2.0),
            Err(ModelError::BadStep { .. })
        ));
        assert!(propagate_numeric(&p, 0.0, 1.0).is_ok());
    }

    #[test]
    fn survival_identity_on_dense_grid() {
        for p in [canonical_10(), canonical_15()] {
            for k in 0..1000 {
                let t = 5.0 * k as f64 / 999.0;
                let direct = survival_probability(&p, t).unwrap();
                let from_amps = no_jump_amplitudes(&p, t).unwrap().survival();
                assert!(
                    (direct - from_amps).abs() < 1e-12,
                    "mismatch at t={t}: {direct} vs {from_amps}"
                );
            }
        }
    }

    #[test]
    fn survival_decays_monotonically() {
        for p in [canonical_10(), canonical_15()] {
            let mut previous = 1.0;
            for k in 0..1000 {
                let t = 5.0 * k as f64 / 999.0;
                let current = survival_probability(&p, t).unwrap();
                assert!(current <= previous + 1e-12, "norm gain at t={t}");
                previous = current;
            }
        }
    }

    #[test]
    fn survival_is_negligible_after_forty_lifetimes() {
        let p = canonical_10();
        let t = 40.0 / p.rates().total_decay;
        assert!(survival_probability(&p, t).unwrap() < 1e-15);
    }

    #[test]
    fn amplitudes_are_continuous_across_damping_boundary() {
        // kappa=1, gamma=0 puts the boundary at lambda_l=lambda_r=sqrt(1/8).
        let boundary = (0.125f64).sqrt();
        let under = {
            let shift = (0.125f64 + 0.5e-9).sqrt();
            SystemParams::new(shift, shift, 1.0, 0.0, 0.0).unwrap()
        };
        let over = {
            let shift = (0.125f64 - 0.5e-9).sqrt();
            SystemParams::new(shift, shift, 1.0, 0.0, 0.0).unwrap()
        };
        let exact = SystemParams::new(boundary, boundary, 1.0, 0.0, 0.0).unwrap();
        assert!(under.rates().omega_k_sq > 0.0);
        assert!(over.rates().omega_k_sq < 0.0);
        for k in 0..50 {
            let t = k as f64 * 0.1;
            let a = no_jump_amplitudes(&under, t).unwrap();
            let b = no_jump_amplitudes(&over, t).unwrap();
            let c = no_jump_amplitudes(&exact, t).unwrap();
            assert!(max_component_deviation(&a, &b) < 1e-6);
            assert!(max_component_deviation(&a, &c) < 1e-6);
        }
    }

    #[test]
    fn emission_state_shapes() {
        let symmetric = emission_state(&SystemParams::balanced(7.0, 0.1, 1.0).unwrap()).unwrap();
        let amp = symmetric
            .amplitude(&[("sys.atom", "gl"), ("sys.photon", "V")])
            .unwrap();
        assert!((amp.re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((symmetric.norm() - 1.0).abs() < 1e-12);

        let single = emission_state(&SystemParams::new(3.0, 0.0, 1.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(single.term_count(), 1);

        let skew = emission_state(&SystemParams::new(1.1, 1.0, 1.0, 0.1, 0.1).unwrap()).unwrap();
        let gl = skew
            .amplitude(&[("sys.atom", "gl"), ("sys.photon", "V")])
            .unwrap();
        let gr = skew
            .amplitude(&[("sys.atom", "gr"), ("sys.photon", "H")])
            .unwrap();
        assert!((gl.re - 1.1 / 2.21f64.sqrt()).abs() < 1e-12);
        assert!((gr.re - 1.0 / 2.21f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn emission_weight_equals_photon_components() {
        let p = canonical_10();
        for k in 0..200 {
            let t = k as f64 * 0.005;
            let weight = emission_weight(&p, t).unwrap();
            let amps = no_jump_amplitudes(&p, t).unwrap();
            assert!((weight - (amps.y.norm_sqr() + amps.z.norm_sqr())).abs() < 1e-14);
        }
    }

    proptest! {
        /// The closed-form survival expression is the squared norm of the
        /// closed-form amplitudes for arbitrary valid parameters.
        #[test]
        fn survival_identity_random(
            lambda_l in 0.0f64..20.0,
            lambda_r in 0.01f64..20.0,
            gamma_l in 0.0f64..2.0,
            gamma_r in 0.0f64..2.0,
            t in 0.0f64..5.0,
        ) {
            let p = SystemParams::new(lambda_l, lambda_r, 1.0, gamma_l, gamma_r).unwrap();
            let direct = survival_probability(&p, t).unwrap();
            let from_amps = no_jump_amplitudes(&p, t).unwrap().survival();
            prop_assert!((direct - from_amps).abs() < 1e-12);
        }

        /// Norm never exceeds 1 under the non-Hermitian evolution.
        #[test]
        fn survival_bounded_by_one(
            lambda in 0.01f64..20.0,
            gamma in 0.0f64..2.0,
            t in 0.0f64..10.0,
        ) {
            let p = SystemParams::balanced(lambda, gamma, 1.0).unwrap();
            let s = survival_probability(&p, t).unwrap();
            prop_assert!(s <= 1.0 + 1e-12);
            prop_assert!(s >= 0.0);
        }

        /// The oscillation kernel solves c' = -u s, s' = c; checked via the
        /// Pythagorean-like invariant c² + u s² = 1, exact on both branches.
        /// The tolerance is relative to the term magnitudes because the
        /// hyperbolic branch cancels two exponentially large terms.
        #[test]
        fn kernel_invariant(u in -30.0f64..30.0, t in 0.0f64..3.0) {
            let (c, s) = osc_kernel(u, t);
            let scale = 1.0 + c * c + u.abs() * s * s;
            prop_assert!((c * c + u * s * s - 1.0).abs() < 1e-12 * scale);
        }
    }
}
