//! The heralding protocol end to end: joint emission state, detector click
//! cascade, qutrit decoding, and success probabilities.
//!
//! Four atom-cavity systems (A1, A2 at Alice; B1, B2 at Bob) each hold one
//! photon conditioned on emission. The four photons traverse the optics of
//! the `optics` module and the four detectors fire once each. Conditioned
//! on the click pattern, the atoms are left in a two-qutrit state.
//!
//! Two photon-counting pictures coexist here deliberately. A sequence of
//! four clicks on four distinct detectors is modeled as the sequential
//! collapse chain: each click removes one photon, summing coherently over
//! which same-routing cavity supplied it. That chain is the protocol's
//! standard description and fixes the herald probability 1/12 at the
//! canonical working point. It does not extend to repeated clicks on one
//! detector: bunched photons occupy a single output mode, and treating the
//! assignments as distinguishable over-counts them, so the per-click chain
//! does not produce a normalized outcome distribution. The exhaustive
//! [`enumerate_outcomes`] therefore works in the symmetrized-mode (Fock)
//! picture, whose 35 pattern probabilities sum to exactly 1, and
//! [`run_cascade`] delegates to that picture whenever a sequence revisits a
//! detector.

use crate::atom_cavity::{
    emission_state_for, emission_weight, survival_probability, ModelError, SystemParams,
    ATOM_LEVELS, PHOTON_LEVELS,
};
use crate::exec;
use crate::optics::{
    detector_amplitude, CavityIndex, DetectorId, Party, PhotonSource, Polarization, SplitterAngle,
};
use crate::statespace::{Ket, Space, StateError, Subsystem};
use num_complex::Complex64;
use serde_json::{json, Value};
use thiserror::Error;

/// The four sites in canonical order: Alice's pair, then Bob's.
pub const SITES: [&str; 4] = ["A1", "A2", "B1", "B2"];

/// Squared-norm threshold below which a cascade outcome counts as
/// impossible and no conditional state is reported.
pub const PROBABILITY_FLOOR: f64 = 1e-18;

/// Tolerance on the relative squared amplitude of antisymmetric two-atom
/// components during decoding.
pub const ENCODING_LEAK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("cascade requires exactly 4 clicks, got {0}")]
    WrongClickCount(usize),
    #[error("click times must be non-decreasing")]
    TimesNotSorted,
    #[error("got {times} click times for {clicks} clicks")]
    TimesLengthMismatch { clicks: usize, times: usize },
    #[error("click times must be finite and non-negative")]
    BadTime,
    #[error("emission window {0} must be finite and non-negative")]
    NegativeTau(f64),
    #[error("site {site} still carries excited-state amplitude; decoding is undefined")]
    ResidualExcitation { site: String },
    #[error("site {site} still carries an unconsumed photon; decoding is undefined")]
    UnconsumedPhoton { site: String },
    #[error("antisymmetric two-atom amplitude (relative weight {leak:.3e}) exceeds the encoding tolerance")]
    EncodingLeak { leak: f64 },
    #[error("state norm is too small to decode")]
    DegenerateState,
    #[error("qutrit state is not normalized (off by {0:.3e})")]
    NotNormalized(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    State(#[from] StateError),
}

pub fn site_party(site: &str) -> Party {
    if site.starts_with('A') {
        Party::Alice
    } else {
        Party::Bob
    }
}

pub fn site_cavity(site: &str) -> CavityIndex {
    if site.ends_with('1') {
        CavityIndex::One
    } else {
        CavityIndex::Two
    }
}

/// The eight-subsystem space of the four atoms and their four photons.
pub fn joint_space() -> Space {
    let mut subsystems = Vec::with_capacity(8);
    for site in SITES {
        subsystems.push(Subsystem::new(&format!("{site}.atom"), &ATOM_LEVELS));
        subsystems.push(Subsystem::new(&format!("{site}.photon"), &PHOTON_LEVELS));
    }
    Space::new(subsystems).expect("distinct site names")
}

/// ⊗_j (λ_L|g_l,V⟩_j + λ_R|g_r,H⟩_j)/Ω over the four sites; 16 terms,
/// normalized.
pub fn joint_emission_state(p: &SystemParams) -> Result<Ket, ProtocolError> {
    joint_emission_state_per_site(&[*p, *p, *p, *p])
}

/// Extension point for non-identical systems: one parameter set per site in
/// [`SITES`] order.
pub fn joint_emission_state_per_site(params: &[SystemParams; 4]) -> Result<Ket, ProtocolError> {
    let mut joint = emission_state_for(&params[0], SITES[0])?;
    for (p, site) in params.iter().zip(SITES.iter()).skip(1) {
        joint = joint.tensor(&emission_state_for(p, site)?)?;
    }
    Ok(joint)
}

/// P_2: the probability that all four photons have been deposited in their
/// cavities by the respective times, Π_j e^{−Γτ_j} sin²(Ω_k τ_j) Ω²/Ω_k².
pub fn emission_probability_p2(p: &SystemParams, taus: &[f64; 4]) -> Result<f64, ProtocolError> {
    let mut product = 1.0;
    for &tau in taus {
        if !tau.is_finite() || tau < 0.0 {
            return Err(ProtocolError::NegativeTau(tau));
        }
        product *= emission_weight(p, tau)?;
    }
    Ok(product)
}

/// P_1: the probability that no system has suffered any jump by the
/// respective times, Π_j P_j(τ_j).
pub fn survival_probability_p1(p: &SystemParams, taus: &[f64; 4]) -> Result<f64, ProtocolError> {
    let mut product = 1.0;
    for &tau in taus {
        if !tau.is_finite() || tau < 0.0 {
            return Err(ProtocolError::NegativeTau(tau));
        }
        product *= survival_probability(p, tau)?;
    }
    Ok(product)
}

/// An ordered detector click list, optionally time-stamped. Times are
/// bookkeeping only: conditioning on successful emission makes the click
/// amplitudes time-independent, so they never enter the state algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickSequence {
    pub clicks: Vec<DetectorId>,
    pub times: Option<Vec<f64>>,
}

impl ClickSequence {
    pub fn new(clicks: Vec<DetectorId>) -> Self {
        ClickSequence {
            clicks,
            times: None,
        }
    }

    pub fn with_times(clicks: Vec<DetectorId>, times: Vec<f64>) -> Result<Self, ProtocolError> {
        if times.len() != clicks.len() {
            return Err(ProtocolError::TimesLengthMismatch {
                clicks: clicks.len(),
                times: times.len(),
            });
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(ProtocolError::BadTime);
        }
        if times.windows(2).any(|w| w[0] > w[1]) {
            return Err(ProtocolError::TimesNotSorted);
        }
        Ok(ClickSequence {
            clicks,
            times: Some(times),
        })
    }

    /// The protocol's representative order Da_F → Db_F → Da_S → Db_S.
    pub fn golden() -> Self {
        ClickSequence::new(vec![
            DetectorId::DaF,
            DetectorId::DbF,
            DetectorId::DaS,
            DetectorId::DbS,
        ])
    }

    /// Occupation pattern of the click multiset, indexed like
    /// [`DetectorId::ALL`].
    pub fn pattern(&self) -> [u8; 4] {
        let mut pattern = [0u8; 4];
        for click in &self.clicks {
            pattern[click.index()] += 1;
        }
        pattern
    }

    pub fn has_repeats(&self) -> bool {
        self.pattern().iter().any(|&n| n > 1)
    }
}

/// One detector click on the joint state: the unnormalized sum over every
/// photon that could have caused it, each term consuming that photon with
/// the network amplitude from `optics`. Returns the zero ket when no
/// remaining photon can reach the detector.
pub fn apply_click(
    state: &Ket,
    det: DetectorId,
    angle: SplitterAngle,
) -> Result<Ket, ProtocolError> {
    let mut result = Ket::zero(state.space().clone());
    for site in SITES {
        let photon_id = format!("{site}.photon");
        for (pol, label) in [(Polarization::V, "V"), (Polarization::H, "H")] {
            let amp = detector_amplitude(
                PhotonSource {
                    party: site_party(site),
                    cavity_index: site_cavity(site),
                    polarization: pol,
                },
                det,
                angle,
            );
            if amp == 0.0 {
                continue;
            }
            let consumed =
                state.apply_level_map(&photon_id, &[(label, "used", Complex64::new(amp, 0.0))])?;
            result = result.add(&consumed)?;
        }
    }
    Ok(result)
}

/// Amplitudes of the two-qutrit register, rows Alice and columns Bob over
/// the encoded basis {|0⟩, |1⟩, |2⟩}.
#[derive(Debug, Clone, PartialEq)]
pub struct QutritPairState {
    pub amps: [[Complex64; 3]; 3],
}

impl QutritPairState {
    pub fn zero() -> Self {
        QutritPairState {
            amps: [[Complex64::new(0.0, 0.0); 3]; 3],
        }
    }

    /// The maximally entangled target (|00⟩ + |11⟩ + |22⟩)/√3.
    pub fn target() -> Self {
        let mut state = QutritPairState::zero();
        let amp = Complex64::new(1.0 / 3.0f64.sqrt(), 0.0);
        for k in 0..3 {
            state.amps[k][k] = amp;
        }
        state
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().flatten().map(|a| a.norm_sqr()).sum()
    }

    /// |⟨self|other⟩|² for two normalized states.
    pub fn fidelity(&self, other: &QutritPairState) -> Result<f64, ProtocolError> {
        for state in [self, other] {
            let dev = (state.norm_sq() - 1.0).abs();
            if dev > 1e-10 {
                return Err(ProtocolError::NotNormalized(dev));
            }
        }
        let mut overlap = Complex64::new(0.0, 0.0);
        for a in 0..3 {
            for b in 0..3 {
                overlap += self.amps[a][b].conj() * other.amps[a][b];
            }
        }
        Ok(overlap.norm_sqr())
    }

    /// Marginal populations of one party's qutrit.
    pub fn reduced_populations(&self, party: Party) -> [f64; 3] {
        let mut pops = [0.0; 3];
        for a in 0..3 {
            for b in 0..3 {
                let w = self.amps[a][b].norm_sqr();
                match party {
                    Party::Alice => pops[a] += w,
                    Party::Bob => pops[b] += w,
                }
            }
        }
        pops
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .amps
            .iter()
            .map(|row| {
                let cols: Vec<Value> = row
                    .iter()
                    .map(|a| json!({"re": a.re, "im": a.im}))
                    .collect();
                Value::Array(cols)
            })
            .collect();
        Value::Array(rows)
    }
}

/// Decodes a post-cascade atomic state into the qutrit register:
/// |g_l g_l⟩ → |0⟩, (|g_l g_r⟩ + |g_r g_l⟩)/√2 → |1⟩, |g_r g_r⟩ → |2⟩ per
/// party, then normalizes.
///
/// The input must be fully measured: any excited-state or unconsumed-photon
/// amplitude is a domain error, and an antisymmetric two-atom component
/// above [`ENCODING_LEAK_TOLERANCE`] (relative weight) reports an encoding
/// leak, since the register has no antisymmetric level.
pub fn encode_qutrits(atomic: &Ket) -> Result<QutritPairState, ProtocolError> {
    let mut config = [[Complex64::new(0.0, 0.0); 4]; 4];
    let mut total = 0.0;
    for (label, amp) in atomic.terms() {
        let assignment = atomic.describe(label);
        let mut bits = [0usize; 4];
        for (subsystem, level) in assignment {
            if let Some(site) = subsystem.strip_suffix(".atom") {
                let position = SITES.iter().position(|s| *s == site).ok_or_else(|| {
                    ProtocolError::State(StateError::UnknownSubsystem(site.to_string()))
                })?;
                bits[position] = match level {
                    "gl" => 0,
                    "gr" => 1,
                    _ => {
                        return Err(ProtocolError::ResidualExcitation {
                            site: site.to_string(),
                        })
                    }
                };
            } else if let Some(site) = subsystem.strip_suffix(".photon") {
                if level != "used" {
                    return Err(ProtocolError::UnconsumedPhoton {
                        site: site.to_string(),
                    });
                }
            }
        }
        let alice = bits[0] * 2 + bits[1];
        let bob = bits[2] * 2 + bits[3];
        config[alice][bob] += amp;
        total += amp.norm_sqr();
    }
    if total < 1e-24 {
        return Err(ProtocolError::DegenerateState);
    }

    // Antisymmetric weight per party: the difference of the lr and rl
    // configuration amplitudes.
    let mut leak = 0.0;
    for (left, right) in config[1].iter().zip(&config[2]) {
        leak += 0.5 * (left - right).norm_sqr();
    }
    for row in &config {
        leak += 0.5 * (row[1] - row[2]).norm_sqr();
    }
    if leak / total > ENCODING_LEAK_TOLERANCE {
        return Err(ProtocolError::EncodingLeak { leak: leak / total });
    }

    // The symmetric isometry per party: ll → 0, (lr+rl)/√2 → 1, rr → 2.
    let reduce = |row: [Complex64; 4]| -> [Complex64; 3] {
        [row[0], (row[1] + row[2]) / 2.0f64.sqrt(), row[3]]
    };
    let mut half = [[Complex64::new(0.0, 0.0); 3]; 4];
    for a in 0..4 {
        half[a] = reduce(config[a]);
    }
    let mut amps = [[Complex64::new(0.0, 0.0); 3]; 3];
    for b in 0..3 {
        let column = [half[0][b], half[1][b], half[2][b], half[3][b]];
        let reduced = reduce(column);
        for a in 0..3 {
            amps[a][b] = reduced[a];
        }
    }
    let mut state = QutritPairState { amps };
    let norm = state.norm_sq().sqrt();
    for a in 0..3 {
        for b in 0..3 {
            state.amps[a][b] /= norm;
        }
    }
    Ok(state)
}

/// Result of a four-click cascade. `probability` is the squared norm of the
/// post-cascade state relative to the (normalized) joint emission state.
/// `intermediate_states` holds the unnormalized collapse chain after each
/// click; it is empty for repeated-detector sequences, which are computed
/// in the symmetrized-mode picture (see the module docs).
#[derive(Debug, Clone)]
pub struct CascadeResult {
    pub raw: Ket,
    pub probability: f64,
    pub decoded: Option<QutritPairState>,
    pub intermediate_states: Vec<Ket>,
}

impl CascadeResult {
    pub fn to_json(&self) -> Value {
        json!({
            "probability": self.probability,
            "raw": self.raw.to_debug_json(),
            "decoded": self.decoded.as_ref().map(|d| d.to_json()).unwrap_or(Value::Null),
            "intermediates": self.intermediate_states
                .iter()
                .map(|k| k.to_debug_json())
                .collect::<Vec<_>>(),
        })
    }
}

/// Runs the four-click heralding cascade from the joint emission state.
pub fn run_cascade(
    p: &SystemParams,
    angle: SplitterAngle,
    seq: &ClickSequence,
) -> Result<CascadeResult, ProtocolError> {
    if seq.clicks.len() != 4 {
        return Err(ProtocolError::WrongClickCount(seq.clicks.len()));
    }
    if let Some(times) = &seq.times {
        if times.windows(2).any(|w| w[0] > w[1]) {
            return Err(ProtocolError::TimesNotSorted);
        }
    }
    let (raw, intermediates) = if seq.has_repeats() {
        (pattern_projection(p, angle, seq.pattern())?, Vec::new())
    } else {
        let mut state = joint_emission_state(p)?;
        let mut intermediates = Vec::with_capacity(4);
        for det in &seq.clicks {
            state = apply_click(&state, *det, angle)?;
            intermediates.push(state.clone());
        }
        (state, intermediates)
    };
    let probability = raw.norm_sq();
    let decoded = if probability > PROBABILITY_FLOOR {
        Some(encode_qutrits(&raw)?)
    } else {
        None
    };
    Ok(CascadeResult {
        raw,
        probability,
        decoded,
        intermediate_states: intermediates,
    })
}

/// P_total for the golden herald: cascade probability times P_2. At the
/// canonical angle with balanced couplings the first factor is 1/12.
pub fn total_probability(
    p: &SystemParams,
    angle: SplitterAngle,
    taus: &[f64; 4],
) -> Result<f64, ProtocolError> {
    let cascade = run_cascade(p, angle, &ClickSequence::golden())?;
    Ok(cascade.probability * emission_probability_p2(p, taus)?)
}

/// Convenience alias matching the protocol literature.
pub fn target_state() -> QutritPairState {
    QutritPairState::target()
}

/// One entry of the full outcome distribution: how many photons each
/// detector absorbed (indexed like [`DetectorId::ALL`]), the probability of
/// that pattern, and the conditioned qutrit register when defined.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pattern: [u8; 4],
    pub probability: f64,
    pub conditional: Option<QutritPairState>,
}

/// The complete photon-counting distribution over the four detectors in
/// the symmetrized-mode picture. The 35 patterns' probabilities sum to
/// exactly 1: per atomic branch, the two occupied path modes map unitarily
/// onto the detector modes, so no weight is lost or double-counted.
pub fn enumerate_outcomes(
    p: &SystemParams,
    angle: SplitterAngle,
) -> Result<Vec<Outcome>, ProtocolError> {
    p.validate()?;
    let mut patterns = Vec::with_capacity(35);
    for n_af in 0..=4u8 {
        for n_as in 0..=(4 - n_af) {
            for n_bf in 0..=(4 - n_af - n_as) {
                let n_bs = 4 - n_af - n_as - n_bf;
                patterns.push([n_af, n_as, n_bf, n_bs]);
            }
        }
    }
    let results = exec::map_slice(&patterns, |pattern| {
        let ket = pattern_projection(p, angle, *pattern).expect("validated params");
        let probability = ket.norm_sq();
        let conditional = if probability > PROBABILITY_FLOOR {
            Some(encode_qutrits(&ket).expect("pattern states are symmetric"))
        } else {
            None
        };
        Outcome {
            pattern: *pattern,
            probability,
            conditional,
        }
    });
    Ok(results)
}

/// The unnormalized atomic state conditioned on a detector occupation
/// pattern, in the symmetrized-mode picture.
///
/// Per atomic branch the four photons occupy the path-polarization modes
/// (a,V), (a,H), (b,V), (b,H) with multiplicities fixed by the routing
/// table; the rotated splitters map each path's pair of modes onto its
/// detector pair. The branch amplitude for a pattern is the Fock-state
/// overlap, including the bosonic √(n!/μ!) bunching factors.
pub fn pattern_projection(
    p: &SystemParams,
    angle: SplitterAngle,
    pattern: [u8; 4],
) -> Result<Ket, ProtocolError> {
    p.validate()?;
    let space = joint_space();
    let omega = p.rates().omega;
    let theta = angle.theta();
    let mut result = Ket::zero(space.clone());
    for branch in 0..16u32 {
        // Bit j set means site j decayed to g_r (an H photon); clear means
        // g_l (V).
        let bit = |j: usize| (branch >> j) & 1 == 1;
        let mut coeff = 1.0 / (omega * omega * omega * omega);
        for j in 0..4 {
            coeff *= if bit(j) { p.lambda_r } else { p.lambda_l };
        }
        if coeff == 0.0 {
            continue;
        }
        // Routing: Alice-V and Bob-H share path a; Alice-H and Bob-V share
        // path b.
        let mu_a_v = (0..2).filter(|j| !bit(*j)).count() as u8;
        let mu_b_h = (0..2).filter(|j| bit(*j)).count() as u8;
        let mu_b_v = (2..4).filter(|j| !bit(*j)).count() as u8;
        let mu_a_h = (2..4).filter(|j| bit(*j)).count() as u8;
        let amp_a = fock_overlap(pattern[0], pattern[1], mu_a_v, mu_a_h, theta);
        let amp_b = fock_overlap(pattern[2], pattern[3], mu_b_v, mu_b_h, theta);
        let amp = coeff * amp_a * amp_b;
        if amp == 0.0 {
            continue;
        }
        let mut assignment: Vec<(String, String)> = Vec::with_capacity(8);
        for (j, site) in SITES.iter().enumerate() {
            let level = if bit(j) { "gr" } else { "gl" };
            assignment.push((format!("{site}.atom"), level.to_string()));
            assignment.push((format!("{site}.photon"), "used".to_string()));
        }
        let borrowed: Vec<(&str, &str)> = assignment
            .iter()
            .map(|(s, l)| (s.as_str(), l.as_str()))
            .collect();
        let term = Ket::basis(&space, &borrowed)?.scale(Complex64::new(amp, 0.0));
        result = result.add(&term)?;
    }
    Ok(result)
}

const FACTORIALS: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

fn binomial(n: u8, k: u8) -> f64 {
    FACTORIALS[n as usize] / (FACTORIALS[k as usize] * FACTORIALS[(n - k) as usize])
}

/// ⟨n_F, n_S| of one path's detector modes applied to the normalized state
/// with μ_V photons in the V mode and μ_H in the H mode, where
/// V → cos θ F + sin θ S and H → sin θ F − cos θ S.
fn fock_overlap(n_f: u8, n_s: u8, mu_v: u8, mu_h: u8, theta: f64) -> f64 {
    if n_f + n_s != mu_v + mu_h {
        return 0.0;
    }
    let (sin, cos) = theta.sin_cos();
    let mut sum = 0.0;
    let k_min = n_f.saturating_sub(mu_h);
    let k_max = n_f.min(mu_v);
    for k in k_min..=k_max {
        let from_h = n_f - k;
        sum += binomial(mu_v, k)
            * binomial(mu_h, from_h)
            * cos.powi(k as i32)
            * sin.powi((mu_v - k) as i32)
            * sin.powi(from_h as i32)
            * (-cos).powi((mu_h - from_h) as i32);
    }
    let symmetry = (FACTORIALS[n_f as usize] * FACTORIALS[n_s as usize]
        / (FACTORIALS[mu_v as usize] * FACTORIALS[mu_h as usize]))
        .sqrt();
    symmetry * sum
}
