//! The linear-optical network between the cavities and the detectors.
//!
//! Each party's two cavity outputs pass a quarter-wave plate (circular to
//! linear polarization), then polarizing beam splitters merge the four
//! outputs onto two paths: Alice's V and Bob's H light share path a, Alice's
//! H and Bob's V share path b. Each path ends in a beam splitter rotated by
//! θ whose outputs F (transmitted) and S (reflected) feed one detector each,
//! four detectors total. Photons from the two same-party cavities are
//! indistinguishable, so network amplitudes never depend on the cavity
//! index.
//!
//! With the adopted phase convention every amplitude in the network is real:
//! V → cos θ·F + sin θ·S and H → sin θ·F − cos θ·S, with no extra reflection
//! phases.

use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("splitter angle {0} outside [0, pi/2)")]
    AngleOutOfRange(f64),
    #[error("tan^2(2 theta) target {0} must be finite and non-negative")]
    BadTangentTarget(f64),
    #[error("unknown detector name `{0}` (expected Da_F, Da_S, Db_F or Db_S)")]
    UnknownDetector(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CavityIndex {
    One,
    Two,
}

/// Linear polarization after the quarter-wave plates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    V,
    H,
}

/// Circular polarization as emitted by the atomic transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CircularPolarization {
    L,
    R,
}

/// The two merged propagation paths feeding the rotated splitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Path {
    A,
    B,
}

/// The four herald detectors. F/S names the transmitted/reflected output of
/// the rotated splitter on path a or b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorId {
    DaF,
    DaS,
    DbF,
    DbS,
}

impl DetectorId {
    pub const ALL: [DetectorId; 4] = [
        DetectorId::DaF,
        DetectorId::DaS,
        DetectorId::DbF,
        DetectorId::DbS,
    ];

    pub fn path(&self) -> Path {
        match self {
            DetectorId::DaF | DetectorId::DaS => Path::A,
            DetectorId::DbF | DetectorId::DbS => Path::B,
        }
    }

    /// Position in [`DetectorId::ALL`]; used to index occupation patterns.
    pub fn index(&self) -> usize {
        match self {
            DetectorId::DaF => 0,
            DetectorId::DaS => 1,
            DetectorId::DbF => 2,
            DetectorId::DbS => 3,
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DetectorId::DaF => "Da_F",
            DetectorId::DaS => "Da_S",
            DetectorId::DbF => "Db_F",
            DetectorId::DbS => "Db_S",
        };
        f.write_str(name)
    }
}

impl FromStr for DetectorId {
    type Err = OpticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Da_F" => Ok(DetectorId::DaF),
            "Da_S" => Ok(DetectorId::DaS),
            "Db_F" => Ok(DetectorId::DbF),
            "Db_S" => Ok(DetectorId::DbS),
            other => Err(OpticsError::UnknownDetector(other.to_string())),
        }
    }
}

/// One emitted photon entering the network, identified by its origin and
/// post-QWP polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhotonSource {
    pub party: Party,
    pub cavity_index: CavityIndex,
    pub polarization: Polarization,
}

/// Rotation angle of the two F/S beam splitters, restricted to [0, π/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitterAngle {
    theta: f64,
}

impl SplitterAngle {
    pub fn new(theta: f64) -> Result<Self, OpticsError> {
        if !theta.is_finite() || !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(OpticsError::AngleOutOfRange(theta));
        }
        Ok(SplitterAngle { theta })
    }

    /// The protocol's working point, the solution of tan²(2θ) = 2 in the
    /// first quadrant: θ = arctan(√2)/2 ≈ 0.4777. At this angle
    /// cos(2θ) = 1/√3.
    pub fn canonical() -> Self {
        SplitterAngle {
            theta: 0.5 * std::f64::consts::SQRT_2.atan(),
        }
    }

    /// Solves tan²(2θ) = `target` for the branch with 2θ in the first
    /// quadrant.
    pub fn from_tan_sq_double(target: f64) -> Result<Self, OpticsError> {
        if !target.is_finite() || target < 0.0 {
            return Err(OpticsError::BadTangentTarget(target));
        }
        Ok(SplitterAngle {
            theta: 0.5 * target.sqrt().atan(),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Quarter-wave-plate relabeling: left-circular light becomes V, right-
/// circular becomes H.
pub fn qwp_map(circular: CircularPolarization) -> Polarization {
    match circular {
        CircularPolarization::L => Polarization::V,
        CircularPolarization::R => Polarization::H,
    }
}

/// Inverse of [`qwp_map`].
pub fn qwp_unmap(linear: Polarization) -> CircularPolarization {
    match linear {
        Polarization::V => CircularPolarization::L,
        Polarization::H => CircularPolarization::R,
    }
}

/// Which merged path a photon of the given origin and polarization travels.
pub fn route(party: Party, polarization: Polarization) -> Path {
    match (party, polarization) {
        (Party::Alice, Polarization::V) => Path::A,
        (Party::Alice, Polarization::H) => Path::B,
        (Party::Bob, Polarization::V) => Path::B,
        (Party::Bob, Polarization::H) => Path::A,
    }
}

/// F and S output amplitudes of a rotated splitter for one input
/// polarization. Real by the module's phase convention; the 2×2 transfer
/// matrix over (V, H) is orthogonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitterAmplitudes {
    pub f: f64,
    pub s: f64,
}

pub fn fs_pbs_amplitudes(polarization: Polarization, angle: SplitterAngle) -> SplitterAmplitudes {
    let (sin, cos) = angle.theta().sin_cos();
    match polarization {
        Polarization::V => SplitterAmplitudes { f: cos, s: sin },
        Polarization::H => SplitterAmplitudes { f: sin, s: -cos },
    }
}

/// Amplitude for a photon from `src` to land in detector `det`: zero when
/// the routing paths differ, otherwise the F or S splitter amplitude.
/// Independent of the cavity index.
pub fn detector_amplitude(src: PhotonSource, det: DetectorId, angle: SplitterAngle) -> f64 {
    if route(src.party, src.polarization) != det.path() {
        return 0.0;
    }
    let amps = fs_pbs_amplitudes(src.polarization, angle);
    match det {
        DetectorId::DaF | DetectorId::DbF => amps.f,
        DetectorId::DaS | DetectorId::DbS => amps.s,
    }
}

/// Source labels for [`transfer_matrix`] rows, in order.
pub const SOURCE_ORDER: [(Party, Polarization); 4] = [
    (Party::Alice, Polarization::V),
    (Party::Alice, Polarization::H),
    (Party::Bob, Polarization::V),
    (Party::Bob, Polarization::H),
];

/// The 4×4 map from (party, polarization) inputs to the four detectors,
/// rows in [`SOURCE_ORDER`], columns in [`DetectorId::ALL`] order. Orthogonal
/// for every angle.
pub fn transfer_matrix(angle: SplitterAngle) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for (row, (party, pol)) in SOURCE_ORDER.iter().enumerate() {
        for det in DetectorId::ALL {
            m[row][det.index()] = detector_amplitude(
                PhotonSource {
                    party: *party,
                    cavity_index: CavityIndex::One,
                    polarization: *pol,
                },
                det,
                angle,
            );
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn source(party: Party, cavity_index: CavityIndex, polarization: Polarization) -> PhotonSource {
        PhotonSource {
            party,
            cavity_index,
            polarization,
        }
    }

    #[test]
    fn qwp_is_the_quoted_bijection() {
        assert_eq!(qwp_map(CircularPolarization::L), Polarization::V);
        assert_eq!(qwp_map(CircularPolarization::R), Polarization::H);
        for c in [CircularPolarization::L, CircularPolarization::R] {
            assert_eq!(qwp_unmap(qwp_map(c)), c);
        }
    }

    #[test]
    fn routing_table() {
        assert_eq!(route(Party::Alice, Polarization::V), Path::A);
        assert_eq!(route(Party::Alice, Polarization::H), Path::B);
        assert_eq!(route(Party::Bob, Polarization::V), Path::B);
        assert_eq!(route(Party::Bob, Polarization::H), Path::A);
    }

    #[test]
    fn splitter_at_zero_angle_is_signed_identity() {
        let angle = SplitterAngle::new(0.0).unwrap();
        let v = fs_pbs_amplitudes(Polarization::V, angle);
        assert_eq!((v.f, v.s), (1.0, 0.0));
        let h = fs_pbs_amplitudes(Polarization::H, angle);
        assert_eq!((h.f, h.s), (0.0, -1.0));
    }

    #[test]
    fn canonical_angle_satisfies_its_definition() {
        let theta = SplitterAngle::canonical().theta();
        let tan2 = (2.0 * theta).tan();
        assert!((tan2 * tan2 - 2.0).abs() < 1e-12);
        assert!(((2.0 * theta).cos() - 1.0 / 3.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            SplitterAngle::from_tan_sq_double(2.0).unwrap().theta(),
            theta
        );
    }

    #[test]
    fn angle_range_is_enforced() {
        assert!(SplitterAngle::new(-0.1).is_err());
        assert!(SplitterAngle::new(std::f64::consts::FRAC_PI_2).is_err());
        assert!(SplitterAngle::new(0.0).is_ok());
        assert!(SplitterAngle::from_tan_sq_double(-1.0).is_err());
    }

    #[test]
    fn detector_amplitudes_match_the_collapse_coefficients() {
        let angle = SplitterAngle::new(0.3).unwrap();
        let (sin, cos) = (0.3f64.sin(), 0.3f64.cos());
        let alice_v = source(Party::Alice, CavityIndex::One, Polarization::V);
        assert!((detector_amplitude(alice_v, DetectorId::DaF, angle) - cos).abs() < 1e-15);
        assert_eq!(detector_amplitude(alice_v, DetectorId::DbF, angle), 0.0);
        let bob_h = source(Party::Bob, CavityIndex::Two, Polarization::H);
        assert!((detector_amplitude(bob_h, DetectorId::DaS, angle) + cos).abs() < 1e-15);
        assert!((detector_amplitude(bob_h, DetectorId::DaF, angle) - sin).abs() < 1e-15);
    }

    #[test]
    fn cavity_index_never_matters() {
        let angle = SplitterAngle::canonical();
        for party in [Party::Alice, Party::Bob] {
            for pol in [Polarization::V, Polarization::H] {
                for det in DetectorId::ALL {
                    let one = detector_amplitude(source(party, CavityIndex::One, pol), det, angle);
                    let two = detector_amplitude(source(party, CavityIndex::Two, pol), det, angle);
                    assert_eq!(one, two);
                }
            }
        }
    }

    #[test]
    fn detector_names_round_trip() {
        for det in DetectorId::ALL {
            assert_eq!(det.to_string().parse::<DetectorId>().unwrap(), det);
        }
        assert!(matches!(
            "Dc_F".parse::<DetectorId>(),
            Err(OpticsError::UnknownDetector(_))
        ));
    }

    proptest! {
        /// No photon is lost inside the ideal network: amplitudes over the
        /// four detectors square-sum to one for every source.
        #[test]
        fn network_is_complete(theta in 0.0f64..std::f64::consts::FRAC_PI_2) {
            let angle = SplitterAngle::new(theta).unwrap();
            for party in [Party::Alice, Party::Bob] {
                for pol in [Polarization::V, Polarization::H] {
                    let total: f64 = DetectorId::ALL
                        .iter()
                        .map(|det| {
                            let a = detector_amplitude(
                                source(party, CavityIndex::One, pol),
                                *det,
                                angle,
                            );
                            a * a
                        })
                        .sum();
                    prop_assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }

        /// The full source-to-detector matrix is orthogonal at every angle.
        #[test]
        fn transfer_matrix_is_orthogonal(theta in 0.0f64..std::f64::consts::FRAC_PI_2) {
            let m = transfer_matrix(SplitterAngle::new(theta).unwrap());
            for i in 0..4 {
                for j in 0..4 {
                    let dot: f64 = (0..4).map(|k| m[i][k] * m[j][k]).sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - expected).abs() < 1e-12);
                }
            }
        }
    }
}
