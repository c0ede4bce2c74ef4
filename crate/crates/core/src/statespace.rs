//! Sparse state vectors over named tensor-product spaces.
//!
//! Every state is a complex amplitude map keyed by basis labels of the form
//! `(subsystem, level)` for each registered subsystem. The protocol states
//! carry at most a few dozen nonzero amplitudes out of a formally large
//! product space, so a sparse map keeps the algebra exact and the debug
//! output legible. Subsystems are identified by name and kept in a fixed
//! canonical (lexicographic) order so that label comparison, serialization,
//! and equality are all deterministic.

use num_complex::Complex64;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

/// Amplitudes with magnitude below this threshold are dropped after each
/// arithmetic operation. Small enough that no reported probability moves by
/// more than 1e-10.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-15;

/// How far a squared norm may deviate from 1 before a state stops counting
/// as normalized for fidelity purposes.
pub const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("subsystem `{0}` is not registered in this space")]
    UnknownSubsystem(String),
    #[error("level `{level}` is not part of subsystem `{subsystem}`")]
    UnknownLevel { subsystem: String, level: String },
    #[error("duplicate subsystem id `{0}` in space definition")]
    DuplicateSubsystem(String),
    #[error("subsystem `{0}` has an empty level alphabet")]
    EmptyLevels(String),
    #[error("label must assign exactly one level to each registered subsystem")]
    IncompleteLabel,
    #[error("operands live in different spaces")]
    SpaceMismatch,
    #[error("tensor factors both register subsystem `{0}`")]
    OverlappingSubsystems(String),
    #[error("cannot normalize: squared norm {0:.3e} is degenerate")]
    DegenerateNorm(f64),
    #[error("state is not normalized (squared norm off by {0:.3e})")]
    NotNormalized(f64),
    #[error("subsystems `{0}` and `{1}` have different level alphabets")]
    AlphabetMismatch(String, String),
}

/// One named tensor factor with a small named level alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsystem {
    pub id: String,
    pub levels: Vec<String>,
}

impl Subsystem {
    pub fn new(id: &str, levels: &[&str]) -> Self {
        Subsystem {
            id: id.to_string(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// An ordered collection of subsystems defining a tensor-product space.
///
/// Cheap to clone; the subsystem list is shared. Two spaces are equal when
/// they register the same subsystems with the same alphabets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Space {
    subsystems: Arc<Vec<Subsystem>>,
}

impl Space {
    /// Builds a space from subsystem registrations. The registrations are
    /// sorted into canonical order by id; duplicate ids and empty alphabets
    /// are rejected.
    pub fn new(mut subsystems: Vec<Subsystem>) -> Result<Self, StateError> {
        subsystems.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in subsystems.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(StateError::DuplicateSubsystem(pair[0].id.clone()));
            }
        }
        for s in &subsystems {
            if s.levels.is_empty() {
                return Err(StateError::EmptyLevels(s.id.clone()));
            }
        }
        Ok(Space {
            subsystems: Arc::new(subsystems),
        })
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    fn position(&self, id: &str) -> Result<usize, StateError> {
        self.subsystems
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .map_err(|_| StateError::UnknownSubsystem(id.to_string()))
    }

    fn level_index(&self, pos: usize, level: &str) -> Result<u8, StateError> {
        let sub = &self.subsystems[pos];
        sub.levels
            .iter()
            .position(|l| l == level)
            .map(|i| i as u8)
            .ok_or_else(|| StateError::UnknownLevel {
                subsystem: sub.id.clone(),
                level: level.to_string(),
            })
    }

    /// Translates `(subsystem, level)` pairs into a packed label. Every
    /// subsystem must be assigned exactly once; order does not matter.
    fn encode_label(&self, assignment: &[(&str, &str)]) -> Result<Label, StateError> {
        if assignment.len() != self.len() {
            return Err(StateError::IncompleteLabel);
        }
        let mut packed = vec![u8::MAX; self.len()];
        for (id, level) in assignment {
            let pos = self.position(id)?;
            if packed[pos] != u8::MAX {
                return Err(StateError::IncompleteLabel);
            }
            packed[pos] = self.level_index(pos, level)?;
        }
        Ok(Label(packed.into_boxed_slice()))
    }
}

/// Packed basis label: one level index per subsystem, in space order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(Box<[u8]>);

impl Label {
    pub fn level_index(&self, pos: usize) -> u8 {
        self.0[pos]
    }
}

/// A sparse state vector in a [`Space`].
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    space: Space,
    amps: BTreeMap<Label, Complex64>,
}

impl Ket {
    /// The zero vector.
    pub fn zero(space: Space) -> Self {
        Ket {
            space,
            amps: BTreeMap::new(),
        }
    }

    /// A single basis state with amplitude 1.
    pub fn basis(space: &Space, assignment: &[(&str, &str)]) -> Result<Self, StateError> {
        let label = space.encode_label(assignment)?;
        let mut amps = BTreeMap::new();
        amps.insert(label, Complex64::new(1.0, 0.0));
        Ok(Ket {
            space: space.clone(),
            amps,
        })
    }

    /// A superposition given as `(assignment, amplitude)` terms. Repeated
    /// labels accumulate.
    pub fn from_terms(
        space: &Space,
        terms: &[(&[(&str, &str)], Complex64)],
    ) -> Result<Self, StateError> {
        let mut amps: BTreeMap<Label, Complex64> = BTreeMap::new();
        for (assignment, amp) in terms {
            let label = space.encode_label(assignment)?;
            *amps.entry(label).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        let mut ket = Ket {
            space: space.clone(),
            amps,
        };
        ket.prune(DEFAULT_PRUNE_THRESHOLD);
        Ok(ket)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    /// Number of stored (nonzero) amplitudes.
    pub fn term_count(&self) -> usize {
        self.amps.len()
    }

    /// Iterates stored terms in canonical label order.
    pub fn terms(&self) -> impl Iterator<Item = (&Label, Complex64)> {
        self.amps.iter().map(|(l, a)| (l, *a))
    }

    /// The amplitude on one basis label (zero when absent).
    pub fn amplitude(&self, assignment: &[(&str, &str)]) -> Result<Complex64, StateError> {
        let label = self.space.encode_label(assignment)?;
        Ok(self
            .amps
            .get(&label)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0)))
    }

    /// Decodes a stored label back into `(subsystem, level)` string pairs.
    pub fn describe(&self, label: &Label) -> Vec<(&str, &str)> {
        self.space
            .subsystems()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), s.levels[label.0[i] as usize].as_str()))
            .collect()
    }

    pub fn add(&self, other: &Ket) -> Result<Ket, StateError> {
        if self.space != other.space {
            return Err(StateError::SpaceMismatch);
        }
        let mut amps = self.amps.clone();
        for (label, amp) in &other.amps {
            *amps
                .entry(label.clone())
                .or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        let mut ket = Ket {
            space: self.space.clone(),
            amps,
        };
        ket.prune(DEFAULT_PRUNE_THRESHOLD);
        Ok(ket)
    }

    pub fn scale(&self, factor: Complex64) -> Ket {
        let mut ket = Ket {
            space: self.space.clone(),
            amps: self
                .amps
                .iter()
                .map(|(l, a)| (l.clone(), a * factor))
                .collect(),
        };
        ket.prune(DEFAULT_PRUNE_THRESHOLD);
        ket
    }

    /// `<self|other>`, conjugating `self`.
    pub fn inner(&self, other: &Ket) -> Result<Complex64, StateError> {
        if self.space != other.space {
            return Err(StateError::SpaceMismatch);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        // Iterate the smaller map.
        let (a, b, conj_a) = if self.amps.len() <= other.amps.len() {
            (&self.amps, &other.amps, true)
        } else {
            (&other.amps, &self.amps, false)
        };
        for (label, amp) in a {
            if let Some(bamp) = b.get(label) {
                if conj_a {
                    acc += amp.conj() * bamp;
                } else {
                    acc += bamp.conj() * amp;
                }
            }
        }
        Ok(acc)
    }

    pub fn norm_sq(&self) -> f64 {
        // An empty sum of f64 is IEEE -0.0; keep the result sign-positive.
        self.amps.values().map(|a| a.norm_sqr()).sum::<f64>() + 0.0
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Returns the unit-norm version of this state together with the original
    /// norm. Norms at or below 1e-14 are rejected rather than amplified into
    /// garbage.
    pub fn normalize(&self) -> Result<(Ket, f64), StateError> {
        let n = self.norm();
        if n <= 1e-14 {
            return Err(StateError::DegenerateNorm(n * n));
        }
        Ok((self.scale(Complex64::new(1.0 / n, 0.0)), n))
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// `|<self|other>|^2` for two normalized pure states.
    pub fn fidelity(&self, other: &Ket) -> Result<f64, StateError> {
        for state in [self, other] {
            let dev = (state.norm_sq() - 1.0).abs();
            if dev > NORM_TOLERANCE {
                return Err(StateError::NotNormalized(dev));
            }
        }
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Tensor product. The two spaces must register disjoint subsystem ids;
    /// the result space interleaves them back into canonical order.
    pub fn tensor(&self, other: &Ket) -> Result<Ket, StateError> {
        for s in self.space.subsystems() {
            if other.space.position(&s.id).is_ok() {
                return Err(StateError::OverlappingSubsystems(s.id.clone()));
            }
        }
        let mut merged: Vec<Subsystem> = self.space.subsystems().to_vec();
        merged.extend(other.space.subsystems().iter().cloned());
        let space = Space::new(merged)?;
        // Position of each factor's subsystems inside the merged space.
        let map_a: Vec<usize> = self
            .space
            .subsystems()
            .iter()
            .map(|s| space.position(&s.id).expect("merged space keeps ids"))
            .collect();
        let map_b: Vec<usize> = other
            .space
            .subsystems()
            .iter()
            .map(|s| space.position(&s.id).expect("merged space keeps ids"))
            .collect();
        let mut amps = BTreeMap::new();
        for (la, aa) in &self.amps {
            for (lb, ab) in &other.amps {
                let mut packed = vec![0u8; space.len()];
                for (i, pos) in map_a.iter().enumerate() {
                    packed[*pos] = la.0[i];
                }
                for (i, pos) in map_b.iter().enumerate() {
                    packed[*pos] = lb.0[i];
                }
                amps.insert(Label(packed.into_boxed_slice()), aa * ab);
            }
        }
        let mut ket = Ket { space, amps };
        ket.prune(DEFAULT_PRUNE_THRESHOLD);
        Ok(ket)
    }

    /// Drops stored amplitudes with magnitude below `threshold`.
    pub fn prune(&mut self, threshold: f64) {
        self.amps.retain(|_, a| a.norm() >= threshold);
    }

    /// Applies a linear single-subsystem operator given as
    /// `(from_level, to_level, coefficient)` matrix entries. Components whose
    /// level at `subsystem` matches no `from_level` entry are annihilated,
    /// which is exactly the partial-isometry semantics a detection event
    /// needs. Entries with the same `from_level` act as a coherent sum.
    pub fn apply_level_map(
        &self,
        subsystem: &str,
        entries: &[(&str, &str, Complex64)],
    ) -> Result<Ket, StateError> {
        let pos = self.space.position(subsystem)?;
        let mut compiled = Vec::with_capacity(entries.len());
        for (from, to, coeff) in entries {
            compiled.push((
                self.space.level_index(pos, from)?,
                self.space.level_index(pos, to)?,
                *coeff,
            ));
        }
        let mut amps: BTreeMap<Label, Complex64> = BTreeMap::new();
        for (label, amp) in &self.amps {
            for (from, to, coeff) in &compiled {
                if label.0[pos] != *from {
                    continue;
                }
                let mut packed = label.0.clone();
                packed[pos] = *to;
                *amps
                    .entry(Label(packed))
                    .or_insert(Complex64::new(0.0, 0.0)) += amp * coeff;
            }
        }
        let mut ket = Ket {
            space: self.space.clone(),
            amps,
        };
        ket.prune(DEFAULT_PRUNE_THRESHOLD);
        Ok(ket)
    }

    /// Exchanges the roles of two subsystems with identical level alphabets.
    /// Used for symmetry checks (e.g. swapping the two cavities of a party).
    pub fn swap_subsystems(&self, a: &str, b: &str) -> Result<Ket, StateError> {
        let pa = self.space.position(a)?;
        let pb = self.space.position(b)?;
        let subs = self.space.subsystems();
        if subs[pa].levels != subs[pb].levels {
            return Err(StateError::AlphabetMismatch(a.to_string(), b.to_string()));
        }
        let mut amps = BTreeMap::new();
        for (label, amp) in &self.amps {
            let mut packed = label.0.clone();
            packed.swap(pa, pb);
            amps.insert(Label(packed), *amp);
        }
        Ok(Ket {
            space: self.space.clone(),
            amps,
        })
    }

    /// Largest absolute amplitude difference against another state in the
    /// same space, over the union of stored labels.
    pub fn max_abs_diff(&self, other: &Ket) -> Result<f64, StateError> {
        if self.space != other.space {
            return Err(StateError::SpaceMismatch);
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut worst = 0.0f64;
        for (label, amp) in &self.amps {
            let d = (amp - other.amps.get(label).unwrap_or(&zero)).norm();
            worst = worst.max(d);
        }
        for (label, amp) in &other.amps {
            if !self.amps.contains_key(label) {
                worst = worst.max(amp.norm());
            }
        }
        Ok(worst)
    }

    /// Checks equality up to a global phase: finds the largest amplitude of
    /// `self`, aligns the other state's phase on that label, and compares
    /// all amplitudes within `tol`.
    pub fn matches_up_to_phase(&self, other: &Ket, tol: f64) -> Result<bool, StateError> {
        if self.space != other.space {
            return Err(StateError::SpaceMismatch);
        }
        let anchor = self
            .amps
            .iter()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()));
        let (label, amp) = match anchor {
            Some(pair) => pair,
            // Zero state matches only states with all amplitudes below tol.
            None => return Ok(other.norm() <= tol),
        };
        let counterpart = match other.amps.get(label) {
            Some(c) if c.norm() > 0.0 => c,
            _ => return Ok(false),
        };
        let phase = (amp / counterpart) / (amp / counterpart).norm();
        Ok(self.max_abs_diff(&other.scale(phase))? <= tol)
    }

    /// Debug serialization: space registrations plus stored amplitudes in
    /// canonical order. Stable enough for golden-file regression tests.
    pub fn to_debug_json(&self) -> Value {
        let space: Vec<Value> = self
            .space
            .subsystems()
            .iter()
            .map(|s| json!({"id": s.id, "levels": s.levels}))
            .collect();
        let amps: Vec<Value> = self
            .amps
            .iter()
            .map(|(label, amp)| {
                let assignment: serde_json::Map<String, Value> = self
                    .describe(label)
                    .into_iter()
                    .map(|(id, level)| (id.to_string(), Value::String(level.to_string())))
                    .collect();
                json!({"label": assignment, "re": amp.re, "im": amp.im})
            })
            .collect();
        json!({"space": space, "amps": amps})
    }
}
