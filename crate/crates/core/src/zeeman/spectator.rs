//! Nearby D₅/₂ transitions that the D-qubit Raman drive could excite.

use std::collections::BTreeMap;
use std::fmt;

use crate::{Error, Result};

use super::{BlockTracker, HyperfineManifold, LevelLabel, QubitSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpectatorTransition {
    pub from: LevelLabel,
    pub to: LevelLabel,
}

impl SpectatorTransition {
    /// The two D₅/₂ transitions closest to the D qubit near 12 G:
    /// `|F=2,m_F=1⟩ → |F=1,m_F=0⟩` and `|F=3,m_F=1⟩ → |F=4,m_F=−1⟩`.
    pub const D52_DEFAULT: [SpectatorTransition; 2] = [
        SpectatorTransition { from: LevelLabel::integer(2, 1), to: LevelLabel::integer(1, 0) },
        SpectatorTransition { from: LevelLabel::integer(3, 1), to: LevelLabel::integer(4, -1) },
    ];

    /// Short machine-friendly name, e.g. `F2m1_F1m0`.
    pub fn key(&self) -> String {
        let part = |l: LevelLabel| {
            let m = l.two_mf / 2;
            let m = if m < 0 { format!("m{}", -m) } else { m.to_string() };
            format!("F{}m{}", l.two_f / 2, m)
        };
        format!("{}_{}", part(self.from), part(self.to))
    }
}

impl fmt::Display for SpectatorTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}> -> |{}>", self.from, self.to)
    }
}

/// A frequency the D-qubit drive addresses: the carrier or a motional sideband.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriveLine {
    Carrier,
    /// Red sideband of mode `k`.
    Red(usize),
    /// Blue sideband of mode `k`.
    Blue(usize),
}

impl DriveLine {
    pub fn mode(&self) -> Option<usize> {
        match *self {
            DriveLine::Carrier => None,
            DriveLine::Red(k) | DriveLine::Blue(k) => Some(k),
        }
    }
}

impl fmt::Display for DriveLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriveLine::Carrier => f.write_str("carrier"),
            DriveLine::Red(k) => write!(f, "red{k}"),
            DriveLine::Blue(k) => write!(f, "blue{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectatorDetuning {
    pub transition: SpectatorTransition,
    pub line: DriveLine,
    pub spectator_hz: f64,
    pub line_hz: f64,
    /// `|spectator − line|`
    pub detuning_hz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectatorReport {
    pub field_gauss: f64,
    pub qubit_hz: f64,
    pub entries: Vec<SpectatorDetuning>,
}

impl SpectatorReport {
    pub fn min_detuning(&self) -> Option<&SpectatorDetuning> {
        self.entries.iter().min_by(|a, b| a.detuning_hz.total_cmp(&b.detuning_hz))
    }

    /// One term per (transition, line) pair. Carrier lines couple with
    /// `transition_coupling`; sidebands of mode `k` are further suppressed
    /// by `sideband_coupling[k]` (typically the single-ion Lamb-Dicke factor).
    pub fn offres_terms(&self, transition_coupling: f64, sideband_coupling: &[f64]) -> Result<Vec<OffResonantTerm>> {
        self.entries
            .iter()
            .map(|e| {
                let coupling = match e.line.mode() {
                    None => transition_coupling,
                    Some(k) => {
                        let s = sideband_coupling
                            .get(k)
                            .ok_or_else(|| Error::invalid(format!("no sideband coupling for mode {k}")))?;
                        transition_coupling * s
                    }
                };
                Ok(OffResonantTerm { detuning_hz: e.detuning_hz, coupling })
            })
            .collect()
    }
}

/// Detunings of the default spectator transitions from the D-qubit carrier
/// and its sidebands at `±mode_freqs_hz`.
pub fn spectator_detunings(d52: &HyperfineManifold, b_gauss: f64, mode_freqs_hz: &[f64]) -> Result<SpectatorReport> {
    let transitions = SpectatorTransition::D52_DEFAULT;
    let qubit = QubitSpec::d_type(*d52);

    let mut trackers: BTreeMap<i32, BlockTracker> = BTreeMap::new();
    let mut labels = vec![qubit.lower, qubit.upper];
    for t in &transitions {
        labels.push(t.from);
        labels.push(t.to);
    }
    for l in &labels {
        if let std::collections::btree_map::Entry::Vacant(slot) = trackers.entry(l.two_mf) {
            let mut tr = BlockTracker::new(*d52, l.two_mf)?;
            tr.advance_to(b_gauss)?;
            slot.insert(tr);
        }
    }
    let energy = |l: LevelLabel| trackers[&l.two_mf].energy(l);

    let qubit_hz = (energy(qubit.upper)? - energy(qubit.lower)?).abs();
    let mut lines = vec![(DriveLine::Carrier, qubit_hz)];
    for (k, &f) in mode_freqs_hz.iter().enumerate() {
        lines.push((DriveLine::Red(k), qubit_hz - f));
        lines.push((DriveLine::Blue(k), qubit_hz + f));
    }

    let mut entries = Vec::new();
    for t in transitions {
        let spectator_hz = (energy(t.to)? - energy(t.from)?).abs();
        for &(line, line_hz) in &lines {
            entries.push(SpectatorDetuning {
                transition: t,
                line,
                spectator_hz,
                line_hz,
                detuning_hz: (spectator_hz - line_hz).abs(),
            });
        }
    }
    Ok(SpectatorReport { field_gauss: b_gauss, qubit_hz, entries })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffResonantTerm {
    pub detuning_hz: f64,
    /// Effective Rabi rate relative to the qubit carrier Rabi rate.
    pub coupling: f64,
}

/// Time-averaged off-resonant excitation summed over terms:
/// `Σ Ω²/(2(Ω² + Δ²))` with `Ω = coupling · rabi_hz`.
///
/// `rabi_hz` and the detunings are ordinary frequencies; only their ratio
/// enters.
pub fn offres_error(terms: &[OffResonantTerm], rabi_hz: f64) -> Result<f64> {
    if !(rabi_hz >= 0.0 && rabi_hz.is_finite()) {
        return Err(Error::invalid(format!("Rabi rate must be non-negative, got {rabi_hz}")));
    }
    let mut total = 0.0;
    for t in terms {
        if t.detuning_hz == 0.0 || !t.detuning_hz.is_finite() {
            return Err(Error::invalid(format!("spectator detuning {} Hz is resonant or invalid", t.detuning_hz)));
        }
        let omega = t.coupling * rabi_hz;
        let o2 = omega * omega;
        total += o2 / (2.0 * (o2 + t.detuning_hz * t.detuning_hz));
    }
    Ok(total)
}
