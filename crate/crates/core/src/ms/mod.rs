//! Bichromatic Mølmer-Sørensen interaction on two ions and two transverse
//! modes.
//!
//! All rates are angular (rad/s), times in seconds. In the interaction
//! picture and to first order in the Lamb-Dicke factors the drive is
//!
//! ```text
//! H(t) = ½ Σ_i Σ_k η_ik Ω_i σ_φi^(i) (a_k e^{−i(δ_k t + φ_m)} + a_k† e^{i(δ_k t + φ_m)})
//! ```
//!
//! with `δ_k = µ − ω_k`. On the `±1` eigenbranches `s_i` of `σ_φi` each mode
//! is displaced along `α_k(t) = λ_k (1 − e^{iδ_k t}) e^{iφ_m} / (2δ_k)`,
//! `λ_k = Σ_i s_i η_ik Ω_i`, and the two-qubit part of the evolution is
//! `exp(iχ(t) σ_φ1 σ_φ2)`.

mod hamiltonian;

pub(crate) use hamiltonian::step_count;
pub use hamiltonian::{build_hamiltonian, max_step, propagate_unitary, LambDickeOrder, MsHamiltonian};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4};

use crate::constants::HBAR;
use crate::quantum::TwoQubitState;
use crate::zeeman::QubitType;
use crate::{Error, Result, C64};

/// Multiplies `η₁η₂Ω₁Ω₂ (t/δ − sin δt/δ²)` in the geometric phase. Fixed by
/// matching the numerical propagator.
pub const GEOMETRIC_PHASE_PREFACTOR: f64 = 0.5;

/// Upper bound on `η√(n̄+1)` for the first-order expansion to be trusted.
pub const LAMB_DICKE_LIMIT: f64 = 0.3;

/// Relative deviation between predicted and measured mode frequencies above
/// which a warning is logged.
pub const MODE_OVERRIDE_WARN: f64 = 0.01;

/// `|δ t|` below which the phase integrals switch to their series.
const SMALL_PHASE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapSpec {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
}

impl TrapSpec {
    pub fn new(omega_x: f64, omega_y: f64, omega_z: f64) -> Result<Self> {
        if !(omega_z > 0.0 && omega_x > omega_z && omega_y > omega_z && omega_x.is_finite() && omega_y.is_finite()) {
            return Err(Error::invalid(format!(
                "trap needs ω_x, ω_y > ω_z > 0, got ({omega_x:.6e}, {omega_y:.6e}, {omega_z:.6e}) rad/s"
            )));
        }
        Ok(Self { omega_x, omega_y, omega_z })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeKind {
    Com,
    Rocking,
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeKind::Com => "com",
            ModeKind::Rocking => "rocking",
        })
    }
}

/// A transverse normal mode before any laser geometry is attached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalMode {
    pub kind: ModeKind,
    pub omega: f64,
    /// Per-ion participation `b_{i,k}`.
    pub participation: [f64; 2],
}

/// A normal mode together with its per-ion Lamb-Dicke factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSpec {
    pub kind: ModeKind,
    pub omega: f64,
    pub participation: [f64; 2],
    pub eta: [f64; 2],
}

impl ModeSpec {
    pub fn new(mode: NormalMode, delta_k: f64, mass_kg: f64) -> Result<Self> {
        let eta = lamb_dicke(delta_k, mass_kg, &mode)?;
        Ok(Self { kind: mode.kind, omega: mode.omega, participation: mode.participation, eta })
    }

    /// Single-ion Lamb-Dicke factor, i.e. `η_{i,k} / b_{i,k}`.
    pub fn single_ion_eta(&self) -> f64 {
        let (i, b) = if self.participation[0].abs() >= self.participation[1].abs() {
            (0, self.participation[0])
        } else {
            (1, self.participation[1])
        };
        if b == 0.0 { 0.0 } else { self.eta[i] / b }
    }
}

/// Transverse x-modes of two equal-mass ions: COM at `ω_x`, rocking at
/// `√(ω_x² − ω_z²)`.
pub fn mode_spectrum(trap: &TrapSpec) -> Result<[NormalMode; 2]> {
    if trap.omega_z >= trap.omega_x {
        return Err(Error::invalid("ω_z must be below ω_x for transverse modes"));
    }
    let b = std::f64::consts::FRAC_1_SQRT_2;
    Ok([
        NormalMode { kind: ModeKind::Com, omega: trap.omega_x, participation: [b, b] },
        NormalMode {
            kind: ModeKind::Rocking,
            omega: (trap.omega_x * trap.omega_x - trap.omega_z * trap.omega_z).sqrt(),
            participation: [b, -b],
        },
    ])
}

/// Replaces predicted frequencies by measured ones (same order as the
/// input), warning when they differ by more than [`MODE_OVERRIDE_WARN`].
pub fn override_frequencies(modes: [NormalMode; 2], measured: [f64; 2]) -> Result<[NormalMode; 2]> {
    let mut out = modes;
    for (m, &w) in out.iter_mut().zip(&measured) {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::invalid(format!("measured {} frequency must be positive", m.kind)));
        }
        let rel = (w - m.omega).abs() / m.omega;
        if rel > MODE_OVERRIDE_WARN {
            log::warn!(
                "{} mode: measured {:.4} MHz differs from harmonic {:.4} MHz by {:.2}%",
                m.kind,
                w / (2.0 * PI * 1e6),
                m.omega / (2.0 * PI * 1e6),
                100.0 * rel
            );
        }
        m.omega = w;
    }
    Ok(out)
}

/// Wave-vector difference of two counter-propagating Raman beams projected
/// on a mode axis at `angle_rad`: `2 · (2π/λ) · cos(angle)`.
pub fn raman_wavevector(wavelength_m: f64, angle_rad: f64) -> Result<f64> {
    if !(wavelength_m > 0.0 && wavelength_m.is_finite()) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    let dk = 2.0 * (2.0 * PI / wavelength_m) * angle_rad.cos();
    if !(dk > 0.0) {
        return Err(Error::invalid(format!("beam angle {angle_rad} rad gives no projection on the mode axis")));
    }
    Ok(dk)
}

/// `η_{i,k} = Δk · √(ħ / 2mω_k) · b_{i,k}`.
pub fn lamb_dicke(delta_k: f64, mass_kg: f64, mode: &NormalMode) -> Result<[f64; 2]> {
    if !(delta_k > 0.0 && mass_kg > 0.0 && mode.omega > 0.0) {
        return Err(Error::invalid("Δk, mass and mode frequency must be positive"));
    }
    let x0 = (HBAR / (2.0 * mass_kg * mode.omega)).sqrt();
    Ok(mode.participation.map(|b| delta_k * x0 * b))
}

/// `4π / |ω_c − ω_r|`: both modes close one loop with the detuning centered
/// between them.
pub fn gate_time(omega_c: f64, omega_r: f64) -> Result<f64> {
    let split = (omega_c - omega_r).abs();
    if !(split > 0.0 && split.is_finite()) {
        return Err(Error::invalid("degenerate modes have no two-loop gate time"));
    }
    Ok(4.0 * PI / split)
}

/// `µ = (ω_c + ω_r)/2`.
pub fn centered_detuning(omega_c: f64, omega_r: f64) -> f64 {
    0.5 * (omega_c + omega_r)
}

/// Which qubit types sit on the two ions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairType {
    SS,
    DD,
    SD,
}

impl PairType {
    pub const ALL: [PairType; 3] = [PairType::SS, PairType::DD, PairType::SD];

    pub fn qubit_types(&self) -> [QubitType; 2] {
        match self {
            PairType::SS => [QubitType::S, QubitType::S],
            PairType::DD => [QubitType::D, QubitType::D],
            PairType::SD => [QubitType::S, QubitType::D],
        }
    }

    /// Sign with which the common beam phase enters each ion's drive and
    /// analysis rotations. The D-type Raman process runs with the opposite
    /// frequency ordering of the beams, so scanning the phase rotates S and D
    /// qubits in opposite senses.
    pub fn phase_sense(&self) -> [f64; 2] {
        self.qubit_types().map(|q| match q {
            QubitType::S => 1.0,
            QubitType::D => -1.0,
        })
    }

    /// Computational-basis label of the initial qubit state: `|00⟩` for
    /// same-type pairs, `|0_S 1_D⟩` for SD.
    pub fn initial_bits(&self) -> [usize; 2] {
        match self {
            PairType::SS | PairType::DD => [0, 0],
            PairType::SD => [0, 1],
        }
    }

    pub fn initial_qubits(&self) -> TwoQubitState {
        let [a, b] = self.initial_bits();
        let mut v = TwoQubitState::zeros();
        v[2 * a + b] = C64::new(1.0, 0.0);
        v
    }
}

impl fmt::Display for PairType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairType::SS => "ss",
            PairType::DD => "dd",
            PairType::SD => "sd",
        })
    }
}

impl FromStr for PairType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(PairType::SS),
            "dd" => Ok(PairType::DD),
            "sd" => Ok(PairType::SD),
            _ => Err(Error::invalid(format!("unknown pair type `{s}` (expected ss, dd or sd)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveSpec {
    /// Carrier Rabi rates of ion 1 and ion 2.
    pub rabi: [f64; 2],
    /// Detuning of the bichromatic tones from the carrier.
    pub mu: f64,
    /// Spin phase per ion, before the pair's phase sense is applied.
    pub spin_phase: [f64; 2],
    pub motional_phase: f64,
}

impl DriveSpec {
    pub fn new(rabi: [f64; 2], mu: f64) -> Result<Self> {
        let d = Self { rabi, mu, spin_phase: [0.0; 2], motional_phase: 0.0 };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rabi.iter().all(|r| *r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("Rabi rates must be non-negative, got {:?}", self.rabi)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("detuning µ must be positive, got {}", self.mu)));
        }
        if !self.spin_phase.iter().chain([&self.motional_phase]).all(|p| p.is_finite()) {
            return Err(Error::invalid("phases must be finite"));
        }
        Ok(())
    }

    /// Spin phases as seen by each ion: `sense_i · φ_i`.
    pub fn effective_spin_phases(&self, pair: PairType) -> [f64; 2] {
        let s = pair.phase_sense();
        [s[0] * self.spin_phase[0], s[1] * self.spin_phase[1]]
    }

    pub fn with_rabi(mut self, rabi: [f64; 2]) -> Self {
        self.rabi = rabi;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateSchedule {
    pub duration: f64,
    pub mu: f64,
    pub rabi: [f64; 2],
    pub chi_target: f64,
}

impl GateSchedule {
    /// Two-loop gate at the centered detuning, calibrated for `|χ(T)| = π/4`
    /// with `Ω₂/Ω₁ = ratio`.
    pub fn centered(modes: &[ModeSpec; 2], ratio: f64) -> Result<Self> {
        let (c, r) = (modes[0].omega, modes[1].omega);
        let duration = gate_time(c, r)?;
        let mu = centered_detuning(c, r);
        let rabi = calibrate_rabi(modes, mu, duration, ratio)?;
        Ok(Self { duration, mu, rabi, chi_target: PI / 4.0 })
    }

    pub fn drive(&self) -> DriveSpec {
        DriveSpec { rabi: self.rabi, mu: self.mu, spin_phase: [0.0; 2], motional_phase: 0.0 }
    }
}

/// Largest `|η|√(n̄+1)` over modes and ions; errors if it reaches
/// [`LAMB_DICKE_LIMIT`].
pub fn check_lamb_dicke(modes: &[ModeSpec], nbar: f64) -> Result<f64> {
    let worst = modes
        .iter()
        .flat_map(|m| m.eta)
        .map(|e| e.abs() * (nbar + 1.0).sqrt())
        .fold(0.0, f64::max);
    if worst >= LAMB_DICKE_LIMIT {
        return Err(Error::invalid(format!("η√(n̄+1) = {worst:.3} is outside the Lamb-Dicke regime")));
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Displacement {
    pub alpha: C64,
    /// The mode is driven on resonance (`δ = 0`) and `α` grows linearly.
    pub resonant: bool,
}

/// Coherent displacement of `mode` at time `t` for the spin branch with
/// `σ_φi` eigenvalues `signs`.
pub fn displacement_trajectory(drive: &DriveSpec, mode: &ModeSpec, signs: [f64; 2], t: f64) -> Result<Displacement> {
    drive.validate()?;
    check_lamb_dicke(std::slice::from_ref(mode), 0.0)?;
    let lambda = signs[0] * mode.eta[0] * drive.rabi[0] + signs[1] * mode.eta[1] * drive.rabi[1];
    let delta = drive.mu - mode.omega;
    let phase = C64::from_polar(1.0, drive.motional_phase);
    if delta == 0.0 {
        return Ok(Displacement { alpha: C64::new(0.0, -0.5 * lambda * t) * phase, resonant: true });
    }
    let x = delta * t;
    // (1 − e^{ix})/δ, with the series near zero to avoid cancellation
    let ratio = if x.abs() < SMALL_PHASE {
        C64::new(x * x / 2.0, -x + x * x * x / 6.0) / delta
    } else {
        (C64::new(1.0, 0.0) - C64::from_polar(1.0, x)) / delta
    };
    Ok(Displacement { alpha: ratio * (0.5 * lambda) * phase, resonant: false })
}

/// `t/δ − sin(δt)/δ²`, continuous through `δ = 0`.
fn phase_integral(delta: f64, t: f64) -> f64 {
    let x = delta * t;
    if x.abs() < SMALL_PHASE {
        // δt³/6 − δ³t⁵/120
        delta * t.powi(3) / 6.0 - delta.powi(3) * t.powi(5) / 120.0
    } else {
        t / delta - x.sin() / (delta * delta)
    }
}

/// Two-qubit geometric phase `χ(t)`, summed over modes, such that the spin
/// part of the evolution at loop closure is `exp(iχ σ_φ1 σ_φ2)`.
pub fn geometric_phase(drive: &DriveSpec, modes: &[ModeSpec], t: f64) -> Result<f64> {
    drive.validate()?;
    check_lamb_dicke(modes, 0.0)?;
    let product = drive.rabi[0] * drive.rabi[1];
    Ok(modes
        .iter()
        .map(|m| GEOMETRIC_PHASE_PREFACTOR * m.eta[0] * m.eta[1] * product * phase_integral(drive.mu - m.omega, t))
        .sum())
}

/// Rabi pair `(Ω₁, Ω₂)` with `Ω₂ = ratio · Ω₁` giving `|χ(T)| = π/4`.
pub fn calibrate_rabi(modes: &[ModeSpec; 2], mu: f64, duration: f64, ratio: f64) -> Result<[f64; 2]> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::invalid(format!("Rabi ratio must be positive, got {ratio}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("gate duration must be positive"));
    }
    let unit = DriveSpec::new([1.0, 1.0], mu)?;
    let per_product = geometric_phase(&unit, modes, duration)?.abs();
    if !(per_product > 0.0 && per_product.is_finite()) {
        return Err(Error::invalid("drive accumulates no geometric phase (zero Lamb-Dicke coupling?)"));
    }
    let product = (PI / 4.0) / per_product;
    let omega1 = (product / ratio).sqrt();
    Ok([omega1, ratio * omega1])
}

fn pauli_phi_2(phi: f64) -> Matrix2<C64> {
    let z = C64::new(0.0, 0.0);
    Matrix2::new(z, C64::from_polar(1.0, -phi), C64::from_polar(1.0, phi), z)
}

/// `exp(iχ σ_φ1 ⊗ σ_φ2) = cos χ · 1 + i sin χ · σ_φ1 ⊗ σ_φ2`.
pub fn ms_unitary(phases: [f64; 2], chi: f64) -> Matrix4<C64> {
    let p = pauli_phi_2(phases[0]).kronecker(&pauli_phi_2(phases[1]));
    Matrix4::identity() * C64::new(chi.cos(), 0.0) + p * C64::new(0.0, chi.sin())
}

/// Ideal two-qubit output of the gate for `pair` after accumulating `chi`.
pub fn ideal_output(pair: PairType, drive: &DriveSpec, chi: f64) -> TwoQubitState {
    ms_unitary(drive.effective_spin_phases(pair), chi) * pair.initial_qubits()
}
