//! Hyperfine-Zeeman structure of the S₁/₂ and D₅/₂ manifolds.
//!
//! Each manifold is diagonalized block by block in the uncoupled
//! `|m_J, m_I⟩` basis; `m_F = m_J + m_I` is conserved, so blocks never mix.
//! Levels carry the `(F, m_F)` label they connect to adiabatically at zero
//! field. Labels are followed by eigenvector overlap along a fine field grid
//! starting from `B = 0`; a weak overlap marks the label as ambiguous rather
//! than guessing.
//!
//! Energies are ordinary frequencies in Hz, fields in gauss. A negative field
//! means the field points against the quantization axis.

mod atomic;
mod spectator;

pub use atomic::AtomicConstants;
pub use spectator::{
    offres_error, spectator_detunings, DriveLine, OffResonantTerm, SpectatorDetuning, SpectatorReport,
    SpectatorTransition,
};

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::constants::BOHR_MAGNETON_HZ_PER_GAUSS;
use crate::{Error, Result};

/// Grid step used when following labels from zero field.
pub const TRACKING_STEP_GAUSS: f64 = 0.01;
/// Overlap below which a followed label is flagged ambiguous.
pub const MIN_TRACKING_OVERLAP: f64 = 0.6;
/// Central-difference step for field derivatives.
pub const DERIVATIVE_STEP_GAUSS: f64 = 1e-3;
/// Absolute field tolerance of [`find_sweet_spot`].
pub const SWEET_SPOT_TOL_GAUSS: f64 = 1e-4;

/// Fine and hyperfine constants of one `(J, I)` manifold.
///
/// Half-integer momenta are stored doubled. `g_i` follows the Bohr-magneton
/// convention `H_Z = μ_B B (g_J J_z + g_I I_z)`, so a positive nuclear moment
/// gives a negative `g_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperfineManifold {
    two_j: u32,
    two_i: u32,
    a_hf_hz: f64,
    b_quad_hz: f64,
    g_j: f64,
    g_i: f64,
}

impl HyperfineManifold {
    pub fn new(two_j: u32, two_i: u32, a_hf_hz: f64, b_quad_hz: f64, g_j: f64, g_i: f64) -> Result<Self> {
        if two_j == 0 || two_i == 0 {
            return Err(Error::invalid("J and I must be positive"));
        }
        if ![a_hf_hz, b_quad_hz, g_j, g_i].iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("manifold constants must be finite"));
        }
        if (two_j < 2 || two_i < 2) && b_quad_hz != 0.0 {
            return Err(Error::invalid("quadrupole constant must vanish for J=1/2 or I=1/2"));
        }
        Ok(Self { two_j, two_i, a_hf_hz, b_quad_hz, g_j, g_i })
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn i(&self) -> f64 {
        self.two_i as f64 / 2.0
    }

    pub fn a_hf_hz(&self) -> f64 {
        self.a_hf_hz
    }

    pub fn b_quad_hz(&self) -> f64 {
        self.b_quad_hz
    }

    pub fn g_j(&self) -> f64 {
        self.g_j
    }

    pub fn g_i(&self) -> f64 {
        self.g_i
    }

    pub fn dimension(&self) -> usize {
        ((self.two_j + 1) * (self.two_i + 1)) as usize
    }

    /// All doubled `m_F` values present in the manifold, ascending.
    pub fn two_mf_values(&self) -> Vec<i32> {
        let top = (self.two_j + self.two_i) as i32;
        (0..=top).map(|k| -top + 2 * k).collect()
    }

    /// Uncoupled basis `(2m_J, 2m_I)` of one `m_F` block.
    fn block_basis(&self, two_mf: i32) -> Vec<(i32, i32)> {
        let (tj, ti) = (self.two_j as i32, self.two_i as i32);
        (0..=tj)
            .map(|k| tj - 2 * k)
            .filter_map(|two_mj| {
                let two_mi = two_mf - two_mj;
                (two_mi.abs() <= ti && (two_mi + ti) % 2 == 0).then_some((two_mj, two_mi))
            })
            .collect()
    }

    /// `I·J` restricted to a block.
    fn i_dot_j(&self, basis: &[(i32, i32)]) -> DMatrix<f64> {
        let (j, i) = (self.j(), self.i());
        let n = basis.len();
        let mut m = DMatrix::zeros(n, n);
        for (a, &(tmj, tmi)) in basis.iter().enumerate() {
            let (mj, mi) = (tmj as f64 / 2.0, tmi as f64 / 2.0);
            m[(a, a)] = mj * mi;
            // ½ J₊I₋ |m_J, m_I⟩ → |m_J+1, m_I−1⟩
            if let Some(b) = basis.iter().position(|&s| s == (tmj + 2, tmi - 2)) {
                let v = 0.5 * raising(j, mj) * lowering(i, mi);
                m[(b, a)] = v;
                m[(a, b)] = v;
            }
        }
        m
    }

    /// Block Hamiltonian at field `b_gauss`, in Hz.
    pub fn block_hamiltonian(&self, two_mf: i32, b_gauss: f64) -> DMatrix<f64> {
        let basis = self.block_basis(two_mf);
        let n = basis.len();
        let ij = self.i_dot_j(&basis);
        let mut h = &ij * self.a_hf_hz;
        if self.b_quad_hz != 0.0 {
            let (j, i) = (self.j(), self.i());
            let denom = 2.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0);
            let q = (&ij * &ij) * 3.0 + &ij * 1.5 - DMatrix::identity(n, n) * (i * (i + 1.0) * j * (j + 1.0));
            h += q * (self.b_quad_hz / denom);
        }
        for (a, &(tmj, tmi)) in basis.iter().enumerate() {
            h[(a, a)] += BOHR_MAGNETON_HZ_PER_GAUSS
                * b_gauss
                * (self.g_j * tmj as f64 / 2.0 + self.g_i * tmi as f64 / 2.0);
        }
        h
    }

    /// `F² = I² + J² + 2 I·J` restricted to a block.
    fn f_squared(&self, two_mf: i32) -> DMatrix<f64> {
        let basis = self.block_basis(two_mf);
        let n = basis.len();
        let (j, i) = (self.j(), self.i());
        self.i_dot_j(&basis) * 2.0 + DMatrix::identity(n, n) * (i * (i + 1.0) + j * (j + 1.0))
    }
}

fn raising(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

fn lowering(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m - 1.0)).max(0.0).sqrt()
}

/// Adiabatic `(F, m_F)` label, both doubled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelLabel {
    pub two_f: u32,
    pub two_mf: i32,
}

impl LevelLabel {
    /// Label with integer `F` and `m_F`.
    pub const fn integer(f: u32, mf: i32) -> Self {
        Self { two_f: 2 * f, two_mf: 2 * mf }
    }
}

impl fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let half = |x: i64| if x % 2 == 0 { format!("{}", x / 2) } else { format!("{x}/2") };
        write!(f, "F={},mF={}", half(self.two_f as i64), half(self.two_mf as i64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    pub label: LevelLabel,
    pub energy_hz: f64,
    /// Set when the label could not be followed unambiguously from zero field.
    pub ambiguous: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelDiagram {
    pub field_gauss: f64,
    /// Sorted by `m_F`, then energy.
    pub levels: Vec<Level>,
}

impl LevelDiagram {
    pub fn level(&self, label: LevelLabel) -> Result<&Level> {
        self.levels
            .iter()
            .find(|l| l.label == label)
            .ok_or_else(|| Error::NotFound(format!("level {label}")))
    }

    /// Energy of a labelled level; errors if the label is flagged ambiguous.
    pub fn energy(&self, label: LevelLabel) -> Result<f64> {
        checked_energy(self.level(label)?, self.field_gauss)
    }
}

fn checked_energy(level: &Level, field_gauss: f64) -> Result<f64> {
    if level.ambiguous {
        return Err(Error::LabelAmbiguity { label: level.label.to_string(), field_gauss });
    }
    Ok(level.energy_hz)
}

/// Follows the eigenstates of one `m_F` block as the field changes.
#[derive(Clone, Debug)]
pub struct BlockTracker {
    manifold: HyperfineManifold,
    two_mf: i32,
    field_gauss: f64,
    /// Columns in label order.
    vectors: DMatrix<f64>,
    energies: Vec<f64>,
    labels: Vec<LevelLabel>,
    ambiguous: Vec<bool>,
}

impl BlockTracker {
    /// Starts at zero field, assigning `F` from `⟨F²⟩` of each eigenvector.
    pub fn new(manifold: HyperfineManifold, two_mf: i32) -> Result<Self> {
        let top = (manifold.two_j + manifold.two_i) as i32;
        if two_mf.abs() > top || (two_mf + top) % 2 != 0 {
            return Err(Error::invalid(format!("m_F*2 = {two_mf} not present in manifold")));
        }
        let (values, vectors) = sorted_eigen(manifold.block_hamiltonian(two_mf, 0.0));
        let f2 = manifold.f_squared(two_mf);
        let mut labels = Vec::with_capacity(values.len());
        let mut ambiguous = Vec::with_capacity(values.len());
        for k in 0..values.len() {
            let v = vectors.column(k);
            let expect = v.dot(&(&f2 * v));
            // F(F+1) = x  ⇒  2F = √(1+4x) − 1
            let two_f = (1.0 + 4.0 * expect).sqrt() - 1.0;
            let rounded = two_f.round();
            labels.push(LevelLabel { two_f: rounded.max(0.0) as u32, two_mf });
            ambiguous.push((two_f - rounded).abs() > 1e-3);
        }
        Ok(Self { manifold, two_mf, field_gauss: 0.0, vectors, energies: values, labels, ambiguous })
    }

    pub fn field_gauss(&self) -> f64 {
        self.field_gauss
    }

    /// Moves to `b_gauss` in steps no larger than [`TRACKING_STEP_GAUSS`].
    pub fn advance_to(&mut self, b_gauss: f64) -> Result<()> {
        if !b_gauss.is_finite() {
            return Err(Error::invalid("field must be finite"));
        }
        let span = b_gauss - self.field_gauss;
        let steps = (span.abs() / TRACKING_STEP_GAUSS).ceil() as usize;
        let start = self.field_gauss;
        for s in 1..=steps {
            let b = if s == steps { b_gauss } else { start + span * s as f64 / steps as f64 };
            self.step(b);
        }
        self.field_gauss = b_gauss;
        Ok(())
    }

    fn step(&mut self, b: f64) {
        let (values, vectors) = sorted_eigen(self.manifold.block_hamiltonian(self.two_mf, b));
        let n = values.len();
        let overlap = self.vectors.transpose() * &vectors;
        let mut assignment = vec![usize::MAX; n];
        let mut taken = vec![false; n];
        for (k, slot) in assignment.iter_mut().enumerate() {
            let (best, best_val) = (0..n)
                .map(|j| (j, overlap[(k, j)].abs()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best_val < MIN_TRACKING_OVERLAP || taken[best] {
                self.ambiguous[k] = true;
            } else {
                *slot = best;
                taken[best] = true;
            }
        }
        // Anything left unmatched falls back to energy order.
        let mut free = (0..n).filter(|&j| !taken[j]);
        for slot in assignment.iter_mut().filter(|s| **s == usize::MAX) {
            *slot = free.next().expect("assignment is a permutation");
        }
        let mut new_vectors = DMatrix::zeros(n, n);
        for (k, &j) in assignment.iter().enumerate() {
            let sign = if overlap[(k, j)] < 0.0 { -1.0 } else { 1.0 };
            new_vectors.set_column(k, &(vectors.column(j) * sign));
            self.energies[k] = values[j];
        }
        self.vectors = new_vectors;
        self.field_gauss = b;
    }

    pub fn levels(&self) -> Vec<Level> {
        let mut out: Vec<Level> = (0..self.energies.len())
            .map(|k| Level { label: self.labels[k], energy_hz: self.energies[k], ambiguous: self.ambiguous[k] })
            .collect();
        out.sort_by(|a, b| a.energy_hz.total_cmp(&b.energy_hz));
        out
    }

    pub fn energy(&self, label: LevelLabel) -> Result<f64> {
        let k = self
            .labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::NotFound(format!("level {label}")))?;
        let level = Level { label, energy_hz: self.energies[k], ambiguous: self.ambiguous[k] };
        checked_energy(&level, self.field_gauss)
    }
}

fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Full level diagram of a manifold at `b_gauss`.
pub fn diagonalize_manifold(manifold: &HyperfineManifold, b_gauss: f64) -> Result<LevelDiagram> {
    let mut levels = Vec::with_capacity(manifold.dimension());
    for two_mf in manifold.two_mf_values() {
        let mut tracker = BlockTracker::new(*manifold, two_mf)?;
        tracker.advance_to(b_gauss)?;
        levels.extend(tracker.levels());
    }
    Ok(LevelDiagram { field_gauss: b_gauss, levels })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QubitType {
    S,
    D,
}

impl fmt::Display for QubitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QubitType::S => "S",
            QubitType::D => "D",
        })
    }
}

/// A qubit encoded in two levels of one manifold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitSpec {
    pub kind: QubitType,
    pub manifold: HyperfineManifold,
    /// `|0⟩`
    pub lower: LevelLabel,
    /// `|1⟩`
    pub upper: LevelLabel,
}

impl QubitSpec {
    /// `|0_S⟩ = |F=1, m_F=0⟩`, `|1_S⟩ = |F=2, m_F=0⟩` of S₁/₂.
    pub fn s_type(s12: HyperfineManifold) -> Self {
        Self { kind: QubitType::S, manifold: s12, lower: LevelLabel::integer(1, 0), upper: LevelLabel::integer(2, 0) }
    }

    /// `|0_D⟩ = |F=2, m_F=1⟩`, `|1_D⟩ = |F=3, m_F=1⟩` of D₅/₂.
    pub fn d_type(d52: HyperfineManifold) -> Self {
        Self { kind: QubitType::D, manifold: d52, lower: LevelLabel::integer(2, 1), upper: LevelLabel::integer(3, 1) }
    }
}

/// Transition frequency `|E(upper) − E(lower)|` in Hz.
pub fn qubit_frequency(qubit: &QubitSpec, b_gauss: f64) -> Result<f64> {
    let mut lower = BlockTracker::new(qubit.manifold, qubit.lower.two_mf)?;
    lower.advance_to(b_gauss)?;
    let e_lower = lower.energy(qubit.lower)?;
    let e_upper = if qubit.upper.two_mf == qubit.lower.two_mf {
        lower.energy(qubit.upper)?
    } else {
        let mut upper = BlockTracker::new(qubit.manifold, qubit.upper.two_mf)?;
        upper.advance_to(b_gauss)?;
        upper.energy(qubit.upper)?
    };
    Ok((e_upper - e_lower).abs())
}

/// `dν/dB` in Hz/G by central difference with step [`DERIVATIVE_STEP_GAUSS`].
pub fn sensitivity(qubit: &QubitSpec, b_gauss: f64) -> Result<f64> {
    let h = DERIVATIVE_STEP_GAUSS;
    Ok((qubit_frequency(qubit, b_gauss + h)? - qubit_frequency(qubit, b_gauss - h)?) / (2.0 * h))
}

/// Field in `[lo, hi]` where the qubit frequency is stationary, by bisection
/// on the sign of [`sensitivity`].
pub fn find_sweet_spot(qubit: &QubitSpec, lo: f64, hi: f64) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("bad field range [{lo}, {hi}]")));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut s_lo = sensitivity(qubit, lo)?;
    let s_hi = sensitivity(qubit, hi)?;
    if s_lo == 0.0 {
        return Ok(lo);
    }
    if s_hi == 0.0 {
        return Ok(hi);
    }
    if s_lo.signum() == s_hi.signum() {
        return Err(Error::NotFound(format!(
            "no sign change of dν/dB in [{lo}, {hi}] G ({s_lo:.3} and {s_hi:.3} Hz/G)"
        )));
    }
    while hi - lo > SWEET_SPOT_TOL_GAUSS {
        let mid = 0.5 * (lo + hi);
        let s_mid = sensitivity(qubit, mid)?;
        if s_mid == 0.0 {
            return Ok(mid);
        }
        if s_mid.signum() == s_lo.signum() {
            lo = mid;
            s_lo = s_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
