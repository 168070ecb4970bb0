//! Markovian noise on top of the MS drive.
//!
//! The master equation is written as
//!
//! ```text
//! dρ/dt = −i(Kρ − ρK†) + Σ_c c ρ c†,   K = H(t) − (i/2) Σ_c c†c
//! ```
//!
//! and integrated with fixed-step RK4 so a given configuration always
//! produces the same bits. Jump operators are stored unscaled next to their
//! rate; the effective jump is `√rate · operator`.

use std::fmt;

use nalgebra::DMatrix;

use crate::ms::{DriveSpec, LambDickeOrder, ModeSpec, MsHamiltonian, PairType};
use crate::quantum::{
    embed, ladder, max_abs, min_eigenvalue, number, pauli_z, CompositeSpace, CompositeState, Operator, ION1,
    MODE_COM,
};
use crate::sparse::SparseOp;
use crate::{Error, Result, C64};

/// Allowed trace drift of the integrated density matrix.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;
/// Most negative eigenvalue accepted at the end of an integration.
pub const POSITIVITY_LIMIT: f64 = -1e-6;

/// Heating rate (quanta/s per mode) that makes the heating-only SD gate
/// error 0.4 %. Back-solved with the first-order drive at `n_max = 5`; see
/// `protocol::solve_heating_rate`.
pub const DEFAULT_HEATING_RATE: f64 = 76.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    LaserDephasing,
    MotionalDephasing,
    Heating,
    OffResonant,
    Spam,
}

impl Channel {
    pub const ALL: [Channel; 5] =
        [Channel::LaserDephasing, Channel::MotionalDephasing, Channel::Heating, Channel::OffResonant, Channel::Spam];

    /// Channels that enter the master equation (the rest are classical).
    pub fn is_dynamical(&self) -> bool {
        matches!(self, Channel::LaserDephasing | Channel::MotionalDephasing | Channel::Heating)
    }

    pub fn key(&self) -> &'static str {
        match self {
            Channel::LaserDephasing => "laser_dephasing",
            Channel::MotionalDephasing => "motional_dephasing",
            Channel::Heating => "heating",
            Channel::OffResonant => "off_resonant",
            Channel::Spam => "spam",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// How laser phase noise is shared between the two ions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DephasingCorrelation {
    /// Each ion dephases on its own.
    #[default]
    Independent,
    /// One noise process for both ions, entering with each ion's phase sense.
    Collective,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    /// Laser (spin) dephasing time, s.
    pub tau_s: f64,
    /// Motional dephasing time, s.
    pub tau_m: f64,
    /// Heating rate, quanta/s per mode.
    pub ndot: f64,
    /// Per-qubit readout flip probability.
    pub eps_spam: f64,
    pub laser: bool,
    pub motional: bool,
    pub heating: bool,
    pub offres: bool,
    pub spam: bool,
    pub laser_correlation: DephasingCorrelation,
}

impl NoiseModel {
    /// Measured operating point: τ_s = 2.6 ms, τ_m = 4.1 ms, back-solved
    /// heating, ε = 0.001, all channels on.
    pub fn operating_point() -> Self {
        Self {
            tau_s: 2.6e-3,
            tau_m: 4.1e-3,
            ndot: DEFAULT_HEATING_RATE,
            eps_spam: 1e-3,
            laser: true,
            motional: true,
            heating: true,
            offres: true,
            spam: true,
            laser_correlation: DephasingCorrelation::Independent,
        }
    }

    /// Same parameters with every channel switched off.
    pub fn none() -> Self {
        Self::operating_point().with_only(&[])
    }

    pub fn enabled(&self, channel: Channel) -> bool {
        match channel {
            Channel::LaserDephasing => self.laser,
            Channel::MotionalDephasing => self.motional,
            Channel::Heating => self.heating,
            Channel::OffResonant => self.offres,
            Channel::Spam => self.spam,
        }
    }

    pub fn set_enabled(&mut self, channel: Channel, on: bool) {
        match channel {
            Channel::LaserDephasing => self.laser = on,
            Channel::MotionalDephasing => self.motional = on,
            Channel::Heating => self.heating = on,
            Channel::OffResonant => self.offres = on,
            Channel::Spam => self.spam = on,
        }
    }

    /// Copy with exactly the listed channels enabled.
    pub fn with_only(&self, channels: &[Channel]) -> Self {
        let mut n = *self;
        for c in Channel::ALL {
            n.set_enabled(c, channels.contains(&c));
        }
        n
    }

    pub fn any_dynamical(&self) -> bool {
        Channel::ALL.iter().any(|c| c.is_dynamical() && self.enabled(*c))
    }

    /// Readout flip probability actually applied (zero when SPAM is off).
    pub fn effective_spam(&self) -> f64 {
        if self.spam { self.eps_spam } else { 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.laser && !(self.tau_s > 0.0) {
            return Err(Error::invalid(format!("τ_s must be positive, got {}", self.tau_s)));
        }
        if self.motional && !(self.tau_m > 0.0) {
            return Err(Error::invalid(format!("τ_m must be positive, got {}", self.tau_m)));
        }
        if self.heating && !(self.ndot >= 0.0 && self.ndot.is_finite()) {
            return Err(Error::invalid(format!("heating rate must be non-negative, got {}", self.ndot)));
        }
        if !(0.0..1.0).contains(&self.eps_spam) {
            return Err(Error::invalid(format!("SPAM error must be in [0, 1), got {}", self.eps_spam)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Collapse {
    pub operator: Operator,
    /// Rate in 1/s; the jump operator is `√rate · operator`.
    pub rate: f64,
    pub channel: Channel,
}

#[derive(Clone, Debug)]
pub struct CollapseSet {
    space: CompositeSpace,
    items: Vec<Collapse>,
}

impl CollapseSet {
    pub fn new(space: CompositeSpace) -> Self {
        Self { space, items: Vec::new() }
    }

    pub fn push(&mut self, channel: Channel, operator: Operator, rate: f64) -> Result<()> {
        if operator.space() != self.space {
            return Err(Error::invalid("collapse operator lives on a different space"));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("collapse rate must be non-negative, got {rate}")));
        }
        self.items.push(Collapse { operator, rate, channel });
        Ok(())
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn items(&self) -> &[Collapse] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

/// Jump operators for the enabled dynamical channels.
///
/// * laser dephasing: `σ_z` per ion at rate `1/(2τ_s)` (independent) or
///   `Σ_i s_i σ_z^(i)` at the same rate (collective, `s_i` the phase sense),
///   so a single-qubit Ramsey coherence decays as `e^{−t/τ_s}`;
/// * motional dephasing: `a_k†a_k` at rate `2/τ_m` per mode, so
///   `(|0⟩+|1⟩)/√2` loses coherence as `e^{−t/τ_m}`;
/// * heating: `a_k†` and `a_k` at rate `ṅ` per mode.
pub fn collapse_ops(noise: &NoiseModel, space: CompositeSpace, pair: PairType) -> Result<CollapseSet> {
    noise.validate()?;
    let mut set = CollapseSet::new(space);
    if noise.laser {
        let rate = 1.0 / (2.0 * noise.tau_s);
        let z = [embed(&pauli_z(), ION1, space)?, embed(&pauli_z(), ION1 + 1, space)?];
        match noise.laser_correlation {
            DephasingCorrelation::Independent => {
                for op in z {
                    set.push(Channel::LaserDephasing, op, rate)?;
                }
            }
            DephasingCorrelation::Collective => {
                let s = pair.phase_sense();
                let op = z[0].scale(C64::new(s[0], 0.0)).add(&z[1].scale(C64::new(s[1], 0.0)));
                set.push(Channel::LaserDephasing, op, rate)?;
            }
        }
    }
    if noise.motional {
        for k in 0..2 {
            set.push(Channel::MotionalDephasing, embed(&number(space.n_max()), MODE_COM + k, space)?, 2.0 / noise.tau_m)?;
        }
    }
    if noise.heating && noise.ndot > 0.0 {
        let a = ladder(space.n_max());
        for k in 0..2 {
            set.push(Channel::Heating, embed(&a.adjoint(), MODE_COM + k, space)?, noise.ndot)?;
            set.push(Channel::Heating, embed(&a, MODE_COM + k, space)?, noise.ndot)?;
        }
    }
    Ok(set)
}

/// Dense right-hand side of the master equation.
pub fn lindblad_rhs(rho: &DMatrix<C64>, h: &Operator, collapses: &CollapseSet) -> Result<DMatrix<C64>> {
    let d = h.space().total_dim();
    if rho.nrows() != d || rho.ncols() != d || collapses.space() != h.space() {
        return Err(Error::invalid(format!(
            "shape mismatch: ρ is {}x{}, H needs {d}x{d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let i = C64::new(0.0, 1.0);
    let hm = h.matrix();
    let mut out = (hm * rho - rho * hm) * (-i);
    for c in collapses.items() {
        let op = c.operator.matrix();
        let cdc = op.adjoint() * op;
        let r = C64::new(c.rate, 0.0);
        out += (op * rho * op.adjoint() - (&cdc * rho + rho * &cdc) * C64::new(0.5, 0.0)) * r;
    }
    Ok(out)
}

/// Sparse master-equation generator for an MS drive plus collapse set.
pub struct MasterEquation {
    hamiltonian: MsHamiltonian,
    jumps: Vec<SparseOp>,
    /// `Σ c†c`, Hermitian.
    decay: SparseOp,
}

impl MasterEquation {
    pub fn new(hamiltonian: MsHamiltonian, collapses: &CollapseSet) -> Result<Self> {
        let space = hamiltonian.space();
        if collapses.space() != space {
            return Err(Error::invalid("collapse set and Hamiltonian live on different spaces"));
        }
        let d = space.total_dim();
        let mut decay = DMatrix::<C64>::zeros(d, d);
        let mut jumps = Vec::with_capacity(collapses.len());
        for c in collapses.items() {
            if c.rate == 0.0 {
                continue;
            }
            let scaled = c.operator.matrix() * C64::new(c.rate.sqrt(), 0.0);
            decay += scaled.adjoint() * &scaled;
            jumps.push(SparseOp::from_dense(&scaled));
        }
        Ok(Self { hamiltonian, jumps, decay: SparseOp::from_dense(&decay) })
    }

    pub fn space(&self) -> CompositeSpace {
        self.hamiltonian.space()
    }

    /// `out = dρ/dt` at time `t`; `scratch` is a same-shape work buffer.
    fn rhs(&self, t: f64, rho: &DMatrix<C64>, out: &mut DMatrix<C64>, scratch: &mut DMatrix<C64>) {
        let i = C64::new(0.0, 1.0);
        out.fill(C64::new(0.0, 0.0));
        for (c, op) in self.hamiltonian.sparse_terms(t) {
            op.left_mul_acc(rho, out, -i * c);
            op.right_mul_adjoint_acc(rho, out, i * c.conj());
        }
        self.decay.left_mul_acc(rho, out, C64::new(-0.5, 0.0));
        self.decay.right_mul_adjoint_acc(rho, out, C64::new(-0.5, 0.0));
        for jump in &self.jumps {
            scratch.fill(C64::new(0.0, 0.0));
            jump.left_mul_acc(rho, scratch, C64::new(1.0, 0.0));
            jump.right_mul_adjoint_acc(scratch, out, C64::new(1.0, 0.0));
        }
    }

    /// Fixed-step RK4 from 0 to `duration` with steps no longer than `dt`.
    pub fn integrate(&self, rho0: &CompositeState, duration: f64, dt: f64) -> Result<CompositeState> {
        let space = self.space();
        if rho0.space() != space {
            return Err(Error::invalid("initial state lives on a different space"));
        }
        let steps = crate::ms::step_count(duration, dt, self.hamiltonian.max_rate())?;
        let h = duration / steps as f64;
        let d = space.total_dim();
        let zero = || DMatrix::<C64>::zeros(d, d);
        let mut rho = rho0.to_density();
        let mut k = [zero(), zero(), zero(), zero()];
        let mut stage = zero();
        let mut scratch = zero();
        for s in 0..steps {
            let t = s as f64 * h;
            for (idx, (frac, weight)) in [(0.0, 0.0), (0.5, 0.5), (0.5, 0.5), (1.0, 1.0)].into_iter().enumerate() {
                stage.copy_from(&rho);
                if idx > 0 {
                    let (done, rest) = k.split_at_mut(idx);
                    stage.zip_apply(&done[idx - 1], |a, b| *a += b * (weight * h));
                    self.rhs(t + frac * h, &stage, &mut rest[0], &mut scratch);
                } else {
                    self.rhs(t, &stage, &mut k[0], &mut scratch);
                }
            }
            let w = h / 6.0;
            for (j, f) in [1.0, 2.0, 2.0, 1.0].into_iter().enumerate() {
                rho.zip_apply(&k[j], |a, b| *a += b * (w * f));
            }
        }
        finish_density(space, rho, steps, h)
    }
}

/// Checks trace drift and positivity, then removes rounding-level
/// non-Hermiticity and trace error.
fn finish_density(space: CompositeSpace, rho: DMatrix<C64>, steps: usize, h: f64) -> Result<CompositeState> {
    let tr = rho.trace();
    let drift = ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt();
    if drift > TRACE_DRIFT_LIMIT {
        return Err(Error::StepSize(format!("trace drifted by {drift:.3e} over {steps} steps of {h:.3e} s")));
    }
    let herm = max_abs(&(&rho - rho.adjoint()));
    if herm > TRACE_DRIFT_LIMIT {
        return Err(Error::StepSize(format!("density matrix lost Hermiticity ({herm:.3e})")));
    }
    let mut rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    rho /= C64::new(rho.trace().re, 0.0);
    let lowest = min_eigenvalue(&rho);
    if lowest < POSITIVITY_LIMIT {
        return Err(Error::StepSize(format!("density matrix eigenvalue {lowest:.3e} below {POSITIVITY_LIMIT:.0e}")));
    }
    CompositeState::density(space, rho)
}

/// Evolves `rho0` through the gate drive under the enabled noise channels.
#[allow(clippy::too_many_arguments)]
pub fn integrate_master(
    rho0: &CompositeState,
    drive: &DriveSpec,
    modes: &[ModeSpec; 2],
    pair: PairType,
    noise: &NoiseModel,
    duration: f64,
    dt: f64,
) -> Result<CompositeState> {
    let space = rho0.space();
    let ham = MsHamiltonian::new(space, drive, modes, pair, LambDickeOrder::First)?;
    let collapses = collapse_ops(noise, space, pair)?;
    MasterEquation::new(ham, &collapses)?.integrate(rho0, duration, dt)
}

/// Independent symmetric readout flips with probability `eps` on each qubit.
/// Outcomes are ordered `(00, 01, 10, 11)`.
pub fn apply_spam(probabilities: [f64; 4], eps: f64) -> Result<[f64; 4]> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("SPAM error must be in [0, 1), got {eps}")));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    let flip = |keep: bool| if keep { 1.0 - eps } else { eps };
    let mut out = [0.0; 4];
    for (measured, o) in out.iter_mut().enumerate() {
        for (prepared, p) in probabilities.iter().enumerate() {
            let a = (measured >> 1) == (prepared >> 1);
            let b = (measured & 1) == (prepared & 1);
            *o += p * flip(a) * flip(b);
        }
    }
    Ok(out)
}
