use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::quantum::{embed, ladder, pauli_phi, CompositeSpace, CompositeState, Operator, ION1, MODE_COM};
use crate::sparse::SparseOp;
use crate::{Error, Result, C64};

use super::{DriveSpec, ModeSpec, PairType};

/// Norm drift that turns a propagation into a step-size error.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Extra Fock levels used when exponentiating `iη(a + a†)` for
/// [`LambDickeOrder::Exact`] before truncating back.
const EXACT_PADDING: usize = 30;

/// How the spin-motion coupling is expanded in the Lamb-Dicke factors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LambDickeOrder {
    /// `η a†`: the standard first-order coupling.
    #[default]
    First,
    /// Matrix elements of `exp(iη(a + a†))` on the first sideband, including
    /// the Debye-Waller reduction from the other mode. Only for truncation
    /// studies.
    Exact,
}

struct DriveTerm {
    delta: f64,
    raise: SparseOp,
    lower: SparseOp,
}

/// `H(t) = Σ_k (e^{iδ_k t} R_k + e^{−iδ_k t} R_k†)`, with `R_k` the
/// time-independent phonon-raising part of mode `k`.
pub struct MsHamiltonian {
    space: CompositeSpace,
    terms: Vec<DriveTerm>,
    max_rate: f64,
}

impl MsHamiltonian {
    pub fn new(
        space: CompositeSpace,
        drive: &DriveSpec,
        modes: &[ModeSpec; 2],
        pair: PairType,
        order: LambDickeOrder,
    ) -> Result<Self> {
        drive.validate()?;
        let phases = drive.effective_spin_phases(pair);
        let sigma = [
            embed(&pauli_phi(phases[0]), ION1, space)?,
            embed(&pauli_phi(phases[1]), ION1 + 1, space)?,
        ];
        let motional = C64::from_polar(0.5, drive.motional_phase);

        let mut terms = Vec::with_capacity(2);
        let mut max_rate = drive.rabi.iter().fold(0.0f64, |m, r| m.max(*r));
        for (k, mode) in modes.iter().enumerate() {
            let slot = MODE_COM + k;
            let other = MODE_COM + 1 - k;
            let mut r = DMatrix::<C64>::zeros(space.total_dim(), space.total_dim());
            #[allow(clippy::needless_range_loop)] // indexes rabi, eta and sigma together
            for i in 0..2 {
                if drive.rabi[i] == 0.0 || mode.eta[i] == 0.0 {
                    continue;
                }
                let coupling = match order {
                    LambDickeOrder::First => embed(&ladder(space.n_max()).adjoint(), slot, space)?
                        .scale(C64::new(mode.eta[i], 0.0)),
                    LambDickeOrder::Exact => {
                        let (_, up) = displacement_bands(mode.eta[i], space.n_max());
                        let (dw, _) = displacement_bands(modes[1 - k].eta[i], space.n_max());
                        embed(&(up * C64::new(0.0, -1.0)), slot, space)?.mul(&embed(&dw, other, space)?)
                    }
                };
                r += sigma[i].mul(&coupling).matrix() * (motional * drive.rabi[i]);
            }
            let raise = SparseOp::from_dense(&r);
            let lower = raise.adjoint();
            let delta = drive.mu - mode.omega;
            max_rate = max_rate.max(delta.abs());
            terms.push(DriveTerm { delta, raise, lower });
        }
        Ok(Self { space, terms, max_rate })
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    /// `max(|δ_k|, Ω_i)`, the fastest rate the integrators must resolve.
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    pub fn at(&self, t: f64) -> Operator {
        let mut m = DMatrix::zeros(self.space.total_dim(), self.space.total_dim());
        for (c, op) in self.sparse_terms(t) {
            for &(i, j, v) in &op.entries {
                m[(i, j)] += c * v;
            }
        }
        Operator::new(self.space, m).expect("dimensions match by construction")
    }

    pub(crate) fn sparse_terms(&self, t: f64) -> impl Iterator<Item = (C64, &SparseOp)> {
        self.terms.iter().flat_map(move |term| {
            let c = C64::from_polar(1.0, term.delta * t);
            [(c, &term.raise), (c.conj(), &term.lower)]
        })
    }

    /// `out += scale · H(t) · x`.
    pub(crate) fn apply_acc(&self, t: f64, x: &DVector<C64>, out: &mut DVector<C64>, scale: C64) {
        for (c, op) in self.sparse_terms(t) {
            op.apply_acc(x, out, c * scale);
        }
    }

    /// Fixed-step RK4 integration of `i dψ/dt = H(t) ψ` from 0 to `duration`
    /// with steps no longer than `dt`.
    pub fn propagate(&self, psi0: &CompositeState, duration: f64, dt: f64) -> Result<CompositeState> {
        if psi0.space() != self.space {
            return Err(Error::invalid("initial state lives on a different space"));
        }
        let Some(psi) = psi0.as_pure() else {
            return Err(Error::invalid("unitary propagation needs a pure state"));
        };
        let steps = step_count(duration, dt, self.max_rate)?;
        let h = duration / steps as f64;
        let minus_i = C64::new(0.0, -1.0);
        let n = psi.len();
        let mut psi = psi.clone();
        let mut k = [DVector::zeros(n), DVector::zeros(n), DVector::zeros(n), DVector::zeros(n)];
        let mut stage = DVector::zeros(n);
        for s in 0..steps {
            let t = s as f64 * h;
            for (idx, (dt_frac, prev_weight)) in [(0.0, 0.0), (0.5, 0.5), (0.5, 0.5), (1.0, 1.0)].into_iter().enumerate() {
                stage.copy_from(&psi);
                if idx > 0 {
                    stage.axpy(C64::new(prev_weight * h, 0.0), &k[idx - 1], C64::new(1.0, 0.0));
                }
                let ki = &mut k[idx];
                ki.fill(C64::new(0.0, 0.0));
                self.apply_acc(t + dt_frac * h, &stage, ki, minus_i);
            }
            let w = C64::new(h / 6.0, 0.0);
            psi.axpy(w, &k[0], C64::new(1.0, 0.0));
            psi.axpy(w * 2.0, &k[1], C64::new(1.0, 0.0));
            psi.axpy(w * 2.0, &k[2], C64::new(1.0, 0.0));
            psi.axpy(w, &k[3], C64::new(1.0, 0.0));
        }
        let drift = (psi.norm() - 1.0).abs();
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::StepSize(format!(
                "norm drifted by {drift:.3e} over {steps} steps of {h:.3e} s"
            )));
        }
        // Rounding-level drift is removed so the result passes the strict
        // pure-state check.
        let norm = psi.norm();
        psi.unscale_mut(norm);
        CompositeState::pure(self.space, psi)
    }
}

/// Number of equal steps covering `duration` with none longer than `dt`,
/// after checking `dt` against `2π / (50 · max_rate)`.
pub(crate) fn step_count(duration: f64, dt: f64, max_rate: f64) -> Result<usize> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::invalid(format!("duration must be non-negative, got {duration}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if max_rate > 0.0 {
        let limit = 2.0 * PI / (50.0 * max_rate);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::StepSize(format!("dt = {dt:.3e} s exceeds the resolution limit {limit:.3e} s")));
        }
    }
    Ok(((duration / dt) * (1.0 - 1e-12)).ceil().max(if duration > 0.0 { 1.0 } else { 0.0 }) as usize)
}

/// Largest admissible integrator step for a drive: `2π / (50 · max(|δ_k|, Ω_i))`.
pub fn max_step(drive: &DriveSpec, modes: &[ModeSpec; 2]) -> f64 {
    let rate = modes
        .iter()
        .map(|m| (drive.mu - m.omega).abs())
        .chain(drive.rabi)
        .fold(0.0f64, f64::max);
    2.0 * PI / (50.0 * rate)
}

pub fn build_hamiltonian(
    space: CompositeSpace,
    drive: &DriveSpec,
    modes: &[ModeSpec; 2],
    pair: PairType,
    t: f64,
) -> Result<Operator> {
    Ok(MsHamiltonian::new(space, drive, modes, pair, LambDickeOrder::First)?.at(t))
}

/// Noise-free evolution of a pure state under the first-order MS drive.
pub fn propagate_unitary(
    drive: &DriveSpec,
    modes: &[ModeSpec; 2],
    pair: PairType,
    psi0: &CompositeState,
    duration: f64,
    dt: f64,
) -> Result<CompositeState> {
    MsHamiltonian::new(psi0.space(), drive, modes, pair, LambDickeOrder::First)?.propagate(psi0, duration, dt)
}

/// Carrier (`Δn = 0`) and first blue-sideband (`Δn = +1`) parts of
/// `exp(iη(a + a†))` on `|0⟩ … |n_max⟩`.
fn displacement_bands(eta: f64, n_max: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let big = n_max + 1 + EXACT_PADDING;
    let x = DMatrix::<f64>::from_fn(big, big, |i, j| {
        if j == i + 1 {
            (j as f64).sqrt()
        } else if i == j + 1 {
            (i as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(x);
    let v = eig.eigenvectors.map(|e| C64::new(e, 0.0));
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| C64::from_polar(1.0, eta * x)));
    let full = &v * phases * v.transpose();
    let d = n_max + 1;
    let carrier = DMatrix::from_fn(d, d, |i, j| if i == j { full[(i, j)] } else { C64::new(0.0, 0.0) });
    let blue = DMatrix::from_fn(d, d, |i, j| if i == j + 1 { full[(i, j)] } else { C64::new(0.0, 0.0) });
    (carrier, blue)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{mhz_to_angular, AMU};
    use crate::ms::{
        mode_spectrum, override_frequencies, raman_wavevector, GateSchedule, TrapSpec,
    };
    use crate::quantum::{max_abs, number, partial_trace_motion, state_fidelity, MODE_ROCKING};
    use rand::{Rng, SeedableRng};

    fn working_modes() -> [ModeSpec; 2] {
        let trap = TrapSpec::new(mhz_to_angular(1.601), mhz_to_angular(1.7), mhz_to_angular(0.2)).unwrap();
        let modes = override_frequencies(mode_spectrum(&trap).unwrap(), [mhz_to_angular(1.601), mhz_to_angular(1.582)])
            .unwrap();
        let dk = raman_wavevector(532e-9, PI / 4.0).unwrap();
        modes.map(|m| ModeSpec::new(m, dk, 136.905_277_4 * AMU).unwrap())
    }

    #[test]
    fn hermitian_at_random_times() {
        let modes = working_modes();
        let s = GateSchedule::centered(&modes, 0.4).unwrap();
        let mut d = s.drive();
        d.spin_phase = [0.3, 1.1];
        d.motional_phase = -0.7;
        let space = CompositeSpace::new(3).unwrap();
        let h = MsHamiltonian::new(space, &d, &modes, PairType::SD, LambDickeOrder::First).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let t = rng.random::<f64>() * s.duration;
            assert!(h.at(t).hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn zero_drive_is_zero_operator() {
        let modes = working_modes();
        let d = DriveSpec::new([0.0, 0.0], 1e7).unwrap();
        let space = CompositeSpace::new(2).unwrap();
        let h = build_hamiltonian(space, &d, &modes, PairType::SS, 1e-5).unwrap();
        assert_eq!(max_abs(h.matrix()), 0.0);
    }

    #[test]
    fn single_mode_is_periodic() {
        let mut modes = working_modes();
        modes[1].eta = [0.0, 0.0];
        let s = GateSchedule::centered(&working_modes(), 1.0).unwrap();
        let d = s.drive();
        let space = CompositeSpace::new(2).unwrap();
        let period = 2.0 * PI / (d.mu - modes[0].omega).abs();
        let a = build_hamiltonian(space, &d, &modes, PairType::SS, 1.3e-6).unwrap();
        let b = build_hamiltonian(space, &d, &modes, PairType::SS, 1.3e-6 + period).unwrap();
        assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-9 * max_abs(a.matrix()));
    }

    #[test]
    fn two_ion_hamiltonian_is_sum_of_single_ion_parts() {
        let modes = working_modes();
        let d = GateSchedule::centered(&modes, 0.4).unwrap().drive();
        let space = CompositeSpace::new(2).unwrap();
        let t = 3.7e-5;
        let both = build_hamiltonian(space, &d, &modes, PairType::SD, t).unwrap();
        let one = build_hamiltonian(space, &d.with_rabi([d.rabi[0], 0.0]), &modes, PairType::SD, t).unwrap();
        let two = build_hamiltonian(space, &d.with_rabi([0.0, d.rabi[1]]), &modes, PairType::SD, t).unwrap();
        assert!(max_abs(&(both.matrix() - one.matrix() - two.matrix())) < 1e-9);
    }

    #[test]
    fn zero_drive_leaves_state_unchanged() {
        let modes = working_modes();
        let d = DriveSpec::new([0.0, 0.0], centered_mu(&modes)).unwrap();
        let space = CompositeSpace::new(2).unwrap();
        let psi0 = CompositeState::pure(space, space.with_motional_ground(&PairType::SD.initial_qubits())).unwrap();
        let dt = max_step(&d, &modes);
        let out = propagate_unitary(&d, &modes, PairType::SD, &psi0, 1e-5, dt).unwrap();
        assert!((out.as_pure().unwrap() - psi0.as_pure().unwrap()).norm() < 1e-15);
    }

    fn centered_mu(modes: &[ModeSpec; 2]) -> f64 {
        0.5 * (modes[0].omega + modes[1].omega)
    }

    #[test]
    fn oversized_step_is_rejected() {
        let modes = working_modes();
        let d = GateSchedule::centered(&modes, 1.0).unwrap().drive();
        let space = CompositeSpace::new(1).unwrap();
        let psi0 = CompositeState::pure(space, space.basis_vector(0, 0, 0, 0)).unwrap();
        let err = propagate_unitary(&d, &modes, PairType::SS, &psi0, 1e-5, 2.0 * max_step(&d, &modes));
        assert!(matches!(err, Err(Error::StepSize(_))));
    }

    #[test]
    fn calibrated_gate_makes_a_bell_state() {
        let modes = working_modes();
        let s = GateSchedule::centered(&modes, 1.0).unwrap();
        let d = s.drive();
        let space = CompositeSpace::new(5).unwrap();
        let psi0 = CompositeState::pure(space, space.with_motional_ground(&PairType::SS.initial_qubits())).unwrap();
        let out = propagate_unitary(&d, &modes, PairType::SS, &psi0, s.duration, max_step(&d, &modes)).unwrap();
        let target = super::super::ideal_output(PairType::SS, &d, -PI / 4.0);
        let f = state_fidelity(&partial_trace_motion(&out), &target).unwrap();
        assert!(f > 0.999, "{f}");
        for slot in [MODE_COM, MODE_ROCKING] {
            let n = out.expectation(&embed(&number(5), slot, space).unwrap()).re;
            assert!(n < 1e-3, "residual phonons {n}");
        }
    }

    #[test]
    fn exact_bands_reduce_to_first_order_for_small_eta() {
        let (carrier, blue) = displacement_bands(1e-4, 4);
        let a_dag = ladder(4).adjoint();
        assert!(max_abs(&(blue * C64::new(0.0, -1.0) - a_dag * C64::new(1e-4, 0.0))) < 1e-8);
        assert!(max_abs(&(carrier - DMatrix::identity(5, 5))) < 1e-7);
        // ⟨0|e^{iηX}|0⟩ = e^{−η²/2}
        let (c, _) = displacement_bands(0.3, 4);
        assert!((c[(0, 0)].re - (-0.045f64).exp()).abs() < 1e-12);
    }
}
