//! Operators and states on the two-ion, two-mode Hilbert space.
//!
//! The tensor order is fixed as `[ion 1 spin, ion 2 spin, COM mode, rocking
//! mode]`, with qubit basis `|0⟩, |1⟩` (σ_z = diag(+1, −1)) and each mode
//! truncated to Fock states `|0⟩ … |n_max⟩`. Everything is stored dense; the
//! largest space used in practice is a few hundred states.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use crate::{Error, Result, C64};

/// Tolerance on unit norm of pure states.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance on trace and Hermiticity of density matrices.
pub const DENSITY_TOL: f64 = 1e-9;
/// Lowest eigenvalue accepted by [`CompositeState::check_positive`].
pub const POSITIVITY_TOL: f64 = -1e-8;
/// Tolerance on the Hermiticity defect of a flagged Hermitian operator.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const ION1: usize = 0;
pub const ION2: usize = 1;
pub const MODE_COM: usize = 2;
pub const MODE_ROCKING: usize = 3;

/// Two-qubit density matrix in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
pub type TwoQubitDensity = Matrix4<C64>;
/// Two-qubit pure state in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
pub type TwoQubitState = Vector4<C64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CompositeSpace {
    n_max: usize,
}

impl CompositeSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::invalid(format!("Fock cutoff n_max must be >= 1, got {n_max}")));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn dims(&self) -> [usize; 4] {
        let f = self.fock_dim();
        [2, 2, f, f]
    }

    pub fn total_dim(&self) -> usize {
        self.dims().iter().product()
    }

    /// Dimension of the motional factor, `(n_max + 1)²`.
    pub fn motional_dim(&self) -> usize {
        self.fock_dim() * self.fock_dim()
    }

    /// Flat index of `|q1, q2, n_com, n_rocking⟩`.
    pub fn index(&self, q1: usize, q2: usize, n_com: usize, n_rocking: usize) -> usize {
        let f = self.fock_dim();
        debug_assert!(q1 < 2 && q2 < 2 && n_com < f && n_rocking < f);
        ((q1 * 2 + q2) * f + n_com) * f + n_rocking
    }

    pub fn basis_vector(&self, q1: usize, q2: usize, n_com: usize, n_rocking: usize) -> DVector<C64> {
        let mut v = DVector::zeros(self.total_dim());
        v[self.index(q1, q2, n_com, n_rocking)] = C64::new(1.0, 0.0);
        v
    }

    /// Embeds a two-qubit state with both modes in their ground state.
    pub fn with_motional_ground(&self, qubits: &TwoQubitState) -> DVector<C64> {
        let mut v = DVector::zeros(self.total_dim());
        let m = self.motional_dim();
        for q in 0..4 {
            v[q * m] = qubits[q];
        }
        v
    }
}

/// `σ_φ = cos φ·σ_x + sin φ·σ_y`.
pub fn pauli_phi(phi: f64) -> DMatrix<C64> {
    let (s, c) = phi.sin_cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.0, 0.0), C64::new(c, -s), C64::new(c, s), C64::new(0.0, 0.0)],
    )
}

pub fn pauli_x() -> DMatrix<C64> {
    pauli_phi(0.0)
}

pub fn pauli_y() -> DMatrix<C64> {
    pauli_phi(std::f64::consts::FRAC_PI_2)
}

pub fn pauli_z() -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]))
}

/// Truncated annihilation operator on `|0⟩ … |n_max⟩`.
///
/// `a|n⟩ = √n |n−1⟩` holds on the whole truncated space; `[a, a†]` equals
/// the identity except in the `|n_max⟩⟨n_max|` corner, where it is `−n_max`.
pub fn ladder(n_max: usize) -> DMatrix<C64> {
    let d = n_max + 1;
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Number operator on `|0⟩ … |n_max⟩`.
pub fn number(n_max: usize) -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        n_max + 1,
        (0..=n_max).map(|n| C64::new(n as f64, 0.0)),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: CompositeSpace,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(space: CompositeSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::invalid(format!(
                "operator is {}x{}, space needs {d}x{d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    /// Like [`Operator::new`], additionally verifying Hermiticity to
    /// [`HERMITIAN_TOL`].
    pub fn hermitian(space: CompositeSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let op = Self::new(space, matrix)?;
        let defect = op.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::invalid(format!("operator not Hermitian (defect {defect:.3e})")));
        }
        Ok(op)
    }

    pub fn zero(space: CompositeSpace) -> Self {
        let d = space.total_dim();
        Self { space, matrix: DMatrix::zeros(d, d) }
    }

    pub fn identity(space: CompositeSpace) -> Self {
        let d = space.total_dim();
        Self { space, matrix: DMatrix::identity(d, d) }
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space, matrix: self.matrix.adjoint() }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { space: self.space, matrix: &self.matrix * factor }
    }

    pub fn add(&self, other: &Operator) -> Self {
        debug_assert_eq!(self.space, other.space);
        Self { space: self.space, matrix: &self.matrix + &other.matrix }
    }

    pub fn mul(&self, other: &Operator) -> Self {
        debug_assert_eq!(self.space, other.space);
        Self { space: self.space, matrix: &self.matrix * &other.matrix }
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        Self {
            space: self.space,
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        }
    }
}

/// Lifts a single-factor operator into the composite space, acting as the
/// identity on every other slot.
pub fn embed(block: &DMatrix<C64>, slot: usize, space: CompositeSpace) -> Result<Operator> {
    let dims = space.dims();
    let Some(&d) = dims.get(slot) else {
        return Err(Error::invalid(format!("slot {slot} out of range 0..4")));
    };
    if block.nrows() != d || block.ncols() != d {
        return Err(Error::invalid(format!(
            "block is {}x{}, slot {slot} needs {d}x{d}",
            block.nrows(),
            block.ncols()
        )));
    }
    let mut full = DMatrix::<C64>::identity(1, 1);
    for (k, &dk) in dims.iter().enumerate() {
        full = if k == slot { full.kronecker(block) } else { full.kronecker(&DMatrix::identity(dk, dk)) };
    }
    Operator::new(space, full)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    Pure(DVector<C64>),
    Density(DMatrix<C64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeState {
    space: CompositeSpace,
    repr: Representation,
}

impl CompositeState {
    pub fn pure(space: CompositeSpace, psi: DVector<C64>) -> Result<Self> {
        if psi.len() != space.total_dim() {
            return Err(Error::invalid(format!(
                "state has length {}, space needs {}",
                psi.len(),
                space.total_dim()
            )));
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("pure state norm {norm} is not 1")));
        }
        Ok(Self { space, repr: Representation::Pure(psi) })
    }

    /// Density matrix, checked for shape, Hermiticity and unit trace.
    /// Positivity is left to [`CompositeState::check_positive`].
    pub fn density(space: CompositeSpace, rho: DMatrix<C64>) -> Result<Self> {
        let d = space.total_dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::invalid(format!("density matrix is {}x{}, space needs {d}x{d}", rho.nrows(), rho.ncols())));
        }
        check_density_matrix(&rho)?;
        Ok(Self { space, repr: Representation::Density(rho) })
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn as_pure(&self) -> Option<&DVector<C64>> {
        match &self.repr {
            Representation::Pure(v) => Some(v),
            Representation::Density(_) => None,
        }
    }

    pub fn to_density(&self) -> DMatrix<C64> {
        match &self.repr {
            Representation::Pure(v) => v * v.adjoint(),
            Representation::Density(m) => m.clone(),
        }
    }

    /// Expectation value `Tr(ρ O)`.
    pub fn expectation(&self, op: &Operator) -> C64 {
        match &self.repr {
            Representation::Pure(v) => v.dotc(&(op.matrix() * v)),
            Representation::Density(m) => (m * op.matrix()).trace(),
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.repr {
            Representation::Pure(_) => 1.0,
            Representation::Density(m) => m.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Smallest eigenvalue must exceed [`POSITIVITY_TOL`]. Costs a full
    /// Hermitian eigensolve.
    pub fn check_positive(&self) -> Result<f64> {
        match &self.repr {
            Representation::Pure(_) => Ok(0.0),
            Representation::Density(m) => {
                let lowest = min_eigenvalue(m);
                if lowest < POSITIVITY_TOL {
                    return Err(Error::invalid(format!("density matrix has eigenvalue {lowest:.3e}")));
                }
                Ok(lowest)
            }
        }
    }

    /// Reduced density matrix of the motional mode in `slot`
    /// ([`MODE_COM`] or [`MODE_ROCKING`]).
    pub fn reduced_mode(&self, slot: usize) -> Result<DMatrix<C64>> {
        if slot != MODE_COM && slot != MODE_ROCKING {
            return Err(Error::invalid(format!("slot {slot} is not a motional mode")));
        }
        let f = self.space.fock_dim();
        let rho = self.to_density();
        let mut out = DMatrix::zeros(f, f);
        for q in 0..4 {
            for other in 0..f {
                for a in 0..f {
                    for b in 0..f {
                        let (ia, ib) = if slot == MODE_COM {
                            ((q * f + a) * f + other, (q * f + b) * f + other)
                        } else {
                            ((q * f + other) * f + a, (q * f + other) * f + b)
                        };
                        out[(a, b)] += rho[(ia, ib)];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Hermiticity and unit-trace check shared by composite and two-qubit states.
pub(crate) fn check_density_matrix(rho: &DMatrix<C64>) -> Result<()> {
    let herm = max_abs(&(rho - rho.adjoint()));
    if herm > DENSITY_TOL {
        return Err(Error::invalid(format!("density matrix not Hermitian (defect {herm:.3e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
        return Err(Error::invalid(format!("density matrix trace {tr} is not 1")));
    }
    Ok(())
}

/// Traces out both motional modes.
pub fn partial_trace_motion(state: &CompositeState) -> TwoQubitDensity {
    let m = state.space.motional_dim();
    let mut out = TwoQubitDensity::zeros();
    match &state.repr {
        Representation::Pure(psi) => {
            for a in 0..4 {
                for b in 0..4 {
                    out[(a, b)] = (0..m).map(|k| psi[a * m + k] * psi[b * m + k].conj()).sum();
                }
            }
        }
        Representation::Density(rho) => {
            for a in 0..4 {
                for b in 0..4 {
                    out[(a, b)] = (0..m).map(|k| rho[(a * m + k, b * m + k)]).sum();
                }
            }
        }
    }
    out
}

/// `⟨target|ρ|target⟩` for a two-qubit density matrix and pure target.
pub fn state_fidelity(rho: &TwoQubitDensity, target: &TwoQubitState) -> Result<f64> {
    let tn = target.norm();
    if (tn - 1.0).abs() > NORM_TOL {
        return Err(Error::invalid(format!("target norm {tn} is not 1")));
    }
    let herm = (rho - rho.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if herm > DENSITY_TOL {
        return Err(Error::invalid(format!("rho not Hermitian (defect {herm:.3e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
        return Err(Error::invalid(format!("rho trace {tr} is not 1")));
    }
    Ok(target.dotc(&(rho * target)).re)
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub(crate) fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    // Symmetrize so rounding-level anti-Hermitian parts don't upset the solver.
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}
