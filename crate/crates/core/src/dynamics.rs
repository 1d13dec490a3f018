//! Interaction Hamiltonians and exact joint unitary evolution (`ħ = 1`).
//!
//! Two coupling families act on `JointSpace = Fock ⊗ probe`:
//!
//! * [`EffectiveCoupling`]: `H = g · n ⊗ P`. Diagonal in the photon-number
//!   basis, so it commutes with `n ⊗ I` exactly.
//! * [`GaugeAnalogCoupling`]: `H = (Δ/2) I ⊗ σ_z + g (a ⊗ σ⁺ + a† ⊗ σ⁻)`.
//!   Linear in the field operators; it conserves the total excitation number
//!   but not the photon number.
//!
//! Evolution is `exp(−iHt) = V diag(e^{−iλt}) V†` from the Hermitian
//! eigendecomposition `H = V Λ V†`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation_operator, number_operator, pauli, system_operator_on_joint, tensor_product, HermitianOperator,
    JointSpace, Operator, Space, StateVector,
};
use crate::tolerance;
use crate::C64;

/// Number-conserving coupling `g · n ⊗ probe_operator`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCoupling {
    pub g: f64,
    pub probe_operator: HermitianOperator,
}

/// Jaynes–Cummings coupling between the photon mode and a two-level probe
/// detuned by `detuning` from the field quantum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeAnalogCoupling {
    pub g: f64,
    pub detuning: f64,
}

pub fn build_effective(space: JointSpace, c: &EffectiveCoupling) -> Result<HermitianOperator> {
    if c.probe_operator.space() != Space::Probe(space.probe) {
        return Err(Error::DimensionMismatch { expected: space.probe.dim(), found: c.probe_operator.dim() });
    }
    if !c.g.is_finite() {
        return Err(Error::InvalidParameter(format!("coupling g = {}", c.g)));
    }
    Ok(number_operator(space.system).tensor(&c.probe_operator)?.scale(c.g))
}

pub fn build_gauge_analog(space: JointSpace, c: &GaugeAnalogCoupling) -> Result<HermitianOperator> {
    if space.probe.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: space.probe.dim() });
    }
    if !(c.g.is_finite() && c.detuning.is_finite()) {
        return Err(Error::InvalidParameter(format!("g = {}, detuning = {}", c.g, c.detuning)));
    }
    let a = annihilation_operator(space.system);
    let probe = |m: DMatrix<C64>| Operator::new(space.probe, m);

    let splitting = tensor_product(&Operator::identity(space.system), &probe(pauli::z())?)?;
    let absorb = tensor_product(&a, &probe(pauli::raising())?)?;
    let emit = tensor_product(&a.adjoint(), &probe(pauli::lowering())?)?;

    let m =
        splitting.matrix() * C64::new(c.detuning / 2.0, 0.0) + (absorb.matrix() + emit.matrix()) * C64::new(c.g, 0.0);
    HermitianOperator::new(space, m)
}

/// `n ⊗ I`.
pub fn photon_number_on_joint(space: JointSpace) -> HermitianOperator {
    system_operator_on_joint(&number_operator(space.system), space)
        .expect("number operator is built on the joint space's own system factor")
}

/// `n ⊗ I + I ⊗ (σ_z + I)/2`, conserved by the gauge-analog coupling.
pub fn total_excitation(space: JointSpace) -> Result<HermitianOperator> {
    if space.probe.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: space.probe.dim() });
    }
    let upper = (pauli::z() + DMatrix::identity(2, 2)) * C64::new(0.5, 0.0);
    let probe_part = HermitianOperator::identity(space.system).tensor(&HermitianOperator::new(space.probe, upper)?)?;
    photon_number_on_joint(space).add(&probe_part)
}

/// Spectral decomposition of a Hamiltonian, reusable across times.
#[derive(Debug, Clone)]
pub struct Propagator {
    space: Space,
    energies: DVector<f64>,
    eigenvectors: DMatrix<C64>,
}

impl Propagator {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        let m = h.matrix();
        // Overflowed entries would otherwise send the QR sweep into an
        // endless loop.
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Eigendecomposition);
        }
        let max_iter = 1000 * m.nrows().max(1);
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_iter).ok_or(Error::Eigendecomposition)?;
        if eig.eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(Error::Eigendecomposition);
        }
        Ok(Self { space: h.space(), energies: eig.eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// `exp(−iHt)`.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (mut col, &e) in scaled.column_iter_mut().zip(self.energies.iter()) {
            col *= C64::from_polar(1.0, -e * t);
        }
        scaled * v.adjoint()
    }

    /// `exp(−iHt) |ψ⟩`, with the output norm checked against
    /// [`tolerance::ACCUMULATED`].
    pub fn apply(&self, t: f64, state: &StateVector) -> Result<StateVector> {
        if state.space() != self.space {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), found: state.dim() });
        }
        let v = &self.eigenvectors;
        let mut coeff = v.ad_mul(state.amplitudes());
        for (c, &e) in coeff.iter_mut().zip(self.energies.iter()) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        let out = v * coeff;
        let norm = out.norm();
        if (norm - 1.0).abs() > tolerance::ACCUMULATED {
            return Err(Error::NotUnitary { defect: (norm - 1.0).abs() });
        }
        StateVector::normalized(self.space, out)
    }
}

/// `exp(−iHt) |ψ⟩`.
pub fn propagate(h: &HermitianOperator, t: f64, state: &StateVector) -> Result<StateVector> {
    Propagator::new(h)?.apply(t, state)
}

/// `exp(−iHt)` as an operator on `H`'s space.
pub fn unitary(h: &HermitianOperator, t: f64) -> Result<Operator> {
    Operator::new(h.space(), Propagator::new(h)?.unitary(t))
}

/// `u[i][j][k][l] = ⟨i, j| U |k, l⟩` for a unitary on `system ⊗ probe`.
///
/// Stored as the flat `U` matrix under [`JointSpace::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointUnitaryTensor {
    space: JointSpace,
    matrix: DMatrix<C64>,
}

impl JointUnitaryTensor {
    /// Wraps a flat unitary, rejecting it if `U†U` deviates from `I` by more
    /// than [`tolerance::ACCUMULATED`].
    pub fn from_matrix(space: JointSpace, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: matrix.nrows() });
        }
        let t = Self { space, matrix };
        let defect = t.unitarity_defect();
        if !(defect <= tolerance::ACCUMULATED) {
            return Err(Error::NotUnitary { defect });
        }
        Ok(t)
    }

    pub fn identity(space: JointSpace) -> Self {
        Self { space, matrix: DMatrix::identity(space.dim(), space.dim()) }
    }

    pub fn space(&self) -> JointSpace {
        self.space
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.matrix[(self.space.index(i, j), self.space.index(k, l))]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// System-space block `M[i, k] = ⟨i, to| U |k, from⟩` for fixed probe
    /// levels.
    pub fn system_block(&self, to: usize, from: usize) -> DMatrix<C64> {
        let d = self.space.system.dim();
        DMatrix::from_fn(d, d, |i, k| self.get(i, to, k, from))
    }

    /// `max |Σ_ij u_ij^{kl} conj(u_ij^{k'l'}) − δ_kk' δ_ll'|`.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.matrix.ad_mul(&self.matrix);
        let n = gram.nrows();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let want = if r == c { 1.0 } else { 0.0 };
                let d = (gram[(r, c)] - C64::new(want, 0.0)).norm();
                if d.is_nan() {
                    return f64::NAN;
                }
                worst = worst.max(d);
            }
        }
        worst
    }
}

pub fn unitary_tensor(h: &HermitianOperator, t: f64) -> Result<JointUnitaryTensor> {
    let space = h.space().as_joint()?;
    JointUnitaryTensor::from_matrix(space, Propagator::new(h)?.unitary(t))
}

/// Largest singular value of `AB − BA`.
pub fn commutator_norm(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    if a.space() != b.space() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let comm = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    if comm.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok(0.0);
    }
    if comm.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Eigendecomposition);
    }
    let max_iter = 1000 * comm.nrows();
    let svd = SVD::try_new(comm, false, false, f64::EPSILON, max_iter).ok_or(Error::Eigendecomposition)?;
    Ok(svd.singular_values.max())
}
