//! Finite-dimensional state spaces for the photon mode and the probe, and the
//! tensor-product machinery joining them.
//!
//! The joint basis is ordered row-major with the system (photon number) index
//! outer: `|k, l⟩ ↦ k · probe_dim + l`. Every flattening of a joint object in
//! the crate goes through [`JointSpace::index`].
//!
//! Probe basis convention for the two-level probe: index `0` is the upper
//! level `|↑⟩`, index `1` the lower level `|↓⟩`, so that `σ_z = diag(1, −1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;
use crate::C64;

/// Truncated single-mode Fock space `|0⟩ … |cutoff⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    cutoff: usize,
}

impl FockSpace {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::InvalidParameter("Fock cutoff must be at least 1".into()));
        }
        Ok(Self { cutoff })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }
}

/// Probe degree of freedom. The interferometer probe is two-level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProbeSpace {
    dim: usize,
}

impl ProbeSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter("probe dimension must be at least 2".into()));
        }
        Ok(Self { dim })
    }

    pub fn qubit() -> Self {
        Self { dim: 2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// `system ⊗ probe` with the row-major (system outer) index map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointSpace {
    pub system: FockSpace,
    pub probe: ProbeSpace,
}

impl JointSpace {
    pub fn new(system: FockSpace, probe: ProbeSpace) -> Self {
        Self { system, probe }
    }

    /// Fock space with the given cutoff and a two-level probe.
    pub fn with_qubit_probe(cutoff: usize) -> Result<Self> {
        Ok(Self::new(FockSpace::new(cutoff)?, ProbeSpace::qubit()))
    }

    pub fn dim(&self) -> usize {
        self.system.dim() * self.probe.dim()
    }

    /// Flat index of `|k, l⟩`.
    #[inline]
    pub fn index(&self, k: usize, l: usize) -> usize {
        debug_assert!(k < self.system.dim() && l < self.probe.dim());
        k * self.probe.dim() + l
    }

    /// Inverse of [`JointSpace::index`].
    #[inline]
    pub fn split(&self, flat: usize) -> (usize, usize) {
        (flat / self.probe.dim(), flat % self.probe.dim())
    }
}

/// The space an operator or state is declared on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    System(FockSpace),
    Probe(ProbeSpace),
    Joint(JointSpace),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::System(s) => s.dim(),
            Space::Probe(p) => p.dim(),
            Space::Joint(j) => j.dim(),
        }
    }

    pub fn as_system(&self) -> Result<FockSpace> {
        match self {
            Space::System(s) => Ok(*s),
            other => Err(Error::WrongSpace(format!("expected a Fock space, got {other:?}"))),
        }
    }

    pub fn as_probe(&self) -> Result<ProbeSpace> {
        match self {
            Space::Probe(p) => Ok(*p),
            other => Err(Error::WrongSpace(format!("expected a probe space, got {other:?}"))),
        }
    }

    pub fn as_joint(&self) -> Result<JointSpace> {
        match self {
            Space::Joint(j) => Ok(*j),
            other => Err(Error::WrongSpace(format!("expected a joint space, got {other:?}"))),
        }
    }
}

impl From<FockSpace> for Space {
    fn from(s: FockSpace) -> Self {
        Space::System(s)
    }
}

impl From<ProbeSpace> for Space {
    fn from(p: ProbeSpace) -> Self {
        Space::Probe(p)
    }
}

impl From<JointSpace> for Space {
    fn from(j: JointSpace) -> Self {
        Space::Joint(j)
    }
}

/// Normalized pure state over a declared space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: Space,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Wraps amplitudes that must already be normalized to
    /// [`tolerance::ALGEBRAIC`].
    pub fn new(space: impl Into<Space>, amplitudes: DVector<C64>) -> Result<Self> {
        let space = space.into();
        check_dim(space.dim(), amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tolerance::ALGEBRAIC {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { space, amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(space: impl Into<Space>, amplitudes: DVector<C64>) -> Result<Self> {
        let space = space.into();
        check_dim(space.dim(), amplitudes.len())?;
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { space, amplitudes: amplitudes.unscale(norm) })
    }

    /// Basis state `|index⟩`.
    pub fn basis(space: impl Into<Space>, index: usize) -> Result<Self> {
        let space = space.into();
        if index >= space.dim() {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} outside space of dimension {}",
                space.dim()
            )));
        }
        let mut amplitudes = DVector::zeros(space.dim());
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { space, amplitudes })
    }

    /// `a ⊗ b` for a system state `a` and a probe state `b`.
    pub fn product(a: &StateVector, b: &StateVector) -> Result<Self> {
        let joint = JointSpace::new(a.space.as_system()?, b.space.as_probe()?);
        let amplitudes = a.amplitudes.kronecker(&b.amplitudes);
        // Re-check rather than assume: a product of normalized vectors can
        // drift by a few ulps.
        Self::new(joint, amplitudes)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `Σ |amplitude|²` per basis label.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨ψ|A|ψ⟩`, real part (exact for Hermitian `A`).
    pub fn expectation(&self, op: &HermitianOperator) -> Result<f64> {
        check_space(&op.space(), &self.space)?;
        Ok(self.amplitudes.dotc(&(op.matrix() * &self.amplitudes)).re)
    }
}

/// Square matrix over a declared space. Not necessarily Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: Space,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(space: impl Into<Space>, matrix: DMatrix<C64>) -> Result<Self> {
        let space = space.into();
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        check_dim(space.dim(), matrix.nrows())?;
        Ok(Self { space, matrix })
    }

    pub fn identity(space: impl Into<Space>) -> Self {
        let space = space.into();
        let d = space.dim();
        Self { space, matrix: DMatrix::identity(d, d) }
    }

    pub fn space(&self) -> Space {
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

    /// `self · other`.
    pub fn compose(&self, other: &Operator) -> Result<Self> {
        check_space(&self.space, &other.space)?;
        Ok(Self { space: self.space, matrix: &self.matrix * &other.matrix })
    }
}

/// Operator equal to its own conjugate transpose within
/// [`tolerance::ALGEBRAIC`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(Operator);

impl HermitianOperator {
    pub fn new(space: impl Into<Space>, matrix: DMatrix<C64>) -> Result<Self> {
        Self::try_from(Operator::new(space, matrix)?)
    }

    pub fn zero(space: impl Into<Space>) -> Self {
        let space = space.into();
        let d = space.dim();
        Self(Operator { space, matrix: DMatrix::zeros(d, d) })
    }

    pub fn identity(space: impl Into<Space>) -> Self {
        Self(Operator::identity(space))
    }

    pub fn space(&self) -> Space {
        self.0.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0.matrix
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.matrix.nrows()
    }

    /// `self ⊗ other`; Kronecker products of Hermitian operators stay
    /// Hermitian.
    pub fn tensor(&self, probe_op: &HermitianOperator) -> Result<HermitianOperator> {
        Ok(HermitianOperator(tensor_product(&self.0, &probe_op.0)?))
    }

    /// Sum of two operators on the same space.
    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        check_space(&self.space(), &other.space())?;
        Ok(HermitianOperator(Operator { space: self.space(), matrix: self.matrix() + other.matrix() }))
    }

    pub fn scale(&self, factor: f64) -> HermitianOperator {
        HermitianOperator(Operator { space: self.space(), matrix: self.matrix() * C64::new(factor, 0.0) })
    }
}

impl TryFrom<Operator> for HermitianOperator {
    type Error = Error;

    fn try_from(op: Operator) -> Result<Self> {
        let deviation = hermiticity_defect(&op.matrix);
        if !(deviation <= tolerance::ALGEBRAIC) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(op))
    }
}

/// Largest elementwise `|M − M†|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = if d.is_nan() { f64::NAN } else { worst.max(d) };
            if worst.is_nan() {
                return worst;
            }
        }
    }
    worst
}

/// Labeled distribution over measurement outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDistribution {
    probabilities: Vec<f64>,
    labels: Vec<f64>,
}

impl ProbabilityDistribution {
    /// Entries must be nonnegative and sum to one within
    /// [`tolerance::ACCUMULATED`].
    pub fn new(probabilities: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        check_dim(probabilities.len(), labels.len())?;
        if let Some(p) = probabilities.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative probability {p}")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > tolerance::ACCUMULATED {
            return Err(Error::NotNormalized { norm: total });
        }
        Ok(Self { probabilities, labels })
    }

    /// Distribution over photon numbers `0..=cutoff`.
    pub fn over_photon_numbers(probabilities: Vec<f64>) -> Result<Self> {
        let labels = (0..probabilities.len()).map(|n| n as f64).collect();
        Self::new(probabilities, labels)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.probabilities.iter().zip(&self.labels).map(|(p, x)| p * x).sum()
    }
}

/// Which factor of a joint state to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    System,
    Probe,
}

/// Kronecker product `a ⊗ b` of a system operator and a probe operator.
pub fn tensor_product(a: &Operator, b: &Operator) -> Result<Operator> {
    let joint = JointSpace::new(a.space.as_system()?, b.space.as_probe()?);
    Ok(Operator { space: joint.into(), matrix: a.matrix.kronecker(&b.matrix) })
}

/// `diag(0, 1, …, cutoff)`.
pub fn number_operator(space: FockSpace) -> HermitianOperator {
    let diag = DVector::from_iterator(space.dim(), (0..space.dim()).map(|n| C64::new(n as f64, 0.0)));
    HermitianOperator(Operator { space: space.into(), matrix: DMatrix::from_diagonal(&diag) })
}

/// Truncated annihilation operator with `a[n−1, n] = √n`.
pub fn annihilation_operator(space: FockSpace) -> Operator {
    let d = space.dim();
    let mut m = DMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator { space: space.into(), matrix: m }
}

/// `op ⊗ I_probe`.
pub fn system_operator_on_joint(op: &HermitianOperator, joint: JointSpace) -> Result<HermitianOperator> {
    if op.space() != Space::System(joint.system) {
        return Err(Error::WrongSpace("operator is not on the joint space's system factor".into()));
    }
    op.tensor(&HermitianOperator::identity(joint.probe))
}

/// `I_system ⊗ op`.
pub fn probe_operator_on_joint(op: &HermitianOperator, joint: JointSpace) -> Result<HermitianOperator> {
    if op.space() != Space::Probe(joint.probe) {
        return Err(Error::WrongSpace("operator is not on the joint space's probe factor".into()));
    }
    HermitianOperator::identity(joint.system).tensor(op)
}

/// Reduced outcome distribution of one factor of a joint state.
pub fn marginal_distribution(state: &StateVector, which: Subsystem) -> Result<ProbabilityDistribution> {
    let joint = state.space.as_joint()?;
    let norm = state.norm();
    if (norm - 1.0).abs() > tolerance::ALGEBRAIC {
        return Err(Error::NotNormalized { norm });
    }
    let (outer, inner) = (joint.system.dim(), joint.probe.dim());
    let mut p = match which {
        Subsystem::System => vec![0.0; outer],
        Subsystem::Probe => vec![0.0; inner],
    };
    for k in 0..outer {
        for l in 0..inner {
            let w = state.amplitudes[joint.index(k, l)].norm_sqr();
            match which {
                Subsystem::System => p[k] += w,
                Subsystem::Probe => p[l] += w,
            }
        }
    }
    let labels = (0..p.len()).map(|i| i as f64).collect();
    ProbabilityDistribution::new(p, labels)
}

/// 2×2 Pauli and ladder matrices in the `(|↑⟩, |↓⟩)` basis.
pub mod pauli {
    use super::*;

    fn m(entries: [[C64; 2]; 2]) -> DMatrix<C64> {
        DMatrix::from_fn(2, 2, |i, j| entries[i][j])
    }

    const O: C64 = C64::new(0.0, 0.0);
    const I: C64 = C64::new(1.0, 0.0);
    const J: C64 = C64::new(0.0, 1.0);

    pub fn x() -> DMatrix<C64> {
        m([[O, I], [I, O]])
    }

    pub fn y() -> DMatrix<C64> {
        m([[O, -J], [J, O]])
    }

    pub fn z() -> DMatrix<C64> {
        m([[I, O], [O, -I]])
    }

    /// `σ⁺ = |↑⟩⟨↓|`.
    pub fn raising() -> DMatrix<C64> {
        m([[O, I], [O, O]])
    }

    /// `σ⁻ = |↓⟩⟨↑|`.
    pub fn lowering() -> DMatrix<C64> {
        m([[O, O], [I, O]])
    }

    /// Projector onto the lower level `|↓⟩`.
    pub fn lower_projector() -> DMatrix<C64> {
        m([[O, O], [O, I]])
    }

    /// Index of the upper level in the probe basis.
    pub const UPPER: usize = 0;
    /// Index of the lower level in the probe basis.
    pub const LOWER: usize = 1;
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_space(a: &Space, b: &Space) -> Result<()> {
    if a != b {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        return Err(Error::WrongSpace(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn qubit_system() -> FockSpace {
        FockSpace::new(1).unwrap()
    }

    #[test]
    fn spaces_reject_degenerate_dimensions() {
        assert!(FockSpace::new(0).is_err());
        assert!(ProbeSpace::new(1).is_err());
        assert_eq!(FockSpace::new(3).unwrap().dim(), 4);
    }

    #[test]
    fn index_map_is_a_bijection() {
        let j = JointSpace::new(FockSpace::new(4).unwrap(), ProbeSpace::new(3).unwrap());
        let mut seen = vec![false; j.dim()];
        for k in 0..5 {
            for l in 0..3 {
                let f = j.index(k, l);
                assert!(!seen[f]);
                seen[f] = true;
                assert_eq!(j.split(f), (k, l));
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let a = Operator::identity(qubit_system());
        let b = Operator::identity(ProbeSpace::qubit());
        let ab = tensor_product(&a, &b).unwrap();
        assert_eq!(ab.matrix(), &DMatrix::identity(4, 4));
    }

    #[test]
    fn tensor_of_diagonal_follows_row_major_map() {
        let n = number_operator(qubit_system());
        let ab = tensor_product(n.as_operator(), &Operator::identity(ProbeSpace::qubit())).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0), c(0.0), c(1.0), c(1.0)]));
        assert_eq!(ab.matrix(), &expect);
    }

    #[test]
    fn tensor_matches_elementwise_kronecker_definition() {
        let sx = Operator::new(qubit_system(), pauli::x()).unwrap();
        let sz = Operator::new(ProbeSpace::qubit(), pauli::z()).unwrap();
        let ab = tensor_product(&sx, &sz).unwrap();
        let j = JointSpace::with_qubit_probe(1).unwrap();
        // Oracle: explicit index loop over (i,j,k,l).
        for i in 0..2 {
            for jj in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let want = pauli::x()[(i, k)] * pauli::z()[(jj, l)];
                        assert_eq!(ab.matrix()[(j.index(i, jj), j.index(k, l))], want);
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_rejects_swapped_factors() {
        let a = Operator::identity(ProbeSpace::qubit());
        let b = Operator::identity(qubit_system());
        assert!(tensor_product(&a, &b).is_err());
        assert!(Operator::new(qubit_system(), DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn number_operator_is_diagonal_ladder() {
        let n = number_operator(FockSpace::new(3).unwrap());
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0), c(1.0), c(2.0), c(3.0)]));
        assert_eq!(n.matrix(), &want);

        let excited = StateVector::new(qubit_system(), DVector::from_vec(vec![c(0.0), c(1.0)])).unwrap();
        assert_eq!(excited.expectation(&number_operator(qubit_system())).unwrap(), 1.0);
    }

    #[test]
    fn annihilation_operator_entries_and_action() {
        let a1 = annihilation_operator(qubit_system());
        assert_eq!(a1.matrix(), &DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]));

        let s = FockSpace::new(2).unwrap();
        let a = annihilation_operator(s);
        let ada = a.adjoint().compose(&a).unwrap();
        assert!((ada.matrix() - number_operator(s).matrix()).norm() < 1e-15);

        let two = StateVector::basis(s, 2).unwrap();
        let out = a.matrix() * two.amplitudes();
        assert_eq!(out[1], c(std::f64::consts::SQRT_2));
        assert_eq!(out[0], c(0.0));
        assert_eq!(out[2], c(0.0));
    }

    #[test]
    fn product_state_marginal_is_separable() {
        let sys = FockSpace::new(2).unwrap();
        let a = StateVector::normalized(sys, DVector::from_vec(vec![c(1.0), c(2.0), C64::new(0.0, 1.0)])).unwrap();
        let b =
            StateVector::normalized(ProbeSpace::qubit(), DVector::from_vec(vec![c(1.0), C64::new(1.0, -1.0)])).unwrap();
        let ab = StateVector::product(&a, &b).unwrap();
        let m = marginal_distribution(&ab, Subsystem::System).unwrap();
        for (p, q) in m.probabilities().iter().zip(a.probabilities()) {
            assert!((p - q).abs() < 1e-15);
        }
        let mp = marginal_distribution(&ab, Subsystem::Probe).unwrap();
        for (p, q) in mp.probabilities().iter().zip(b.probabilities()) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn bell_like_state_has_flat_marginal() {
        let j = JointSpace::with_qubit_probe(1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amp = DVector::zeros(4);
        amp[j.index(0, 0)] = c(h);
        amp[j.index(1, 1)] = c(h);
        let s = StateVector::new(j, amp).unwrap();
        let m = marginal_distribution(&s, Subsystem::System).unwrap();
        assert!((m.probabilities()[0] - 0.5).abs() < 1e-15);
        assert!((m.probabilities()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn marginal_of_fixed_six_amplitude_state_matches_double_loop() {
        // 3 ⊗ 2 state with fixed pseudo-random amplitudes.
        let j = JointSpace::new(FockSpace::new(2).unwrap(), ProbeSpace::qubit());
        let raw = [(0.3, -0.1), (0.7, 0.2), (-0.4, 0.5), (0.05, 0.9), (0.6, -0.6), (-0.2, 0.1)];
        let amp = DVector::from_iterator(6, raw.iter().map(|&(r, i)| C64::new(r, i)));
        let s = StateVector::normalized(j, amp).unwrap();

        let mut oracle = [0.0; 3];
        let mut total = 0.0;
        for (flat, &(r, i)) in raw.iter().enumerate() {
            total += r * r + i * i;
            oracle[flat / 2] += r * r + i * i;
        }
        let m = marginal_distribution(&s, Subsystem::System).unwrap();
        for (p, o) in m.probabilities().iter().zip(oracle) {
            assert!((p - o / total).abs() < 1e-14);
        }
    }

    #[test]
    fn unnormalized_inputs_are_rejected() {
        let j = JointSpace::with_qubit_probe(1).unwrap();
        assert!(matches!(StateVector::new(j, DVector::from_element(4, c(1.0))), Err(Error::NotNormalized { .. })));
        assert!(StateVector::normalized(j, DVector::zeros(4)).is_err());
    }

    #[test]
    fn non_hermitian_matrix_is_rejected() {
        let r = HermitianOperator::new(ProbeSpace::qubit(), pauli::raising());
        assert!(matches!(r, Err(Error::NotHermitian { .. })));
        assert!(HermitianOperator::new(ProbeSpace::qubit(), pauli::y()).is_ok());
    }

    #[test]
    fn distribution_validation() {
        assert!(ProbabilityDistribution::over_photon_numbers(vec![0.5, 0.5]).is_ok());
        assert!(ProbabilityDistribution::over_photon_numbers(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityDistribution::over_photon_numbers(vec![1.5, -0.5]).is_err());
        let d = ProbabilityDistribution::over_photon_numbers(vec![0.25, 0.25, 0.5]).unwrap();
        assert!((d.mean() - 1.25).abs() < 1e-15);
    }

    fn amplitudes(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
            .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn marginals_sum_to_one(raw in amplitudes(10), which in prop::bool::ANY) {
            let j = JointSpace::new(FockSpace::new(4).unwrap(), ProbeSpace::qubit());
            let amp = DVector::from_iterator(10, raw.iter().map(|&(r, i)| C64::new(r, i)));
            let s = StateVector::normalized(j, amp).unwrap();
            let which = if which { Subsystem::System } else { Subsystem::Probe };
            let m = marginal_distribution(&s, which).unwrap();
            let total: f64 = m.probabilities().iter().sum();
            prop_assert!((total - 1.0).abs() <= tolerance::ACCUMULATED);
        }

        #[test]
        fn ladder_identity_below_top_level(cutoff in 1usize..12) {
            let s = FockSpace::new(cutoff).unwrap();
            let a = annihilation_operator(s);
            let ada = a.adjoint().compose(&a).unwrap();
            let n = number_operator(s);
            for i in 0..s.dim() {
                for j in 0..s.dim() {
                    prop_assert!((ada.matrix()[(i, j)] - n.matrix()[(i, j)]).norm() < 1e-14);
                }
            }
            // aa† differs from n + 1 only at the top level.
            let aad = a.compose(&a.adjoint()).unwrap();
            for i in 0..cutoff {
                prop_assert!((aad.matrix()[(i, i)].re - (i as f64 + 1.0)).abs() < 1e-14);
            }
            prop_assert_eq!(aad.matrix()[(cutoff, cutoff)].re, 0.0);
        }
    }
}
