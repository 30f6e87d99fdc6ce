//! Tensor-product bases and elementary operators.
//!
//! Basis states are ordered row-major with mode 0 most significant, so the
//! label `(i, j, n)` over dims `[d0, d1, d2]` sits at `i·d1·d2 + j·d2 + n`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{input, Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeKind {
    Resonator,
    Qubit,
}

/// One subsystem: a Fock-truncated resonator or a multi-level qubit.
///
/// `level_freqs` holds the single fundamental frequency of a resonator, or the
/// `dim − 1` ladder transition frequencies `ν_{i,i+1}` of a qubit (GHz).
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpec {
    kind: ModeKind,
    dim: usize,
    level_freqs: Vec<f64>,
}

impl ModeSpec {
    /// Resonator keeping Fock states `0..=cutoff`.
    pub fn resonator(freq_ghz: f64, cutoff: usize) -> Result<Self> {
        Self::new(ModeKind::Resonator, cutoff + 1, vec![freq_ghz])
    }

    /// Qubit with the given ladder of transition frequencies; its dimension is
    /// one more than the number of transitions.
    pub fn qubit(transition_freqs_ghz: &[f64]) -> Result<Self> {
        Self::new(ModeKind::Qubit, transition_freqs_ghz.len() + 1, transition_freqs_ghz.to_vec())
    }

    pub fn new(kind: ModeKind, dim: usize, level_freqs: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return input(format!("mode dimension must be at least 2, got {dim}"));
        }
        let expected = match kind {
            ModeKind::Resonator => 1,
            ModeKind::Qubit => dim - 1,
        };
        if level_freqs.len() != expected {
            return input(format!(
                "{kind:?} of dim {dim} needs {expected} frequencies, got {}",
                level_freqs.len()
            ));
        }
        if let Some(f) = level_freqs.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return input(format!("frequencies must be finite and positive, got {f}"));
        }
        Ok(Self { kind, dim, level_freqs })
    }

    pub fn kind(&self) -> ModeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level_freqs(&self) -> &[f64] {
        &self.level_freqs
    }

    pub fn is_qubit(&self) -> bool {
        self.kind == ModeKind::Qubit
    }

    /// Level energies in GHz with the ground level anchored at zero. For a
    /// resonator these are `n·ν_r`.
    pub fn level_energies_ghz(&self) -> Vec<f64> {
        match self.kind {
            ModeKind::Resonator => (0..self.dim).map(|n| n as f64 * self.level_freqs[0]).collect(),
            ModeKind::Qubit => std::iter::once(0.0)
                .chain(self.level_freqs.iter().scan(0.0, |acc, f| {
                    *acc += f;
                    Some(*acc)
                }))
                .collect(),
        }
    }
}

/// Occupation numbers, one per mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisLabel(pub Vec<usize>);

impl BasisLabel {
    pub fn new(occupations: impl Into<Vec<usize>>) -> Self {
        Self(occupations.into())
    }

    pub fn occupations(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        if self.0.len() != dims.len() {
            return input(format!("label {self} has {} entries for {} modes", self.0.len(), dims.len()));
        }
        for (k, (&occ, &d)) in self.0.iter().zip(dims).enumerate() {
            if occ >= d {
                return input(format!("label {self}: occupation {occ} of mode {k} exceeds dim {d}"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, occ) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{occ}")?;
        }
        write!(f, ">")
    }
}

pub fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Mixed-radix index of `label`, mode 0 most significant.
pub fn basis_index(label: &BasisLabel, dims: &[usize]) -> Result<usize> {
    label.validate(dims)?;
    Ok(label.0.iter().zip(dims).fold(0, |acc, (&occ, &d)| acc * d + occ))
}

/// Inverse of [`basis_index`].
pub fn basis_label(index: usize, dims: &[usize]) -> Result<BasisLabel> {
    let d = total_dim(dims);
    if index >= d {
        return input(format!("index {index} out of range for total dimension {d}"));
    }
    let mut occ = vec![0; dims.len()];
    let mut rest = index;
    for (slot, &dk) in occ.iter_mut().zip(dims).rev() {
        *slot = rest % dk;
        rest /= dk;
    }
    Ok(BasisLabel(occ))
}

/// Dense complex matrix acting on a tensor-product space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(dims: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = total_dim(&dims);
        if dims.is_empty() || matrix.nrows() != d || matrix.ncols() != d {
            return input(format!(
                "matrix of shape {}x{} does not match dims {dims:?}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        Ok(Self { dims, matrix })
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = total_dim(dims);
        Self { dims: dims.to_vec(), matrix: DMatrix::identity(d, d) }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let d = total_dim(dims);
        Self { dims: dims.to_vec(), matrix: DMatrix::zeros(d, d) }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims.clone(), matrix: self.matrix.adjoint() }
    }

    /// Largest elementwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.matrix.iter().zip(other.matrix.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖M − M†‖_max`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() < tol
    }

    /// `‖M†M − I‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.matrix.adjoint() * &self.matrix;
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                worst = worst.max((prod[(i, j)] - expect).norm());
            }
        }
        worst
    }

    pub fn matmul(&self, rhs: &Operator) -> Result<Operator> {
        self.same_dims(rhs)?;
        Ok(Self { dims: self.dims.clone(), matrix: &self.matrix * &rhs.matrix })
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        self.same_dims(rhs)?;
        Ok(Self { dims: self.dims.clone(), matrix: &self.matrix + &rhs.matrix })
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Self { dims: self.dims.clone(), matrix: &self.matrix * factor }
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, rhs: &Operator) -> Result<Operator> {
        self.same_dims(rhs)?;
        Ok(Self { dims: self.dims.clone(), matrix: &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<DVector<C64>> {
        if psi.dims() != self.dims() {
            return input(format!("state dims {:?} do not match operator dims {:?}", psi.dims(), self.dims));
        }
        Ok(&self.matrix * psi.amplitudes())
    }

    /// `⟨ψ|M|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> Result<C64> {
        let m_psi = self.apply(psi)?;
        Ok(psi.amplitudes().dotc(&m_psi))
    }

    pub(crate) fn add_assign_matrix(&mut self, m: &DMatrix<C64>) {
        self.matrix += m;
    }

    fn same_dims(&self, rhs: &Operator) -> Result<()> {
        if self.dims != rhs.dims {
            return input(format!("operator dims {:?} and {:?} differ", self.dims, rhs.dims));
        }
        Ok(())
    }
}

/// Normalized complex amplitude vector over a tensor-product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; rejects the zero vector.
    pub fn new(dims: Vec<usize>, amplitudes: DVector<C64>) -> Result<Self> {
        let d = total_dim(&dims);
        if amplitudes.len() != d {
            return input(format!("{} amplitudes for dims {dims:?} (expected {d})", amplitudes.len()));
        }
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return input("state vector has zero or non-finite norm");
        }
        Ok(Self { dims, amplitudes: amplitudes / C64::new(norm, 0.0) })
    }

    pub(crate) fn from_normalized(dims: Vec<usize>, amplitudes: DVector<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), total_dim(&dims));
        Self { dims, amplitudes }
    }

    pub fn basis(label: &BasisLabel, dims: &[usize]) -> Result<Self> {
        let idx = basis_index(label, dims)?;
        let mut amps = DVector::zeros(total_dim(dims));
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self { dims: dims.to_vec(), amplitudes: amps })
    }

    /// Equal-weight superposition of the given basis states with the given
    /// real signs.
    pub fn superposition(terms: &[(BasisLabel, f64)], dims: &[usize]) -> Result<Self> {
        let mut amps = DVector::zeros(total_dim(dims));
        for (label, coeff) in terms {
            amps[basis_index(label, dims)?] += C64::new(*coeff, 0.0);
        }
        Self::new(dims.to_vec(), amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dims != other.dims {
            return input(format!("state dims {:?} and {:?} differ", self.dims, other.dims));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn amplitude(&self, label: &BasisLabel) -> Result<C64> {
        Ok(self.amplitudes[basis_index(label, &self.dims)?])
    }

    pub fn population(&self, label: &BasisLabel) -> Result<f64> {
        Ok(self.amplitude(label)?.norm_sqr())
    }
}

/// Truncated annihilation operator: `a[n−1, n] = √n`.
pub fn annihilation_op(cutoff_dim: usize) -> Result<Operator> {
    if cutoff_dim < 2 {
        return input(format!("cutoff dimension must be at least 2, got {cutoff_dim}"));
    }
    let mut m = DMatrix::zeros(cutoff_dim, cutoff_dim);
    for n in 1..cutoff_dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::new(vec![cutoff_dim], m)
}

pub fn creation_op(cutoff_dim: usize) -> Result<Operator> {
    annihilation_op(cutoff_dim).map(|a| a.adjoint())
}

/// `|i⟩⟨j|` on a single `dim`-level mode.
pub fn transition_op(dim: usize, i: usize, j: usize) -> Result<Operator> {
    if i >= dim || j >= dim {
        return input(format!("transition ({i},{j}) out of range for dim {dim}"));
    }
    let mut m = DMatrix::zeros(dim, dim);
    m[(i, j)] = C64::new(1.0, 0.0);
    Operator::new(vec![dim], m)
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` acting on `mode_index`.
pub fn embed(op: &Operator, mode_index: usize, dims: &[usize]) -> Result<Operator> {
    embed_many(&[(mode_index, op)], dims)
}

/// Tensor product of single-mode operators on distinct modes, identity
/// elsewhere. Cheaper than multiplying separately embedded factors.
pub fn embed_many(factors: &[(usize, &Operator)], dims: &[usize]) -> Result<Operator> {
    let mut slots: Vec<Option<&Operator>> = vec![None; dims.len()];
    for &(k, op) in factors {
        let Some(&dk) = dims.get(k) else {
            return input(format!("mode index {k} out of range for {} modes", dims.len()));
        };
        if op.dims() != [dk] {
            return input(format!("operator dims {:?} do not match mode {k} of dim {dk}", op.dims()));
        }
        if slots[k].replace(op).is_some() {
            return input(format!("mode {k} appears twice in one tensor product"));
        }
    }
    let mut acc = DMatrix::<C64>::identity(1, 1);
    for (slot, &dk) in slots.iter().zip(dims) {
        acc = match slot {
            Some(op) => acc.kronecker(op.matrix()),
            None => acc.kronecker(&DMatrix::<C64>::identity(dk, dk)),
        };
    }
    Operator::new(dims.to_vec(), acc).map_err(|e| Error::Numerical(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn basis_index_examples() {
        assert_eq!(basis_index(&BasisLabel::new([1, 0]), &[3, 3]).unwrap(), 3);
        assert_eq!(basis_index(&BasisLabel::new([0, 0, 0]), &[2, 2, 2]).unwrap(), 0);
        assert_eq!(basis_index(&BasisLabel::new([1, 2, 3]), &[2, 3, 4]).unwrap(), 23);
    }

    #[test]
    fn basis_index_rejects_out_of_range() {
        assert!(matches!(basis_index(&BasisLabel::new([2, 0]), &[2, 3]), Err(Error::Input(_))));
        assert!(matches!(basis_index(&BasisLabel::new([0]), &[2, 3]), Err(Error::Input(_))));
        assert!(basis_label(6, &[2, 3]).is_err());
    }

    #[test]
    fn basis_round_trip_exhaustive() {
        for dims in [vec![2], vec![3, 3], vec![2, 3, 4], vec![3, 3, 3, 4], vec![3, 3, 3, 4, 4], vec![10, 10, 10, 10]] {
            for idx in 0..total_dim(&dims) {
                let label = basis_label(idx, &dims).unwrap();
                assert_eq!(basis_index(&label, &dims).unwrap(), idx);
            }
        }
    }

    #[test]
    fn mode_spec_invariants() {
        assert!(ModeSpec::resonator(6.0, 0).is_err());
        assert!(ModeSpec::qubit(&[]).is_err());
        assert!(ModeSpec::qubit(&[5.0, -1.0]).is_err());
        assert!(ModeSpec::qubit(&[f64::NAN]).is_err());
        assert!(ModeSpec::new(ModeKind::Resonator, 4, vec![6.0, 7.0]).is_err());
        let q = ModeSpec::qubit(&[5.0, 6.2]).unwrap();
        assert_eq!(q.dim(), 3);
        assert_eq!(q.level_energies_ghz(), vec![0.0, 5.0, 11.2]);
        let r = ModeSpec::resonator(6.0, 3).unwrap();
        assert_eq!(r.dim(), 4);
        assert_eq!(r.level_energies_ghz(), vec![0.0, 6.0, 12.0, 18.0]);
    }

    #[test]
    fn annihilation_small_cases() {
        let a2 = annihilation_op(2).unwrap();
        assert_eq!(a2.matrix()[(0, 1)], c(1.0));
        assert_eq!(a2.matrix().iter().filter(|z| z.norm() > 0.0).count(), 1);
        let a3 = annihilation_op(3).unwrap();
        assert_eq!(a3.matrix()[(0, 1)], c(1.0));
        assert!((a3.matrix()[(1, 2)] - c(2f64.sqrt())).norm() < 1e-15);
        assert_eq!(a3.matrix().iter().filter(|z| z.norm() > 0.0).count(), 2);
        assert!(annihilation_op(1).is_err());
    }

    #[test]
    fn canonical_commutator_below_cutoff() {
        let d = 6;
        let a = annihilation_op(d).unwrap();
        let comm = a.commutator(&a.adjoint()).unwrap();
        // the truncation only spoils the last diagonal entry
        for i in 0..d - 1 {
            for j in 0..d - 1 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((comm.matrix()[(i, j)] - c(expect)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn number_operator_eigenvalues() {
        let d = 5;
        let a = annihilation_op(d).unwrap();
        let num = a.adjoint().matmul(&a).unwrap();
        for n in 0..d {
            let ket = StateVector::basis(&BasisLabel::new([n]), &[d]).unwrap();
            let out = num.apply(&ket).unwrap();
            assert!((out[n] - c(n as f64)).norm() < 1e-12);
        }
    }

    #[test]
    fn transition_op_examples() {
        let sp = transition_op(2, 1, 0).unwrap();
        assert_eq!(sp.matrix()[(1, 0)], c(1.0));
        assert_eq!(sp.matrix()[(0, 1)], c(0.0));
        let t = transition_op(3, 2, 1).unwrap();
        assert_eq!(t.matrix()[(2, 1)], c(1.0));
        assert_eq!(t.matrix().iter().filter(|z| z.norm() > 0.0).count(), 1);
        for (i, j) in [(0, 1), (2, 0), (1, 1)] {
            assert_eq!(transition_op(3, i, j).unwrap().adjoint(), transition_op(3, j, i).unwrap());
        }
        assert!(transition_op(3, 3, 0).is_err());
    }

    #[test]
    fn embed_identity_and_lowering() {
        let dims = [2, 3];
        let id = embed(&Operator::identity(&[3]), 1, &dims).unwrap();
        assert_eq!(id, Operator::identity(&dims));
        let a = embed(&annihilation_op(3).unwrap(), 1, &dims).unwrap();
        let ket = StateVector::basis(&BasisLabel::new([0, 1]), &dims).unwrap();
        let out = a.apply(&ket).unwrap();
        let expect = StateVector::basis(&BasisLabel::new([0, 0]), &dims).unwrap();
        assert!((out - expect.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn embed_rejects_mismatch() {
        assert!(embed(&annihilation_op(3).unwrap(), 0, &[2, 3]).is_err());
        assert!(embed(&annihilation_op(3).unwrap(), 2, &[2, 3]).is_err());
    }

    #[test]
    fn disjoint_embeddings_commute() {
        let dims = [3, 4];
        let a = embed(&transition_op(3, 2, 1).unwrap(), 0, &dims).unwrap();
        let b = embed(&annihilation_op(4).unwrap(), 1, &dims).unwrap();
        assert!(a.commutator(&b).unwrap().max_abs() < 1e-15);
        let both = embed_many(&[(0, &transition_op(3, 2, 1).unwrap()), (1, &annihilation_op(4).unwrap())], &dims).unwrap();
        assert!(both.max_abs_diff(&a.matmul(&b).unwrap()) < 1e-15);
    }

    #[test]
    fn state_vector_normalizes() {
        let psi = StateVector::new(vec![2], DVector::from_vec(vec![c(3.0), c(4.0)])).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        assert!(StateVector::new(vec![2], DVector::zeros(2)).is_err());
        assert!(StateVector::new(vec![3], DVector::zeros(2)).is_err());
    }

    fn small_dims() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(2usize..5, 1..4)
    }

    proptest! {
        #[test]
        fn label_index_bijection(dims in small_dims(), seed in 0usize..10_000) {
            let idx = seed % total_dim(&dims);
            let label = basis_label(idx, &dims).unwrap();
            prop_assert_eq!(basis_index(&label, &dims).unwrap(), idx);
        }

        #[test]
        fn embed_preserves_hermiticity_and_unitarity(dims in small_dims(), k in 0usize..3, theta in 0.0f64..6.28) {
            let k = k % dims.len();
            let d = dims[k];
            // Hermitian: x-like coupling between the two lowest levels plus a diagonal
            let mut h = transition_op(d, 0, 1).unwrap().add(&transition_op(d, 1, 0).unwrap()).unwrap();
            h = h.add(&transition_op(d, d - 1, d - 1).unwrap().scale(C64::new(theta, 0.0))).unwrap();
            prop_assert!(embed(&h, k, &dims).unwrap().is_hermitian(1e-14));
            // unitary: diagonal phases
            let mut u = DMatrix::<C64>::identity(d, d);
            for n in 0..d {
                u[(n, n)] = C64::from_polar(1.0, theta * n as f64);
            }
            let u = Operator::new(vec![d], u).unwrap();
            prop_assert!(embed(&u, k, &dims).unwrap().unitarity_error() < 1e-13);
        }
    }
}
