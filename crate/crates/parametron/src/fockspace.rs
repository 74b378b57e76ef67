//! Truncated-Fock-space linear algebra: bosonic operators, states, parity
//! structure and a Hermitian eigensolver with descending-energy ordering.
//!
//! All matrices and vectors in one computation share the same truncation
//! dimension `dim` (Fock levels `|0⟩ .. |dim-1⟩`). Values are immutable after
//! construction; every operation here is a pure function.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative Frobenius tolerance below which a matrix is accepted as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Photon-number parity of a Fock-space vector.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Dense complex operator on the truncated Fock space.
///
/// Entries carry angular frequency (rad/ns) for Hamiltonians and are
/// dimensionless for ladder operators.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    m: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        Ok(Self { m })
    }

    /// Build from a function of (row, column).
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        Self {
            m: DMatrix::from_fn(dim, dim, f),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    pub fn set_entry(&mut self, row: usize, col: usize, value: Complex64) {
        self.m[(row, col)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn dagger(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            m: self.m.clone() * factor,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            m: &self.m - &other.m,
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self {
            m: &self.m * &other.m,
        }
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        StateVector { v: &self.m * &v.v }
    }

    /// Relative Frobenius deviation from Hermiticity, `‖M - M†‖ / ‖M‖`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let norm = self.m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.m - self.m.adjoint()).norm() / norm
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// `⟨bra| M |ket⟩`.
    pub fn matrix_element(&self, bra: &StateVector, ket: &StateVector) -> Complex64 {
        bra.v.dotc(&(&self.m * &ket.v))
    }
}

/// Pure-state amplitudes in the truncated Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    v: DVector<Complex64>,
}

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            v: DVector::zeros(dim),
        }
    }

    /// Fock basis state `|n⟩`.
    pub fn basis_state(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidArgument {
                reason: format!("basis index {n} outside dimension {dim}"),
            });
        }
        let mut v = DVector::zeros(dim);
        v[n] = Complex64::new(1.0, 0.0);
        Ok(Self { v })
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::basis_state(dim, 0).expect("dim >= 1")
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Self {
        Self {
            v: DVector::from_vec(amplitudes),
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn amplitude(&self, n: usize) -> Complex64 {
        self.v[n]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        self.v.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        self.v.as_mut_slice()
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self {
            v: self.v.clone() / Complex64::new(n, 0.0),
        }
    }

    /// `⟨self|other⟩` with the physics convention (self is conjugated).
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.v.dotc(&other.v)
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap_probability(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            v: &self.v + &other.v,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            v: &self.v - &other.v,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            v: self.v.clone() * factor,
        }
    }

    /// Squared-norm weight on the even and odd Fock levels.
    pub fn parity_weights(&self) -> (f64, f64) {
        let mut even = 0.0;
        let mut odd = 0.0;
        for (n, a) in self.v.iter().enumerate() {
            if n % 2 == 0 {
                even += a.norm_sqr();
            } else {
                odd += a.norm_sqr();
            }
        }
        (even, odd)
    }

    /// Majority parity label.
    pub fn parity(&self) -> Parity {
        let (even, odd) = self.parity_weights();
        if even >= odd {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn outer_product(&self) -> DensityMatrix {
        DensityMatrix {
            m: &self.v * self.v.adjoint(),
        }
    }
}

/// Mixed-state density matrix in the truncated Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.outer_product()
    }

    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        Ok(Self { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn as_matrix_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.m
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    /// `⟨phi| ρ |phi⟩`, real part (the value is real for Hermitian ρ).
    pub fn expectation(&self, phi: &StateVector) -> f64 {
        phi.v.dotc(&(&self.m * &phi.v)).re
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let norm = self.m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.m - self.m.adjoint()).norm() / norm
    }
}

/// Full spectrum of a Hermitian operator, sorted strictly descending, with a
/// fixed eigenvector gauge and per-vector parity labels.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    pub states: Vec<StateVector>,
    pub parities: Vec<Parity>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Index of the highest-energy eigenvector with the given parity label.
    pub fn top_level_with_parity(&self, parity: Parity) -> Option<usize> {
        self.parities.iter().position(|&p| p == parity)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    Ok(())
}

/// Annihilation operator `a`, with `a|n⟩ = √n |n-1⟩`.
pub fn annihilation(dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix { m })
}

/// Creation operator `a†`.
pub fn creation(dim: usize) -> Result<OperatorMatrix> {
    Ok(annihilation(dim)?.dagger())
}

/// Number operator `n̂ = a†a` (diagonal 0, 1, ..).
pub fn number_operator(dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = Complex64::new(n as f64, 0.0);
    }
    Ok(OperatorMatrix { m })
}

/// A coherent state after truncation, together with its truncation diagnostic.
#[derive(Clone, Debug)]
pub struct CoherentState {
    /// Renormalized to unit norm after truncation.
    pub state: StateVector,
    /// Norm of the raw truncated series; 1 up to truncation loss.
    pub pre_truncation_norm: f64,
    /// Set when the raw norm fell below 0.999 (severe truncation).
    pub truncation_warning: bool,
}

/// Coherent state `|α⟩` with amplitudes `e^{-|α|²/2} αⁿ/√(n!)`.
pub fn coherent_state(alpha: Complex64, dim: usize) -> Result<CoherentState> {
    check_dim(dim)?;
    let amplitudes = coherent_amplitudes(alpha, dim);
    let raw = StateVector::from_amplitudes(amplitudes);
    let pre_truncation_norm = raw.norm();
    let truncation_warning = pre_truncation_norm < 0.999;
    Ok(CoherentState {
        state: raw.normalized(),
        pre_truncation_norm,
        truncation_warning,
    })
}

/// Raw (un-renormalized) coherent amplitudes; stable recurrence
/// `c_n = c_{n-1} · α/√n`.
fn coherent_amplitudes(alpha: Complex64, dim: usize) -> Vec<Complex64> {
    let mut c = Vec::with_capacity(dim);
    let mut cn = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    c.push(cn);
    for n in 1..dim {
        cn *= alpha / Complex64::new((n as f64).sqrt(), 0.0);
        c.push(cn);
    }
    c
}

/// Even cat state `(|-α⟩ + |α⟩)/N₊` with the exact normalization
/// `N₊² = 2(1 + e^{-2α²})`, renormalized after truncation.
///
/// Defined for all `α ≥ 0`; at `α = 0` it reduces to the vacuum.
pub fn even_cat(alpha: f64, dim: usize) -> Result<StateVector> {
    check_dim(dim)?;
    if alpha < 0.0 {
        return Err(Error::InvalidArgument {
            reason: format!("cat amplitude must be non-negative, got {alpha}"),
        });
    }
    Ok(cat_from_sign(alpha, dim, 1.0))
}

/// Odd cat state `(|-α⟩ - |α⟩)/N₋` with `N₋² = 2(1 - e^{-2α²})`.
pub fn odd_cat(alpha: f64, dim: usize) -> Result<StateVector> {
    check_dim(dim)?;
    if alpha < 0.0 {
        return Err(Error::InvalidArgument {
            reason: format!("cat amplitude must be non-negative, got {alpha}"),
        });
    }
    if alpha == 0.0 {
        return Err(Error::DegenerateOddCat);
    }
    Ok(cat_from_sign(alpha, dim, -1.0))
}

fn cat_from_sign(alpha: f64, dim: usize, sign: f64) -> StateVector {
    let plus = coherent_amplitudes(Complex64::new(alpha, 0.0), dim);
    let minus = coherent_amplitudes(Complex64::new(-alpha, 0.0), dim);
    let norm = (2.0 * (1.0 + sign * (-2.0 * alpha * alpha).exp())).sqrt();
    let amplitudes: Vec<Complex64> = minus
        .iter()
        .zip(&plus)
        .map(|(cm, cp)| (cm + sign * cp) / norm)
        .collect();
    StateVector::from_amplitudes(amplitudes).normalized()
}

/// Both cat states `(even, odd)`. Errors on `α = 0`, where the odd cat is the
/// zero vector; use [`even_cat`] for the `α = 0` limit.
pub fn cat_states(alpha: f64, dim: usize) -> Result<(StateVector, StateVector)> {
    let even = even_cat(alpha, dim)?;
    let odd = odd_cat(alpha, dim)?;
    Ok((even, odd))
}

/// Projectors onto the even and odd Fock sectors, `(P_even, P_odd)`.
pub fn parity_projectors(dim: usize) -> (OperatorMatrix, OperatorMatrix) {
    let even = OperatorMatrix::from_fn(dim, |r, c| {
        if r == c && r % 2 == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let odd = OperatorMatrix::from_fn(dim, |r, c| {
        if r == c && r % 2 == 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    (even, odd)
}

/// Full eigendecomposition of a Hermitian operator.
///
/// Energies come out strictly descending; each eigenvector is gauge-fixed so
/// that its largest-magnitude amplitude is real and positive, and carries a
/// majority parity label. Rejects inputs whose Hermiticity deviation exceeds
/// [`HERMITICITY_TOL`].
pub fn hermitian_eigh(m: &OperatorMatrix) -> Result<EigenSystem> {
    let deviation = m.hermiticity_deviation();
    if deviation > HERMITICITY_TOL {
        return Err(Error::NotHermitian {
            deviation,
            tolerance: HERMITICITY_TOL,
        });
    }
    let dim = m.dim();

    // Every in-scope Hamiltonian is real symmetric; the real path is both
    // faster and avoids complex Householder round-off.
    let all_real = m.m.iter().all(|z| z.im == 0.0);
    let (eigenvalues, eigenvectors): (Vec<f64>, Vec<DVector<Complex64>>) = if all_real {
        let rm = DMatrix::<f64>::from_fn(dim, dim, |r, c| m.m[(r, c)].re);
        let se = rm.symmetric_eigen();
        let vals = se.eigenvalues.iter().copied().collect();
        let vecs = (0..dim)
            .map(|k| {
                DVector::from_iterator(
                    dim,
                    se.eigenvectors.column(k).iter().map(|&x| Complex64::new(x, 0.0)),
                )
            })
            .collect();
        (vals, vecs)
    } else {
        let se = m.m.clone().symmetric_eigen();
        let vals = se.eigenvalues.iter().copied().collect();
        let vecs = (0..dim).map(|k| se.eigenvectors.column(k).clone_owned()).collect();
        (vals, vecs)
    };

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .partial_cmp(&eigenvalues[a])
            .expect("eigenvalues are finite")
    });

    let mut energies = Vec::with_capacity(dim);
    let mut states = Vec::with_capacity(dim);
    let mut parities = Vec::with_capacity(dim);
    for &k in &order {
        let mut v = eigenvectors[k].clone();
        fix_phase(&mut v);
        let state = StateVector { v };
        energies.push(eigenvalues[k]);
        parities.push(state.parity());
        states.push(state);
    }
    Ok(EigenSystem {
        energies,
        states,
        parities,
    })
}

/// Gauge convention: rotate so the largest-magnitude component is real positive.
fn fix_phase(v: &mut DVector<Complex64>) {
    let mut best = 0;
    let mut best_mag = 0.0;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm_sqr();
        if mag > best_mag {
            best_mag = mag;
            best = i;
        }
    }
    let z = v[best];
    let mag = z.norm();
    if mag > 0.0 {
        let phase = z.conj() / Complex64::new(mag, 0.0);
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}
