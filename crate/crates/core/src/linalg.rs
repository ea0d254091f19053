//! Dense complex linear algebra sized for desk-scale Hilbert spaces.
//!
//! Operators are stored as dense `nalgebra` matrices. Everything here is
//! immutable after construction; methods return new values.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{EsrError, Result};

/// Tolerance used when callers do not supply one.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest Hilbert-space dimension the library is tuned for.
pub const MAX_DIM: usize = 64;

/// Environment variable overriding [`DEFAULT_TOL`].
pub const TOL_ENV_VAR: &str = "ESR_DEFAULT_TOL";

/// Process-wide default tolerance, read once from `ESR_DEFAULT_TOL`.
pub fn default_tol() -> f64 {
    static TOL: OnceLock<f64> = OnceLock::new();
    *TOL.get_or_init(|| {
        std::env::var(TOL_ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t > 0.0)
            .unwrap_or(DEFAULT_TOL)
    })
}

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Dense complex square matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexOperator(DMatrix<Complex64>);

impl fmt::Debug for ComplexOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ComplexOperator({}x{}) {:?}",
            self.dim(),
            self.dim(),
            self.0.as_slice()
        )
    }
}

impl ComplexOperator {
    /// Builds an operator from a row-major list of `dim * dim` entries.
    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if dim == 0 {
            return Err(EsrError::InvalidParameter("operator dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(EsrError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(EsrError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(EsrError::InvalidParameter("operator dimension must be positive".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EsrError::NonFinite);
        }
        Ok(Self(m))
    }

    /// Real diagonal operator.
    pub fn diagonal(values: &[f64]) -> Self {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| c(v, 0.0)));
        Self(DMatrix::from_diagonal(&d))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    /// Rank-one operator `|v><v|`.
    pub fn outer(v: &StateVector) -> Self {
        Self(&v.0 * v.0.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(EsrError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(&self.0 - &other.0))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    /// `A v`.
    pub fn apply(&self, v: &StateVector) -> Result<DVector<Complex64>> {
        if self.dim() != v.dim() {
            return Err(EsrError::DimensionMismatch {
                expected: self.dim(),
                found: v.dim(),
            });
        }
        Ok(&self.0 * &v.0)
    }

    /// `<v|A|v>`.
    pub fn expectation(&self, v: &StateVector) -> Result<Complex64> {
        let av = self.apply(v)?;
        Ok(v.0.dotc(&av))
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.0 - &other.0).norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (i..n).all(|j| (self.0[(i, j)] - self.0[(j, i)].conj()).norm() <= tol))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.0 + self.0.adjoint()).map(|z| z * 0.5);
        let mut eig: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        eig
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.hermitian_eigenvalues().first().is_none_or(|&m| m >= -tol)
    }

    /// Hermitian, with `P^2 = P` entrywise within `tol`.
    pub fn is_projector(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        let sq = Self(&self.0 * &self.0);
        sq.max_abs_diff(self) <= tol
    }

    /// Hermitian, positive semidefinite and of unit trace.
    pub fn is_density(&self, tol: f64) -> bool {
        let tr = self.trace();
        self.is_positive_semidefinite(tol) && (tr.re - 1.0).abs() <= tol && tr.im.abs() <= tol
    }

    /// `0 <= self <= I` in the positive-semidefinite order.
    pub fn is_effect(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        let eig = self.hermitian_eigenvalues();
        eig.first().is_none_or(|&m| m >= -tol) && eig.last().is_none_or(|&m| m <= 1.0 + tol)
    }

    /// Drops the anti-Hermitian part that rounding leaves behind.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()).map(|z| z * 0.5))
    }
}

/// Unit vector in a finite-dimensional Hilbert space.
#[derive(Clone, PartialEq)]
pub struct StateVector(DVector<Complex64>);

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateVector{:?}", self.0.as_slice())
    }
}

impl StateVector {
    /// Accepts amplitudes that already have unit norm within `tol`.
    pub fn new(amplitudes: &[Complex64], tol: f64) -> Result<Self> {
        let v = Self::finite(amplitudes)?;
        let norm = v.norm();
        if norm == 0.0 {
            return Err(EsrError::ZeroVector);
        }
        if (norm - 1.0).abs() > tol {
            return Err(EsrError::NotNormalized { norm });
        }
        Ok(Self(v / c(norm, 0.0)))
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: &[Complex64]) -> Result<Self> {
        Self::from_dvector(Self::finite(amplitudes)?)
    }

    pub(crate) fn from_dvector(v: DVector<Complex64>) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() {
            return Err(EsrError::NonFinite);
        }
        if norm <= f64::MIN_POSITIVE {
            return Err(EsrError::ZeroVector);
        }
        Ok(Self(v / c(norm, 0.0)))
    }

    fn finite(amplitudes: &[Complex64]) -> Result<DVector<Complex64>> {
        if amplitudes.is_empty() {
            return Err(EsrError::InvalidParameter(
                "state vector dimension must be positive".into(),
            ));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EsrError::NonFinite);
        }
        Ok(DVector::from_column_slice(amplitudes))
    }

    /// Computational basis vector `|index>`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = c(1.0, 0.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.0.dotc(&other.0)
    }

    /// Projector `|v><v|`.
    pub fn density(&self) -> ComplexOperator {
        ComplexOperator::outer(self)
    }

    /// Kronecker product `|self> (x) |other>`.
    pub fn tensor(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    /// Multiplies by a global phase so the first amplitude with modulus
    /// above `tol` is real and positive.
    pub fn with_canonical_phase(&self, tol: f64) -> Self {
        match self.0.iter().find(|z| z.norm() > tol) {
            Some(z) => {
                let phase = z.conj() / z.norm();
                Self(self.0.map(|a| a * phase))
            }
            None => self.clone(),
        }
    }

    /// Largest amplitude deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Equality up to a global phase.
    pub fn same_ray(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && (1.0 - self.inner(other).norm()).abs() <= tol
    }
}

/// Finite projection-valued spectral measure of a Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    projectors: Vec<ComplexOperator>,
}

impl SpectralDecomposition {
    /// Strictly increasing distinct eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[ComplexOperator] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    /// `sum_k lambda_k P_k`.
    pub fn reconstruct(&self) -> ComplexOperator {
        let mut acc = DMatrix::zeros(self.dim(), self.dim());
        for (lambda, p) in self.eigenvalues.iter().zip(&self.projectors) {
            acc += p.matrix().map(|z| z * *lambda);
        }
        ComplexOperator(acc)
    }

    /// Index of the eigenvalue within `tol` of `value`.
    pub fn index_of(&self, value: f64, tol: f64) -> Option<usize> {
        self.eigenvalues.iter().position(|&l| (l - value).abs() <= tol)
    }
}

/// Kronecker product `a (x) b`.
pub fn tensor_product(a: &ComplexOperator, b: &ComplexOperator) -> ComplexOperator {
    ComplexOperator(a.0.kronecker(&b.0))
}

/// Traces out the second tensor factor of an operator on `H1 (x) H2`.
pub fn partial_trace_second(rho: &ComplexOperator, dim_first: usize, dim_second: usize) -> Result<ComplexOperator> {
    if dim_first == 0 || dim_second == 0 || rho.dim() != dim_first * dim_second {
        return Err(EsrError::DimensionMismatch {
            expected: dim_first * dim_second,
            found: rho.dim(),
        });
    }
    let m = DMatrix::from_fn(dim_first, dim_first, |i, j| {
        (0..dim_second)
            .map(|k| rho.0[(i * dim_second + k, j * dim_second + k)])
            .sum()
    });
    Ok(ComplexOperator(m))
}

/// Spectral decomposition of a Hermitian operator. Eigenvalues closer than
/// `tol` are merged into one eigenspace.
pub fn spectral_decompose(h: &ComplexOperator, tol: f64) -> Result<SpectralDecomposition> {
    if !h.is_hermitian(tol) {
        return Err(EsrError::NotHermitian { tol });
    }
    let eig = SymmetricEigen::new(h.hermitian_part().0);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match clusters.last_mut() {
            Some(cluster) if (eig.eigenvalues[idx] - eig.eigenvalues[cluster[0]]).abs() <= tol => cluster.push(idx),
            _ => clusters.push(vec![idx]),
        }
    }

    let dim = h.dim();
    let mut eigenvalues = Vec::with_capacity(clusters.len());
    let mut projectors = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let mean = cluster.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / cluster.len() as f64;
        let mut p = DMatrix::zeros(dim, dim);
        for &i in &cluster {
            let v = eig.eigenvectors.column(i);
            p += v * v.adjoint();
        }
        eigenvalues.push(mean);
        projectors.push(ComplexOperator(p));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        projectors,
    })
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &ComplexOperator, b: &ComplexOperator) -> Result<Complex64> {
    a.check_dim(b)?;
    let n = a.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a.0[(i, k)] * b.0[(k, i)];
        }
    }
    Ok(acc)
}

/// Pauli matrices and spin observables for spin-1/2 systems.
pub mod pauli {
    use super::{c, ComplexOperator};

    pub fn x() -> ComplexOperator {
        ComplexOperator::from_row_major(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).expect("finite")
    }

    pub fn y() -> ComplexOperator {
        ComplexOperator::from_row_major(2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]).expect("finite")
    }

    pub fn z() -> ComplexOperator {
        ComplexOperator::diagonal(&[1.0, -1.0])
    }

    /// `n . sigma` for the unit vector with polar angle `theta` and
    /// azimuth `phi` (radians).
    pub fn along(theta: f64, phi: f64) -> ComplexOperator {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        ComplexOperator::from_row_major(2, &[c(ct, 0.0), c(st * cp, -st * sp), c(st * cp, st * sp), c(-ct, 0.0)])
            .expect("finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_operator(dim: usize, seed: &[f64]) -> ComplexOperator {
        let entries: Vec<Complex64> = (0..dim * dim)
            .map(|k| c(seed[(2 * k) % seed.len()], seed[(2 * k + 1) % seed.len()]))
            .collect();
        ComplexOperator::from_row_major(dim, &entries).unwrap()
    }

    fn random_hermitian(dim: usize, seed: &[f64]) -> ComplexOperator {
        let a = random_operator(dim, seed);
        a.add(&a.adjoint()).unwrap().scale(0.5)
    }

    /// 2x2 Hermitian eigenvalues from the characteristic polynomial.
    fn closed_form_eigs_2x2(h: &ComplexOperator) -> (f64, f64) {
        let a = h.get(0, 0).re;
        let d = h.get(1, 1).re;
        let b = h.get(0, 1).norm();
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d).powi(2) + b * b).sqrt();
        (mid - rad, mid + rad)
    }

    #[test]
    fn identity_tensor_identity() {
        let i4 = tensor_product(&ComplexOperator::identity(2), &ComplexOperator::identity(2));
        assert_eq!(i4, ComplexOperator::identity(4));
    }

    #[test]
    fn diagonal_tensor_product() {
        let p = tensor_product(
            &ComplexOperator::diagonal(&[1.0, 0.0]),
            &ComplexOperator::diagonal(&[0.0, 1.0]),
        );
        assert_eq!(p, ComplexOperator::diagonal(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tensor_trace_multiplicative_against_summation() {
        let a = random_operator(2, &[0.3, -1.2, 0.7, 2.0, -0.4, 0.1, 1.5, -0.9]);
        let b = random_operator(2, &[1.1, 0.2, -0.6, 0.8, 0.5, -1.7, 0.25, 0.4]);
        let ab = tensor_product(&a, &b);
        // (A (x) B)[(i,k),(j,l)] = A[i,j] B[k,l]; the trace sums i=j, k=l.
        let mut oracle = c(0.0, 0.0);
        for i in 0..2 {
            for k in 0..2 {
                oracle += a.get(i, i) * b.get(k, k);
            }
        }
        assert!((ab.trace() - oracle).norm() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        assert_eq!(ab.get(2 * i + k, 2 * j + l), a.get(i, j) * b.get(k, l));
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_product_rule() {
        let a = random_operator(2, &[0.3, -1.2, 0.7, 2.0]);
        let b = random_operator(3, &[1.1, 0.2, -0.6, 0.8, 0.5]);
        let cc = random_operator(2, &[0.9, 0.1, -0.3]);
        let d = random_operator(3, &[-0.2, 0.4, 1.3, 0.6]);
        let lhs = tensor_product(&a, &b).mul(&tensor_product(&cc, &d)).unwrap();
        let rhs = tensor_product(&a.mul(&cc).unwrap(), &b.mul(&d).unwrap());
        assert!(lhs.distance(&rhs) < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let rho_a = ComplexOperator::diagonal(&[0.7, 0.3]);
        let rho_b = ComplexOperator::diagonal(&[0.2, 0.5, 0.3]);
        let reduced = partial_trace_second(&tensor_product(&rho_a, &rho_b), 2, 3).unwrap();
        assert!(reduced.distance(&rho_a) < 1e-12);
    }

    #[test]
    fn partial_trace_of_singlet() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::new(&[c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)], 1e-12).unwrap();
        let rho = psi.density();
        // Index-summation oracle: reduced[i][j] = sum_k psi[i,k] conj(psi[j,k]).
        let amp = psi.amplitudes();
        let mut oracle = [[c(0.0, 0.0); 2]; 2];
        for (i, row) in oracle.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                for k in 0..2 {
                    *entry += amp[2 * i + k] * amp[2 * j + k].conj();
                }
            }
        }
        let reduced = partial_trace_second(&rho, 2, 2).unwrap();
        for (i, row) in oracle.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                assert!((reduced.get(i, j) - entry).norm() < 1e-15);
            }
        }
        assert!(reduced.distance(&ComplexOperator::identity(2).scale(0.5)) < 1e-12);
    }

    #[test]
    fn partial_trace_maximally_mixed() {
        let rho = ComplexOperator::identity(4).scale(0.25);
        let reduced = partial_trace_second(&rho, 2, 2).unwrap();
        assert!(reduced.distance(&ComplexOperator::identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let rho = ComplexOperator::identity(4);
        assert!(matches!(
            partial_trace_second(&rho, 3, 2),
            Err(EsrError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn decompose_sigma_z() {
        let sd = spectral_decompose(&pauli::z(), 1e-10).unwrap();
        assert_eq!(sd.eigenvalues().len(), 2);
        assert!((sd.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((sd.eigenvalues()[1] - 1.0).abs() < 1e-14);
        assert!(sd.projectors()[0].distance(&ComplexOperator::diagonal(&[0.0, 1.0])) < 1e-14);
        assert!(sd.projectors()[1].distance(&ComplexOperator::diagonal(&[1.0, 0.0])) < 1e-14);
    }

    #[test]
    fn decompose_identity_merges() {
        let sd = spectral_decompose(&ComplexOperator::identity(2), 1e-10).unwrap();
        assert_eq!(sd.eigenvalues(), &[1.0]);
        assert!(sd.projectors()[0].distance(&ComplexOperator::identity(2)) < 1e-14);
    }

    #[test]
    fn decompose_spin_direction() {
        for &(theta, phi) in &[(0.3, 1.1), (1.9, -0.4), (std::f64::consts::PI / 3.0, 0.0)] {
            let h = pauli::along(theta, phi);
            let (lo, hi) = closed_form_eigs_2x2(&h);
            let sd = spectral_decompose(&h, 1e-10).unwrap();
            assert!((sd.eigenvalues()[0] - lo).abs() < 1e-12);
            assert!((sd.eigenvalues()[1] - hi).abs() < 1e-12);
            assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_rejects_non_hermitian() {
        let a = ComplexOperator::from_row_major(2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(
            spectral_decompose(&a, 1e-10),
            Err(EsrError::NotHermitian { .. })
        ));
    }

    #[test]
    fn trace_product_cases() {
        let a = random_operator(3, &[0.3, -1.2, 0.7, 2.0, -0.4, 0.1, 1.5]);
        let b = random_operator(3, &[1.1, 0.2, -0.6, 0.8, 0.5, -1.7, 0.25, 0.4, 0.9]);
        let mut oracle = c(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                oracle += a.get(i, j) * b.get(j, i);
            }
        }
        assert!((trace_product(&a, &b).unwrap() - oracle).norm() < 1e-13);
        assert!((trace_product(&ComplexOperator::identity(3), &a).unwrap() - a.trace()).norm() < 1e-15);
        let plus = ComplexOperator::diagonal(&[1.0, 0.0]);
        let minus = ComplexOperator::diagonal(&[0.0, 1.0]);
        assert_eq!(trace_product(&plus, &minus).unwrap(), c(0.0, 0.0));
        assert!(trace_product(&plus, &a).is_err());
    }

    #[test]
    fn predicates() {
        let rho = ComplexOperator::diagonal(&[0.25, 0.75]);
        assert!(rho.is_density(1e-12));
        assert!(!rho.is_projector(1e-12));
        assert!(ComplexOperator::diagonal(&[1.0, 0.0]).is_projector(1e-12));
        assert!(!ComplexOperator::diagonal(&[1.5, -0.5]).is_positive_semidefinite(1e-12));
        assert!(pauli::y().is_hermitian(1e-15));
        let nan = ComplexOperator::from_row_major(1, &[c(f64::NAN, 0.0)]);
        assert_eq!(nan, Err(EsrError::NonFinite));
    }

    #[test]
    fn canonical_phase() {
        let v = StateVector::normalized(&[c(0.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        let w = v.with_canonical_phase(1e-12);
        assert!(w.amplitudes()[1].im.abs() < 1e-15 && w.amplitudes()[1].re > 0.0);
        assert!(w.same_ray(&v, 1e-12));
    }

    #[test]
    fn zero_vector_rejected() {
        assert_eq!(StateVector::normalized(&[c(0.0, 0.0); 2]), Err(EsrError::ZeroVector));
        assert_eq!(StateVector::new(&[c(0.0, 0.0); 2], 1e-10), Err(EsrError::ZeroVector));
    }

    fn hermitian_strategy() -> impl Strategy<Value = ComplexOperator> {
        (1usize..=5).prop_flat_map(|dim| {
            proptest::collection::vec(-2.0f64..2.0, 2 * dim * dim).prop_map(move |seed| random_hermitian(dim, &seed))
        })
    }

    proptest! {
        #[test]
        fn spectral_roundtrip(h in hermitian_strategy()) {
            let sd = spectral_decompose(&h, DEFAULT_TOL).unwrap();
            prop_assert!(sd.reconstruct().distance(&h) < 1e-10);
            let sum = sd.projectors().iter().fold(ComplexOperator::zeros(h.dim()), |acc, p| acc.add(p).unwrap());
            prop_assert!(sum.distance(&ComplexOperator::identity(h.dim())) < 1e-10);
            for w in sd.eigenvalues().windows(2) {
                prop_assert!(w[1] > w[0]);
            }
            for (i, p) in sd.projectors().iter().enumerate() {
                prop_assert!(p.is_projector(1e-10));
                for q in &sd.projectors()[i + 1..] {
                    prop_assert!(p.mul(q).unwrap().frobenius_norm() < 1e-10);
                }
            }
        }

        #[test]
        fn partial_trace_inverts_tensor(
            a in proptest::collection::vec(0.01f64..1.0, 3),
            b in proptest::collection::vec(-1.0f64..1.0, 18),
        ) {
            let rho_a = ComplexOperator::diagonal(&a);
            let rho_b = random_hermitian(3, &b);
            let reduced = partial_trace_second(&tensor_product(&rho_a, &rho_b), 3, 3).unwrap();
            let expected = rho_a.scale(rho_b.trace().re);
            prop_assert!(reduced.distance(&expected) < 1e-12);
        }

        #[test]
        fn tensor_associative(
            a in proptest::collection::vec(-1.0f64..1.0, 8),
            b in proptest::collection::vec(-1.0f64..1.0, 8),
            d in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            let (a, b, d) = (random_operator(2, &a), random_operator(2, &b), random_operator(2, &d));
            let left = tensor_product(&tensor_product(&a, &b), &d);
            let right = tensor_product(&a, &tensor_product(&b, &d));
            prop_assert!(left.distance(&right) < 1e-12);
            prop_assert!((left.trace() - a.trace() * b.trace() * d.trace()).norm() < 1e-12);
        }
    }
}
