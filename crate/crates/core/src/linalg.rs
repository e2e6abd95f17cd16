//! Dense complex linear algebra for 3×3 operators and 9×9 superoperators.
//!
//! Vectorization is column-stacking throughout the crate: `vec(ρ)[i + n·j] = ρ[(i, j)]`,
//! so the superoperator `ρ ↦ A·ρ·B` is represented by `Bᵀ ⊗ A`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default singular-value threshold, relative to the largest singular value.
pub const NULL_SPACE_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-10;

// Padé(13) coefficients and the 1-norm bound below which no scaling is needed.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `|i⟩⟨j|` on an `n`-level space (zero-based indices).
pub fn ket_bra(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = c(1.0);
    m
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(M·t)` by scaling and squaring with a degree-13 Padé approximant.
pub fn mat_exp(m: &CMatrix, t: f64) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::invalid("matrix exponential of a non-square matrix"));
    }
    if !is_finite(m) || !t.is_finite() {
        return Err(Error::invalid("matrix exponential of non-finite input"));
    }
    let n = m.nrows();
    let a = m * c(t);
    let norm = norm1(&a);
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil().max(0.0) as i32 } else { 0 };
    let a = a * c(2f64.powi(-squarings));

    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| c(PADE13[k]);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom.lu().solve(&numer).ok_or_else(|| Error::invalid("Padé denominator is singular"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Orthonormal basis of the right null space of `m`, using the threshold `tol·σ_max`.
pub fn null_space(m: &CMatrix, tol: f64) -> Vec<CVector> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return (0..n).map(|k| CVector::from_fn(n, |i, _| if i == k { c(1.0) } else { c(0.0) })).collect();
    }
    let v_t = svd.v_t.expect("v_t requested");
    let mut basis: Vec<CVector> = Vec::new();
    for (k, &s) in sigma.iter().enumerate() {
        if s <= tol * sigma_max {
            basis.push(v_t.row(k).adjoint());
        }
    }
    basis
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues ascending, eigenvectors as columns.
pub fn eig_herm(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(Error::invalid("eig_herm of a non-square matrix"));
    }
    if !is_finite(m) {
        return Err(Error::invalid("eig_herm of non-finite input"));
    }
    let skew = (m - m.adjoint()).norm();
    if skew > HERMITIAN_TOL * m.norm().max(1.0) {
        return Err(Error::invalid(format!("matrix is not Hermitian (‖M − M†‖ = {skew:.3e})")));
    }
    let herm = (m + m.adjoint()) * c(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

pub fn frob_dist(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!("dimension mismatch: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt())
}

/// Column-stacked vectorization.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// Superoperator matrix of `ρ ↦ left·ρ·right`.
pub fn sandwich(left: &CMatrix, right: &CMatrix) -> CMatrix {
    right.transpose().kronecker(left)
}

/// Row vector `vec(I)†` whose product with a vectorized matrix is its trace.
pub fn trace_functional(n: usize) -> CMatrix {
    let v = vectorize(&CMatrix::identity(n, n)).adjoint();
    CMatrix::from_row_slice(1, n * n, v.as_slice())
}
