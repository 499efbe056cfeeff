//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;

/// Relative eigenvalue cutoff below which a Hermitian Gram matrix is singular.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// One circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    // row-major draw order so that row k of a K x N draw is one user's vector
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = complex_normal(rng);
        }
    }
    m
}

/// `A A^H`, computed on the upper triangle and mirrored so the result is
/// exactly Hermitian with a real diagonal.
pub fn outer_gram(a: &CMatrix) -> CMatrix {
    let k = a.nrows();
    let mut g = CMatrix::zeros(k, k);
    for i in 0..k {
        let ri = a.row(i);
        g[(i, i)] = Complex64::new(ri.iter().map(|z| z.norm_sqr()).sum(), 0.0);
        for j in (i + 1)..k {
            let rj = a.row(j);
            let v: Complex64 = ri.iter().zip(rj.iter()).map(|(x, y)| x * y.conj()).sum();
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

/// True if the smallest eigenvalue of the Hermitian PSD matrix `g` is below
/// `RANK_TOLERANCE` times its largest.
pub fn is_rank_deficient(g: &CMatrix) -> bool {
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    max.is_nan() || max <= 0.0 || min < RANK_TOLERANCE * max
}

/// Solve `A X = B` for Hermitian positive-definite `A`.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    Cholesky::new(a.clone()).map(|c| c.solve(b))
}

/// Frobenius norm squared, `trace(A^H A)`.
pub fn frob_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
