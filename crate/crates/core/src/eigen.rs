//! General real eigenproblem for the (non-symmetric) coupling matrices.
//!
//! Eigenvalues come from the real Schur form, so complex eigenvalues appear
//! in exact conjugate pairs and real ones are exactly real. Eigenvectors are
//! obtained by back-substitution in the complex Schur form.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: Complex64,
    /// Unit norm, largest-modulus component real and positive.
    pub vector: DVector<Complex64>,
}

impl EigenPair {
    pub fn residual(&self, matrix: &DMatrix<f64>) -> f64 {
        let m = matrix.map(|x| Complex64::new(x, 0.0));
        (&m * &self.vector - &self.vector * self.value).norm()
    }
}

/// All eigenpairs of `matrix`, ordered by descending real part; ties are
/// broken by ascending |Im λ| with the positive imaginary part first.
pub fn eigen_decompose(matrix: &DMatrix<f64>) -> Result<Vec<EigenPair>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::InvalidParameter(format!("matrix is {}x{}, not square", n, matrix.ncols())));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let real_schur =
        Schur::try_new(matrix.clone(), SCHUR_EPS, SCHUR_MAX_ITER).ok_or(Error::EigenNoConvergence { dim: n })?;
    let values = real_schur.complex_eigenvalues();

    let complex = matrix.map(|x| Complex64::new(x, 0.0));
    let (q, t) =
        Schur::try_new(complex, SCHUR_EPS, SCHUR_MAX_ITER).ok_or(Error::EigenNoConvergence { dim: n })?.unpack();

    let norm = t.norm().max(f64::MIN_POSITIVE);
    let mut used = vec![false; n];
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| compare(values[a], values[b]));

    for &idx in &order {
        let value = values[idx];
        // a conjugate partner already computed: reuse its conjugated vector
        if value.im < 0.0 {
            if let Some(p) = pairs.iter().find(|p| p.value == value.conj()) {
                let vector = p.vector.map(|z| z.conj());
                pairs.push(EigenPair { value, vector });
                continue;
            }
        }
        let k = (0..n)
            .filter(|&i| !used[i])
            .min_by(|&a, &b| (t[(a, a)] - value).norm().total_cmp(&(t[(b, b)] - value).norm()))
            .expect("one diagonal entry per eigenvalue");
        used[k] = true;
        let y = triangular_eigenvector(&t, k, norm);
        let mut z = &q * y;
        if value.im == 0.0 {
            // real eigenvalue of a real matrix: choose the real eigenvector
            let phase = phase_of_largest(&z);
            z = z.map(|c| Complex64::new((c * phase.conj()).re, 0.0));
        }
        pairs.push(EigenPair { value, vector: normalize(z) });
    }
    Ok(pairs)
}

fn compare(a: Complex64, b: Complex64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(a.im.abs().total_cmp(&b.im.abs())).then(b.im.total_cmp(&a.im))
}

fn triangular_eigenvector(t: &DMatrix<Complex64>, k: usize, norm: f64) -> DVector<Complex64> {
    let smin = (1e-14 * norm).max(f64::MIN_POSITIVE);
    let mut y = DVector::from_element(t.nrows(), Complex64::new(0.0, 0.0));
    y[k] = Complex64::new(1.0, 0.0);
    let lambda = t[(k, k)];
    for i in (0..k).rev() {
        let mut num = Complex64::new(0.0, 0.0);
        for j in i + 1..=k {
            num += t[(i, j)] * y[j];
        }
        let mut den = t[(i, i)] - lambda;
        if den.norm() < smin {
            den = Complex64::new(smin, 0.0);
        }
        y[i] = -num / den;
    }
    y
}

fn phase_of_largest(z: &DVector<Complex64>) -> Complex64 {
    let big = z.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(Complex64::new(1.0, 0.0));
    if big.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        big / big.norm()
    }
}

/// Unit Euclidean norm, largest-modulus component real positive.
pub fn normalize(z: DVector<Complex64>) -> DVector<Complex64> {
    let phase = phase_of_largest(&z);
    let norm = z.norm();
    if norm == 0.0 {
        return z;
    }
    z.map(|c| c * phase.conj() / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn check_residuals(m: &DMatrix<f64>, pairs: &[EigenPair]) {
        let scale = m.norm().max(1.0);
        for p in pairs {
            assert!(p.residual(m) <= 1e-9 * scale, "residual {} for {}", p.residual(m), p.value);
            assert!((p.vector.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal() {
        let m = dmatrix![3.0, 0.0, 0.0; 0.0, -1.0, 0.0; 0.0, 0.0, 2.0];
        let pairs = eigen_decompose(&m).unwrap();
        let vals: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
        assert_eq!(vals, vec![3.0, 2.0, -1.0]);
        assert!(pairs.iter().all(|p| p.value.im == 0.0));
        check_residuals(&m, &pairs);
    }

    #[test]
    fn rotation_block_gives_conjugate_pair() {
        let m = dmatrix![0.0, 1.0; -1.0, 0.0];
        let pairs = eigen_decompose(&m).unwrap();
        assert!((pairs[0].value - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert_eq!(pairs[1].value, pairs[0].value.conj());
        check_residuals(&m, &pairs);
    }

    #[test]
    fn degenerate_symmetric_block() {
        // circulant with a doubly degenerate eigenvalue
        let m = dmatrix![-2.0, 1.0, 1.0; 1.0, -2.0, 1.0; 1.0, 1.0, -2.0];
        let pairs = eigen_decompose(&m).unwrap();
        check_residuals(&m, &pairs);
        assert!(pairs[0].value.norm() < 1e-12);
        let (a, b) = (&pairs[1].vector, &pairs[2].vector);
        let overlap = a.dotc(b).norm();
        assert!(overlap < 0.999, "degenerate pair returned parallel vectors");
    }

    #[test]
    fn random_nonsymmetric_matrices() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(7);
        for n in [2, 5, 10, 20] {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let pairs = eigen_decompose(&m).unwrap();
            assert_eq!(pairs.len(), n);
            check_residuals(&m, &pairs);
            let trace: Complex64 = pairs.iter().map(|p| p.value).sum();
            assert!((trace.re - m.trace()).abs() < 1e-10 && trace.im.abs() < 1e-10);
            for p in &pairs {
                assert!(pairs.iter().any(|q| q.value == p.value.conj()));
            }
            for w in pairs.windows(2) {
                assert!(w[0].value.re >= w[1].value.re);
            }
        }
    }
}
