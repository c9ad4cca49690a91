//! Closed-form results for the weak-coupling lattice (ζ = 0) and for two
//! and three particles.
//!
//! Everything here is dimensionless: distances in λ, forces in P_η,
//! coupling-matrix entries and eigenvalues in P_η·k, frequencies in ω_{2,0}.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// `sin(q x) / sin(x)` for integer `q`, continuous through the removable
/// singularities at `x = mπ`.
pub(crate) fn sin_ratio(q: i64, x: f64) -> f64 {
    if q == 0 {
        return 0.0;
    }
    let s = x.sin();
    if s.abs() > 1e-3 {
        return (q as f64 * x).sin() / s;
    }
    // Dirichlet form: sum of cos((q-1-2m) x), m = 0..q-1
    let n = q.unsigned_abs() as i64;
    let sum: f64 = (0..n).map(|m| (((n - 1 - 2 * m) as f64) * x).cos()).sum();
    q.signum() as f64 * sum
}

/// Selects the zero-force lattice constant `d_n = (2n − 1)λ/(2N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    pub n_particles: usize,
    pub spacing_index: usize,
}

impl LatticeSpec {
    pub fn new(n_particles: usize, spacing_index: usize) -> Result<Self> {
        if n_particles < 2 {
            return Err(Error::InvalidParameter("a lattice needs at least two particles".into()));
        }
        if spacing_index < 1 || spacing_index > n_particles {
            return Err(Error::InvalidParameter(format!(
                "lattice index n = {spacing_index} outside 1..={n_particles}"
            )));
        }
        Ok(Self { n_particles, spacing_index })
    }

    /// The widest sub-wavelength lattice, n = N.
    pub fn widest(n_particles: usize) -> Result<Self> {
        Self::new(n_particles, n_particles)
    }

    pub fn spacing(&self) -> f64 {
        (2 * self.spacing_index - 1) as f64 / (2 * self.n_particles) as f64
    }
}

pub fn lattice_zero_force_spacings(n_particles: usize) -> Vec<f64> {
    (1..=n_particles).map(|n| (2 * n - 1) as f64 / (2 * n_particles) as f64).collect()
}

/// Force on particle `j` (1-based) of an equidistant ζ = 0 array.
pub fn lattice_force_zeta0(n_particles: usize, spacing: f64, j: usize) -> f64 {
    let half = TWO_PI * spacing / 2.0;
    let n = n_particles as f64;
    let q = 2 * j as i64 - n_particles as i64 - 1;
    -(n * half).cos() * sin_ratio(q, half)
}

/// Intensity leaving either end of an equidistant ζ = 0 array (I_η units).
pub fn lattice_intensity_zeta0(n_particles: usize, spacing: f64) -> f64 {
    let r = sin_ratio(n_particles as i64, TWO_PI * spacing / 2.0);
    0.5 * r * r
}

/// Circulant coupling matrix of the n = N lattice.
pub fn lattice_coupling_matrix_zeta0(n_particles: usize) -> DMatrix<f64> {
    let n = n_particles as f64;
    let cot = 1.0 / (PI / (2.0 * n)).tan();
    DMatrix::from_fn(n_particles, n_particles, |j, l| {
        let off = (j as f64 - l as f64).abs();
        let diag = if j == l { cot } else { 0.0 };
        (off * PI / n).sin() - diag
    })
}

/// Closed-form phonon spectrum of a circulant lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DVector<Complex64>>,
    pub frequencies: Vec<f64>,
}

fn lattice_mode_ratio(n_particles: usize, nu: usize) -> f64 {
    let n = n_particles as f64;
    let m = (nu - 1) as f64;
    let cot = 1.0 / (PI / (2.0 * n)).tan();
    let s = (PI * m / n).sin();
    cot * s * s / ((PI / n).cos() - (TWO_PI * m / n).cos())
}

pub fn lattice_eigensystem_zeta0(n_particles: usize) -> ClosedFormSpectrum {
    let n = n_particles as f64;
    let eigenvalues: Vec<f64> = (1..=n_particles).map(|nu| -2.0 * lattice_mode_ratio(n_particles, nu)).collect();
    let eigenvectors = (1..=n_particles)
        .map(|nu| DVector::from_fn(n_particles, |j, _| Complex64::from_polar(1.0, TWO_PI * ((nu - 1) * j) as f64 / n)))
        .collect();
    ClosedFormSpectrum { frequencies: lattice_frequencies_zeta0(n_particles), eigenvalues, eigenvectors }
}

pub fn lattice_frequencies_zeta0(n_particles: usize) -> Vec<f64> {
    (1..=n_particles).map(|nu| lattice_mode_ratio(n_particles, nu).max(0.0).sqrt()).collect()
}

/// Large-N approximation of mode `nu` (≥ 2) of the n = N lattice.
pub fn lattice_frequency_asymptote(n_particles: usize, nu: usize) -> f64 {
    let m = nu as f64;
    2.0 * (m - 1.0) * (n_particles as f64 / (PI * (3.0 + 4.0 * m * (m - 2.0)))).sqrt()
}

/// Large-N eigenvalue of mode `nu` around the interior lattice `d_n`.
pub fn lattice_eigenvalue_small_spacing(spacing_index: usize, nu: usize) -> Result<f64> {
    let q = (2 * spacing_index) as f64 - 1.0;
    let p = 2.0 * (nu as f64 - 1.0);
    let den = p * p - q * q;
    if den == 0.0 {
        return Err(Error::Pole { formula: "small-spacing eigenvalue" });
    }
    Ok(2.0 * q * q / den)
}

fn two_particle_denominator(zeta: Complex64, spacing: f64) -> f64 {
    let kd = TWO_PI * spacing;
    let a = zeta.norm_sqr() + zeta.im;
    2.0 * a * (kd.cos() + 1.0) + 2.0 * zeta.re * kd.sin() + 1.0
}

fn loss_factor(zeta: Complex64) -> f64 {
    (Complex64::new(1.0, 0.0) - Complex64::i() * zeta).norm_sqr()
}

/// Force on the left particle of a pair; the right one feels the opposite.
pub fn two_particle_force(zeta: Complex64, spacing: f64) -> Result<f64> {
    let den = two_particle_denominator(zeta, spacing);
    if den.abs() < 1e-14 {
        return Err(Error::Pole { formula: "two-particle force" });
    }
    Ok(loss_factor(zeta) * (TWO_PI * spacing).cos() / den)
}

pub fn two_particle_coupling_matrix(zeta: Complex64, spacing: f64) -> Result<Matrix2<f64>> {
    let den = two_particle_denominator(zeta, spacing);
    if den.abs() < 1e-14 {
        return Err(Error::Pole { formula: "two-particle coupling matrix" });
    }
    let kd = TWO_PI * spacing;
    let a = zeta.norm_sqr() + zeta.im;
    let diag = loss_factor(zeta) * (kd.sin() * (2.0 * a + 1.0) + 2.0 * zeta.re) / (den * den);
    Ok(Matrix2::new(diag, -diag, -diag, diag))
}

/// Nonzero eigenvalue at the stable binding distance `d = (3/4 + n)λ`.
pub fn two_particle_binding_eigenvalue(zeta: Complex64) -> Result<f64> {
    let den = 1.0 + 2.0 * (zeta.norm_sqr() + zeta.im - zeta.re);
    if den.abs() < 1e-14 {
        return Err(Error::Pole { formula: "two-particle binding eigenvalue" });
    }
    Ok(-2.0 * loss_factor(zeta) / den)
}

/// Relative-motion frequency of a bound pair.
pub fn two_particle_frequency(zeta: Complex64) -> Result<f64> {
    let lambda = two_particle_binding_eigenvalue(zeta)?;
    if lambda > 0.0 {
        return Err(Error::InvalidParameter(format!(
            "binding distance is unstable for zeta = {zeta} (eigenvalue {lambda})"
        )));
    }
    // ω² m = −λ with λ in P_η k and ω_{2,0}² m = 2 P_η k
    Ok((-lambda / 2.0).sqrt())
}

/// First-order-in-ζ forces `[F_1, F_2, F_3]` on an equidistant trio.
/// Only meaningful for small real ζ.
pub fn three_particle_force_expansion(zeta: f64, spacing: f64) -> [f64; 3] {
    let kd = TWO_PI * spacing;
    let f1 = kd.cos() + (2.0 * kd).cos() - zeta * (2.0 * (2.0 * kd).sin() + (3.0 * kd).sin() + (4.0 * kd).sin());
    [f1, 0.0, -f1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sin_ratio_is_continuous() {
        for q in [-3i64, -1, 1, 2, 5, 10] {
            for x in [0.0, PI, -PI, 2.0 * PI] {
                let near = sin_ratio(q, x + 1e-7);
                assert!((sin_ratio(q, x) - near).abs() < 1e-5 * (q.abs() as f64).powi(3));
            }
            let x = 0.37;
            assert_relative_eq!(sin_ratio(q, x), (q as f64 * x).sin() / x.sin(), max_relative = 1e-12);
            let y = 1e-4;
            assert_relative_eq!(sin_ratio(q, y), (q as f64 * y).sin() / y.sin(), max_relative = 1e-10);
        }
    }

    #[test]
    fn zero_force_spacings() {
        let s = lattice_zero_force_spacings(10);
        assert!(s.contains(&(19.0 / 20.0)) && s.contains(&(17.0 / 20.0)));
        assert_eq!(lattice_zero_force_spacings(2), vec![0.25, 0.75]);
        for n in 2..=12 {
            for d in lattice_zero_force_spacings(n) {
                for j in 1..=n {
                    assert!(lattice_force_zeta0(n, d, j).abs() < 1e-12);
                }
            }
        }
        assert!(LatticeSpec::new(5, 0).is_err());
        assert!(LatticeSpec::new(5, 6).is_err());
        assert_relative_eq!(LatticeSpec::widest(10).unwrap().spacing(), 0.95);
    }

    #[test]
    fn lattice_force_values() {
        assert_relative_eq!(lattice_force_zeta0(2, 1.0, 1), 1.0, epsilon = 1e-12);
        assert!(lattice_force_zeta0(3, 5.0 / 6.0, 1).abs() < 1e-15);
        for n in 2..8 {
            for j in 1..=n {
                let d = 0.61;
                assert_relative_eq!(
                    lattice_force_zeta0(n, d, j),
                    -lattice_force_zeta0(n, d, n + 1 - j),
                    epsilon = 1e-13
                );
            }
        }
    }

    #[test]
    fn lattice_intensity_values() {
        let s = (PI / 20.0).sin();
        assert_relative_eq!(lattice_intensity_zeta0(10, 0.95), 0.5 / (s * s), max_relative = 1e-13);
        assert_relative_eq!(lattice_intensity_zeta0(1, 0.3), 0.5);
        assert!(lattice_intensity_zeta0(4, 0.25).abs() < 1e-25);
        assert_relative_eq!(lattice_intensity_zeta0(4, 1.0), 8.0, max_relative = 1e-12);
    }

    #[test]
    fn circulant_coupling_matrix() {
        let d2 = lattice_coupling_matrix_zeta0(2);
        assert_relative_eq!(d2, nalgebra::dmatrix![-1.0, 1.0; 1.0, -1.0], epsilon = 1e-14);
        for n in 2..=20 {
            let d = lattice_coupling_matrix_zeta0(n);
            for j in 0..n {
                assert!(d.row(j).sum().abs() < 1e-12);
            }
            assert_relative_eq!(d.clone(), d.transpose());
        }
    }

    #[test]
    fn eigensystem_satisfies_circulant_matrix() {
        for n in 2..=20 {
            let d = lattice_coupling_matrix_zeta0(n).map(|x| Complex64::new(x, 0.0));
            let spec = lattice_eigensystem_zeta0(n);
            assert_eq!(spec.eigenvalues[0], 0.0);
            assert!(spec.eigenvalues[1..].iter().all(|&l| l < 0.0));
            for (lambda, z) in spec.eigenvalues.iter().zip(&spec.eigenvectors) {
                let r = &d * z - z * Complex64::new(*lambda, 0.0);
                assert!(r.norm() < 1e-10 * z.norm(), "n={n} lambda={lambda}");
            }
        }
    }

    #[test]
    fn eigenvalue_examples() {
        let three = lattice_eigensystem_zeta0(3);
        let want = -1.5 * 3.0_f64.sqrt();
        assert_relative_eq!(three.eigenvalues[1], want, max_relative = 1e-13);
        assert_relative_eq!(three.eigenvalues[2], want, max_relative = 1e-13);
        assert_relative_eq!(lattice_eigensystem_zeta0(2).eigenvalues[1], -2.0, max_relative = 1e-13);
    }

    #[test]
    fn frequency_shape() {
        let w = lattice_frequencies_zeta0(10);
        assert_eq!(w[0], 0.0);
        for mid in &w[2..9] {
            assert!(w[1] > *mid && w[9] > *mid);
        }
        assert_relative_eq!(lattice_frequencies_zeta0(2)[1], 1.0, max_relative = 1e-13);
        // ω² = −λ/2 in these units
        let spec = lattice_eigensystem_zeta0(7);
        for (l, w) in spec.eigenvalues.iter().zip(&spec.frequencies) {
            assert_relative_eq!(w * w, -l / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn asymptote() {
        let exact = lattice_frequencies_zeta0(50)[1];
        let approx = lattice_frequency_asymptote(50, 2);
        assert!((approx / exact - 1.0).abs() < 0.1);
        assert_relative_eq!(approx, 2.0 * (50.0 / (3.0 * PI)).sqrt(), max_relative = 1e-14);
        for n in [5, 13, 40] {
            assert_relative_eq!(
                lattice_frequency_asymptote(4 * n, 3) / lattice_frequency_asymptote(n, 3),
                2.0,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn small_spacing_eigenvalues() {
        assert_relative_eq!(lattice_eigenvalue_small_spacing(1, 1).unwrap(), -2.0);
        for n in 1..10 {
            let q = (2 * n - 1) as f64;
            let nu = (q / 2.0).ceil() as usize + 1;
            assert!(lattice_eigenvalue_small_spacing(n, nu).unwrap() > 0.0);
            assert!(lattice_eigenvalue_small_spacing(n, nu - 1).unwrap() < 0.0);
        }
    }

    #[test]
    fn two_particle_closed_forms() {
        let z0 = Complex64::new(0.0, 0.0);
        assert_relative_eq!(two_particle_force(z0, 1.0).unwrap(), 1.0);
        for zeta in [z0, Complex64::new(0.4, 0.3), Complex64::new(0.0, 10.0)] {
            assert!(two_particle_force(zeta, 0.75).unwrap().abs() < 1e-14);
            assert!(two_particle_force(zeta, 0.25).unwrap().abs() < 1e-14);
        }
        let m = two_particle_coupling_matrix(z0, 0.75).unwrap();
        assert_relative_eq!(m, Matrix2::new(-1.0, 1.0, 1.0, -1.0), epsilon = 1e-14);
        assert_relative_eq!(two_particle_binding_eigenvalue(z0).unwrap(), -2.0);
        assert_relative_eq!(two_particle_frequency(z0).unwrap(), 1.0);
    }

    #[test]
    fn binding_eigenvalue_matches_coupling_matrix() {
        for zeta in [Complex64::new(0.3, 0.0), Complex64::new(1.0, 1.0) / 9.0, Complex64::new(-0.7, 0.4)] {
            let m = two_particle_coupling_matrix(zeta, 0.75).unwrap();
            let lambda = two_particle_binding_eigenvalue(zeta).unwrap();
            // eigenvalues of [[a, -a], [-a, a]] are 0 and 2a
            assert_relative_eq!(2.0 * m[(0, 0)], lambda, max_relative = 1e-12);
            let w = two_particle_frequency(zeta).unwrap();
            assert_relative_eq!(w * w * 2.0, -lambda, max_relative = 1e-12);
        }
    }

    #[test]
    fn large_real_coupling_halves_the_eigenvalue() {
        let l = two_particle_binding_eigenvalue(Complex64::new(1e4, 0.0)).unwrap();
        assert_relative_eq!(l, -1.0, max_relative = 1e-3);
    }

    #[test]
    fn three_particle_expansion_at_zero_coupling() {
        let f = three_particle_force_expansion(0.0, 5.0 / 6.0);
        assert!(f[0].abs() < 1e-14 && f[1] == 0.0);
    }
}
