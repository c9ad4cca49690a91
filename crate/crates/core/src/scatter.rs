//! Transfer-matrix description of point scatterers in a single-mode
//! waveguide under transverse pumping.
//!
//! Amplitude convention: particle indices grow to the right. On the left of
//! particle `j` the field consists of `A_j` (travelling left, away from the
//! particle) and `B_j` (arriving from the left); on the right side `C_j`
//! arrives from the right and `D_j` leaves to the right. No light is injected
//! along the guide, so `B_1 = C_N = 0`. Each scatterer maps its right-hand
//! triple `(C, D, η)` to its left-hand triple `(A, B, η)`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParticleConfiguration, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// 3×3 complex matrix acting on `(left-moving, right-moving, pump)` triples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix(Matrix3<Complex64>);

impl TransferMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn entries(&self) -> &Matrix3<Complex64> {
        &self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn apply(&self, v: &Vector3<Complex64>) -> Vector3<Complex64> {
        self.0 * v
    }

    /// The pump channel is never modified: third row is exactly `(0, 0, 1)`.
    pub fn preserves_pump(&self) -> bool {
        self.0[(2, 0)] == ZERO && self.0[(2, 1)] == ZERO && self.0[(2, 2)] == ONE
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, rhs: TransferMatrix) -> TransferMatrix {
        let mut m = self.0 * rhs.0;
        // exact zeros/ones survive the product analytically; pin them so that
        // rounding in the upper rows cannot leak into the pump row
        m[(2, 0)] = ZERO;
        m[(2, 1)] = ZERO;
        m[(2, 2)] = ONE;
        TransferMatrix(m)
    }
}

/// Single-scatterer matrix mapping `(C, D, η)` to `(A, B, η)`.
pub fn beam_splitter_matrix(zeta: Complex64) -> Result<TransferMatrix> {
    let one_minus = ONE - I * zeta;
    if one_minus == ZERO {
        return Err(Error::SingularCoupling { zeta });
    }
    let iz = I * zeta;
    let s = FRAC_1_SQRT_2;
    Ok(TransferMatrix(Matrix3::new(ONE + iz, iz, one_minus * s, -iz, one_minus, (iz - ONE) * s, ZERO, ZERO, ONE)))
}

/// Free propagation across a gap `distance`: `diag(e^{ikd}, e^{-ikd}, 1)`.
pub fn propagation_matrix(distance: f64, k: f64) -> TransferMatrix {
    let phase = Complex64::from_polar(1.0, k * distance);
    TransferMatrix(Matrix3::new(phase, ZERO, ZERO, ZERO, phase.conj(), ZERO, ZERO, ZERO, ONE))
}

/// Ordered product `M P(d_1) M P(d_2) ⋯ P(d_{N-1}) M` mapping the right-hand
/// triple of the last particle to the left-hand triple of the first.
pub fn total_transfer_matrix(config: &ParticleConfiguration, params: &SystemParams) -> Result<TransferMatrix> {
    let m = beam_splitter_matrix(params.zeta)?;
    let k = params.wavenumber();
    let mut total = m;
    for d in config.spacings() {
        total = total * propagation_matrix(d, k) * m;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

/// Self-consistent field amplitudes around every particle.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub amplitudes: Vec<Amplitudes>,
    pub eta: f64,
    positions: Vec<f64>,
    k: f64,
}

impl FieldState {
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Largest relative violation of the per-particle scattering relation,
    /// the boundary conditions and the gap propagation relations.
    pub fn max_residual(&self, zeta: Complex64) -> f64 {
        let Ok(m) = beam_splitter_matrix(zeta) else {
            return f64::INFINITY;
        };
        let eta = Complex64::new(self.eta, 0.0);
        let scale = self
            .amplitudes
            .iter()
            .flat_map(|a| [a.a, a.b, a.c, a.d])
            .map(|z| z.norm())
            .fold(self.eta.abs(), f64::max)
            .max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for amp in &self.amplitudes {
            let left = m.apply(&Vector3::new(amp.c, amp.d, eta));
            worst = worst.max((left[0] - amp.a).norm()).max((left[1] - amp.b).norm());
        }
        let n = self.amplitudes.len();
        worst = worst.max(self.amplitudes[0].b.norm()).max(self.amplitudes[n - 1].c.norm());
        for j in 0..n.saturating_sub(1) {
            let phase = Complex64::from_polar(1.0, self.k * (self.positions[j + 1] - self.positions[j]));
            let (l, r) = (&self.amplitudes[j], &self.amplitudes[j + 1]);
            worst = worst.max((l.c - r.a * phase).norm()).max((r.b - l.d * phase).norm());
        }
        worst / scale
    }

    /// Complex field at `x`, taking the left-gap limit exactly at a particle.
    pub fn field_at(&self, x: f64) -> Complex64 {
        let k = self.k;
        match self.positions.iter().position(|&xj| x <= xj) {
            Some(j) => {
                let xj = self.positions[j];
                let amp = &self.amplitudes[j];
                amp.b * Complex64::from_polar(1.0, k * (x - xj)) + amp.a * Complex64::from_polar(1.0, k * (xj - x))
            }
            None => {
                let n = self.positions.len() - 1;
                let xn = self.positions[n];
                let amp = &self.amplitudes[n];
                amp.d * Complex64::from_polar(1.0, k * (x - xn)) + amp.c * Complex64::from_polar(1.0, k * (xn - x))
            }
        }
    }

    /// Intensity `|E|²/2` at `x` in units of the pump intensity `I_η = η²/2`.
    pub fn intensity_at(&self, x: f64) -> f64 {
        let raw = 0.5 * self.field_at(x).norm_sqr();
        let unit = 0.5 * self.eta * self.eta;
        if unit > 0.0 {
            raw / unit
        } else {
            0.0
        }
    }

    /// Intensities leaving the array to the left and to the right (I_η units).
    pub fn end_intensities(&self) -> (f64, f64) {
        let n = self.amplitudes.len();
        let unit = 0.5 * self.eta * self.eta;
        if unit == 0.0 {
            return (0.0, 0.0);
        }
        let left = 0.5 * self.amplitudes[0].a.norm_sqr() / unit;
        let right = 0.5 * self.amplitudes[n - 1].d.norm_sqr() / unit;
        (left, right)
    }

    /// Stress-tensor force `(|A|² + |B|² − |C|² − |D|²)/2` on every particle.
    pub fn forces(&self) -> ForceVector {
        ForceVector(
            self.amplitudes
                .iter()
                .map(|a| 0.5 * (a.a.norm_sqr() + a.b.norm_sqr() - a.c.norm_sqr() - a.d.norm_sqr()))
                .collect(),
        )
    }
}

/// Per-particle optical forces (ε0 = 1); positive values push towards +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceVector(pub Vec<f64>);

impl ForceVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, f| m.max(f.abs()))
    }

    /// Forces divided by the pump pressure P_η.
    pub fn in_pressure_units(&self, params: &SystemParams) -> Vec<f64> {
        let p = params.pump_pressure();
        self.0.iter().map(|f| f / p).collect()
    }
}

/// Solves the two-point boundary problem for the amplitudes at `positions`.
///
/// Positions are used in the given order; coincident particles are allowed
/// (zero propagation phase).
pub fn solve_positions(positions: &[f64], params: &SystemParams) -> Result<FieldState> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no particles".into()));
    }
    let m = beam_splitter_matrix(params.zeta)?;
    let k = params.wavenumber();
    let eta = Complex64::new(params.eta, 0.0);

    // Every amplitude is affine in the unknown D_N: track the response to
    // D_N = 1 (no pump) and to the pump alone (D_N = 0), right to left.
    let mut unit = vec![[Vector3::zeros(); 2]; n];
    let mut pump = vec![[Vector3::zeros(); 2]; n];
    let mut right_unit = Vector3::new(ZERO, ONE, ZERO);
    let mut right_pump = Vector3::new(ZERO, ZERO, eta);
    for j in (0..n).rev() {
        let left_unit = m.apply(&right_unit);
        let left_pump = m.apply(&right_pump);
        unit[j] = [left_unit, right_unit];
        pump[j] = [left_pump, right_pump];
        if j > 0 {
            let p = propagation_matrix(positions[j] - positions[j - 1], k);
            right_unit = p.apply(&left_unit);
            right_pump = p.apply(&left_pump);
        }
    }

    // B_1 = 0 fixes D_N.
    let coeff = unit[0][0][1];
    let scale = unit.iter().map(|u| u[0].norm().max(u[1].norm())).fold(1.0, f64::max);
    if coeff.norm() <= 1e-14 * scale {
        return Err(Error::SingularSystem { positions: positions.to_vec() });
    }
    let d_last = -pump[0][0][1] / coeff;

    let amplitudes = (0..n)
        .map(|j| {
            let left = unit[j][0] * d_last + pump[j][0];
            let right = unit[j][1] * d_last + pump[j][1];
            Amplitudes { a: left[0], b: left[1], c: right[0], d: right[1] }
        })
        .collect::<Vec<_>>();

    let mut state = FieldState { amplitudes, eta: params.eta, positions: positions.to_vec(), k };
    // exact boundary values
    state.amplitudes[0].b = ZERO;
    state.amplitudes[n - 1].c = ZERO;
    Ok(state)
}

pub fn solve_fields(config: &ParticleConfiguration, params: &SystemParams) -> Result<FieldState> {
    solve_positions(config.positions(), params)
}

pub fn forces_from_fields(fields: &FieldState) -> ForceVector {
    fields.forces()
}

/// Forces on particles given in index order (no ordering check).
pub fn forces_at(positions: &[f64], params: &SystemParams) -> Result<ForceVector> {
    Ok(solve_positions(positions, params)?.forces())
}

pub fn force_profile(config: &ParticleConfiguration, params: &SystemParams) -> Result<ForceVector> {
    forces_at(config.positions(), params)
}

/// Forces for particles in arbitrary order: the field is solved for the
/// spatially sorted arrangement and the forces are handed back to the
/// original indices. Identical point particles can pass each other.
pub fn forces_unordered(positions: &[f64], params: &SystemParams) -> Result<ForceVector> {
    if positions.windows(2).all(|w| w[1] >= w[0]) {
        return forces_at(positions, params);
    }
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| positions[i]).collect();
    let f = forces_at(&sorted, params)?;
    let mut out = vec![0.0; positions.len()];
    for (slot, &i) in order.iter().enumerate() {
        out[i] = f.0[slot];
    }
    Ok(ForceVector(out))
}

/// Intensity samples (I_η units) on `grid` for the given configuration.
pub fn sample_intensity(config: &ParticleConfiguration, params: &SystemParams, grid: &[f64]) -> Result<Vec<f64>> {
    let fields = solve_fields(config, params)?;
    Ok(grid.iter().map(|&x| fields.intensity_at(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, SQRT_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn beam_splitter_at_zero_coupling() {
        let m = beam_splitter_matrix(c(0.0, 0.0)).unwrap();
        let s = FRAC_1_SQRT_2;
        let expected = Matrix3::new(ONE, ZERO, c(s, 0.0), ZERO, ONE, c(-s, 0.0), ZERO, ZERO, ONE);
        assert_eq!(*m.entries(), expected);
    }

    #[test]
    fn beam_splitter_entries_for_real_coupling() {
        let m = beam_splitter_matrix(c(1.0 / 9.0, 0.0)).unwrap();
        assert_relative_eq!(m.entry(0, 0).re, 1.0);
        assert_relative_eq!(m.entry(0, 0).im, 1.0 / 9.0);
        assert_relative_eq!(m.entry(0, 2).re, FRAC_1_SQRT_2);
        assert_relative_eq!(m.entry(0, 2).im, -FRAC_1_SQRT_2 / 9.0);
        assert!(m.preserves_pump());
    }

    #[test]
    fn beam_splitter_matches_t_r_form() {
        let zeta = c(0.3, -0.7);
        let t = ONE / (ONE - I * zeta);
        let r = I * zeta / (ONE - I * zeta);
        let m = beam_splitter_matrix(zeta).unwrap();
        let s = FRAC_1_SQRT_2;
        let want = [[(t * t - r * r) / t, r / t, (t - r) * s / t], [-r / t, ONE / t, -s / t]];
        for (row, vals) in want.iter().enumerate() {
            for (col, v) in vals.iter().enumerate() {
                assert!((m.entry(row, col) - v).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn transmission_pole_only_at_minus_i() {
        assert_eq!(beam_splitter_matrix(c(0.0, -1.0)), Err(Error::SingularCoupling { zeta: c(0.0, -1.0) }));
        let m = beam_splitter_matrix(c(0.0, 1.0)).unwrap();
        assert!(m.entry(0, 0).norm() < 1e-15);
    }

    #[test]
    fn propagation_properties() {
        let k = 2.0 * PI;
        assert_eq!(propagation_matrix(0.0, k), TransferMatrix::identity());
        let half = propagation_matrix(0.5, k);
        assert!((half.entry(0, 0) + ONE).norm() < 1e-15);
        assert!((half.entry(1, 1) + ONE).norm() < 1e-15);
        let prod = propagation_matrix(0.37, k) * propagation_matrix(-0.37, k);
        for r in 0..3 {
            for col in 0..3 {
                let want = if r == col { ONE } else { ZERO };
                assert!((prod.entry(r, col) - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn total_transfer_matrix_small_cases() {
        let p = SystemParams::new(1, c(0.2, 0.1));
        let single = ParticleConfiguration::new(vec![0.3]).unwrap();
        assert_eq!(total_transfer_matrix(&single, &p).unwrap(), beam_splitter_matrix(p.zeta).unwrap());

        // ζ = 0, N = 2: by hand, M P(d) M with M = [[1,0,s],[0,1,-s],[0,0,1]]
        // gives [[e, 0, s(e+1)], [0, 1/e, -s(1/e+1)], [0, 0, 1]], e = e^{ikd}.
        let d = 0.41;
        let p0 = SystemParams::new(2, c(0.0, 0.0));
        let pair = ParticleConfiguration::equidistant(2, d).unwrap();
        let t = total_transfer_matrix(&pair, &p0).unwrap();
        let e = Complex64::from_polar(1.0, 2.0 * PI * d);
        let s = FRAC_1_SQRT_2;
        let want = Matrix3::new(e, ZERO, (e + ONE) * s, ZERO, e.conj(), -(e.conj() + ONE) * s, ZERO, ZERO, ONE);
        assert!((t.entries() - want).norm() < 1e-14);

        let tri = ParticleConfiguration::equidistant(3, 5.0 / 6.0).unwrap();
        assert!(total_transfer_matrix(&tri, &p0).unwrap().preserves_pump());
    }

    #[test]
    fn single_particle_fields() {
        for zeta in [c(0.0, 0.0), c(0.4, 0.2), c(-1.3, 2.0)] {
            let p = SystemParams::new(1, zeta);
            let f = solve_positions(&[0.0], &p).unwrap();
            let a = f.amplitudes[0];
            assert!((a.a - ONE).norm() < 1e-14, "{zeta}: {a:?}");
            assert!((a.d - ONE).norm() < 1e-14);
            assert_eq!(a.b, ZERO);
            assert_eq!(a.c, ZERO);
            assert!(f.forces().0[0].abs() < 1e-14);
        }
    }

    #[test]
    fn two_particle_fields_at_zero_coupling() {
        let p = SystemParams::new(2, c(0.0, 0.0));
        let d = 0.63;
        let f = solve_positions(&[0.0, d], &p).unwrap();
        let h = c(1.0, 0.0);
        let e = Complex64::from_polar(1.0, 2.0 * PI * d);
        assert!((f.amplitudes[0].d - h).norm() < 1e-14);
        assert!((f.amplitudes[1].a - h).norm() < 1e-14);
        assert!((f.amplitudes[0].c - e).norm() < 1e-14);
        assert!((f.amplitudes[0].a - (h + e)).norm() < 1e-14);
    }

    #[test]
    fn solved_state_satisfies_all_relations() {
        let p = SystemParams::new(6, c(0.3, 0.25));
        let x = [0.0, 0.8, 1.75, 2.4, 3.31, 4.2];
        let f = solve_positions(&x, &p).unwrap();
        assert!(f.max_residual(p.zeta) < 1e-12);
    }

    #[test]
    fn two_particle_force_signs() {
        let p = SystemParams::default().with_n_particles(2);
        let f = forces_at(&[0.0, 1.0], &p).unwrap();
        assert_relative_eq!(f.0[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.0[1], -1.0, epsilon = 1e-12);
        for zeta in [c(0.0, 0.0), c(1.0 / 9.0, 0.0), c(0.0, 10.0)] {
            let p = SystemParams::new(2, zeta);
            for d in [0.25, 0.75] {
                let f = forces_at(&[0.0, d], &p).unwrap();
                assert!(f.max_abs() < 1e-12, "zeta={zeta} d={d}: {:?}", f.0);
            }
        }
    }

    #[test]
    fn lattice_zero_force() {
        let p = SystemParams::new(10, c(0.0, 0.0));
        let cfg = ParticleConfiguration::equidistant(10, 0.95).unwrap();
        assert!(force_profile(&cfg, &p).unwrap().max_abs() < 1e-10);
        let p3 = SystemParams::new(3, c(0.0, 0.0));
        let cfg3 = ParticleConfiguration::equidistant(3, 5.0 / 6.0).unwrap();
        assert!(force_profile(&cfg3, &p3).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn intensity_outside_single_particle() {
        let p = SystemParams::new(1, c(0.5, 0.1));
        let cfg = ParticleConfiguration::new(vec![0.0]).unwrap();
        let i = sample_intensity(&cfg, &p, &[-7.3, -0.2, 0.0, 3.0]).unwrap();
        for v in i {
            assert_relative_eq!(v, 0.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn intensity_is_continuous_across_gaps() {
        let p = SystemParams::new(3, c(0.2, 0.05));
        let f = solve_positions(&[0.0, 0.9, 1.7], &p).unwrap();
        // the field is continuous at a scatterer only when no reflection/pump
        // is present, so compare inside a gap against the explicit gap formula
        let x = 0.4;
        let a1 = &f.amplitudes;
        let k = 2.0 * PI;
        let want = a1[0].d * Complex64::from_polar(1.0, k * x) + a1[1].a * Complex64::from_polar(1.0, k * (0.9 - x));
        assert!((f.field_at(x) - want).norm() < 1e-13);
        assert!(f.intensity_at(0.9).is_finite());
    }

    #[test]
    fn unordered_forces_follow_their_particles() {
        let p = SystemParams::new(3, c(0.1, 0.0));
        let sorted = forces_at(&[0.0, 0.8, 1.7], &p).unwrap();
        let shuffled = forces_unordered(&[1.7, 0.0, 0.8], &p).unwrap();
        assert_eq!(shuffled.0, vec![sorted.0[2], sorted.0[0], sorted.0[1]]);
    }

    #[test]
    fn end_intensity_of_single_emitter() {
        let p = SystemParams::new(1, c(0.0, 0.0)).with_eta(SQRT_2);
        let f = solve_positions(&[0.0], &p).unwrap();
        let (l, r) = f.end_intensities();
        assert_relative_eq!(l, 0.5, epsilon = 1e-14);
        assert_relative_eq!(r, 0.5, epsilon = 1e-14);
    }
}
