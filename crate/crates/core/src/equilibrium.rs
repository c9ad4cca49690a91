//! Zero-force configurations.
//!
//! Forces are invariant under rigid translation, so the Jacobian is
//! singular along the uniform displacement. Newton steps are therefore taken
//! in the N − 1 gap coordinates (a least-squares Gauss–Newton step, since
//! the total force need not vanish away from equilibrium) with the center of
//! mass pinned to the initial guess.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::params::{ParticleConfiguration, SystemParams};
use crate::scatter::forces_at;
use crate::stability::{force_jacobian, DEFAULT_DELTA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Newton,
    Relaxation,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    /// Backtracking could not produce an ordered iterate that lowers the residual.
    LineSearchFailed,
    OrderingViolation,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub configuration: ParticleConfiguration,
    /// Max |F_j| in P_η units.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    /// Target max |F_j| in P_η units.
    pub tolerance: f64,
    pub max_iter: usize,
    pub delta: f64,
    /// Pseudo-friction and time budget of the relaxation fallback.
    pub relax_friction: f64,
    pub relax_t_max: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iter: 50, delta: DEFAULT_DELTA, relax_friction: 1.0, relax_t_max: 50.0 }
    }
}

fn residual_of(positions: &[f64], params: &SystemParams) -> Result<(DVector<f64>, f64)> {
    let f = forces_at(positions, params)?;
    let p = params.pump_pressure();
    let max = f.max_abs() / p;
    Ok((DVector::from_vec(f.0), max))
}

fn positions_from(com: f64, gaps: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(gaps.len() + 1);
    x.push(0.0);
    let mut acc = 0.0;
    for g in gaps {
        acc += g;
        x.push(acc);
    }
    let shift = com - x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v += shift);
    x
}

/// Newton iteration in gap coordinates.
pub fn find_equilibrium(
    initial: &ParticleConfiguration,
    params: &SystemParams,
    tolerance: f64,
    max_iter: usize,
) -> Result<EquilibriumResult> {
    newton(initial, params, tolerance, max_iter, DEFAULT_DELTA)
}

fn newton(
    initial: &ParticleConfiguration,
    params: &SystemParams,
    tolerance: f64,
    max_iter: usize,
    delta: f64,
) -> Result<EquilibriumResult> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tolerance}")));
    }
    if !initial.is_ordered() {
        return Err(Error::InvalidParameter("initial configuration is not ordered".into()));
    }
    let n = initial.len();
    let com = initial.center_of_mass();
    let mut gaps = initial.spacings();
    let mut x = positions_from(com, &gaps);
    let (mut force, mut residual) = residual_of(&x, params)?;
    let finish = |x: Vec<f64>, residual: f64, iterations: usize, status: Status| EquilibriumResult {
        configuration: ParticleConfiguration::from_positions_unchecked(x),
        residual,
        iterations,
        converged: status == Status::Converged,
        method: Method::Newton,
        status,
    };
    if n == 1 || residual <= tolerance {
        return Ok(finish(x, residual, 0, Status::Converged));
    }

    for iter in 1..=max_iter {
        let jac = force_jacobian(&x, params, delta, Execution::Sequential)?;
        // ∂F_j/∂gap_m: widening gap m moves every particle right of it
        let mut jg = DMatrix::zeros(n, n - 1);
        for m in (0..n - 1).rev() {
            let mut col = jac.column(m + 1).into_owned();
            if m + 1 < n - 1 {
                col += jg.column(m + 1);
            }
            jg.set_column(m, &col);
        }
        let step = jg
            .svd(true, true)
            .solve(&(-&force), 1e-12 * jac.abs().max())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;

        let norm0 = force.norm();
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut ordered_seen = false;
        for _ in 0..40 {
            let trial: Vec<f64> = gaps.iter().zip(step.iter()).map(|(g, s)| g + alpha * s).collect();
            if trial.iter().all(|&g| g > 0.0) {
                ordered_seen = true;
                let xt = positions_from(com, &trial);
                let (ft, rt) = residual_of(&xt, params)?;
                if ft.norm() < (1.0 - 1e-4 * alpha) * norm0 || rt <= tolerance {
                    accepted = Some((trial, xt, ft, rt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((g, xt, ft, rt)) = accepted else {
            let status = if ordered_seen { Status::LineSearchFailed } else { Status::OrderingViolation };
            return Ok(finish(x, residual, iter, status));
        };
        gaps = g;
        x = xt;
        force = ft;
        residual = rt;
        if residual <= tolerance {
            return Ok(finish(x, residual, iter, Status::Converged));
        }
    }
    Ok(finish(x, residual, max_iter, Status::MaxIterations))
}

/// Overdamped flow `ẋ_j = F_j / μ_pseudo` until max |F_j| ≤ tolerance·P_η
/// or `t_max` (in units of the pseudo time).
pub fn relax_to_equilibrium(
    initial: &ParticleConfiguration,
    params: &SystemParams,
    pseudo_friction: f64,
    t_max: f64,
    tolerance: f64,
) -> Result<EquilibriumResult> {
    if !(pseudo_friction > 0.0) {
        return Err(Error::InvalidParameter("pseudo friction must be positive".into()));
    }
    let com = initial.center_of_mass();
    let mut x = initial.positions().to_vec();
    let n = x.len();
    let rate = |x: &[f64]| -> Result<Vec<f64>> {
        Ok(forces_at(x, params)?.0.into_iter().map(|f| f / pseudo_friction).collect())
    };
    let p = params.pump_pressure();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut dt = 0.0;
    let status = loop {
        let f = forces_at(&x, params)?;
        let residual = f.max_abs() / p;
        if residual <= tolerance {
            break Status::Converged;
        }
        if t >= t_max {
            break Status::Timeout;
        }
        if steps.is_multiple_of(50) {
            // RK4 is stable for |λ| dt < 2.78; Gershgorin bound on the stiffness
            let jac = force_jacobian(&x, params, DEFAULT_DELTA, Execution::Sequential)?;
            let stiff = (0..n).map(|j| jac.row(j).abs().sum()).fold(f64::MIN_POSITIVE, f64::max);
            dt = 1.0 * pseudo_friction / stiff;
        }
        let h = dt.min(t_max - t).max(1e-300);
        let k1 = rate(&x)?;
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
        let k2 = rate(&x2)?;
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
        let k3 = rate(&x3)?;
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
        let k4 = rate(&x4)?;
        for j in 0..n {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        t += h;
        steps += 1;
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            break Status::OrderingViolation;
        }
    };
    let shift = com - x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v += shift);
    let residual = forces_at(&x, params)?.max_abs() / p;
    Ok(EquilibriumResult {
        configuration: ParticleConfiguration::from_positions_unchecked(x),
        residual,
        iterations: steps,
        converged: status == Status::Converged,
        method: Method::Relaxation,
        status,
    })
}

/// Newton first; if it fails, relax towards a stable configuration and
/// polish the result with Newton.
pub fn solve_equilibrium(
    initial: &ParticleConfiguration,
    params: &SystemParams,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumResult> {
    let first = newton(initial, params, opts.tolerance, opts.max_iter, opts.delta)?;
    if first.converged {
        return Ok(first);
    }
    let relaxed =
        relax_to_equilibrium(initial, params, opts.relax_friction, opts.relax_t_max, opts.tolerance.max(1e-6))?;
    if relaxed.status == Status::OrderingViolation {
        return Ok(first);
    }
    let mut polished = newton(&relaxed.configuration, params, opts.tolerance, opts.max_iter, opts.delta)?;
    polished.iterations += first.iterations + relaxed.iterations;
    polished.method = Method::Hybrid;
    if polished.converged || polished.residual < first.residual {
        Ok(polished)
    } else {
        Ok(first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::lattice_zero_force_spacings;
    use num_complex::Complex64;

    fn zeta0(n: usize) -> SystemParams {
        SystemParams::new(n, Complex64::new(0.0, 0.0))
    }

    #[test]
    fn lattice_from_nearby_seed() {
        let init = ParticleConfiguration::equidistant(10, 0.94).unwrap();
        let r = find_equilibrium(&init, &zeta0(10), 1e-10, 50).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(r.residual <= 1e-10);
        for g in r.configuration.spacings() {
            assert!((g - 0.95).abs() < 1e-8, "{g}");
        }
        assert!((r.configuration.center_of_mass() - init.center_of_mass()).abs() < 1e-12);
    }

    #[test]
    fn newton_basins_of_every_lattice() {
        for n in 2..=6 {
            for d in lattice_zero_force_spacings(n) {
                // at d = λ/2 (odd N) the coupling matrix vanishes identically and
                // the lattice sits inside a continuum of equilibria
                if (d - 0.5).abs() < 1e-12 {
                    continue;
                }
                let init = ParticleConfiguration::equidistant(n, d + 0.004).unwrap();
                let r = find_equilibrium(&init, &zeta0(n), 1e-10, 50).unwrap();
                assert!(r.converged, "n={n} d={d}: {r:?}");
                for g in r.configuration.spacings() {
                    assert!((g - d).abs() < 1e-8, "n={n} d={d} got {g}");
                }
            }
        }
    }

    #[test]
    fn single_particle_is_trivially_balanced() {
        let init = ParticleConfiguration::new(vec![0.3]).unwrap();
        let r = find_equilibrium(&init, &zeta0(1), 1e-10, 5).unwrap();
        assert!(r.converged && r.iterations == 0);
    }

    #[test]
    fn relaxation_finds_stable_pair_distance() {
        let init = ParticleConfiguration::equidistant(2, 0.6).unwrap();
        let r = relax_to_equilibrium(&init, &zeta0(2), 1.0, 100.0, 1e-9).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.configuration.spacings()[0] - 0.75).abs() < 1e-8);
        for seed in [0.3, 0.26] {
            let init = ParticleConfiguration::equidistant(2, seed).unwrap();
            let r = relax_to_equilibrium(&init, &zeta0(2), 1.0, 100.0, 1e-9).unwrap();
            assert!((r.configuration.spacings()[0] - 0.75).abs() < 1e-6, "{seed}: {r:?}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let init = ParticleConfiguration::equidistant(2, 0.7).unwrap();
        assert!(find_equilibrium(&init, &zeta0(2), 0.0, 5).is_err());
        assert!(relax_to_equilibrium(&init, &zeta0(2), 0.0, 1.0, 1e-6).is_err());
    }
}
