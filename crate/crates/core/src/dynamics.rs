//! Time integration of `m ẍ_j = −μ ẋ_j + F_j(x_1, …, x_N)` with the light
//! field re-solved at every force evaluation (the field follows the
//! particles instantaneously).
//!
//! Times are reported in units of τ_{2,0}, velocities in λ·ω_{2,0}.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{ParticleConfiguration, SystemParams};
use crate::scatter::{forces_unordered, solve_positions};
use crate::stability::ModeSpectrum;

/// Closest approach that counts as a collapse.
pub const COLLAPSE_DISTANCE: f64 = 0.05;
/// Distance beyond the initial extent that counts as expulsion.
pub const ESCAPE_DISTANCE: f64 = 5.0;
/// Kinetic energy (in P_η·λ) above which the step size is deemed unstable.
pub const BLOWUP_ENERGY: f64 = 1e6;
pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    /// Final time in τ_{2,0}.
    pub t_end: f64,
    /// Step in τ_{2,0}.
    pub dt: f64,
    pub record_every: usize,
    pub intensity_grid: Option<Vec<f64>>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { t_end: 10.0, dt: 1.0 / 500.0, record_every: 10, intensity_grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub intensity_grid: Option<Vec<f64>>,
    pub intensity_frames: Vec<Vec<f64>>,
    /// First time (τ_{2,0}) at which the array collapsed or a particle escaped.
    pub breakup_time: Option<f64>,
    /// Set when integration stopped early because the state blew up.
    pub aborted_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest |x_j(t) − reference_j| over the record.
    pub fn max_deviation(&self, reference: &[f64]) -> f64 {
        self.positions.iter().flat_map(|x| x.iter().zip(reference).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max)
    }

    pub fn center_of_mass(&self) -> Vec<f64> {
        self.positions.iter().map(|x| x.iter().sum::<f64>() / x.len() as f64).collect()
    }
}

/// 512-point grid spanning the configuration ± 2λ.
pub fn default_intensity_grid(config: &ParticleConfiguration) -> Vec<f64> {
    let x = config.positions();
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 2.0;
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0;
    (0..DEFAULT_GRID_POINTS).map(|i| lo + (hi - lo) * i as f64 / (DEFAULT_GRID_POINTS - 1) as f64).collect()
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn intensity_frame(x: &[f64], params: &SystemParams, grid: &[f64]) -> Result<Vec<f64>> {
    let fields = solve_positions(&sorted(x), params)?;
    Ok(grid.iter().map(|&g| fields.intensity_at(g)).collect())
}

pub fn integrate(
    initial: &ParticleConfiguration,
    params: &SystemParams,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if !(opts.dt > 0.0) || !(opts.t_end > 0.0) {
        return Err(Error::InvalidParameter("dt and t_end must be positive".into()));
    }
    if opts.record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be at least 1".into()));
    }
    let n = initial.len();
    let omega = params.binding_frequency();
    let tau = params.binding_period();
    let (m, mu) = (params.mass, params.friction);
    let h = opts.dt * tau;
    let steps = (opts.t_end / opts.dt).round() as usize;

    let mut x = initial.positions().to_vec();
    let mut v: Vec<f64> = match initial.velocities() {
        Some(v) => v.iter().map(|u| u * omega).collect(),
        None => vec![0.0; n],
    };
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - ESCAPE_DISTANCE;
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + ESCAPE_DISTANCE;
    let energy_scale = params.pump_pressure() * params.wavelength;

    let accel = |x: &[f64], v: &[f64]| -> Result<Vec<f64>> {
        let f = forces_unordered(x, params)?;
        Ok(f.0.iter().zip(v).map(|(f, v)| (f - mu * v) / m).collect())
    };

    let mut traj = Trajectory {
        times: Vec::new(),
        positions: Vec::new(),
        velocities: Vec::new(),
        intensity_grid: opts.intensity_grid.clone(),
        intensity_frames: Vec::new(),
        breakup_time: None,
        aborted_at: None,
    };
    let record = |traj: &mut Trajectory, step: usize, x: &[f64], v: &[f64]| -> Result<()> {
        traj.times.push(step as f64 * opts.dt);
        traj.positions.push(x.to_vec());
        traj.velocities.push(v.iter().map(|u| u / omega).collect());
        if let Some(grid) = &opts.intensity_grid {
            traj.intensity_frames.push(intensity_frame(x, params, grid)?);
        }
        Ok(())
    };
    record(&mut traj, 0, &x, &v)?;

    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + s * b).collect() };

    for step in 1..=steps {
        let a1 = accel(&x, &v)?;
        let (x2, v2) = (axpy(&x, 0.5 * h, &v), axpy(&v, 0.5 * h, &a1));
        let a2 = accel(&x2, &v2)?;
        let (x3, v3) = (axpy(&x, 0.5 * h, &v2), axpy(&v, 0.5 * h, &a2));
        let a3 = accel(&x3, &v3)?;
        let (x4, v4) = (axpy(&x, h, &v3), axpy(&v, h, &a3));
        let a4 = accel(&x4, &v4)?;
        for j in 0..n {
            x[j] += h / 6.0 * (v[j] + 2.0 * v2[j] + 2.0 * v3[j] + v4[j]);
            v[j] += h / 6.0 * (a1[j] + 2.0 * a2[j] + 2.0 * a3[j] + a4[j]);
        }
        let t = step as f64 * opts.dt;

        let kinetic: f64 = v.iter().map(|u| 0.5 * m * u * u).sum();
        if !kinetic.is_finite() || kinetic > BLOWUP_ENERGY * energy_scale || x.iter().any(|p| !p.is_finite()) {
            traj.aborted_at = Some(t);
            break;
        }
        if traj.breakup_time.is_none() {
            let s = sorted(&x);
            let collapsed = s.windows(2).any(|w| w[1] - w[0] < COLLAPSE_DISTANCE);
            let escaped = x.iter().any(|&p| p < lo || p > hi);
            if collapsed || escaped {
                traj.breakup_time = Some(t);
            }
        }
        if step % opts.record_every == 0 || step == steps {
            record(&mut traj, step, &x, &v)?;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// Shift a single particle (0-based index).
    SingleParticle(usize),
    /// Displace along the real part of a mode vector, scaled so the largest
    /// component moves by the amplitude.
    Eigenvector(DVector<Complex64>),
}

pub fn perturb(config: &ParticleConfiguration, kind: &Perturbation, amplitude: f64) -> Result<ParticleConfiguration> {
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidParameter(format!("perturbation amplitude must be >= 0, got {amplitude}")));
    }
    let mut x = config.positions().to_vec();
    match kind {
        Perturbation::SingleParticle(j) => {
            let len = x.len();
            *x.get_mut(*j).ok_or(Error::IndexOutOfRange { index: *j, len })? += amplitude;
        }
        Perturbation::Eigenvector(z) => {
            if z.len() != x.len() {
                return Err(Error::InvalidParameter(format!(
                    "mode vector has {} components for {} particles",
                    z.len(),
                    x.len()
                )));
            }
            let re: Vec<f64> = z.iter().map(|c| c.re).collect();
            let im: Vec<f64> = z.iter().map(|c| c.im).collect();
            let largest = |v: &[f64]| v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let shape = if largest(&re) >= largest(&im) { re } else { im };
            let scale = largest(&shape);
            if scale > 0.0 {
                for (xj, s) in x.iter_mut().zip(&shape) {
                    *xj += amplitude * s / scale;
                }
            }
        }
    }
    let mut out = ParticleConfiguration::from_positions_unchecked(x);
    if let Some(v) = config.velocities() {
        out = out.with_velocities(v.to_vec())?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeGrowth {
    /// Sample times (τ_{2,0}) inside the fit window.
    pub times: Vec<f64>,
    /// `|c_ν(t)|`, the displacement expressed in the mode basis.
    pub amplitudes: Vec<Vec<f64>>,
    /// Fitted growth rate of each frequency branch, ω_{2,0} units
    /// (positive = growing). NaN where the branches cannot be separated.
    pub branch_rates: Vec<[f64; 2]>,
    /// Predicted rates `−Im ω` of the same branches.
    pub predicted_rates: Vec<[f64; 2]>,
    /// Condition number of the eigenvector matrix.
    pub condition_number: f64,
    pub ill_conditioned: bool,
}

impl ModeGrowth {
    /// Larger of the two branch rates per mode.
    pub fn rates(&self) -> Vec<f64> {
        self.branch_rates.iter().map(|r| r[0].max(r[1])).collect()
    }
}

/// Projects the motion around `equilibrium` onto the modes of `spectrum`
/// and fits the exponential rate of each frequency branch.
///
/// Displacement and velocity are projected together, which splits every
/// mode coefficient into its two `e^{iωt}` branches. Only samples before
/// breakup and while every displacement stays below `linear_limit` (λ) are
/// used.
pub fn measure_mode_growth(
    traj: &Trajectory,
    equilibrium: &ParticleConfiguration,
    spectrum: &ModeSpectrum,
    linear_limit: f64,
) -> Result<ModeGrowth> {
    let n = equilibrium.len();
    if spectrum.modes.len() != n {
        return Err(Error::InvalidParameter("spectrum and configuration sizes differ".into()));
    }
    let basis = DMatrix::from_fn(n, n, |j, nu| spectrum.modes[nu].vector[j]);
    let svd = basis.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let tol = 1e-14 * smax;

    let x0 = equilibrium.positions();
    let stop = traj.breakup_time.unwrap_or(f64::INFINITY);
    let mut times = Vec::new();
    let mut coeffs = Vec::new();
    let mut rates_of_change = Vec::new();
    for ((t, x), v) in traj.times.iter().zip(&traj.positions).zip(&traj.velocities) {
        let xi: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        if *t > stop || xi.iter().any(|d| d.abs() > linear_limit) {
            break;
        }
        let xi = DVector::from_iterator(n, xi.into_iter().map(|d| Complex64::new(d, 0.0)));
        let vv = DVector::from_iterator(n, v.iter().map(|&d| Complex64::new(d, 0.0)));
        let c = svd.solve(&xi, tol).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let dc = svd.solve(&vv, tol).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        times.push(*t);
        coeffs.push(c);
        rates_of_change.push(dc);
    }

    let mut amplitudes = vec![Vec::with_capacity(times.len()); n];
    for c in &coeffs {
        for (nu, amp) in amplitudes.iter_mut().enumerate() {
            amp.push(c[nu].norm());
        }
    }

    // dimensionless time s = ω_{2,0} t = 2π t/τ_{2,0}
    let s: Vec<f64> = times.iter().map(|t| 2.0 * PI * t).collect();
    let mut branch_rates = Vec::with_capacity(n);
    let mut predicted_rates = Vec::with_capacity(n);
    for (nu, mode) in spectrum.modes.iter().enumerate() {
        let [w1, w2] = mode.frequencies;
        predicted_rates.push([0.0 - w1.im, 0.0 - w2.im]);
        if mode.flags.zero_mode || (w1 - w2).norm() < 1e-9 || times.len() < 3 {
            branch_rates.push([f64::NAN, f64::NAN]);
            continue;
        }
        let i = Complex64::i();
        let fit = |w_other: Complex64| {
            let logs: Vec<f64> = coeffs
                .iter()
                .zip(&rates_of_change)
                .map(|(c, dc)| ((dc[nu] - i * w_other * c[nu]) / (i * (w1 - w2))).norm().ln())
                .collect();
            slope(&s, &logs)
        };
        // branch 1 isolates e^{iω1 t}, branch 2 e^{iω2 t}
        branch_rates.push([fit(w2), fit(w1)]);
    }

    Ok(ModeGrowth {
        times,
        amplitudes,
        branch_rates,
        predicted_rates,
        condition_number,
        ill_conditioned: condition_number > 1e8,
    })
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, y)| y.is_finite()).map(|(a, b)| (*a, *b)).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
