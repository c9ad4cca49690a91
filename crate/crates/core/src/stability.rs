//! Linearized collective modes around an equilibrium: finite-difference
//! coupling matrix, complex mode frequencies with friction, stability
//! classification, and stability maps over the complex coupling plane.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::eigen::{eigen_decompose, EigenPair};
use crate::equilibrium::{solve_equilibrium, EquilibriumOptions};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::oracles::LatticeSpec;
use crate::params::{ParticleConfiguration, SystemParams};
use crate::scatter::forces_at;

/// Default finite-difference displacement, in units of λ.
pub const DEFAULT_DELTA: f64 = 1e-6;

/// Linearized force response `D_jl = ∂F_j/∂x_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    /// Raw entries (force per length).
    pub entries: DMatrix<f64>,
    /// P_η·k for the parameters the matrix was built with.
    pub scale: f64,
    pub origin: Vec<f64>,
    /// Max |F_j| / P_η at the origin configuration.
    pub equilibrium_residual: f64,
}

impl CouplingMatrix {
    /// Entries in units of P_η·k.
    pub fn normalized(&self) -> DMatrix<f64> {
        &self.entries / self.scale
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Whether the origin is close enough to a zero-force point for the
    /// stability flags to mean anything.
    pub fn is_at_equilibrium(&self) -> bool {
        self.equilibrium_residual <= 1e-8
    }

    /// ‖D·(1,…,1)‖ relative to ‖D‖.
    pub fn translation_defect(&self) -> f64 {
        let ones = DVector::from_element(self.dim(), 1.0);
        (&self.entries * ones).norm() / self.entries.norm().max(f64::MIN_POSITIVE)
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.entries - self.entries.transpose()).norm() / self.entries.norm().max(f64::MIN_POSITIVE)
    }
}

/// Central-difference Jacobian of the forces at `positions` (index order kept).
pub fn force_jacobian(positions: &[f64], params: &SystemParams, delta: f64, exec: Execution) -> Result<DMatrix<f64>> {
    let n = positions.len();
    let columns = exec.map_indexed(2 * n, |item| {
        let (l, sign) = (item / 2, if item % 2 == 0 { 1.0 } else { -1.0 });
        let mut x = positions.to_vec();
        x[l] += sign * delta;
        forces_at(&x, params)
    });
    let mut jac = DMatrix::zeros(n, n);
    for l in 0..n {
        let plus = columns[2 * l].as_ref().map_err(Clone::clone)?;
        let minus = columns[2 * l + 1].as_ref().map_err(Clone::clone)?;
        for j in 0..n {
            jac[(j, l)] = (plus.0[j] - minus.0[j]) / (2.0 * delta);
        }
    }
    Ok(jac)
}

pub fn coupling_matrix(
    equilibrium: &ParticleConfiguration,
    params: &SystemParams,
    delta: f64,
) -> Result<CouplingMatrix> {
    coupling_matrix_with(equilibrium, params, delta, Execution::default())
}

pub fn coupling_matrix_with(
    equilibrium: &ParticleConfiguration,
    params: &SystemParams,
    delta: f64,
    exec: Execution,
) -> Result<CouplingMatrix> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {delta}")));
    }
    let x = equilibrium.positions();
    let residual = forces_at(x, params)?.max_abs() / params.pump_pressure();
    Ok(CouplingMatrix {
        entries: force_jacobian(x, params, delta, exec)?,
        scale: params.stiffness_scale(),
        origin: x.to_vec(),
        equilibrium_residual: residual,
    })
}

/// Stability flags of one nonzero mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModeFlags {
    pub zero_mode: bool,
    pub stable_at_mu: bool,
    pub damp_stabilizable: bool,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    /// Eigenvalue in P_η·k units.
    pub eigenvalue: Complex64,
    pub vector: DVector<Complex64>,
    /// Both branches `(iμ ± √(−μ² − 4mλ))/(2m)` in ω_{2,0} units.
    pub frequencies: [Complex64; 2],
    pub flags: ModeFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub modes: Vec<Mode>,
    /// Index of the translation mode, if it was identified unambiguously.
    pub zero_mode: Option<usize>,
    /// Eigenvalues below this magnitude (P_η·k) are treated as numerically zero.
    pub noise_floor: f64,
    pub friction: f64,
    pub mass: f64,
}

/// Complex frequency branches for eigenvalue `lambda` (raw units).
pub fn mode_frequencies(lambda: Complex64, mass: f64, friction: f64) -> [Complex64; 2] {
    let i = Complex64::i();
    let root = Complex64::new(-friction * friction, 0.0) - 4.0 * mass * lambda;
    let root = root.sqrt();
    [(i * friction + root) / (2.0 * mass), (i * friction - root) / (2.0 * mass)]
}

pub fn mode_spectrum(matrix: &CouplingMatrix, params: &SystemParams) -> Result<ModeSpectrum> {
    let pairs = eigen_decompose(&matrix.entries)?;
    Ok(spectrum_from_pairs(pairs, matrix.scale, params))
}

fn spectrum_from_pairs(pairs: Vec<EigenPair>, scale: f64, params: &SystemParams) -> ModeSpectrum {
    let n = pairs.len();
    let max_abs = pairs.iter().map(|p| p.value.norm()).fold(0.0, f64::max);
    let noise = 1e-7 * max_abs;
    let uniform = DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));

    let zero_mode = pairs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.norm().total_cmp(&b.1.value.norm()))
        .filter(|(_, p)| p.value.norm() <= 1e-6 * max_abs && uniform.dotc(&p.vector).norm() >= 0.99)
        .map(|(i, _)| i);

    let omega = params.binding_frequency();
    let modes = pairs
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let snapped = snap(p.value, noise);
            let flags = classify(snapped, zero_mode == Some(i), params.mass, params.friction);
            let [w1, w2] = mode_frequencies(snapped, params.mass, params.friction);
            Mode { eigenvalue: p.value / scale, vector: p.vector, frequencies: [w1 / omega, w2 / omega], flags }
        })
        .collect();
    ModeSpectrum { modes, zero_mode, noise_floor: noise / scale, friction: params.friction, mass: params.mass }
}

fn snap(lambda: Complex64, noise: f64) -> Complex64 {
    let clean = |v: f64| if v.abs() <= noise { 0.0 } else { v };
    Complex64::new(clean(lambda.re), clean(lambda.im))
}

/// Friction criterion `m (Im λ)² ≤ −μ² Re λ` together with `Re λ ≤ 0`.
pub fn satisfies_friction_criterion(lambda: Complex64, mass: f64, friction: f64) -> bool {
    lambda.re <= 0.0 && mass * lambda.im * lambda.im <= -friction * friction * lambda.re
}

/// Equivalent time-domain test: no branch of `e^{iωt}` grows.
pub fn frequencies_decay(lambda: Complex64, mass: f64, friction: f64) -> bool {
    mode_frequencies(lambda, mass, friction).iter().all(|w| w.im >= -1e-12 * (1.0 + w.norm()))
}

fn classify(lambda: Complex64, zero_mode: bool, mass: f64, friction: f64) -> ModeFlags {
    ModeFlags {
        zero_mode,
        stable_at_mu: zero_mode || satisfies_friction_criterion(lambda, mass, friction),
        damp_stabilizable: !zero_mode && lambda.re < 0.0,
        unstable: !zero_mode && (lambda.re > 0.0 || (lambda.re == 0.0 && lambda.im != 0.0)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StabilityClass {
    /// Every nonzero mode satisfies the friction criterion at the given μ.
    pub stable_at_mu: bool,
    /// Enough friction would stabilize every nonzero mode.
    pub damp_stabilizable: bool,
    /// Some mode grows for every friction.
    pub unstable: bool,
}

pub fn classify_stability(spectrum: &ModeSpectrum) -> StabilityClass {
    let nonzero = spectrum.modes.iter().filter(|m| !m.flags.zero_mode);
    let mut class = StabilityClass { stable_at_mu: true, damp_stabilizable: true, unstable: false };
    for m in nonzero {
        class.stable_at_mu &= m.flags.stable_at_mu;
        class.damp_stabilizable &= m.flags.damp_stabilizable;
        class.unstable |= m.flags.unstable;
    }
    class
}

impl ModeSpectrum {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    /// Largest real part over the nonzero modes (P_η·k). When the zero mode
    /// could not be identified, the mode with the largest overlap with a
    /// rigid translation is left out instead.
    pub fn max_real_nonzero(&self) -> Option<f64> {
        let n = self.modes.first()?.vector.len();
        let skip = self.zero_mode.or_else(|| {
            let u = DVector::from_element(n, Complex64::new(1.0, 0.0));
            (0..self.modes.len()).max_by(|&a, &b| {
                let oa = u.dotc(&self.modes[a].vector).norm();
                let ob = u.dotc(&self.modes[b].vector).norm();
                oa.total_cmp(&ob)
            })
        });
        self.modes.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(_, m)| m.eigenvalue.re).reduce(f64::max)
    }

    /// Fastest exponential growth rate among all frequency branches, in
    /// ω_{2,0} units (`−Im ω`, zero if nothing grows).
    pub fn max_growth_rate(&self) -> f64 {
        self.modes
            .iter()
            .filter(|m| !m.flags.zero_mode)
            .flat_map(|m| m.frequencies)
            .map(|w| 0.0 - w.im)
            .fold(0.0, f64::max)
    }
}

/// One cell of a stability map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapCell {
    pub zeta_re: f64,
    pub zeta_im: f64,
    /// Max real part over nonzero eigenvalues (P_η·k); `None` when the
    /// equilibrium search failed.
    pub max_re_nonzero: Option<f64>,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityMap {
    pub n_particles: usize,
    pub re_values: Vec<f64>,
    pub im_values: Vec<f64>,
    /// Row-major: `cells[i * re_values.len() + r]` holds `(re_values[r], im_values[i])`.
    pub cells: Vec<MapCell>,
}

impl StabilityMap {
    pub fn cell(&self, re_index: usize, im_index: usize) -> &MapCell {
        &self.cells[im_index * self.re_values.len() + re_index]
    }

    pub fn converged_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| c.converged).count() as f64 / self.cells.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub re_steps: usize,
    pub im_steps: usize,
    pub delta: f64,
    pub equilibrium: EquilibriumOptions,
    pub exec: Execution,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            re_range: (-0.5, 0.5),
            im_range: (0.0, 0.5),
            re_steps: 11,
            im_steps: 6,
            delta: DEFAULT_DELTA,
            equilibrium: EquilibriumOptions::default(),
            exec: Execution::default(),
        }
    }
}

fn linspace(range: (f64, f64), steps: usize) -> Vec<f64> {
    (0..steps).map(|i| range.0 + (range.1 - range.0) * i as f64 / (steps - 1) as f64).collect()
}

/// Maximum real part of the nonzero eigenvalues over a grid of complex ζ.
///
/// Equilibria are continued from the widest ζ = 0 lattice: first along the
/// grid column closest to ζ_r = 0 (increasing ζ_i), then outward along each
/// row. Rows only depend on that column, so they run as independent work
/// items and the result does not depend on the execution policy.
pub fn stability_map(template: &SystemParams, opts: &MapOptions) -> Result<StabilityMap> {
    let n = template.n_particles;
    if n < 2 {
        return Err(Error::InvalidParameter("stability maps need at least two particles".into()));
    }
    if opts.re_steps < 2 || opts.im_steps < 2 {
        return Err(Error::InvalidParameter("map needs at least two steps per axis".into()));
    }
    let finite = [opts.re_range.0, opts.re_range.1, opts.im_range.0, opts.im_range.1];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("map ranges must be finite".into()));
    }
    let re_values = linspace(opts.re_range, opts.re_steps);
    let im_values = linspace(opts.im_range, opts.im_steps);
    let lattice = ParticleConfiguration::equidistant(n, LatticeSpec::widest(n)?.spacing())?;
    let lattice = lattice.recentered(0.0);

    let pivot = (0..re_values.len()).min_by(|&a, &b| re_values[a].abs().total_cmp(&re_values[b].abs())).unwrap_or(0);

    // column ζ_r = re_values[pivot], continued upward from ζ = 0
    let mut column: Vec<Option<ParticleConfiguration>> = Vec::with_capacity(im_values.len());
    let mut seed = continue_from(
        &lattice,
        Complex64::new(0.0, 0.0),
        Complex64::new(re_values[pivot], im_values[0]),
        template,
        opts,
    );
    let mut prev_zeta = Complex64::new(re_values[pivot], im_values[0]);
    column.push(seed.clone());
    for &im in &im_values[1..] {
        let zeta = Complex64::new(re_values[pivot], im);
        let start = seed.clone().unwrap_or_else(|| lattice.clone());
        let start_zeta = if seed.is_some() { prev_zeta } else { Complex64::new(0.0, 0.0) };
        seed = continue_from(&start, start_zeta, zeta, template, opts);
        if seed.is_some() {
            prev_zeta = zeta;
        }
        column.push(seed.clone());
    }

    let rows = opts.exec.map_indexed(im_values.len(), |row| {
        let im = im_values[row];
        let mut cells: Vec<Option<MapCell>> = vec![None; re_values.len()];
        for direction in [1isize, -1] {
            let mut seed = column[row].clone();
            let mut seed_zeta = Complex64::new(re_values[pivot], im);
            let mut r = pivot as isize;
            while r >= 0 && (r as usize) < re_values.len() {
                let idx = r as usize;
                let zeta = Complex64::new(re_values[idx], im);
                let config = if idx == pivot {
                    column[row].clone()
                } else {
                    let start = seed.clone().unwrap_or_else(|| lattice.clone());
                    let from = if seed.is_some() { seed_zeta } else { Complex64::new(0.0, 0.0) };
                    continue_from(&start, from, zeta, template, opts)
                };
                if cells[idx].is_none() {
                    cells[idx] = Some(evaluate_cell(config.as_ref(), zeta, template, opts));
                }
                if config.is_some() {
                    seed = config;
                    seed_zeta = zeta;
                }
                r += direction;
            }
        }
        cells.into_iter().map(|c| c.expect("every cell visited")).collect::<Vec<_>>()
    });

    Ok(StabilityMap { n_particles: n, re_values, im_values, cells: rows.into_iter().flatten().collect() })
}

/// Continues an equilibrium from coupling `from` to `to`, halving the step
/// on failure and finally reseeding from the ζ = 0 lattice.
fn continue_from(
    start: &ParticleConfiguration,
    from: Complex64,
    to: Complex64,
    template: &SystemParams,
    opts: &MapOptions,
) -> Option<ParticleConfiguration> {
    let solve = |cfg: &ParticleConfiguration, zeta: Complex64| {
        let params = template.with_zeta(zeta);
        solve_equilibrium(cfg, &params, &opts.equilibrium).ok().filter(|r| r.converged).map(|r| r.configuration)
    };
    let mut current = start.clone();
    let mut at = from;
    let mut step = 1.0;
    while (to - at).norm() > 0.0 {
        let target = if step >= 1.0 { to } else { at + (to - at) * step };
        match solve(&current, target) {
            Some(cfg) => {
                current = cfg;
                at = target;
                step = 1.0;
            }
            None if step > 1.0 / 64.0 => step /= 2.0,
            None => break,
        }
    }
    if at == to {
        return Some(current);
    }
    let n = template.n_particles;
    let lattice = ParticleConfiguration::equidistant(n, LatticeSpec::widest(n).ok()?.spacing()).ok()?;
    solve(&lattice.recentered(start.center_of_mass()), to)
}

fn evaluate_cell(
    config: Option<&ParticleConfiguration>,
    zeta: Complex64,
    template: &SystemParams,
    opts: &MapOptions,
) -> MapCell {
    let params = template.with_zeta(zeta);
    let failed = |residual: f64| MapCell {
        zeta_re: zeta.re,
        zeta_im: zeta.im,
        max_re_nonzero: None,
        residual,
        converged: false,
    };
    let Some(config) = config else {
        return failed(f64::NAN);
    };
    let Ok(matrix) = coupling_matrix_with(config, &params, opts.delta, Execution::Sequential) else {
        return failed(f64::NAN);
    };
    match mode_spectrum(&matrix, &params) {
        Ok(spectrum) => MapCell {
            zeta_re: zeta.re,
            zeta_im: zeta.im,
            max_re_nonzero: spectrum.max_real_nonzero(),
            residual: matrix.equilibrium_residual,
            converged: true,
        },
        Err(_) => failed(matrix.equilibrium_residual),
    }
}
