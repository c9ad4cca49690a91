//! Analytic-versus-numeric self-check suite.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Map, Value};

use optobind::oracles::{
    lattice_coupling_matrix_zeta0, lattice_eigensystem_zeta0, lattice_force_zeta0, lattice_intensity_zeta0,
    two_particle_binding_eigenvalue, two_particle_coupling_matrix, two_particle_force, LatticeSpec,
};
use optobind::scatter::{forces_at, solve_positions};
use optobind::stability::{coupling_matrix, mode_spectrum};
use optobind::{Complex64, ParticleConfiguration, Result, SystemParams};

use crate::config::RunConfig;
use crate::output::header_lines;

pub struct Check {
    pub name: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

pub struct Golden {
    pub maximum: f64,
    pub minimum: f64,
    pub ratio: f64,
}

pub struct Suite {
    pub checks: Vec<Check>,
    pub golden: Golden,
}

const SAMPLES: usize = 100;

fn random_zeta(rng: &mut StdRng) -> Complex64 {
    Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0))
}

fn pair_force(rng: &mut StdRng) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < SAMPLES {
        let zeta = random_zeta(rng);
        let d = rng.random_range(0.05..3.0);
        let Ok(want) = two_particle_force(zeta, d) else { continue };
        let p = SystemParams::new(2, zeta);
        let got = forces_at(&[0.0, d], &p)?.0[0] / p.pump_pressure();
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
        done += 1;
    }
    Ok(worst)
}

fn pair_coupling(rng: &mut StdRng, delta: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < SAMPLES {
        let zeta = random_zeta(rng);
        let d = rng.random_range(0.05..3.0);
        let Ok(want) = two_particle_coupling_matrix(zeta, d) else { continue };
        let p = SystemParams::new(2, zeta);
        let cfg = ParticleConfiguration::new(vec![0.0, d])?;
        let got = coupling_matrix(&cfg, &p, delta)?.normalized();
        let scale = want.abs().max().max(1.0);
        for (g, w) in got.iter().zip(want.iter()) {
            worst = worst.max((g - w).abs() / scale);
        }
        done += 1;
    }
    Ok(worst)
}

fn pair_eigenvalue(rng: &mut StdRng, delta: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < SAMPLES {
        let zeta = random_zeta(rng);
        let Ok(want) = two_particle_binding_eigenvalue(zeta) else { continue };
        let p = SystemParams::new(2, zeta);
        let cfg = ParticleConfiguration::new(vec![0.0, 0.75])?;
        let s = mode_spectrum(&coupling_matrix(&cfg, &p, delta)?, &p)?;
        let got = s.modes.iter().map(|m| m.eigenvalue).max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
        worst = worst.max((got - want).norm() / want.abs().max(1.0));
        done += 1;
    }
    Ok(worst)
}

fn lattice_forces(rng: &mut StdRng) -> Result<(f64, f64)> {
    let (mut force, mut intensity) = (0.0f64, 0.0f64);
    for _ in 0..SAMPLES {
        let n = rng.random_range(2..=20usize);
        let d = rng.random_range(0.05..2.0);
        let p = SystemParams::new(n, Complex64::new(0.0, 0.0));
        let x: Vec<f64> = (0..n).map(|j| j as f64 * d).collect();
        let fields = solve_positions(&x, &p)?;
        for (j, f) in fields.forces().0.iter().enumerate() {
            let want = lattice_force_zeta0(n, d, j + 1);
            force = force.max((f / p.pump_pressure() - want).abs() / want.abs().max(1.0));
        }
        let want = lattice_intensity_zeta0(n, d);
        let (left, right) = fields.end_intensities();
        let err = (left - want).abs().max((right - want).abs());
        intensity = intensity.max(err / want.max(1.0));
    }
    Ok((force, intensity))
}

fn lattice_stiffness(delta: f64) -> Result<(f64, f64)> {
    let (mut entries, mut eigen) = (0.0f64, 0.0f64);
    for n in 2..=20 {
        let p = SystemParams::new(n, Complex64::new(0.0, 0.0));
        let cfg = ParticleConfiguration::equidistant(n, LatticeSpec::widest(n)?.spacing())?;
        let d = coupling_matrix(&cfg, &p, delta)?;
        let want = lattice_coupling_matrix_zeta0(n);
        for (g, w) in d.normalized().iter().zip(want.iter()) {
            entries = entries.max((g - w).abs() / w.abs());
        }
        let closed = lattice_eigensystem_zeta0(n);
        let scale = closed.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut want: Vec<f64> = closed.eigenvalues.clone();
        let mut got: Vec<f64> = mode_spectrum(&d, &p)?.modes.iter().map(|m| m.eigenvalue.re).collect();
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            eigen = eigen.max((g - w).abs() / scale);
        }
    }
    Ok((entries, eigen))
}

fn pair_frequency(zeta: f64, delta: f64) -> Result<f64> {
    let p = SystemParams::new(2, Complex64::new(zeta, 0.0));
    let cfg = ParticleConfiguration::new(vec![0.0, 0.75])?;
    let s = mode_spectrum(&coupling_matrix(&cfg, &p, delta)?, &p)?;
    Ok(s.modes.iter().map(|m| m.frequencies[0].re.abs()).fold(0.0, f64::max))
}

/// Scans real ζ for the extrema of the bound-pair frequency.
fn golden_scan(delta: f64) -> Result<Golden> {
    let h = 0.01;
    let zs: Vec<f64> = (0..=600).map(|i| -3.0 + h * i as f64).collect();
    let w = zs.iter().map(|&z| pair_frequency(z, delta)).collect::<Result<Vec<_>>>()?;
    let refine = |i: usize| zs[i] + 0.5 * h * (w[i - 1] - w[i + 1]) / (w[i - 1] - 2.0 * w[i] + w[i + 1]);
    let (mut imax, mut imin) = (1, 1);
    for i in 1..w.len() - 1 {
        if w[i] > w[imax] {
            imax = i;
        }
        if w[i] < w[imin] {
            imin = i;
        }
    }
    let (maximum, minimum) = (refine(imax), refine(imin));
    let ratio = pair_frequency(maximum, delta)? / pair_frequency(minimum, delta)?;
    Ok(Golden { maximum, minimum, ratio })
}

pub fn run(seed: u64, delta: f64) -> Result<Suite> {
    let mut rng = StdRng::seed_from_u64(seed);
    let force = pair_force(&mut rng)?;
    let coupling = pair_coupling(&mut rng, delta)?;
    let eigen = pair_eigenvalue(&mut rng, delta)?;
    let (lattice_force, lattice_intensity) = lattice_forces(&mut rng)?;
    let (entries, spectrum) = lattice_stiffness(delta)?;
    let golden = golden_scan(delta)?;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let checks = vec![
        Check { name: "two-particle force", deviation: force, tolerance: 1e-10 },
        Check { name: "two-particle coupling matrix", deviation: coupling, tolerance: 1e-6 },
        Check { name: "two-particle binding eigenvalue", deviation: eigen, tolerance: 1e-6 },
        Check { name: "lattice forces (zeta = 0)", deviation: lattice_force, tolerance: 1e-10 },
        Check { name: "lattice end intensity (zeta = 0)", deviation: lattice_intensity, tolerance: 1e-9 },
        Check { name: "lattice coupling matrix", deviation: entries, tolerance: 1e-5 },
        Check { name: "lattice phonon spectrum", deviation: spectrum, tolerance: 1e-6 },
        Check { name: "pair frequency maximum at 0.618", deviation: (golden.maximum - phi).abs(), tolerance: 5e-3 },
        Check {
            name: "pair frequency minimum at -1.618",
            deviation: (golden.minimum + 1.0 + phi).abs(),
            tolerance: 5e-3,
        },
        Check { name: "pair frequency ratio 2.618", deviation: (golden.ratio - 2.0 - phi).abs(), tolerance: 1e-3 },
    ];
    Ok(Suite { checks, golden })
}

impl Suite {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass()).count()
    }

    pub fn all_pass(&self) -> bool {
        self.failures() == 0
    }

    pub fn table(&self, cfg: &RunConfig) -> String {
        let mut out = header_lines("oracle", cfg);
        out.push_str(&format!("{:<36} {:>13} {:>11}  result\n", "check", "deviation", "tolerance"));
        for c in &self.checks {
            out.push_str(&format!(
                "{:<36} {:>13.3e} {:>11.1e}  {}\n",
                c.name,
                c.deviation,
                c.tolerance,
                if c.pass() { "PASS" } else { "FAIL" }
            ));
        }
        out.push_str(&format!(
            "stationary points: maximum at zeta = {:.4}, minimum at zeta = {:.4}, frequency ratio {:.4}\n",
            self.golden.maximum, self.golden.minimum, self.golden.ratio
        ));
        out.push_str(&format!("{} of {} checks passed\n", self.checks.len() - self.failures(), self.checks.len()));
        out
    }

    pub fn json(&self) -> Map<String, Value> {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| json!({"name": c.name, "deviation": c.deviation, "tolerance": c.tolerance, "pass": c.pass()}))
            .collect();
        let mut body = Map::new();
        body.insert("checks".into(), Value::Array(checks));
        body.insert(
            "stationary_points".into(),
            json!({"maximum": self.golden.maximum, "minimum": self.golden.minimum, "ratio": self.golden.ratio}),
        );
        body.insert("all_pass".into(), json!(self.all_pass()));
        body
    }
}
