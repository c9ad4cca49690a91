use std::f64::consts::PI;

use optobind::dynamics::{integrate, measure_mode_growth, perturb, IntegrateOptions, Perturbation, Trajectory};
use optobind::equilibrium::{solve_equilibrium, EquilibriumOptions};
use optobind::oracles::two_particle_frequency;
use optobind::stability::{coupling_matrix, mode_spectrum};
use optobind::{Complex64, ParticleConfiguration, SystemParams};

fn run(cfg: &ParticleConfiguration, p: &SystemParams, t_end: f64, dt: f64, every: usize) -> Trajectory {
    integrate(cfg, p, &IntegrateOptions { t_end, dt, record_every: every, intensity_grid: None }).unwrap()
}

fn gap_series(t: &Trajectory) -> Vec<f64> {
    t.positions.iter().map(|x| x[1] - x[0]).collect()
}

/// Mean period from linearly interpolated upward zero crossings.
fn period_from_crossings(times: &[f64], signal: &[f64]) -> f64 {
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let mut ups = Vec::new();
    for i in 1..signal.len() {
        let (a, b) = (signal[i - 1] - mean, signal[i] - mean);
        if a < 0.0 && b >= 0.0 {
            ups.push(times[i - 1] + (times[i] - times[i - 1]) * a / (a - b));
        }
    }
    (ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64
}

#[test]
fn pair_oscillates_at_binding_frequency() {
    for zeta in [Complex64::new(0.0, 0.0), Complex64::new(0.2, 0.0), Complex64::new(-0.3, 0.0)] {
        let p = SystemParams::new(2, zeta);
        let cfg = ParticleConfiguration::new(vec![0.0, 0.76]).unwrap();
        let want = two_particle_frequency(zeta).unwrap();
        // ten periods of the expected frequency
        let t = run(&cfg, &p, 10.0 / want + 0.5, 1.0 / 500.0, 1);
        let period = period_from_crossings(&t.times, &gap_series(&t));
        let got = 1.0 / period;
        assert!((got / want - 1.0).abs() < 0.01, "zeta={zeta}: {got} vs {want}");
    }
}

#[test]
fn rk4_is_fourth_order() {
    let p = SystemParams::new(2, Complex64::new(0.0, 0.0));
    let cfg = ParticleConfiguration::new(vec![0.0, 0.8]).unwrap();
    let final_x = |dt: f64| {
        let t = run(&cfg, &p, 5.0, dt, 1_000_000);
        let last = t.positions.last().unwrap().clone();
        last
    };
    let coarse = 1.0 / 160.0;
    let reference = final_x(coarse / 8.0);
    let err = |x: Vec<f64>| x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ratio = err(final_x(coarse)) / err(final_x(coarse / 2.0));
    assert!((14.0..18.0).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn friction_envelope() {
    let mu = 0.4;
    let p = SystemParams::new(2, Complex64::new(0.0, 0.0)).with_friction(mu);
    let eq = ParticleConfiguration::new(vec![0.0, 0.75]).unwrap();
    let start = ParticleConfiguration::new(vec![0.0, 0.755]).unwrap();
    let spectrum = mode_spectrum(&coupling_matrix(&eq, &p, 1e-6).unwrap(), &p).unwrap();
    let t = run(&start, &p, 8.0, 1.0 / 500.0, 5);
    let growth = measure_mode_growth(&t, &eq, &spectrum, 0.02).unwrap();
    let want = -mu / (2.0 * p.mass * p.binding_frequency());
    let rates = growth.branch_rates.iter().find(|r| r[0].is_finite()).unwrap();
    for r in rates {
        assert!((r / want - 1.0).abs() < 0.1, "rate {r} vs {want}");
    }

    // envelope of the gap deviation over successive periods
    let dev: Vec<f64> = gap_series(&t).iter().map(|g| (g - 0.75).abs()).collect();
    let per = (t.times.len() - 1) / 8;
    let peaks: Vec<f64> = dev.chunks(per).map(|c| c.iter().copied().fold(0.0, f64::max)).collect();
    let fitted = (peaks[6] / peaks[1]).ln() / (5.0 * 2.0 * PI);
    assert!((fitted / want - 1.0).abs() < 0.1, "envelope {fitted} vs {want}");
}

fn three_particle_run(kick: Perturbation, amplitude: f64) -> (Trajectory, f64) {
    let p = SystemParams::new(3, Complex64::new(1.0 / 9.0, 0.0));
    let seed = ParticleConfiguration::equidistant(3, 0.82).unwrap();
    let eq = solve_equilibrium(&seed, &p, &EquilibriumOptions::default()).unwrap().configuration;
    let start = perturb(&eq, &kick, amplitude).unwrap();
    let t = run(&start, &p, 20.0, 1.0 / 500.0, 10);
    (t, eq.center_of_mass())
}

#[test]
fn centre_of_mass_moves_after_asymmetric_kick() {
    let amp = 0.01;
    let (t, com0) = three_particle_run(Perturbation::SingleParticle(0), amp);
    let com = t.center_of_mass();
    let hi = com.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = com.iter().copied().fold(f64::INFINITY, f64::min);
    // the light field pushes the centre of mass back and forth
    assert!(hi - lo > 0.3 * amp, "centre of mass swing {}", hi - lo);
    assert!(lo < com0 && hi > com0 + amp / 3.0);
}

#[test]
fn centre_of_mass_fixed_for_symmetric_kick() {
    let z = nalgebra::DVector::from_vec(vec![
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ]);
    let (t, com0) = three_particle_run(Perturbation::Eigenvector(z), 0.01);
    for c in t.center_of_mass() {
        assert!((c - com0).abs() < 1e-9, "{c} vs {com0}");
    }
}

#[test]
fn stable_lattice_has_no_growth() {
    let n = 10;
    let p = SystemParams::new(n, Complex64::new(0.0, 0.0));
    let eq = ParticleConfiguration::equidistant(n, 0.95).unwrap();
    let spectrum = mode_spectrum(&coupling_matrix(&eq, &p, 1e-6).unwrap(), &p).unwrap();
    let start = perturb(&eq, &Perturbation::SingleParticle(3), 1e-3).unwrap();
    let t = run(&start, &p, 10.0, 1.0 / 500.0, 5);
    let growth = measure_mode_growth(&t, &eq, &spectrum, 0.02).unwrap();
    assert!(!growth.ill_conditioned);
    for r in growth.rates().into_iter().filter(|r| r.is_finite()) {
        assert!(r.abs() < 0.01, "rate {r}");
    }
}
