//! Subcommand implementations. Each returns its output artifacts and a
//! completion status; writing them out is left to the caller.

use serde_json::{json, Map, Value};

use optobind::dynamics::{
    default_intensity_grid, integrate, measure_mode_growth, perturb, IntegrateOptions, Perturbation, Trajectory,
};
use optobind::equilibrium::{solve_equilibrium, EquilibriumOptions, EquilibriumResult};
use optobind::scatter::{force_profile, solve_fields};
use optobind::stability::{
    classify_stability, coupling_matrix, mode_spectrum, stability_map, MapOptions, ModeSpectrum,
};
use optobind::{Complex64, ParticleConfiguration};

use crate::config::{ConfigError, Format, PerturbationKind, RunConfig};
use crate::oracle;
use crate::output::{json_document, num, Artifact, Csv};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numeric(optobind::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<optobind::Error> for CliError {
    fn from(e: optobind::Error) -> Self {
        CliError::Numeric(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Completion {
    Complete,
    /// Results were produced but something did not fully converge.
    Partial(String),
    /// Results were produced up to a numerical failure.
    Failed(String),
}

pub struct Report {
    pub artifacts: Vec<Artifact>,
    pub completion: Completion,
}

fn cplx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn equilibrium_options(cfg: &RunConfig) -> EquilibriumOptions {
    EquilibriumOptions { tolerance: cfg.tolerance, max_iter: cfg.max_iter, delta: cfg.delta, ..Default::default() }
}

fn equilibrate(cfg: &RunConfig, initial: &ParticleConfiguration) -> Result<EquilibriumResult, CliError> {
    Ok(solve_equilibrium(initial, &cfg.params(), &equilibrium_options(cfg))?)
}

/// The configuration the analysis runs on, plus the equilibrium search
/// that produced it (if one was requested).
fn reference(cfg: &RunConfig) -> Result<(ParticleConfiguration, Option<EquilibriumResult>), CliError> {
    let initial = cfg.configuration()?;
    if !cfg.equilibrate || initial.len() < 2 {
        return Ok((initial, None));
    }
    let result = equilibrate(cfg, &initial)?;
    Ok((result.configuration.clone(), Some(result)))
}

fn equilibrium_json(r: &EquilibriumResult) -> Value {
    json!({
        "converged": r.converged,
        "residual": r.residual,
        "iterations": r.iterations,
        "method": r.method,
        "status": r.status,
    })
}

pub fn fields(cfg: &RunConfig) -> Result<Report, CliError> {
    let config = cfg.configuration()?;
    let f = solve_fields(&config, &cfg.params())?;
    let (left, right) = f.end_intensities();
    let x = config.positions();
    let artifact = match cfg.format {
        Format::Csv => {
            let mut csv = Csv::new("fields", cfg);
            csv.comment(&format!("end_intensity_left = {}", num(left)));
            csv.comment(&format!("end_intensity_right = {}", num(right)));
            csv.columns(&["j", "x", "a_re", "a_im", "b_re", "b_im", "c_re", "c_im", "d_re", "d_im"]);
            for (j, a) in f.amplitudes.iter().enumerate() {
                let mut row = vec![(j + 1).to_string(), num(x[j])];
                for z in [a.a, a.b, a.c, a.d] {
                    row.push(num(z.re));
                    row.push(num(z.im));
                }
                csv.row(&row);
            }
            Artifact::primary("fields.csv", csv.finish())
        }
        Format::Json => {
            let particles: Vec<Value> = f
                .amplitudes
                .iter()
                .enumerate()
                .map(|(j, a)| json!({"j": j + 1, "x": x[j], "a": cplx(a.a), "b": cplx(a.b), "c": cplx(a.c), "d": cplx(a.d)}))
                .collect();
            let mut body = Map::new();
            body.insert("particles".into(), Value::Array(particles));
            body.insert("end_intensity".into(), json!({"left": left, "right": right}));
            Artifact::primary("fields.json", json_document("fields", cfg, body))
        }
    };
    Ok(Report { artifacts: vec![artifact], completion: Completion::Complete })
}

pub fn forces(cfg: &RunConfig) -> Result<Report, CliError> {
    let config = cfg.configuration()?;
    let params = cfg.params();
    let f = force_profile(&config, &params)?.in_pressure_units(&params);
    let x = config.positions();
    let artifact = match cfg.format {
        Format::Csv => {
            let mut csv = Csv::new("forces", cfg);
            csv.columns(&["j", "x", "force"]);
            for (j, fj) in f.iter().enumerate() {
                csv.row(&[(j + 1).to_string(), num(x[j]), num(*fj)]);
            }
            Artifact::primary("forces.csv", csv.finish())
        }
        Format::Json => {
            let mut body = Map::new();
            body.insert("positions".into(), json!(x));
            body.insert("forces".into(), json!(f));
            Artifact::primary("forces.json", json_document("forces", cfg, body))
        }
    };
    Ok(Report { artifacts: vec![artifact], completion: Completion::Complete })
}

pub fn equilibrium(cfg: &RunConfig) -> Result<Report, CliError> {
    let initial = cfg.configuration()?;
    let r = equilibrate(cfg, &initial)?;
    let params = cfg.params();
    let f = force_profile(&r.configuration, &params)?.in_pressure_units(&params);
    let x = r.configuration.positions();
    let artifact = match cfg.format {
        Format::Csv => {
            let mut csv = Csv::new("equilibrium", cfg);
            csv.comment(&format!("converged = {}", r.converged));
            csv.comment(&format!("residual = {}", num(r.residual)));
            csv.comment(&format!("iterations = {}", r.iterations));
            csv.comment(&format!("method = {}", equilibrium_json(&r)["method"].as_str().unwrap_or("")));
            csv.columns(&["j", "x", "force"]);
            for (j, fj) in f.iter().enumerate() {
                csv.row(&[(j + 1).to_string(), num(x[j]), num(*fj)]);
            }
            Artifact::primary("equilibrium.csv", csv.finish())
        }
        Format::Json => {
            let mut body = Map::new();
            body.insert("equilibrium".into(), equilibrium_json(&r));
            body.insert("positions".into(), json!(x));
            body.insert("spacings".into(), json!(r.configuration.spacings()));
            body.insert("forces".into(), json!(f));
            Artifact::primary("equilibrium.json", json_document("equilibrium", cfg, body))
        }
    };
    let completion = if r.converged {
        Completion::Complete
    } else {
        Completion::Partial(format!("equilibrium search stopped with residual {:e}", r.residual))
    };
    Ok(Report { artifacts: vec![artifact], completion })
}

fn spectrum_json(s: &ModeSpectrum) -> Value {
    let modes: Vec<Value> = s
        .modes
        .iter()
        .map(|m| {
            json!({
                "eigenvalue": cplx(m.eigenvalue),
                "frequencies": [cplx(m.frequencies[0]), cplx(m.frequencies[1])],
                "vector": m.vector.iter().map(|z| cplx(*z)).collect::<Vec<_>>(),
                "flags": m.flags,
            })
        })
        .collect();
    let class = classify_stability(s);
    json!({
        "modes": modes,
        "zero_mode": s.zero_mode.map(|i| i + 1),
        "max_real_nonzero": s.max_real_nonzero(),
        "max_growth_rate": s.max_growth_rate(),
        "stable_at_mu": class.stable_at_mu,
        "damp_stabilizable": class.damp_stabilizable,
        "unstable": class.unstable,
    })
}

pub fn modes(cfg: &RunConfig) -> Result<Report, CliError> {
    let (config, eq) = reference(cfg)?;
    let params = cfg.params();
    let d = coupling_matrix(&config, &params, cfg.delta)?;
    let s = mode_spectrum(&d, &params)?;
    let normalized = d.normalized();
    let rows: Vec<Vec<f64>> = (0..d.dim()).map(|j| normalized.row(j).iter().copied().collect()).collect();

    let mut body = Map::new();
    if let Some(r) = &eq {
        body.insert("equilibrium".into(), equilibrium_json(r));
    }
    body.insert("positions".into(), json!(config.positions()));
    body.insert("equilibrium_residual".into(), json!(d.equilibrium_residual));
    body.insert("coupling_matrix".into(), json!(rows));
    body.insert("spectrum".into(), spectrum_json(&s));
    let completion = if d.is_at_equilibrium() {
        Completion::Complete
    } else {
        Completion::Partial(format!(
            "configuration is not an equilibrium (residual {:e}); stability flags are meaningless",
            d.equilibrium_residual
        ))
    };
    Ok(Report { artifacts: vec![Artifact::primary("modes.json", json_document("modes", cfg, body))], completion })
}

fn trajectory_csv(cfg: &RunConfig, t: &Trajectory) -> String {
    let n = t.positions.first().map_or(0, Vec::len);
    let mut csv = Csv::new("evolve", cfg);
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=n).map(|j| format!("x_{j}")));
    columns.extend((1..=n).map(|j| format!("v_{j}")));
    csv.columns(&columns);
    for ((time, x), v) in t.times.iter().zip(&t.positions).zip(&t.velocities) {
        let mut row = vec![num(*time)];
        row.extend(x.iter().map(|v| num(*v)));
        row.extend(v.iter().map(|v| num(*v)));
        csv.row(&row);
    }
    csv.finish()
}

fn intensity_csv(cfg: &RunConfig, t: &Trajectory) -> String {
    let mut csv = Csv::new("evolve", cfg);
    csv.columns(&["t", "grid_index", "x", "intensity"]);
    if let Some(grid) = &t.intensity_grid {
        for (time, frame) in t.times.iter().zip(&t.intensity_frames) {
            for (i, (x, value)) in grid.iter().zip(frame).enumerate() {
                csv.row(&[num(*time), i.to_string(), num(*x), num(*value)]);
            }
        }
    }
    csv.finish()
}

pub fn evolve(cfg: &RunConfig) -> Result<Report, CliError> {
    let (reference, eq) = reference(cfg)?;
    let params = cfg.params();
    let spectrum = if reference.len() >= 2 {
        let d = coupling_matrix(&reference, &params, cfg.delta)?;
        if d.is_at_equilibrium() {
            Some(mode_spectrum(&d, &params)?)
        } else {
            None
        }
    } else {
        None
    };

    let index = cfg.perturbation_target - 1;
    let start = match cfg.perturbation_kind {
        PerturbationKind::None => reference.clone(),
        PerturbationKind::Single => {
            perturb(&reference, &Perturbation::SingleParticle(index), cfg.perturbation_amplitude)?
        }
        PerturbationKind::Eigenvector => {
            let Some(s) = &spectrum else {
                return Err(ConfigError(
                    "eigenvector perturbation needs an equilibrium reference configuration".into(),
                )
                .into());
            };
            let z = s.modes[index].vector.clone();
            perturb(&reference, &Perturbation::Eigenvector(z), cfg.perturbation_amplitude)?
        }
    };
    let opts = IntegrateOptions {
        t_end: cfg.t_end,
        dt: cfg.dt,
        record_every: cfg.record_every,
        intensity_grid: cfg.intensity.then(|| default_intensity_grid(&start)),
    };
    let t = integrate(&start, &params, &opts)?;

    let mut summary = Map::new();
    if let Some(r) = &eq {
        summary.insert("equilibrium".into(), equilibrium_json(r));
    }
    summary.insert("breakup_time".into(), json!(t.breakup_time));
    summary.insert("aborted_at".into(), json!(t.aborted_at));
    summary.insert("samples".into(), json!(t.len()));
    summary.insert("max_deviation".into(), json!(t.max_deviation(reference.positions())));
    if let Some(s) = &spectrum {
        let g = measure_mode_growth(&t, &reference, s, cfg.fit_limit)?;
        let nan_to_null = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
        let rates: Vec<Value> = g
            .branch_rates
            .iter()
            .zip(&g.predicted_rates)
            .map(|(fit, pred)| {
                json!({
                    "fitted": [nan_to_null(fit[0]), nan_to_null(fit[1])],
                    "predicted": [pred[0], pred[1]],
                })
            })
            .collect();
        summary.insert(
            "mode_growth".into(),
            json!({
                "fit_window_end": g.times.last(),
                "condition_number": g.condition_number,
                "ill_conditioned": g.ill_conditioned,
                "rates": rates,
            }),
        );
    }
    if let Some(grid) = &t.intensity_grid {
        summary.insert("intensity_grid".into(), json!(grid));
    }

    let mut artifacts = vec![
        Artifact::primary("trajectory.csv", trajectory_csv(cfg, &t)),
        Artifact::secondary("summary.json", json_document("evolve", cfg, summary)),
    ];
    if cfg.intensity {
        artifacts.push(Artifact::secondary("intensity.csv", intensity_csv(cfg, &t)));
    }
    let completion = match t.aborted_at {
        Some(at) => Completion::Failed(format!("integration blew up at t = {at} tau; trajectory is partial")),
        None => Completion::Complete,
    };
    Ok(Report { artifacts, completion })
}

pub fn map(cfg: &RunConfig) -> Result<Report, CliError> {
    let opts = MapOptions {
        re_range: (cfg.map_re_min, cfg.map_re_max),
        im_range: (cfg.map_im_min, cfg.map_im_max),
        re_steps: cfg.map_re_steps,
        im_steps: cfg.map_im_steps,
        delta: cfg.delta,
        equilibrium: equilibrium_options(cfg),
        ..Default::default()
    };
    let m = stability_map(&cfg.params(), &opts)?;
    let fraction = m.converged_fraction();
    let artifact = match cfg.format {
        Format::Csv => {
            let mut csv = Csv::new("map", cfg);
            csv.comment(&format!("converged_fraction = {}", num(fraction)));
            csv.columns(&["zeta_re", "zeta_im", "max_re_nonzero", "residual", "converged"]);
            for c in &m.cells {
                let value = c.max_re_nonzero.map_or_else(|| "nan".to_string(), num);
                csv.row(&[num(c.zeta_re), num(c.zeta_im), value, num(c.residual), u8::from(c.converged).to_string()]);
            }
            Artifact::primary("map.csv", csv.finish())
        }
        Format::Json => {
            let mut body = Map::new();
            body.insert("n_particles".into(), json!(m.n_particles));
            body.insert("converged_fraction".into(), json!(fraction));
            body.insert("cells".into(), json!(m.cells));
            Artifact::primary("map.json", json_document("map", cfg, body))
        }
    };
    let completion = if fraction >= 0.99 {
        Completion::Complete
    } else {
        Completion::Partial(format!("only {:.1}% of map cells converged", 100.0 * fraction))
    };
    Ok(Report { artifacts: vec![artifact], completion })
}

pub fn oracle(cfg: &RunConfig) -> Result<Report, CliError> {
    let suite = oracle::run(cfg.seed, cfg.delta)?;
    let artifact = match cfg.format {
        Format::Csv => Artifact::primary("oracle.txt", suite.table(cfg)),
        Format::Json => Artifact::primary("oracle.json", json_document("oracle", cfg, suite.json())),
    };
    let completion = if suite.all_pass() {
        Completion::Complete
    } else {
        Completion::Failed(format!("{} oracle checks failed", suite.failures()))
    };
    Ok(Report { artifacts: vec![artifact], completion })
}
