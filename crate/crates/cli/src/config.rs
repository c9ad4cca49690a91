//! Flat `key = value` run configuration.

use std::fmt;
use std::path::PathBuf;

use optobind::oracles::LatticeSpec;
use optobind::{Complex64, ParticleConfiguration, SystemParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    None,
    Single,
    Eigenvector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_particles: usize,
    pub zeta_re: f64,
    pub zeta_im: f64,
    pub eta: f64,
    pub mass: f64,
    pub friction: f64,
    pub lattice_n: Option<usize>,
    pub spacing: Option<f64>,
    pub positions: Option<Vec<f64>>,
    pub equilibrate: bool,
    pub tolerance: f64,
    pub max_iter: usize,
    pub delta: f64,
    pub perturbation_kind: PerturbationKind,
    pub perturbation_amplitude: f64,
    /// 1-based particle index, or 1-based mode index for eigenvector kicks.
    pub perturbation_target: usize,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub intensity: bool,
    pub fit_limit: f64,
    pub map_re_min: f64,
    pub map_re_max: f64,
    pub map_im_min: f64,
    pub map_im_max: f64,
    pub map_re_steps: usize,
    pub map_im_steps: usize,
    pub format: Format,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_particles: 1,
            zeta_re: 0.0,
            zeta_im: 0.0,
            eta: std::f64::consts::SQRT_2,
            mass: 1.0,
            friction: 0.0,
            lattice_n: None,
            spacing: None,
            positions: None,
            equilibrate: true,
            tolerance: 1e-10,
            max_iter: 50,
            delta: 1e-6,
            perturbation_kind: PerturbationKind::None,
            perturbation_amplitude: 0.0,
            perturbation_target: 1,
            dt: 1.0 / 500.0,
            t_end: 10.0,
            record_every: 10,
            intensity: false,
            fit_limit: 0.02,
            map_re_min: -0.5,
            map_re_max: 0.5,
            map_im_min: 0.0,
            map_im_max: 0.5,
            map_re_steps: 11,
            map_im_steps: 6,
            format: Format::Csv,
            output_dir: None,
            seed: 1,
        }
    }
}

pub const KEYS: &[&str] = &[
    "n_particles",
    "zeta_re",
    "zeta_im",
    "eta",
    "mass",
    "friction",
    "lattice_n",
    "spacing",
    "positions",
    "equilibrate",
    "tolerance",
    "max_iter",
    "delta",
    "perturbation_kind",
    "perturbation_amplitude",
    "perturbation_target",
    "dt",
    "t_end",
    "record_every",
    "intensity",
    "fit_limit",
    "map_re_min",
    "map_re_max",
    "map_im_min",
    "map_im_max",
    "map_re_steps",
    "map_im_steps",
    "format",
    "output_dir",
    "seed",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError(format!("{key}: expected {what}, got '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => err(format!("{key}: expected true or false, got '{value}'")),
    }
}

fn optional(value: &str) -> bool {
    !(value.is_empty() || value == "none")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let real = "a number";
        let count = "a non-negative integer";
        match key {
            "n_particles" => self.n_particles = parse(key, v, count)?,
            "zeta_re" => self.zeta_re = parse(key, v, real)?,
            "zeta_im" => self.zeta_im = parse(key, v, real)?,
            "eta" => self.eta = parse(key, v, real)?,
            "mass" => self.mass = parse(key, v, real)?,
            "friction" => self.friction = parse(key, v, real)?,
            "lattice_n" => self.lattice_n = if optional(v) { Some(parse(key, v, count)?) } else { None },
            "spacing" => self.spacing = if optional(v) { Some(parse(key, v, real)?) } else { None },
            "positions" => {
                self.positions = if optional(v) {
                    Some(
                        v.split(',')
                            .map(|p| parse(key, p.trim(), "a comma-separated list of numbers"))
                            .collect::<Result<_, _>>()?,
                    )
                } else {
                    None
                }
            }
            "equilibrate" => self.equilibrate = parse_bool(key, v)?,
            "tolerance" => self.tolerance = parse(key, v, real)?,
            "max_iter" => self.max_iter = parse(key, v, count)?,
            "delta" => self.delta = parse(key, v, real)?,
            "perturbation_kind" => {
                self.perturbation_kind = match v {
                    "none" => PerturbationKind::None,
                    "single" | "single_particle" => PerturbationKind::Single,
                    "eigenvector" => PerturbationKind::Eigenvector,
                    _ => return err(format!("{key}: expected none, single or eigenvector, got '{v}'")),
                }
            }
            "perturbation_amplitude" => self.perturbation_amplitude = parse(key, v, real)?,
            "perturbation_target" => self.perturbation_target = parse(key, v, count)?,
            "dt" => self.dt = parse(key, v, real)?,
            "t_end" => self.t_end = parse(key, v, real)?,
            "record_every" => self.record_every = parse(key, v, count)?,
            "intensity" => self.intensity = parse_bool(key, v)?,
            "fit_limit" => self.fit_limit = parse(key, v, real)?,
            "map_re_min" => self.map_re_min = parse(key, v, real)?,
            "map_re_max" => self.map_re_max = parse(key, v, real)?,
            "map_im_min" => self.map_im_min = parse(key, v, real)?,
            "map_im_max" => self.map_im_max = parse(key, v, real)?,
            "map_re_steps" => self.map_re_steps = parse(key, v, count)?,
            "map_im_steps" => self.map_im_steps = parse(key, v, count)?,
            "format" => {
                self.format = match v {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return err(format!("{key}: expected csv or json, got '{v}'")),
                }
            }
            "output_dir" => self.output_dir = if optional(v) { Some(PathBuf::from(v)) } else { None },
            "seed" => self.seed = parse(key, v, count)?,
            _ => return err(format!("unknown key '{key}' (known keys: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Applies a config text. Lines are `key = value`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("{origin}:{}: expected 'key = value', got '{line}'", number + 1));
            };
            self.set(key.trim(), value).map_err(|e| ConfigError(format!("{origin}:{}: {e}", number + 1)))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn apply_override(&mut self, text: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = text.split_once('=') else {
            return err(format!("override '{text}' is not of the form key=value"));
        };
        self.set(key.trim(), value)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.positions.is_some() && self.lattice_n.is_some() {
            return err("positions and lattice_n are mutually exclusive; set only one");
        }
        if self.positions.is_some() && self.spacing.is_some() {
            return err("positions and spacing are mutually exclusive; set only one");
        }
        if self.lattice_n.is_some() && self.spacing.is_some() {
            return err("lattice_n and spacing are mutually exclusive; set only one");
        }
        if self.n_particles == 0 {
            return err("n_particles must be at least 1");
        }
        if let Some(p) = &self.positions {
            if p.len() != self.n_particles {
                return err(format!("positions lists {} values but n_particles = {}", p.len(), self.n_particles));
            }
        }
        if let Some(n) = self.lattice_n {
            if n < 1 || n > self.n_particles {
                return err(format!("lattice_n must lie in 1..={}, got {n}", self.n_particles));
            }
        }
        if let Some(d) = self.spacing {
            if !(d > 0.0 && d.is_finite()) {
                return err(format!("spacing must be positive, got {d}"));
            }
        }
        let positive = [
            ("mass", self.mass),
            ("tolerance", self.tolerance),
            ("delta", self.delta),
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("fit_limit", self.fit_limit),
        ];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return err(format!("{key} must be positive and finite, got {value}"));
            }
        }
        let non_negative =
            [("eta", self.eta), ("friction", self.friction), ("perturbation_amplitude", self.perturbation_amplitude)];
        for (key, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return err(format!("{key} must be non-negative and finite, got {value}"));
            }
        }
        for (key, value) in [("zeta_re", self.zeta_re), ("zeta_im", self.zeta_im)] {
            if !value.is_finite() {
                return err(format!("{key} must be finite"));
            }
        }
        if self.record_every == 0 {
            return err("record_every must be at least 1");
        }
        if self.max_iter == 0 {
            return err("max_iter must be at least 1");
        }
        if self.map_re_steps < 2 || self.map_im_steps < 2 {
            return err("map_re_steps and map_im_steps must be at least 2");
        }
        if self.perturbation_kind != PerturbationKind::None
            && !(1..=self.n_particles).contains(&self.perturbation_target)
        {
            return err(format!(
                "perturbation_target is 1-based and must lie in 1..={}, got {}",
                self.n_particles, self.perturbation_target
            ));
        }
        Ok(())
    }

    pub fn zeta(&self) -> Complex64 {
        Complex64::new(self.zeta_re, self.zeta_im)
    }

    pub fn params(&self) -> SystemParams {
        SystemParams::new(self.n_particles, self.zeta())
            .with_eta(self.eta)
            .with_mass(self.mass)
            .with_friction(self.friction)
    }

    /// Explicit positions, else an equidistant array (lattice index or
    /// spacing), else the widest zero-force lattice.
    pub fn configuration(&self) -> Result<ParticleConfiguration, ConfigError> {
        let n = self.n_particles;
        let wrap = |e: optobind::Error| ConfigError(format!("initial configuration: {e}"));
        if let Some(p) = &self.positions {
            return ParticleConfiguration::new(p.clone()).map_err(wrap);
        }
        if n == 1 {
            return ParticleConfiguration::new(vec![0.0]).map_err(wrap);
        }
        let spacing = match (self.spacing, self.lattice_n) {
            (Some(d), _) => d,
            (None, Some(idx)) => LatticeSpec::new(n, idx).map_err(wrap)?.spacing(),
            (None, None) => LatticeSpec::widest(n).map_err(wrap)?.spacing(),
        };
        ParticleConfiguration::equidistant(n, spacing).map_err(wrap)
    }

    /// Every key with its resolved value, in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let kind = match self.perturbation_kind {
            PerturbationKind::None => "none",
            PerturbationKind::Single => "single",
            PerturbationKind::Eigenvector => "eigenvector",
        };
        let format = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        vec![
            ("n_particles", self.n_particles.to_string()),
            ("zeta_re", self.zeta_re.to_string()),
            ("zeta_im", self.zeta_im.to_string()),
            ("eta", self.eta.to_string()),
            ("mass", self.mass.to_string()),
            ("friction", self.friction.to_string()),
            ("lattice_n", opt(self.lattice_n.map(|v| v.to_string()))),
            ("spacing", opt(self.spacing.map(|v| v.to_string()))),
            (
                "positions",
                opt(self.positions.as_ref().map(|p| p.iter().map(f64::to_string).collect::<Vec<_>>().join(", "))),
            ),
            ("equilibrate", self.equilibrate.to_string()),
            ("tolerance", self.tolerance.to_string()),
            ("max_iter", self.max_iter.to_string()),
            ("delta", self.delta.to_string()),
            ("perturbation_kind", kind.into()),
            ("perturbation_amplitude", self.perturbation_amplitude.to_string()),
            ("perturbation_target", self.perturbation_target.to_string()),
            ("dt", self.dt.to_string()),
            ("t_end", self.t_end.to_string()),
            ("record_every", self.record_every.to_string()),
            ("intensity", self.intensity.to_string()),
            ("fit_limit", self.fit_limit.to_string()),
            ("map_re_min", self.map_re_min.to_string()),
            ("map_re_max", self.map_re_max.to_string()),
            ("map_im_min", self.map_im_min.to_string()),
            ("map_im_max", self.map_im_max.to_string()),
            ("map_re_steps", self.map_re_steps.to_string()),
            ("map_im_steps", self.map_im_steps.to_string()),
            ("format", format.into()),
            ("output_dir", opt(self.output_dir.as_ref().map(|p| p.display().to_string()))),
            ("seed", self.seed.to_string()),
        ]
    }
}

pub const PRESETS: &[(&str, &str)] = &[
    ("fig2", include_str!("../presets/fig2.conf")),
    ("fig3a", include_str!("../presets/fig3a.conf")),
    ("fig3b", include_str!("../presets/fig3b.conf")),
    ("fig4a", include_str!("../presets/fig4a.conf")),
    ("fig4b", include_str!("../presets/fig4b.conf")),
    ("fig5a", include_str!("../presets/fig5a.conf")),
    ("fig5b", include_str!("../presets/fig5b.conf")),
    ("fig5c", include_str!("../presets/fig5c.conf")),
    ("fig5d", include_str!("../presets/fig5d.conf")),
    ("fig6a", include_str!("../presets/fig6a.conf")),
    ("fig6b", include_str!("../presets/fig6b.conf")),
    ("three-particle-a", include_str!("../presets/three-particle-a.conf")),
    ("three-particle-b", include_str!("../presets/three-particle-b.conf")),
];

pub fn preset(name: &str) -> Result<&'static str, ConfigError> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        ConfigError(format!("unknown preset '{name}' (available: {})", names.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# header\nn_particles = 3  # trio\nzeta_re = 0.1111\n\npositions = 0, 0.8, 1.7\n", "test")
            .unwrap();
        c.apply_override("zeta_im=0.5").unwrap();
        assert_eq!(c.n_particles, 3);
        assert_eq!(c.zeta(), Complex64::new(0.1111, 0.5));
        assert_eq!(c.configuration().unwrap().positions(), &[0.0, 0.8, 1.7]);
        c.validate().unwrap();
    }

    #[test]
    fn errors_name_the_key() {
        let mut c = RunConfig::default();
        let e = c.apply_text("n_particles = three\n", "cfg").unwrap_err();
        assert!(e.0.contains("n_particles") && e.0.contains("cfg:1"), "{e}");
        assert!(c.set("bogus", "1").unwrap_err().0.contains("bogus"));
        assert!(c.apply_text("just words\n", "cfg").is_err());
    }

    #[test]
    fn exclusive_geometry_keys() {
        let mut c = RunConfig::default();
        c.apply_text("n_particles = 2\npositions = 0, 1\nlattice_n = 1\n", "cfg").unwrap();
        assert!(c.validate().unwrap_err().0.contains("mutually exclusive"));
    }

    #[test]
    fn default_geometry_is_widest_lattice() {
        let mut c = RunConfig::default();
        c.set("n_particles", "10").unwrap();
        let x = c.configuration().unwrap();
        assert!((x.spacings()[0] - 0.95).abs() < 1e-15);
        c.set("lattice_n", "9").unwrap();
        assert!((c.configuration().unwrap().spacings()[0] - 0.85).abs() < 1e-15);
    }

    #[test]
    fn presets_parse_and_validate() {
        for (name, text) in PRESETS {
            let mut c = RunConfig::default();
            c.apply_text(text, name).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn entries_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text("n_particles = 4\nspacing = 0.9\nperturbation_kind = single\nformat = json\n", "cfg").unwrap();
        let text: String = c.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let mut d = RunConfig::default();
        d.apply_text(&text, "roundtrip").unwrap();
        assert_eq!(c, d);
    }
}
