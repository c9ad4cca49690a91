//! Physical parameters and particle configurations.
//!
//! Canonical units: wavelength λ = 1 (so k = 2π), ε0 = c = 1, mass 1 and
//! pump amplitude η = √2, which makes the pump pressure P_η = η²/2 = 1.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n_particles: usize,
    /// Dimensionless coupling of each scatterer to the guided mode.
    pub zeta: Complex64,
    /// Amplitude scattered from the transverse pump into the waveguide.
    pub eta: f64,
    pub mass: f64,
    /// Linear friction coefficient μ.
    pub friction: f64,
    pub wavelength: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self { n_particles: 1, zeta: Complex64::new(0.0, 0.0), eta: SQRT_2, mass: 1.0, friction: 0.0, wavelength: 1.0 }
    }
}

impl SystemParams {
    /// Canonical-unit parameters for `n_particles` scatterers with coupling `zeta`.
    pub fn new(n_particles: usize, zeta: Complex64) -> Self {
        Self { n_particles, zeta, ..Self::default() }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_friction(mut self, friction: f64) -> Self {
        self.friction = friction;
        self
    }

    pub fn with_zeta(mut self, zeta: Complex64) -> Self {
        self.zeta = zeta;
        self
    }

    pub fn with_n_particles(mut self, n: usize) -> Self {
        self.n_particles = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_particles < 1 {
            return bad("n_particles must be at least 1".into());
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be positive and finite, got {}", self.mass));
        }
        if !(self.friction >= 0.0 && self.friction.is_finite()) {
            return bad(format!("friction must be non-negative, got {}", self.friction));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return bad(format!("wavelength must be positive, got {}", self.wavelength));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be non-negative, got {}", self.eta));
        }
        if !(self.zeta.re.is_finite() && self.zeta.im.is_finite()) {
            return bad(format!("zeta must be finite, got {}", self.zeta));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Pump radiation pressure P_η = η²/2, the force unit.
    pub fn pump_pressure(&self) -> f64 {
        0.5 * self.eta * self.eta
    }

    /// Pump intensity I_η = c·P_η (c = 1), the intensity unit.
    pub fn pump_intensity(&self) -> f64 {
        self.pump_pressure()
    }

    /// P_η·k, the unit of coupling-matrix entries and eigenvalues.
    pub fn stiffness_scale(&self) -> f64 {
        self.pump_pressure() * self.wavenumber()
    }

    /// Two-particle binding frequency at ζ = 0, ω_{2,0} = √(2 P_η k / m).
    pub fn binding_frequency(&self) -> f64 {
        (2.0 * self.stiffness_scale() / self.mass).sqrt()
    }

    /// τ_{2,0} = 2π/ω_{2,0}.
    pub fn binding_period(&self) -> f64 {
        2.0 * PI / self.binding_frequency()
    }
}

/// Ordered particle positions (units of λ) with optional velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfiguration {
    positions: Vec<f64>,
    velocities: Option<Vec<f64>>,
}

impl ParticleConfiguration {
    /// Builds a configuration, rejecting anything that is not strictly increasing.
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("configuration needs at least one particle".into()));
        }
        if let Some(i) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("position {i} is not finite")));
        }
        if let Some(index) = first_ordering_violation(&positions) {
            return Err(Error::OrderingViolation { index });
        }
        Ok(Self { positions, velocities: None })
    }

    /// Skips the ordering check. Used where particles may transiently
    /// coincide, e.g. inside a time integration.
    pub fn from_positions_unchecked(positions: Vec<f64>) -> Self {
        Self { positions, velocities: None }
    }

    /// `n` particles spaced by `spacing`, first particle at the origin.
    pub fn equidistant(n: usize, spacing: f64) -> Result<Self> {
        Self::new((0..n).map(|j| j as f64 * spacing).collect())
    }

    /// Builds a configuration from its leftmost position and the gaps.
    pub fn from_spacings(start: f64, spacings: &[f64]) -> Result<Self> {
        let mut positions = Vec::with_capacity(spacings.len() + 1);
        positions.push(start);
        let mut x = start;
        for d in spacings {
            x += d;
            positions.push(x);
        }
        Self::new(positions)
    }

    pub fn with_velocities(mut self, velocities: Vec<f64>) -> Result<Self> {
        if velocities.len() != self.positions.len() {
            return Err(Error::InvalidParameter(format!(
                "{} velocities given for {} particles",
                velocities.len(),
                self.positions.len()
            )));
        }
        self.velocities = Some(velocities);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> Option<&[f64]> {
        self.velocities.as_deref()
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn center_of_mass(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.positions.len() as f64
    }

    pub fn is_ordered(&self) -> bool {
        first_ordering_violation(&self.positions).is_none()
    }

    /// Copy rigidly shifted so its center of mass equals `com`.
    pub fn recentered(&self, com: f64) -> Self {
        let shift = com - self.center_of_mass();
        Self { positions: self.positions.iter().map(|x| x + shift).collect(), velocities: self.velocities.clone() }
    }
}

fn first_ordering_violation(positions: &[f64]) -> Option<usize> {
    positions.windows(2).position(|w| !(w[1] > w[0]))
}
