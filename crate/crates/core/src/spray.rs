//! Droplet impact correlations and the resulting cooling parameters.

use serde::Serialize;

use crate::error::{Error, Result};

/// Range accepted for the effective heat transfer coefficient, W/(K·m²).
pub const H_RANGE: (f64, f64) = (1e2, 1e6);

/// Above this value of `K^1.6` the exponential in the splash mass ratio
/// underflows relative to 0.5 and the correlation is outside its fitted range.
pub const SPLASH_EXPONENT_LIMIT: f64 = 50.0;

/// Liquid properties, droplet kinematics and the effective cooling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprayParameters {
    /// kg/m³
    pub density: f64,
    /// Pa·s
    pub viscosity: f64,
    /// N/m
    pub surface_tension: f64,
    /// Mean droplet diameter, m.
    pub droplet_diameter: f64,
    /// Mean droplet impact velocity, m/s.
    pub impact_velocity: f64,
    /// Liquid film thickness on the wall, m.
    pub film_thickness: f64,
    /// kg/(s·m²)
    pub mass_flux: f64,
    /// Effective heat transfer coefficient, W/(K·m²).
    pub heat_transfer_coefficient: f64,
    /// Coolant temperature, K.
    pub temperature: f64,
}

impl Default for SprayParameters {
    fn default() -> Self {
        Self {
            density: 1000.0,
            viscosity: 1e-3,
            surface_tension: 0.0728,
            droplet_diameter: 497e-6,
            impact_velocity: 7.77,
            film_thickness: 91e-6,
            mass_flux: 5.3,
            heat_transfer_coefficient: 22485.0,
            temperature: 293.0,
        }
    }
}

impl SprayParameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("density", self.density),
            ("viscosity", self.viscosity),
            ("surface_tension", self.surface_tension),
            ("droplet_diameter", self.droplet_diameter),
            ("impact_velocity", self.impact_velocity),
            ("temperature", self.temperature),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("film_thickness", self.film_thickness),
            ("mass_flux", self.mass_flux),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        let h = self.heat_transfer_coefficient;
        if !(h >= H_RANGE.0 && h <= H_RANGE.1) {
            return Err(Error::InvalidInput(format!(
                "heat transfer coefficient {h} W/(K·m²) outside [{:e}, {:e}]",
                H_RANGE.0, H_RANGE.1
            )));
        }
        Ok(())
    }

    pub fn dimensionless_groups(&self) -> Result<DimensionlessGroups> {
        self.validate()?;
        dimensionless_groups(
            self.density,
            self.droplet_diameter,
            self.impact_velocity,
            self.viscosity,
            self.surface_tension,
            self.film_thickness,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionlessGroups {
    pub reynolds: f64,
    pub weber: f64,
    /// Film thickness over droplet diameter.
    pub film_ratio: f64,
}

pub fn dimensionless_groups(
    density: f64,
    diameter: f64,
    velocity: f64,
    viscosity: f64,
    surface_tension: f64,
    film_thickness: f64,
) -> Result<DimensionlessGroups> {
    for (name, v) in [
        ("density", density),
        ("diameter", diameter),
        ("viscosity", viscosity),
        ("surface_tension", surface_tension),
    ] {
        if !(v > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if !(velocity >= 0.0) || !(film_thickness >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "velocity and film thickness must be non-negative, got {velocity} and {film_thickness}"
        )));
    }
    Ok(DimensionlessGroups {
        reynolds: density * diameter * velocity / viscosity,
        weber: density * diameter * velocity * velocity / surface_tension,
        film_ratio: film_thickness / diameter,
    })
}

/// `K_splash = (2100 + 5800 δ^1.44)^0.625`
pub fn splash_threshold(film_ratio: f64) -> Result<f64> {
    if !(film_ratio >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "film ratio must be non-negative, got {film_ratio}"
        )));
    }
    Ok((2100.0 + 5800.0 * film_ratio.powf(1.44)).powf(0.625))
}

/// `K = We^0.5 Re^0.25`
pub fn k_number(weber: f64, reynolds: f64) -> Result<f64> {
    if !(weber >= 0.0) || !(reynolds >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "We and Re must be non-negative, got {weber} and {reynolds}"
        )));
    }
    Ok(weber.sqrt() * reynolds.powf(0.25))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassRatios {
    /// Fraction of the impinging mass that is splashed away.
    pub splashed: f64,
    /// Fraction that stays on the wall.
    pub deposited: f64,
    /// Set when `K^1.6` exceeds [`SPLASH_EXPONENT_LIMIT`].
    pub saturated: bool,
}

/// Splashed fraction `0.5 - 0.62 exp(-K^1.6)`, clamped to `[0, 1]`.
pub fn mass_ratios(k: f64) -> Result<MassRatios> {
    if !(k >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "K must be non-negative, got {k}"
        )));
    }
    let e = k.powf(1.6);
    let splashed = (0.5 - 0.62 * (-e).exp()).clamp(0.0, 1.0);
    Ok(MassRatios {
        splashed,
        deposited: 1.0 - splashed,
        saturated: e > SPLASH_EXPONENT_LIMIT,
    })
}

/// Joule loss density `J² / σ` in W/m³ from A/m² and S/m.
pub fn joule_loss_density(current_density: f64, conductivity: f64) -> Result<f64> {
    if !(conductivity > 0.0) || !current_density.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need finite current density and positive conductivity, got {current_density} and {conductivity}"
        )));
    }
    Ok(current_density * current_density / conductivity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactRegime {
    BelowThresholdDeposition,
    Splash,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactClassification {
    pub regime: ImpactRegime,
    pub k: f64,
    pub k_splash: f64,
    pub film_ratio: f64,
    pub ratios: MassRatios,
}

impl std::fmt::Display for ImpactClassification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let regime = match self.regime {
            ImpactRegime::BelowThresholdDeposition => "below_threshold_deposition",
            ImpactRegime::Splash => "splash",
        };
        write!(
            f,
            "K={:.4} K_splash={:.4} regime={regime} eta_dep={:.6}",
            self.k, self.k_splash, self.ratios.deposited
        )?;
        if self.ratios.saturated {
            write!(f, " warning=splash_ratio_saturated")?;
        }
        Ok(())
    }
}

/// Splash when `K > K_splash`, deposition otherwise.
pub fn classify_impact(weber: f64, reynolds: f64, film_ratio: f64) -> Result<ImpactClassification> {
    let k = k_number(weber, reynolds)?;
    let k_splash = splash_threshold(film_ratio)?;
    let regime = if k > k_splash {
        ImpactRegime::Splash
    } else {
        ImpactRegime::BelowThresholdDeposition
    };
    Ok(ImpactClassification {
        regime,
        k,
        k_splash,
        film_ratio,
        ratios: mass_ratios(k)?,
    })
}

/// Classifies the droplet impact described by `spray`.
pub fn classify_spray(spray: &SprayParameters) -> Result<ImpactClassification> {
    let g = spray.dimensionless_groups()?;
    classify_impact(g.weber, g.reynolds, g.film_ratio)
}
