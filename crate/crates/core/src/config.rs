//! Run configuration: a sectioned TOML file with dotted keys such as
//! `materials.lambda_cu = 400` or `spray.h = "22.485 kW/Km2"`.
//!
//! Every key is optional and defaults to the reference winding. Unknown keys
//! are rejected. Quantities are SI numbers or strings with a unit suffix.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{CrossSectionSpec, Probe};
use crate::model::ModelParameters;
use crate::postproc::SweepParameter;
use crate::solver::{SolverMethod, SolverOptions};
use crate::spray::SprayParameters;
use crate::units::{Dimension, Quantity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub total_area: Quantity,
    pub n_layers: usize,
    pub wires_per_layer: usize,
    pub fill_factor: Quantity,
    /// height / width
    pub slot_aspect_ratio: f64,
    pub wire_columns: usize,
    /// Cells across the shorter side.
    pub resolution: usize,
    /// Replaces the generated probe set when non-empty.
    pub probes: Vec<ProbeConfig>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            total_area: "107.7 mm2".into(),
            n_layers: 2,
            wires_per_layer: 18,
            fill_factor: 0.59.into(),
            slot_aspect_ratio: 4.0,
            wire_columns: 3,
            resolution: 64,
            probes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub label: u8,
    pub x: Quantity,
    pub y: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxialConfig {
    pub n_slot: usize,
    pub n_overhang: usize,
    pub slot_half_length: Quantity,
    pub overhang_half_length: Quantity,
}

impl Default for AxialConfig {
    fn default() -> Self {
        Self {
            n_slot: 6,
            n_overhang: 4,
            slot_half_length: "50 mm".into(),
            overhang_half_length: "33.3 mm".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialsConfig {
    pub lambda_cu: Quantity,
    pub lambda_ins: Quantity,
    pub lambda_film: Quantity,
    pub sigma_cu: Quantity,
    pub current_density: Quantity,
    /// Copper heat source at `current_density`; `J² / σ` when absent.
    pub source_density: Option<Quantity>,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        Self {
            lambda_cu: "400 W/Km".into(),
            lambda_ins: "0.7 W/Km".into(),
            lambda_film: "0.6 W/Km".into(),
            sigma_cu: "60 MS/m".into(),
            current_density: "10 A/mm2".into(),
            source_density: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SprayConfig {
    pub density: Quantity,
    pub viscosity: Quantity,
    pub surface_tension: Quantity,
    pub droplet_diameter: Quantity,
    pub impact_velocity: Quantity,
    pub film_thickness: Quantity,
    pub mass_flux: Quantity,
    /// Effective heat transfer coefficient on the overhang surface.
    pub h: Quantity,
    pub temperature: Quantity,
}

impl Default for SprayConfig {
    fn default() -> Self {
        Self {
            density: "1000 kg/m3".into(),
            viscosity: "1 mPa s".into(),
            surface_tension: "72.8 mN/m".into(),
            droplet_diameter: "497 um".into(),
            impact_velocity: "7.77 m/s".into(),
            film_thickness: "91 um".into(),
            mass_flux: "5.3 kg/m2s".into(),
            h: "22.485 kW/Km2".into(),
            temperature: "293 K".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub method: SolverMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50_000,
            method: SolverMethod::CgTensor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    /// Samples per probe profile along the axis.
    pub probe_samples: usize,
    pub mesh_file: String,
    pub probes_file: String,
    pub sweep_file: String,
    pub metadata_file: String,
    /// Axial positions of the cross-section VTK exports; empty disables them.
    pub vtk_sections: Vec<Quantity>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            probe_samples: 101,
            mesh_file: "mesh.txt".into(),
            probes_file: "probes.csv".into(),
            sweep_file: "sweep.csv".into(),
            metadata_file: "metadata.json".into(),
            vtk_sections: vec!["0 mm".into(), "50 mm".into(), "83.3 mm".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: Option<String>,
    pub values: Vec<Quantity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub axial: AxialConfig,
    pub materials: MaterialsConfig,
    pub spray: SprayConfig,
    pub solver: SolverConfig,
    pub outputs: OutputsConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.to_model_parameters()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Converts to SI and checks every value.
    pub fn to_model_parameters(&self) -> Result<ModelParameters> {
        use Dimension::*;
        let g = &self.geometry;
        let si = |q: &Quantity, d: Dimension, key: &str| {
            q.to_si(d).map_err(|e| Error::Config(format!("{key}: {e}")))
        };
        let probe_points = if g.probes.is_empty() {
            None
        } else {
            Some(
                g.probes
                    .iter()
                    .map(|p| {
                        Ok(Probe {
                            label: p.label,
                            point: [
                                si(&p.x, Length, "geometry.probes.x")?,
                                si(&p.y, Length, "geometry.probes.y")?,
                            ],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let geometry = CrossSectionSpec {
            total_area: si(&g.total_area, Area, "geometry.total_area")?,
            n_layers: g.n_layers,
            wires_per_layer: g.wires_per_layer,
            fill_factor: si(&g.fill_factor, Dimensionless, "geometry.fill_factor")?,
            slot_aspect_ratio: g.slot_aspect_ratio,
            wire_columns: g.wire_columns,
            probe_points,
        };
        geometry
            .validate()
            .map_err(|e| Error::Config(format!("geometry: {e}")))?;
        if g.resolution == 0 {
            return Err(Error::Config("geometry.resolution must be positive".into()));
        }
        let a = &self.axial;
        if a.n_slot == 0 || a.n_overhang == 0 {
            return Err(Error::Config(format!(
                "axial.n_slot and axial.n_overhang must be positive, got ({}, {})",
                a.n_slot, a.n_overhang
            )));
        }
        let m = &self.materials;
        let s = &self.spray;
        let spray = SprayParameters {
            density: si(&s.density, Density, "spray.density")?,
            viscosity: si(&s.viscosity, Viscosity, "spray.viscosity")?,
            surface_tension: si(&s.surface_tension, SurfaceTension, "spray.surface_tension")?,
            droplet_diameter: si(&s.droplet_diameter, Length, "spray.droplet_diameter")?,
            impact_velocity: si(&s.impact_velocity, Velocity, "spray.impact_velocity")?,
            film_thickness: si(&s.film_thickness, Length, "spray.film_thickness")?,
            mass_flux: si(&s.mass_flux, MassFlux, "spray.mass_flux")?,
            heat_transfer_coefficient: si(&s.h, HeatTransferCoefficient, "spray.h")?,
            temperature: si(&s.temperature, Temperature, "spray.temperature")?,
        };
        spray
            .validate()
            .map_err(|e| Error::Config(format!("spray: {e}")))?;
        let params = ModelParameters {
            geometry,
            resolution: g.resolution,
            n_slot: a.n_slot,
            n_overhang: a.n_overhang,
            slot_half_length: si(&a.slot_half_length, Length, "axial.slot_half_length")?,
            overhang_half_length: si(
                &a.overhang_half_length,
                Length,
                "axial.overhang_half_length",
            )?,
            lambda_copper: si(&m.lambda_cu, ThermalConductivity, "materials.lambda_cu")?,
            lambda_insulation: si(&m.lambda_ins, ThermalConductivity, "materials.lambda_ins")?,
            lambda_film: si(&m.lambda_film, ThermalConductivity, "materials.lambda_film")?,
            copper_conductivity: si(&m.sigma_cu, ElectricalConductivity, "materials.sigma_cu")?,
            current_density: si(
                &m.current_density,
                CurrentDensity,
                "materials.current_density",
            )?,
            source_density: m
                .source_density
                .as_ref()
                .map(|q| si(q, PowerDensity, "materials.source_density"))
                .transpose()?,
            spray,
            solver: SolverOptions {
                tol: self.solver.tol,
                max_iter: self.solver.max_iter,
                method: self.solver.method,
            },
        };
        let positive = [
            ("axial.slot_half_length", params.slot_half_length),
            ("axial.overhang_half_length", params.overhang_half_length),
            ("materials.lambda_cu", params.lambda_copper),
            ("materials.lambda_ins", params.lambda_insulation),
            ("materials.lambda_film", params.lambda_film),
            ("materials.sigma_cu", params.copper_conductivity),
            ("solver.tol", params.solver.tol),
        ];
        if let Some((key, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{key} must be positive, got {v}")));
        }
        if !(params.current_density >= 0.0) {
            return Err(Error::Config(
                "materials.current_density must be non-negative".into(),
            ));
        }
        if let Some(p) = params.source_density {
            if !(p >= 0.0) {
                return Err(Error::Config(
                    "materials.source_density must be non-negative".into(),
                ));
            }
        }
        if self.solver.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be positive".into()));
        }
        if self.outputs.probe_samples < 2 {
            return Err(Error::Config(
                "outputs.probe_samples must be at least 2".into(),
            ));
        }
        Ok(params)
    }

    pub fn vtk_sections(&self) -> Result<Vec<f64>> {
        self.outputs
            .vtk_sections
            .iter()
            .map(|q| {
                q.to_si(Dimension::Length)
                    .map_err(|e| Error::Config(format!("outputs.vtk_sections: {e}")))
            })
            .collect()
    }

    /// Sweep parameter and SI values from the `[sweep]` section.
    pub fn sweep_spec(&self) -> Result<Option<(SweepParameter, Vec<f64>)>> {
        let Some(name) = &self.sweep.parameter else {
            return Ok(None);
        };
        let parameter: SweepParameter = name
            .parse()
            .map_err(|e| Error::Config(format!("sweep.parameter: {e}")))?;
        let values = self
            .sweep
            .values
            .iter()
            .map(|q| parse_sweep_value(q, parameter))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some((parameter, values)))
    }
}

pub fn sweep_dimension(parameter: SweepParameter) -> Dimension {
    match parameter {
        SweepParameter::CurrentDensity => Dimension::CurrentDensity,
        SweepParameter::HeatTransferCoefficient => Dimension::HeatTransferCoefficient,
    }
}

pub fn parse_sweep_value(q: &Quantity, parameter: SweepParameter) -> Result<f64> {
    q.to_si(sweep_dimension(parameter))
        .map_err(|e| Error::Config(format!("sweep value: {e}")))
}
