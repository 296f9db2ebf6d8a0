//! End-to-end winding model: cross-section, axial grid, materials, cooling.

use std::sync::Arc;

use serde::Serialize;

use crate::axial::{AxialGrid, OVERHANG_HALF_LENGTH, SLOT_HALF_LENGTH};
use crate::error::{Error, Result};
use crate::fem::MaterialField;
use crate::mesh::{generate_cross_section, CrossSection, CrossSectionSpec};
use crate::postproc::{energy_balance, EnergyBalance, SolutionField, WindingMetrics};
use crate::quasi3d::{Cooling, Quasi3DSystem, SystemBuilder, TensorPreconditioner};
use crate::solver::{SolveReport, SolverMethod, SolverOptions};
use crate::spray::SprayParameters;

/// Every input of a run, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParameters {
    pub geometry: CrossSectionSpec,
    /// Cells across the shorter side of the cross-section.
    pub resolution: usize,
    pub n_slot: usize,
    pub n_overhang: usize,
    /// m
    pub slot_half_length: f64,
    /// m
    pub overhang_half_length: f64,
    /// W/(K·m)
    pub lambda_copper: f64,
    /// W/(K·m)
    pub lambda_insulation: f64,
    /// Film conductivity, W/(K·m). Carried for reference only: the effective
    /// heat transfer coefficient already includes the film.
    pub lambda_film: f64,
    /// S/m
    pub copper_conductivity: f64,
    /// A/m²
    pub current_density: f64,
    /// W/m³ at `current_density`; `J² / σ` when unset.
    pub source_density: Option<f64>,
    pub spray: SprayParameters,
    pub solver: SolverOptions,
}

impl Default for ModelParameters {
    fn default() -> Self {
        Self {
            geometry: CrossSectionSpec::default(),
            resolution: 64,
            n_slot: 6,
            n_overhang: 4,
            slot_half_length: SLOT_HALF_LENGTH,
            overhang_half_length: OVERHANG_HALF_LENGTH,
            lambda_copper: 400.0,
            lambda_insulation: 0.7,
            lambda_film: 0.6,
            copper_conductivity: 60e6,
            current_density: 10e6,
            source_density: None,
            spray: SprayParameters::default(),
            solver: SolverOptions {
                method: SolverMethod::CgTensor,
                ..Default::default()
            },
        }
    }
}

impl ModelParameters {
    /// Heat source density in copper at `current_density`.
    pub fn source_density_at(&self, current_density: f64) -> Result<f64> {
        match self.source_density {
            None => crate::spray::joule_loss_density(current_density, self.copper_conductivity),
            Some(p) if self.current_density > 0.0 => {
                Ok(p * (current_density / self.current_density).powi(2))
            }
            Some(p) if current_density == self.current_density => Ok(p),
            Some(_) => Err(Error::InvalidInput(
                "a source density override needs a positive reference current density to rescale"
                    .into(),
            )),
        }
    }
}

/// Solved field with the system and solver diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub system: Quasi3DSystem,
    pub field: SolutionField,
    pub report: SolveReport,
    pub energy: EnergyBalance,
}

/// Meshed and assembled model; cheap to re-solve for other current
/// densities and heat transfer coefficients.
#[derive(Debug, Clone)]
pub struct WindingModel {
    params: ModelParameters,
    section: CrossSection,
    builder: SystemBuilder,
}

impl WindingModel {
    pub fn new(params: ModelParameters) -> Result<Self> {
        params.spray.validate()?;
        let section = generate_cross_section(&params.geometry, params.resolution)?;
        let grid = AxialGrid::uniform(
            params.slot_half_length,
            params.overhang_half_length,
            params.n_slot,
            params.n_overhang,
        )?;
        // Unit source here; `system` scales to the requested density.
        let materials =
            MaterialField::winding(params.lambda_copper, params.lambda_insulation, 1.0)?;
        let builder = SystemBuilder::new(Arc::new(section.mesh.clone()), grid, materials)?;
        Ok(Self {
            params,
            section,
            builder,
        })
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn section(&self) -> &CrossSection {
        &self.section
    }

    pub fn grid(&self) -> &AxialGrid {
        self.builder.grid()
    }

    pub fn builder(&self) -> &SystemBuilder {
        &self.builder
    }

    pub fn system(&self, current_density: f64, h: f64) -> Result<Quasi3DSystem> {
        let spray = SprayParameters {
            heat_transfer_coefficient: h,
            ..self.params.spray
        };
        spray.validate()?;
        let p = self.params.source_density_at(current_density)?;
        self.builder.build(
            Cooling {
                h,
                ambient: spray.temperature,
            },
            p,
        )
    }

    pub fn metrics(&self, solution: &Solution) -> Result<WindingMetrics> {
        let tags: Vec<&str> = self
            .builder
            .cooled_tags()
            .iter()
            .map(String::as_str)
            .collect();
        let cooled = self.section.mesh.boundary_nodes(&tags);
        WindingMetrics::compute(&solution.field, &self.section.probes, &cooled)
    }

    /// Solve at the configured current density and cooling.
    pub fn solve(&self) -> Result<Solution> {
        self.solve_at(
            self.params.current_density,
            self.params.spray.heat_transfer_coefficient,
        )
    }

    pub fn solve_at(&self, current_density: f64, h: f64) -> Result<Solution> {
        let system = self.system(current_density, h)?;
        self.finish(system, None)
    }

    /// Solves `system`, reusing `pc` when given.
    pub fn finish(
        &self,
        system: Quasi3DSystem,
        pc: Option<&TensorPreconditioner>,
    ) -> Result<Solution> {
        let owned;
        let pc = match pc {
            Some(pc) => Some(pc),
            None => {
                owned = system.preconditioner(&self.params.solver)?;
                owned.as_ref()
            }
        };
        let (u, report) = system.solve_preconditioned(&self.params.solver, pc)?;
        let energy = energy_balance(&system, &u);
        let field = SolutionField::new(Arc::clone(self.builder.mesh()), self.grid().clone(), u)?;
        Ok(Solution {
            system,
            field,
            report,
            energy,
        })
    }
}
