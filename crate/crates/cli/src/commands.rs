use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde_json::{json, Value};

use quasitherm::config::parse_sweep_value;
use quasitherm::mesh::{generate_cross_section, write_mesh};
use quasitherm::postproc::{
    axial_profiles, export_cross_section, export_probes_csv, export_sweep_csv, sweep as run_sweep,
};
use quasitherm::spray::{classify_impact, classify_spray};
use quasitherm::validation::run_validation;
use quasitherm::{Error, ModelParameters, Quantity, RunConfig, SweepParameter, WindingModel};

use crate::{SprayArgs, SweepArgs, ValidateArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Stage { stage: &'static str, error: Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stage {
                stage: "config", ..
            } => 2,
            CliError::Stage {
                error: Error::Config(_),
                ..
            } => 2,
            CliError::Stage { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Stage {
                error: error @ Error::Config(_),
                ..
            } => write!(f, "{error}"),
            CliError::Stage { stage, error } => write!(f, "{stage}: {error}"),
        }
    }
}

fn at(stage: &'static str) -> impl FnOnce(Error) -> CliError {
    move |error| CliError::Stage { stage, error }
}

pub struct Context {
    pub config: RunConfig,
    pub params: ModelParameters,
    config_source: String,
    out: PathBuf,
}

impl Context {
    pub fn new(config: Option<&Path>, out: PathBuf, threads: usize) -> Result<Self, CliError> {
        let (config, config_source) = match config {
            Some(path) => (
                RunConfig::load(path).map_err(at("config"))?,
                path.display().to_string(),
            ),
            None => (RunConfig::default(), "defaults".to_string()),
        };
        let params = config.to_model_parameters().map_err(at("config"))?;
        if threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
        }
        Ok(Self {
            config,
            params,
            config_source,
            out,
        })
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| {
            at("output")(Error::Io {
                path: self.out.clone(),
                source: e,
            })
        })?;
        Ok(&self.out)
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, CliError> {
        Ok(self.out_dir()?.join(name))
    }

    /// Writes the run metadata next to the outputs and returns its path.
    fn write_metadata(&self, command: &str, extra: Value) -> Result<PathBuf, CliError> {
        let mut meta = json!({
            "tool": "quasitherm",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config_source": self.config_source,
            "config": self.config,
            "parameters_si": self.params,
            "threads": rayon::current_num_threads(),
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
            m.extend(e);
        }
        let path = self.out_file(&self.config.outputs.metadata_file)?;
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        fs::write(&path, text + "\n").map_err(|e| {
            at("output")(Error::Io {
                path: path.clone(),
                source: e,
            })
        })?;
        Ok(path)
    }
}

pub fn mesh(ctx: &Context) -> Result<ExitCode, CliError> {
    let section =
        generate_cross_section(&ctx.params.geometry, ctx.params.resolution).map_err(at("mesh"))?;
    let path = ctx.out_file(&ctx.config.outputs.mesh_file)?;
    write_mesh(&section.mesh, &path).map_err(at("output"))?;
    let hash = section.mesh.content_hash();
    let m = &section.mesh;
    println!(
        "nodes={} triangles={} boundary_edges={} fill_factor={:.4} (target {:.4}) wire_diameter={:.4} mm",
        m.n_nodes(),
        m.triangles.len(),
        m.boundary_edges.len(),
        section.realized_fill,
        section.spec.fill_factor,
        section.wire_diameter * 1e3
    );
    println!("mesh: {} sha256={hash}", path.display());
    let meta = ctx.write_metadata(
        "mesh",
        json!({
            "mesh_hash": hash,
            "mesh": {
                "nodes": m.n_nodes(),
                "triangles": m.triangles.len(),
                "boundary_edges": m.boundary_edges.len(),
                "realized_fill": section.realized_fill,
                "wire_diameter_m": section.wire_diameter,
                "probes": section.probes,
            },
        }),
    )?;
    println!("metadata: {}", meta.display());
    Ok(ExitCode::SUCCESS)
}

pub fn solve(ctx: &Context) -> Result<ExitCode, CliError> {
    let model = WindingModel::new(ctx.params.clone()).map_err(at("mesh"))?;
    let solution = model.solve().map_err(at("solve"))?;
    let section = model.section();
    let metrics = model.metrics(&solution).map_err(at("postprocess"))?;

    let profiles = axial_profiles(
        &solution.field,
        &section.probes,
        ctx.config.outputs.probe_samples,
    )
    .map_err(at("postprocess"))?;
    let probes_path = ctx.out_file(&ctx.config.outputs.probes_file)?;
    export_probes_csv(&profiles, &probes_path).map_err(at("output"))?;
    let mut vtk = Vec::new();
    for s in ctx.config.vtk_sections().map_err(at("config"))? {
        let path = ctx.out_file(&format!("section_{:06.2}mm.vtk", s * 1e3))?;
        export_cross_section(&solution.field, s, &path).map_err(at("output"))?;
        vtk.push(path);
    }

    let r = &solution.report;
    let e = &solution.energy;
    println!(
        "theta_max={:.4} K theta_min={:.4} K energy_mismatch={:.3e} iterations={} method={} residual={:.3e}",
        metrics.max,
        metrics.min,
        e.relative_mismatch,
        r.iterations,
        method_name(r),
        r.relative_residual
    );
    let slot_end = model.grid().slot_end();
    println!(
        "theta_max at s={:.2} mm ({}); theta_min at s={:.2} mm ({})",
        metrics.s_max * 1e3,
        if metrics.s_max <= slot_end {
            "slot"
        } else {
            "overhang"
        },
        metrics.s_min * 1e3,
        if metrics.min_on_cooled_surface {
            "cooled overhang surface"
        } else {
            "interior"
        },
    );
    println!(
        "slot_peak={:.4} K overhang_peak={:.4} K center_to_overhang(probe 3)={:.4} K",
        metrics.slot_peak, metrics.overhang_peak, metrics.center_to_overhang
    );
    let drops: Vec<String> = metrics
        .interface_drops
        .iter()
        .map(|(l, d)| format!("{l}:{d:.3}"))
        .collect();
    println!("interface_drop_K {}", drops.join(" "));
    println!(
        "P_generated={:.6} W P_extracted={:.6} W",
        e.generated, e.extracted
    );
    println!("probes: {}", probes_path.display());
    for p in &vtk {
        println!("section: {}", p.display());
    }
    let meta = ctx.write_metadata(
        "solve",
        json!({
            "mesh_hash": solution.system.metadata.mesh_hash,
            "solver": solution.report,
            "energy": solution.energy,
            "metrics": metrics,
            "outputs": {
                "probes": probes_path,
                "sections": vtk,
            },
        }),
    )?;
    println!("metadata: {}", meta.display());
    Ok(ExitCode::SUCCESS)
}

fn method_name(r: &quasitherm::SolveReport) -> String {
    serde_json::to_value(r.method)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

pub fn sweep(ctx: &Context, args: &SweepArgs) -> Result<ExitCode, CliError> {
    let from_config = ctx.config.sweep_spec().map_err(at("config"))?;
    let parameter: SweepParameter = match (&args.parameter, &from_config) {
        (Some(name), _) => name
            .parse()
            .map_err(|e: Error| CliError::Usage(e.to_string()))?,
        (None, Some((p, _))) => *p,
        (None, None) => {
            return Err(CliError::Usage(
                "sweep needs --parameter or sweep.parameter".into(),
            ))
        }
    };
    let values: Vec<f64> = if !args.values.is_empty() {
        args.values
            .iter()
            .map(|v| {
                let v = v.trim();
                let q = match &args.unit {
                    Some(unit) => Quantity::Text(format!("{v} {unit}")),
                    None => Quantity::Text(v.to_string()),
                };
                parse_sweep_value(&q, parameter).map_err(|e| CliError::Usage(e.to_string()))
            })
            .collect::<Result<_, _>>()?
    } else {
        match from_config {
            Some((p, v)) if p == parameter => v,
            _ => Vec::new(),
        }
    };
    if values.is_empty() {
        return Err(CliError::Usage(
            "sweep needs at least one value (--values or sweep.values)".into(),
        ));
    }
    let model = WindingModel::new(ctx.params.clone()).map_err(at("mesh"))?;
    let result = run_sweep(&model, parameter, &values, ctx.config.outputs.probe_samples)
        .map_err(at("sweep"))?;
    let path = ctx.out_file(&ctx.config.outputs.sweep_file)?;
    export_sweep_csv(&result, &path).map_err(at("output"))?;
    println!(
        "{:>14} {:>12} {:>12} {:>16} {:>10}",
        parameter.as_str(),
        "theta_max_K",
        "theta_min_K",
        "center_to_ovh_K",
        "iterations"
    );
    for e in &result.entries {
        println!(
            "{:>14.6e} {:>12.4} {:>12.4} {:>16.4} {:>10}",
            e.value, e.max, e.min, e.center_to_overhang, e.report.iterations
        );
    }
    for (v, msg) in &result.failures {
        eprintln!("sweep value {v:e} failed: {msg}");
    }
    println!("sweep: {}", path.display());
    let entries: Vec<Value> = result
        .entries
        .iter()
        .map(|e| json!({"value": e.value, "solver": e.report, "energy": e.energy}))
        .collect();
    let meta = ctx.write_metadata(
        "sweep",
        json!({
            "mesh_hash": model.builder().mesh().content_hash(),
            "sweep": {"parameter": parameter, "values": values, "entries": entries, "failures": result.failures},
        }),
    )?;
    println!("metadata: {}", meta.display());
    Ok(if result.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn spray_classify(ctx: &Context, args: &SprayArgs) -> Result<ExitCode, CliError> {
    let (groups, class) = match (args.we, args.re, args.delta) {
        (Some(we), Some(re), Some(delta)) => {
            let c = classify_impact(we, re, delta).map_err(|e| CliError::Usage(e.to_string()))?;
            ((we, re, delta), c)
        }
        _ => {
            let g = ctx
                .params
                .spray
                .dimensionless_groups()
                .map_err(at("config"))?;
            let c = classify_spray(&ctx.params.spray).map_err(at("spray"))?;
            ((g.weber, g.reynolds, g.film_ratio), c)
        }
    };
    println!(
        "We={:.4} Re={:.4} delta={:.4}",
        groups.0, groups.1, groups.2
    );
    println!("{class}");
    let meta = ctx.write_metadata(
        "spray-classify",
        json!({
            "groups": {"weber": groups.0, "reynolds": groups.1, "film_ratio": groups.2},
            "classification": class,
        }),
    )?;
    println!("metadata: {}", meta.display());
    Ok(ExitCode::SUCCESS)
}

pub fn validate(ctx: &Context, args: &ValidateArgs) -> Result<ExitCode, CliError> {
    let report = run_validation(&ctx.params, &args.checks).map_err(|e| match e {
        Error::InvalidInput(m) => CliError::Usage(m),
        e => at("validate")(e),
    })?;
    print!("{report}");
    let passed = report.all_passed();
    println!(
        "{}",
        if passed {
            "all checks passed"
        } else {
            "some checks failed"
        }
    );
    let meta = ctx.write_metadata("validate", json!({ "report": report, "passed": passed }))?;
    println!("metadata: {}", meta.display());
    Ok(if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
