//! Field evaluation, axial profiles, energy balance, sweeps and file export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::axial::AxialGrid;
use crate::error::{Error, Result};
use crate::fem::lagrange1d_quadratic_eval;
use crate::mesh::{doubled_signed_area, Mesh2D, Probe};
use crate::model::{Solution, WindingModel};
use crate::quasi3d::Quasi3DSystem;
use crate::solver::SolveReport;

/// Barycentric coordinates below this count as inside.
const INSIDE_TOLERANCE: f64 = 1e-12;

/// Nodal temperatures on the tensor-product basis.
#[derive(Debug, Clone)]
pub struct SolutionField {
    mesh: Arc<Mesh2D>,
    grid: AxialGrid,
    values: Vec<f64>,
}

impl SolutionField {
    pub fn new(mesh: Arc<Mesh2D>, grid: AxialGrid, values: Vec<f64>) -> Result<Self> {
        let n = mesh.n_nodes() * grid.n_nodes();
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} section nodes x {} axial nodes",
                values.len(),
                mesh.n_nodes(),
                grid.n_nodes()
            )));
        }
        Ok(Self { mesh, grid, values })
    }

    pub fn mesh(&self) -> &Mesh2D {
        &self.mesh
    }

    pub fn grid(&self) -> &AxialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodal(&self, section_node: usize, axial_node: usize) -> f64 {
        self.values[axial_node * self.mesh.n_nodes() + section_node]
    }

    /// Nodal values of axial node `k`.
    pub fn section_slice(&self, k: usize) -> &[f64] {
        let n2 = self.mesh.n_nodes();
        &self.values[k * n2..(k + 1) * n2]
    }

    /// Cross-section nodal values at `s`, interpolated with the 1D basis.
    pub fn section_at(&self, s: f64) -> Result<Vec<f64>> {
        let coords = self.grid.node_coords();
        if let Some(k) = coords.iter().position(|&c| c == s) {
            return Ok(self.section_slice(k).to_vec());
        }
        let (e, xi) = self.grid.locate(s)?;
        let (n, _) = lagrange1d_quadratic_eval(xi);
        let nodes = self.grid.element_nodes(e);
        let slices = nodes.map(|k| self.section_slice(k));
        Ok((0..self.mesh.n_nodes())
            .map(|j| n[0] * slices[0][j] + n[1] * slices[1][j] + n[2] * slices[2][j])
            .collect())
    }

    /// Triangle containing `point` and the barycentric coordinates there.
    pub fn locate(&self, point: [f64; 2]) -> Result<(usize, [f64; 3])> {
        locate(&self.mesh, point)
    }

    /// `ϑ(point, s)`.
    pub fn evaluate(&self, point: [f64; 2], s: f64) -> Result<f64> {
        let (t, bary) = self.locate(point)?;
        let section = self.section_at(s)?;
        let nodes = self.mesh.triangles[t].nodes;
        Ok(bary[0] * section[nodes[0]] + bary[1] * section[nodes[1]] + bary[2] * section[nodes[2]])
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(section node, axial node)` of the largest nodal value.
    pub fn argmax(&self) -> (usize, usize) {
        self.arg_by(|a, b| a > b)
    }

    pub fn argmin(&self) -> (usize, usize) {
        self.arg_by(|a, b| a < b)
    }

    fn arg_by(&self, better: impl Fn(f64, f64) -> bool) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if better(v, self.values[best]) {
                best = i;
            }
        }
        let n2 = self.mesh.n_nodes();
        (best % n2, best / n2)
    }
}

pub(crate) fn locate(mesh: &Mesh2D, point: [f64; 2]) -> Result<(usize, [f64; 3])> {
    let mut nearest = (0, f64::INFINITY);
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle_coords(t);
        let area = doubled_signed_area(a, b, c);
        let bary = [
            doubled_signed_area(point, b, c) / area,
            doubled_signed_area(a, point, c) / area,
            doubled_signed_area(a, b, point) / area,
        ];
        if bary.iter().all(|&l| l >= -INSIDE_TOLERANCE) {
            return Ok((t, bary));
        }
        let cx = (a[0] + b[0] + c[0]) / 3.0;
        let cy = (a[1] + b[1] + c[1]) / 3.0;
        let d = (cx - point[0]).hypot(cy - point[1]);
        if d < nearest.1 {
            nearest = (t, d);
        }
    }
    Err(Error::PointOutsideMesh {
        x: point[0],
        y: point[1],
        nearest: nearest.0,
        distance: nearest.1,
    })
}

/// Temperature along the winding at one probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxialProfile {
    pub label: u8,
    /// `(s [m], ϑ [K])`, `s` strictly increasing.
    pub samples: Vec<(f64, f64)>,
}

impl AxialProfile {
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.samples.windows(2).all(|w| w[1].1 <= w[0].1 + slack)
    }
}

/// `n_samples` uniformly spaced values of `s` over the grid, ends included.
pub fn sample_positions(grid: &AxialGrid, n_samples: usize) -> Vec<f64> {
    let (a, b) = (grid.start(), grid.end());
    (0..n_samples)
        .map(|i| {
            if i + 1 == n_samples {
                b
            } else {
                a + (b - a) * (i as f64 / (n_samples - 1) as f64)
            }
        })
        .collect()
}

pub fn axial_profiles(
    field: &SolutionField,
    probes: &[Probe],
    n_samples: usize,
) -> Result<Vec<AxialProfile>> {
    if n_samples < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples per profile, got {n_samples}"
        )));
    }
    let located = probes
        .iter()
        .map(|p| field.locate(p.point))
        .collect::<Result<Vec<_>>>()?;
    let positions = sample_positions(field.grid(), n_samples);
    let sections = positions
        .par_iter()
        .map(|&s| field.section_at(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(probes
        .iter()
        .zip(&located)
        .map(|(p, &(t, bary))| {
            let nodes = field.mesh().triangles[t].nodes;
            let samples = positions
                .iter()
                .zip(&sections)
                .map(|(&s, sec)| {
                    (
                        s,
                        bary[0] * sec[nodes[0]] + bary[1] * sec[nodes[1]] + bary[2] * sec[nodes[2]],
                    )
                })
                .collect();
            AxialProfile {
                label: p.label,
                samples,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBalance {
    /// W
    pub generated: f64,
    /// W
    pub extracted: f64,
    /// `|generated - extracted| / generated`; absolute mismatch when nothing is generated.
    pub relative_mismatch: f64,
}

pub fn energy_balance(system: &Quasi3DSystem, u: &[f64]) -> EnergyBalance {
    let generated = system.generated_power();
    let extracted = system.extracted_power(u);
    let diff = (generated - extracted).abs();
    EnergyBalance {
        generated,
        extracted,
        relative_mismatch: if generated > 0.0 {
            diff / generated
        } else {
            diff
        },
    }
}

/// Derived temperatures of a winding solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingMetrics {
    /// K
    pub max: f64,
    /// K
    pub min: f64,
    /// Axial coordinate of the maximum, m.
    pub s_max: f64,
    /// Axial coordinate of the minimum, m.
    pub s_min: f64,
    /// Whether the minimum sits on the cooled surface.
    pub min_on_cooled_surface: bool,
    /// Maximum over nodes with `s` at or before the end of the slot.
    pub slot_peak: f64,
    /// Maximum over the outermost cross-section.
    pub overhang_peak: f64,
    /// `ϑ(probe, slot end) - ϑ(probe, end)` for every probe.
    pub interface_drops: Vec<(u8, f64)>,
    /// `ϑ(probe 3, start) - ϑ(probe 3, end)`.
    pub center_to_overhang: f64,
}

impl WindingMetrics {
    pub fn compute(
        field: &SolutionField,
        probes: &[Probe],
        cooled_nodes: &[usize],
    ) -> Result<Self> {
        let grid = field.grid();
        let coords = grid.node_coords();
        let slot_end = grid.slot_end();
        let (jmax, kmax) = field.argmax();
        let (jmin, kmin) = field.argmin();
        let n1 = grid.n_nodes();
        let slot_peak = (0..n1)
            .filter(|&k| coords[k] <= slot_end)
            .flat_map(|k| field.section_slice(k).iter().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        let overhang_peak = field
            .section_slice(n1 - 1)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let (start, end) = (grid.start(), grid.end());
        let interface_drops = probes
            .iter()
            .map(|p| {
                Ok((
                    p.label,
                    field.evaluate(p.point, slot_end)? - field.evaluate(p.point, end)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let p3 = probes
            .iter()
            .find(|p| p.label == 3)
            .ok_or_else(|| Error::InvalidInput("probe 3 is missing".into()))?;
        let center_to_overhang =
            field.evaluate(p3.point, start)? - field.evaluate(p3.point, end)?;
        Ok(Self {
            max: field.nodal(jmax, kmax),
            min: field.nodal(jmin, kmin),
            s_max: coords[kmax],
            s_min: coords[kmin],
            min_on_cooled_surface: cooled_nodes.contains(&jmin) && coords[kmin] > slot_end,
            slot_peak,
            overhang_peak,
            interface_drops,
            center_to_overhang,
        })
    }

    pub fn interface_drop(&self, label: u8) -> Option<f64> {
        self.interface_drops
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, d)| *d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// A/m²
    CurrentDensity,
    /// W/(K·m²)
    HeatTransferCoefficient,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::CurrentDensity => "current_density",
            SweepParameter::HeatTransferCoefficient => "h_spray",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "current_density" | "J" => Ok(SweepParameter::CurrentDensity),
            "h_spray" | "h" => Ok(SweepParameter::HeatTransferCoefficient),
            other => Err(Error::InvalidInput(format!(
                "unknown sweep parameter `{other}` (expected current_density or h_spray)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub profile: AxialProfile,
    pub max: f64,
    pub min: f64,
    pub center_to_overhang: f64,
    pub energy: EnergyBalance,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    /// Successful entries in input order.
    pub entries: Vec<SweepEntry>,
    /// `(value, error message)` of entries that failed.
    pub failures: Vec<(f64, String)>,
}

/// One solve per value. Current density only rescales the load, so those
/// solves share the operator and its preconditioner; `h` changes the
/// operator and only the conduction factors are shared.
pub fn sweep(
    model: &WindingModel,
    parameter: SweepParameter,
    values: &[f64],
    n_samples: usize,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sweep values must be positive, got {v}"
        )));
    }
    let params = model.params();
    let probe3 = model
        .section()
        .probes
        .iter()
        .find(|p| p.label == 3)
        .copied()
        .ok_or_else(|| Error::InvalidInput("probe 3 is missing".into()))?;
    let entry = |value: f64, sol: Solution| -> Result<SweepEntry> {
        let profile = axial_profiles(&sol.field, &[probe3], n_samples)?.remove(0);
        let center_to_overhang = profile.samples[0].1 - profile.samples.last().unwrap().1;
        Ok(SweepEntry {
            value,
            max: sol.field.max(),
            min: sol.field.min(),
            center_to_overhang,
            energy: sol.energy,
            report: sol.report,
            profile,
        })
    };
    let outcomes: Vec<Result<SweepEntry>> = match parameter {
        SweepParameter::CurrentDensity => {
            let h = params.spray.heat_transfer_coefficient;
            let base = model.system(values[0], h)?;
            let pc = base.preconditioner(&params.solver)?;
            let p0 = params.source_density_at(values[0])?;
            values
                .par_iter()
                .map(|&j| {
                    let scale = params.source_density_at(j)? / p0;
                    let sys = base.with_source_scaled(scale);
                    entry(j, model.finish(sys, pc.as_ref())?)
                })
                .collect()
        }
        SweepParameter::HeatTransferCoefficient => values
            .par_iter()
            .map(|&h| entry(h, model.solve_at(params.current_density, h)?))
            .collect(),
    };
    let mut result = SweepResult {
        parameter,
        entries: Vec::new(),
        failures: Vec::new(),
    };
    for (&v, o) in values.iter().zip(outcomes) {
        match o {
            Ok(e) => result.entries.push(e),
            Err(e) => result.failures.push((v, e.to_string())),
        }
    }
    Ok(result)
}

/// Legacy ASCII VTK unstructured grid of the cross-section at `s`, with the
/// point scalar `temperature_K`.
pub fn export_cross_section(field: &SolutionField, s: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let values = field.section_at(s)?;
    let mesh = field.mesh();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "cross-section temperature at s = {s:e} m");
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for [x, y] in &mesh.nodes {
        let _ = writeln!(out, "{x:e} {y:e} 0");
    }
    let nt = mesh.triangles.len();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let [a, b, c] = t.nodes;
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "5");
    }
    let _ = writeln!(out, "POINT_DATA {}", mesh.n_nodes());
    let _ = writeln!(out, "SCALARS temperature_K double 1\nLOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(out, "{v:e}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `s_mm,probe1_K,...` with 9 significant digits. All profiles must share
/// the same sample positions.
pub fn export_probes_csv(profiles: &[AxialProfile], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let Some(first) = profiles.first() else {
        return Err(Error::InvalidInput("no profiles to export".into()));
    };
    if profiles
        .iter()
        .any(|p| p.samples.len() != first.samples.len())
    {
        return Err(Error::DimensionMismatch(
            "profiles have different sample counts".into(),
        ));
    }
    let mut out = String::from("s_mm");
    for p in profiles {
        let _ = write!(out, ",probe{}_K", p.label);
    }
    out.push('\n');
    for (i, (s, _)) in first.samples.iter().enumerate() {
        let _ = write!(out, "{:.8e}", s * 1e3);
        for p in profiles {
            let _ = write!(out, ",{:.8e}", p.samples[i].1);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_probes_csv(path: impl AsRef<Path>) -> Result<Vec<AxialProfile>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(Error::parse(1, "empty probe file"));
    };
    let mut cols = header.split(',');
    if cols.next() != Some("s_mm") {
        return Err(Error::parse(1, "expected `s_mm` as first column"));
    }
    let mut profiles = cols
        .map(|c| {
            c.strip_prefix("probe")
                .and_then(|c| c.strip_suffix("_K"))
                .and_then(|l| l.parse::<u8>().ok())
                .map(|label| AxialProfile {
                    label,
                    samples: Vec::new(),
                })
                .ok_or_else(|| Error::parse(1, format!("bad column `{c}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(i + 1, format!("bad number `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != profiles.len() + 1 {
            return Err(Error::parse(
                i + 1,
                format!(
                    "expected {} fields, found {}",
                    profiles.len() + 1,
                    vals.len()
                ),
            ));
        }
        for (p, v) in profiles.iter_mut().zip(&vals[1..]) {
            p.samples.push((vals[0] * 1e-3, *v));
        }
    }
    Ok(profiles)
}

pub fn export_sweep_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!(
        "{},theta_max_K,theta_min_K,center_to_overhang_K,energy_mismatch,iterations\n",
        result.parameter.as_str()
    );
    for e in &result.entries {
        let _ = writeln!(
            out,
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.3e},{}",
            e.value,
            e.max,
            e.min,
            e.center_to_overhang,
            e.energy.relative_mismatch,
            e.report.iterations
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axial::AxialRegime;
    use crate::fem::MaterialField;
    use crate::mesh::{generate_rectangle, Region};
    use crate::model::ModelParameters;
    use crate::quasi3d::build_system;
    use crate::solver::SolverOptions;
    use crate::spray::SprayParameters;

    fn small_field(f: impl Fn([f64; 2], f64) -> f64) -> SolutionField {
        let mesh = Arc::new(generate_rectangle(2.0, 1.0, 4, 2, Region::Copper).unwrap());
        let grid = AxialGrid::generate(2, 1).unwrap();
        let s = grid.node_coords();
        let mut v = Vec::new();
        for sk in &s {
            for p in &mesh.nodes {
                v.push(f(*p, *sk));
            }
        }
        SolutionField::new(mesh, grid, v).unwrap()
    }

    #[test]
    fn nodal_values_are_exact() {
        let f = small_field(|p, s| 1.0 + p[0] * 3.7 - p[1] + 1e3 * s * s + (p[0] * 11.0).sin());
        let s = f.grid().node_coords();
        for (k, &sk) in s.iter().enumerate() {
            for (j, &p) in f.mesh().nodes.iter().enumerate() {
                assert_eq!(f.evaluate(p, sk).unwrap(), f.nodal(j, k));
            }
        }
        let c = small_field(|_, _| 4.25);
        assert!((c.evaluate([0.13, -0.21], 0.031).unwrap() - 4.25).abs() < 1e-14);
    }

    #[test]
    fn reproduces_bilinear_in_section_and_quadratic_in_s() {
        let g = |p: [f64; 2], s: f64| 2.0 + 0.5 * p[0] - 1.5 * p[1] + 300.0 * s - 4e3 * s * s;
        let f = small_field(g);
        for (p, s) in [
            ([0.3, 0.1], 0.0123),
            ([-0.9, 0.45], 0.07),
            ([0.0, 0.0], 0.05),
        ] {
            let v = f.evaluate(p, s).unwrap();
            assert!((v - g(p, s)).abs() < 1e-12, "{v} vs {}", g(p, s));
        }
    }

    #[test]
    fn outside_points_report_nearest_triangle() {
        let f = small_field(|_, _| 0.0);
        match f.evaluate([5.0, 0.0], 0.0) {
            Err(Error::PointOutsideMesh {
                nearest, distance, ..
            }) => {
                assert!(distance > 4.0);
                let t = &f.mesh().triangles[nearest];
                assert!(t.nodes.iter().any(|&n| f.mesh().nodes[n][0] == 1.0));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            f.evaluate([0.0, 0.0], 1.0),
            Err(Error::OutsideAxialRange { .. })
        ));
    }

    #[test]
    fn zero_source_profiles_are_ambient() {
        let mesh = generate_rectangle(2e-3, 2e-3, 4, 4, Region::Copper).unwrap();
        let grid = AxialGrid::generate(2, 2).unwrap();
        let mat = MaterialField::winding(400.0, 0.7, 0.0).unwrap();
        let sys = build_system(&mesh, &grid, &mat, &SprayParameters::default()).unwrap();
        let (u, _) = sys.solve(&SolverOptions::default()).unwrap();
        let eb = energy_balance(&sys, &u);
        assert_eq!((eb.generated, eb.extracted), (0.0, 0.0));
        let field = SolutionField::new(Arc::new(mesh), grid, u).unwrap();
        let probes = [
            Probe {
                label: 1,
                point: [0.0, 0.0],
            },
            Probe {
                label: 2,
                point: [1e-3, 1e-3],
            },
        ];
        for p in axial_profiles(&field, &probes, 7).unwrap() {
            assert_eq!(p.samples.len(), 7);
            assert!(p.samples.iter().all(|&(_, t)| t == 293.0));
        }
    }

    #[test]
    fn mirrored_grid_gives_identical_profiles() {
        let mesh = generate_rectangle(2e-3, 3e-3, 3, 4, Region::Copper).unwrap();
        let mut mesh = mesh;
        mesh.triangles[5].region = Region::Insulation;
        let mat = MaterialField::winding(400.0, 0.7, 1.7e6).unwrap();
        let half = AxialGrid::generate(3, 2).unwrap();
        let full = half.mirrored();
        let spray = SprayParameters::default();
        let opts = SolverOptions {
            method: crate::solver::SolverMethod::DenseDirect,
            ..Default::default()
        };
        let solve = |g: &AxialGrid| {
            let sys = build_system(&mesh, g, &mat, &spray).unwrap();
            let (u, _) = sys.solve(&opts).unwrap();
            SolutionField::new(Arc::new(mesh.clone()), g.clone(), u).unwrap()
        };
        let (fh, ff) = (solve(&half), solve(&full));
        let probes = [
            Probe {
                label: 3,
                point: [0.1e-3, -0.2e-3],
            },
            Probe {
                label: 1,
                point: [0.0, 1.5e-3],
            },
        ];
        for s in half.node_coords() {
            for p in &probes {
                let a = fh.evaluate(p.point, s).unwrap();
                let b = ff.evaluate(p.point, s).unwrap();
                let c = ff.evaluate(p.point, -s).unwrap();
                assert!(
                    (a - b).abs() < 1e-10 && (a - c).abs() < 1e-10,
                    "{a} {b} {c}"
                );
            }
        }
        assert_eq!(full.regimes()[0], AxialRegime::Overhang);
    }

    #[test]
    fn files_round_trip() {
        let f = small_field(|p, s| 300.0 + p[0] + 100.0 * s);
        let dir = tempfile::tempdir().unwrap();
        let vtk = dir.path().join("x.vtk");
        export_cross_section(&f, 0.02, &vtk).unwrap();
        let text = fs::read_to_string(&vtk).unwrap();
        assert!(text.contains(&format!("POINTS {} double", f.mesh().n_nodes())));
        assert!(text.contains("SCALARS temperature_K double 1"));
        let probes = [
            Probe {
                label: 1,
                point: [0.2, 0.1],
            },
            Probe {
                label: 6,
                point: [-0.7, 0.3],
            },
        ];
        let profiles = axial_profiles(&f, &probes, 13).unwrap();
        let csv = dir.path().join("p.csv");
        export_probes_csv(&profiles, &csv).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 14);
        assert!(text.starts_with("s_mm,probe1_K,probe6_K\n"));
        let back = read_probes_csv(&csv).unwrap();
        for (a, b) in profiles.iter().zip(&back) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert!((x.0 - y.0).abs() <= 5e-9 * x.0.abs());
                // half a unit in the ninth significant digit
                assert!((x.1 - y.1).abs() <= 5e-9 * x.1.abs());
            }
        }
    }

    fn coarse_params() -> ModelParameters {
        ModelParameters {
            resolution: 12,
            n_slot: 3,
            n_overhang: 2,
            solver: SolverOptions {
                method: crate::solver::SolverMethod::CgTensor,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn current_sweep_is_monotone_and_matches_plain_solve() {
        let model = WindingModel::new(coarse_params()).unwrap();
        let js: Vec<f64> = [10.0, 20.0, 30.0, 35.0, 40.0]
            .iter()
            .map(|j| j * 1e6)
            .collect();
        let r = sweep(&model, SweepParameter::CurrentDensity, &js, 11).unwrap();
        assert!(r.failures.is_empty());
        assert!(r.entries.windows(2).all(|w| w[1].max > w[0].max));
        let single = sweep(&model, SweepParameter::CurrentDensity, &[20e6], 11).unwrap();
        let plain = model.solve_at(20e6, 22485.0).unwrap();
        assert!((single.entries[0].max - plain.field.max()).abs() < 1e-9);
        assert!(sweep(&model, SweepParameter::CurrentDensity, &[], 11).is_err());
    }

    #[test]
    fn h_sweep_is_decreasing_and_records_failures() {
        let model = WindingModel::new(coarse_params()).unwrap();
        let r = sweep(
            &model,
            SweepParameter::HeatTransferCoefficient,
            &[250.0, 5e3, 22.5e3, 5e7],
            5,
        )
        .unwrap();
        assert_eq!(r.entries.len(), 3);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].0, 5e7);
        assert!(r.entries.windows(2).all(|w| w[1].max < w[0].max));
    }
}
