use std::f64::consts::PI;

use serde::Serialize;

use super::{BoundaryEdge, Mesh2D, Region, Triangle, OUTER};
use crate::error::{Error, Result};

/// Minimum number of grid cells that must span a wire diameter.
const MIN_CELLS_PER_WIRE: f64 = 3.0;

/// Labeled evaluation point in the cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub label: u8,
    pub point: [f64; 2],
}

/// Parametric winding cross-section: a rectangle of copper wires laid out on
/// a regular grid and embedded in insulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSectionSpec {
    /// m²
    pub total_area: f64,
    pub n_layers: usize,
    pub wires_per_layer: usize,
    pub fill_factor: f64,
    /// height / width
    pub slot_aspect_ratio: f64,
    pub wire_columns: usize,
    /// Overrides the layout-derived probes when set.
    pub probe_points: Option<Vec<Probe>>,
}

impl Default for CrossSectionSpec {
    fn default() -> Self {
        Self {
            total_area: 107.7e-6,
            n_layers: 2,
            wires_per_layer: 18,
            fill_factor: 0.59,
            slot_aspect_ratio: 4.0,
            wire_columns: 3,
            probe_points: None,
        }
    }
}

impl CrossSectionSpec {
    pub fn n_wires(&self) -> usize {
        self.n_layers * self.wires_per_layer
    }

    pub fn wire_rows(&self) -> usize {
        self.n_wires() / self.wire_columns.max(1)
    }

    pub fn width(&self) -> f64 {
        (self.total_area / self.slot_aspect_ratio).sqrt()
    }

    pub fn height(&self) -> f64 {
        self.width() * self.slot_aspect_ratio
    }

    /// Diameter that makes the wire count cover `fill_factor` of the area.
    pub fn wire_diameter(&self) -> f64 {
        if self.n_wires() == 0 {
            return 0.0;
        }
        2.0 * (self.fill_factor * self.total_area / (self.n_wires() as f64 * PI)).sqrt()
    }

    fn pitch(&self) -> (f64, f64) {
        (
            self.width() / self.wire_columns as f64,
            self.height() / self.wire_rows() as f64,
        )
    }

    /// Wire centers, row 0 at the top, columns left to right.
    pub fn wire_centers(&self) -> Vec<[f64; 2]> {
        if self.fill_factor == 0.0 {
            return Vec::new();
        }
        let (w, h) = (self.width(), self.height());
        let (px, py) = self.pitch();
        let mut centers = Vec::with_capacity(self.n_wires());
        for r in 0..self.wire_rows() {
            for c in 0..self.wire_columns {
                centers.push([
                    -0.5 * w + (c as f64 + 0.5) * px,
                    0.5 * h - (r as f64 + 0.5) * py,
                ]);
            }
        }
        centers
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidInput(m));
        if !(self.total_area > 0.0) {
            return invalid(format!(
                "total area must be positive, got {}",
                self.total_area
            ));
        }
        if !(self.slot_aspect_ratio > 0.0) {
            return invalid(format!(
                "aspect ratio must be positive, got {}",
                self.slot_aspect_ratio
            ));
        }
        if !(0.0..1.0).contains(&self.fill_factor) {
            return invalid(format!(
                "fill factor must lie in [0, 1), got {}",
                self.fill_factor
            ));
        }
        if self.fill_factor > 0.0 {
            if self.n_wires() == 0 || self.wire_columns == 0 {
                return invalid("a positive fill factor needs at least one wire".into());
            }
            if !self.n_wires().is_multiple_of(self.wire_columns) {
                return invalid(format!(
                    "{} wires do not fill {} columns evenly",
                    self.n_wires(),
                    self.wire_columns
                ));
            }
            let (px, py) = self.pitch();
            let d = self.wire_diameter();
            if d > px.min(py) {
                return invalid(format!(
                    "wires of diameter {:.4} mm overlap on a {:.4} x {:.4} mm pitch; adjust the aspect ratio or column count",
                    d * 1e3,
                    px * 1e3,
                    py * 1e3
                ));
            }
        }
        if let Some(probes) = &self.probe_points {
            let mut labels: Vec<u8> = probes.iter().map(|p| p.label).collect();
            labels.sort_unstable();
            if labels != [1, 2, 3, 4, 5, 6] {
                return invalid(format!(
                    "probe labels must be exactly 1..=6, got {labels:?}"
                ));
            }
        }
        Ok(())
    }

    /// Probe layout: 1 top boundary midpoint, 2 a top-layer wire, 3 the
    /// innermost bottom-layer wire, 4 and 5 lower wires, 6 the insulation gap
    /// between the two layers. Wire probes sit on the center column.
    pub fn probes(&self) -> Vec<Probe> {
        if let Some(p) = &self.probe_points {
            return p.clone();
        }
        let (w, h) = (self.width(), self.height());
        if self.fill_factor == 0.0 || self.wire_columns == 0 {
            let at = |label, y: f64| Probe {
                label,
                point: [0.0, y * h],
            };
            return vec![
                at(1, 0.5),
                at(2, 0.3),
                at(3, 0.0),
                at(4, -0.2),
                at(5, -0.4),
                Probe {
                    label: 6,
                    point: [0.25 * w, 0.0],
                },
            ];
        }
        let (px, py) = self.pitch();
        let rows = self.wire_rows();
        let col = self.wire_columns / 2;
        let x = -0.5 * w + (col as f64 + 0.5) * px;
        let row_y = |r: usize| 0.5 * h - (r.min(rows - 1) as f64 + 0.5) * py;
        let gap_x = if self.wire_columns > 1 {
            x + 0.5 * px
        } else {
            0.5 * (x + 0.5 * self.wire_diameter() + 0.5 * w)
        };
        vec![
            Probe {
                label: 1,
                point: [x, 0.5 * h],
            },
            Probe {
                label: 2,
                point: [x, row_y(rows / 6)],
            },
            Probe {
                label: 3,
                point: [x, row_y(rows / 2)],
            },
            Probe {
                label: 4,
                point: [x, row_y(rows / 2 + rows / 6)],
            },
            Probe {
                label: 5,
                point: [x, row_y(rows - 1 - rows / 12)],
            },
            Probe {
                label: 6,
                point: [gap_x, 0.0],
            },
        ]
    }
}

/// Generated cross-section together with the quantities derived from its layout.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub mesh: Mesh2D,
    pub spec: CrossSectionSpec,
    pub probes: Vec<Probe>,
    pub wire_diameter: f64,
    /// Copper area / total area of the pixelated mesh.
    pub realized_fill: f64,
}

/// Structured `nx` x `ny` grid on a `width` x `height` rectangle centered at
/// the origin, each cell split into two counter-clockwise triangles.
pub fn generate_rectangle(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    region: Region,
) -> Result<Mesh2D> {
    if nx == 0 || ny == 0 || !(width > 0.0) || !(height > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rectangle {width} x {height} with {nx} x {ny} cells"
        )));
    }
    let mut mesh = structured_grid(width, height, nx, ny);
    for t in &mut mesh.triangles {
        t.region = region;
    }
    Ok(mesh)
}

fn structured_grid(width: f64, height: f64, nx: usize, ny: usize) -> Mesh2D {
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = -0.5 * height + height * j as f64 / ny as f64;
        for i in 0..=nx {
            nodes.push([-0.5 * width + width * i as f64 / nx as f64, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (n0, n1, n2, n3) = (
                node(i, j),
                node(i + 1, j),
                node(i + 1, j + 1),
                node(i, j + 1),
            );
            triangles.push(Triangle {
                nodes: [n0, n1, n2],
                region: Region::Insulation,
            });
            triangles.push(Triangle {
                nodes: [n0, n2, n3],
                region: Region::Insulation,
            });
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    let mut edge = |a, b| {
        boundary_edges.push(BoundaryEdge {
            nodes: [a, b],
            tag: OUTER.to_owned(),
        })
    };
    for i in 0..nx {
        edge(node(i, 0), node(i + 1, 0));
    }
    for j in 0..ny {
        edge(node(nx, j), node(nx, j + 1));
    }
    for i in (0..nx).rev() {
        edge(node(i + 1, ny), node(i, ny));
    }
    for j in (0..ny).rev() {
        edge(node(0, j + 1), node(0, j));
    }
    Mesh2D {
        nodes,
        triangles,
        boundary_edges,
    }
}

/// Meshes the winding cross-section. `resolution` is the number of cells
/// across the shorter side, rounded to a whole number of cells per wire
/// pitch; the longer side gets a proportional count so cells stay close to
/// square. Triangles whose centroid falls inside a wire disk are copper.
pub fn generate_cross_section(spec: &CrossSectionSpec, resolution: usize) -> Result<CrossSection> {
    spec.validate()?;
    if resolution < 8 {
        return Err(Error::InvalidInput(format!(
            "resolution {resolution} is below the minimum of 8"
        )));
    }
    let (w, h) = (spec.width(), spec.height());
    let short = w.min(h);
    // Snap to whole cells per wire pitch so every wire is rasterized alike.
    let per = if w <= h {
        spec.wire_columns
    } else {
        spec.wire_rows()
    }
    .max(1);
    let n_short = if spec.fill_factor > 0.0 {
        ((resolution as f64 / per as f64).round().max(1.0) as usize) * per
    } else {
        resolution
    };
    let n_long = ((n_short as f64) * w.max(h) / short).round().max(1.0) as usize;
    let (nx, ny) = if w <= h {
        (n_short, n_long)
    } else {
        (n_long, n_short)
    };
    let d = spec.wire_diameter();
    let cell = (w / nx as f64).max(h / ny as f64);
    if spec.fill_factor > 0.0 && d / cell < MIN_CELLS_PER_WIRE {
        return Err(Error::InvalidInput(format!(
            "resolution {resolution} puts only {:.2} cells across a {:.3} mm wire (need at least {MIN_CELLS_PER_WIRE})",
            d / cell,
            d * 1e3
        )));
    }

    let mut mesh = structured_grid(w, h, nx, ny);
    let centers = spec.wire_centers();
    let (px, py) = if centers.is_empty() {
        (1.0, 1.0)
    } else {
        spec.pitch()
    };
    let r2 = 0.25 * d * d;
    let columns = spec.wire_columns.max(1);
    let rows = spec.wire_rows().max(1);
    for tri in &mut mesh.triangles {
        if centers.is_empty() {
            break;
        }
        let c = tri.nodes.map(|n| mesh.nodes[n]);
        let cx = (c[0][0] + c[1][0] + c[2][0]) / 3.0;
        let cy = (c[0][1] + c[1][1] + c[2][1]) / 3.0;
        // Only the wire owning this pitch cell can contain the centroid.
        let col = (((cx + 0.5 * w) / px).floor() as usize).min(columns - 1);
        let row = (((0.5 * h - cy) / py).floor() as usize).min(rows - 1);
        let [wx, wy] = centers[row * columns + col];
        if (cx - wx).powi(2) + (cy - wy).powi(2) < r2 {
            tri.region = Region::Copper;
        }
    }

    let realized_fill = mesh.region_area(Region::Copper) / mesh.total_area();
    Ok(CrossSection {
        probes: spec.probes(),
        spec: spec.clone(),
        wire_diameter: d,
        realized_fill,
        mesh,
    })
}
