//! Triangulated cross-sections with material regions and tagged boundary edges.

mod generate;
mod io;

pub use generate::{
    generate_cross_section, generate_rectangle, CrossSection, CrossSectionSpec, Probe,
};
pub use io::{read_mesh, write_mesh};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tag carried by every boundary edge produced by the generators.
pub const OUTER: &str = "outer";

/// Nodes closer than this are considered duplicates.
pub const NODE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Copper,
    Insulation,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Copper => "copper",
            Region::Insulation => "insulation",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copper" => Ok(Region::Copper),
            "insulation" => Ok(Region::Insulation),
            other => Err(Error::UnknownRegion(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh2D {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

/// Twice the signed area of the triangle `(a, b, c)`; positive for counter-clockwise order.
pub fn doubled_signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

impl Mesh2D {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].nodes.map(|n| self.nodes[n])
    }

    pub fn edge_coords(&self, e: usize) -> [[f64; 2]; 2] {
        self.boundary_edges[e].nodes.map(|n| self.nodes[n])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * doubled_signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].region == region)
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Length of all boundary edges carrying `tag`.
    pub fn boundary_length(&self, tag: &str) -> f64 {
        (0..self.boundary_edges.len())
            .filter(|&e| self.boundary_edges[e].tag == tag)
            .map(|e| {
                let [a, b] = self.edge_coords(e);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }

    /// Node indices touched by edges with any of the given tags, sorted.
    pub fn boundary_nodes(&self, tags: &[&str]) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| tags.contains(&e.tag.as_str()))
            .flat_map(|e| e.nodes)
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// SHA-256 of the serialized mesh, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        io::write_mesh_to(self, &mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }

    /// Checks every structural invariant: index bounds, orientation, closed
    /// boundary loops, edge ownership and duplicate nodes.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidMesh("no nodes".into()));
        }
        let n = self.nodes.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.nodes.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references node {bad} of {n}"
                )));
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(Error::DegenerateElement { index: t, area });
            }
        }
        let mut owners: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri.nodes[k], tri.nodes[(k + 1) % 3]);
                *owners.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for (e, edge) in self.boundary_edges.iter().enumerate() {
            if let Some(&bad) = edge.nodes.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge {e} references node {bad} of {n}"
                )));
            }
            let [a, b] = edge.nodes;
            match owners.get(&(a.min(b), a.max(b))) {
                Some(1) => {}
                Some(k) => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary edge {e} ({a}, {b}) is shared by {k} triangles"
                    )))
                }
                None => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary edge {e} ({a}, {b}) belongs to no triangle"
                    )))
                }
            }
            *degree.entry(a).or_default() += 1;
            *degree.entry(b).or_default() += 1;
        }
        if let Some((&node, &d)) = degree.iter().find(|(_, &d)| d % 2 != 0) {
            return Err(Error::InvalidMesh(format!(
                "boundary is not closed: node {node} has {d} boundary edges"
            )));
        }
        self.check_duplicate_nodes()
    }

    fn check_duplicate_nodes(&self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_unstable_by(|&a, &b| self.nodes[a][0].total_cmp(&self.nodes[b][0]));
        for (pos, &i) in order.iter().enumerate() {
            for &j in &order[pos + 1..] {
                if self.nodes[j][0] - self.nodes[i][0] > NODE_TOLERANCE {
                    break;
                }
                if (self.nodes[j][1] - self.nodes[i][1]).abs() <= NODE_TOLERANCE {
                    return Err(Error::InvalidMesh(format!(
                        "nodes {} and {} coincide",
                        i.min(j),
                        i.max(j)
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_broken_meshes() {
        let good = generate_rectangle(1.0, 1.0, 2, 2, Region::Copper).unwrap();
        good.validate().unwrap();

        let mut flipped = good.clone();
        flipped.triangles[0].nodes.swap(1, 2);
        assert!(matches!(
            flipped.validate(),
            Err(Error::DegenerateElement { .. })
        ));

        let mut open = good.clone();
        open.boundary_edges.pop();
        assert!(open
            .validate()
            .unwrap_err()
            .to_string()
            .contains("not closed"));

        let mut dup = good.clone();
        let extra = dup.nodes[4];
        dup.nodes.push(extra);
        assert!(dup.validate().unwrap_err().to_string().contains("coincide"));

        let mut interior = good;
        interior.boundary_edges.push(BoundaryEdge {
            nodes: [0, 4],
            tag: OUTER.into(),
        });
        interior.boundary_edges.push(BoundaryEdge {
            nodes: [4, 0],
            tag: OUTER.into(),
        });
        assert!(interior.validate().is_err());
    }

    #[test]
    fn region_round_trips_through_str() {
        for r in [Region::Copper, Region::Insulation] {
            assert_eq!(r.as_str().parse::<Region>().unwrap(), r);
        }
        assert!(matches!(
            "epoxy".parse::<Region>(),
            Err(Error::UnknownRegion(_))
        ));
    }
}
