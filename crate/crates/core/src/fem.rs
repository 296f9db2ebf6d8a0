//! Shape functions, closed-form element integrals and 2D/1D global assembly.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::axial::{AxialGrid, AxialRegime};
use crate::error::{Error, Result};
use crate::mesh::{doubled_signed_area, Mesh2D, Region};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Triangles smaller than this are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-18;

/// Three-point Gauss-Legendre rule on `[-1, 1]`.
pub const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Values of the linear triangle basis and their gradients with respect to
/// the reference coordinates `(ξ, η)` where `N₁ = 1 - ξ - η`, `N₂ = ξ`, `N₃ = η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P1Eval {
    pub values: [f64; 3],
    pub ref_gradients: [[f64; 2]; 3],
}

pub fn p1_shape_eval(barycentric: [f64; 3]) -> Result<P1Eval> {
    let sum: f64 = barycentric.iter().sum();
    if (sum - 1.0).abs() > 1e-12
        || barycentric
            .iter()
            .any(|&l| !(-1e-12..=1.0 + 1e-12).contains(&l))
    {
        return Err(Error::InvalidInput(format!(
            "{barycentric:?} are not barycentric coordinates"
        )));
    }
    Ok(P1Eval {
        values: barycentric,
        ref_gradients: [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
    })
}

/// Quadratic Lagrange basis on `[-1, 1]` with nodes at -1, 0, 1.
/// Returns `(values, dN/dξ)`.
pub fn lagrange1d_quadratic_eval(xi: f64) -> ([f64; 3], [f64; 3]) {
    (
        [0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)],
        [xi - 0.5, -2.0 * xi, xi + 0.5],
    )
}

/// Physical gradients of the three P1 basis functions and the triangle area.
pub fn p1_gradients(coords: &[[f64; 2]; 3]) -> Result<([[f64; 2]; 3], f64)> {
    let [a, b, c] = *coords;
    let det = doubled_signed_area(a, b, c);
    let area = 0.5 * det;
    if !(area > MIN_TRIANGLE_AREA) {
        return Err(Error::DegenerateElement {
            index: usize::MAX,
            area,
        });
    }
    let grads = [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ];
    Ok((grads, area))
}

/// `∫ λ ∇Nⱼ·∇Nᵢ dΩ` over one triangle.
pub fn element_stiffness_2d(coords: &[[f64; 2]; 3], lambda: f64) -> Result<[[f64; 3]; 3]> {
    let (g, area) = p1_gradients(coords)?;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = lambda * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    Ok(k)
}

/// `∫ w Nⱼ Nᵢ dΩ` over one triangle for a constant weight `w`.
pub fn element_mass_2d(coords: &[[f64; 2]; 3], weight: f64) -> Result<[[f64; 3]; 3]> {
    let (_, area) = p1_gradients(coords)?;
    let c = weight * area / 12.0;
    let mut m = [[c; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 2.0 * c;
    }
    Ok(m)
}

/// `∫ p Nᵢ dΩ` over one triangle for a constant source density.
pub fn element_source_load(coords: &[[f64; 2]; 3], p: f64) -> Result<[f64; 3]> {
    let (_, area) = p1_gradients(coords)?;
    Ok([p * area / 3.0; 3])
}

fn edge_length(edge: &[[f64; 2]; 2]) -> f64 {
    (edge[1][0] - edge[0][0]).hypot(edge[1][1] - edge[0][1])
}

/// `∫ h Nⱼ Nᵢ dΓ` over one boundary edge.
pub fn element_boundary_mass_edge(edge: &[[f64; 2]; 2], h: f64) -> [[f64; 2]; 2] {
    let c = h * edge_length(edge) / 6.0;
    [[2.0 * c, c], [c, 2.0 * c]]
}

/// `∫ h ϑ₀ Nᵢ dΓ` over one boundary edge.
pub fn element_boundary_load_edge(edge: &[[f64; 2]; 2], h: f64, ambient: f64) -> [f64; 2] {
    [h * ambient * edge_length(edge) / 2.0; 2]
}

/// Stiffness `∫ N'ₖ N'ₗ ds` and mass `∫ Nₖ Nₗ ds` of a quadratic element of length `len`.
pub fn element_matrices_1d(len: f64) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let k = 1.0 / (3.0 * len);
    let m = len / 30.0;
    (
        [
            [7.0 * k, -8.0 * k, k],
            [-8.0 * k, 16.0 * k, -8.0 * k],
            [k, -8.0 * k, 7.0 * k],
        ],
        [
            [4.0 * m, 2.0 * m, -m],
            [2.0 * m, 16.0 * m, 2.0 * m],
            [-m, 2.0 * m, 4.0 * m],
        ],
    )
}

/// `∫ Nₖ ds` of a quadratic element.
pub fn element_load_1d(len: f64) -> [f64; 3] {
    [len / 6.0, 2.0 * len / 3.0, len / 6.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Material {
    /// W/(K·m)
    pub conductivity: f64,
    /// W/m³
    pub source_density: f64,
}

/// Per-region conductivity and heat source density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialField {
    regions: BTreeMap<Region, Material>,
}

impl MaterialField {
    pub fn new(regions: impl IntoIterator<Item = (Region, Material)>) -> Result<Self> {
        let regions: BTreeMap<_, _> = regions.into_iter().collect();
        for (r, m) in &regions {
            if !(m.conductivity > 0.0) || !(m.source_density >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{r}: conductivity must be positive and source non-negative, got {m:?}"
                )));
            }
        }
        Ok(Self { regions })
    }

    /// Copper wires carrying the whole source, in lossless insulation.
    pub fn winding(lambda_cu: f64, lambda_ins: f64, p: f64) -> Result<Self> {
        Self::new([
            (
                Region::Copper,
                Material {
                    conductivity: lambda_cu,
                    source_density: p,
                },
            ),
            (
                Region::Insulation,
                Material {
                    conductivity: lambda_ins,
                    source_density: 0.0,
                },
            ),
        ])
    }

    /// The same material in every region.
    pub fn uniform(lambda: f64, p: f64) -> Result<Self> {
        let m = Material {
            conductivity: lambda,
            source_density: p,
        };
        Self::new([(Region::Copper, m), (Region::Insulation, m)])
    }

    pub fn get(&self, region: Region) -> Result<Material> {
        self.regions
            .get(&region)
            .copied()
            .ok_or_else(|| Error::UnknownRegion(region.to_string()))
    }

    /// Same conductivities, every source density multiplied by `factor`.
    pub fn with_source_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for m in out.regions.values_mut() {
            m.source_density *= factor;
        }
        out
    }

    pub fn regions(&self) -> impl Iterator<Item = (Region, Material)> + '_ {
        self.regions.iter().map(|(r, m)| (*r, *m))
    }
}

/// Global 2D operators of one cross-section.
#[derive(Debug, Clone)]
pub struct Assembled2D {
    /// `∫ λ ∇Nⱼ·∇Nᵢ`
    pub stiffness: CsrMatrix,
    /// `∫ λ Nⱼ Nᵢ`, the conductivity-weighted domain mass used for axial coupling.
    pub conductivity_mass: CsrMatrix,
    /// `∫_Γ h Nⱼ Nᵢ` over the selected boundary edges.
    pub boundary_mass: CsrMatrix,
    /// `∫ p Nᵢ`
    pub source: Vec<f64>,
    /// `∫_Γ h ϑ₀ Nᵢ` over the selected boundary edges.
    pub boundary_load: Vec<f64>,
}

fn element_error(t: usize, e: Error) -> Error {
    match e {
        Error::DegenerateElement { area, .. } => Error::DegenerateElement { index: t, area },
        other => other,
    }
}

/// Assembles stiffness, conductivity mass and source over all triangles, and
/// the Robin mass and load over boundary edges whose tag is in `boundary_set`.
pub fn assemble_2d(
    mesh: &Mesh2D,
    materials: &MaterialField,
    boundary_set: &[&str],
    h: f64,
    ambient: f64,
) -> Result<Assembled2D> {
    let n = mesh.n_nodes();
    type ElementOut = ([usize; 3], [[f64; 3]; 3], [[f64; 3]; 3], [f64; 3]);
    let elements: Vec<ElementOut> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangles[t];
            let mat = materials.get(tri.region)?;
            let xy = mesh.triangle_coords(t);
            let k = element_stiffness_2d(&xy, mat.conductivity).map_err(|e| element_error(t, e))?;
            let m = element_mass_2d(&xy, mat.conductivity).map_err(|e| element_error(t, e))?;
            let p =
                element_source_load(&xy, mat.source_density).map_err(|e| element_error(t, e))?;
            Ok((tri.nodes, k, m, p))
        })
        .collect::<Result<_>>()?;

    let mut k_b = TripletBuilder::with_capacity(n, n, 9 * elements.len());
    let mut m_b = TripletBuilder::with_capacity(n, n, 9 * elements.len());
    let mut source_parts: Vec<(usize, f64)> = Vec::with_capacity(3 * elements.len());
    for (nodes, k, m, p) in &elements {
        for a in 0..3 {
            for b in 0..3 {
                k_b.push(nodes[a], nodes[b], k[a][b]);
                m_b.push(nodes[a], nodes[b], m[a][b]);
            }
            source_parts.push((nodes[a], p[a]));
        }
    }

    let mut g_b = TripletBuilder::new(n, n);
    let mut load_parts: Vec<(usize, f64)> = Vec::new();
    for (e, edge) in mesh.boundary_edges.iter().enumerate() {
        if !boundary_set.contains(&edge.tag.as_str()) {
            continue;
        }
        let xy = mesh.edge_coords(e);
        let m = element_boundary_mass_edge(&xy, h);
        let q = element_boundary_load_edge(&xy, h, ambient);
        for a in 0..2 {
            for b in 0..2 {
                g_b.push(edge.nodes[a], edge.nodes[b], m[a][b]);
            }
            load_parts.push((edge.nodes[a], q[a]));
        }
    }

    Ok(Assembled2D {
        stiffness: k_b.build(),
        conductivity_mass: m_b.build(),
        boundary_mass: g_b.build(),
        source: accumulate(n, source_parts),
        boundary_load: accumulate(n, load_parts),
    })
}

/// Sums `(index, value)` contributions in an order that does not depend on
/// how they were produced.
pub(crate) fn accumulate(n: usize, mut parts: Vec<(usize, f64)>) -> Vec<f64> {
    parts.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.total_cmp(&b.1)));
    let mut out = vec![0.0; n];
    for (i, v) in parts {
        out[i] += v;
    }
    out
}

/// Global 1D operators along the winding direction.
#[derive(Debug, Clone)]
pub struct Assembled1D {
    /// `∫ N'ₖ N'ₗ ds` over all elements.
    pub stiffness: CsrMatrix,
    /// `∫ Nₖ Nₗ ds` over all elements.
    pub mass: CsrMatrix,
    /// `∫ Nₖ Nₗ ds` over overhang elements only.
    pub overhang_mass: CsrMatrix,
    /// `∫ Nₖ ds` over all elements.
    pub load: Vec<f64>,
    /// `∫ Nₖ ds` over overhang elements only.
    pub overhang_load: Vec<f64>,
}

pub fn assemble_1d(grid: &AxialGrid) -> Assembled1D {
    let n = grid.n_nodes();
    let mut k = TripletBuilder::new(n, n);
    let mut m = TripletBuilder::new(n, n);
    let mut mo = TripletBuilder::new(n, n);
    let mut load = vec![0.0; n];
    let mut overhang_load = vec![0.0; n];
    for e in 0..grid.n_elements() {
        let len = grid.element_length(e);
        let (ke, me) = element_matrices_1d(len);
        let le = element_load_1d(len);
        let nodes = grid.element_nodes(e);
        let cooled = grid.regimes()[e] == AxialRegime::Overhang;
        for a in 0..3 {
            for b in 0..3 {
                k.push(nodes[a], nodes[b], ke[a][b]);
                m.push(nodes[a], nodes[b], me[a][b]);
                if cooled {
                    mo.push(nodes[a], nodes[b], me[a][b]);
                }
            }
            load[nodes[a]] += le[a];
            if cooled {
                overhang_load[nodes[a]] += le[a];
            }
        }
    }
    Assembled1D {
        stiffness: k.build(),
        mass: m.build(),
        overhang_mass: mo.build(),
        load,
        overhang_load,
    }
}

/// Imposes `u[node] = value` by row and column elimination. Eliminated rows
/// become identity rows; the known values are moved to the right-hand side
/// so the reduced matrix stays symmetric.
pub fn apply_dirichlet(
    matrix: &CsrMatrix,
    rhs: &[f64],
    fixed: &BTreeMap<usize, f64>,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let n = matrix.nrows();
    if rhs.len() != n || !matrix.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix with rhs of length {}",
            n,
            matrix.ncols(),
            rhs.len()
        )));
    }
    if let Some((&bad, _)) = fixed.iter().find(|(&i, _)| i >= n) {
        return Err(Error::InvalidInput(format!(
            "fixed node {bad} out of range"
        )));
    }
    let mut b = rhs.to_vec();
    let mut triplets = Vec::with_capacity(matrix.nnz());
    for (i, j, v) in matrix.triplets() {
        match (fixed.contains_key(&i), fixed.get(&j)) {
            (false, None) => triplets.push((i, j, v)),
            (false, Some(g)) => b[i] -= v * g,
            _ => {}
        }
    }
    for (&i, &g) in fixed {
        triplets.push((i, i, 1.0));
        b[i] = g;
    }
    Ok((CsrMatrix::from_triplets(n, n, triplets), b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rectangle;
    use crate::solver::dense_direct_solve;
    use proptest::prelude::*;

    const UNIT: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn p1_values_at_vertex_and_centroid() {
        assert_eq!(
            p1_shape_eval([1.0, 0.0, 0.0]).unwrap().values,
            [1.0, 0.0, 0.0]
        );
        let third = 1.0 / 3.0;
        assert_eq!(p1_shape_eval([third; 3]).unwrap().values, [third; 3]);
        assert!(p1_shape_eval([0.5, 0.6, 0.0]).is_err());
    }

    #[test]
    fn quadratic_basis_values() {
        assert_eq!(lagrange1d_quadratic_eval(-1.0).0, [1.0, 0.0, 0.0]);
        assert_eq!(lagrange1d_quadratic_eval(0.0).0, [0.0, 1.0, 0.0]);
        assert_eq!(lagrange1d_quadratic_eval(0.5).0, [-0.125, 0.75, 0.375]);
    }

    proptest! {
        #[test]
        fn partitions_of_unity(a in 0.0f64..1.0, b in 0.0f64..1.0, xi in -1.0f64..1.0) {
            let (l1, l2) = if a + b <= 1.0 { (a, b) } else { (1.0 - a, 1.0 - b) };
            let e = p1_shape_eval([1.0 - l1 - l2, l1, l2]).unwrap();
            prop_assert!((e.values.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
            let gsum = e.ref_gradients.iter().fold([0.0, 0.0], |s, g| [s[0] + g[0], s[1] + g[1]]);
            prop_assert_eq!(gsum, [0.0, 0.0]);
            let (n, dn) = lagrange1d_quadratic_eval(xi);
            prop_assert!((n.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
            prop_assert!(dn.iter().sum::<f64>().abs() <= 1e-14);
        }

        #[test]
        fn element_stiffness_invariants(
            pts in proptest::array::uniform6(-1.0f64..1.0),
            lambda in 0.1f64..500.0,
        ) {
            let xy = [[pts[0], pts[1]], [pts[2], pts[3]], [pts[4], pts[5]]];
            let area = 0.5 * doubled_signed_area(xy[0], xy[1], xy[2]);
            prop_assume!(area > 1e-3);
            let k = element_stiffness_2d(&xy, lambda).unwrap();
            let scale = k.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..3 {
                prop_assert!(k[i].iter().sum::<f64>().abs() <= 1e-12 * scale);
                for j in 0..3 {
                    prop_assert!((k[i][j] - k[j][i]).abs() <= 1e-14 * scale);
                }
            }
        }
    }

    #[test]
    fn unit_right_triangle_stiffness() {
        let k = element_stiffness_2d(&UNIT, 1.0).unwrap();
        assert_eq!(k, [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]]);
        let zero = element_stiffness_2d(&UNIT, 0.0).unwrap();
        assert!(zero.iter().flatten().all(|&v| v == 0.0));
        let scaled = UNIT.map(|[x, y]| [2.0 * x, 2.0 * y]);
        assert_eq!(element_stiffness_2d(&scaled, 1.0).unwrap(), k);
        assert!(element_stiffness_2d(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], 1.0).is_err());
    }

    #[test]
    fn edge_mass_and_load() {
        let unit = [[0.0, 0.0], [1.0, 0.0]];
        assert_eq!(
            element_boundary_mass_edge(&unit, 6.0),
            [[2.0, 1.0], [1.0, 2.0]]
        );
        assert_eq!(element_boundary_mass_edge(&unit, 0.0), [[0.0; 2]; 2]);
        assert_eq!(element_boundary_load_edge(&unit, 0.0, 293.0), [0.0; 2]);
        let q = element_boundary_load_edge(&[[0.0, 0.0], [0.0, 2.0]], 22485.0, 293.0);
        assert_eq!(q, [6_588_105.0; 2]);
    }

    #[test]
    fn source_load() {
        assert_eq!(element_source_load(&UNIT, 3.0).unwrap(), [0.5; 3]);
        assert_eq!(element_source_load(&UNIT, 0.0).unwrap(), [0.0; 3]);
    }

    #[test]
    fn one_d_matrices_match_quadrature() {
        // Independent route: integrate the basis with the 3-point Gauss rule.
        let len = 3.0;
        let (k, m) = element_matrices_1d(len);
        let jac = len / 2.0;
        for a in 0..3 {
            for b in 0..3 {
                let (mut kq, mut mq) = (0.0, 0.0);
                for (xi, w) in GAUSS3 {
                    let (n, dn) = lagrange1d_quadratic_eval(xi);
                    kq += w * dn[a] * dn[b] / jac;
                    mq += w * n[a] * n[b] * jac;
                }
                assert!(close(k[a][b], kq, 1e-14), "K[{a}][{b}]");
                assert!(close(m[a][b], mq, 1e-14), "M[{a}][{b}]");
            }
        }
        assert!(close(k[0][0], 7.0 / 9.0, 1e-15));
        for row in &k {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
        assert!(close(m.iter().flatten().sum(), len, 1e-14));
    }

    #[test]
    fn assembled_two_triangle_square() {
        let mesh = generate_rectangle(1.0, 1.0, 1, 1, Region::Copper).unwrap();
        let mat = MaterialField::uniform(1.0, 0.0).unwrap();
        let a = assemble_2d(&mesh, &mat, &["outer"], 5.0, 293.0).unwrap();
        assert!(a.stiffness.row_sums().iter().all(|s| s.abs() < 1e-14));
        assert_eq!(a.stiffness.symmetry_defect(), 0.0);
        let sys = a.stiffness.add(&a.boundary_mass).unwrap();
        let u = dense_direct_solve(&sys, &a.boundary_load).unwrap();
        assert!(u.iter().all(|&v| (v - 293.0).abs() < 1e-10));
    }

    #[test]
    fn boundary_mass_only_on_selected_edges() {
        let mut mesh = generate_rectangle(2.0, 1.0, 4, 2, Region::Copper).unwrap();
        for e in &mut mesh.boundary_edges {
            let [a, b] = e.nodes;
            if mesh.nodes[a][1] == -0.5 && mesh.nodes[b][1] == -0.5 {
                e.tag = "bottom".into();
            }
        }
        let mat = MaterialField::uniform(1.0, 1.0).unwrap();
        let a = assemble_2d(&mesh, &mat, &["bottom"], 3.0, 1.0).unwrap();
        for (i, j, _) in a.boundary_mass.triplets() {
            assert_eq!(mesh.nodes[i][1], -0.5);
            assert_eq!(mesh.nodes[j][1], -0.5);
        }
        assert!((a.boundary_load.iter().sum::<f64>() - 3.0 * 2.0).abs() < 1e-13);
        assert!((a.source.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn missing_region_material_is_an_error() {
        let mesh = generate_rectangle(1.0, 1.0, 1, 1, Region::Insulation).unwrap();
        let mat = MaterialField::new([(
            Region::Copper,
            Material {
                conductivity: 1.0,
                source_density: 0.0,
            },
        )])
        .unwrap();
        assert!(matches!(
            assemble_2d(&mesh, &mat, &[], 0.0, 0.0),
            Err(Error::UnknownRegion(_))
        ));
    }

    #[test]
    fn assembly_is_independent_of_element_order() {
        let mut mesh = generate_rectangle(1.0, 0.7, 5, 4, Region::Copper).unwrap();
        for (i, t) in mesh.triangles.iter_mut().enumerate() {
            if i % 3 == 0 {
                t.region = Region::Insulation;
            }
        }
        let mat = MaterialField::winding(400.0, 0.7, 1e6).unwrap();
        let a = assemble_2d(&mesh, &mat, &["outer"], 100.0, 293.0).unwrap();
        let mut shuffled = mesh.clone();
        shuffled.triangles.reverse();
        shuffled.triangles.swap(0, 7);
        shuffled.boundary_edges.reverse();
        let b = assemble_2d(&shuffled, &mat, &["outer"], 100.0, 293.0).unwrap();
        assert_eq!(a.stiffness, b.stiffness);
        assert_eq!(a.boundary_mass, b.boundary_mass);
        assert_eq!(a.source, b.source);
        assert_eq!(a.boundary_load, b.boundary_load);
    }

    #[test]
    fn one_d_assembly_splits_overhang() {
        let g = AxialGrid::generate(2, 1).unwrap();
        let a = assemble_1d(&g);
        assert!((a.load.iter().sum::<f64>() - g.length()).abs() < 1e-15);
        assert!((a.overhang_load.iter().sum::<f64>() - 33.3e-3).abs() < 1e-15);
        for (i, _, _) in a.overhang_mass.triplets() {
            assert!(i >= 4);
        }
    }
}
