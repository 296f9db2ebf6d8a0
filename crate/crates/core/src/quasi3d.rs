//! Quasi-3D system: a 2D cross-section basis extruded along `s` with
//! quadratic elements, composed from 1D and 2D factors with Kronecker products.
//!
//! Degrees of freedom are ordered axial-major: the coefficient of 2D node `j`
//! and axial node `k` lives at `k * n_section + j`. With that ordering
//! `A₁ ⊗ A₂` acts on `x` as `vec(A₂ X A₁ᵀ)` where column `k` of `X` is the
//! block of axial node `k`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::axial::AxialGrid;
use crate::error::{Error, Result};
use crate::fem::{assemble_1d, assemble_2d, Assembled1D, MaterialField};
use crate::mesh::{Mesh2D, OUTER};
use crate::solver::{self, BandCholesky, Preconditioner, SolveReport, SolverMethod, SolverOptions};
use crate::sparse::{kron, kron_vec, CsrMatrix, LinearOperator};
use crate::spray::SprayParameters;

/// One `axial ⊗ section` product.
#[derive(Debug, Clone)]
pub struct KroneckerTerm {
    pub axial: CsrMatrix,
    pub section: CsrMatrix,
    /// Factors that annihilate constants; applied to mean-free input.
    axial_kills_constants: bool,
    section_kills_constants: bool,
}

fn kills_constants(m: &CsrMatrix) -> bool {
    m.nnz() > 0
        && (0..m.nrows()).all(|i| {
            let (_, vals) = m.row(i);
            let abs: f64 = vals.iter().map(|v| v.abs()).sum();
            vals.iter().sum::<f64>().abs() <= 1e-12 * abs
        })
}

/// Sum of Kronecker products applied without forming the full matrix.
#[derive(Debug, Clone)]
pub struct KroneckerOperator {
    n_axial: usize,
    n_section: usize,
    terms: Vec<KroneckerTerm>,
}

impl KroneckerOperator {
    pub fn new(n_axial: usize, n_section: usize) -> Self {
        Self {
            n_axial,
            n_section,
            terms: Vec::new(),
        }
    }

    pub fn push(&mut self, axial: CsrMatrix, section: CsrMatrix) -> Result<()> {
        if !axial.is_square()
            || axial.nrows() != self.n_axial
            || !section.is_square()
            || section.nrows() != self.n_section
        {
            return Err(Error::DimensionMismatch(format!(
                "term {}x{} ⊗ {}x{} does not fit an operator with {} axial and {} section dofs",
                axial.nrows(),
                axial.ncols(),
                section.nrows(),
                section.ncols(),
                self.n_axial,
                self.n_section
            )));
        }
        let axial_kills_constants = kills_constants(&axial);
        let section_kills_constants = kills_constants(&section);
        self.terms.push(KroneckerTerm {
            axial,
            section,
            axial_kills_constants,
            section_kills_constants,
        });
        Ok(())
    }

    /// Concatenates the terms of two operators of equal shape.
    pub fn plus(mut self, other: KroneckerOperator) -> Result<Self> {
        for t in other.terms {
            self.push(t.axial, t.section)?;
        }
        Ok(self)
    }

    pub fn n_axial(&self) -> usize {
        self.n_axial
    }

    pub fn n_section(&self) -> usize {
        self.n_section
    }

    pub fn terms(&self) -> &[KroneckerTerm] {
        &self.terms
    }

    /// Explicit sparse form `Σ axial ⊗ section`.
    pub fn assemble(&self) -> CsrMatrix {
        let n = self.dim();
        let mut acc = CsrMatrix::zeros(n, n);
        for t in &self.terms {
            acc = acc
                .add(&kron(&t.axial, &t.section))
                .expect("shapes checked on push");
        }
        acc
    }
}

impl LinearOperator for KroneckerOperator {
    fn dim(&self) -> usize {
        self.n_axial * self.n_section
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let ns = self.n_section;
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        // Removing the constant part a stiffness factor ignores keeps a large
        // uniform rise out of the rounding error of the product.
        let axial_mean = self.terms.iter().any(|t| t.axial_kills_constants).then(|| {
            let mut m = vec![0.0; ns];
            for xl in x.chunks(ns) {
                m.iter_mut().zip(xl).for_each(|(mi, xi)| *mi += xi);
            }
            m.iter_mut().for_each(|mi| *mi /= self.n_axial as f64);
            m
        });
        // Z_t[:, l] = section_t · X[:, l]
        let sectioned: Vec<Vec<f64>> = self
            .terms
            .iter()
            .map(|t| {
                let mut z = vec![0.0; x.len()];
                z.par_chunks_mut(ns)
                    .zip(x.par_chunks(ns))
                    .for_each(|(zl, xl)| {
                        if !t.axial_kills_constants && !t.section_kills_constants {
                            t.section.mul_vec_into(xl, zl);
                            return;
                        }
                        let mut xs = xl.to_vec();
                        if let (true, Some(m)) = (t.axial_kills_constants, &axial_mean) {
                            xs.iter_mut().zip(m).for_each(|(v, mi)| *v -= mi);
                        }
                        if t.section_kills_constants {
                            let c = xs.iter().sum::<f64>() / ns as f64;
                            xs.iter_mut().for_each(|v| *v -= c);
                        }
                        t.section.mul_vec_into(&xs, zl);
                    });
                z
            })
            .collect();
        // Y[:, k] = Σ_t Σ_l axial_t[k, l] Z_t[:, l]
        y.par_chunks_mut(ns).enumerate().for_each(|(k, yk)| {
            yk.fill(0.0);
            for (t, z) in self.terms.iter().zip(&sectioned) {
                let (cols, vals) = t.axial.row(k);
                for (&l, &a) in cols.iter().zip(vals) {
                    let zl = &z[l * ns..(l + 1) * ns];
                    yk.iter_mut().zip(zl).for_each(|(yi, zi)| *yi += a * zi);
                }
            }
        });
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for t in &self.terms {
            let da = t.axial.diagonal();
            let ds = t.section.diagonal();
            for (k, a) in da.iter().enumerate() {
                for (j, s) in ds.iter().enumerate() {
                    d[k * self.n_section + j] += a * s;
                }
            }
        }
        d
    }

    fn to_csr(&self) -> CsrMatrix {
        self.assemble()
    }

    fn check_symmetric(&self, samples: usize) -> Result<()> {
        for t in &self.terms {
            t.axial.check_symmetric(samples)?;
            t.section.check_symmetric(samples)?;
        }
        Ok(())
    }
}

/// Largest band storage, in `f64` values, the tensor preconditioner may use
/// before solves fall back to Jacobi.
pub const TENSOR_PRECONDITIONER_MAX_STORAGE: usize = 60_000_000;

/// Exact inverse of the separable operator
/// `P = M¹ᴰ ⊗ (K²ᴰ + β M²ᴰ_Γ) + K¹ᴰ ⊗ M²ᴰ_λ`,
/// where `β` is the cooled fraction of the axial length.
///
/// With `K¹ᴰ V = M¹ᴰ V Λ` and `Vᵀ M¹ᴰ V = I`,
/// `P⁻¹ = (V ⊗ I) diag_k (K²ᴰ + β M²ᴰ_Γ + Λₖ M²ᴰ_λ)⁻¹ (Vᵀ ⊗ I)`,
/// so one application costs a banded Cholesky solve per axial node.
#[derive(Debug, Clone)]
pub struct TensorPreconditioner {
    /// Axial eigenvectors, row-major `n_axial x n_axial`.
    v: Vec<f64>,
    blocks: Vec<BandCholesky>,
    n_section: usize,
}

impl TensorPreconditioner {
    pub fn new(
        m1d: &CsrMatrix,
        k1d: &CsrMatrix,
        m1d_overhang: &CsrMatrix,
        k2d: &CsrMatrix,
        m2d_conductivity: &CsrMatrix,
        m_gamma_2d: &CsrMatrix,
    ) -> Result<Self> {
        let n1 = m1d.nrows();
        let n2 = k2d.nrows();
        let storage = n1 * n2 * (BandCholesky::bandwidth_of(k2d) + 1);
        if storage > TENSOR_PRECONDITIONER_MAX_STORAGE {
            return Err(Error::TooLarge(format!(
                "tensor preconditioner needs {storage} band entries (limit {TENSOR_PRECONDITIONER_MAX_STORAGE})"
            )));
        }
        let dense = |a: &CsrMatrix| {
            let mut d = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
            for (i, j, v) in a.triplets() {
                d[(i, j)] = v;
            }
            d
        };
        let (m, k) = (dense(m1d), dense(k1d));
        let l = m
            .clone()
            .cholesky()
            .ok_or(Error::NotSpd {
                row: 0,
                pivot: f64::NAN,
            })?
            .l();
        let c = l
            .solve_lower_triangular(&k)
            .and_then(|lk| l.solve_lower_triangular(&lk.transpose()))
            .ok_or_else(|| Error::InvalidInput("singular axial mass matrix".into()))?;
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let v = l
            .transpose()
            .solve_upper_triangular(&eig.eigenvectors)
            .ok_or_else(|| Error::InvalidInput("singular axial mass matrix".into()))?;
        let total: f64 = m.iter().sum();
        let beta = m1d_overhang.values().iter().sum::<f64>() / total;
        let base = k2d.add(&m_gamma_2d.scaled(beta))?;
        let blocks = eig
            .eigenvalues
            .iter()
            .map(|&mu| BandCholesky::factor(&base.add(&m2d_conductivity.scaled(mu.max(0.0)))?))
            .collect::<Result<Vec<_>>>()?;
        let mut vr = vec![0.0; n1 * n1];
        for i in 0..n1 {
            for j in 0..n1 {
                vr[i * n1 + j] = v[(i, j)];
            }
        }
        Ok(Self {
            v: vr,
            blocks,
            n_section: n2,
        })
    }

    /// Preconditioner for `operator` = conduction + `boundary`, as built by
    /// [`SystemBuilder::build`].
    pub fn for_system(system: &Quasi3DSystem) -> Result<Self> {
        let terms = system.operator.terms();
        let bterms = system.boundary_operator.terms();
        if terms.len() != 3 || bterms.len() != 1 {
            return Err(Error::InvalidInput(
                "operator is not a conduction + Robin composition".into(),
            ));
        }
        Self::new(
            &terms[0].axial,
            &terms[1].axial,
            &bterms[0].axial,
            &terms[0].section,
            &terms[1].section,
            &bterms[0].section,
        )
    }

    /// `y[:, k] = Σ_l V[l, k] x[:, l]` when `transpose`, else `Σ_l V[k, l] x[:, l]`.
    fn mix(&self, x: &[f64], y: &mut [f64], transpose: bool) {
        let (n1, ns) = (self.blocks.len(), self.n_section);
        y.par_chunks_mut(ns).enumerate().for_each(|(k, yk)| {
            yk.fill(0.0);
            for l in 0..n1 {
                let c = if transpose {
                    self.v[l * n1 + k]
                } else {
                    self.v[k * n1 + l]
                };
                yk.iter_mut()
                    .zip(&x[l * ns..(l + 1) * ns])
                    .for_each(|(a, b)| *a += c * b);
            }
        });
    }
}

impl Preconditioner for TensorPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut w = vec![0.0; r.len()];
        self.mix(r, &mut w, true);
        w.par_chunks_mut(self.n_section)
            .zip(self.blocks.par_iter())
            .for_each(|(wk, f)| f.solve_in_place(wk));
        self.mix(&w, z, false);
    }
}

fn check_pair(axial: &CsrMatrix, section: &CsrMatrix, what: &str) -> Result<()> {
    if !axial.is_square() || !section.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: factors must be square"
        )));
    }
    Ok(())
}

/// Conduction operator `M¹ᴰ ⊗ K²ᴰ + K¹ᴰ ⊗ M²ᴰ_λ`, where `M²ᴰ_λ` is the
/// conductivity-weighted domain mass.
pub fn compose_stiffness(
    k2d: &CsrMatrix,
    m2d_conductivity: &CsrMatrix,
    k1d: &CsrMatrix,
    m1d: &CsrMatrix,
) -> Result<KroneckerOperator> {
    check_pair(m1d, k2d, "stiffness")?;
    if k2d.nrows() != m2d_conductivity.nrows() || k1d.nrows() != m1d.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "2D factors {} and {}, 1D factors {} and {}",
            k2d.nrows(),
            m2d_conductivity.nrows(),
            k1d.nrows(),
            m1d.nrows()
        )));
    }
    let mut op = KroneckerOperator::new(m1d.nrows(), k2d.nrows());
    op.push(m1d.clone(), k2d.clone())?;
    op.push(k1d.clone(), m2d_conductivity.clone())?;
    Ok(op)
}

/// Robin terms `M¹ᴰ_overhang ⊗ M²ᴰ_Γ` and `q¹ᴰ_overhang ⊗ q²ᴰ_Γ`. The 1D
/// factors must already be restricted to overhang elements; an all-slot grid
/// yields a zero operator and load.
pub fn compose_boundary_terms(
    m_gamma_2d: &CsrMatrix,
    q_gamma_2d: &[f64],
    m1d_overhang: &CsrMatrix,
    q1d_overhang: &[f64],
) -> Result<(KroneckerOperator, Vec<f64>)> {
    check_pair(m1d_overhang, m_gamma_2d, "boundary")?;
    if q_gamma_2d.len() != m_gamma_2d.nrows() || q1d_overhang.len() != m1d_overhang.nrows() {
        return Err(Error::DimensionMismatch("boundary load length".into()));
    }
    let mut op = KroneckerOperator::new(m1d_overhang.nrows(), m_gamma_2d.nrows());
    op.push(m1d_overhang.clone(), m_gamma_2d.clone())?;
    Ok((op, kron_vec(q1d_overhang, q_gamma_2d)))
}

/// Source load `p¹ᴰ ⊗ p²ᴰ`.
pub fn compose_source(p2d: &[f64], p1d_all: &[f64]) -> Vec<f64> {
    kron_vec(p1d_all, p2d)
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemMetadata {
    pub mesh_hash: String,
    pub n_section: usize,
    pub n_axial: usize,
    pub heat_transfer_coefficient: f64,
    pub ambient: f64,
    pub materials: MaterialField,
    pub axial: AxialGrid,
}

/// Assembled `(K_λ + M_h) u = p + q`.
#[derive(Debug, Clone)]
pub struct Quasi3DSystem {
    /// `K³ᴰ + M_h³ᴰ`
    pub operator: KroneckerOperator,
    /// `M_h³ᴰ` alone, kept for heat-flux evaluation.
    pub boundary_operator: KroneckerOperator,
    pub source: Vec<f64>,
    pub boundary_load: Vec<f64>,
    pub metadata: SystemMetadata,
}

impl Quasi3DSystem {
    pub fn n_section(&self) -> usize {
        self.metadata.n_section
    }

    pub fn n_axial(&self) -> usize {
        self.metadata.n_axial
    }

    pub fn dim(&self) -> usize {
        self.n_section() * self.n_axial()
    }

    pub fn dof(&self, section_node: usize, axial_node: usize) -> usize {
        axial_node * self.n_section() + section_node
    }

    pub fn dof_pair(&self, flat: usize) -> (usize, usize) {
        (flat % self.n_section(), flat / self.n_section())
    }

    /// `b = p + q`
    pub fn rhs(&self) -> Vec<f64> {
        self.source
            .iter()
            .zip(&self.boundary_load)
            .map(|(p, q)| p + q)
            .collect()
    }

    /// Solves for the temperature.
    ///
    /// Because constants lie in the kernel of the conduction part and
    /// `q = M_h (ϑ₀·1)`, the shift `u = ϑ₀ + θ` turns the system into
    /// `A θ = p`. The rise `θ` is solved to `opts.tol` relative to `‖p‖`,
    /// which bounds `‖A u - b‖ / ‖b‖` by the same tolerance.
    ///
    /// `cg_tensor` falls back to `cg_jacobi` when the preconditioner would
    /// exceed [`TENSOR_PRECONDITIONER_MAX_STORAGE`]; the report names the
    /// method actually used.
    pub fn solve(&self, opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
        let pc = self.preconditioner(opts)?;
        self.solve_preconditioned(opts, pc.as_ref())
    }

    /// The tensor preconditioner when `opts` asks for it and it fits.
    pub fn preconditioner(&self, opts: &SolverOptions) -> Result<Option<TensorPreconditioner>> {
        if opts.method != SolverMethod::CgTensor {
            return Ok(None);
        }
        match TensorPreconditioner::for_system(self) {
            Ok(pc) => Ok(Some(pc)),
            Err(Error::TooLarge(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Like [`Self::solve`], reusing a preconditioner built for an operator
    /// with the same factors.
    pub fn solve_preconditioned(
        &self,
        opts: &SolverOptions,
        pc: Option<&TensorPreconditioner>,
    ) -> Result<(Vec<f64>, SolveReport)> {
        let (rise, mut report) = match (opts.method, pc) {
            (SolverMethod::CgTensor, Some(pc)) => {
                self.operator.check_symmetric(100)?;
                solver::pcg(
                    &self.operator,
                    pc,
                    SolverMethod::CgTensor,
                    &self.source,
                    None,
                    opts,
                    |_, _| {},
                )?
            }
            (SolverMethod::CgTensor, None) => solver::solve(
                &self.operator,
                &self.source,
                &SolverOptions {
                    method: SolverMethod::CgJacobi,
                    ..*opts
                },
            )?,
            _ => solver::solve(&self.operator, &self.source, opts)?,
        };
        let ambient = self.metadata.ambient;
        let u: Vec<f64> = rise.iter().map(|t| ambient + t).collect();
        let b = self.rhs();
        report.relative_residual =
            solver::relative_residual(&self.operator, &u, &b).min(report.relative_residual);
        Ok((u, report))
    }

    /// The same system with every source density multiplied by `factor`.
    pub fn with_source_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.source.iter_mut().for_each(|p| *p *= factor);
        out.metadata.materials = out.metadata.materials.with_source_scaled(factor);
        out
    }

    /// Writes `A` as `row col value` lines and `b` as one value per line.
    pub fn dump(
        &self,
        matrix_path: impl AsRef<std::path::Path>,
        rhs_path: impl AsRef<std::path::Path>,
    ) -> Result<()> {
        use std::io::Write;
        let (mp, rp) = (matrix_path.as_ref(), rhs_path.as_ref());
        let file = std::fs::File::create(mp).map_err(|e| Error::io(mp, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.operator
            .assemble()
            .write_coordinate_list(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(mp, e))?;
        let mut text = String::with_capacity(24 * self.dim());
        for v in self.rhs() {
            text.push_str(&format!("{v:e}\n"));
        }
        std::fs::write(rp, text).map_err(|e| Error::io(rp, e))
    }

    /// `∫ p dV`
    pub fn generated_power(&self) -> f64 {
        self.source.iter().sum()
    }

    /// `∮ h (ϑ - ϑ₀) dΓ` over the cooled surface.
    pub fn extracted_power(&self, u: &[f64]) -> f64 {
        let ambient = self.metadata.ambient;
        let rise: Vec<f64> = u.iter().map(|v| v - ambient).collect();
        let mut flux = vec![0.0; rise.len()];
        self.boundary_operator.apply(&rise, &mut flux);
        flux.iter().sum()
    }
}

/// Heat transfer conditions on the cooled lateral surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cooling {
    /// W/(K·m²)
    pub h: f64,
    /// K
    pub ambient: f64,
}

/// Caches the factors that do not depend on the source or the heat
/// transfer coefficient, so parameter sweeps only rescale.
#[derive(Debug, Clone)]
pub struct SystemBuilder {
    mesh: Arc<Mesh2D>,
    mesh_hash: String,
    grid: AxialGrid,
    materials: MaterialField,
    cooled_tags: Vec<String>,
    conduction: KroneckerOperator,
    /// `∫_Γ Nⱼ Nᵢ` (unit `h`)
    unit_boundary_mass: CsrMatrix,
    /// `∫_Γ Nᵢ` (unit `h ϑ₀`)
    unit_boundary_load: Vec<f64>,
    axial: Assembled1D,
}

impl SystemBuilder {
    pub fn new(mesh: Arc<Mesh2D>, grid: AxialGrid, materials: MaterialField) -> Result<Self> {
        Self::with_cooled_tags(mesh, grid, materials, &[OUTER])
    }

    pub fn with_cooled_tags(
        mesh: Arc<Mesh2D>,
        grid: AxialGrid,
        materials: MaterialField,
        cooled_tags: &[&str],
    ) -> Result<Self> {
        mesh.validate()?;
        let section = assemble_2d(&mesh, &materials, cooled_tags, 1.0, 1.0)?;
        let axial = assemble_1d(&grid);
        let conduction = compose_stiffness(
            &section.stiffness,
            &section.conductivity_mass,
            &axial.stiffness,
            &axial.mass,
        )?;
        Ok(Self {
            mesh_hash: mesh.content_hash(),
            mesh,
            grid,
            materials,
            cooled_tags: cooled_tags.iter().map(|s| s.to_string()).collect(),
            conduction,
            unit_boundary_mass: section.boundary_mass,
            unit_boundary_load: section.boundary_load,
            axial,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }

    pub fn grid(&self) -> &AxialGrid {
        &self.grid
    }

    pub fn materials(&self) -> &MaterialField {
        &self.materials
    }

    pub fn cooled_tags(&self) -> &[String] {
        &self.cooled_tags
    }

    /// System with every source density multiplied by `source_scale`.
    pub fn build(&self, cooling: Cooling, source_scale: f64) -> Result<Quasi3DSystem> {
        if !self.grid.has_overhang() {
            return Err(Error::NoCooledSurface);
        }
        if !(cooling.h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "heat transfer coefficient must be positive, got {}",
                cooling.h
            )));
        }
        let materials = self.materials.with_source_scaled(source_scale);
        let tags: Vec<&str> = self.cooled_tags.iter().map(String::as_str).collect();
        let p2d = assemble_2d(&self.mesh, &materials, &tags, 0.0, 0.0)?.source;
        let m_gamma = self.unit_boundary_mass.scaled(cooling.h);
        let q_gamma: Vec<f64> = self
            .unit_boundary_load
            .iter()
            .map(|v| v * cooling.h * cooling.ambient)
            .collect();
        let (boundary_operator, boundary_load) = compose_boundary_terms(
            &m_gamma,
            &q_gamma,
            &self.axial.overhang_mass,
            &self.axial.overhang_load,
        )?;
        let operator = self.conduction.clone().plus(boundary_operator.clone())?;
        Ok(Quasi3DSystem {
            operator,
            boundary_operator,
            source: compose_source(&p2d, &self.axial.load),
            boundary_load,
            metadata: SystemMetadata {
                mesh_hash: self.mesh_hash.clone(),
                n_section: self.mesh.n_nodes(),
                n_axial: self.grid.n_nodes(),
                heat_transfer_coefficient: cooling.h,
                ambient: cooling.ambient,
                materials,
                axial: self.grid.clone(),
            },
        })
    }
}

/// Builds the spray-cooled system: Joule heating everywhere, Robin cooling on
/// the outer edges of overhang elements, adiabatic elsewhere.
pub fn build_system(
    mesh: &Mesh2D,
    grid: &AxialGrid,
    materials: &MaterialField,
    spray: &SprayParameters,
) -> Result<Quasi3DSystem> {
    spray.validate()?;
    SystemBuilder::new(Arc::new(mesh.clone()), grid.clone(), materials.clone())?.build(
        Cooling {
            h: spray.heat_transfer_coefficient,
            ambient: spray.temperature,
        },
        1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axial::AxialRegime;
    use crate::mesh::{generate_rectangle, Region};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> CsrMatrix {
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                if i == j || rng.gen_bool(0.5) {
                    let v = rng.gen_range(-1.0..1.0);
                    d[i][j] = v;
                    d[j][i] = v;
                }
            }
        }
        CsrMatrix::from_dense(&d)
    }

    #[test]
    fn kronecker_matvec_matches_reshaped_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let (na, ns) = (rng.gen_range(1..6), rng.gen_range(1..8));
            let a = random_sym(na, &mut rng);
            let s = random_sym(ns, &mut rng);
            let x: Vec<f64> = (0..na * ns).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut op = KroneckerOperator::new(na, ns);
            op.push(a.clone(), s.clone()).unwrap();
            let mut y = vec![0.0; na * ns];
            op.apply(&x, &mut y);
            // vec(S X Aᵀ), X column k = block k
            let (sd, ad) = (s.to_dense(), a.to_dense());
            for k in 0..na {
                for j in 0..ns {
                    let mut v = 0.0;
                    for l in 0..na {
                        for i in 0..ns {
                            v += sd[j][i] * x[l * ns + i] * ad[k][l];
                        }
                    }
                    let got = y[k * ns + j];
                    assert!((got - v).abs() <= 1e-13 * v.abs().max(1.0), "{got} vs {v}");
                }
            }
            let explicit = op.assemble().mul_vec(&x);
            for (p, q) in explicit.iter().zip(&y) {
                assert!((p - q).abs() <= 1e-13 * q.abs().max(1.0));
            }
            assert_eq!(op.diagonal(), op.assemble().diagonal());
        }
    }

    #[test]
    fn decoupled_slices_replicate_section_matrix() {
        let k2 = CsrMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let m2 = CsrMatrix::identity(2);
        let m1 = CsrMatrix::identity(3).scaled(2.0);
        let k1 = CsrMatrix::zeros(3, 3);
        let a = compose_stiffness(&k2, &m2, &k1, &m1).unwrap().assemble();
        for k in 0..3 {
            for l in 0..3 {
                for i in 0..2 {
                    for j in 0..2 {
                        let expect = if k == l { 2.0 * k2.get(i, j) } else { 0.0 };
                        assert_eq!(a.get(k * 2 + i, l * 2 + j), expect);
                    }
                }
            }
        }
        assert!(compose_stiffness(&k2, &CsrMatrix::identity(3), &k1, &m1).is_err());
    }

    fn winding_square() -> (Mesh2D, MaterialField) {
        let mut mesh = generate_rectangle(2e-3, 3e-3, 3, 4, Region::Copper).unwrap();
        for (i, t) in mesh.triangles.iter_mut().enumerate() {
            if i % 4 == 1 {
                t.region = Region::Insulation;
            }
        }
        (mesh, MaterialField::winding(400.0, 0.7, 1.7e6).unwrap())
    }

    #[test]
    fn composed_stiffness_has_constants_in_kernel() {
        let (mesh, mat) = winding_square();
        let grid = AxialGrid::generate(2, 2).unwrap();
        let b = SystemBuilder::new(Arc::new(mesh), grid, mat).unwrap();
        let k = b.conduction.assemble();
        let scale = k.max_abs();
        assert!(k.row_sums().iter().all(|s| s.abs() <= 1e-12 * scale));
        assert!(k.symmetry_defect() <= 1e-12 * scale);
    }

    #[test]
    fn stiffness_maps_a_large_constant_to_zero() {
        let (mesh, mat) = winding_square();
        let grid = AxialGrid::generate(2, 2).unwrap();
        let b = SystemBuilder::new(Arc::new(mesh), grid, mat).unwrap();
        let n = b.conduction.dim();
        let x = vec![612.5; n];
        let mut y = vec![1.0; n];
        b.conduction.apply(&x, &mut y);
        assert!(y.iter().all(|&v| v == 0.0), "{y:?}");
        assert!(b
            .conduction
            .assemble()
            .mul_vec(&x)
            .iter()
            .any(|&v| v != 0.0));
    }

    #[test]
    fn all_slot_grid_has_no_boundary_terms() {
        let (mesh, mat) = winding_square();
        let grid = AxialGrid::single_regime(0.05, 3, AxialRegime::Slot).unwrap();
        let a = assemble_1d(&grid);
        let section = assemble_2d(&mesh, &mat, &[OUTER], 22485.0, 293.0).unwrap();
        let (op, q) = compose_boundary_terms(
            &section.boundary_mass,
            &section.boundary_load,
            &a.overhang_mass,
            &a.overhang_load,
        )
        .unwrap();
        assert_eq!(op.assemble().nnz(), 0);
        assert!(q.iter().all(|&v| v == 0.0));
        let spray = SprayParameters::default();
        assert!(matches!(
            build_system(&mesh, &grid, &mat, &spray),
            Err(Error::NoCooledSurface)
        ));
    }

    #[test]
    fn boundary_load_total_is_h_theta_area() {
        let (mesh, mat) = winding_square();
        let grid = AxialGrid::generate(1, 1).unwrap();
        let spray = SprayParameters::default();
        let sys = build_system(&mesh, &grid, &mat, &spray).unwrap();
        let area = mesh.boundary_length(OUTER) * 33.3e-3;
        let expect = 22485.0 * 293.0 * area;
        let got: f64 = sys.boundary_load.iter().sum();
        assert!((got - expect).abs() <= 1e-12 * expect, "{got} vs {expect}");
        for (i, &q) in sys.boundary_load.iter().enumerate() {
            let (j, k) = sys.dof_pair(i);
            if q != 0.0 {
                assert!(k >= 2, "axial node {k} is in the slot");
                assert!(mesh.boundary_nodes(&[OUTER]).contains(&j));
            }
        }
    }

    #[test]
    fn source_total_and_linearity() {
        // copper 63.5 mm², length 83.3 mm, p = 1.7 MW/m³
        let mesh = generate_rectangle(63.5e-3, 1e-3, 2, 1, Region::Copper).unwrap();
        let mat = MaterialField::winding(400.0, 0.7, 1.7e6).unwrap();
        let p2d = assemble_2d(&mesh, &mat, &[], 0.0, 0.0).unwrap().source;
        let grid = AxialGrid::generate(3, 2).unwrap();
        let p1d = assemble_1d(&grid).load;
        let total: f64 = compose_source(&p2d, &p1d).iter().sum();
        let expect = 1.7e6 * 63.5e-6 * 83.3e-3;
        assert!((total - expect).abs() <= 1e-12 * expect);
        assert!((total - 8.992235).abs() < 1e-6);
        let zero = compose_source(&vec![0.0; p2d.len()], &p1d);
        assert!(zero.iter().all(|&v| v == 0.0));
        let long = AxialGrid::uniform(100e-3, 66.6e-3, 3, 2).unwrap();
        let total2: f64 = compose_source(&p2d, &assemble_1d(&long).load).iter().sum();
        assert!((total2 - 2.0 * total).abs() <= 1e-12 * total);
    }

    #[test]
    fn zero_source_gives_ambient_everywhere() {
        let (mesh, mat) = winding_square();
        let grid = AxialGrid::generate(2, 1).unwrap();
        let mat = mat.with_source_scaled(0.0);
        let sys = build_system(&mesh, &grid, &mat, &SprayParameters::default()).unwrap();
        let opts = SolverOptions::default();
        let (u, _) = sys.solve(&opts).unwrap();
        assert!(u.iter().all(|&v| v == 293.0));
        // Through the raw system as well.
        let (u, rep) = solver::solve(&sys.operator, &sys.rhs(), &opts).unwrap();
        assert!(rep.relative_residual <= 1e-10);
        assert!(u.iter().all(|&v| (v - 293.0).abs() < 1e-6), "{:?}", &u[..4]);
    }

    #[test]
    fn system_dimension_and_kernel() {
        let (mesh, mat) = winding_square();
        let grid = AxialGrid::generate(3, 2).unwrap();
        let sys = build_system(&mesh, &grid, &mat, &SprayParameters::default()).unwrap();
        assert_eq!(sys.n_axial(), 11);
        assert_eq!(sys.dim(), mesh.n_nodes() * 11);
        let ones = vec![1.0; sys.dim()];
        let mut a1 = vec![0.0; sys.dim()];
        sys.operator.apply(&ones, &mut a1);
        let mut m1 = vec![0.0; sys.dim()];
        sys.boundary_operator.apply(&ones, &mut m1);
        let scale = m1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, m) in a1.iter().zip(&m1) {
            assert!((a - m).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn tensor_preconditioner_agrees_with_jacobi() {
        let (mesh, mat) = winding_square();
        let grid = AxialGrid::generate(3, 2).unwrap();
        let sys = build_system(&mesh, &grid, &mat, &SprayParameters::default()).unwrap();
        let jac = SolverOptions::default();
        let ten = SolverOptions {
            method: SolverMethod::CgTensor,
            ..jac
        };
        let (u1, r1) = sys.solve(&jac).unwrap();
        let (u2, r2) = sys.solve(&ten).unwrap();
        assert_eq!(r2.method, SolverMethod::CgTensor);
        assert!(
            r2.iterations < r1.iterations,
            "{} vs {}",
            r2.iterations,
            r1.iterations
        );
        for (a, b) in u1.iter().zip(&u2) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        // Exact for a separable operator: the whole grid cooled with uniform λ.
        let uniform = MaterialField::uniform(5.0, 1e5).unwrap();
        let cooled = AxialGrid::single_regime(0.05, 3, AxialRegime::Overhang).unwrap();
        let sys = build_system(&mesh, &cooled, &uniform, &SprayParameters::default()).unwrap();
        let (_, rep) = sys.solve(&ten).unwrap();
        assert!(rep.iterations <= 2, "{}", rep.iterations);
    }
}
