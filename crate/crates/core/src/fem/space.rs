//! P1 Lagrange space on a [`Mesh`] with precomputed quadrature data.

use crate::error::{Error, Result};
use crate::field::{BoundaryField, Nonlinearity, ScalarField};
use crate::fem::quadrature::QuadratureRule;
use crate::fem::sparse::CsrMatrix;
use crate::mesh::Mesh;

#[derive(Debug, Clone)]
struct QuadPoint {
    x: [f64; 2],
    weight: f64,
    /// Values of the local basis functions at the point.
    shape: [f64; 3],
}

#[derive(Debug, Clone)]
struct CellData {
    nodes: [usize; 3],
    /// Constant gradients of the local basis functions.
    grads: [[f64; 2]; 3],
    points: Vec<QuadPoint>,
}

#[derive(Debug, Clone)]
struct FacetData {
    nodes: [usize; 2],
    normal: [f64; 2],
    points: Vec<QuadPoint>,
}

/// Continuous piecewise-linear space with the assembly routines the time
/// stepper needs. Holds the mass matrix and the coefficient-free stiffness
/// matrix, which never change for a given mesh.
#[derive(Debug, Clone)]
pub struct P1Space<'m> {
    mesh: &'m Mesh,
    cells: Vec<CellData>,
    facets: Vec<FacetData>,
    pattern: CsrMatrix,
    mass: CsrMatrix,
    laplace: CsrMatrix,
}

impl<'m> P1Space<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let dim = mesh.dim();
        let nloc = dim + 1;
        let cell_rule = match dim {
            1 => QuadratureRule::gauss2_interval(),
            _ => QuadratureRule::edge_midpoints_triangle(),
        };
        let edge_rule = QuadratureRule::gauss2_interval();

        let cells = mesh
            .cells()
            .enumerate()
            .map(|(c, cell)| {
                let mut nodes = [0; 3];
                nodes[..nloc].copy_from_slice(cell);
                let measure = mesh.cell_measure(c);
                let mut grads = [[0.0; 2]; 3];
                let verts: Vec<&[f64]> = cell.iter().map(|&v| mesh.node(v)).collect();
                if dim == 1 {
                    grads[0][0] = -1.0 / measure;
                    grads[1][0] = 1.0 / measure;
                } else {
                    let two_area = 2.0 * measure;
                    for k in 0..3 {
                        let (b, c) = (verts[(k + 1) % 3], verts[(k + 2) % 3]);
                        grads[k] = [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area];
                    }
                }
                let scale = measure / cell_rule.reference_measure();
                let points = cell_rule
                    .points
                    .iter()
                    .zip(&cell_rule.weights)
                    .map(|(p, &w)| {
                        let mut shape = [0.0; 3];
                        if dim == 1 {
                            shape[0] = 1.0 - p[0];
                            shape[1] = p[0];
                        } else {
                            shape = [1.0 - p[0] - p[1], p[0], p[1]];
                        }
                        let mut x = [0.0; 2];
                        for (k, v) in verts.iter().enumerate() {
                            for d in 0..dim {
                                x[d] += shape[k] * v[d];
                            }
                        }
                        QuadPoint {
                            x,
                            weight: w * scale,
                            shape,
                        }
                    })
                    .collect();
                CellData {
                    nodes,
                    grads,
                    points,
                }
            })
            .collect();

        let facets = mesh
            .boundary_facets()
            .iter()
            .map(|facet| {
                let mut normal = [0.0; 2];
                normal[..dim].copy_from_slice(&facet.normal);
                if dim == 1 {
                    let v = facet.nodes[0];
                    let mut x = [0.0; 2];
                    x[0] = mesh.node(v)[0];
                    FacetData {
                        nodes: [v, v],
                        normal,
                        points: vec![QuadPoint {
                            x,
                            weight: 1.0,
                            shape: [1.0, 0.0, 0.0],
                        }],
                    }
                } else {
                    let (a, b) = (mesh.node(facet.nodes[0]), mesh.node(facet.nodes[1]));
                    let length = mesh.facet_measure(facet);
                    let points = edge_rule
                        .points
                        .iter()
                        .zip(&edge_rule.weights)
                        .map(|(p, &w)| {
                            let s = p[0];
                            QuadPoint {
                                x: [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
                                weight: w * length,
                                shape: [1.0 - s, s, 0.0],
                            }
                        })
                        .collect();
                    FacetData {
                        nodes: [facet.nodes[0], facet.nodes[1]],
                        normal,
                        points,
                    }
                }
            })
            .collect();

        let pattern = CsrMatrix::p1_pattern(mesh);
        let mut space = P1Space {
            mesh,
            cells,
            facets,
            mass: pattern.clone(),
            laplace: pattern.clone(),
            pattern,
        };
        space.mass = space.assemble_mass();
        space.laplace = space.assemble_stiffness_with(|_| 1.0);
        space
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.node_count()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Stiffness matrix with unit coefficient.
    pub fn laplace(&self) -> &CsrMatrix {
        &self.laplace
    }

    fn nloc(&self) -> usize {
        self.dim() + 1
    }

    fn assemble_mass(&self) -> CsrMatrix {
        let nloc = self.nloc();
        let mut m = self.pattern.clone();
        for cell in &self.cells {
            for q in &cell.points {
                for a in 0..nloc {
                    for b in 0..nloc {
                        m.add_to(cell.nodes[a], cell.nodes[b], q.weight * (q.shape[a] * q.shape[b]));
                    }
                }
            }
        }
        m
    }

    fn assemble_stiffness_with(&self, coeff: impl Fn(&[f64]) -> f64) -> CsrMatrix {
        let (dim, nloc) = (self.dim(), self.nloc());
        let mut k = self.pattern.clone();
        for cell in &self.cells {
            let integral: f64 = cell.points.iter().map(|q| q.weight * coeff(&q.x[..dim])).sum();
            for a in 0..nloc {
                for b in 0..nloc {
                    let g: f64 = (0..dim).map(|d| cell.grads[a][d] * cell.grads[b][d]).sum();
                    k.add_to(cell.nodes[a], cell.nodes[b], integral * g);
                }
            }
        }
        k
    }

    /// `∫ coeff(t,·) ∇φ_j·∇φ_k dx`. Fails if the coefficient is not strictly
    /// positive at some quadrature point.
    pub fn weighted_stiffness(&self, coeff: &ScalarField, t: f64, name: &str) -> Result<CsrMatrix> {
        let dim = self.dim();
        for cell in &self.cells {
            for q in &cell.points {
                let x = &q.x[..dim];
                let value = coeff.eval(t, x);
                if !(value > 0.0) || !value.is_finite() {
                    return Err(Error::CoefficientBound {
                        name: name.to_string(),
                        value,
                        t,
                        x: x.to_vec(),
                    });
                }
            }
        }
        Ok(self.assemble_stiffness_with(|x| coeff.eval(t, x)))
    }

    /// `b_j = ∫ ρ(x, u_h(x)) φ_j dx` where `u_h` is the P1 function with
    /// coefficients `u` (zero when `u` is `None`).
    pub fn load_with(&self, u: Option<&[f64]>, density: impl Fn(&[f64], f64) -> f64) -> Vec<f64> {
        let (dim, nloc) = (self.dim(), self.nloc());
        let mut b = vec![0.0; self.n_dofs()];
        for cell in &self.cells {
            for q in &cell.points {
                let uh = u.map_or(0.0, |u| (0..nloc).map(|a| q.shape[a] * u[cell.nodes[a]]).sum());
                let value = q.weight * density(&q.x[..dim], uh);
                for a in 0..nloc {
                    b[cell.nodes[a]] += value * q.shape[a];
                }
            }
        }
        b
    }

    pub fn load(&self, density: &ScalarField, t: f64) -> Vec<f64> {
        self.load_with(None, |x, _| density.eval(t, x))
    }

    /// `b_j = ∫ F(u_h) φ_j dx`, with `F` applied at quadrature points.
    pub fn nonlinear_load(&self, f: &Nonlinearity, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        Ok(self.load_with(Some(u), |_, uh| f.eval(uh)))
    }

    /// `b_j = ∫_∂Ω ρ(x, ν) φ_j dΓ`; counting measure on the endpoints in 1D.
    pub fn boundary_load_with(&self, density: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
        let dim = self.dim();
        let nloc = dim; // nodes per facet
        let mut b = vec![0.0; self.n_dofs()];
        for facet in &self.facets {
            for q in &facet.points {
                let value = q.weight * density(&q.x[..dim], &facet.normal[..dim]);
                for a in 0..nloc {
                    b[facet.nodes[a]] += value * q.shape[a];
                }
            }
        }
        b
    }

    pub fn boundary_load(&self, density: &BoundaryField, t: f64) -> Vec<f64> {
        self.boundary_load_with(|x, n| density.eval(t, x, n))
    }

    pub fn interpolate(&self, field: &ScalarField, t: f64) -> Vec<f64> {
        self.mesh.nodes().map(|x| field.eval(t, x)).collect()
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    /// `√(vᵀ M v)`.
    pub fn l2_norm(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        Ok(self.mass.bilinear(v, v).max(0.0).sqrt())
    }

    /// `√(vᵀ K v)` with the unit-coefficient stiffness matrix.
    pub fn h1_seminorm(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        Ok(self.laplace.bilinear(v, v).max(0.0).sqrt())
    }

    /// `∫_Ω v_h dx = 𝟙ᵀ M v`.
    pub fn integral(&self, v: &[f64]) -> f64 {
        self.mass.mul_vec(v).iter().sum()
    }
}
