//! Simplicial meshes of the unit interval and the unit square.
//!
//! Nodes are stored in a flat coordinate array with stride `dim`; cells are
//! stored flat with stride `dim + 1` and are counterclockwise in 2D.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A boundary facet: a single endpoint in 1D, an edge in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: Vec<usize>,
    /// Outward unit normal.
    pub normal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    boundary_facets: Vec<BoundaryFacet>,
}

impl Mesh {
    /// Uniform partition of [0, 1] into `n_elems` intervals.
    pub fn interval(n_elems: usize) -> Result<Self> {
        if n_elems == 0 {
            return Err(Error::InvalidArgument(
                "interval mesh needs at least one element".into(),
            ));
        }
        let h = 1.0 / n_elems as f64;
        let coords = (0..=n_elems)
            .map(|i| if i == n_elems { 1.0 } else { i as f64 * h })
            .collect();
        let cells = (0..n_elems).flat_map(|e| [e, e + 1]).collect();
        let boundary_facets = vec![
            BoundaryFacet {
                nodes: vec![0],
                normal: vec![-1.0],
            },
            BoundaryFacet {
                nodes: vec![n_elems],
                normal: vec![1.0],
            },
        ];
        Ok(Mesh {
            dim: 1,
            coords,
            cells,
            boundary_facets,
        })
    }

    /// Structured triangulation of (0,1)² with `nx × ny` squares, each cut
    /// along its lower-left to upper-right diagonal.
    ///
    /// Node `(i, j)` (column `i`, row `j`) has index `j * (nx + 1) + i`.
    pub fn unit_square(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "unit square mesh needs positive subdivisions, got {nx}x{ny}"
            )));
        }
        let stride = nx + 1;
        let coord = |k: usize, n: usize| if k == n { 1.0 } else { k as f64 / n as f64 };
        let mut coords = Vec::with_capacity(2 * stride * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push(coord(i, nx));
                coords.push(coord(j, ny));
            }
        }
        let id = |i: usize, j: usize| j * stride + i;
        let mut cells = Vec::with_capacity(6 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (ll, lr, ul, ur) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                cells.extend_from_slice(&[ll, lr, ur]);
                cells.extend_from_slice(&[ll, ur, ul]);
            }
        }
        let mut boundary_facets = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary_facets.push(BoundaryFacet {
                nodes: vec![id(i, 0), id(i + 1, 0)],
                normal: vec![0.0, -1.0],
            });
        }
        for j in 0..ny {
            boundary_facets.push(BoundaryFacet {
                nodes: vec![id(nx, j), id(nx, j + 1)],
                normal: vec![1.0, 0.0],
            });
        }
        for i in (0..nx).rev() {
            boundary_facets.push(BoundaryFacet {
                nodes: vec![id(i + 1, ny), id(i, ny)],
                normal: vec![0.0, 1.0],
            });
        }
        for j in (0..ny).rev() {
            boundary_facets.push(BoundaryFacet {
                nodes: vec![id(0, j + 1), id(0, j)],
                normal: vec![-1.0, 0.0],
            });
        }
        Ok(Mesh {
            dim: 2,
            coords,
            cells,
            boundary_facets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks_exact(self.dim + 1)
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    /// Signed measure of a cell: length in 1D, signed area in 2D.
    pub fn cell_measure(&self, c: usize) -> f64 {
        let v = self.cell(c);
        match self.dim {
            1 => self.node(v[1])[0] - self.node(v[0])[0],
            _ => {
                let (a, b, p) = (self.node(v[0]), self.node(v[1]), self.node(v[2]));
                0.5 * ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }

    /// Measure of a boundary facet; 1D endpoints count as 1.
    pub fn facet_measure(&self, facet: &BoundaryFacet) -> f64 {
        match self.dim {
            1 => 1.0,
            _ => {
                let (a, b) = (self.node(facet.nodes[0]), self.node(facet.nodes[1]));
                (b[0] - a[0]).hypot(b[1] - a[1])
            }
        }
    }

    /// Plain-text dump: one node per line, then one cell per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for x in self.nodes() {
            let line: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        for cell in self.cells() {
            let line: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}
