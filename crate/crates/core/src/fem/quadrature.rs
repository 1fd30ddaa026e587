/// Quadrature on a reference element: the unit interval [0, 1] or the
/// triangle with vertices (0,0), (1,0), (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    /// Sum to the reference measure (1 on the interval, 1/2 on the triangle).
    pub weights: Vec<f64>,
    /// Highest polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    /// Two-point Gauss–Legendre on [0, 1]; exact to degree 3.
    pub fn gauss2_interval() -> Self {
        let d = 0.5 / 3f64.sqrt();
        QuadratureRule {
            points: vec![vec![0.5 - d], vec![0.5 + d]],
            weights: vec![0.5, 0.5],
            degree: 3,
        }
    }

    /// Edge-midpoint rule on the reference triangle; exact to degree 2.
    pub fn edge_midpoints_triangle() -> Self {
        QuadratureRule {
            points: vec![vec![0.5, 0.0], vec![0.5, 0.5], vec![0.0, 0.5]],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        }
    }

    pub fn reference_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}
