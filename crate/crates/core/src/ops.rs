//! Discrete differential and quadrature operators on a single time slice.
//!
//! Boundaries are homogeneous Neumann (no-flux). The Laplacian uses ghost-node
//! reflection, which coincides with the flux form on half-width boundary
//! control volumes; together with trapezoid weights this makes every
//! conservative operator telescope to zero total mass.

use crate::grid::{Grid, Line};

/// Per-component values of a vector field at the nodes.
pub type VectorField = Vec<Vec<f64>>;

/// Quadrature weight applied under the integral.
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    One,
    /// Euclidean norm `|x|`.
    AbsX,
    /// `|x|^2`.
    SquaredX,
    Nodes(&'a [f64]),
}

pub fn laplacian(field: &[f64], grid: &Grid) -> Vec<f64> {
    assert_eq!(field.len(), grid.n_nodes());
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let n = grid.nx();
    let mut out = vec![0.0; field.len()];
    for axis in 0..grid.dim() {
        for line in grid.lines(axis) {
            let at = |s: usize| field[line.node(s)];
            out[line.node(0)] += 2.0 * (at(1) - at(0)) * inv_dx2;
            for s in 1..n - 1 {
                out[line.node(s)] += (at(s - 1) - 2.0 * at(s) + at(s + 1)) * inv_dx2;
            }
            out[line.node(n - 1)] += 2.0 * (at(n - 2) - at(n - 1)) * inv_dx2;
        }
    }
    out
}

/// Central differences inside, second-order one-sided at the ends.
pub fn gradient(field: &[f64], grid: &Grid) -> VectorField {
    assert_eq!(field.len(), grid.n_nodes());
    (0..grid.dim())
        .map(|axis| {
            let mut comp = vec![0.0; field.len()];
            for line in grid.lines(axis) {
                derivative_along(field, &line, grid, &mut comp);
            }
            comp
        })
        .collect()
}

fn derivative_along(field: &[f64], line: &Line, grid: &Grid, out: &mut [f64]) {
    let n = grid.nx();
    let h2 = 2.0 * grid.dx();
    let at = |s: usize| field[line.node(s)];
    out[line.node(0)] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / h2;
    for s in 1..n - 1 {
        out[line.node(s)] = (at(s + 1) - at(s - 1)) / h2;
    }
    out[line.node(n - 1)] = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / h2;
}

/// Trapezoid rule with the requested weight.
pub fn integrate(field: &[f64], grid: &Grid, weight: Weight<'_>) -> f64 {
    assert_eq!(field.len(), grid.n_nodes());
    let w = grid.spatial_weights();
    let mut acc = 0.0;
    for (k, (&v, &q)) in field.iter().zip(&w).enumerate() {
        let factor = match weight {
            Weight::One => 1.0,
            Weight::AbsX => {
                let p = grid.point(k);
                (p[0] * p[0] + p[1] * p[1]).sqrt()
            }
            Weight::SquaredX => {
                let p = grid.point(k);
                p[0] * p[0] + p[1] * p[1]
            }
            Weight::Nodes(nodes) => nodes[k],
        };
        acc += q * factor * v;
    }
    acc
}

/// `z / (e^z - 1)`, the Bernoulli function behind exponential fitting.
#[inline]
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-10 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Drift values on cell faces: `[axis][line][face]`, face `f` joining
/// line positions `f` and `f + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDrift {
    faces: Vec<Vec<Vec<f64>>>,
}

impl FaceDrift {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, &[0.0, 0.0])
    }

    /// Spatially constant drift with components `b[axis]`.
    pub fn constant(grid: &Grid, b: &[f64]) -> Self {
        let faces = (0..grid.dim())
            .map(|axis| vec![vec![b[axis]; grid.nx() - 1]; grid.lines(axis).len()])
            .collect();
        Self { faces }
    }

    /// Face averages of a nodal vector field.
    pub fn from_nodal(field: &VectorField, grid: &Grid) -> Self {
        let faces = (0..grid.dim())
            .map(|axis| {
                grid.lines(axis)
                    .iter()
                    .map(|line| {
                        (0..grid.nx() - 1)
                            .map(|f| {
                                0.5 * (field[axis][line.node(f)] + field[axis][line.node(f + 1)])
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { faces }
    }

    /// `b = scale * ∇(log w)` by differencing `log w` across each face.
    pub fn from_log_gradient(w: &[f64], scale: f64, grid: &Grid) -> Self {
        let logs: Vec<f64> = w.iter().map(|v| v.ln()).collect();
        let inv_dx = 1.0 / grid.dx();
        let faces = (0..grid.dim())
            .map(|axis| {
                grid.lines(axis)
                    .iter()
                    .map(|line| {
                        (0..grid.nx() - 1)
                            .map(|f| scale * (logs[line.node(f + 1)] - logs[line.node(f)]) * inv_dx)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { faces }
    }

    pub fn axis(&self, axis: usize) -> &[Vec<f64>] {
        &self.faces[axis]
    }

    pub fn is_finite(&self) -> bool {
        self.faces.iter().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Exponentially fitted total flux `J = -∂μ + bμ` across each face of one line.
pub(crate) fn fitted_face_coefficients(drift: &[f64], dx: f64) -> Vec<(f64, f64)> {
    // J_f = (B(-z) μ_f - B(z) μ_{f+1}) / dx with z = b dx
    drift
        .iter()
        .map(|&b| {
            let z = b * dx;
            (bernoulli(-z) / dx, bernoulli(z) / dx)
        })
        .collect()
}

/// Conservative discretisation of `div(bμ)` using Chang–Cooper/Scharfetter–Gummel
/// fitted face fluxes with the diffusive part removed. Boundary faces carry
/// zero flux, so the trapezoid-weighted sum of the output is zero.
pub fn flux_divergence(drift: &FaceDrift, density: &[f64], grid: &Grid) -> Vec<f64> {
    assert_eq!(density.len(), grid.n_nodes());
    let dx = grid.dx();
    let vol = grid.axis_volumes();
    let n = grid.nx();
    let mut out = vec![0.0; density.len()];
    for axis in 0..grid.dim() {
        for (line, b) in grid.lines(axis).iter().zip(drift.axis(axis)) {
            let coeffs = fitted_face_coefficients(b, dx);
            let mut flux = vec![0.0; n - 1];
            for (f, &(left, right)) in coeffs.iter().enumerate() {
                let mu_l = density[line.node(f)];
                let mu_r = density[line.node(f + 1)];
                let diffusive = (mu_l - mu_r) / dx;
                flux[f] = left * mu_l - right * mu_r - diffusive;
            }
            for s in 0..n {
                let out_flux = if s + 1 < n { flux[s] } else { 0.0 };
                let in_flux = if s > 0 { flux[s - 1] } else { 0.0 };
                out[line.node(s)] += (out_flux - in_flux) / vol[s];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(nx: usize, l: f64) -> Grid {
        Grid::new(1, l, nx, 1, 1.0).unwrap()
    }

    #[test]
    fn laplacian_of_quadratic_is_two_inside() {
        let g = grid1(21, 2.0);
        let f: Vec<f64> = g.coords().iter().map(|x| x * x).collect();
        let lap = laplacian(&f, &g);
        for v in &lap[1..20] {
            assert!((v - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let g = Grid::new(2, 1.0, 9, 1, 1.0).unwrap();
        let f = vec![3.5; g.n_nodes()];
        assert!(laplacian(&f, &g).iter().all(|v| v.abs() < 1e-12));
        assert!(gradient(&f, &g).iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = grid1(11, 1.0);
        let f: Vec<f64> = g.coords().iter().map(|x| 3.0 * x - 1.0).collect();
        for v in &gradient(&f, &g)[0] {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_drift_gives_zero_divergence() {
        let g = grid1(11, 1.0);
        let mu: Vec<f64> = g.coords().iter().map(|x| (-x * x).exp()).collect();
        let d = flux_divergence(&FaceDrift::zeros(&g), &mu, &g);
        assert!(d.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn bernoulli_is_smooth_through_zero() {
        assert!((bernoulli(1e-11) - bernoulli(-1e-11)).abs() < 1e-10);
        assert!((bernoulli(1e-3) - 1e-3 / 1e-3f64.exp_m1()).abs() < 1e-15);
        // B(-z) = B(z) + z
        for z in [-3.0, -0.2, 0.7, 5.0] {
            assert!((bernoulli(-z) - bernoulli(z) - z).abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_weights() {
        let g = grid1(5, 1.0);
        let ones = vec![1.0; 5];
        assert!((integrate(&ones, &g, Weight::One) - 2.0).abs() < 1e-14);
        let custom = vec![2.0; 5];
        assert!((integrate(&ones, &g, Weight::Nodes(&custom)) - 4.0).abs() < 1e-14);
    }
}
