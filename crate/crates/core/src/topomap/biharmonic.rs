use super::Lu;
use crate::error::{arg_err, Error, Result};

/// Diagonal regularisation added to the Green's-function matrix before
/// factoring. Solutions are refined against the unregularised system.
pub const BIHARMONIC_RIDGE: f64 = 1e-8;

const REFINE_STEPS: usize = 3;

/// Biharmonic Green's function in two dimensions.
pub fn green(r: f64) -> f64 {
    if r > 0.0 {
        r * r * (r.ln() - 1.0)
    } else {
        0.0
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Fitted spline `v(q) = Σ w_j g(|q - p_j|) + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiharmonicModel {
    pub centers: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl BiharmonicModel {
    pub fn eval(&self, q: [f64; 2]) -> f64 {
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(&p, w)| w * green(dist(q, p)))
            .sum::<f64>()
            + self.offset
    }
}

/// Bordered interpolation matrix `[[G + ridge·I, 1], [1ᵀ, 0]]`, row-major.
pub(crate) fn system_matrix(points: &[[f64; 2]], ridge: f64) -> Vec<f64> {
    let n = points.len();
    let m = n + 1;
    let mut a = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            a[i * m + j] = green(dist(points[i], points[j]));
        }
        a[i * m + i] += ridge;
        a[i * m + n] = 1.0;
        a[n * m + i] = 1.0;
    }
    a
}

/// Factored regularised system plus the exact matrix used for refinement.
pub(crate) struct Factored {
    lu: Lu,
    exact: Vec<f64>,
}

impl Factored {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.lu.solve_refined(&self.exact, rhs, REFINE_STEPS)
    }
}

pub(crate) fn factor_points(points: &[[f64; 2]]) -> Result<Factored> {
    if points.len() < 2 {
        return arg_err(format!(
            "biharmonic fit needs at least 2 points, got {}",
            points.len()
        ));
    }
    for (i, p) in points.iter().enumerate() {
        if let Some(j) = points[..i].iter().position(|q| dist(*p, *q) == 0.0) {
            return arg_err(format!("points {j} and {i} coincide"));
        }
    }
    let n = points.len() + 1;
    let lu = Lu::factor(system_matrix(points, BIHARMONIC_RIDGE), n).map_err(|e| match e {
        Error::Numeric(msg) => Error::Numeric(format!("biharmonic system: {msg}")),
        other => other,
    })?;
    Ok(Factored {
        lu,
        exact: system_matrix(points, 0.0),
    })
}

/// Fit the spline through `values` at `points`. The weights sum to zero,
/// which makes the constant offset well defined.
pub fn biharmonic_fit(points: &[[f64; 2]], values: &[f64]) -> Result<BiharmonicModel> {
    if points.len() != values.len() {
        return arg_err(format!(
            "{} points but {} values",
            points.len(),
            values.len()
        ));
    }
    let lu = factor_points(points)?;
    let mut rhs = values.to_vec();
    rhs.push(0.0);
    let mut sol = lu.solve(&rhs);
    let offset = sol.pop().expect("n + 1 unknowns");
    Ok(BiharmonicModel {
        centers: points.to_vec(),
        weights: sol,
        offset,
    })
}

/// Evaluate on the `grid × grid` lattice over `[-1, 1]²`, row 0 at the front
/// (`y = 1`). Points outside the unit disk are set to zero.
pub fn biharmonic_eval(model: &BiharmonicModel, grid: usize) -> Vec<f64> {
    let coords = super::grid_coords(grid);
    let mut out = Vec::with_capacity(grid * grid);
    for &y in coords.iter().rev() {
        for &x in &coords {
            out.push(if x.hypot(y) > 1.0 {
                0.0
            } else {
                model.eval([x, y])
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_values() {
        assert_eq!(green(0.0), 0.0);
        assert_eq!(green(1.0), -1.0);
        assert!((green(std::f64::consts::E)).abs() < 1e-12);
    }

    #[test]
    fn two_point_midpoint_is_the_average() {
        let pts = [[-0.4, 0.1], [0.4, -0.1]];
        let m = biharmonic_fit(&pts, &[2.0, 5.0]).unwrap();
        assert!((m.eval(pts[0]) - 2.0).abs() < 1e-6);
        assert!((m.eval(pts[1]) - 5.0).abs() < 1e-6);
        assert!((m.eval([0.0, 0.0]) - 3.5).abs() < 1e-6);
    }

    #[test]
    fn constant_data_gives_constant_surface() {
        let pts = [[0.1, 0.2], [-0.5, 0.3], [0.7, -0.6], [0.0, -0.1]];
        let m = biharmonic_fit(&pts, &[4.0; 4]).unwrap();
        for q in [[0.0, 0.0], [0.9, 0.1], [-0.3, -0.8]] {
            assert!((m.eval(q) - 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(biharmonic_fit(&[[0.0, 0.0]], &[1.0]).is_err());
        assert!(biharmonic_fit(&[[0.2, 0.0], [0.2, 0.0]], &[1.0, 2.0]).is_err());
    }
}
