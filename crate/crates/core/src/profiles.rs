//! Well potentials `a` built from the well bottom, and the reference problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::{align_domain, DomainSpec, Grid, NodeKind};
use crate::model::{Nonlinearity, ProblemSpec};

/// Shape of the well potential outside Ω̄.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WellProfile {
    /// `height` outside a ramp of width `ramp_width` around Ω̄, linear in between.
    BoxComplement { height: f64, ramp_width: f64 },
    /// `coefficient · dist(x, Ω)²`.
    QuadraticExterior { coefficient: f64 },
    /// Nodal values given directly.
    Tabulated { values: Vec<f64> },
}

impl WellProfile {
    pub fn sample(&self, grid: &Grid, domain: &DomainSpec) -> Result<Field> {
        let dist = |x: f64| {
            domain
                .intervals()
                .iter()
                .map(|&(l, r)| {
                    if x < l {
                        l - x
                    } else if x > r {
                        x - r
                    } else {
                        0.0
                    }
                })
                .fold(f64::INFINITY, f64::min)
        };
        let mut a = match self {
            WellProfile::BoxComplement { height, ramp_width } => {
                if !(*height > 0.0) || !(*ramp_width > 0.0) {
                    return Err(Error::InvalidInterval(format!(
                        "box profile needs positive height and ramp width, got {height}, {ramp_width}"
                    )));
                }
                Field::from_fn(grid.nodes(), |x| height * (dist(x) / ramp_width).min(1.0))
            }
            WellProfile::QuadraticExterior { coefficient } => {
                if !(*coefficient > 0.0) {
                    return Err(Error::InvalidInterval(format!(
                        "quadratic profile needs a positive coefficient, got {coefficient}"
                    )));
                }
                Field::from_fn(grid.nodes(), |x| coefficient * dist(x).powi(2))
            }
            WellProfile::Tabulated { values } => {
                if values.len() != grid.n() {
                    return Err(Error::LengthMismatch { expected: grid.n(), got: values.len() });
                }
                return Ok(Field::new(values.clone()));
            }
        };
        // the closed well bottom is exactly zero regardless of rounding in `dist`
        for (i, kind) in domain.kinds().iter().enumerate() {
            if *kind != NodeKind::Exterior {
                a[i] = 0.0;
            }
        }
        Ok(a)
    }
}

/// Parameters of `−u'' + (1 + λa)u = |u|^{p−2}u` on a union of wells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleWell {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub intervals: Vec<(f64, f64)>,
    pub p: f64,
    pub ramp_width: f64,
}

impl Default for DoubleWell {
    fn default() -> Self {
        Self { x_min: -5.0, x_max: 8.0, n: 2601, intervals: vec![(0.0, 1.0), (2.0, 3.0)], p: 3.0, ramp_width: 0.005 }
    }
}

impl DoubleWell {
    pub fn build(&self) -> Result<ProblemSpec> {
        let grid = Grid::new(self.x_min, self.x_max, self.n)?;
        let domain = align_domain(&grid, &self.intervals)?;
        let a = WellProfile::BoxComplement { height: 1.0, ramp_width: self.ramp_width }.sample(&grid, &domain)?;
        let n = grid.n();
        ProblemSpec::new(grid, domain, Field::new(vec![1.0; n]), a, Nonlinearity::single(self.p, Field::new(vec![1.0; n])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_profile_is_a_step_at_one_cell() {
        let spec = DoubleWell::default().build().unwrap();
        let grid = spec.grid();
        let a = spec.a();
        assert_eq!(a[grid.nearest(0.5)], 0.0);
        assert_eq!(a[grid.nearest(1.0)], 0.0);
        assert!((a[grid.nearest(1.005)] - 1.0).abs() < 1e-9);
        assert_eq!(a[grid.nearest(-3.0)], 1.0);
        assert_eq!(spec.b(), 0.0);
    }

    #[test]
    fn quadratic_profile() {
        let grid = Grid::new(-2.0, 3.0, 51).unwrap();
        let domain = align_domain(&grid, &[(0.0, 1.0)]).unwrap();
        let a = WellProfile::QuadraticExterior { coefficient: 2.0 }.sample(&grid, &domain).unwrap();
        assert!((a[0] - 8.0).abs() < 1e-12);
        assert!((a[50] - 8.0).abs() < 1e-12);
        assert_eq!(a[25], 0.0);
    }

    #[test]
    fn tabulated_length_checked() {
        let grid = Grid::new(-2.0, 3.0, 51).unwrap();
        let domain = align_domain(&grid, &[(0.0, 1.0)]).unwrap();
        let err = WellProfile::Tabulated { values: vec![1.0; 5] }.sample(&grid, &domain).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 51, got: 5 }));
    }
}
