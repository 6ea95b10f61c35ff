//! Uniform grids on a truncated line, well-bottom bookkeeping and quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

/// Uniform mesh on `[x_min, x_max]`. The two end nodes carry homogeneous
/// Dirichlet data standing in for decay at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {n}")));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!("x_min = {x_min} must be below x_max = {x_max}")));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        let nodes = (0..n).map(|i| x_min + i as f64 * h).collect();
        Ok(Self { x_min, x_max, h, nodes })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the node closest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.h).round();
        i.clamp(0.0, (self.n() - 1) as f64) as usize
    }

    /// Trapezoid weights; these are also the lumped mass entries.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.n();
        let mut w = vec![self.h; n];
        w[0] = 0.5 * self.h;
        w[n - 1] = 0.5 * self.h;
        w
    }

    /// Trapezoid-rule integral of nodal values.
    pub fn integrate(&self, values: &Field) -> Result<f64> {
        if values.len() != self.n() {
            return Err(Error::LengthMismatch { expected: self.n(), got: values.len() });
        }
        let v = values.as_slice();
        let interior: f64 = v[1..v.len() - 1].iter().sum();
        Ok(self.h * (interior + 0.5 * (v[0] + v[v.len() - 1])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Strictly inside the well bottom Ω.
    Interior,
    /// An endpoint of one of the Ω intervals.
    Boundary,
    Exterior,
}

/// The well bottom Ω as a union of grid-aligned open intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    intervals: Vec<(f64, f64)>,
    /// Node index pairs `(left, right)` of each interval's endpoints.
    endpoints: Vec<(usize, usize)>,
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
}

impl DomainSpec {
    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn endpoints(&self) -> &[(usize, usize)] {
        &self.endpoints
    }

    pub fn interval_count(&self) -> usize {
        self.intervals.len()
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    /// Sorted indices of nodes strictly inside Ω.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn exterior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds.iter().enumerate().filter(|(_, k)| **k == NodeKind::Exterior).map(|(i, _)| i)
    }

    /// Interior node indices of interval `k`.
    pub fn interval_interior(&self, k: usize) -> std::ops::Range<usize> {
        let (l, r) = self.endpoints[k];
        l + 1..r
    }

    pub fn in_closure(&self, i: usize) -> bool {
        self.kinds[i] != NodeKind::Exterior
    }
}

/// Snap Ω onto the grid. Endpoints must be nodes (to `h·1e-12`) and each
/// interval needs an interior node.
pub fn align_domain(grid: &Grid, intervals: &[(f64, f64)]) -> Result<DomainSpec> {
    if intervals.is_empty() {
        return Err(Error::InvalidInterval("well bottom must contain at least one interval".into()));
    }
    let h = grid.h();
    let snap = |x: f64| -> Result<usize> {
        let i = grid.nearest(x);
        let node = grid.nodes()[i];
        if (node - x).abs() > h * 1e-12 {
            return Err(Error::EndpointNotOnGrid { value: x, nearest: node, h });
        }
        Ok(i)
    };
    let mut endpoints = Vec::with_capacity(intervals.len());
    for (k, &(l, r)) in intervals.iter().enumerate() {
        if !(l < r) {
            return Err(Error::InvalidInterval(format!("interval {k} = ({l}, {r}) is empty")));
        }
        if k > 0 && intervals[k - 1].1 >= l {
            return Err(Error::OverlappingIntervals(format!(
                "interval {} ends at {} but interval {k} starts at {l}",
                k - 1,
                intervals[k - 1].1
            )));
        }
        let (il, ir) = (snap(l)?, snap(r)?);
        if ir < il + 2 {
            return Err(Error::InvalidInterval(format!("interval {k} = ({l}, {r}) has no interior node")));
        }
        endpoints.push((il, ir));
    }
    let mut kinds = vec![NodeKind::Exterior; grid.n()];
    for &(il, ir) in &endpoints {
        kinds[il] = NodeKind::Boundary;
        kinds[ir] = NodeKind::Boundary;
        for kind in &mut kinds[il + 1..ir] {
            *kind = NodeKind::Interior;
        }
    }
    let pick = |want: NodeKind| kinds.iter().enumerate().filter(|(_, k)| **k == want).map(|(i, _)| i).collect();
    Ok(DomainSpec {
        intervals: intervals.to_vec(),
        interior: pick(NodeKind::Interior),
        boundary: pick(NodeKind::Boundary),
        endpoints,
        kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_spacing() {
        let g = Grid::new(-5.0, 5.0, 11).unwrap();
        assert_eq!(g.h(), 1.0);
        let expect: Vec<f64> = (-5..=5).map(f64::from).collect();
        assert_eq!(g.nodes(), expect.as_slice());

        let g = Grid::new(0.0, 1.0, 3).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0]);

        let g = Grid::new(-8.0, 8.0, 2001).unwrap();
        assert_eq!(g.n(), 2001);
        assert!((g.h() - 0.008).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(0.0, 1.0, 2).is_err());
        assert!(Grid::new(1.0, 1.0, 5).is_err());
        assert!(Grid::new(2.0, 1.0, 5).is_err());
    }

    #[test]
    fn double_well_alignment() {
        let g = Grid::new(-5.0, 5.0, 101).unwrap();
        let d = align_domain(&g, &[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(d.interior_nodes().len(), 18);
        assert_eq!(d.interval_interior(0).len(), 9);
        assert_eq!(d.interval_interior(1).len(), 9);
        assert_eq!(d.boundary_nodes(), &[50, 60, 70, 80]);
        assert_eq!(d.exterior_nodes().count(), 101 - 22);
    }

    #[test]
    fn tiny_grid_alignment() {
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        let d = align_domain(&g, &[(0.0, 1.0)]).unwrap();
        assert_eq!(d.interior_nodes(), &[1]);
        assert_eq!(d.boundary_nodes(), &[0, 2]);
        assert_eq!(d.exterior_nodes().count(), 0);
    }

    #[test]
    fn misaligned_endpoint_is_rejected() {
        let g = Grid::new(-5.0, 5.0, 101).unwrap();
        let err = align_domain(&g, &[(0.05, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::EndpointNotOnGrid { .. }));
    }

    #[test]
    fn overlapping_intervals_are_rejected() {
        let g = Grid::new(-5.0, 5.0, 101).unwrap();
        let err = align_domain(&g, &[(0.0, 1.0), (0.5, 2.0)]).unwrap_err();
        assert!(matches!(err, Error::OverlappingIntervals(_)));
        let err = align_domain(&g, &[(0.0, 1.0), (1.0, 2.0)]).unwrap_err();
        assert!(matches!(err, Error::OverlappingIntervals(_)));
    }

    #[test]
    fn quadrature_examples() {
        let g = Grid::new(0.0, 1.0, 101).unwrap();
        let one = Field::new(vec![1.0; 101]);
        assert!((g.integrate(&one).unwrap() - 1.0).abs() < 1e-12);
        let x = Field::new(g.nodes().to_vec());
        assert!((g.integrate(&x).unwrap() - 0.5).abs() < 1e-12);

        let g = Grid::new(0.0, 1.0, 201).unwrap();
        let s = Field::from_fn(g.nodes(), |x| (std::f64::consts::PI * x).sin());
        // antiderivative -cos(πx)/π between 0 and 1
        let exact = 2.0 / std::f64::consts::PI;
        assert!((g.integrate(&s).unwrap() - exact).abs() < 1e-4);

        assert!(matches!(g.integrate(&one), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn refinement_changes_integral_by_h_squared() {
        let f = |x: f64| (3.0 * x).exp() * (x * x + 1.0).cos();
        let coarse = Grid::new(0.0, 1.0, 51).unwrap();
        let fine = Grid::new(0.0, 1.0, 101).unwrap();
        let finer = Grid::new(0.0, 1.0, 201).unwrap();
        let i1 = coarse.integrate(&Field::from_fn(coarse.nodes(), f)).unwrap();
        let i2 = fine.integrate(&Field::from_fn(fine.nodes(), f)).unwrap();
        let i3 = finer.integrate(&Field::from_fn(finer.nodes(), f)).unwrap();
        let ratio = (i1 - i2) / (i2 - i3);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn integrate_is_linear_and_monotone(
            a in proptest::collection::vec(-10.0f64..10.0, 17),
            b in proptest::collection::vec(0.0f64..10.0, 17),
            s in -3.0f64..3.0,
        ) {
            let g = Grid::new(-1.0, 3.0, 17).unwrap();
            let fa = Field::new(a);
            let fb = Field::new(b);
            let combo = &fa + &(s * &fb);
            let lhs = g.integrate(&combo).unwrap();
            let rhs = g.integrate(&fa).unwrap() + s * g.integrate(&fb).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
            prop_assert!(g.integrate(&fb).unwrap() >= 0.0);
        }
    }
}
