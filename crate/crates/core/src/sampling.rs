//! Deterministic random test fields.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::field::Field;
use crate::mesh::Grid;

/// Sine series `Σ c_k sin(kπ(x−x_min)/L)` with `c_k ~ N(0,1)/k`; vanishes at
/// both truncation ends.
pub fn smooth_field<R: Rng + ?Sized>(grid: &Grid, rng: &mut R, modes: usize) -> Field {
    let len = grid.x_max() - grid.x_min();
    let coeffs: Vec<f64> = (1..=modes).map(|k| rng.sample::<f64, _>(StandardNormal) / k as f64).collect();
    let mut u = Field::from_fn(grid.nodes(), |x| {
        let t = std::f64::consts::PI * (x - grid.x_min()) / len;
        coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * t).sin()).sum()
    });
    let n = u.len();
    u[0] = 0.0;
    u[n - 1] = 0.0;
    u
}
