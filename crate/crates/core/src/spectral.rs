//! Hessian spectra of limit solutions: Morse index, nondegeneracy margin,
//! fixed-point index sign, and the exterior Neumann bottom.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::limit::limit_hessian;
use crate::model::Model;
use crate::tridiag::SymTridiag;

/// Below this margin a limit solution counts as degenerate.
pub const NONDEG_THRESHOLD: f64 = 1e-6;

/// Dense eigensolves up to this many limit-space unknowns.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    Sturm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub morse_index: usize,
    /// Smallest `|μ|` of the pencil `B v = μ G_ΩΩ v`.
    pub nondeg_margin: f64,
    /// `(−1)^morse_index`.
    pub index_sign: i8,
    /// Sign of `det(I − Dk_∞(u))`, from a pivoted factorization of `B`.
    pub det_sign: i8,
    pub eigenvalues_head: Vec<f64>,
    pub method: EigenMethod,
}

impl SpectralReport {
    pub fn is_nondegenerate(&self) -> bool {
        self.nondeg_margin > NONDEG_THRESHOLD
    }

    /// Index sign and determinant sign agree.
    pub fn poincare_hopf_consistent(&self) -> bool {
        self.index_sign == self.det_sign
    }
}

/// All eigenvalues of `A v = μ M v` (ascending), `M` SPD, via
/// `L⁻¹ A L⁻ᵀ` with `M = LLᵀ`.
pub fn pencil_eigenvalues_dense(a: &SymTridiag, m: &SymTridiag) -> Result<Vec<f64>> {
    if a.dim() != m.dim() {
        return Err(Error::Linalg(crate::error::LinalgError::Dimension(a.dim(), m.dim())));
    }
    let chol = Cholesky::new(m.to_dense()).ok_or_else(|| Error::EigenBreakdown("metric is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(a.dim(), a.dim()))
        .ok_or_else(|| Error::EigenBreakdown("singular Cholesky factor".into()))?;
    let c = &linv * a.to_dense() * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let eig =
        SymmetricEigen::try_new(c, 1e-14, 0).ok_or_else(|| Error::EigenBreakdown("symmetric QR did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenBreakdown("non-finite eigenvalue".into()));
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Sign of `det(I − Dk_∞(u))`, which equals the sign of `det B` since
/// `det G_ΩΩ > 0`.
pub fn det_sign(model: &Model, u: &Field) -> Result<i8> {
    let lu = limit_hessian(model, u).lu()?;
    Ok(lu.det_sign() as i8)
}

pub fn hessian_spectrum(model: &Model, u: &Field) -> Result<SpectralReport> {
    let b = limit_hessian(model, u);
    let g = model.forms().g_omega();
    let n = b.dim();
    let (morse_index, nondeg_margin, head, method) = if n <= DENSE_LIMIT {
        let values = pencil_eigenvalues_dense(&b, g)?;
        let morse = values.iter().filter(|v| **v < 0.0).count();
        let margin = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        (morse, margin, values.into_iter().take(10).collect(), EigenMethod::Dense)
    } else {
        let morse = b.pencil_count_below(g, 0.0);
        let head: Vec<f64> = (0..n.min(10)).map(|k| b.pencil_eigenvalue(g, k)).collect();
        let mut margin = f64::INFINITY;
        if morse > 0 {
            margin = margin.min(b.pencil_eigenvalue(g, morse - 1).abs());
        }
        if morse < n {
            margin = margin.min(b.pencil_eigenvalue(g, morse).abs());
        }
        (morse, margin, head, EigenMethod::Sturm)
    };
    let index_sign = if morse_index % 2 == 0 { 1 } else { -1 };
    let det_sign = match b.lu() {
        Ok(lu) => lu.det_sign() as i8,
        Err(_) => 0,
    };
    Ok(SpectralReport { morse_index, nondeg_margin, index_sign, det_sign, eigenvalues_head: head, method })
}

/// Lowest `count` eigenvalues of `−u'' + a₀u` on Ω with Dirichlet data,
/// against the lumped mass.
pub fn dirichlet_eigenvalues(model: &Model, count: usize) -> Vec<f64> {
    // at u = 0 the Hessian is exactly stiffness plus a₀-mass
    let op = limit_hessian(model, &Field::zeros(model.n()));
    let mass: Vec<f64> = model.forms().omega().iter().map(|&i| model.forms().mass()[i]).collect();
    let m = SymTridiag::from_diag(mass);
    (0..count.min(op.dim())).map(|k| op.pencil_eigenvalue(&m, k)).collect()
}

/// Smallest eigenvalue of the Neumann problem for `−d² + a₀ + λa` on the
/// exterior pieces `{x ≤ −R}` and `{x ≥ R}` of the truncated line.
pub fn neumann_bottom(model: &Model, lambda: f64, r: f64) -> Result<f64> {
    if !(lambda >= 1.0) {
        return Err(Error::LambdaBelowOne(lambda));
    }
    let grid = model.grid();
    let x = grid.nodes();
    let h = grid.h();
    let spec = model.spec();
    let left: Vec<usize> = (0..grid.n()).filter(|&i| x[i] <= -r).collect();
    let right: Vec<usize> = (0..grid.n()).filter(|&i| x[i] >= r).collect();
    let mut best = f64::INFINITY;
    for piece in [left, right] {
        if piece.len() < 10 {
            return Err(Error::TooFewExteriorNodes { r, count: piece.len() });
        }
        let m = piece.len();
        let mut diag = vec![2.0 / h; m];
        diag[0] = 1.0 / h;
        diag[m - 1] = 1.0 / h;
        let mut mass = vec![h; m];
        mass[0] = 0.5 * h;
        mass[m - 1] = 0.5 * h;
        for (k, &i) in piece.iter().enumerate() {
            diag[k] += mass[k] * (spec.a0()[i] + lambda * spec.a()[i]);
        }
        let op = SymTridiag::new(diag, vec![-1.0 / h; m - 1]);
        best = best.min(op.pencil_eigenvalue(&SymTridiag::from_diag(mass), 0));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::{nodal_seed, solve_limit, LimitOptions, NodalSignature};
    use crate::profiles::DoubleWell;

    fn reference(n: usize) -> Model {
        Model::new(DoubleWell { n, ..DoubleWell::default() }.build().unwrap()).unwrap()
    }

    fn solve(m: &Model, sig: &str) -> Field {
        let seed = nodal_seed(m, &NodalSignature::parse(sig).unwrap(), 2.0).unwrap();
        solve_limit(m, &seed, &LimitOptions::default()).unwrap().u
    }

    #[test]
    fn dense_pencil_matches_sturm() {
        let m = reference(651);
        let u = solve(&m, "1,0");
        let b = limit_hessian(&m, &u);
        let g = m.forms().g_omega();
        let dense = pencil_eigenvalues_dense(&b, g).unwrap();
        for k in [0, 1, 2, 5, dense.len() - 1] {
            let s = b.pencil_eigenvalue(g, k);
            assert!((dense[k] - s).abs() < 1e-9 * (1.0 + s.abs()), "{k}: {} vs {s}", dense[k]);
        }
        let morse = dense.iter().filter(|v| **v < 0.0).count();
        assert_eq!(morse, b.pencil_count_below(g, 0.0));
    }

    #[test]
    fn pencil_eigenvalues_are_real() {
        let m = Model::new(DoubleWell { x_min: -1.0, x_max: 4.0, n: 101, ..DoubleWell::default() }.build().unwrap()).unwrap();
        let u = solve(&m, "1,1");
        let b = limit_hessian(&m, &u).to_dense();
        let g = m.forms().g_omega().to_dense();
        let ginv_b = g.try_inverse().unwrap() * b;
        for z in ginv_b.complex_eigenvalues().iter() {
            assert!(z.im.abs() <= 1e-12);
        }
    }

    #[test]
    fn morse_index_of_nodal_family() {
        let m = reference(651);
        for (sig, expect) in [("0,0", 2), ("1,0", 3), ("0,1", 3), ("1,1", 4)] {
            let u = solve(&m, sig);
            let r = hessian_spectrum(&m, &u).unwrap();
            assert_eq!(r.morse_index, expect, "{sig}");
            assert!(r.is_nondegenerate());
            assert!(r.poincare_hopf_consistent());
            let flipped = hessian_spectrum(&m, &(-1.0 * &u)).unwrap();
            assert_eq!(flipped, r);
        }
    }

    #[test]
    fn dirichlet_ground_eigenvalue() {
        let st = DoubleWell { x_min: -0.5, x_max: 1.5, n: 4001, intervals: vec![(0.0, 1.0)], ..DoubleWell::default() };
        let m = Model::new(st.build().unwrap()).unwrap();
        let mu = dirichlet_eigenvalues(&m, 2);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((mu[0] - (pi2 + 1.0)).abs() < 1e-3, "{}", mu[0]);
        assert!((mu[1] - (4.0 * pi2 + 1.0)).abs() < 1e-2, "{}", mu[1]);
    }

    #[test]
    fn neumann_bottom_grows_with_lambda() {
        let m = reference(651);
        let r = 3.5;
        let vals: Vec<f64> = [1.0, 10.0, 100.0, 1000.0].iter().map(|&l| neumann_bottom(&m, l, r).unwrap()).collect();
        for (l, v) in [1.0, 10.0, 100.0, 1000.0].iter().zip(&vals) {
            assert!(*v >= 1.0 + l - 1e-8);
        }
        for w in vals.windows(2) {
            assert!(w[1] >= 5.0 * w[0]);
        }
        assert!(matches!(neumann_bottom(&m, 10.0, 4.99), Err(Error::TooFewExteriorNodes { .. })));
    }
}
