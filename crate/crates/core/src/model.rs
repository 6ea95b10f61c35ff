//! Discrete Hilbert-space structure of the deep-well problem.
//!
//! The energy space carries the metric
//! `⟨u,v⟩ = ∫ u'v' + (b + a₀ + a) u v`, the well operator `⟨Au,v⟩ = ∫ a u v`
//! and the nonlinear part `K(u) = ∫ (b/2) u² + F(x,u)`. For physical depth
//! `λ ≥ 1` the working metric is `⟨u,v⟩_λ = ⟨u,v⟩ + (λ-1)⟨Au,v⟩`, so that
//! `J_λ(u) = ½‖u‖²_λ − K(u)` is the energy of `−u'' + (a₀ + λa)u = f(x,u)`.
//!
//! All forms are tridiagonal (stiffness) plus diagonal (lumped mass), and
//! the kernel of `A` is exactly the span of the nodes strictly inside Ω.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::{DomainSpec, Grid, NodeKind};
use crate::tridiag::{SymTridiag, TridiagCholesky};

/// One term `W(x)|u|^{p-2}u` of the nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub exponent: f64,
    pub weight: Field,
}

/// `f(x,u) = Σ W_k(x)|u|^{p_k-2}u` with one or two terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    terms: Vec<PowerTerm>,
}

impl Nonlinearity {
    pub fn single(exponent: f64, weight: Field) -> Self {
        Self { terms: vec![PowerTerm { exponent, weight }] }
    }

    pub fn with_second(mut self, exponent: f64, weight: Field) -> Self {
        self.terms.push(PowerTerm { exponent, weight });
        self
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    /// `f(x_i, u)`.
    #[inline]
    pub fn f(&self, i: usize, u: f64) -> f64 {
        self.terms.iter().map(|t| t.weight[i] * u.abs().powf(t.exponent - 2.0) * u).sum()
    }

    /// `∂f/∂u (x_i, u)`.
    #[inline]
    pub fn f_t(&self, i: usize, u: f64) -> f64 {
        self.terms.iter().map(|t| (t.exponent - 1.0) * t.weight[i] * u.abs().powf(t.exponent - 2.0)).sum()
    }

    /// `F(x_i, u) = ∫₀ᵘ f(x_i, t) dt`.
    #[inline]
    pub fn primitive(&self, i: usize, u: f64) -> f64 {
        self.terms.iter().map(|t| t.weight[i] * u.abs().powf(t.exponent) / t.exponent).sum()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.terms.is_empty() || self.terms.len() > 2 {
            return Err(Error::InvalidNonlinearity(format!("expected one or two power terms, got {}", self.terms.len())));
        }
        for t in &self.terms {
            if !(t.exponent > 2.0) || !t.exponent.is_finite() {
                return Err(Error::InvalidNonlinearity(format!("exponent must exceed 2, got {}", t.exponent)));
            }
            if t.weight.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: t.weight.len() });
            }
            if let Some(node) = t.weight.iter().position(|w| !w.is_finite()) {
                return Err(Error::SpecViolation { node, reason: "weight is not finite".into() });
            }
        }
        Ok(())
    }
}

/// Potentials, well bottom and nonlinearity of one deep-well problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    grid: Grid,
    domain: DomainSpec,
    a0: Field,
    a: Field,
    nonlinearity: Nonlinearity,
    b: f64,
}

impl ProblemSpec {
    pub fn new(grid: Grid, domain: DomainSpec, a0: Field, a: Field, nonlinearity: Nonlinearity) -> Result<Self> {
        let n = grid.n();
        for field in [&a0, &a] {
            if field.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: field.len() });
            }
        }
        if domain.kinds().len() != n {
            return Err(Error::LengthMismatch { expected: n, got: domain.kinds().len() });
        }
        if let Some(node) = a0.iter().position(|v| !v.is_finite()) {
            return Err(Error::SpecViolation { node, reason: "a0 is not finite".into() });
        }
        for (i, (&ai, kind)) in a.iter().zip(domain.kinds()).enumerate() {
            let reason = match kind {
                _ if !ai.is_finite() => Some("a is not finite"),
                NodeKind::Interior | NodeKind::Boundary if ai != 0.0 => Some("a must vanish on the closed well bottom"),
                NodeKind::Exterior if !(ai > 0.0) => Some("a must be positive outside the well bottom"),
                _ => None,
            };
            if let Some(reason) = reason {
                return Err(Error::SpecViolation { node: i, reason: reason.into() });
            }
        }
        for &node in [0, n - 1].iter() {
            if domain.kind(node) != NodeKind::Exterior {
                return Err(Error::SpecViolation { node, reason: "well bottom touches the truncation boundary".into() });
            }
        }
        nonlinearity.validate(n)?;
        let min_a0 = a0.iter().copied().fold(f64::INFINITY, f64::min);
        let b = 1.0 - min_a0;
        Ok(Self { grid, domain, a0, a, nonlinearity, b })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn a0(&self) -> &Field {
        &self.a0
    }

    pub fn a(&self) -> &Field {
        &self.a
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    /// `b = 1 − min a₀`, so that `b + a₀ ≥ 1`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Copy with a different nonlinearity (same grid and potentials).
    pub fn with_nonlinearity(&self, nonlinearity: Nonlinearity) -> Result<Self> {
        Self::new(self.grid.clone(), self.domain.clone(), self.a0.clone(), self.a.clone(), nonlinearity)
    }
}

/// Assembled forms: metric `G`, well form `A` (diagonal), lumped mass `M`.
#[derive(Debug, Clone)]
pub struct Forms {
    g: SymTridiag,
    stiffness: SymTridiag,
    amat: Vec<f64>,
    mass: Vec<f64>,
    load_weights: Vec<f64>,
    omega: Vec<usize>,
    g_omega: SymTridiag,
    g_omega_chol: TridiagCholesky,
    g_chol: TridiagCholesky,
}

impl Forms {
    pub fn assemble(spec: &ProblemSpec) -> Result<Self> {
        let grid = spec.grid();
        let n = grid.n();
        let h = grid.h();
        let a = spec.a().as_slice();

        // Dirichlet stiffness: the two truncation nodes are decoupled rows.
        let mut sd = vec![2.0 / h; n];
        let mut so = vec![-1.0 / h; n - 1];
        so[0] = 0.0;
        so[n - 2] = 0.0;
        sd[0] = 2.0 / h;
        sd[n - 1] = 2.0 / h;
        let stiffness = SymTridiag::new(sd, so);

        let mass = grid.trapezoid_weights();
        // Row-sum lumping of ∫ a φ_i with `a` piecewise linear between nodes.
        let mut amat = vec![0.0; n];
        amat[0] = h * (2.0 * a[0] + a[1]) / 6.0;
        amat[n - 1] = h * (a[n - 2] + 2.0 * a[n - 1]) / 6.0;
        for i in 1..n - 1 {
            amat[i] = h * (a[i - 1] + 4.0 * a[i] + a[i + 1]) / 6.0;
        }

        let b = spec.b();
        let shift: Vec<f64> = (0..n).map(|i| mass[i] * (b + spec.a0()[i]) + amat[i]).collect();
        let g = stiffness.add_diag(&shift, 1.0);
        let g_chol = g.cholesky()?;

        let mut load_weights = mass.clone();
        load_weights[0] = 0.0;
        load_weights[n - 1] = 0.0;

        let omega = spec.domain().interior_nodes().to_vec();
        debug_assert!(omega.iter().all(|&i| amat[i] == 0.0));
        let g_omega = g.restrict(&omega);
        let g_omega_chol = g_omega.cholesky()?;

        Ok(Self { g, stiffness, amat, mass, load_weights, omega, g_omega, g_omega_chol, g_chol })
    }

    pub fn g(&self) -> &SymTridiag {
        &self.g
    }

    pub fn stiffness(&self) -> &SymTridiag {
        &self.stiffness
    }

    pub fn amat(&self) -> &[f64] {
        &self.amat
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Quadrature weights of `K`: the lumped mass with the Dirichlet nodes
    /// masked out.
    pub fn load_weights(&self) -> &[f64] {
        &self.load_weights
    }

    /// Node indices spanning the discrete limit space (kernel of `A`).
    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn g_omega(&self) -> &SymTridiag {
        &self.g_omega
    }

    pub fn g_omega_chol(&self) -> &TridiagCholesky {
        &self.g_omega_chol
    }

    pub fn g_chol(&self) -> &TridiagCholesky {
        &self.g_chol
    }

    /// `uᵀ A u`.
    pub fn a_form(&self, u: &Field) -> f64 {
        u.iter().zip(&self.amat).map(|(v, a)| a * v * v).sum()
    }
}

/// The metric `G + (λ−1)A` for a physical depth `λ ≥ 1`, factorized.
#[derive(Debug, Clone)]
pub struct LambdaMetric {
    lambda: f64,
    glam: SymTridiag,
    chol: TridiagCholesky,
}

impl LambdaMetric {
    pub fn new(forms: &Forms, lambda: f64) -> Result<Self> {
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::LambdaBelowOne(lambda));
        }
        let glam = forms.g().add_diag(forms.amat(), lambda - 1.0);
        let chol = glam.cholesky()?;
        Ok(Self { lambda, glam, chol })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn matrix(&self) -> &SymTridiag {
        &self.glam
    }

    pub fn inner(&self, u: &Field, v: &Field) -> f64 {
        self.glam.bilinear(u.as_slice(), v.as_slice())
    }

    pub fn norm(&self, u: &Field) -> f64 {
        self.glam.quad_form(u.as_slice()).max(0.0).sqrt()
    }

    /// Riesz representative: solves `G_λ x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Field {
        Field::new(self.chol.solve(rhs))
    }

    /// Dual norm `sqrt(rhsᵀ G_λ⁻¹ rhs)` of a load vector.
    pub fn dual_norm(&self, rhs: &[f64]) -> f64 {
        self.chol.inverse_quad(rhs).max(0.0).sqrt()
    }
}

/// A problem together with its assembled forms. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ProblemSpec,
    forms: Forms,
}

impl Model {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let forms = Forms::assemble(&spec)?;
        Ok(Self { spec, forms })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn forms(&self) -> &Forms {
        &self.forms
    }

    pub fn grid(&self) -> &Grid {
        self.spec.grid()
    }

    pub fn n(&self) -> usize {
        self.spec.grid().n()
    }

    pub fn metric(&self, lambda: f64) -> Result<LambdaMetric> {
        LambdaMetric::new(&self.forms, lambda)
    }

    /// The `λ = 1` norm `‖u‖`.
    pub fn norm(&self, u: &Field) -> f64 {
        self.forms.g.quad_form(u.as_slice()).max(0.0).sqrt()
    }

    pub fn inner(&self, u: &Field, v: &Field) -> f64 {
        self.forms.g.bilinear(u.as_slice(), v.as_slice())
    }

    /// Nodal load of `∫ (b u + f(x,u)) φ_i`.
    pub fn load(&self, u: &Field) -> Vec<f64> {
        let b = self.spec.b;
        let nl = &self.spec.nonlinearity;
        self.forms
            .load_weights
            .iter()
            .enumerate()
            .map(|(i, w)| if *w == 0.0 { 0.0 } else { w * (b * u[i] + nl.f(i, u[i])) })
            .collect()
    }

    /// `K(u) = ∫ (b/2) u² + F(x,u)`.
    pub fn k_functional(&self, u: &Field) -> f64 {
        let b = self.spec.b;
        let nl = &self.spec.nonlinearity;
        self.forms
            .load_weights
            .iter()
            .enumerate()
            .map(|(i, w)| if *w == 0.0 { 0.0 } else { w * (0.5 * b * u[i] * u[i] + nl.primitive(i, u[i])) })
            .sum()
    }

    /// `J_λ(u) = ½‖u‖²_λ − K(u)`.
    pub fn eval_j(&self, u: &Field, metric: &LambdaMetric) -> Result<f64> {
        let j = 0.5 * metric.inner(u, u) - self.k_functional(u);
        if j.is_finite() {
            Ok(j)
        } else {
            Err(Error::NonFinite("J_lambda"))
        }
    }

    /// `k(u) = ∇K(u)` in the `λ = 1` metric.
    pub fn grad_k(&self, u: &Field) -> Field {
        Field::new(self.forms.g_chol.solve(&self.load(u)))
    }

    /// `k_λ(u) = ∇_λ K(u)`.
    pub fn grad_k_lambda(&self, u: &Field, metric: &LambdaMetric) -> Field {
        metric.solve(&self.load(u))
    }

    /// `∇_λ J_λ(u) = u − k_λ(u)`.
    pub fn grad_j_lambda(&self, u: &Field, metric: &LambdaMetric) -> Field {
        u - &self.grad_k_lambda(u, metric)
    }

    /// `‖∇_λ J_λ(u)‖_λ`, evaluated as the dual norm of `G_λ u − m(u)`.
    pub fn residual_norm(&self, u: &Field, metric: &LambdaMetric) -> f64 {
        let mut r = metric.matrix().matvec(u.as_slice());
        for (ri, mi) in r.iter_mut().zip(self.load(u)) {
            *ri -= mi;
        }
        metric.dual_norm(&r)
    }

    /// Diagonal coefficients of the second variation of `K` at `u`.
    pub fn hessian_coefficients(&self, u: &Field) -> Vec<f64> {
        let b = self.spec.b;
        let nl = &self.spec.nonlinearity;
        self.forms.load_weights.iter().enumerate().map(|(i, w)| if *w == 0.0 { 0.0 } else { w * (b + nl.f_t(i, u[i])) }).collect()
    }

    /// `Dk_λ(u)` as an operator on fields.
    pub fn hess_dk<'a>(&self, u: &Field, metric: &'a LambdaMetric) -> DkOperator<'a> {
        DkOperator { coeff: self.hessian_coefficients(u), metric }
    }

    /// Restriction of a field to the limit-space nodes.
    pub fn restrict_omega(&self, u: &Field) -> Vec<f64> {
        self.forms.omega.iter().map(|&i| u[i]).collect()
    }

    /// Zero extension of limit-space coefficients to a full field.
    pub fn extend_omega(&self, values: &[f64]) -> Field {
        let mut u = Field::zeros(self.n());
        for (&i, v) in self.forms.omega.iter().zip(values) {
            u[i] = *v;
        }
        u
    }

    /// Orthogonal projection onto the limit space; independent of `λ`.
    pub fn project_p(&self, u: &Field) -> Field {
        let gu = self.forms.g.matvec(u.as_slice());
        let rhs: Vec<f64> = self.forms.omega.iter().map(|&i| gu[i]).collect();
        self.extend_omega(&self.forms.g_omega_chol.solve(&rhs))
    }

    pub fn project_q(&self, u: &Field) -> Field {
        u - &self.project_p(u)
    }

    /// `k_∞(u)` for `u` in the limit space, returned as a full field.
    pub fn grad_k_inf(&self, u: &Field) -> Field {
        let load = self.load(u);
        let rhs: Vec<f64> = self.forms.omega.iter().map(|&i| load[i]).collect();
        self.extend_omega(&self.forms.g_omega_chol.solve(&rhs))
    }

    /// `Dk_∞(u)[P v]` as a full field.
    pub fn dk_inf_p(&self, u: &Field, v: &Field) -> Field {
        let coeff = self.hessian_coefficients(u);
        let pv = self.project_p(v);
        let rhs: Vec<f64> = self.forms.omega.iter().map(|&i| coeff[i] * pv[i]).collect();
        self.extend_omega(&self.forms.g_omega_chol.solve(&rhs))
    }

    /// `∫_{exterior} u²` over nodes outside the closed well bottom.
    pub fn exterior_mass(&self, u: &Field) -> f64 {
        let mass = &self.forms.mass;
        self.spec.domain().exterior_nodes().map(|i| mass[i] * u[i] * u[i]).sum()
    }
}

/// `v ↦ G_λ⁻¹ (c ∘ v)`, self-adjoint in the `λ`-metric.
#[derive(Debug, Clone)]
pub struct DkOperator<'a> {
    coeff: Vec<f64>,
    metric: &'a LambdaMetric,
}

impl DkOperator<'_> {
    pub fn apply(&self, v: &Field) -> Field {
        let rhs: Vec<f64> = self.coeff.iter().zip(v.iter()).map(|(c, x)| c * x).collect();
        self.metric.solve(&rhs)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeff
    }

    /// Exact `λ`-operator norm: the spectral radius of the pencil
    /// `(diag(c), G_λ)`, by Sturm bisection.
    pub fn norm(&self) -> f64 {
        SymTridiag::from_diag(self.coeff.clone()).pencil_spectral_radius(self.metric.matrix())
    }

    /// Exact `λ`-norm of `self − other` (both on the same metric).
    pub fn difference_norm(&self, other: &DkOperator<'_>) -> f64 {
        let diff: Vec<f64> = self.coeff.iter().zip(&other.coeff).map(|(a, b)| a - b).collect();
        SymTridiag::from_diag(diff).pencil_spectral_radius(self.metric.matrix())
    }
}
