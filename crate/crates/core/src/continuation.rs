//! Continuation of a nondegenerate limit solution to finite well depth.
//!
//! The primary iteration is the chord map `g_λ(u) = u − L⁻¹ f_λ(u)` with
//! `f_λ = id − k_λ` and the frozen linearization `L = id − Dk_∞(u_∞)∘P`.
//! Newton and a descent flow are fallbacks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::limit::{limit_hessian, signature_of, LimitSolution, NodalSignature};
use crate::model::{LambdaMetric, Model};
use crate::sampling::smooth_field;
use crate::spectral::{hessian_spectrum, SpectralReport, NONDEG_THRESHOLD};
use crate::tridiag::TridiagLu;
use crate::verify::operator_norm;

/// Increasing physical depths `λ ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    values: Vec<f64>,
}

impl Ladder {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInterval("ladder is empty".into()));
        }
        if !(values[0] >= 1.0) {
            return Err(Error::LambdaBelowOne(values[0]));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInterval("ladder must be finite and strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `λ_min·r^k` up to `λ_max`; the last rung is snapped onto `λ_max`
    /// when it lands within rounding of it.
    pub fn geometric(lambda_min: f64, lambda_max: f64, ratio: f64) -> Result<Self> {
        if !(ratio > 1.0) || !(lambda_max >= lambda_min) {
            return Err(Error::InvalidInterval(format!(
                "geometric ladder needs ratio > 1 and max >= min, got {lambda_min}, {lambda_max}, {ratio}"
            )));
        }
        let steps = ((lambda_max / lambda_min).ln() / ratio.ln() + 1e-9).floor() as i32;
        let mut values: Vec<f64> = (0..=steps).map(|k| lambda_min * ratio.powi(k)).collect();
        let last = values.len() - 1;
        if (values[last] - lambda_max).abs() <= 1e-9 * lambda_max {
            values[last] = lambda_max;
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Default for Ladder {
    fn default() -> Self {
        Self::geometric(10.0, 1e6, 10f64.sqrt()).expect("default ladder")
    }
}

/// `L = id − Dk_∞(u_∞)∘P`, factorized through the limit-space Hessian.
#[derive(Debug, Clone)]
pub struct ChordOperator {
    u_inf: Field,
    hessian: TridiagLu,
    spectral: SpectralReport,
}

pub fn build_l(model: &Model, u_inf: &LimitSolution) -> Result<ChordOperator> {
    let spectral = hessian_spectrum(model, &u_inf.u)?;
    if !spectral.is_nondegenerate() {
        return Err(Error::SingularL { margin: spectral.nondeg_margin, threshold: NONDEG_THRESHOLD });
    }
    let hessian = limit_hessian(model, &u_inf.u).lu()?;
    Ok(ChordOperator { u_inf: u_inf.u.clone(), hessian, spectral })
}

impl ChordOperator {
    pub fn spectral(&self) -> &SpectralReport {
        &self.spectral
    }

    pub fn u_inf(&self) -> &Field {
        &self.u_inf
    }

    /// `L v`.
    pub fn apply(&self, model: &Model, v: &Field) -> Field {
        v - &model.dk_inf_p(&self.u_inf, v)
    }

    /// `L⁻¹ y`: on the limit space `L` is `G_ΩΩ⁻¹B`, elsewhere the identity.
    pub fn apply_inverse(&self, model: &Model, y: &Field) -> Field {
        let forms = model.forms();
        let gy = forms.g().matvec(y.as_slice());
        let rhs: Vec<f64> = forms.omega().iter().map(|&i| gy[i]).collect();
        let p_part = model.extend_omega(&self.hessian.solve(&rhs));
        let py = model.extend_omega(&forms.g_omega_chol().solve(&rhs));
        let mut out = y - &py;
        out.axpy(1.0, &p_part);
        out
    }

    /// `‖L⁻¹‖_λ = max(1, 1/margin)`, exact because `L` splits along `P`/`Q`.
    pub fn alpha(&self) -> f64 {
        (1.0 / self.spectral.nondeg_margin).max(1.0)
    }

    /// Power-iteration estimate of `‖L⁻¹‖_λ`.
    pub fn estimate_alpha<R: Rng + ?Sized>(&self, model: &Model, metric: &LambdaMetric, rng: &mut R) -> f64 {
        let start = smooth_field(model.grid(), rng, 30);
        operator_norm(metric, &start, |v| self.apply_inverse(model, v), 200, 1e-10).value
    }
}

/// `f_λ(u) = u − k_λ(u)`.
pub fn f_lambda(model: &Model, u: &Field, metric: &LambdaMetric) -> Field {
    model.grad_j_lambda(u, metric)
}

/// One application of `g_λ`.
pub fn chord_step(model: &Model, u: &Field, metric: &LambdaMetric, l: &ChordOperator) -> Result<Field> {
    let f = f_lambda(model, u, metric);
    let out = u - &l.apply_inverse(model, &f);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFinite("chord step"))
    }
}

/// One damped Newton step on `f_λ`, halving on residual increase down to
/// `2⁻²⁰`.
pub fn newton_step(model: &Model, u: &Field, metric: &LambdaMetric) -> Result<Field> {
    let res = model.residual_norm(u, metric);
    let jac = metric.matrix().add_diag(&model.hessian_coefficients(u), -1.0).lu()?;
    let mut rhs = metric.matrix().matvec(u.as_slice());
    for (r, m) in rhs.iter_mut().zip(model.load(u)) {
        *r -= m;
    }
    let step = Field::new(jac.solve(&rhs));
    let mut damping = 1.0;
    loop {
        let mut trial = u.clone();
        trial.axpy(-damping, &step);
        let tres = model.residual_norm(&trial, metric);
        if tres.is_finite() && (tres < res || damping <= f64::powi(2.0, -20)) {
            return Ok(trial);
        }
        if damping <= f64::powi(2.0, -20) {
            return Err(Error::NonFinite("Newton step"));
        }
        damping *= 0.5;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub tol_cont: f64,
    pub chord_max_iter: usize,
    pub newton_max_iter: usize,
    pub flow_max_iter: usize,
    /// Ball radius as a fraction of `‖u_∞‖`.
    pub delta_factor: f64,
    /// The chord iteration is abandoned beyond this many ball radii.
    pub divergence_factor: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            tol_cont: 1e-9,
            chord_max_iter: 200,
            newton_max_iter: 50,
            flow_max_iter: 10_000,
            delta_factor: 0.1,
            divergence_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Chord,
    Newton,
    Flow,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Chord => "chord",
            Method::Newton => "newton",
            Method::Flow => "flow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub lambda: f64,
    pub u: Field,
    pub residual_lambda: f64,
    pub dist_to_limit: f64,
    pub exterior_mass: f64,
    pub j_value: f64,
    pub iterations: usize,
    pub method: Method,
    /// Zero signature of `u` restricted to the well intervals.
    pub signature: NodalSignature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub seed: LimitSolution,
    /// Ordered by increasing `λ`.
    pub records: Vec<BranchRecord>,
    pub converged: bool,
    pub failure: Option<Error>,
    pub alpha: f64,
    pub spectral: SpectralReport,
}

impl Branch {
    /// Smallest rung from which the chord iteration converged on every
    /// rung above.
    pub fn empirical_lambda(&self) -> Option<f64> {
        self.records.iter().rev().take_while(|r| r.method == Method::Chord).last().map(|r| r.lambda)
    }

    /// Least-squares slope of `log dist_to_limit` against `log λ`.
    pub fn decay_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> =
            self.records.iter().filter(|r| r.dist_to_limit > 0.0).map(|r| (r.lambda.ln(), r.dist_to_limit.ln())).collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

/// Outcome of one iterative solve at fixed `λ`.
#[derive(Debug, Clone)]
pub struct RungSolve {
    pub u: Field,
    pub residual: f64,
    pub iterations: usize,
}

/// Iterate `g_λ` from `start` until `‖f_λ(u)‖_λ ≤ tol`. Fails when the
/// iterate leaves `B_{R,λ}(u_∞)` with `R = abort_radius`.
pub fn chord_solve(
    model: &Model,
    start: &Field,
    metric: &LambdaMetric,
    l: &ChordOperator,
    tol: f64,
    max_iter: usize,
    abort_radius: f64,
) -> std::result::Result<RungSolve, String> {
    let mut u = start.clone();
    for it in 0..=max_iter {
        let res = model.residual_norm(&u, metric);
        if !res.is_finite() {
            return Err(format!("chord residual not finite after {it} iterations"));
        }
        if res <= tol {
            return Ok(RungSolve { u, residual: res, iterations: it });
        }
        if it == max_iter {
            return Err(format!("chord did not converge in {max_iter} iterations (residual {res:e})"));
        }
        u = chord_step(model, &u, metric, l).map_err(|e| e.to_string())?;
        let dist = metric.norm(&(&u - l.u_inf()));
        if dist > abort_radius {
            return Err(format!("chord left the ball after {} iterations (distance {dist:e})", it + 1));
        }
    }
    unreachable!()
}

fn newton_solve(
    model: &Model,
    start: &Field,
    metric: &LambdaMetric,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<RungSolve, String> {
    let mut u = start.clone();
    for it in 0..=max_iter {
        let res = model.residual_norm(&u, metric);
        if res <= tol {
            return Ok(RungSolve { u, residual: res, iterations: it });
        }
        if it == max_iter || !res.is_finite() {
            return Err(format!("Newton did not converge (residual {res:e})"));
        }
        u = newton_step(model, &u, metric).map_err(|e| e.to_string())?;
    }
    unreachable!()
}

fn flow_solve(
    model: &Model,
    start: &Field,
    metric: &LambdaMetric,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<RungSolve, String> {
    let mut u = start.clone();
    let mut j = model.eval_j(&u, metric).map_err(|e| e.to_string())?;
    let mut tau = 0.5;
    for it in 0..=max_iter {
        let grad = f_lambda(model, &u, metric);
        let res = metric.norm(&grad);
        if res <= tol {
            return Ok(RungSolve { u, residual: res, iterations: it });
        }
        if it == max_iter || !res.is_finite() {
            return Err(format!("descent flow did not converge (residual {res:e})"));
        }
        let mut trial = u.clone();
        trial.axpy(-tau, &grad);
        match model.eval_j(&trial, metric) {
            Ok(tj) if tj <= j => {
                u = trial;
                j = tj;
                tau = (tau * 1.2).min(1.0);
            }
            _ => tau *= 0.5,
        }
        if tau < 1e-12 {
            return Err("descent flow step collapsed".into());
        }
    }
    unreachable!()
}

fn record(
    model: &Model,
    lambda: f64,
    metric: &LambdaMetric,
    u_inf: &Field,
    solve: RungSolve,
    method: Method,
) -> Result<BranchRecord> {
    let j_value = model.eval_j(&solve.u, metric)?;
    Ok(BranchRecord {
        lambda,
        dist_to_limit: metric.norm(&(&solve.u - u_inf)),
        exterior_mass: model.exterior_mass(&solve.u),
        signature: signature_of(model, &solve.u),
        residual_lambda: solve.residual,
        j_value,
        iterations: solve.iterations,
        method,
        u: solve.u,
    })
}

/// Solve one rung from `start`: chord first, then Newton, then flow.
pub fn solve_rung(
    model: &Model,
    lambda: f64,
    start: &Field,
    l: &ChordOperator,
    opts: &ContinuationOptions,
) -> Result<BranchRecord> {
    let metric = model.metric(lambda)?;
    let delta = opts.delta_factor * model.norm(l.u_inf());
    let chord = chord_solve(model, start, &metric, l, opts.tol_cont, opts.chord_max_iter, opts.divergence_factor * delta);
    let chord_err = match chord {
        Ok(s) => return record(model, lambda, &metric, l.u_inf(), s, Method::Chord),
        Err(e) => e,
    };
    let newton_err = match newton_solve(model, start, &metric, opts.tol_cont, opts.newton_max_iter) {
        Ok(s) => return record(model, lambda, &metric, l.u_inf(), s, Method::Newton),
        Err(e) => e,
    };
    match flow_solve(model, start, &metric, opts.tol_cont, opts.flow_max_iter) {
        Ok(s) => record(model, lambda, &metric, l.u_inf(), s, Method::Flow),
        Err(flow_err) => Err(Error::BranchFailed { lambda, reason: format!("{chord_err}; {newton_err}; {flow_err}") }),
    }
}

/// Continue `u_inf` along the ladder. Rungs are visited from the deepest
/// well downwards, each warm-started from the rung above; the first rung
/// starts from `u_∞` itself.
pub fn continue_branch(model: &Model, u_inf: &LimitSolution, ladder: &Ladder, opts: &ContinuationOptions) -> Result<Branch> {
    let l = build_l(model, u_inf)?;
    let mut records = Vec::new();
    let mut failure = None;
    let mut start = u_inf.u.clone();
    for &lambda in ladder.values().iter().rev() {
        match solve_rung(model, lambda, &start, &l, opts) {
            Ok(rec) => {
                start = rec.u.clone();
                records.push(rec);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    records.reverse();
    Ok(Branch {
        seed: u_inf.clone(),
        converged: failure.is_none(),
        failure,
        records,
        alpha: l.alpha(),
        spectral: l.spectral().clone(),
    })
}

/// A random point of `B_{δ,λ}(center)`: a smooth direction, split into its
/// `P` and `Q` parts with a random mixing angle, at a uniform radius.
pub fn sample_ball<R: Rng + ?Sized>(model: &Model, center: &Field, metric: &LambdaMetric, delta: f64, rng: &mut R) -> Field {
    let d = smooth_field(model.grid(), rng, 30);
    let pd = model.project_p(&d);
    let qd = &d - &pd;
    let theta = rng.gen::<f64>() * std::f64::consts::FRAC_PI_2;
    let (np, nq) = (metric.norm(&pd), metric.norm(&qd));
    let mut dir = Field::zeros(model.n());
    if np > 0.0 {
        dir.axpy(theta.cos() / np, &pd);
    }
    if nq > 0.0 {
        dir.axpy(theta.sin() / nq, &qd);
    }
    let nd = metric.norm(&dir);
    let mut out = center.clone();
    if nd > 0.0 {
        out.axpy(delta * rng.gen::<f64>() / nd, &dir);
    }
    out
}

/// Largest sampled difference quotient of `g_λ` over pairs in
/// `B_{δ,λ}(u_∞)`.
pub fn estimate_contraction<R: Rng + ?Sized>(
    model: &Model,
    metric: &LambdaMetric,
    l: &ChordOperator,
    delta: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = sample_ball(model, l.u_inf(), metric, delta, rng);
        let v = sample_ball(model, l.u_inf(), metric, delta, rng);
        let den = metric.norm(&(&u - &v));
        if den == 0.0 {
            continue;
        }
        let gu = chord_step(model, &u, metric, l)?;
        let gv = chord_step(model, &v, metric, l)?;
        worst = worst.max(metric.norm(&(&gu - &gv)) / den);
    }
    Ok(worst)
}
