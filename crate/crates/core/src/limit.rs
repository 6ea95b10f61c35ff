//! The Dirichlet limit problem `−u'' + a₀u = f(x,u)` on the well bottom.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::model::Model;
use crate::tridiag::SymTridiag;

/// Zero counts and leading signs, one entry per well interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodalSignature {
    zeros: Vec<usize>,
    signs: Vec<i8>,
}

impl NodalSignature {
    pub fn new(zeros: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        if zeros.len() != signs.len() {
            return Err(Error::LengthMismatch { expected: zeros.len(), got: signs.len() });
        }
        if signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidInterval("leading signs must be +1 or -1".into()));
        }
        Ok(Self { zeros, signs })
    }

    /// All leading signs positive.
    pub fn positive(zeros: Vec<usize>) -> Self {
        let signs = vec![1; zeros.len()];
        Self { zeros, signs }
    }

    pub fn zeros(&self) -> &[usize] {
        &self.zeros
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    /// Parse `"1,0"` (positive signs) or `"1,0;+,-"`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidInterval(format!("cannot parse signature {text:?}"));
        let (z, s) = match text.split_once(';') {
            Some((z, s)) => (z, Some(s)),
            None => (text, None),
        };
        let zeros = z.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
        match s {
            None => Ok(Self::positive(zeros)),
            Some(s) => {
                let signs = s
                    .split(',')
                    .map(|t| match t.trim() {
                        "+" | "+1" | "1" => Ok(1),
                        "-" | "-1" => Ok(-1),
                        _ => Err(bad()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::new(zeros, signs)
            }
        }
    }

    /// The same zero counts with every sign reversed.
    pub fn flipped(&self) -> Self {
        Self { zeros: self.zeros.clone(), signs: self.signs.iter().map(|s| -s).collect() }
    }
}

impl fmt::Display for NodalSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z: Vec<String> = self.zeros.iter().map(|z| z.to_string()).collect();
        let s: Vec<&str> = self.signs.iter().map(|s| if *s > 0 { "+" } else { "-" }).collect();
        write!(f, "{};{}", z.join(","), s.join(","))
    }
}

/// Snap-to-right-neighbour signs: values below `1e-10` in magnitude inherit
/// the sign to their right, and stay 0 when nothing to the right is signed.
fn snapped_signs(values: &[f64]) -> Vec<i8> {
    let mut out = vec![0i8; values.len()];
    let mut next = 0i8;
    for i in (0..values.len()).rev() {
        let v = values[i];
        out[i] = if v.abs() < 1e-10 {
            next
        } else if v > 0.0 {
            1
        } else {
            -1
        };
        next = out[i];
    }
    out
}

/// Strict sign changes between adjacent (snapped) values, and the first sign.
pub fn count_zeros(values: &[f64]) -> (usize, i8) {
    let signs: Vec<i8> = snapped_signs(values).into_iter().filter(|s| *s != 0).collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    (changes, signs.first().copied().unwrap_or(0))
}

/// Signature of `u` restricted to each interval's interior nodes.
pub fn signature_of(model: &Model, u: &Field) -> NodalSignature {
    let domain = model.spec().domain();
    let mut zeros = Vec::new();
    let mut signs = Vec::new();
    for k in 0..domain.interval_count() {
        let (z, s) = count_zeros(&u.as_slice()[domain.interval_interior(k)]);
        zeros.push(z);
        signs.push(if s == 0 { 1 } else { s });
    }
    NodalSignature { zeros, signs }
}

/// A converged solution of the limit problem, zero outside Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSolution {
    pub u: Field,
    pub signature: NodalSignature,
    /// `‖u − k_∞(u)‖` in the energy norm.
    pub residual: f64,
    pub j_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub amplitude: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 50, amplitude: 2.0 }
    }
}

/// Piecewise sine seed with the requested zero counts and leading signs.
pub fn nodal_seed(model: &Model, signature: &NodalSignature, amplitude: f64) -> Result<Field> {
    let domain = model.spec().domain();
    if signature.len() != domain.interval_count() {
        return Err(Error::LengthMismatch { expected: domain.interval_count(), got: signature.len() });
    }
    let x = model.grid().nodes();
    let mut u = Field::zeros(model.n());
    for (k, &(l, r)) in domain.intervals().iter().enumerate() {
        let freq = (signature.zeros[k] + 1) as f64 * std::f64::consts::PI / (r - l);
        let sign = f64::from(signature.signs[k]);
        for i in domain.interval_interior(k) {
            u[i] = sign * amplitude * (freq * (x[i] - l)).sin();
        }
    }
    Ok(u)
}

/// Limit-space residual `G_ΩΩ u − m_Ω(u)` and its dual norm.
fn limit_residual(model: &Model, u_omega: &[f64]) -> (Vec<f64>, f64) {
    let forms = model.forms();
    let full = model.extend_omega(u_omega);
    let load = model.load(&full);
    let mut r = forms.g_omega().matvec(u_omega);
    for (ri, &i) in r.iter_mut().zip(forms.omega()) {
        *ri -= load[i];
    }
    let norm = forms.g_omega_chol().inverse_quad(&r).max(0.0).sqrt();
    (r, norm)
}

/// `B = G_ΩΩ − diag(c_Ω)`: the Hessian of the limit functional.
pub fn limit_hessian(model: &Model, u: &Field) -> SymTridiag {
    let coeff = model.hessian_coefficients(u);
    let c: Vec<f64> = model.forms().omega().iter().map(|&i| coeff[i]).collect();
    model.forms().g_omega().add_diag(&c, -1.0)
}

/// Rescale each nodal domain of the seed to the maximum of `t ↦ J(tφ)`.
fn nehari_rescale(model: &Model, seed: &Field) -> Field {
    let omega = model.forms().omega();
    let vals: Vec<f64> = omega.iter().map(|&i| seed[i]).collect();
    let signs = snapped_signs(&vals);
    let mut out = seed.clone();
    let mut start = 0;
    while start < omega.len() {
        let mut end = start + 1;
        while end < omega.len() && omega[end] == omega[end - 1] + 1 && signs[end] == signs[start] {
            end += 1;
        }
        if signs[start] != 0 {
            let mut phi = Field::zeros(model.n());
            for &i in &omega[start..end] {
                phi[i] = seed[i];
            }
            if let Some(t) = nehari_factor(model, &phi) {
                for &i in &omega[start..end] {
                    out[i] = t * seed[i];
                }
            }
        }
        start = end;
    }
    out
}

fn nehari_factor(model: &Model, phi: &Field) -> Option<f64> {
    let b = model.spec().b();
    let w = model.forms().load_weights();
    let q = model.forms().g().quad_form(phi.as_slice()) - b * phi.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>();
    let terms: Vec<(f64, f64)> = model
        .spec()
        .nonlinearity()
        .terms()
        .iter()
        .map(|t| (t.exponent, phi.iter().enumerate().map(|(i, v)| w[i] * t.weight[i] * v.abs().powf(t.exponent)).sum()))
        .collect();
    if !(q > 0.0) || terms.iter().any(|(_, n)| !(*n > 0.0)) {
        return None;
    }
    // t ↦ Σ t^{p−2} N is increasing; bracket its crossing with q
    let g = |t: f64| terms.iter().map(|(p, n)| t.powf(p - 2.0) * n).sum::<f64>() - q;
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Damped Newton on the limit problem from `seed`, preserving its signature.
pub fn solve_limit(model: &Model, seed: &Field, opts: &LimitOptions) -> Result<LimitSolution> {
    if seed.len() != model.n() {
        return Err(Error::LengthMismatch { expected: model.n(), got: seed.len() });
    }
    if !seed.is_finite() {
        return Err(Error::NonFinite("seed"));
    }
    let expected = signature_of(model, seed);
    let start = nehari_rescale(model, seed);
    let mut u = model.restrict_omega(&start);
    let (mut r, mut res) = limit_residual(model, &u);
    let mut iterations = 0;
    while res > opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        iterations += 1;
        let jac = limit_hessian(model, &model.extend_omega(&u));
        let step = jac.lu()?.solve(&r);
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a - damping * s).collect();
            let (tr, tres) = limit_residual(model, &trial);
            if tres.is_finite() && (tres < res || damping <= f64::powi(2.0, -20)) {
                u = trial;
                r = tr;
                res = tres;
                break;
            }
            damping *= 0.5;
        }
        if !res.is_finite() {
            return Err(Error::NonFinite("limit Newton residual"));
        }
    }
    let full = model.extend_omega(&u);
    if full.max_abs() < 1e-8 {
        return Err(Error::ConvergedToZero);
    }
    let found = signature_of(model, &full);
    if found != expected {
        return Err(Error::SignatureChanged { expected: expected.to_string(), found: found.to_string() });
    }
    let j_value = model.eval_j(&full, &model.metric(1.0)?)?;
    Ok(LimitSolution { u: full, signature: found, residual: res, j_value })
}

/// `‖u − k_∞(u)‖` for a field supported on the limit space.
pub fn limit_residual_norm(model: &Model, u: &Field) -> f64 {
    limit_residual(model, &model.restrict_omega(u)).1
}

/// Solutions found for every signature, plus the failures.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub solutions: Vec<LimitSolution>,
    pub failures: Vec<(NodalSignature, Error)>,
}

/// All signatures with at most `max_zeros` zeros per interval. With
/// `sign_equivalence`, signatures differing only in leading signs are one
/// class and only the all-positive representative is solved.
pub fn signatures(intervals: usize, max_zeros: usize, sign_equivalence: bool) -> Vec<NodalSignature> {
    let mut zero_lists: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..intervals {
        zero_lists = zero_lists
            .into_iter()
            .flat_map(|z| {
                (0..=max_zeros).map(move |k| {
                    let mut z = z.clone();
                    z.push(k);
                    z
                })
            })
            .collect();
    }
    let sign_lists: Vec<Vec<i8>> = if sign_equivalence {
        vec![vec![1; intervals]]
    } else {
        (0..1usize << intervals).map(|mask| (0..intervals).map(|k| if mask >> k & 1 == 1 { -1 } else { 1 }).collect()).collect()
    };
    let mut out = Vec::new();
    for z in &zero_lists {
        for s in &sign_lists {
            out.push(NodalSignature { zeros: z.clone(), signs: s.clone() });
        }
    }
    out
}

pub fn enumerate_solutions(model: &Model, max_zeros: usize, sign_equivalence: bool, opts: &LimitOptions) -> Enumeration {
    let mut solutions: Vec<LimitSolution> = Vec::new();
    let mut failures = Vec::new();
    let grid = model.grid();
    for sig in signatures(model.spec().domain().interval_count(), max_zeros, sign_equivalence) {
        let result = nodal_seed(model, &sig, opts.amplitude).and_then(|seed| solve_limit(model, &seed, opts));
        match result {
            Ok(sol) => {
                let duplicate = solutions.iter().any(|s| {
                    let d = &s.u - &sol.u;
                    let sq = Field::new(d.iter().map(|v| v * v).collect());
                    grid.integrate(&sq).map(f64::sqrt).unwrap_or(f64::INFINITY) < 1e-6
                });
                if !duplicate {
                    solutions.push(sol);
                }
            }
            Err(e) => failures.push((sig, e)),
        }
    }
    Enumeration { solutions, failures }
}

/// Shooting solution on one well interval with `zeros` interior zeros and
/// positive slope at the left end, sampled on the model grid (zero elsewhere).
pub fn shooting_oracle(model: &Model, interval: (f64, f64), zeros: usize) -> Result<Field> {
    let grid = model.grid();
    let (l, r) = interval;
    let (il, ir) = (grid.nearest(l), grid.nearest(r));
    if ir < il + 2 || (grid.nodes()[il] - l).abs() > 1e-12 * grid.h() || (grid.nodes()[ir] - r).abs() > 1e-12 * grid.h() {
        return Err(Error::InvalidInterval(format!("({l}, {r}) is not a grid-aligned interval")));
    }
    let spec = model.spec();
    let mid = (il + ir) / 2;
    let a0 = spec.a0()[mid];
    for i in il..=ir {
        if (spec.a0()[i] - a0).abs() > 1e-14 {
            return Err(Error::InvalidInterval("shooting needs a constant a0 on the interval".into()));
        }
        for t in spec.nonlinearity().terms() {
            if (t.weight[i] - t.weight[mid]).abs() > 1e-14 {
                return Err(Error::InvalidInterval("shooting needs a constant weight on the interval".into()));
            }
        }
    }
    let nl = spec.nonlinearity();
    let rhs = move |u: f64| a0 * u - nl.f(mid, u);
    let substeps = 10;
    let dt = grid.h() / substeps as f64;
    let cells = ir - il;

    // Integrate and return the values at grid nodes plus the sign changes on (l, r].
    let shoot = |s: f64| -> (Vec<f64>, usize) {
        let (mut u, mut v) = (0.0f64, s);
        let mut nodal = vec![0.0; cells + 1];
        let mut changes = 0;
        let mut last_sign = 1.0f64;
        for c in 0..cells {
            for _ in 0..substeps {
                let k1u = v;
                let k1v = rhs(u);
                let k2u = v + 0.5 * dt * k1v;
                let k2v = rhs(u + 0.5 * dt * k1u);
                let k3u = v + 0.5 * dt * k2v;
                let k3v = rhs(u + 0.5 * dt * k2u);
                let k4u = v + dt * k3v;
                let k4v = rhs(u + dt * k3u);
                u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
                if !u.is_finite() {
                    return (nodal, usize::MAX);
                }
                if u != 0.0 && u.signum() != last_sign {
                    changes += 1;
                    last_sign = u.signum();
                }
            }
            nodal[c + 1] = u;
        }
        (nodal, changes)
    };

    let crosses = |s: f64| shoot(s).1 > zeros;
    let (mut lo, mut hi) = (1e-6, 1e3);
    if crosses(lo) || !crosses(hi) {
        return Err(Error::BracketingFailed(format!(
            "no change in the boundary map for {zeros} zeros over s in [{lo:e}, {hi:e}]"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        if crosses(m) {
            hi = m;
        } else {
            lo = m;
        }
    }
    let (nodal, _) = shoot(lo);
    let mut out = Field::zeros(model.n());
    for (c, v) in nodal.iter().enumerate().take(cells) {
        out[il + c] = *v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::DoubleWell;

    fn reference(n: usize) -> Model {
        let st = DoubleWell { n, ..DoubleWell::default() };
        Model::new(st.build().unwrap()).unwrap()
    }

    fn single_well(x_min: f64, x_max: f64, n: usize) -> Model {
        let st = DoubleWell { x_min, x_max, n, intervals: vec![(0.0, 1.0)], ..DoubleWell::default() };
        Model::new(st.build().unwrap()).unwrap()
    }

    #[test]
    fn zero_counting_snaps_right() {
        assert_eq!(count_zeros(&[1.0, 0.5, -0.5, -1.0]), (1, 1));
        assert_eq!(count_zeros(&[1.0, 1e-12, 1.0]), (0, 1));
        assert_eq!(count_zeros(&[1.0, -1e-12, 1.0]), (0, 1));
        assert_eq!(count_zeros(&[1.0, 1e-12, -1.0]), (1, 1));
        assert_eq!(count_zeros(&[1e-12, -1.0, 2.0]), (1, -1));
    }

    #[test]
    fn signature_parse_and_display() {
        let s = NodalSignature::parse("2,1;+,-").unwrap();
        assert_eq!(s.zeros(), &[2, 1]);
        assert_eq!(s.signs(), &[1, -1]);
        assert_eq!(s.to_string(), "2,1;+,-");
        assert_eq!(NodalSignature::parse("0,0").unwrap(), NodalSignature::positive(vec![0, 0]));
        assert!(NodalSignature::parse("a").is_err());
        assert!(NodalSignature::parse("1,1;+").is_err());
    }

    #[test]
    fn seeds_have_requested_structure() {
        let m = reference(1301);
        let seed = nodal_seed(&m, &NodalSignature::parse("0,0").unwrap(), 2.0).unwrap();
        let g = m.grid();
        assert!((seed[g.nearest(0.5)] - 2.0).abs() < 1e-12);
        assert_eq!(seed[g.nearest(1.5)], 0.0);

        let sig = NodalSignature::parse("2,1;+,-").unwrap();
        let seed = nodal_seed(&m, &sig, 2.0).unwrap();
        assert_eq!(signature_of(&m, &seed), sig);
        assert!(seed[g.nearest(2.1)] < 0.0);
        assert!(seed[g.nearest(0.1)] > 0.0);
    }

    #[test]
    fn ground_state_and_first_excited() {
        let m = reference(1301);
        let opts = LimitOptions::default();
        let seed = nodal_seed(&m, &NodalSignature::parse("0,0").unwrap(), 2.0).unwrap();
        let v00 = solve_limit(&m, &seed, &opts).unwrap();
        assert!(v00.residual <= 1e-11);
        assert!(m.forms().omega().iter().all(|&i| v00.u[i] > 0.0));
        // limit solutions of a positive energy problem have J > 0
        assert!(v00.j_value > 0.0);

        let seed = nodal_seed(&m, &NodalSignature::parse("1,0").unwrap(), 2.0).unwrap();
        let v10 = solve_limit(&m, &seed, &opts).unwrap();
        assert_eq!(v10.signature.zeros(), &[1, 0]);
        // odd about the midpoint of the first well, even in the second
        let g = m.grid();
        assert!((v10.u[g.nearest(0.25)] + v10.u[g.nearest(0.75)]).abs() < 1e-9);
        assert!((v10.u[g.nearest(2.25)] - v10.u[g.nearest(2.75)]).abs() < 1e-9);
    }

    #[test]
    fn solutions_are_fixed_points_and_symmetric() {
        let m = reference(1301);
        let opts = LimitOptions::default();
        let seed = nodal_seed(&m, &NodalSignature::parse("1,1").unwrap(), 2.0).unwrap();
        let sol = solve_limit(&m, &seed, &opts).unwrap();
        let fixed = &sol.u - &m.grad_k_inf(&sol.u);
        assert!(m.norm(&fixed) <= 1e-10);
        let neg = -1.0 * &sol.u;
        assert!(limit_residual_norm(&m, &neg) <= 1e-11);
        // re-solving reproduces the solution without moving
        let again = solve_limit(&m, &sol.u, &opts).unwrap();
        assert!((&again.u - &sol.u).max_abs() <= 1e-12);
    }

    #[test]
    fn trivial_seed_is_rejected() {
        let m = reference(651);
        let seed = nodal_seed(&m, &NodalSignature::parse("0,0").unwrap(), 1e-12).unwrap();
        let err = solve_limit(&m, &seed, &LimitOptions::default()).unwrap_err();
        assert_eq!(err, Error::ConvergedToZero);
    }

    #[test]
    fn enumeration_counts() {
        let m = reference(651);
        let opts = LimitOptions::default();
        let e = enumerate_solutions(&m, 1, true, &opts);
        assert!(e.failures.is_empty(), "{:?}", e.failures);
        let mut zs: Vec<Vec<usize>> = e.solutions.iter().map(|s| s.signature.zeros().to_vec()).collect();
        zs.sort();
        assert_eq!(zs, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);

        let single = single_well(-3.0, 4.0, 701);
        assert_eq!(enumerate_solutions(&single, 0, true, &opts).solutions.len(), 1);
    }

    #[test]
    fn signature_lists() {
        assert_eq!(signatures(2, 2, true).len(), 9);
        assert_eq!(signatures(2, 1, false).len(), 16);
        assert_eq!(signatures(1, 0, true), vec![NodalSignature::positive(vec![0])]);
    }

    #[test]
    fn shooting_symmetry() {
        let m = single_well(-1.0, 2.0, 1501);
        let g = m.grid();
        let u0 = shooting_oracle(&m, (0.0, 1.0), 0).unwrap();
        let u1 = shooting_oracle(&m, (0.0, 1.0), 1).unwrap();
        let (il, ir) = (g.nearest(0.0), g.nearest(1.0));
        for k in 0..=(ir - il) {
            assert!((u0[il + k] - u0[ir - k]).abs() < 1e-6);
            assert!((u1[il + k] + u1[ir - k]).abs() < 1e-6);
        }
        assert!(u0[g.nearest(0.5)] > 0.0);
        assert_eq!(count_zeros(&u1.as_slice()[il + 1..ir]).0, 1);
    }

    #[test]
    fn shooting_needs_a_bracket() {
        let m = single_well(-1.0, 2.0, 301);
        assert!(matches!(shooting_oracle(&m, (0.0, 1.0), 40), Err(Error::BracketingFailed(_))));
    }
}
