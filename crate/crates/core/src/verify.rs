//! Executable versions of the decay estimates and norm inequalities, each
//! producing a table over `λ` and a verdict derivable from it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::field::Field;
use crate::model::{LambdaMetric, Model, ProblemSpec};
use crate::sampling::smooth_field;

/// Result of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub stagnated: bool,
}

/// Largest `|μ|` of an operator self-adjoint in the `λ`-metric, by power
/// iteration from `start`. Stops when the Rayleigh quotient moves by less
/// than `tol` (relative).
pub fn operator_norm(
    metric: &LambdaMetric,
    start: &Field,
    apply: impl Fn(&Field) -> Field,
    max_iter: usize,
    tol: f64,
) -> PowerEstimate {
    let n0 = metric.norm(start);
    if n0 == 0.0 {
        return PowerEstimate { value: 0.0, iterations: 0, stagnated: true };
    }
    let mut v = (1.0 / n0) * start;
    let mut value = 0.0f64;
    for it in 1..=max_iter {
        let w = apply(&v);
        let nw = metric.norm(&w);
        if nw == 0.0 {
            return PowerEstimate { value: 0.0, iterations: it, stagnated: true };
        }
        let prev = value;
        value = nw;
        v = (1.0 / nw) * &w;
        if (value - prev).abs() <= tol * value {
            return PowerEstimate { value, iterations: it, stagnated: true };
        }
    }
    PowerEstimate { value, iterations: max_iter, stagnated: false }
}

/// Hex SHA-256 of the serialized problem.
pub fn spec_hash(spec: &ProblemSpec) -> String {
    let bytes = serde_json::to_vec(spec).expect("problem spec serializes");
    hex_digest(&bytes)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub criterion: String,
    pub lambda_table: Vec<(f64, f64)>,
    pub verdict: bool,
    pub seed: u64,
    pub grid: String,
    pub spec_hash: String,
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(model: &Model, name: &str, criterion: &str, seed: u64, lambda_table: Vec<(f64, f64)>, verdict: bool) -> Self {
        let g = model.grid();
        Self {
            name: name.into(),
            criterion: criterion.into(),
            lambda_table,
            verdict,
            seed,
            grid: format!("[{}, {}] n={}", g.x_min(), g.x_max(), g.n()),
            spec_hash: spec_hash(model.spec()),
            notes: Vec::new(),
        }
    }
}

pub const DECAY_CRITERION: &str = "nonincreasing and final <= 1e-2 * initial";

/// Nonincreasing along the table and a total decay factor of at least 100.
/// An identically zero table passes.
pub fn decay_verdict(table: &[(f64, f64)]) -> bool {
    let Some(first) = table.first() else { return false };
    let last = table[table.len() - 1];
    table.windows(2).all(|w| w[1].1 <= w[0].1) && last.1 <= 1e-2 * first.1
}

/// Fixed sample for the decay of `k_λ(u) − k_∞(Pu)`: the `P` part is kept,
/// the `Q` part is rescaled at each `λ` to a fixed `λ`-norm.
#[derive(Debug, Clone)]
pub struct BallSample {
    pub p_part: Field,
    pub q_dir: Field,
    pub q_radius: f64,
}

impl BallSample {
    pub fn from_field(model: &Model, u: &Field, delta: f64) -> Self {
        let p_part = model.project_p(u);
        let q_dir = u - &p_part;
        let q_radius = model.norm(&q_dir).min(delta);
        Self { p_part, q_dir, q_radius }
    }

    pub fn at(&self, metric: &LambdaMetric) -> Field {
        let nq = metric.norm(&self.q_dir);
        let mut u = self.p_part.clone();
        if nq > 0.0 {
            u.axpy(self.q_radius / nq, &self.q_dir);
        }
        u
    }
}

/// Random samples around `center` with `‖Pu − center‖ ≤ δ` and `‖Qu‖_λ ≤ δ`.
pub fn ball_samples<R: Rng + ?Sized>(model: &Model, center: &Field, delta: f64, count: usize, rng: &mut R) -> Vec<BallSample> {
    (0..count)
        .map(|_| {
            let d = smooth_field(model.grid(), rng, 30);
            let pd = model.project_p(&d);
            let qd = &d - &pd;
            let np = model.norm(&pd);
            let mut p_part = center.clone();
            if np > 0.0 {
                p_part.axpy(delta * rng.gen::<f64>() / np, &pd);
            }
            BallSample { p_part, q_dir: qd, q_radius: delta * rng.gen::<f64>() }
        })
        .collect()
}

/// `max_samples ‖k_λ(u) − k_∞(Pu)‖_λ` at each `λ`.
pub fn check_deg_est(model: &Model, samples: &[BallSample], lambdas: &[f64], seed: u64) -> CheckReport {
    let table = lambdas
        .iter()
        .map(|&lambda| {
            let metric = model.metric(lambda).expect("ladder values are >= 1");
            let worst = samples
                .iter()
                .map(|s| {
                    let u = s.at(&metric);
                    let d = &model.grad_k_lambda(&u, &metric) - &model.grad_k_inf(&s.p_part);
                    metric.norm(&d)
                })
                .fold(0.0, f64::max);
            (lambda, worst)
        })
        .collect::<Vec<_>>();
    let verdict = decay_verdict(&table);
    CheckReport::new(model, "deg_est", DECAY_CRITERION, seed, table, verdict)
}

/// `‖Dk_λ(u_∞) − Dk_∞(u_∞)∘P‖_λ` by power iteration.
pub fn check_dk_convergence(model: &Model, u_inf: &Field, lambdas: &[f64], seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut notes = Vec::new();
    let mut table = Vec::new();
    for &lambda in lambdas {
        let metric = model.metric(lambda).expect("ladder values are >= 1");
        let dk = model.hess_dk(u_inf, &metric);
        let start = smooth_field(model.grid(), &mut rng, 30);
        let est = operator_norm(&metric, &start, |v| &dk.apply(v) - &model.dk_inf_p(u_inf, v), 200, 1e-10);
        if !est.stagnated {
            notes.push(format!("power iteration at lambda = {lambda:e} did not stagnate in {} steps", est.iterations));
        }
        table.push((lambda, est.value));
    }
    let verdict = decay_verdict(&table);
    let mut r = CheckReport::new(model, "dk_convergence", DECAY_CRITERION, seed, table, verdict);
    r.notes = notes;
    r
}

/// `‖u_∞ − k_λ(u_∞)‖_λ`.
pub fn check_f_residual(model: &Model, u_inf: &Field, lambdas: &[f64]) -> CheckReport {
    let table: Vec<(f64, f64)> = lambdas
        .iter()
        .map(|&lambda| (lambda, model.residual_norm(u_inf, &model.metric(lambda).expect("ladder values are >= 1"))))
        .collect();
    let verdict = decay_verdict(&table);
    CheckReport::new(model, "f_residual", DECAY_CRITERION, 0, table, verdict)
}

/// Counts violations of `‖k_λ(u)‖_λ ≤ ‖k(u)‖`, `‖Dk_λ(u)‖_λ ≤ ‖Dk(u)‖`
/// and `‖Dk_λ(u) − Dk_λ(v)‖_λ ≤ ‖Dk(u) − Dk(v)‖` beyond `1e-10` slack
/// (relative to `1 +` the right-hand side), per `λ`.
pub fn check_norm_inequalities(model: &Model, seed: u64, count: usize, lambdas: &[f64]) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<(Field, Field)> = (0..count)
        .map(|_| {
            let su = 3.0 * rng.gen::<f64>();
            let sv = 3.0 * rng.gen::<f64>();
            (su * &smooth_field(model.grid(), &mut rng, 20), sv * &smooth_field(model.grid(), &mut rng, 20))
        })
        .collect();
    let one = model.metric(1.0).expect("lambda = 1");
    let base: Vec<(f64, f64, f64)> = fields
        .iter()
        .map(|(u, v)| {
            let k = model.norm(&model.grad_k(u));
            let du = model.hess_dk(u, &one);
            let dv = model.hess_dk(v, &one);
            (k, du.norm(), du.difference_norm(&dv))
        })
        .collect();
    let slack = |rhs: f64| 1e-10 * (1.0 + rhs);
    let mut table = Vec::new();
    let mut total = 0usize;
    for &lambda in lambdas {
        let metric = model.metric(lambda).expect("lambda >= 1");
        let mut violations = 0usize;
        for ((u, v), &(k, dk, ddk)) in fields.iter().zip(&base) {
            let kl = metric.norm(&model.grad_k_lambda(u, &metric));
            let du = model.hess_dk(u, &metric);
            let dv = model.hess_dk(v, &metric);
            violations += usize::from(kl > k + slack(k));
            violations += usize::from(du.norm() > dk + slack(dk));
            violations += usize::from(du.difference_norm(&dv) > ddk + slack(ddk));
        }
        total += violations;
        table.push((lambda, violations as f64));
    }
    CheckReport::new(model, "norm_inequalities", "zero violations beyond 1e-10 slack", seed, table, total == 0)
}

/// Random field with an `O(1)` limit-space part (max-norm 1) and a
/// complementary part of unit `λ`-norm.
fn fd_probe<R: Rng + ?Sized>(model: &Model, metric: &LambdaMetric, rng: &mut R) -> Field {
    let d = smooth_field(model.grid(), rng, 8);
    let p = model.project_p(&d);
    let q = &d - &p;
    let mut u = (1.0 / p.max_abs()) * &p;
    u.axpy(1.0 / metric.norm(&q), &q);
    u
}

/// Observed convergence orders of central differences between step sizes
/// `h` and `h/10`: the gradient of `J_λ` against `J_λ` on `model`, and
/// `Dk_λ` against `k_λ` on `dk_model` (same grid). Two rows per triple;
/// the table's first column is `λ`.
pub fn check_fd_order(model: &Model, dk_model: &Model, seed: u64, triples: usize, h: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = Vec::new();
    for _ in 0..triples {
        let lambda = 10f64.powf(6.0 * rng.gen::<f64>());
        let metric = model.metric(lambda).expect("lambda >= 1");
        let u = fd_probe(model, &metric, &mut rng);
        let v = fd_probe(model, &metric, &mut rng);

        let grad = metric.inner(&model.grad_j_lambda(&u, &metric), &v);
        let j_err = |h: f64| {
            let jp = model.eval_j(&(&u + &(h * &v)), &metric).expect("finite J");
            let jm = model.eval_j(&(&u - &(h * &v)), &metric).expect("finite J");
            ((jp - jm) / (2.0 * h) - grad).abs()
        };
        table.push((lambda, (j_err(h) / j_err(h / 10.0)).log10()));

        let metric = dk_model.metric(lambda).expect("lambda >= 1");
        let dkv = dk_model.hess_dk(&u, &metric).apply(&v);
        let dk_err = |h: f64| {
            let kp = dk_model.grad_k_lambda(&(&u + &(h * &v)), &metric);
            let km = dk_model.grad_k_lambda(&(&u - &(h * &v)), &metric);
            let fd = (0.5 / h) * &(&kp - &km);
            metric.norm(&(&fd - &dkv))
        };
        table.push((lambda, (dk_err(h) / dk_err(h / 10.0)).log10()));
    }
    let verdict = table.iter().all(|(_, order)| *order >= 1.9);
    CheckReport::new(model, "fd_order", "observed order >= 1.9", seed, table, verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::{nodal_seed, solve_limit, LimitOptions, NodalSignature};
    use crate::model::Nonlinearity;
    use crate::profiles::DoubleWell;

    fn reference(n: usize) -> Model {
        Model::new(DoubleWell { n, ..DoubleWell::default() }.build().unwrap()).unwrap()
    }

    fn linear(n: usize) -> Model {
        let base = DoubleWell { n, ..DoubleWell::default() }.build().unwrap();
        let nn = base.grid().n();
        Model::new(base.with_nonlinearity(Nonlinearity::single(3.0, Field::zeros(nn))).unwrap()).unwrap()
    }

    fn v00(m: &Model) -> Field {
        let seed = nodal_seed(m, &NodalSignature::parse("0,0").unwrap(), 2.0).unwrap();
        solve_limit(m, &seed, &LimitOptions::default()).unwrap().u
    }

    const LAMBDAS: [f64; 6] = [10.0, 1e2, 1e3, 1e4, 1e5, 1e6];

    #[test]
    fn verdicts() {
        assert!(decay_verdict(&[(1.0, 1.0), (2.0, 0.1), (3.0, 0.01)]));
        assert!(!decay_verdict(&[(1.0, 1.0), (2.0, 0.1), (3.0, 0.011)]));
        assert!(!decay_verdict(&[(1.0, 1.0), (2.0, 1e-4), (3.0, 2e-4)]));
        assert!(decay_verdict(&[(1.0, 0.0), (2.0, 0.0)]));
        assert!(!decay_verdict(&[]));
    }

    #[test]
    fn linear_problem_is_trivial() {
        let m = linear(651);
        let u = m.extend_omega(&vec![0.5; m.forms().omega().len()]);
        let r = check_f_residual(&m, &u, &LAMBDAS);
        // b = 0 and W ≡ 0 give k ≡ 0, so the residual is ‖u‖ at every λ
        assert!(r.lambda_table.iter().all(|(_, v)| (v - m.norm(&u)).abs() < 1e-12));
        let dk = check_dk_convergence(&m, &u, &LAMBDAS, 1);
        assert!(dk.lambda_table.iter().all(|(_, v)| *v == 0.0));
        assert!(dk.verdict);
        let samples = vec![BallSample::from_field(&m, &u, 0.1)];
        let deg = check_deg_est(&m, &samples, &LAMBDAS, 0);
        assert!(deg.lambda_table.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn deg_est_at_the_limit_is_the_f_residual() {
        let m = reference(651);
        let u = v00(&m);
        let deg = check_deg_est(&m, &[BallSample::from_field(&m, &u, 0.1)], &LAMBDAS, 0);
        let f = check_f_residual(&m, &u, &LAMBDAS);
        for ((_, a), (_, b)) in deg.lambda_table.iter().zip(&f.lambda_table) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn dk_difference_bounded_by_sum_of_norms() {
        let m = reference(651);
        let u = v00(&m);
        let r = check_dk_convergence(&m, &u, &LAMBDAS, 3);
        let one = m.metric(1.0).unwrap();
        let dk = m.hess_dk(&u, &one).norm();
        // ‖Dk_∞(u)‖ on the limit space is bounded by ‖Dk(u)‖
        for (_, v) in &r.lambda_table {
            assert!(*v <= 2.0 * dk * (1.0 + 1e-9));
        }
        assert!(r.lambda_table.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn zero_field_satisfies_inequalities() {
        let m = reference(651);
        let z = Field::zeros(m.n());
        assert_eq!(m.norm(&m.grad_k(&z)), 0.0);
        let r = check_norm_inequalities(&m, 7, 10, &[1.0, 10.0, 1e3, 1e6]);
        assert!(r.verdict, "{:?}", r.lambda_table);
    }

    #[test]
    fn lambda_one_equality() {
        let m = reference(651);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = smooth_field(m.grid(), &mut rng, 10);
        let one = m.metric(1.0).unwrap();
        let a = one.norm(&m.grad_k_lambda(&u, &one));
        let b = m.norm(&m.grad_k(&u));
        assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn reports_are_deterministic() {
        let m = reference(651);
        let a = check_norm_inequalities(&m, 5, 3, &[1.0, 1e3]);
        let b = check_norm_inequalities(&m, 5, 3, &[1.0, 1e3]);
        assert_eq!(a, b);
        assert_eq!(a.spec_hash.len(), 64);
    }
}
