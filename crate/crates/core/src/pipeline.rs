//! Batch pipelines behind the command-line driver: limit solves, spectra,
//! continuation and the check suite, written as CSV plus a JSON summary.

use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::{Problem, RunConfig};
use crate::continuation::{continue_branch, Branch};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::limit::{nodal_seed, solve_limit, LimitSolution, NodalSignature};
use crate::model::Model;
use crate::spectral::{hessian_spectrum, SpectralReport};
use crate::verify::{
    ball_samples, check_deg_est, check_dk_convergence, check_f_residual, check_norm_inequalities, hex_digest, CheckReport,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    SolveLimit,
    Spectrum,
    /// Continue the given signatures, or all configured ones.
    Continue(Vec<NodalSignature>),
    Verify,
    All,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub plots: bool,
    pub threads: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BranchSummary {
    pub signature: String,
    pub converged: bool,
    pub degenerate: bool,
    pub rungs: usize,
    pub empirical_lambda: Option<f64>,
    pub decay_slope: Option<f64>,
    pub alpha: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub limit_solutions: Vec<String>,
    pub limit_failures: Vec<String>,
    pub branches: Vec<BranchSummary>,
    pub checks: Vec<(String, bool)>,
    pub ok: bool,
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// File-name-safe signature tag, e.g. `1_0_pm`.
fn tag(sig: &NodalSignature) -> String {
    let z: Vec<String> = sig.zeros().iter().map(|z| z.to_string()).collect();
    let s: String = sig.signs().iter().map(|s| if *s > 0 { 'p' } else { 'm' }).collect();
    format!("{}_{s}", z.join("_"))
}

/// Run `f` over `items` on up to `threads` scoped workers; results keep the
/// input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

struct Writer {
    out: PathBuf,
    hash: String,
}

impl Writer {
    fn table(&self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        let mut head = vec!["config_hash"];
        head.extend_from_slice(header);
        w.write_record(&head).map_err(io)?;
        for row in rows {
            let mut rec = vec![self.hash.clone()];
            rec.extend(row);
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    fn snapshot(&self, name: &str, x: &[f64], u: &Field) -> Result<()> {
        let rows = x.iter().zip(u.iter()).map(|(x, u)| vec![fmt(*x), fmt(*u)]).collect();
        self.table(name, &["x", "u"], rows)
    }
}

/// Shortest round-trip formatting, stable across runs.
fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn solve_all(model: &Model, problem: &Problem, threads: usize) -> Vec<(NodalSignature, Result<LimitSolution>)> {
    let results = parallel_map(&problem.signatures, threads, |sig| {
        nodal_seed(model, sig, problem.limit.amplitude).and_then(|seed| solve_limit(model, &seed, &problem.limit))
    });
    problem.signatures.iter().cloned().zip(results).collect()
}

fn write_solutions(
    w: &Writer,
    model: &Model,
    sols: &[(NodalSignature, Result<LimitSolution>)],
    summary: &mut RunSummary,
) -> Result<()> {
    let mut rows = Vec::new();
    for (sig, r) in sols {
        match r {
            Ok(s) => {
                let sq = Field::new(s.u.iter().map(|v| v * v).collect());
                let l2 = model.grid().integrate(&sq)?.sqrt();
                rows.push(vec![
                    sig.to_string(),
                    "ok".into(),
                    fmt(s.residual),
                    fmt(s.j_value),
                    fmt(s.u.max_abs()),
                    fmt(l2),
                    String::new(),
                ]);
                summary.limit_solutions.push(sig.to_string());
                w.snapshot(&format!("snapshots/{}/limit.csv", tag(sig)), model.grid().nodes(), &s.u)?;
            }
            Err(e) => {
                rows.push(vec![
                    sig.to_string(),
                    "failed".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]);
                summary.limit_failures.push(format!("{sig}: {e}"));
            }
        }
    }
    w.table("solutions.csv", &["signature", "status", "residual", "J", "max_abs", "l2_norm", "error"], rows)
}

fn write_spectra(w: &Writer, reports: &[(NodalSignature, Result<SpectralReport>)]) -> Result<()> {
    let rows = reports
        .iter()
        .map(|(sig, r)| match r {
            Ok(r) => vec![
                sig.to_string(),
                r.morse_index.to_string(),
                fmt(r.nondeg_margin),
                r.index_sign.to_string(),
                r.det_sign.to_string(),
                if r.is_nondegenerate() { "nondegenerate".into() } else { "degenerate".into() },
                r.eigenvalues_head.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(";"),
            ],
            Err(e) => vec![
                sig.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("error: {e}"),
                String::new(),
            ],
        })
        .collect();
    w.table(
        "spectrum.csv",
        &["signature", "morse_index", "nondeg_margin", "index_sign", "det_sign", "status", "eigenvalues_head"],
        rows,
    )
}

fn write_branch(w: &Writer, model: &Model, sig: &NodalSignature, b: &Branch) -> Result<()> {
    let rows = b
        .records
        .iter()
        .map(|r| {
            vec![
                sig.to_string(),
                fmt(r.lambda),
                fmt(r.residual_lambda),
                fmt(r.dist_to_limit),
                fmt(r.exterior_mass),
                fmt(r.j_value),
                r.iterations.to_string(),
                r.method.as_str().into(),
                r.signature.to_string(),
            ]
        })
        .collect();
    w.table(
        &format!("branch_{}.csv", tag(sig)),
        &["signature", "lambda", "residual", "dist_to_limit", "exterior_mass", "J", "iterations", "method", "omega_signature"],
        rows,
    )?;
    for (k, r) in b.records.iter().enumerate() {
        w.snapshot(&format!("snapshots/{}/rung_{k:02}.csv", tag(sig)), model.grid().nodes(), &r.u)?;
    }
    Ok(())
}

fn write_checks(w: &Writer, reports: &[(String, CheckReport)]) -> Result<()> {
    let mut rows = Vec::new();
    for (subject, r) in reports {
        for (lambda, value) in &r.lambda_table {
            rows.push(vec![
                r.name.clone(),
                subject.clone(),
                fmt(*lambda),
                fmt(*value),
                if r.verdict { "pass".into() } else { "fail".into() },
                r.criterion.clone(),
                r.seed.to_string(),
                r.spec_hash.clone(),
            ]);
        }
    }
    w.table("checks.csv", &["check", "subject", "lambda", "value", "verdict", "criterion", "seed", "spec_hash"], rows)
}

/// Run one subcommand. Configuration problems surface as [`Error::Config`];
/// numerical failures are reported in the summary with `ok = false`.
pub fn run_command(cmd: Command, opts: &RunOptions) -> Result<RunSummary> {
    let bytes = fs::read(&opts.config).map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", opts.config.display())]))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config(vec!["config is not UTF-8".into()]))?;
    let cfg = RunConfig::parse(&text)?;
    let mut problem = cfg.build()?;
    if let Some(seed) = opts.seed {
        problem.seed = seed;
    }
    if let Command::Continue(sigs) = &cmd {
        if !sigs.is_empty() {
            let k = problem.spec.domain().interval_count();
            if let Some(bad) = sigs.iter().find(|s| s.len() != k) {
                return Err(Error::Config(vec![format!("--signature {bad}: expected {k} entries")]));
            }
            problem.signatures = sigs.clone();
        }
    }
    fs::create_dir_all(&opts.out).map_err(io)?;
    let w = Writer { out: opts.out.clone(), hash: hex_digest(&bytes) };
    let model = Model::new(problem.spec.clone())?;
    let threads = opts.threads.max(1);
    let mut summary = RunSummary { config_hash: w.hash.clone(), seed: problem.seed, ok: true, ..RunSummary::default() };

    let sols = solve_all(&model, &problem, threads);
    let all = cmd == Command::All;
    if all || cmd == Command::SolveLimit {
        write_solutions(&w, &model, &sols, &mut summary)?;
    } else {
        summary.limit_solutions = sols.iter().filter(|s| s.1.is_ok()).map(|s| s.0.to_string()).collect();
        summary.limit_failures = sols.iter().filter_map(|(sig, r)| r.as_ref().err().map(|e| format!("{sig}: {e}"))).collect();
    }
    if !summary.limit_failures.is_empty() {
        summary.ok = false;
    }
    let solved: Vec<(NodalSignature, LimitSolution)> = sols.into_iter().filter_map(|(sig, r)| r.ok().map(|s| (sig, s))).collect();

    if all || cmd == Command::Spectrum {
        let reports: Vec<_> = parallel_map(&solved, threads, |(sig, s)| (sig.clone(), hessian_spectrum(&model, &s.u)));
        if reports.iter().any(|r| r.1.as_ref().map_or(true, |r| !r.is_nondegenerate() || !r.poincare_hopf_consistent())) {
            summary.ok = false;
        }
        write_spectra(&w, &reports)?;
    }

    if all || matches!(cmd, Command::Continue(_)) {
        let branches =
            parallel_map(&solved, threads, |(_, s)| continue_branch(&model, s, &problem.ladder, &problem.continuation));
        let mut x_snap = Vec::new();
        for ((sig, _), b) in solved.iter().zip(branches) {
            let mut bs = BranchSummary { signature: sig.to_string(), ..BranchSummary::default() };
            match b {
                Ok(b) => {
                    write_branch(&w, &model, sig, &b)?;
                    bs.converged = b.converged;
                    bs.rungs = b.records.len();
                    bs.empirical_lambda = b.empirical_lambda();
                    bs.decay_slope = b.decay_slope();
                    bs.alpha = Some(b.alpha);
                    bs.failure = b.failure.as_ref().map(|e| e.to_string());
                    x_snap.push((sig.clone(), b));
                }
                Err(e @ Error::SingularL { .. }) => {
                    bs.degenerate = true;
                    bs.failure = Some(format!("degenerate limit solution, not continued: {e}"));
                }
                Err(e) => bs.failure = Some(e.to_string()),
            }
            summary.ok &= bs.converged;
            summary.branches.push(bs);
        }
        if opts.plots {
            for (sig, b) in &x_snap {
                crate::plot::write_branch_plots(&opts.out, &tag(sig), model.grid().nodes(), b)?;
            }
        }
    }

    if all || cmd == Command::Verify {
        let lambdas = decades(&problem);
        let mut reports: Vec<(String, CheckReport)> = Vec::new();
        let per_sig = parallel_map(&solved, threads, |(sig, s)| {
            let delta = problem.continuation.delta_factor * model.norm(&s.u);
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(problem.seed);
            let samples = ball_samples(&model, &s.u, delta, problem.verify.samples, &mut rng);
            vec![
                (sig.to_string(), check_deg_est(&model, &samples, &lambdas, problem.seed)),
                (sig.to_string(), check_dk_convergence(&model, &s.u, &lambdas, problem.seed)),
                (sig.to_string(), check_f_residual(&model, &s.u, &lambdas)),
            ]
        });
        reports.extend(per_sig.into_iter().flatten());
        reports.push((
            "random".into(),
            check_norm_inequalities(&model, problem.seed, problem.verify.fields, &[1.0, 10.0, 1e3, 1e6]),
        ));
        for (subject, r) in &reports {
            summary.checks.push((format!("{}[{subject}]", r.name), r.verdict));
            summary.ok &= r.verdict;
        }
        write_checks(&w, &reports)?;
        if opts.plots {
            crate::plot::write_decay_plot(&opts.out, &reports)?;
        }
    }

    let json = serde_json::to_string_pretty(&summary).map_err(io)?;
    fs::write(opts.out.join("summary.json"), json).map_err(io)?;
    Ok(summary)
}

/// Ladder rungs that are whole decades apart, from `λ_min`.
fn decades(problem: &Problem) -> Vec<f64> {
    let v = problem.ladder.values();
    let mut out = vec![v[0]];
    for &l in &v[1..] {
        if l >= out[out.len() - 1] * 10.0 * (1.0 - 1e-9) {
            out.push(l);
        }
    }
    out
}

/// Exit status for a finished run: 0 on success, 1 on numerical failure.
pub fn exit_code(result: &Result<RunSummary>) -> i32 {
    match result {
        Ok(s) if s.ok => 0,
        Ok(_) => 1,
        Err(Error::Config(_)) => 2,
        Err(_) => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<u32> = (0..17).collect();
        assert_eq!(parallel_map(&items, 4, |x| x * 2), items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn tags_are_file_safe() {
        assert_eq!(tag(&NodalSignature::parse("1,0;+,-").unwrap()), "1_0_pm");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Err(Error::Config(vec![]))), 2);
        assert_eq!(exit_code(&Err(Error::ConvergedToZero)), 1);
        assert_eq!(exit_code(&Ok(RunSummary { ok: true, ..RunSummary::default() })), 0);
        assert_eq!(exit_code(&Ok(RunSummary::default())), 1);
    }
}
