//! Browser demo: limit solutions, continuation to a chosen well depth, and
//! the decay table, on the reference double well. Results cross the wasm
//! boundary as JSON strings.

use deepwell::continuation::{continue_branch, ContinuationOptions, Ladder};
use deepwell::limit::{nodal_seed, solve_limit, LimitOptions, LimitSolution, NodalSignature};
use deepwell::profiles::DoubleWell;
use deepwell::spectral::hessian_spectrum;
use deepwell::verify::{ball_samples, check_deg_est, check_dk_convergence, check_f_residual};
use deepwell::Model;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct LimitView {
    signature: String,
    x: Vec<f64>,
    u: Vec<f64>,
    j: f64,
    residual: f64,
    morse_index: usize,
    nondeg_margin: f64,
}

#[derive(Serialize)]
struct ContinueView {
    x: Vec<f64>,
    u_inf: Vec<f64>,
    u: Vec<f64>,
    lambda: f64,
    exterior_mass: f64,
    dist_to_limit: f64,
    residual: f64,
    method: String,
    /// `(λ, exterior mass)` on every rung solved on the way down.
    mass_by_lambda: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct DecayRow {
    lambda: f64,
    deg_est: f64,
    dk_convergence: f64,
    f_residual: f64,
}

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// The reference problem on a grid of `n` nodes.
#[wasm_bindgen]
pub struct Demo {
    model: Model,
}

impl Demo {
    fn limit(&self, signature: &str) -> Result<LimitSolution, deepwell::Error> {
        let sig = NodalSignature::parse(signature)?;
        let seed = nodal_seed(&self.model, &sig, 2.0)?;
        solve_limit(&self.model, &seed, &LimitOptions::default())
    }

    /// Geometric rungs from `lambda` up to `1e6`, about four per decade.
    fn ladder_from(lambda: f64) -> Result<Ladder, deepwell::Error> {
        let top: f64 = 1e6;
        if lambda >= top {
            return Ladder::new(vec![lambda]);
        }
        let steps = ((top / lambda).log10() * 4.0).ceil().max(1.0) as usize;
        let ratio = (top / lambda).powf(1.0 / steps as f64);
        Ladder::new((0..=steps).map(|k| lambda * ratio.powi(k as i32)).collect())
    }

    pub fn solve_limit_view(&self, signature: &str) -> Result<String, deepwell::Error> {
        let sol = self.limit(signature)?;
        let spec = hessian_spectrum(&self.model, &sol.u)?;
        let view = LimitView {
            signature: sol.signature.to_string(),
            x: self.model.grid().nodes().to_vec(),
            u: sol.u.as_slice().to_vec(),
            j: sol.j_value,
            residual: sol.residual,
            morse_index: spec.morse_index,
            nondeg_margin: spec.nondeg_margin,
        };
        Ok(serde_json::to_string(&view).expect("serializable"))
    }

    pub fn continue_view(&self, signature: &str, lambda: f64) -> Result<String, deepwell::Error> {
        let sol = self.limit(signature)?;
        let ladder = Self::ladder_from(lambda)?;
        let branch = continue_branch(&self.model, &sol, &ladder, &ContinuationOptions::default())?;
        if let Some(e) = &branch.failure {
            return Err(e.clone());
        }
        let r = &branch.records[0];
        let view = ContinueView {
            x: self.model.grid().nodes().to_vec(),
            u_inf: sol.u.as_slice().to_vec(),
            u: r.u.as_slice().to_vec(),
            lambda: r.lambda,
            exterior_mass: r.exterior_mass,
            dist_to_limit: r.dist_to_limit,
            residual: r.residual_lambda,
            method: r.method.as_str().into(),
            mass_by_lambda: branch.records.iter().map(|r| (r.lambda, r.exterior_mass)).collect(),
        };
        Ok(serde_json::to_string(&view).expect("serializable"))
    }

    pub fn decay_view(&self, signature: &str, samples: usize, seed: u64) -> Result<String, deepwell::Error> {
        let sol = self.limit(signature)?;
        let lambdas = [10.0, 1e2, 1e3, 1e4, 1e5, 1e6];
        let delta = 0.1 * self.model.norm(&sol.u);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let balls = ball_samples(&self.model, &sol.u, delta, samples.max(1), &mut rng);
        let deg = check_deg_est(&self.model, &balls, &lambdas, seed);
        let dk = check_dk_convergence(&self.model, &sol.u, &lambdas, seed);
        let f = check_f_residual(&self.model, &sol.u, &lambdas);
        let rows: Vec<DecayRow> = lambdas
            .iter()
            .enumerate()
            .map(|(k, &lambda)| DecayRow {
                lambda,
                deg_est: deg.lambda_table[k].1,
                dk_convergence: dk.lambda_table[k].1,
                f_residual: f.lambda_table[k].1,
            })
            .collect();
        Ok(serde_json::to_string(&rows).expect("serializable"))
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize) -> Result<Demo, JsError> {
        let spec = DoubleWell { n, ..DoubleWell::default() }.build().map_err(js)?;
        Ok(Demo { model: Model::new(spec).map_err(js)? })
    }

    /// Limit solution for a signature such as `"1,0"`.
    #[wasm_bindgen(js_name = solveLimit)]
    pub fn solve_limit(&self, signature: &str) -> Result<String, JsError> {
        self.solve_limit_view(signature).map_err(js)
    }

    /// Continue the limit solution down to `lambda`; returns the overlay of
    /// `u_∞` and `u_λ` and the exterior mass.
    #[wasm_bindgen(js_name = continueTo)]
    pub fn continue_to(&self, signature: &str, lambda: f64) -> Result<String, JsError> {
        self.continue_view(signature, lambda).map_err(js)
    }

    /// Decay of the three consistency quantities over six decades of `λ`.
    #[wasm_bindgen(js_name = decayTable)]
    pub fn decay_table(&self, signature: &str, samples: usize, seed: u64) -> Result<String, JsError> {
        self.decay_view(signature, samples, seed).map_err(js)
    }
}
